#pragma once

#include <array>
#include <cmath>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "tugscore/error.hpp"

namespace tugscore {

// World coordinates in meters: x and y span the floor, z points up.
using Vec3 = std::array<double, 3>;

// Accepted joint names (COCO keypoint order).
inline constexpr std::array<std::string_view, 17> kJointVocabulary = {
    "nose",        "left_eye",       "right_eye",      "left_ear",   "right_ear",
    "left_shoulder", "right_shoulder", "left_elbow",   "right_elbow", "left_wrist",
    "right_wrist", "left_hip",       "right_hip",      "left_knee",  "right_knee",
    "left_ankle",  "right_ankle"};

// Joints every frame must carry; their midpoint is the body center.
inline constexpr std::array<std::string_view, 2> kBodyCenterJoints = {"left_hip", "right_hip"};

inline bool is_known_joint(std::string_view name) {
  for (auto j : kJointVocabulary) {
    if (j == name) return true;
  }
  return false;
}

struct PoseFrame {
  double timestamp_s = 0.0;
  std::map<std::string, Vec3, std::less<>> joints;
};

struct PoseSeries {
  std::string subject_id;
  double frame_rate_hz = 30.0;  // nominal
  std::vector<PoseFrame> frames;
};

inline void validate(const PoseSeries& series) {
  require(series.frames.size() >= 2, ErrorKind::Schema,
          "pose series needs at least 2 frames, got " + std::to_string(series.frames.size()));
  require(series.frame_rate_hz > 0.0 && std::isfinite(series.frame_rate_hz), ErrorKind::Schema,
          "frame rate must be positive");
  for (std::size_t f = 0; f < series.frames.size(); ++f) {
    const auto& frame = series.frames[f];
    require(std::isfinite(frame.timestamp_s), ErrorKind::Schema,
            "non-finite timestamp in frame " + std::to_string(f));
    if (f > 0) {
      require(frame.timestamp_s > series.frames[f - 1].timestamp_s, ErrorKind::Schema,
              "timestamps not strictly increasing at frame " + std::to_string(f));
    }
    for (auto name : kBodyCenterJoints) {
      require(frame.joints.find(name) != frame.joints.end(), ErrorKind::Schema,
              "frame " + std::to_string(f) + " lacks required joint " + std::string(name));
    }
    for (const auto& [name, p] : frame.joints) {
      require(std::isfinite(p[0]) && std::isfinite(p[1]) && std::isfinite(p[2]),
              ErrorKind::Schema,
              "non-finite coordinate for " + name + " in frame " + std::to_string(f));
    }
  }
}

inline Vec3 body_center(const PoseFrame& frame) {
  const Vec3& l = frame.joints.find(kBodyCenterJoints[0])->second;
  const Vec3& r = frame.joints.find(kBodyCenterJoints[1])->second;
  return {0.5 * (l[0] + r[0]), 0.5 * (l[1] + r[1]), 0.5 * (l[2] + r[2])};
}

}  // namespace tugscore
