#pragma once

// CSV formats:
//   pose      frame,timestamp_s,joint,x_m,y_m,z_m   (one row per joint per frame)
//   manifest  video_id,subject_id,tug_s
//   features  subject_id,video_id,tug_s,<feature columns...>
// Numbers are written in shortest round-trip form, so reading back yields
// the identical doubles and repeated runs produce identical bytes.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <unistd.h>

#include "tugscore/dataset.hpp"
#include "tugscore/error.hpp"
#include "tugscore/pose.hpp"

namespace tugscore::io {

namespace fs = std::filesystem;

inline std::string format_double(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) fail(ErrorKind::Internal, "cannot format number");
  return std::string(buf, end);
}

// Writes through a temporary sibling and renames it into place.
inline void write_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path() && !path.parent_path().empty()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) fail(ErrorKind::Io, "cannot create directory " + path.parent_path().string());
  }
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) fail(ErrorKind::Io, "write to " + tmp.string() + " failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(ErrorKind::Io, "cannot move output into place at " + path.string());
  }
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

// Iterates non-empty lines with 1-based numbers; strips a trailing '\r'.
template <typename F>
void for_each_line(std::string_view text, F&& f) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    if (!line.empty()) f(line_no, line);
    pos = end + 1;
  }
}

[[noreturn]] inline void parse_error(const std::string& source, std::size_t line,
                                     std::size_t column, const std::string& what) {
  fail(ErrorKind::Parse,
       source + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + what);
}

inline double parse_number(std::string_view field, const std::string& source, std::size_t line,
                           std::size_t column) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || field.empty()) {
    parse_error(source, line, column, "expected a number, got '" + std::string(field) + "'");
  }
  if (!std::isfinite(v)) parse_error(source, line, column, "non-finite number");
  return v;
}

inline long parse_integer(std::string_view field, const std::string& source, std::size_t line,
                          std::size_t column) {
  long v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty()) {
    parse_error(source, line, column, "expected an integer, got '" + std::string(field) + "'");
  }
  return v;
}

inline void check_header(std::string_view line, std::string_view expected,
                         const std::string& source) {
  if (line != expected) {
    parse_error(source, 1, 1, "expected header '" + std::string(expected) + "'");
  }
}

inline void check_plain(const std::string& value, const std::string& what) {
  require(value.find_first_of(",\n\r") == std::string::npos && !value.empty(),
          ErrorKind::InvalidInput, what + " '" + value + "' must be non-empty without commas");
}

}  // namespace detail

inline constexpr std::string_view kPoseHeader = "frame,timestamp_s,joint,x_m,y_m,z_m";
inline constexpr std::string_view kManifestHeader = "video_id,subject_id,tug_s";

// Nominal frame rate: reciprocal of the median frame interval, rounded to mHz.
inline double nominal_frame_rate(const PoseSeries& series) {
  std::vector<double> dt;
  for (std::size_t f = 1; f < series.frames.size(); ++f) {
    dt.push_back(series.frames[f].timestamp_s - series.frames[f - 1].timestamp_s);
  }
  if (dt.empty()) return 30.0;
  std::nth_element(dt.begin(), dt.begin() + static_cast<std::ptrdiff_t>(dt.size() / 2), dt.end());
  const double median = dt[dt.size() / 2];
  if (!(median > 0.0)) return 30.0;
  return std::round(1000.0 / median) / 1000.0;
}

inline PoseSeries parse_pose_csv(std::string_view text, const std::string& source,
                                 const std::string& subject_id = {}) {
  PoseSeries series;
  series.subject_id = subject_id;
  bool header_seen = false;
  long current_frame = 0;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (!header_seen) {
      detail::check_header(line, kPoseHeader, source);
      header_seen = true;
      return;
    }
    const auto fields = detail::split_fields(line);
    if (fields.size() != 6) {
      detail::parse_error(source, line_no, std::min<std::size_t>(fields.size() + 1, 6),
                          "expected 6 fields, got " + std::to_string(fields.size()));
    }
    const long frame = detail::parse_integer(fields[0], source, line_no, 1);
    const double t = detail::parse_number(fields[1], source, line_no, 2);
    const std::string joint(fields[2]);
    if (!is_known_joint(joint)) {
      detail::parse_error(source, line_no, 3, "unknown joint '" + joint + "'");
    }
    const Vec3 p{detail::parse_number(fields[3], source, line_no, 4),
                 detail::parse_number(fields[4], source, line_no, 5),
                 detail::parse_number(fields[5], source, line_no, 6)};
    if (series.frames.empty() || frame != current_frame) {
      if (!series.frames.empty() && frame < current_frame) {
        detail::parse_error(source, line_no, 1, "frame numbers must not decrease");
      }
      current_frame = frame;
      series.frames.push_back(PoseFrame{t, {}});
    } else if (series.frames.back().timestamp_s != t) {
      detail::parse_error(source, line_no, 2, "timestamp differs within frame " +
                                                  std::to_string(frame));
    }
    if (!series.frames.back().joints.emplace(joint, p).second) {
      detail::parse_error(source, line_no, 3, "joint '" + joint + "' repeated in frame " +
                                                  std::to_string(frame));
    }
  });
  if (!header_seen) detail::parse_error(source, 1, 1, "empty file");
  series.frame_rate_hz = nominal_frame_rate(series);
  return series;
}

inline PoseSeries read_pose_csv(const fs::path& path, const std::string& subject_id = {}) {
  return parse_pose_csv(read_file(path), path.string(), subject_id);
}

inline std::string format_pose_csv(const PoseSeries& series) {
  std::string out(kPoseHeader);
  out += '\n';
  for (std::size_t f = 0; f < series.frames.size(); ++f) {
    const auto& frame = series.frames[f];
    const std::string prefix = std::to_string(f) + "," + format_double(frame.timestamp_s) + ",";
    // vocabulary order keeps files stable regardless of map ordering
    for (auto name : kJointVocabulary) {
      const auto it = frame.joints.find(name);
      if (it == frame.joints.end()) continue;
      out += prefix;
      out += name;
      for (double c : it->second) {
        out += ',';
        out += format_double(c);
      }
      out += '\n';
    }
  }
  return out;
}

struct ManifestEntry {
  std::string video_id;
  std::string subject_id;
  double tug_s = 0.0;
};

inline std::vector<ManifestEntry> parse_manifest_csv(std::string_view text,
                                                     const std::string& source) {
  std::vector<ManifestEntry> out;
  bool header_seen = false;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (!header_seen) {
      detail::check_header(line, kManifestHeader, source);
      header_seen = true;
      return;
    }
    const auto fields = detail::split_fields(line);
    if (fields.size() != 3) {
      detail::parse_error(source, line_no, std::min<std::size_t>(fields.size() + 1, 3),
                          "expected 3 fields, got " + std::to_string(fields.size()));
    }
    ManifestEntry e{std::string(fields[0]), std::string(fields[1]),
                    detail::parse_number(fields[2], source, line_no, 3)};
    if (e.video_id.empty()) detail::parse_error(source, line_no, 1, "empty video_id");
    if (!(e.tug_s > 0.0)) detail::parse_error(source, line_no, 3, "TUG score must be positive");
    for (const auto& prev : out) {
      if (prev.video_id == e.video_id) {
        detail::parse_error(source, line_no, 1, "duplicate video_id '" + e.video_id + "'");
      }
    }
    out.push_back(std::move(e));
  });
  if (!header_seen) detail::parse_error(source, 1, 1, "empty manifest");
  return out;
}

inline std::string format_manifest_csv(const std::vector<ManifestEntry>& entries) {
  std::string out(kManifestHeader);
  out += '\n';
  for (const auto& e : entries) {
    detail::check_plain(e.video_id, "video_id");
    detail::check_plain(e.subject_id, "subject_id");
    out += e.video_id + "," + e.subject_id + "," + format_double(e.tug_s) + "\n";
  }
  return out;
}

inline Dataset parse_feature_csv(std::string_view text, const std::string& source) {
  Dataset data;
  bool header_seen = false;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    const auto fields = detail::split_fields(line);
    if (!header_seen) {
      if (fields.size() < 4 || fields[0] != "subject_id" || fields[1] != "video_id" ||
          fields[2] != "tug_s") {
        detail::parse_error(source, 1, 1,
                            "header must start with subject_id,video_id,tug_s and name at "
                            "least one feature");
      }
      for (std::size_t i = 3; i < fields.size(); ++i) {
        if (fields[i].empty()) detail::parse_error(source, 1, i + 1, "empty feature name");
        data.feature_names.emplace_back(fields[i]);
      }
      header_seen = true;
      return;
    }
    if (fields.size() != data.feature_names.size() + 3) {
      detail::parse_error(source, line_no, std::min(fields.size(), data.feature_names.size() + 3),
                          "expected " + std::to_string(data.feature_names.size() + 3) +
                              " fields, got " + std::to_string(fields.size()));
    }
    GaitSample s;
    s.subject_id = std::string(fields[0]);
    s.video_id = std::string(fields[1]);
    s.tug_s = detail::parse_number(fields[2], source, line_no, 3);
    if (!(s.tug_s > 0.0)) detail::parse_error(source, line_no, 3, "TUG score must be positive");
    for (std::size_t i = 3; i < fields.size(); ++i) {
      s.features.push_back(detail::parse_number(fields[i], source, line_no, i + 1));
    }
    data.samples.push_back(std::move(s));
  });
  if (!header_seen) detail::parse_error(source, 1, 1, "empty feature file");
  return data;
}

inline Dataset read_feature_csv(const fs::path& path) {
  return parse_feature_csv(read_file(path), path.string());
}

inline std::string format_feature_csv(const Dataset& data) {
  std::string out = "subject_id,video_id,tug_s";
  for (const auto& n : data.feature_names) {
    detail::check_plain(n, "feature name");
    out += "," + n;
  }
  out += '\n';
  for (const auto& s : data.samples) {
    detail::check_plain(s.subject_id, "subject_id");
    detail::check_plain(s.video_id, "video_id");
    out += s.subject_id + "," + s.video_id + "," + format_double(s.tug_s);
    for (double v : s.features) out += "," + format_double(v);
    out += '\n';
  }
  return out;
}

}  // namespace tugscore::io
