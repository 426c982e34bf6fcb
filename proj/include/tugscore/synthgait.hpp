#pragma once

// Seeded generators for validation data: bivariate Gaussian samples, a
// walking body with known kinematics, and cohorts of walkers whose gait
// depends on a drawn TUG score.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "tugscore/copent.hpp"
#include "tugscore/dataset.hpp"
#include "tugscore/error.hpp"
#include "tugscore/gaitfeat.hpp"
#include "tugscore/pose.hpp"
#include "tugscore/random.hpp"

namespace tugscore::synth {

inline copent::SampleMatrix gaussian_samples(double rho, std::size_t n, std::uint64_t seed) {
  require(std::abs(rho) < 1.0, ErrorKind::Parameter, "|rho| must be below 1");
  require(n >= 10, ErrorKind::Parameter, "need at least 10 draws");
  rng::Engine engine(seed);
  const double residual = std::sqrt(1.0 - rho * rho);
  std::vector<double> values;
  values.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = rng::normal(engine);
    const double b = rng::normal(engine);
    values.push_back(a);
    values.push_back(rho * a + residual * b);
  }
  return copent::SampleMatrix(n, 2, std::move(values), {"x", "y"});
}

struct WalkerParams {
  double speed_mps = 1.0;
  double step_length_m = 0.6;
  double step_period_s = 0.6;
  double v_amplitude_m = 0.02;
  double ml_amplitude_m = 0.02;
  double ap_amplitude_m = 0.01;
  double speed_jitter_mps = 0.0;  // sd of the per-stride speed
  double sensor_noise_m = 0.0;    // sd of additive joint noise
  double duration_s = 30.0;
  double fps = 30.0;
  double heading_rad = 0.0;       // direction of travel in the world frame
  std::uint64_t seed = 0;
  std::string subject_id = "synthetic";
};

struct WalkerTruth {
  double gait_speed = 0.0;
  double stride_time = 0.0;
  double step_length = 0.0;
  double speed_variability = 0.0;
};

inline void validate(const WalkerParams& p) {
  auto positive = [](double v, const char* name) {
    require(v > 0.0 && std::isfinite(v), ErrorKind::Parameter, std::string(name) + " must be positive");
  };
  positive(p.speed_mps, "speed_mps");
  positive(p.step_length_m, "step_length_m");
  positive(p.step_period_s, "step_period_s");
  positive(p.duration_s, "duration_s");
  positive(p.fps, "fps");
  for (double v : {p.v_amplitude_m, p.ml_amplitude_m, p.ap_amplitude_m, p.speed_jitter_mps,
                   p.sensor_noise_m}) {
    require(v >= 0.0 && std::isfinite(v), ErrorKind::Parameter,
            "amplitudes, jitter and noise must be non-negative");
  }
  const double implied = p.speed_mps * p.step_period_s;
  require(std::abs(implied - p.step_length_m) <= 0.2 * p.step_length_m, ErrorKind::Parameter,
          "speed x step period = " + std::to_string(implied) +
              " m disagrees with step length " + std::to_string(p.step_length_m) +
              " m by more than 20%");
}

// Ground truth of the realised motion; step length follows speed x period.
inline WalkerTruth walker_truth(const WalkerParams& p) {
  return {p.speed_mps, 2.0 * p.step_period_s, p.speed_mps * p.step_period_s, p.speed_jitter_mps};
}

// Hip-centred skeleton walking a straight line. Vertical bounce peaks at the
// start of every step, lateral sway spans a stride, and the forward speed is
// piecewise constant per stride (stride boundaries coincide with every other
// vertical peak).
inline PoseSeries generate_walker(const WalkerParams& p) {
  validate(p);
  rng::Engine engine(p.seed);
  const double stride_s = 2.0 * p.step_period_s;
  const auto frames = static_cast<std::size_t>(std::llround(p.duration_s * p.fps)) + 1;
  const auto strides = static_cast<std::size_t>(std::ceil(p.duration_s / stride_s)) + 1;

  std::vector<double> stride_speed(strides);
  for (auto& v : stride_speed) {
    v = p.speed_mps;
    if (p.speed_jitter_mps > 0.0) {
      v = std::max(0.1 * p.speed_mps, v + p.speed_jitter_mps * rng::normal(engine));
    }
  }
  std::vector<double> stride_start(strides + 1, 0.0);
  for (std::size_t j = 0; j < strides; ++j) stride_start[j + 1] = stride_start[j] + stride_speed[j] * stride_s;

  const double hx = std::cos(p.heading_rad);
  const double hy = std::sin(p.heading_rad);
  constexpr double kHipHeight = 0.95;
  constexpr double kHalfHipWidth = 0.15;
  const double step_omega = 2.0 * std::numbers::pi / p.step_period_s;

  PoseSeries series;
  series.subject_id = p.subject_id;
  series.frame_rate_hz = p.fps;
  series.frames.reserve(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    const double t = static_cast<double>(f) / p.fps;
    const auto j = std::min(strides - 1, static_cast<std::size_t>(t / stride_s));
    const double forward = stride_start[j] + stride_speed[j] * (t - static_cast<double>(j) * stride_s) +
                           p.ap_amplitude_m * std::sin(step_omega * t);
    const double lateral = p.ml_amplitude_m * std::sin(0.5 * step_omega * t);
    const double up = kHipHeight + p.v_amplitude_m * std::cos(step_omega * t);

    auto place = [&](double ap, double ml, double v) {
      Vec3 out{hx * ap - hy * ml, hy * ap + hx * ml, v};
      if (p.sensor_noise_m > 0.0) {
        for (auto& c : out) c += p.sensor_noise_m * rng::normal(engine);
      }
      return out;
    };
    PoseFrame frame;
    frame.timestamp_s = t;
    frame.joints.emplace("nose", place(forward + 0.1, lateral, up + 0.7));
    frame.joints.emplace("left_hip", place(forward, lateral + kHalfHipWidth, up));
    frame.joints.emplace("right_hip", place(forward, lateral - kHalfHipWidth, up));
    frame.joints.emplace("left_ankle", place(forward, lateral + 0.1, up - 0.87));
    frame.joints.emplace("right_ankle", place(forward, lateral - 0.1, up - 0.87));
    series.frames.push_back(std::move(frame));
  }
  return series;
}

// TUG marginal: a lognormal bulk of healthy subjects plus a shifted
// exponential tail of slow ones.
struct TugDistribution {
  double bulk_weight = 0.82;
  double bulk_median_s = 8.0;
  double bulk_log_sd = 0.15;
  double tail_offset_s = 11.0;
  double tail_mean_s = 15.0;
  double max_s = 60.0;

  double draw(rng::Engine& engine) const {
    if (rng::uniform(engine) < bulk_weight) {
      return bulk_median_s * std::exp(bulk_log_sd * rng::normal(engine));
    }
    return std::min(max_s, tail_offset_s + rng::exponential(engine, tail_mean_s));
  }
};

// How a TUG score shapes the walker. Speed falls along a convex curve with
// noise that widens for slow subjects; per-stride speed jitter grows with TUG.
struct DependenceSpec {
  bool enabled = true;
  double speed_scale = 7.5;      // speed = scale / (tug - offset)
  double speed_offset_s = 1.5;
  double speed_log_sd = 0.2;
  double speed_log_sd_slope = 0.01;   // per second above 8 s
  double jitter_base_mps = 0.015;
  double jitter_slope = 0.006;        // per second above 5 s
  double jitter_log_sd = 0.05;
};

struct CohortParams {
  std::size_t n_videos = 146;
  std::size_t n_subjects = 40;
  TugDistribution tug;
  DependenceSpec dependence;
  double duration_s = 60.0;
  double fps = 30.0;
  double sensor_noise_m = 0.0005;
  std::uint64_t seed = 2020;
  gait::GaitConfig extraction;
  int max_attempts = 8;
};

struct CohortVideo {
  std::string video_id;
  std::string subject_id;
  double tug_s = 0.0;
  WalkerParams walker;
  int attempts = 1;
};

struct CohortTruth {
  std::vector<std::string> informative_features;
  std::vector<CohortVideo> videos;
  std::size_t regenerations = 0;
};

struct Cohort {
  Dataset dataset;
  CohortTruth truth;
};

inline std::vector<std::string> planted_features() {
  return {"speed_variability.mean", "gait_speed.mean", "step_length.mean"};
}

inline void validate(const CohortParams& p) {
  require(p.n_videos >= 10, ErrorKind::Parameter, "a cohort needs at least 10 videos");
  require(p.n_subjects >= 1, ErrorKind::Parameter, "a cohort needs at least 1 subject");
  require(p.duration_s > 0.0 && p.fps > 0.0, ErrorKind::Parameter,
          "duration and fps must be positive");
  require(p.max_attempts >= 1, ErrorKind::Parameter, "max_attempts must be positive");
}

inline WalkerParams walker_for(double gait_tug, const CohortParams& p, rng::Engine& engine) {
  const auto& d = p.dependence;
  const double log_sd = d.speed_log_sd + d.speed_log_sd_slope * std::max(0.0, gait_tug - 8.0);
  const double speed =
      std::clamp(d.speed_scale / std::max(gait_tug - d.speed_offset_s, 1.0) *
                     std::exp(log_sd * rng::normal(engine)),
                 0.25, 1.6);
  const double period =
      std::clamp(0.42 + 0.18 / speed, 0.45, 1.2) * std::exp(0.05 * rng::normal(engine));
  const double jitter = std::max(0.005, d.jitter_base_mps + d.jitter_slope * (gait_tug - 5.0)) *
                        std::exp(d.jitter_log_sd * rng::normal(engine));

  WalkerParams w;
  w.speed_mps = speed;
  w.step_period_s = period;
  w.step_length_m = speed * period;
  w.speed_jitter_mps = jitter;
  w.v_amplitude_m = 0.02 * std::exp(0.25 * rng::normal(engine));
  w.ml_amplitude_m = 0.02 * std::exp(0.25 * rng::normal(engine));
  w.ap_amplitude_m = 0.01 * std::exp(0.25 * rng::normal(engine));
  w.sensor_noise_m = p.sensor_noise_m;
  w.duration_s = p.duration_s;
  w.fps = p.fps;
  w.heading_rad = rng::uniform(engine, -std::numbers::pi, std::numbers::pi);
  w.seed = engine();
  return w;
}

inline std::string padded_id(char prefix, std::size_t index, std::size_t width) {
  std::string digits = std::to_string(index);
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return prefix + digits;
}

using PoseSink = std::function<void(const CohortVideo&, const PoseSeries&)>;

// Draws every video, synthesises its pose series and extracts the features.
// A video whose extraction fails is redrawn from a derived seed; the retries
// are counted in the truth record. `sink`, when set, sees every accepted
// pose series in video order.
inline Cohort generate_cohort(const CohortParams& p, const PoseSink& sink = {}) {
  validate(p);
  Cohort cohort;
  cohort.dataset.feature_names = gait::feature_names();
  cohort.truth.informative_features = p.dependence.enabled ? planted_features()
                                                           : std::vector<std::string>{};
  for (std::size_t i = 0; i < p.n_videos; ++i) {
    const std::uint64_t video_seed = rng::derive_seed(p.seed, i);
    for (int attempt = 0;; ++attempt) {
      require(attempt < p.max_attempts, ErrorKind::Internal,
              "video " + std::to_string(i) + " failed extraction " +
                  std::to_string(p.max_attempts) + " times");
      rng::Engine engine(attempt == 0 ? video_seed : rng::derive_seed(video_seed, attempt));
      CohortVideo video;
      video.video_id = padded_id('V', i, 3);
      video.subject_id = padded_id('S', i % p.n_subjects, 2);
      video.tug_s = p.tug.draw(engine);
      const double gait_tug = p.dependence.enabled ? video.tug_s : p.tug.draw(engine);
      video.walker = walker_for(gait_tug, p, engine);
      video.walker.subject_id = video.subject_id;
      video.attempts = attempt + 1;

      PoseSeries series = generate_walker(video.walker);
      gait::FeatureVector features;
      try {
        features = gait::extract_features(series, p.extraction);
      } catch (const Error&) {
        ++cohort.truth.regenerations;
        continue;
      }
      if (sink) sink(video, series);
      cohort.dataset.samples.push_back(
          {std::vector<double>(features.values.begin(), features.values.end()), video.tug_s,
           video.subject_id, video.video_id});
      cohort.truth.videos.push_back(std::move(video));
      break;
    }
  }
  return cohort;
}

}  // namespace tugscore::synth
