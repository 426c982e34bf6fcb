#pragma once

// Gait characteristics from a 3D pose series.
//
// The body center (hip midpoint) is expressed in a walkway frame whose axes
// are anteroposterior (AP, along the principal direction of travel),
// mediolateral (ML) and vertical (V). The signal is cut into fixed windows;
// each window yields nine characteristics, and the per-characteristic mean
// and population variance across windows form the 18-value feature vector.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tugscore/error.hpp"
#include "tugscore/pose.hpp"

namespace tugscore::gait {

enum Axis : std::size_t { AP = 0, ML = 1, V = 2 };

struct GaitConfig {
  double window_s = 5.0;
  double threshold_hz = 0.7;          // low-frequency percentage cutoff, V axis
  double prominence_ratio = 0.3;      // x std of the detrended V position
  double min_peak_separation_s = 0.3;
  double min_displacement_m = 0.5;
  int min_spectrum_samples = 64;
  int spectrum_padding = 4;           // zero-padding factor of the periodogram
};

inline void validate(const GaitConfig& c) {
  require(c.window_s > 0.0 && std::isfinite(c.window_s), ErrorKind::Parameter,
          "window_s must be positive");
  require(c.threshold_hz > 0.0 && std::isfinite(c.threshold_hz), ErrorKind::Parameter,
          "threshold_hz must be positive");
  require(c.prominence_ratio >= 0.0 && std::isfinite(c.prominence_ratio), ErrorKind::Parameter,
          "prominence_ratio must be non-negative");
  require(c.min_peak_separation_s >= 0.0 && std::isfinite(c.min_peak_separation_s),
          ErrorKind::Parameter, "min_peak_separation_s must be non-negative");
  require(c.min_displacement_m >= 0.0 && std::isfinite(c.min_displacement_m),
          ErrorKind::Parameter, "min_displacement_m must be non-negative");
  require(c.min_spectrum_samples >= 4, ErrorKind::Parameter,
          "min_spectrum_samples must be at least 4");
  require(c.spectrum_padding >= 1, ErrorKind::Parameter, "spectrum_padding must be at least 1");
}

// Finite-difference accelerations below this are round-off, not motion.
inline constexpr double kAccelerationFloor = 1e-9;

struct BodyFrameSignal {
  std::vector<double> t;
  std::array<std::vector<double>, 3> position;
  std::array<std::vector<double>, 3> velocity;
  std::array<std::vector<double>, 3> acceleration;
  double frame_rate_hz = 30.0;

  std::size_t size() const noexcept { return t.size(); }
  double duration() const { return t.empty() ? 0.0 : t.back() - t.front(); }

  BodyFrameSignal slice(std::size_t first, std::size_t last) const {
    BodyFrameSignal out;
    out.frame_rate_hz = frame_rate_hz;
    out.t.assign(t.begin() + first, t.begin() + last);
    for (std::size_t a = 0; a < 3; ++a) {
      out.position[a].assign(position[a].begin() + first, position[a].begin() + last);
      out.velocity[a].assign(velocity[a].begin() + first, velocity[a].begin() + last);
      out.acceleration[a].assign(acceleration[a].begin() + first,
                                 acceleration[a].begin() + last);
    }
    return out;
  }
};

enum class Characteristic : std::size_t {
  GaitSpeed,
  SpeedVariability,
  StrideTime,
  StrideTimeVariability,
  StrideFrequency,
  MovementIntensity,
  LowFrequencyPercentage,
  AccelerationRange,
  StepLength,
};

inline constexpr std::size_t kCharacteristicCount = 9;
inline constexpr std::size_t kFeatureCount = 2 * kCharacteristicCount;

inline constexpr std::array<std::string_view, kCharacteristicCount> kCharacteristicNames = {
    "gait_speed",        "speed_variability",        "stride_time",
    "stride_time_variability", "stride_frequency",   "movement_intensity",
    "low_frequency_percentage", "acceleration_range", "step_length"};

// One window's values; a field is empty when the window could not supply it
// (too few gait events, flat spectrum).
struct GaitCharacteristics {
  std::array<std::optional<double>, kCharacteristicCount> values{};

  std::optional<double>& operator[](Characteristic c) {
    return values[static_cast<std::size_t>(c)];
  }
  const std::optional<double>& operator[](Characteristic c) const {
    return values[static_cast<std::size_t>(c)];
  }
};

inline const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (auto n : kCharacteristicNames) {
      out.push_back(std::string(n) + ".mean");
      out.push_back(std::string(n) + ".var");
    }
    return out;
  }();
  return names;
}

// Slot 2c is the mean of characteristic c, slot 2c+1 its population variance.
struct FeatureVector {
  std::array<double, kFeatureCount> values{};

  double mean(Characteristic c) const { return values[2 * static_cast<std::size_t>(c)]; }
  double variance(Characteristic c) const { return values[2 * static_cast<std::size_t>(c) + 1]; }
  static const std::vector<std::string>& names() { return feature_names(); }
};

namespace detail {

inline std::vector<double> derivative(std::span<const double> t, std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<double> d(n);
  d[0] = (x[1] - x[0]) / (t[1] - t[0]);
  d[n - 1] = (x[n - 1] - x[n - 2]) / (t[n - 1] - t[n - 2]);
  for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (x[i + 1] - x[i - 1]) / (t[i + 1] - t[i - 1]);
  return d;
}

// Three-point second derivative on a possibly irregular grid; the end values
// repeat their neighbours.
inline std::vector<double> second_derivative(std::span<const double> t,
                                             std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<double> d(n, 0.0);
  if (n < 3) return d;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h1 = t[i] - t[i - 1];
    const double h2 = t[i + 1] - t[i];
    d[i] = 2.0 * ((x[i + 1] - x[i]) / h2 - (x[i] - x[i - 1]) / h1) / (h1 + h2);
    if (std::abs(d[i]) < kAccelerationFloor) d[i] = 0.0;
  }
  d[0] = d[1];
  d[n - 1] = d[n - 2];
  return d;
}

inline double mean(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

inline double population_variance(std::span<const double> x) {
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size());
}

inline double population_sd(std::span<const double> x) { return std::sqrt(population_variance(x)); }

// Bessel-corrected; needs at least two values.
inline double sample_sd(std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  return std::sqrt(population_variance(x) * n / (n - 1.0));
}

// Linear interpolation of x(t) at time `at`, clamped to the ends.
inline double interpolate(std::span<const double> t, std::span<const double> x, double at) {
  if (at <= t.front()) return x.front();
  if (at >= t.back()) return x.back();
  const auto it = std::upper_bound(t.begin(), t.end(), at);
  const std::size_t hi = static_cast<std::size_t>(it - t.begin());
  const std::size_t lo = hi - 1;
  const double w = (at - t[lo]) / (t[hi] - t[lo]);
  return x[lo] + w * (x[hi] - x[lo]);
}

// Least-squares line through (t, x) removed from x.
inline std::vector<double> detrend(std::span<const double> t, std::span<const double> x) {
  const double tm = mean(t);
  const double xm = mean(x);
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    sxy += (t[i] - tm) * (x[i] - xm);
    sxx += (t[i] - tm) * (t[i] - tm);
  }
  const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - xm - slope * (t[i] - tm);
  return out;
}

// Vertex of the parabola through three (possibly unevenly spaced) samples.
inline double refine_peak(std::span<const double> t, std::span<const double> x, std::size_t i) {
  if (i == 0 || i + 1 >= x.size()) return t[i];
  const double t0 = t[i - 1], t1 = t[i], t2 = t[i + 1];
  const double y0 = x[i - 1], y1 = x[i], y2 = x[i + 1];
  const double d1 = (y1 - y0) / (t1 - t0);
  const double d2 = (y2 - y1) / (t2 - t1);
  const double curvature = (d2 - d1) / (t2 - t0);
  if (!(curvature < 0.0)) return t1;
  const double vertex = 0.5 * (t0 + t1) - d1 / (2.0 * curvature);
  return std::clamp(vertex, t0, t2);
}

struct Spectrum {
  std::vector<double> frequency;  // Hz, bins with f > 0
  std::vector<double> power;
};

// Hann-windowed, zero-padded periodogram of a mean-removed uniform series.
inline Spectrum periodogram(std::span<const double> x, double sample_rate, int padding) {
  const std::size_t n = x.size();
  const std::size_t m = n * static_cast<std::size_t>(std::max(1, padding));
  const double xm = mean(x);
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double hann =
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                             static_cast<double>(n - 1));
    w[i] = (x[i] - xm) * hann;
  }
  // Goertzel recurrence, four bins per pass; the zero padding contributes
  // nothing to the sums.
  constexpr std::size_t kLanes = 4;
  const std::size_t bins = m / 2;
  Spectrum s;
  s.frequency.resize(bins);
  s.power.resize(bins);
  for (std::size_t k0 = 1; k0 <= bins; k0 += kLanes) {
    std::array<double, kLanes> coeff{}, s1{}, s2{};
    for (std::size_t l = 0; l < kLanes; ++l) {
      coeff[l] = 2.0 * std::cos(2.0 * std::numbers::pi * static_cast<double>(k0 + l) /
                                static_cast<double>(m));
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t l = 0; l < kLanes; ++l) {
        const double s0 = w[i] + coeff[l] * s1[l] - s2[l];
        s2[l] = s1[l];
        s1[l] = s0;
      }
    }
    for (std::size_t l = 0; l < kLanes && k0 + l <= bins; ++l) {
      const std::size_t k = k0 + l;
      s.frequency[k - 1] = static_cast<double>(k) * sample_rate / static_cast<double>(m);
      s.power[k - 1] = std::max(0.0, s1[l] * s1[l] + s2[l] * s2[l] - coeff[l] * s1[l] * s2[l]);
    }
  }
  return s;
}

inline double horizontal_distance(const BodyFrameSignal& s, double from, double to) {
  const double dap = interpolate(s.t, s.position[AP], to) - interpolate(s.t, s.position[AP], from);
  const double dml = interpolate(s.t, s.position[ML], to) - interpolate(s.t, s.position[ML], from);
  return std::hypot(dap, dml);
}

}  // namespace detail

// Body center in the walkway frame. The AP axis is the principal axis of the
// horizontal trajectory, oriented towards the point farthest from the start.
inline BodyFrameSignal to_body_frame(const PoseSeries& series, double min_displacement_m = 0.5) {
  validate(series);
  const std::size_t n = series.frames.size();
  std::vector<double> t(n), x(n), y(n), z(n);
  for (std::size_t f = 0; f < n; ++f) {
    const Vec3 c = body_center(series.frames[f]);
    t[f] = series.frames[f].timestamp_s;
    x[f] = c[0];
    y[f] = c[1];
    z[f] = c[2];
  }

  double farthest = 0.0;
  std::size_t far_index = 0;
  for (std::size_t f = 0; f < n; ++f) {
    const double d = std::hypot(x[f] - x[0], y[f] - y[0]);
    if (d > farthest) {
      farthest = d;
      far_index = f;
    }
  }
  require(farthest >= min_displacement_m, ErrorKind::Stationary,
          "body center moves at most " + std::to_string(farthest) +
              " m horizontally; heading is undefined");

  const double xm = detail::mean(x);
  const double ym = detail::mean(y);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t f = 0; f < n; ++f) {
    sxx += (x[f] - xm) * (x[f] - xm);
    syy += (y[f] - ym) * (y[f] - ym);
    sxy += (x[f] - xm) * (y[f] - ym);
  }
  const double heading = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
  double ux = std::cos(heading);
  double uy = std::sin(heading);
  if (ux * (x[far_index] - x[0]) + uy * (y[far_index] - y[0]) < 0.0) {
    ux = -ux;
    uy = -uy;
  }

  BodyFrameSignal s;
  s.frame_rate_hz = series.frame_rate_hz;
  s.t = t;
  for (auto& p : s.position) p.resize(n);
  for (std::size_t f = 0; f < n; ++f) {
    const double dx = x[f] - x[0];
    const double dy = y[f] - y[0];
    s.position[AP][f] = ux * dx + uy * dy;
    s.position[ML][f] = -uy * dx + ux * dy;
    s.position[V][f] = z[f];
  }
  for (std::size_t a = 0; a < 3; ++a) {
    s.velocity[a] = detail::derivative(s.t, s.position[a]);
    s.acceleration[a] = detail::second_derivative(s.t, s.position[a]);
  }
  return s;
}

// Consecutive non-overlapping windows; a trailing piece shorter than half a
// window is dropped.
inline std::vector<BodyFrameSignal> segment_windows(const BodyFrameSignal& signal,
                                                    double window_s) {
  require(window_s > 0.0 && std::isfinite(window_s), ErrorKind::Parameter,
          "window length must be positive");
  const double total = signal.duration();
  require(total >= 0.5 * window_s, ErrorKind::TooShort,
          "signal of " + std::to_string(total) + " s is shorter than half a window");

  auto full = static_cast<std::size_t>(std::floor(total / window_s));
  // guards against total/window_s landing just below an integer
  if (static_cast<double>(full + 1) * window_s <= total) ++full;
  const double remainder = total - static_cast<double>(full) * window_s;
  const std::size_t count = full + (remainder >= 0.5 * window_s ? 1 : 0);

  std::vector<BodyFrameSignal> windows;
  const double t0 = signal.t.front();
  std::size_t first = 0;
  for (std::size_t w = 0; w < count; ++w) {
    std::size_t last = first;
    if (w + 1 == count) {
      last = signal.size();
    } else {
      const double end = t0 + static_cast<double>(w + 1) * window_s;
      while (last < signal.size() && signal.t[last] < end) ++last;
    }
    if (last - first >= 2) windows.push_back(signal.slice(first, last));
    first = last;
  }
  return windows;
}

// Peaks of the detrended vertical position, filtered by prominence and
// minimum separation. Times are refined to sub-frame resolution.
inline std::vector<double> detect_strides(const BodyFrameSignal& signal,
                                          const GaitConfig& config = {}) {
  const std::size_t n = signal.size();
  if (n < 3) fail(ErrorKind::InsufficientGaitEvents, "window has fewer than 3 samples");
  const std::vector<double> v = detail::detrend(signal.t, signal.position[V]);
  const double min_prominence = config.prominence_ratio * detail::population_sd(v);

  struct Candidate {
    std::size_t index;
    double height;
  };
  std::vector<Candidate> candidates;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!(v[i] > v[i - 1] && v[i] >= v[i + 1])) continue;
    double left_min = v[i];
    for (std::size_t j = i; j-- > 0;) {
      if (v[j] > v[i]) break;
      left_min = std::min(left_min, v[j]);
    }
    double right_min = v[i];
    for (std::size_t j = i + 1; j < n; ++j) {
      if (v[j] > v[i]) break;
      right_min = std::min(right_min, v[j]);
    }
    const double prominence = v[i] - std::max(left_min, right_min);
    if (prominence > 0.0 && prominence >= min_prominence) candidates.push_back({i, v[i]});
  }

  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.height > b.height; });
  std::vector<std::size_t> kept;
  for (const auto& c : candidates) {
    const bool clear = std::none_of(kept.begin(), kept.end(), [&](std::size_t k) {
      return std::abs(signal.t[k] - signal.t[c.index]) < config.min_peak_separation_s;
    });
    if (clear) kept.push_back(c.index);
  }
  std::sort(kept.begin(), kept.end());

  if (kept.size() < 3) {
    fail(ErrorKind::InsufficientGaitEvents,
         "found " + std::to_string(kept.size()) + " vertical peaks, need at least 3");
  }
  std::vector<double> times;
  times.reserve(kept.size());
  for (std::size_t i : kept) times.push_back(detail::refine_peak(signal.t, v, i));
  return times;
}

struct SpectralFeatures {
  double stride_frequency = 0.0;
  double low_frequency_percentage = 0.0;
};

// Modal frequencies of the per-axis acceleration spectra and the fraction of
// vertical power at or below threshold_hz. ML sways once per stride, V and AP
// oscillate once per step, so their modes are halved before the median.
inline SpectralFeatures spectral_features(const BodyFrameSignal& signal, double threshold_hz,
                                          const GaitConfig& config = {}) {
  require(threshold_hz > 0.0, ErrorKind::Parameter, "threshold frequency must be positive");
  const double rate = signal.frame_rate_hz;
  const auto samples = static_cast<std::size_t>(std::floor(signal.duration() * rate)) + 1;
  if (samples < static_cast<std::size_t>(config.min_spectrum_samples)) {
    fail(ErrorKind::TooShort, "window resamples to " + std::to_string(samples) +
                                  " points, need " + std::to_string(config.min_spectrum_samples));
  }

  std::array<std::optional<detail::Spectrum>, 3> spectra;
  for (std::size_t a = 0; a < 3; ++a) {
    std::vector<double> uniform(samples);
    for (std::size_t i = 0; i < samples; ++i) {
      uniform[i] = detail::interpolate(signal.t, signal.acceleration[a],
                                       signal.t.front() + static_cast<double>(i) / rate);
    }
    auto spectrum = detail::periodogram(uniform, rate, config.spectrum_padding);
    const double total = std::accumulate(spectrum.power.begin(), spectrum.power.end(), 0.0);
    if (total > 0.0) spectra[a] = std::move(spectrum);
  }
  if (!spectra[V]) fail(ErrorKind::UndefinedSpectrum, "vertical acceleration is identically zero");

  std::vector<double> modes;
  for (std::size_t a : {std::size_t{ML}, std::size_t{V}, std::size_t{AP}}) {
    if (!spectra[a]) continue;
    const auto& p = spectra[a]->power;
    const auto peak = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
    const double f = spectra[a]->frequency[peak];
    modes.push_back(a == ML ? f : 0.5 * f);
  }
  std::sort(modes.begin(), modes.end());
  const std::size_t h = modes.size() / 2;
  const double median = modes.size() % 2 == 1 ? modes[h] : 0.5 * (modes[h - 1] + modes[h]);

  const auto& vs = *spectra[V];
  double low = 0.0;
  double total = 0.0;
  for (std::size_t k = 0; k < vs.power.size(); ++k) {
    total += vs.power[k];
    if (vs.frequency[k] <= threshold_hz) low += vs.power[k];
  }
  return {median, low / total};
}

inline GaitCharacteristics compute_characteristics(const BodyFrameSignal& window,
                                                   const GaitConfig& config = {}) {
  using C = Characteristic;
  GaitCharacteristics out;
  const std::size_t n = window.size();
  require(n >= 2, ErrorKind::TooShort, "window needs at least 2 samples");

  std::vector<double> speed(n);
  std::vector<double> accel(n);
  for (std::size_t i = 0; i < n; ++i) {
    speed[i] = std::hypot(window.velocity[AP][i], window.velocity[ML][i]);
    accel[i] = std::sqrt(window.acceleration[AP][i] * window.acceleration[AP][i] +
                         window.acceleration[ML][i] * window.acceleration[ML][i] +
                         window.acceleration[V][i] * window.acceleration[V][i]);
  }
  out[C::GaitSpeed] = detail::mean(speed);
  out[C::MovementIntensity] = detail::population_sd(accel);
  const auto [lo, hi] = std::minmax_element(accel.begin(), accel.end());
  out[C::AccelerationRange] = *hi - *lo;

  try {
    const std::vector<double> peaks = detect_strides(window, config);
    std::vector<double> stride_times;
    std::vector<double> stride_speeds;
    for (std::size_t i = 0; i + 2 < peaks.size(); ++i) {
      const double dt = peaks[i + 2] - peaks[i];
      stride_times.push_back(dt);
      stride_speeds.push_back(detail::horizontal_distance(window, peaks[i], peaks[i + 2]) / dt);
    }
    std::vector<double> steps;
    for (std::size_t i = 0; i + 1 < peaks.size(); ++i) {
      steps.push_back(detail::horizontal_distance(window, peaks[i], peaks[i + 1]));
    }
    out[C::StrideTime] = detail::mean(stride_times);
    out[C::StepLength] = detail::mean(steps);
    if (stride_times.size() >= 2) {
      out[C::StrideTimeVariability] = detail::sample_sd(stride_times);
      out[C::SpeedVariability] = detail::sample_sd(stride_speeds);
    }
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::InsufficientGaitEvents) throw;
  }

  try {
    const auto spectral = spectral_features(window, config.threshold_hz, config);
    out[C::StrideFrequency] = spectral.stride_frequency;
    out[C::LowFrequencyPercentage] = spectral.low_frequency_percentage;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::UndefinedSpectrum && e.kind() != ErrorKind::TooShort) throw;
  }
  return out;
}

// Mean and population variance of each characteristic over the windows that
// supplied it.
inline FeatureVector aggregate_features(std::span<const GaitCharacteristics> per_window) {
  require(!per_window.empty(), ErrorKind::IncompleteFeature, "no windows to aggregate");
  FeatureVector fv;
  for (std::size_t c = 0; c < kCharacteristicCount; ++c) {
    std::vector<double> present;
    for (const auto& w : per_window) {
      if (w.values[c]) present.push_back(*w.values[c]);
    }
    if (present.empty()) {
      fail(ErrorKind::IncompleteFeature,
           "no window supplied " + std::string(kCharacteristicNames[c]));
    }
    fv.values[2 * c] = detail::mean(present);
    fv.values[2 * c + 1] = detail::population_variance(present);
  }
  return fv;
}

inline std::vector<GaitCharacteristics> characterize_windows(const PoseSeries& series,
                                                             const GaitConfig& config = {}) {
  validate(config);
  const BodyFrameSignal signal = to_body_frame(series, config.min_displacement_m);
  std::vector<GaitCharacteristics> out;
  for (const auto& w : segment_windows(signal, config.window_s)) {
    out.push_back(compute_characteristics(w, config));
  }
  return out;
}

// Full extraction: pose series to the 18-value feature vector.
inline FeatureVector extract_features(const PoseSeries& series, const GaitConfig& config = {}) {
  const auto windows = characterize_windows(series, config);
  return aggregate_features(windows);
}

}  // namespace tugscore::gait
