#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "support.hpp"
#include "tugscore/gaitfeat.hpp"
#include "tugscore/synthgait.hpp"

using namespace tugscore;
using namespace tugscore::gait;
using testing_support::constant_velocity_series;
using testing_support::sampled_signal;

namespace {

constexpr double kPi = std::numbers::pi;

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Internal;  // sentinel: nothing thrown
}

BodyFrameSignal timeline(double duration, double rate = 30.0) {
  return sampled_signal(duration, rate, [](double t) { return t; }, [](double) { return 0.0; },
                        [](double) { return 0.0; });
}

}  // namespace

TEST(BodyFrame, ConstantVelocityAlongX) {
  const auto s = to_body_frame(constant_velocity_series(1.0, 0.0, 4.0));
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_NEAR(s.velocity[AP][i], 1.0, 1e-12);
    EXPECT_NEAR(s.velocity[ML][i], 0.0, 1e-12);
    EXPECT_EQ(s.velocity[V][i], 0.0);
    for (std::size_t a = 0; a < 3; ++a) EXPECT_EQ(s.acceleration[a][i], 0.0);
  }
}

TEST(BodyFrame, WorldYawCancels) {
  const auto a = to_body_frame(constant_velocity_series(1.0, 0.0, 4.0));
  const auto b = to_body_frame(constant_velocity_series(0.0, 1.0, 4.0));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t ax = 0; ax < 3; ++ax) {
      EXPECT_NEAR(a.position[ax][i], b.position[ax][i], 1e-12);
      EXPECT_NEAR(a.velocity[ax][i], b.velocity[ax][i], 1e-12);
      EXPECT_NEAR(a.acceleration[ax][i], b.acceleration[ax][i], 1e-9);
    }
  }
}

TEST(BodyFrame, SchemaAndStationaryErrors) {
  auto one = constant_velocity_series(1.0, 0.0, 1.0);
  one.frames.resize(1);
  EXPECT_EQ(kind_of([&] { (void)to_body_frame(one); }), ErrorKind::Schema);

  auto no_hip = constant_velocity_series(1.0, 0.0, 1.0);
  no_hip.frames[3].joints.erase("left_hip");
  EXPECT_EQ(kind_of([&] { (void)to_body_frame(no_hip); }), ErrorKind::Schema);

  auto backwards = constant_velocity_series(1.0, 0.0, 1.0);
  backwards.frames[5].timestamp_s = backwards.frames[4].timestamp_s;
  EXPECT_EQ(kind_of([&] { (void)to_body_frame(backwards); }), ErrorKind::Schema);

  EXPECT_EQ(kind_of([&] { (void)to_body_frame(constant_velocity_series(0.1, 0.0, 4.0)); }),
            ErrorKind::Stationary);
}

TEST(Windows, CountsFollowRemainderRule) {
  EXPECT_EQ(segment_windows(timeline(10.0), 5.0).size(), 2u);
  EXPECT_EQ(segment_windows(timeline(12.6), 5.0).size(), 3u);
  EXPECT_EQ(segment_windows(timeline(11.9), 5.0).size(), 2u);
  EXPECT_EQ(kind_of([] { (void)segment_windows(timeline(2.0), 5.0); }), ErrorKind::TooShort);
  EXPECT_EQ(kind_of([] { (void)segment_windows(timeline(2.0), 0.0); }), ErrorKind::Parameter);
}

TEST(Windows, PartitionTheSignal) {
  const auto windows = segment_windows(timeline(12.6), 5.0);
  std::size_t total = 0;
  for (const auto& w : windows) total += w.size();
  EXPECT_EQ(total, timeline(12.6).size());
  EXPECT_NEAR(windows[0].duration(), 5.0 - 1.0 / 30.0, 1e-9);
}

TEST(Strides, PeriodicVerticalBounce) {
  const auto s = sampled_signal(6.0, 30.0, [](double t) { return t; }, [](double) { return 0.0; },
                                [](double t) { return 0.02 * std::sin(2.0 * kPi * t / 0.6); });
  const auto peaks = detect_strides(s);
  ASSERT_GE(peaks.size(), 3u);
  for (std::size_t i = 0; i + 2 < peaks.size(); ++i) {
    EXPECT_NEAR(peaks[i + 2] - peaks[i], 1.2, 1.0 / 30.0);
  }
}

TEST(Strides, TooFewPeaks) {
  const auto flat = sampled_signal(6.0, 30.0, [](double t) { return t; },
                                   [](double) { return 0.0; }, [](double) { return 1.0; });
  EXPECT_EQ(kind_of([&] { (void)detect_strides(flat); }), ErrorKind::InsufficientGaitEvents);
  // two bumps only
  const auto two = sampled_signal(3.0, 30.0, [](double t) { return t; },
                                  [](double) { return 0.0; },
                                  [](double t) { return 0.02 * std::sin(2.0 * kPi * t / 1.5); });
  EXPECT_EQ(kind_of([&] { (void)detect_strides(two); }), ErrorKind::InsufficientGaitEvents);
}

TEST(Spectrum, StrideFrequencyIsMedianOfModes) {
  const auto s = sampled_signal(
      10.0, 30.0, [](double t) { return t + 0.01 * std::sin(2.0 * kPi * 1.6 * t); },
      [](double t) { return 0.02 * std::sin(2.0 * kPi * 0.8 * t); },
      [](double t) { return 0.02 * std::sin(2.0 * kPi * 1.6 * t); });
  const auto f = spectral_features(s, 0.7);
  // bin width with 4x padding over 301 samples
  const double bin = 30.0 / (4.0 * 301.0);
  EXPECT_NEAR(f.stride_frequency, 0.8, bin);
}

TEST(Spectrum, LowFrequencyPercentageExtremes) {
  auto vertical = [](double hz) {
    return sampled_signal(10.0, 30.0, [](double t) { return t; }, [](double) { return 0.0; },
                          [hz](double t) { return 0.02 * std::sin(2.0 * kPi * hz * t); });
  };
  EXPECT_NEAR(spectral_features(vertical(2.0), 1.0).low_frequency_percentage, 0.0, 0.01);
  EXPECT_NEAR(spectral_features(vertical(0.5), 1.0).low_frequency_percentage, 1.0, 0.01);
}

TEST(Spectrum, UndefinedAndTooShort) {
  EXPECT_EQ(kind_of([] { (void)spectral_features(timeline(10.0), 0.7); }),
            ErrorKind::UndefinedSpectrum);
  EXPECT_EQ(kind_of([] { (void)spectral_features(timeline(1.0), 0.7); }), ErrorKind::TooShort);
}

TEST(Characteristics, ConstantVelocityHasNoAcceleration) {
  const auto s = to_body_frame(constant_velocity_series(1.0, 0.0, 5.0));
  const auto c = compute_characteristics(s);
  EXPECT_NEAR(*c[Characteristic::GaitSpeed], 1.0, 1e-9);
  EXPECT_EQ(*c[Characteristic::MovementIntensity], 0.0);
  EXPECT_EQ(*c[Characteristic::AccelerationRange], 0.0);
  EXPECT_FALSE(c[Characteristic::StrideTime]);
  EXPECT_FALSE(c[Characteristic::StepLength]);
  EXPECT_FALSE(c[Characteristic::SpeedVariability]);
  EXPECT_FALSE(c[Characteristic::StrideFrequency]);
}

TEST(Characteristics, DefaultWalkerMatchesConstruction) {
  const synth::WalkerParams p;
  const auto fv = extract_features(synth::generate_walker(p));
  const auto truth = synth::walker_truth(p);
  EXPECT_NEAR(fv.mean(Characteristic::StrideTime), truth.stride_time, 0.05 * truth.stride_time);
  EXPECT_NEAR(fv.mean(Characteristic::StrideTime), 1.2, 1.0 / 30.0);
  EXPECT_NEAR(fv.mean(Characteristic::StepLength), truth.step_length, 0.05 * truth.step_length);
  EXPECT_NEAR(fv.mean(Characteristic::GaitSpeed), truth.gait_speed, 0.05 * truth.gait_speed);
  EXPECT_NEAR(fv.mean(Characteristic::StrideFrequency), 1.0 / 1.2, 0.05);
  for (std::size_t c = 0; c < kCharacteristicCount; ++c) {
    EXPECT_GE(fv.values[2 * c], 0.0);
    EXPECT_GE(fv.values[2 * c + 1], 0.0);
  }
  EXPECT_LE(fv.mean(Characteristic::LowFrequencyPercentage), 1.0);
}

TEST(Characteristics, SpeedJitterShowsAsVariability) {
  // one window over the whole walk so that stride speeds pool across strides
  synth::WalkerParams p;
  p.speed_jitter_mps = 0.1;
  p.duration_s = 60.0;
  GaitConfig config;
  config.window_s = 60.0;
  int within = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    p.seed = seed;
    const auto fv = extract_features(synth::generate_walker(p), config);
    if (std::abs(fv.mean(Characteristic::SpeedVariability) - 0.1) <= 0.03) ++within;
  }
  EXPECT_GE(within, 9);
}

TEST(Aggregate, SingleAndPairedWindows) {
  GaitCharacteristics a;
  for (std::size_t c = 0; c < kCharacteristicCount; ++c) a.values[c] = 0.5 + static_cast<double>(c);
  const std::vector<GaitCharacteristics> one = {a};
  const auto fv = aggregate_features(one);
  for (std::size_t c = 0; c < kCharacteristicCount; ++c) {
    EXPECT_EQ(fv.values[2 * c], *a.values[c]);
    EXPECT_EQ(fv.values[2 * c + 1], 0.0);
  }

  GaitCharacteristics b = a;
  a.values[0] = 1.0;
  b.values[0] = 1.2;
  const std::vector<GaitCharacteristics> two = {a, b};
  const auto fv2 = aggregate_features(two);
  EXPECT_NEAR(fv2.mean(Characteristic::GaitSpeed), 1.1, 1e-12);
  EXPECT_NEAR(fv2.variance(Characteristic::GaitSpeed), 0.01, 1e-12);
}

TEST(Aggregate, MissingFieldsAreExcludedPerField) {
  GaitCharacteristics a;
  for (std::size_t c = 0; c < kCharacteristicCount; ++c) a.values[c] = 1.0;
  GaitCharacteristics b = a;
  b.values[static_cast<std::size_t>(Characteristic::StrideTime)] = std::nullopt;
  b.values[0] = 3.0;
  const std::vector<GaitCharacteristics> w = {a, b};
  const auto fv = aggregate_features(w);
  EXPECT_EQ(fv.mean(Characteristic::StrideTime), 1.0);
  EXPECT_EQ(fv.variance(Characteristic::StrideTime), 0.0);
  EXPECT_EQ(fv.mean(Characteristic::GaitSpeed), 2.0);
}

TEST(Aggregate, EmptyOrIncomplete) {
  EXPECT_EQ(kind_of([] { (void)aggregate_features({}); }), ErrorKind::IncompleteFeature);
  GaitCharacteristics a;
  for (std::size_t c = 0; c < kCharacteristicCount; ++c) a.values[c] = 1.0;
  a.values[static_cast<std::size_t>(Characteristic::StepLength)] = std::nullopt;
  const std::vector<GaitCharacteristics> w = {a};
  try {
    (void)aggregate_features(w);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::IncompleteFeature);
    EXPECT_NE(std::string(e.what()).find("step_length"), std::string::npos);
  }
}

TEST(FeatureNames, EighteenPairedLabels) {
  const auto& names = feature_names();
  ASSERT_EQ(names.size(), 18u);
  EXPECT_EQ(names[0], "gait_speed.mean");
  EXPECT_EQ(names[1], "gait_speed.var");
  EXPECT_EQ(names[2], "speed_variability.mean");
  EXPECT_EQ(names[17], "step_length.var");
}

class WalkerInvariance : public ::testing::Test {
 protected:
  static synth::WalkerParams params() {
    synth::WalkerParams p;
    p.duration_s = 20.0;
    p.heading_rad = 0.3;
    return p;
  }
};

TEST_F(WalkerInvariance, WorldYaw) {
  const auto series = synth::generate_walker(params());
  const auto ref = extract_features(series);
  for (double angle : {0.5 * kPi, 1.0, -2.5}) {
    const auto rotated = testing_support::transform(
        series, [angle](Vec3 p) { return testing_support::yaw(p, angle); });
    const auto fv = extract_features(rotated);
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      EXPECT_NEAR(fv.values[i], ref.values[i], 1e-9) << feature_names()[i] << " at " << angle;
    }
  }
}

TEST_F(WalkerInvariance, TimeShift) {
  const auto series = synth::generate_walker(params());
  const auto ref = extract_features(series);
  // a dyadic shift keeps every timestamp difference exact
  const auto shifted = testing_support::transform(series, [](Vec3 p) { return p; }, 64.0);
  const auto fv = extract_features(shifted);
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    EXPECT_NEAR(fv.values[i], ref.values[i], 1e-9) << feature_names()[i];
  }
}

TEST_F(WalkerInvariance, SpatialScaling) {
  const auto series = synth::generate_walker(params());
  const auto ref = extract_features(series);
  const auto doubled = testing_support::transform(
      series, [](Vec3 p) { return Vec3{2.0 * p[0], 2.0 * p[1], 2.0 * p[2]}; });
  GaitConfig config;
  const auto fv = extract_features(doubled, config);
  using C = Characteristic;
  for (C c : {C::GaitSpeed, C::SpeedVariability, C::StepLength, C::MovementIntensity,
              C::AccelerationRange}) {
    EXPECT_NEAR(fv.mean(c), 2.0 * ref.mean(c), 1e-9) << kCharacteristicNames[std::size_t(c)];
  }
  for (C c : {C::StrideTime, C::StrideFrequency, C::LowFrequencyPercentage}) {
    EXPECT_NEAR(fv.mean(c), ref.mean(c), 1e-9) << kCharacteristicNames[std::size_t(c)];
  }
}

TEST(Recovery, FiftySeededWalkers) {
  int good = 0;
  rng::Engine engine(77);
  for (int w = 0; w < 50; ++w) {
    synth::WalkerParams p;
    p.speed_mps = 0.4 + 1.0 * static_cast<double>(w) / 49.0;
    p.step_period_s = std::clamp(0.42 + 0.18 / p.speed_mps, 0.45, 1.2);
    p.step_length_m = p.speed_mps * p.step_period_s;
    p.sensor_noise_m = 0.0005;
    p.heading_rad = rng::uniform(engine, -kPi, kPi);
    p.seed = static_cast<std::uint64_t>(w);
    const auto truth = synth::walker_truth(p);
    const auto fv = extract_features(synth::generate_walker(p));
    auto close = [](double got, double want) { return std::abs(got - want) <= 0.05 * want; };
    if (close(fv.mean(Characteristic::GaitSpeed), truth.gait_speed) &&
        close(fv.mean(Characteristic::StrideTime), truth.stride_time) &&
        close(fv.mean(Characteristic::StepLength), truth.step_length)) {
      ++good;
    }
  }
  EXPECT_GE(good, 45);
}

TEST(Config, Validation) {
  GaitConfig c;
  c.window_s = -1.0;
  EXPECT_EQ(kind_of([&] { validate(c); }), ErrorKind::Parameter);
  c = {};
  c.threshold_hz = 0.0;
  EXPECT_EQ(kind_of([&] { validate(c); }), ErrorKind::Parameter);
  EXPECT_NO_THROW(validate(GaitConfig{}));
}
