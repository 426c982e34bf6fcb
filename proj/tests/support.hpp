#pragma once

// Independent reference computations and fixtures shared by the test suites.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "tugscore/gaitfeat.hpp"
#include "tugscore/pose.hpp"

namespace testing_support {

// 1/2 v'Kv + eps*sum|v| - y'v
inline double svr_dual_objective(const Eigen::MatrixXd& K, const Eigen::VectorXd& y, double eps,
                                 const Eigen::VectorXd& v) {
  return 0.5 * v.dot(K * v) + eps * v.cwiseAbs().sum() - y.dot(v);
}

struct OracleSolution {
  Eigen::VectorXd v;
  double objective = 0.0;
};

// Dense QP over b = (a, a*) in [0, C]^2n with sum(a - a*) = 0, solved by
// accelerated projected gradient. The projection onto box + hyperplane is
// found by bisection on the multiplier of the equality constraint.
inline OracleSolution svr_dual_oracle(const Eigen::MatrixXd& K, const Eigen::VectorXd& y,
                                      double C, double eps, int iterations = 200000) {
  const Eigen::Index n = y.size();
  Eigen::VectorXd a = Eigen::VectorXd::Ones(2 * n);
  a.tail(n).setConstant(-1.0);
  Eigen::MatrixXd Q(2 * n, 2 * n);
  Q << K, -K, -K, K;
  Eigen::VectorXd p(2 * n);
  p.head(n) = Eigen::VectorXd::Constant(n, eps) - y;
  p.tail(n) = Eigen::VectorXd::Constant(n, eps) + y;

  auto project = [&](const Eigen::VectorXd& z) {
    auto at = [&](double lambda) {
      return (z - lambda * a).cwiseMax(0.0).cwiseMin(C).eval();
    };
    double lo = -z.cwiseAbs().maxCoeff() - C - 1.0;
    double hi = -lo;
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (a.dot(at(mid)) > 0.0) lo = mid; else hi = mid;
    }
    return at(0.5 * (lo + hi));
  };

  const double L = std::max(1e-12, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Q)
                                       .eigenvalues()
                                       .cwiseAbs()
                                       .maxCoeff());
  Eigen::VectorXd b = Eigen::VectorXd::Zero(2 * n);
  Eigen::VectorXd w = b;
  double t = 1.0;
  for (int it = 0; it < iterations; ++it) {
    const Eigen::VectorXd next = project(w - (Q * w + p) / L);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double step = (next - b).cwiseAbs().maxCoeff();
    w = next + ((t - 1.0) / t_next) * (next - b);
    b = next;
    t = t_next;
    if (it > 1000 && step < 1e-13 * std::max(1.0, C)) break;
  }
  OracleSolution out;
  out.v = b.head(n) - b.tail(n);
  out.objective = 0.5 * b.dot(Q * b) + p.dot(b);
  return out;
}

// Body-frame signal from sampled positions, differentiated like the library.
inline tugscore::gait::BodyFrameSignal make_signal(std::vector<double> t,
                                                   std::array<std::vector<double>, 3> position,
                                                   double rate = 30.0) {
  namespace d = tugscore::gait::detail;
  tugscore::gait::BodyFrameSignal s;
  s.t = std::move(t);
  s.frame_rate_hz = rate;
  for (std::size_t a = 0; a < 3; ++a) {
    s.position[a] = position[a];
    s.velocity[a] = d::derivative(s.t, s.position[a]);
    s.acceleration[a] = d::second_derivative(s.t, s.position[a]);
  }
  return s;
}

// Signal whose axes follow f_ap, f_ml, f_v over [0, duration] at `rate`.
inline tugscore::gait::BodyFrameSignal sampled_signal(double duration, double rate,
                                                      const std::function<double(double)>& ap,
                                                      const std::function<double(double)>& ml,
                                                      const std::function<double(double)>& v) {
  std::vector<double> t;
  std::array<std::vector<double>, 3> pos;
  const auto n = static_cast<std::size_t>(std::llround(duration * rate)) + 1;
  for (std::size_t i = 0; i < n; ++i) {
    const double ti = static_cast<double>(i) / rate;
    t.push_back(ti);
    pos[0].push_back(ap(ti));
    pos[1].push_back(ml(ti));
    pos[2].push_back(v(ti));
  }
  return make_signal(std::move(t), std::move(pos), rate);
}

// Hips moving with a constant world-frame velocity.
inline tugscore::PoseSeries constant_velocity_series(double vx, double vy, double duration,
                                                     double fps = 30.0) {
  tugscore::PoseSeries s;
  s.frame_rate_hz = fps;
  const auto n = static_cast<std::size_t>(std::llround(duration * fps)) + 1;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fps;
    tugscore::PoseFrame f;
    f.timestamp_s = t;
    // hips offset perpendicular to the motion so the midpoint is exact
    const double norm = std::hypot(vx, vy);
    const double px = -vy / norm * 0.15;
    const double py = vx / norm * 0.15;
    f.joints["left_hip"] = {vx * t + px, vy * t + py, 0.95};
    f.joints["right_hip"] = {vx * t - px, vy * t - py, 0.95};
    s.frames.push_back(std::move(f));
  }
  return s;
}

inline tugscore::PoseSeries transform(const tugscore::PoseSeries& in,
                                      const std::function<tugscore::Vec3(tugscore::Vec3)>& f,
                                      double time_shift = 0.0) {
  tugscore::PoseSeries out = in;
  for (auto& frame : out.frames) {
    frame.timestamp_s += time_shift;
    for (auto& [name, p] : frame.joints) p = f(p);
  }
  return out;
}

inline tugscore::Vec3 yaw(const tugscore::Vec3& p, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]};
}

// Fresh scratch directory under the build tree's temp area.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("tugscore_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing_support
