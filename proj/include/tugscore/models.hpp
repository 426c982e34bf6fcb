#pragma once

// Regression models from gait features to TUG scores: ordinary least squares
// and epsilon-insensitive support vector regression.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tugscore/error.hpp"
#include "tugscore/random.hpp"

namespace tugscore::models {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class KernelKind { Linear, Rbf };

struct KernelSpec {
  KernelKind kind = KernelKind::Rbf;
  double gamma = 1.0;

  static KernelSpec linear() { return {KernelKind::Linear, 0.0}; }
  static KernelSpec rbf(double gamma) { return {KernelKind::Rbf, gamma}; }

  void validate() const {
    if (kind == KernelKind::Rbf) {
      require(gamma > 0.0 && std::isfinite(gamma), ErrorKind::Parameter,
              "rbf kernel needs a positive gamma");
    }
  }
};

inline double kernel_eval(const KernelSpec& kernel, std::span<const double> a,
                          std::span<const double> b) {
  require(a.size() == b.size(), ErrorKind::DimensionMismatch,
          "kernel arguments differ in length: " + std::to_string(a.size()) + " vs " +
              std::to_string(b.size()));
  if (kernel.kind == KernelKind::Linear) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
  }
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
  return std::exp(-kernel.gamma * d2);
}

namespace detail {

inline void check_training_data(const Matrix& X, const Vector& y) {
  require(X.rows() == y.size(), ErrorKind::DimensionMismatch,
          "design has " + std::to_string(X.rows()) + " rows but " + std::to_string(y.size()) +
              " targets");
  require(X.allFinite() && y.allFinite(), ErrorKind::InvalidInput,
          "training data contains non-finite values");
}

inline std::vector<double> row(const Matrix& X, Eigen::Index r) {
  std::vector<double> out(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index c = 0; c < X.cols(); ++c) out[static_cast<std::size_t>(c)] = X(r, c);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear regression

struct LRModel {
  std::vector<double> coefficients;
  double intercept = 0.0;
  std::vector<std::string> feature_names;
};

// Least squares with an intercept via column-pivoted QR. A design whose
// numerical rank is below its column count is rejected, naming the columns
// that the pivoting found dependent.
inline LRModel fit_lr(const Matrix& X, const Vector& y, std::vector<std::string> names = {}) {
  detail::check_training_data(X, y);
  const Eigen::Index p = X.cols();
  require(X.rows() >= p + 1, ErrorKind::InvalidInput,
          "need at least " + std::to_string(p + 1) + " rows for " + std::to_string(p) +
              " features, got " + std::to_string(X.rows()));
  if (names.empty()) {
    for (Eigen::Index j = 0; j < p; ++j) names.push_back("x" + std::to_string(j));
  }
  require(names.size() == static_cast<std::size_t>(p), ErrorKind::InvalidInput,
          "feature name count does not match columns");

  Matrix design(X.rows(), p + 1);
  design.col(0).setOnes();
  design.rightCols(p) = X;
  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < p + 1) {
    std::string dependent;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index k = qr.rank(); k < p + 1; ++k) {
      const Eigen::Index col = perm(k);
      if (!dependent.empty()) dependent += ", ";
      dependent += col == 0 ? std::string("intercept") : names[static_cast<std::size_t>(col - 1)];
    }
    fail(ErrorKind::SingularDesign, "design is rank deficient; dependent columns: " + dependent);
  }
  const Vector beta = qr.solve(y);
  LRModel model;
  model.intercept = beta(0);
  model.coefficients.assign(beta.data() + 1, beta.data() + beta.size());
  model.feature_names = std::move(names);
  return model;
}

inline double predict_lr(const LRModel& model, std::span<const double> x) {
  require(x.size() == model.coefficients.size(), ErrorKind::DimensionMismatch,
          "model expects " + std::to_string(model.coefficients.size()) + " features, got " +
              std::to_string(x.size()));
  return model.intercept +
         std::inner_product(x.begin(), x.end(), model.coefficients.begin(), 0.0);
}

inline Vector predict_lr(const LRModel& model, const Matrix& X) {
  Vector out(X.rows());
  for (Eigen::Index r = 0; r < X.rows(); ++r) out(r) = predict_lr(model, detail::row(X, r));
  return out;
}

// ---------------------------------------------------------------------------
// Support vector regression

struct Standardization {
  std::vector<double> mean;
  std::vector<double> scale;  // population sd, 1 for constant columns

  static Standardization fit(const Matrix& X) {
    Standardization s;
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
      const double m = X.col(c).mean();
      const double var = (X.col(c).array() - m).square().mean();
      s.mean.push_back(m);
      s.scale.push_back(var > 0.0 ? std::sqrt(var) : 1.0);
    }
    return s;
  }

  std::vector<double> apply(std::span<const double> x) const {
    require(x.size() == mean.size(), ErrorKind::DimensionMismatch,
            "model expects " + std::to_string(mean.size()) + " features, got " +
                std::to_string(x.size()));
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean[i]) / scale[i];
    return out;
  }

  Matrix apply(const Matrix& X) const {
    Matrix out(X.rows(), X.cols());
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
      const auto z = apply(detail::row(X, r));
      for (Eigen::Index c = 0; c < X.cols(); ++c) out(r, c) = z[static_cast<std::size_t>(c)];
    }
    return out;
  }
};

struct SVRParams {
  double C = 1.0;
  double epsilon = 0.1;
  KernelSpec kernel;
  double tolerance = 1e-3;  // maximal KKT violation at termination
  long max_iterations = 10'000'000;
};

struct SolverInfo {
  long iterations = 0;
  double kkt_violation = 0.0;
  double dual_objective = 0.0;  // 1/2 v'Kv + eps*sum|v| - y'v
};

// f(x) = sum_i v_i k(z(x), z_i) + b, with z the stored standardization.
struct SVRModel {
  std::vector<std::vector<double>> support_vectors;  // raw feature space
  std::vector<double> dual_weights;
  double bias = 0.0;
  KernelSpec kernel;
  double epsilon = 0.1;
  double C = 1.0;
  Standardization standardization;
  std::vector<std::string> feature_names;
  SolverInfo solver;
};

inline constexpr double kSupportThreshold = 1e-8;

// Solves the epsilon-SVR dual with sequential minimal optimisation over the
// 2n variables (alpha, alpha*), using second-order working set selection.
// Returns v = alpha - alpha*, the bias and solver diagnostics.
struct DualSolution {
  std::vector<double> weights;
  double bias = 0.0;
  SolverInfo info;
};

inline DualSolution solve_svr_dual(const Matrix& K, const Vector& y, double C, double epsilon,
                                   double tolerance, long max_iterations) {
  const auto n = static_cast<std::size_t>(y.size());
  const std::size_t m = 2 * n;
  constexpr double kTau = 1e-12;

  std::vector<double> alpha(m, 0.0);
  std::vector<double> sign(m);
  std::vector<double> grad(m);
  for (std::size_t t = 0; t < n; ++t) {
    sign[t] = 1.0;
    sign[t + n] = -1.0;
    grad[t] = epsilon - y(static_cast<Eigen::Index>(t));
    grad[t + n] = epsilon + y(static_cast<Eigen::Index>(t));
  }
  auto base = [n](std::size_t t) { return static_cast<Eigen::Index>(t < n ? t : t - n); };
  auto q = [&](std::size_t s, std::size_t t) { return sign[s] * sign[t] * K(base(s), base(t)); };
  auto in_up = [&](std::size_t t) {
    return (sign[t] > 0.0 && alpha[t] < C) || (sign[t] < 0.0 && alpha[t] > 0.0);
  };
  auto in_low = [&](std::size_t t) {
    return (sign[t] > 0.0 && alpha[t] > 0.0) || (sign[t] < 0.0 && alpha[t] < C);
  };

  DualSolution out;
  long iteration = 0;
  double violation = 0.0;
  for (;; ++iteration) {
    double gmax = -HUGE_VAL;
    std::optional<std::size_t> i;
    for (std::size_t t = 0; t < m; ++t) {
      if (in_up(t) && -sign[t] * grad[t] >= gmax) {
        gmax = -sign[t] * grad[t];
        i = t;
      }
    }
    double gmax2 = -HUGE_VAL;
    std::optional<std::size_t> j;
    double best = HUGE_VAL;
    for (std::size_t t = 0; t < m; ++t) {
      if (!in_low(t)) continue;
      const double yg = sign[t] * grad[t];
      gmax2 = std::max(gmax2, yg);
      if (!i) continue;
      const double b = gmax + yg;
      if (b > 0.0) {
        double a = q(*i, *i) + q(t, t) - 2.0 * sign[*i] * sign[t] * q(*i, t);
        if (a <= 0.0) a = kTau;
        if (-(b * b) / a <= best) {
          best = -(b * b) / a;
          j = t;
        }
      }
    }
    violation = gmax + gmax2;
    if (!i || !j || violation < tolerance) break;
    if (iteration >= max_iterations) {
      throw ConvergenceError("SMO stopped after " + std::to_string(iteration) +
                                 " iterations with KKT violation " + std::to_string(violation),
                             violation);
    }

    const std::size_t a_i = *i;
    const std::size_t a_j = *j;
    const double old_i = alpha[a_i];
    const double old_j = alpha[a_j];
    const double qii = q(a_i, a_i);
    const double qjj = q(a_j, a_j);
    const double qij = q(a_i, a_j);
    if (sign[a_i] != sign[a_j]) {
      double quad = qii + qjj + 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[a_i] - grad[a_j]) / quad;
      const double diff = alpha[a_i] - alpha[a_j];
      alpha[a_i] += delta;
      alpha[a_j] += delta;
      if (diff > 0.0) {
        if (alpha[a_j] < 0.0) {
          alpha[a_j] = 0.0;
          alpha[a_i] = diff;
        }
      } else if (alpha[a_i] < 0.0) {
        alpha[a_i] = 0.0;
        alpha[a_j] = -diff;
      }
      if (diff > 0.0) {
        if (alpha[a_i] > C) {
          alpha[a_i] = C;
          alpha[a_j] = C - diff;
        }
      } else if (alpha[a_j] > C) {
        alpha[a_j] = C;
        alpha[a_i] = C + diff;
      }
    } else {
      double quad = qii + qjj - 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[a_i] - grad[a_j]) / quad;
      const double sum = alpha[a_i] + alpha[a_j];
      alpha[a_i] -= delta;
      alpha[a_j] += delta;
      if (sum > C) {
        if (alpha[a_i] > C) {
          alpha[a_i] = C;
          alpha[a_j] = sum - C;
        }
      } else if (alpha[a_j] < 0.0) {
        alpha[a_j] = 0.0;
        alpha[a_i] = sum;
      }
      if (sum > C) {
        if (alpha[a_j] > C) {
          alpha[a_j] = C;
          alpha[a_i] = sum - C;
        }
      } else if (alpha[a_i] < 0.0) {
        alpha[a_i] = 0.0;
        alpha[a_j] = sum;
      }
    }

    const double d_i = alpha[a_i] - old_i;
    const double d_j = alpha[a_j] - old_j;
    for (std::size_t t = 0; t < m; ++t) grad[t] += q(t, a_i) * d_i + q(t, a_j) * d_j;
  }

  // Bias from the free variables, or the midpoint of the feasible interval.
  double upper = HUGE_VAL;
  double lower = -HUGE_VAL;
  double free_sum = 0.0;
  std::size_t free_count = 0;
  for (std::size_t t = 0; t < m; ++t) {
    const double yg = sign[t] * grad[t];
    if (alpha[t] >= C) {
      if (sign[t] < 0.0) upper = std::min(upper, yg);
      else lower = std::max(lower, yg);
    } else if (alpha[t] <= 0.0) {
      if (sign[t] > 0.0) upper = std::min(upper, yg);
      else lower = std::max(lower, yg);
    } else {
      free_sum += yg;
      ++free_count;
    }
  }
  const double rho = free_count > 0 ? free_sum / static_cast<double>(free_count)
                                    : 0.5 * (upper + lower);

  out.weights.resize(n);
  for (std::size_t t = 0; t < n; ++t) out.weights[t] = alpha[t] - alpha[t + n];
  out.bias = -rho;

  double objective = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    double kv = 0.0;
    for (std::size_t t = 0; t < n; ++t) kv += K(base(s), base(t)) * out.weights[t];
    objective += 0.5 * out.weights[s] * kv + epsilon * (alpha[s] + alpha[s + n]) -
                 y(static_cast<Eigen::Index>(s)) * out.weights[s];
  }
  out.info = {iteration, violation, objective};
  return out;
}

inline Matrix gram_matrix(const KernelSpec& kernel, const Matrix& Z) {
  Matrix K(Z.rows(), Z.rows());
  for (Eigen::Index a = 0; a < Z.rows(); ++a) {
    const auto ra = detail::row(Z, a);
    for (Eigen::Index b = a; b < Z.rows(); ++b) {
      K(a, b) = K(b, a) = kernel_eval(kernel, ra, detail::row(Z, b));
    }
  }
  return K;
}

inline SVRModel fit_svr(const Matrix& X, const Vector& y, const SVRParams& params,
                        std::vector<std::string> names = {}) {
  detail::check_training_data(X, y);
  require(params.C > 0.0, ErrorKind::Parameter, "C must be positive");
  require(params.epsilon >= 0.0, ErrorKind::Parameter, "epsilon must be non-negative");
  require(params.tolerance > 0.0, ErrorKind::Parameter, "tolerance must be positive");
  require(X.rows() >= 2, ErrorKind::InvalidInput, "SVR needs at least 2 samples");
  params.kernel.validate();
  if (names.empty()) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) names.push_back("x" + std::to_string(j));
  }

  SVRModel model;
  model.kernel = params.kernel;
  model.epsilon = params.epsilon;
  model.C = params.C;
  model.feature_names = std::move(names);
  model.standardization = Standardization::fit(X);
  const Matrix Z = model.standardization.apply(X);
  const Matrix K = gram_matrix(params.kernel, Z);
  const DualSolution dual =
      solve_svr_dual(K, y, params.C, params.epsilon, params.tolerance, params.max_iterations);

  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    const double v = dual.weights[static_cast<std::size_t>(r)];
    if (std::abs(v) > kSupportThreshold) {
      model.support_vectors.push_back(detail::row(X, r));
      model.dual_weights.push_back(v);
    }
  }
  model.bias = dual.bias;
  model.solver = dual.info;
  return model;
}

inline double predict_svr(const SVRModel& model, std::span<const double> x) {
  const std::vector<double> z = model.standardization.apply(x);
  double f = model.bias;
  for (std::size_t i = 0; i < model.support_vectors.size(); ++i) {
    const auto zi = model.standardization.apply(model.support_vectors[i]);
    f += model.dual_weights[i] * kernel_eval(model.kernel, z, zi);
  }
  return f;
}

inline Vector predict_svr(const SVRModel& model, const Matrix& X) {
  Vector out(X.rows());
  for (Eigen::Index r = 0; r < X.rows(); ++r) out(r) = predict_svr(model, detail::row(X, r));
  return out;
}

// ---------------------------------------------------------------------------
// Hyperparameter search

struct SVRGrid {
  std::vector<double> C = {1.0, 10.0, 100.0};
  std::vector<double> epsilon = {0.1, 0.5, 1.0};
  std::vector<double> gamma_factor = {0.5, 1.0, 2.0};  // x 1 / (d * var)
  double validation_fraction = 0.2;
  double tolerance = 1e-3;
};

// 1 / (d * var) over the standardized matrix; var is 1 unless columns are constant.
inline double scale_gamma(const Matrix& X) {
  const Matrix Z = Standardization::fit(X).apply(X);
  const double mean = Z.mean();
  const double var = (Z.array() - mean).square().mean();
  return 1.0 / (static_cast<double>(X.cols()) * (var > 0.0 ? var : 1.0));
}

struct TuningResult {
  SVRParams params;
  double validation_mae = 0.0;
};

// Picks (C, epsilon, gamma) by MAE on a seeded hold-out of the given rows.
// Earlier grid points win ties (C outermost, gamma innermost).
inline TuningResult tune_svr(const Matrix& X, const Vector& y, const SVRGrid& grid,
                             std::uint64_t seed) {
  detail::check_training_data(X, y);
  const auto n = static_cast<std::size_t>(X.rows());
  require(n >= 4, ErrorKind::InvalidInput, "tuning needs at least 4 samples");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng::Engine engine(seed);
  rng::shuffle(std::span<std::size_t>(order), engine);
  const auto n_val = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::floor(grid.validation_fraction * static_cast<double>(n))), 1,
      n - 2);
  const std::size_t n_fit = n - n_val;

  Matrix X_fit(static_cast<Eigen::Index>(n_fit), X.cols());
  Vector y_fit(static_cast<Eigen::Index>(n_fit));
  Matrix X_val(static_cast<Eigen::Index>(n_val), X.cols());
  Vector y_val(static_cast<Eigen::Index>(n_val));
  for (std::size_t k = 0; k < n; ++k) {
    const auto src = static_cast<Eigen::Index>(order[k]);
    if (k < n_fit) {
      X_fit.row(static_cast<Eigen::Index>(k)) = X.row(src);
      y_fit(static_cast<Eigen::Index>(k)) = y(src);
    } else {
      X_val.row(static_cast<Eigen::Index>(k - n_fit)) = X.row(src);
      y_val(static_cast<Eigen::Index>(k - n_fit)) = y(src);
    }
  }

  const double base_gamma = scale_gamma(X_fit);
  std::optional<TuningResult> best;
  for (double c : grid.C) {
    for (double eps : grid.epsilon) {
      for (double g : grid.gamma_factor) {
        SVRParams params;
        params.C = c;
        params.epsilon = eps;
        params.kernel = KernelSpec::rbf(g * base_gamma);
        params.tolerance = grid.tolerance;
        const SVRModel model = fit_svr(X_fit, y_fit, params);
        const double mae = (predict_svr(model, X_val) - y_val).cwiseAbs().mean();
        if (!best || mae < best->validation_mae) best = TuningResult{params, mae};
      }
    }
  }
  // gamma is re-derived on all given rows for the final fit
  best->params.kernel.gamma *= scale_gamma(X) / base_gamma;
  return *best;
}

}  // namespace tugscore::models
