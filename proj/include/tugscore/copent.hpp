#pragma once

// Nonparametric copula entropy and mutual information.
//
// Estimation runs in two steps: rank every column into empirical-CDF
// pseudo-observations, then estimate the differential entropy of those
// pseudo-observations with the k-nearest-neighbour estimator under the
// max-norm:
//
//   H ~= psi(T) - psi(k) + (d / T) * sum_t log(2 * eps_t)
//
// where eps_t is the max-norm distance from row t to its k-th neighbour.
// Mutual information is the negated copula entropy.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tugscore/error.hpp"
#include "tugscore/random.hpp"

namespace tugscore::copent {

inline constexpr int kDefaultNeighbors = 3;

// T x N observations stored row-major.
class SampleMatrix {
 public:
  SampleMatrix(std::size_t rows, std::size_t cols, std::vector<double> values,
               std::vector<std::string> labels = {})
      : rows_(rows), cols_(cols), values_(std::move(values)), labels_(std::move(labels)) {
    require(rows_ >= 2, ErrorKind::InvalidInput, "sample matrix needs at least 2 rows");
    require(cols_ >= 1, ErrorKind::InvalidInput, "sample matrix needs at least 1 column");
    require(values_.size() == rows_ * cols_, ErrorKind::InvalidInput,
            "sample matrix storage does not match " + std::to_string(rows_) + "x" +
                std::to_string(cols_));
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i])) {
        fail(ErrorKind::InvalidInput, "non-finite entry at row " + std::to_string(i / cols_) +
                                          ", column " + std::to_string(i % cols_));
      }
    }
    if (labels_.empty()) {
      for (std::size_t j = 0; j < cols_; ++j) labels_.push_back("x" + std::to_string(j));
    }
    require(labels_.size() == cols_, ErrorKind::InvalidInput, "label count does not match columns");
  }

  // Builds a matrix from equally long columns.
  static SampleMatrix from_columns(const std::vector<std::vector<double>>& columns,
                                   std::vector<std::string> labels = {}) {
    require(!columns.empty(), ErrorKind::InvalidInput, "no columns");
    const std::size_t rows = columns.front().size();
    std::vector<double> values(rows * columns.size());
    for (std::size_t j = 0; j < columns.size(); ++j) {
      require(columns[j].size() == rows, ErrorKind::InvalidInput, "columns differ in length");
      for (std::size_t t = 0; t < rows; ++t) values[t * columns.size() + j] = columns[j][t];
    }
    return SampleMatrix(rows, columns.size(), std::move(values), std::move(labels));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double operator()(std::size_t t, std::size_t i) const { return values_[t * cols_ + i]; }
  std::span<const double> row(std::size_t t) const {
    return {values_.data() + t * cols_, cols_};
  }
  std::vector<double> column(std::size_t i) const {
    std::vector<double> out(rows_);
    for (std::size_t t = 0; t < rows_; ++t) out[t] = (*this)(t, i);
    return out;
  }
  std::span<const double> values() const noexcept { return values_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  SampleMatrix select_columns(std::span<const std::size_t> which) const {
    std::vector<std::vector<double>> cols;
    std::vector<std::string> names;
    for (std::size_t i : which) {
      require(i < cols_, ErrorKind::InvalidInput, "column index out of range");
      cols.push_back(column(i));
      names.push_back(labels_[i]);
    }
    return from_columns(cols, std::move(names));
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> values_;
  std::vector<std::string> labels_;
};

// Pseudo-observations in (0, 1]; tied values share the maximal rank.
struct CopulaSample {
  SampleMatrix values;
  const SampleMatrix* source = nullptr;
};

struct EntropyEstimate {
  double value = 0.0;  // nats
  int k = kDefaultNeighbors;
  std::size_t n_samples = 0;
};

namespace detail {

// psi(n) for a positive integer: -gamma + sum_{i<n} 1/i, summed small-to-large.
inline double digamma_int(std::size_t n) {
  constexpr double euler_gamma = 0.57721566490153286060651209008240243;
  double harmonic = 0.0;
  for (std::size_t i = n - 1; i >= 1; --i) harmonic += 1.0 / static_cast<double>(i);
  return harmonic - euler_gamma;
}

inline double max_norm(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace detail

// Entry (t, i) = (1/T) * #{s : x[s][i] <= x[t][i]}.
inline CopulaSample empirical_copula(const SampleMatrix& samples) {
  const std::size_t rows = samples.rows();
  const std::size_t cols = samples.cols();
  std::vector<double> out(rows * cols);
  std::vector<std::size_t> order(rows);
  for (std::size_t i = 0; i < cols; ++i) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return samples(a, i) < samples(b, i);
    });
    std::size_t start = 0;
    while (start < rows) {
      std::size_t end = start + 1;
      while (end < rows && samples(order[end], i) == samples(order[start], i)) ++end;
      // every member of the tie group counts all `end` values <= itself
      const double u = static_cast<double>(end) / static_cast<double>(rows);
      for (std::size_t p = start; p < end; ++p) out[order[p] * cols + i] = u;
      start = end;
    }
  }
  return {SampleMatrix(rows, cols, std::move(out), samples.labels()), &samples};
}

// Kozachenko-Leonenko entropy in nats with exact max-norm neighbour search.
inline EntropyEstimate knn_entropy(const SampleMatrix& samples, int k = kDefaultNeighbors) {
  const std::size_t rows = samples.rows();
  require(k >= 1, ErrorKind::Parameter, "k must be positive");
  require(static_cast<std::size_t>(k) < rows, ErrorKind::Parameter,
          "k = " + std::to_string(k) + " must be smaller than the sample count " +
              std::to_string(rows));

  // Sweep outwards along the first coordinate; the gap on that coordinate
  // bounds the max-norm distance from below, so the search is still exact.
  std::vector<std::size_t> order(rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return samples(a, 0) < samples(b, 0); });

  const auto kk = static_cast<std::size_t>(k);
  std::vector<double> kth(rows);
  std::priority_queue<double> nearest;
  for (std::size_t p = 0; p < rows; ++p) {
    const std::size_t t = order[p];
    const auto here = samples.row(t);
    nearest = {};
    auto offer = [&](std::size_t q) {
      const double d = detail::max_norm(here, samples.row(order[q]));
      if (nearest.size() < kk) {
        nearest.push(d);
      } else if (d < nearest.top()) {
        nearest.pop();
        nearest.push(d);
      }
    };
    std::size_t left = p;
    std::size_t right = p + 1;
    bool left_open = p > 0;
    bool right_open = right < rows;
    while (left_open || right_open) {
      const double bound = nearest.size() == kk ? nearest.top() : HUGE_VAL;
      double gap_left = HUGE_VAL;
      double gap_right = HUGE_VAL;
      if (left_open) gap_left = here[0] - samples(order[left - 1], 0);
      if (right_open) gap_right = samples(order[right], 0) - here[0];
      if (std::min(gap_left, gap_right) >= bound && nearest.size() == kk) break;
      if (gap_left <= gap_right) {
        offer(--left);
        left_open = left > 0;
      } else {
        offer(right++);
        right_open = right < rows;
      }
    }
    kth[t] = nearest.top();
  }

  double log_sum = 0.0;
  for (std::size_t t = 0; t < rows; ++t) {
    if (kth[t] == 0.0) {
      std::size_t twin = t;
      for (std::size_t s = 0; s < rows; ++s) {
        if (s != t && detail::max_norm(samples.row(t), samples.row(s)) == 0.0) {
          twin = s;
          break;
        }
      }
      fail(ErrorKind::DegenerateSample,
           "zero k-th neighbour distance: rows " + std::to_string(std::min(t, twin)) + " and " +
               std::to_string(std::max(t, twin)) + " are duplicates");
    }
    log_sum += std::log(2.0 * kth[t]);
  }

  const double dims = static_cast<double>(samples.cols());
  const double value = detail::digamma_int(rows) - detail::digamma_int(kk) +
                       dims * log_sum / static_cast<double>(rows);
  return {value, k, rows};
}

// Entropy of the empirical copula; <= 0 in expectation, 0 under independence.
inline EntropyEstimate copula_entropy(const SampleMatrix& samples, int k = kDefaultNeighbors) {
  require(samples.cols() >= 2, ErrorKind::InvalidInput,
          "copula entropy needs at least 2 variables");
  return knn_entropy(empirical_copula(samples).values, k);
}

inline EntropyEstimate mutual_information(const SampleMatrix& samples,
                                          int k = kDefaultNeighbors) {
  EntropyEstimate estimate = copula_entropy(samples, k);
  estimate.value = -estimate.value;
  return estimate;
}

// Adds seeded uniform noise of +-scale * (column range) to every entry so that
// heavily tied columns rank without ties. Off unless a caller asks for it.
inline SampleMatrix break_ties(const SampleMatrix& samples, std::uint64_t seed,
                               double scale = 1e-10) {
  require(scale > 0.0, ErrorKind::Parameter, "jitter scale must be positive");
  rng::Engine engine(seed);
  std::vector<double> values(samples.values().begin(), samples.values().end());
  for (std::size_t i = 0; i < samples.cols(); ++i) {
    const auto col = samples.column(i);
    const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
    const double span = *hi > *lo ? *hi - *lo : std::max(1.0, std::abs(*lo));
    for (std::size_t t = 0; t < samples.rows(); ++t) {
      values[t * samples.cols() + i] += scale * span * rng::uniform(engine, -1.0, 1.0);
    }
  }
  return SampleMatrix(samples.rows(), samples.cols(), std::move(values), samples.labels());
}

}  // namespace tugscore::copent
