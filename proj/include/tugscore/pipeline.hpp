#pragma once

// Association ranking, feature selection and the repeated random-split
// evaluation of TUG predictors.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "tugscore/copent.hpp"
#include "tugscore/dataset.hpp"
#include "tugscore/error.hpp"
#include "tugscore/models.hpp"
#include "tugscore/random.hpp"

namespace tugscore::pipeline {

inline constexpr double kDefaultCutoff = 13.5;

struct DependenceEntry {
  std::string name;
  std::size_t feature_index = 0;
  std::optional<double> copula_entropy;  // nats; empty when unavailable
  std::string unavailable_reason;
  std::size_t rank = 0;                  // 1 = strongest association
};

struct DependenceReport {
  std::vector<DependenceEntry> entries;  // in rank order
  int k_used = copent::kDefaultNeighbors;
  std::size_t n_samples = 0;
};

// Pairwise copula entropy of each feature with the TUG score, ranked from the
// most negative (strongest dependence) upwards. Features whose estimate
// fails are ranked last.
inline DependenceReport rank_features(const Dataset& data, int k = copent::kDefaultNeighbors,
                                      std::optional<std::uint64_t> jitter_seed = std::nullopt) {
  data.validate(2);
  require(k >= 1 && static_cast<std::size_t>(k) < data.size(), ErrorKind::Parameter,
          "k = " + std::to_string(k) + " must lie in [1, " + std::to_string(data.size()) + ")");
  DependenceReport report;
  report.k_used = k;
  report.n_samples = data.size();
  const std::vector<double> tug = data.targets();
  for (std::size_t j = 0; j < data.dimension(); ++j) {
    DependenceEntry entry;
    entry.name = data.feature_names[j];
    entry.feature_index = j;
    const std::vector<double> column = data.column(j);
    if (std::all_of(column.begin(), column.end(), [&](double v) { return v == column.front(); })) {
      entry.unavailable_reason = "constant feature";
    } else {
      try {
        auto samples = copent::SampleMatrix::from_columns({column, tug}, {entry.name, "tug_s"});
        if (jitter_seed) samples = copent::break_ties(samples, rng::derive_seed(*jitter_seed, j));
        entry.copula_entropy = copent::copula_entropy(samples, k).value;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::DegenerateSample) throw;
        entry.unavailable_reason = e.what();
      }
    }
    report.entries.push_back(std::move(entry));
  }
  std::stable_sort(report.entries.begin(), report.entries.end(),
                   [](const DependenceEntry& a, const DependenceEntry& b) {
                     if (a.copula_entropy.has_value() != b.copula_entropy.has_value()) {
                       return a.copula_entropy.has_value();
                     }
                     if (a.copula_entropy && *a.copula_entropy != *b.copula_entropy) {
                       return *a.copula_entropy < *b.copula_entropy;
                     }
                     return a.name < b.name;
                   });
  for (std::size_t r = 0; r < report.entries.size(); ++r) report.entries[r].rank = r + 1;
  return report;
}

// Dataset column indices of the top_k ranked features.
inline std::vector<std::size_t> select_features(const DependenceReport& report, std::size_t top_k) {
  require(top_k >= 1 && top_k <= report.entries.size(), ErrorKind::Parameter,
          "top_k = " + std::to_string(top_k) + " must lie in [1, " +
              std::to_string(report.entries.size()) + "]");
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < top_k; ++r) out.push_back(report.entries[r].feature_index);
  return out;
}

inline double mae(std::span<const double> truth, std::span<const double> predicted) {
  require(truth.size() == predicted.size(), ErrorKind::DimensionMismatch,
          "MAE inputs differ in length");
  require(!truth.empty(), ErrorKind::InvalidInput, "MAE of an empty set");
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) sum += std::abs(truth[i] - predicted[i]);
  return sum / static_cast<double>(truth.size());
}

// Fraction of samples whose faller call (score > cutoff) agrees.
inline double diagnosis_accuracy(std::span<const double> truth, std::span<const double> predicted,
                                 double cutoff_s = kDefaultCutoff) {
  require(truth.size() == predicted.size(), ErrorKind::DimensionMismatch,
          "accuracy inputs differ in length");
  require(!truth.empty(), ErrorKind::InvalidInput, "accuracy of an empty set");
  std::size_t agree = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if ((truth[i] > cutoff_s) == (predicted[i] > cutoff_s)) ++agree;
  }
  return static_cast<double>(agree) / static_cast<double>(truth.size());
}

enum class ModelKind { LR, SVR };

inline std::string to_string(ModelKind kind) { return kind == ModelKind::LR ? "lr" : "svr"; }

inline ModelKind parse_model_kind(const std::string& text) {
  if (text == "lr") return ModelKind::LR;
  if (text == "svr") return ModelKind::SVR;
  fail(ErrorKind::Parameter, "unknown model kind '" + text + "' (expected lr or svr)");
}

using FittedModel = std::variant<models::LRModel, models::SVRModel>;

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// floor(train_ratio * n) rows for training, the rest for testing; both
// lists come back in ascending row order.
inline Split make_split(std::size_t n, double train_ratio, std::uint64_t seed) {
  require(train_ratio > 0.0 && train_ratio < 1.0, ErrorKind::Parameter,
          "train_ratio must lie in (0, 1)");
  const auto n_train = static_cast<std::size_t>(std::floor(train_ratio * static_cast<double>(n)));
  require(n_train >= 1 && n_train < n, ErrorKind::Parameter,
          "train_ratio leaves an empty training or test set for " + std::to_string(n) +
              " samples");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng::Engine engine(seed);
  rng::shuffle(std::span<std::size_t>(order), engine);
  Split split;
  split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

inline std::uint64_t split_seed(std::uint64_t master_seed, std::size_t split_index) {
  return rng::derive_seed(master_seed, split_index);
}

inline models::Matrix design_matrix(const Dataset& data, std::span<const std::size_t> rows,
                                    std::span<const std::size_t> features) {
  models::Matrix X(static_cast<Eigen::Index>(rows.size()),
                   static_cast<Eigen::Index>(features.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < features.size(); ++c) {
      X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          data.samples.at(rows[r]).features.at(features[c]);
    }
  }
  return X;
}

inline models::Vector target_vector(const Dataset& data, std::span<const std::size_t> rows) {
  models::Vector y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    y(static_cast<Eigen::Index>(r)) = data.samples.at(rows[r]).tug_s;
  }
  return y;
}

// Fits a model on the given rows only. SVR hyperparameters are tuned on a
// hold-out carved from those same rows.
inline FittedModel train_model(const Dataset& data, std::span<const std::size_t> rows,
                               std::span<const std::size_t> features, ModelKind kind,
                               const models::SVRGrid& grid, std::uint64_t seed) {
  const models::Matrix X = design_matrix(data, rows, features);
  const models::Vector y = target_vector(data, rows);
  std::vector<std::string> names;
  for (std::size_t f : features) names.push_back(data.feature_names.at(f));
  if (kind == ModelKind::LR) return models::fit_lr(X, y, std::move(names));
  const models::TuningResult tuned = models::tune_svr(X, y, grid, rng::derive_seed(seed, 1));
  return models::fit_svr(X, y, tuned.params, std::move(names));
}

inline double predict(const FittedModel& model, std::span<const double> x) {
  return std::visit(
      [&](const auto& m) {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, models::LRModel>) {
          return models::predict_lr(m, x);
        } else {
          return models::predict_svr(m, x);
        }
      },
      model);
}

struct EvaluationConfig {
  std::size_t n_splits = 100;
  double train_ratio = 0.8;
  double cutoff_s = kDefaultCutoff;
  std::uint64_t master_seed = 0;
  models::SVRGrid svr_grid;
  unsigned threads = 1;
  bool keep_models = false;
};

struct SplitResult {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::optional<double> mae;
  std::optional<double> diagnosis_accuracy;
  std::string error;  // empty on success
  std::optional<FittedModel> model;
};

struct Summary {
  double mean = 0.0;
  double sd = 0.0;  // population
};

struct EvaluationReport {
  ModelKind model_kind = ModelKind::LR;
  std::vector<std::string> selected_features;
  std::vector<SplitResult> per_split;
  Summary mae;
  Summary diagnosis_accuracy;
  double cutoff_s = kDefaultCutoff;
  std::size_t n_splits = 0;
  double train_ratio = 0.8;
  std::uint64_t master_seed = 0;

  std::vector<std::size_t> failed_splits() const {
    std::vector<std::size_t> out;
    for (const auto& s : per_split) {
      if (!s.error.empty()) out.push_back(s.index);
    }
    return out;
  }
};

inline Summary summarize(const std::vector<double>& values) {
  if (values.empty()) return {std::nan(""), std::nan("")};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size()))};
}

inline SplitResult run_split(const Dataset& data, ModelKind kind,
                             std::span<const std::size_t> features,
                             const EvaluationConfig& config, std::size_t index) {
  SplitResult result;
  result.index = index;
  result.seed = split_seed(config.master_seed, index);
  const Split split = make_split(data.size(), config.train_ratio, result.seed);
  result.n_train = split.train.size();
  result.n_test = split.test.size();
  try {
    FittedModel model = train_model(data, split.train, features, kind, config.svr_grid, result.seed);
    std::vector<double> truth;
    std::vector<double> predicted;
    for (std::size_t row : split.test) {
      std::vector<double> x;
      for (std::size_t f : features) x.push_back(data.samples[row].features[f]);
      truth.push_back(data.samples[row].tug_s);
      predicted.push_back(predict(model, x));
    }
    result.mae = mae(truth, predicted);
    result.diagnosis_accuracy = diagnosis_accuracy(truth, predicted, config.cutoff_s);
    if (config.keep_models) result.model = std::move(model);
  } catch (const Error& e) {
    result.error = e.what();
  }
  return result;
}

// Repeated random-split evaluation. Every split's seed derives from the
// master seed and the split index, so results do not depend on the thread
// count or scheduling.
inline EvaluationReport evaluate(const Dataset& data, ModelKind kind,
                                 std::span<const std::size_t> features,
                                 const EvaluationConfig& config = {}) {
  data.validate(10);
  require(config.n_splits >= 1, ErrorKind::Parameter, "n_splits must be at least 1");
  require(config.train_ratio > 0.0 && config.train_ratio < 1.0, ErrorKind::Parameter,
          "train_ratio must lie in (0, 1)");
  require(!features.empty(), ErrorKind::Parameter, "no features selected");
  for (std::size_t f : features) {
    require(f < data.dimension(), ErrorKind::Parameter,
            "feature index " + std::to_string(f) + " out of range");
  }
  make_split(data.size(), config.train_ratio, 0);  // rejects degenerate ratios up front

  EvaluationReport report;
  report.model_kind = kind;
  for (std::size_t f : features) report.selected_features.push_back(data.feature_names[f]);
  report.cutoff_s = config.cutoff_s;
  report.n_splits = config.n_splits;
  report.train_ratio = config.train_ratio;
  report.master_seed = config.master_seed;
  report.per_split.resize(config.n_splits);

  const unsigned workers = std::max(1u, std::min<unsigned>(config.threads,
                                                           static_cast<unsigned>(config.n_splits)));
  if (workers == 1) {
    for (std::size_t s = 0; s < config.n_splits; ++s) {
      report.per_split[s] = run_split(data, kind, features, config, s);
    }
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t s = w; s < config.n_splits; s += workers) {
          report.per_split[s] = run_split(data, kind, features, config, s);
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  std::vector<double> maes;
  std::vector<double> accuracies;
  for (const auto& s : report.per_split) {
    if (!s.error.empty()) continue;
    maes.push_back(*s.mae);
    accuracies.push_back(*s.diagnosis_accuracy);
  }
  report.mae = summarize(maes);
  report.diagnosis_accuracy = summarize(accuracies);
  return report;
}

}  // namespace tugscore::pipeline
