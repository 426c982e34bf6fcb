#pragma once

// JSON and CSV renderings of models, ranking and evaluation reports, and the
// synthetic cohort sidecar. Every document carries a schema_version.

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "tugscore/error.hpp"
#include "tugscore/gaitfeat.hpp"
#include "tugscore/io.hpp"
#include "tugscore/models.hpp"
#include "tugscore/pipeline.hpp"
#include "tugscore/synthgait.hpp"

namespace tugscore::report {

using json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

namespace detail {

inline json optional_number(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

template <typename T>
T field(const json& doc, const char* key) {
  if (!doc.contains(key)) fail(ErrorKind::Schema, std::string("missing field '") + key + "'");
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::Schema, std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Models

inline json kernel_to_json(const models::KernelSpec& k) {
  json out;
  out["kind"] = k.kind == models::KernelKind::Linear ? "linear" : "rbf";
  if (k.kind == models::KernelKind::Rbf) out["gamma"] = k.gamma;
  return out;
}

inline models::KernelSpec kernel_from_json(const json& doc) {
  const auto kind = detail::field<std::string>(doc, "kind");
  if (kind == "linear") return models::KernelSpec::linear();
  if (kind == "rbf") {
    auto k = models::KernelSpec::rbf(detail::field<double>(doc, "gamma"));
    k.validate();
    return k;
  }
  fail(ErrorKind::Schema, "unknown kernel kind '" + kind + "'");
}

inline json model_to_json(const models::LRModel& m) {
  json out;
  out["schema_version"] = kSchemaVersion;
  out["model_type"] = "lr";
  out["feature_names"] = m.feature_names;
  out["coefficients"] = m.coefficients;
  out["intercept"] = m.intercept;
  return out;
}

inline json model_to_json(const models::SVRModel& m) {
  json out;
  out["schema_version"] = kSchemaVersion;
  out["model_type"] = "svr";
  out["feature_names"] = m.feature_names;
  out["kernel"] = kernel_to_json(m.kernel);
  out["C"] = m.C;
  out["epsilon"] = m.epsilon;
  out["standardization"] = {{"mean", m.standardization.mean},
                            {"scale", m.standardization.scale}};
  out["support_vectors"] = m.support_vectors;
  out["dual_weights"] = m.dual_weights;
  out["bias"] = m.bias;
  out["solver"] = {{"iterations", m.solver.iterations},
                   {"kkt_violation", m.solver.kkt_violation},
                   {"dual_objective", m.solver.dual_objective}};
  return out;
}

inline json model_to_json(const pipeline::FittedModel& m) {
  return std::visit([](const auto& v) { return model_to_json(v); }, m);
}

inline pipeline::FittedModel model_from_json(const json& doc) {
  const int version = detail::field<int>(doc, "schema_version");
  require(version == kSchemaVersion, ErrorKind::Schema,
          "unsupported model schema_version " + std::to_string(version));
  const auto type = detail::field<std::string>(doc, "model_type");
  const auto names = detail::field<std::vector<std::string>>(doc, "feature_names");
  if (type == "lr") {
    models::LRModel m;
    m.feature_names = names;
    m.coefficients = detail::field<std::vector<double>>(doc, "coefficients");
    m.intercept = detail::field<double>(doc, "intercept");
    require(names.empty() || names.size() == m.coefficients.size(), ErrorKind::Schema,
            "feature_names and coefficients differ in length");
    return m;
  }
  if (type == "svr") {
    models::SVRModel m;
    m.feature_names = names;
    m.kernel = kernel_from_json(detail::field<json>(doc, "kernel"));
    m.C = detail::field<double>(doc, "C");
    m.epsilon = detail::field<double>(doc, "epsilon");
    const auto st = detail::field<json>(doc, "standardization");
    m.standardization.mean = detail::field<std::vector<double>>(st, "mean");
    m.standardization.scale = detail::field<std::vector<double>>(st, "scale");
    m.support_vectors = detail::field<std::vector<std::vector<double>>>(doc, "support_vectors");
    m.dual_weights = detail::field<std::vector<double>>(doc, "dual_weights");
    m.bias = detail::field<double>(doc, "bias");
    const std::size_t d = m.standardization.mean.size();
    require(m.standardization.scale.size() == d, ErrorKind::Schema,
            "standardization mean and scale differ in length");
    require(m.support_vectors.size() == m.dual_weights.size(), ErrorKind::Schema,
            "support_vectors and dual_weights differ in length");
    for (const auto& sv : m.support_vectors) {
      require(sv.size() == d, ErrorKind::Schema, "support vector has the wrong dimension");
    }
    if (doc.contains("solver")) {
      const auto& s = doc["solver"];
      m.solver.iterations = detail::field<long>(s, "iterations");
      m.solver.kkt_violation = detail::field<double>(s, "kkt_violation");
      m.solver.dual_objective = detail::field<double>(s, "dual_objective");
    }
    return m;
  }
  fail(ErrorKind::Schema, "unknown model_type '" + type + "'");
}

// ---------------------------------------------------------------------------
// Dependence ranking

inline json to_json(const pipeline::DependenceReport& r, const json& config = json::object()) {
  json out;
  out["schema_version"] = kSchemaVersion;
  out["report"] = "dependence";
  out["config"] = config;
  out["k"] = r.k_used;
  out["n_samples"] = r.n_samples;
  out["units"] = "nats";
  json entries = json::array();
  for (const auto& e : r.entries) {
    json item;
    item["rank"] = e.rank;
    item["feature"] = e.name;
    item["copula_entropy"] = detail::optional_number(e.copula_entropy);
    if (!e.unavailable_reason.empty()) item["unavailable_reason"] = e.unavailable_reason;
    entries.push_back(std::move(item));
  }
  out["entries"] = std::move(entries);
  return out;
}

inline std::string to_csv(const pipeline::DependenceReport& r) {
  std::string out = "rank,feature,copula_entropy\n";
  for (const auto& e : r.entries) {
    out += std::to_string(e.rank) + "," + e.name + "," +
           (e.copula_entropy ? io::format_double(*e.copula_entropy) : std::string()) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

inline json grid_to_json(const models::SVRGrid& g) {
  return {{"C", g.C},
          {"epsilon", g.epsilon},
          {"gamma_factor", g.gamma_factor},
          {"validation_fraction", g.validation_fraction},
          {"tolerance", g.tolerance}};
}

inline json to_json(const pipeline::EvaluationReport& r, const json& config = json::object()) {
  json out;
  out["schema_version"] = kSchemaVersion;
  out["report"] = "evaluation";
  out["config"] = config;
  out["model"] = pipeline::to_string(r.model_kind);
  out["selected_features"] = r.selected_features;
  out["n_splits"] = r.n_splits;
  out["train_ratio"] = r.train_ratio;
  out["cutoff_s"] = r.cutoff_s;
  out["master_seed"] = r.master_seed;
  out["summary"] = {
      {"mae", {{"mean", detail::finite_or_null(r.mae.mean)},
               {"sd", detail::finite_or_null(r.mae.sd)}}},
      {"diagnosis_accuracy", {{"mean", detail::finite_or_null(r.diagnosis_accuracy.mean)},
                              {"sd", detail::finite_or_null(r.diagnosis_accuracy.sd)}}},
      {"n_succeeded", r.n_splits - r.failed_splits().size()},
      {"n_failed", r.failed_splits().size()}};
  out["failed_splits"] = r.failed_splits();
  json splits = json::array();
  for (const auto& s : r.per_split) {
    json item;
    item["index"] = s.index;
    item["seed"] = s.seed;
    item["n_train"] = s.n_train;
    item["n_test"] = s.n_test;
    item["mae"] = detail::optional_number(s.mae);
    item["diagnosis_accuracy"] = detail::optional_number(s.diagnosis_accuracy);
    if (!s.error.empty()) item["error"] = s.error;
    splits.push_back(std::move(item));
  }
  out["per_split"] = std::move(splits);
  return out;
}

inline std::string summary_csv_header() {
  return "model,n_features,features,n_splits,n_failed,mae_mean,mae_sd,accuracy_mean,accuracy_sd\n";
}

inline std::string summary_csv_row(const pipeline::EvaluationReport& r) {
  std::string features;
  for (std::size_t i = 0; i < r.selected_features.size(); ++i) {
    if (i) features += ';';
    features += r.selected_features[i];
  }
  return pipeline::to_string(r.model_kind) + "," + std::to_string(r.selected_features.size()) +
         "," + features + "," + std::to_string(r.n_splits) + "," +
         std::to_string(r.failed_splits().size()) + "," + io::format_double(r.mae.mean) + "," +
         io::format_double(r.mae.sd) + "," + io::format_double(r.diagnosis_accuracy.mean) + "," +
         io::format_double(r.diagnosis_accuracy.sd) + "\n";
}

// ---------------------------------------------------------------------------
// Configuration records echoed into reports

inline json to_json(const gait::GaitConfig& c) {
  return {{"window_s", c.window_s},
          {"threshold_hz", c.threshold_hz},
          {"prominence_ratio", c.prominence_ratio},
          {"min_peak_separation_s", c.min_peak_separation_s},
          {"min_displacement_m", c.min_displacement_m},
          {"min_spectrum_samples", c.min_spectrum_samples},
          {"spectrum_padding", c.spectrum_padding}};
}

inline json to_json(const synth::CohortParams& p) {
  return {{"n_videos", p.n_videos},
          {"n_subjects", p.n_subjects},
          {"duration_s", p.duration_s},
          {"fps", p.fps},
          {"sensor_noise_m", p.sensor_noise_m},
          {"seed", p.seed},
          {"dependence_enabled", p.dependence.enabled},
          {"max_attempts", p.max_attempts},
          {"tug", {{"bulk_weight", p.tug.bulk_weight},
                   {"bulk_median_s", p.tug.bulk_median_s},
                   {"bulk_log_sd", p.tug.bulk_log_sd},
                   {"tail_offset_s", p.tug.tail_offset_s},
                   {"tail_mean_s", p.tug.tail_mean_s},
                   {"max_s", p.tug.max_s}}},
          {"extraction", to_json(p.extraction)}};
}

inline json to_json(const synth::WalkerParams& w) {
  return {{"speed_mps", w.speed_mps},
          {"step_length_m", w.step_length_m},
          {"step_period_s", w.step_period_s},
          {"v_amplitude_m", w.v_amplitude_m},
          {"ml_amplitude_m", w.ml_amplitude_m},
          {"ap_amplitude_m", w.ap_amplitude_m},
          {"speed_jitter_mps", w.speed_jitter_mps},
          {"sensor_noise_m", w.sensor_noise_m},
          {"duration_s", w.duration_s},
          {"fps", w.fps},
          {"heading_rad", w.heading_rad},
          {"seed", w.seed}};
}

// Ground-truth sidecar for a simulated cohort.
inline json to_json(const synth::Cohort& cohort, const synth::CohortParams& params) {
  json out;
  out["schema_version"] = kSchemaVersion;
  out["report"] = "cohort_ground_truth";
  out["params"] = to_json(params);
  out["informative_features"] = cohort.truth.informative_features;
  out["regenerations"] = cohort.truth.regenerations;
  json videos = json::array();
  for (const auto& v : cohort.truth.videos) {
    videos.push_back({{"video_id", v.video_id},
                      {"subject_id", v.subject_id},
                      {"tug_s", v.tug_s},
                      {"attempts", v.attempts},
                      {"walker", to_json(v.walker)}});
  }
  out["videos"] = std::move(videos);
  return out;
}

inline std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

inline json parse(std::string_view text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Parse, source + ": byte " + std::to_string(e.byte) + ": malformed JSON");
  }
}

}  // namespace tugscore::report
