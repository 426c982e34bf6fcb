#pragma once

// Batch front end: extract | rank | evaluate | simulate.
//
// Exit status: 0 success, 1 user or input error, 2 internal or convergence
// error. Output files carry no timestamps; progress and timing go to the run
// log (stderr, or --run-log).

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "tugscore/error.hpp"
#include "tugscore/gaitfeat.hpp"
#include "tugscore/io.hpp"
#include "tugscore/pipeline.hpp"
#include "tugscore/report.hpp"
#include "tugscore/synthgait.hpp"

namespace tugscore::cli {

namespace fs = std::filesystem;
using report::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitInternal = 2;

inline int exit_code(ErrorKind kind) {
  return kind == ErrorKind::Internal || kind == ErrorKind::Convergence ? kExitInternal
                                                                       : kExitInput;
}

class RunLog {
 public:
  explicit RunLog(std::ostream& sink) : sink_(&sink) {}

  void open(const fs::path& path) {
    file_.open(path, std::ios::app);
    if (!file_) fail(ErrorKind::Io, "cannot open run log " + path.string());
    sink_ = &file_;
  }

  void info(const std::string& msg) { write("info", msg); }
  void warn(const std::string& msg) { write("warn", msg); }
  void error(const std::string& msg) { write("error", msg); }

 private:
  void write(const char* level, const std::string& msg) {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
    *sink_ << stamp << ' ' << level << ": " << msg << '\n';
    sink_->flush();
  }

  std::ostream* sink_;
  std::ofstream file_;
};

namespace detail {

// Runs f(i) for i in [0, n) on up to `threads` workers; f writes only slot i.
template <typename F>
void parallel_for(std::size_t n, unsigned threads, F&& f) {
  const unsigned workers =
      std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) f(i);
    });
  }
  for (auto& t : pool) t.join();
}

inline std::string join(const std::vector<std::string>& items, const char* sep = ", ") {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

inline fs::path sibling(const fs::path& path, const std::string& suffix) {
  fs::path out = path;
  out.replace_extension();
  out += suffix;
  return out;
}

inline double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// extract

struct ExtractOptions {
  fs::path pose_dir;
  fs::path manifest;  // defaults to <pose_dir>/manifest.csv
  fs::path out;
  gait::GaitConfig gait;
  unsigned threads = 1;
};

inline int cmd_extract(const ExtractOptions& opt, RunLog& log) {
  gait::validate(opt.gait);
  require(opt.threads >= 1, ErrorKind::Parameter, "threads must be at least 1");
  require(fs::is_directory(opt.pose_dir), ErrorKind::Io,
          "pose directory " + opt.pose_dir.string() + " does not exist");
  const fs::path manifest_path =
      opt.manifest.empty() ? opt.pose_dir / "manifest.csv" : opt.manifest;

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(opt.pose_dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
    if (fs::exists(manifest_path) && fs::equivalent(entry.path(), manifest_path)) continue;
    files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  require(!files.empty(), ErrorKind::InvalidInput,
          "no input: " + opt.pose_dir.string() + " contains no pose CSV files");

  const auto manifest =
      io::parse_manifest_csv(io::read_file(manifest_path), manifest_path.string());
  std::map<std::string, io::ManifestEntry> by_video;
  for (const auto& e : manifest) by_video.emplace(e.video_id, e);

  bool ok = true;
  std::vector<std::string> orphan_files;
  std::vector<fs::path> matched;
  std::set<std::string> seen;
  for (const auto& f : files) {
    const std::string id = f.stem().string();
    if (by_video.count(id)) {
      matched.push_back(f);
      seen.insert(id);
    } else {
      orphan_files.push_back(f.filename().string());
    }
  }
  std::vector<std::string> orphan_entries;
  for (const auto& e : manifest) {
    if (!seen.count(e.video_id)) orphan_entries.push_back(e.video_id);
  }
  if (!orphan_files.empty() || !orphan_entries.empty()) {
    ok = false;
    log.error("manifest mismatch; pose files without a manifest entry: [" +
              detail::join(orphan_files) + "]; manifest entries without a pose file: [" +
              detail::join(orphan_entries) + "]");
  }

  const auto start = std::chrono::steady_clock::now();
  std::vector<std::optional<GaitSample>> rows(matched.size());
  std::vector<std::string> errors(matched.size());
  detail::parallel_for(matched.size(), opt.threads, [&](std::size_t i) {
    const auto& entry = by_video.at(matched[i].stem().string());
    try {
      const PoseSeries series = io::read_pose_csv(matched[i], entry.subject_id);
      const gait::FeatureVector fv = gait::extract_features(series, opt.gait);
      rows[i] = GaitSample{std::vector<double>(fv.values.begin(), fv.values.end()), entry.tug_s,
                           entry.subject_id, entry.video_id};
    } catch (const Error& e) {
      errors[i] = matched[i].string() + ": " + e.what();
    }
  });

  Dataset data;
  data.feature_names = gait::feature_names();
  for (std::size_t i = 0; i < matched.size(); ++i) {
    if (rows[i]) {
      data.samples.push_back(std::move(*rows[i]));
    } else {
      ok = false;
      log.error(errors[i]);
    }
  }
  if (data.samples.empty()) {
    log.error("no pose file could be extracted; nothing written");
    return kExitInput;
  }
  io::write_atomic(opt.out, io::format_feature_csv(data));
  log.info("extracted " + std::to_string(data.size()) + " of " + std::to_string(files.size()) +
           " pose files into " + opt.out.string() + " in " +
           std::to_string(detail::seconds_since(start)) + " s");
  return ok ? kExitOk : kExitInput;
}

// ---------------------------------------------------------------------------
// rank

struct RankOptions {
  fs::path features;
  fs::path out;
  fs::path csv;  // defaults to <out>.csv
  int k = copent::kDefaultNeighbors;
  std::optional<std::uint64_t> jitter_seed;
};

inline json rank_config(const RankOptions& opt) {
  return {{"features", opt.features.string()},
          {"k", opt.k},
          {"jitter_seed", opt.jitter_seed ? json(*opt.jitter_seed) : json(nullptr)}};
}

inline int cmd_rank(const RankOptions& opt, RunLog& log, std::ostream& out) {
  const Dataset data = io::read_feature_csv(opt.features);
  const auto rep = pipeline::rank_features(data, opt.k, opt.jitter_seed);
  io::write_atomic(opt.out, report::dump(report::to_json(rep, rank_config(opt))));
  const fs::path csv = opt.csv.empty() ? detail::sibling(opt.out, ".csv") : opt.csv;
  io::write_atomic(csv, report::to_csv(rep));
  for (const auto& e : rep.entries) {
    char line[160];
    if (e.copula_entropy) {
      std::snprintf(line, sizeof line, "%3zu  %-32s %9.4f\n", e.rank, e.name.c_str(),
                    *e.copula_entropy);
    } else {
      std::snprintf(line, sizeof line, "%3zu  %-32s %9s\n", e.rank, e.name.c_str(), "n/a");
    }
    out << line;
  }
  log.info("ranked " + std::to_string(data.dimension()) + " features over " +
           std::to_string(data.size()) + " samples");
  return kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateOptions {
  fs::path features;
  fs::path out;
  fs::path summary_csv;  // defaults to <out>.summary.csv
  std::string model = "both";
  std::size_t top_k = 3;
  int k = copent::kDefaultNeighbors;
  pipeline::EvaluationConfig eval;
  bool next_feature_check = false;
  double next_feature_tolerance = 0.10;
  double max_failed_fraction = 0.10;
};

inline std::vector<pipeline::ModelKind> model_kinds(const std::string& model) {
  if (model == "both") return {pipeline::ModelKind::LR, pipeline::ModelKind::SVR};
  return {pipeline::parse_model_kind(model)};
}

inline json evaluate_config(const EvaluateOptions& opt) {
  return {{"features", opt.features.string()},
          {"model", opt.model},
          {"top_k", opt.top_k},
          {"k", opt.k},
          {"n_splits", opt.eval.n_splits},
          {"train_ratio", opt.eval.train_ratio},
          {"cutoff_s", opt.eval.cutoff_s},
          {"master_seed", opt.eval.master_seed},
          {"svr_grid", report::grid_to_json(opt.eval.svr_grid)},
          {"next_feature_check", opt.next_feature_check},
          {"next_feature_tolerance", opt.next_feature_tolerance},
          {"max_failed_fraction", opt.max_failed_fraction}};
}

inline std::string table_row(const pipeline::EvaluationReport& r) {
  char line[200];
  std::snprintf(line, sizeof line, "%-5s %8zu   %6.3f +- %-6.3f   %6.3f +- %-6.3f   %3zu/%zu\n",
                pipeline::to_string(r.model_kind).c_str(), r.selected_features.size(), r.mae.mean,
                r.mae.sd, r.diagnosis_accuracy.mean, r.diagnosis_accuracy.sd,
                r.failed_splits().size(), r.n_splits);
  return line;
}

inline int cmd_evaluate(const EvaluateOptions& opt, RunLog& log, std::ostream& out) {
  const auto kinds = model_kinds(opt.model);
  require(opt.eval.n_splits >= 1, ErrorKind::Parameter, "n_splits must be at least 1");
  require(opt.eval.train_ratio > 0.0 && opt.eval.train_ratio < 1.0, ErrorKind::Parameter,
          "train_ratio must lie in (0, 1)");
  require(opt.eval.threads >= 1, ErrorKind::Parameter, "threads must be at least 1");
  require(std::isfinite(opt.eval.cutoff_s), ErrorKind::Parameter, "cutoff_s must be finite");
  require(opt.next_feature_tolerance > 0.0, ErrorKind::Parameter,
          "next_feature_tolerance must be positive");
  for (double c : opt.eval.svr_grid.C) require(c > 0.0, ErrorKind::Parameter, "SVR C must be positive");
  for (double e : opt.eval.svr_grid.epsilon) {
    require(e >= 0.0, ErrorKind::Parameter, "SVR epsilon must be non-negative");
  }
  for (double g : opt.eval.svr_grid.gamma_factor) {
    require(g > 0.0, ErrorKind::Parameter, "SVR gamma factor must be positive");
  }
  require(!opt.eval.svr_grid.C.empty() && !opt.eval.svr_grid.epsilon.empty() &&
              !opt.eval.svr_grid.gamma_factor.empty(),
          ErrorKind::Parameter, "SVR grid must not be empty");

  const Dataset data = io::read_feature_csv(opt.features);
  const auto ranking = pipeline::rank_features(data, opt.k);
  std::size_t available = 0;
  for (const auto& e : ranking.entries) available += e.copula_entropy ? 1 : 0;
  require(opt.top_k >= 1 && opt.top_k <= available, ErrorKind::Parameter,
          "top_k = " + std::to_string(opt.top_k) + " must lie in [1, " +
              std::to_string(available) + "]");
  const auto selected = pipeline::select_features(ranking, opt.top_k);
  std::vector<std::string> names;
  for (std::size_t f : selected) names.push_back(data.feature_names[f]);
  log.info("selected features: " + detail::join(names));

  json doc;
  doc["schema_version"] = report::kSchemaVersion;
  doc["report"] = "evaluation";
  doc["config"] = evaluate_config(opt);
  doc["dependence"] = report::to_json(ranking);
  doc["dependence"].erase("schema_version");
  doc["dependence"].erase("config");
  doc["evaluations"] = json::array();

  auto strip = [](json j) {
    j.erase("schema_version");
    j.erase("config");
    j.erase("report");
    return j;
  };

  std::string summary = report::summary_csv_header();
  out << "model features   MAE (s) mean +- sd   accuracy mean +- sd   failed\n";
  bool too_many_failures = false;
  std::vector<pipeline::EvaluationReport> base;
  for (auto kind : kinds) {
    const auto start = std::chrono::steady_clock::now();
    auto r = pipeline::evaluate(data, kind, selected, opt.eval);
    log.info(pipeline::to_string(kind) + ": " + std::to_string(r.n_splits) + " splits in " +
             std::to_string(detail::seconds_since(start)) + " s");
    const double failed = static_cast<double>(r.failed_splits().size());
    if (failed > opt.max_failed_fraction * static_cast<double>(r.n_splits)) {
      too_many_failures = true;
      log.error(pipeline::to_string(kind) + ": " + std::to_string(r.failed_splits().size()) +
                " of " + std::to_string(r.n_splits) + " splits failed");
    }
    for (const auto& s : r.per_split) {
      if (!s.error.empty()) log.warn("split " + std::to_string(s.index) + ": " + s.error);
    }
    doc["evaluations"].push_back(strip(report::to_json(r)));
    summary += report::summary_csv_row(r);
    out << table_row(r);
    base.push_back(std::move(r));
  }

  if (opt.next_feature_check) {
    json check;
    check["tolerance"] = opt.next_feature_tolerance;
    check["results"] = json::array();
    if (opt.top_k + 1 > available) {
      check["skipped"] = "no further ranked feature is available";
    } else {
      const auto extended = pipeline::select_features(ranking, opt.top_k + 1);
      for (const auto& b : base) {
        auto r = pipeline::evaluate(data, b.model_kind, extended, opt.eval);
        const double change = std::abs(r.mae.mean - b.mae.mean) / b.mae.mean;
        const bool within = std::isfinite(change) && change < opt.next_feature_tolerance;
        if (!within) {
          log.warn(pipeline::to_string(b.model_kind) + ": adding " +
                   data.feature_names[extended.back()] + " changed MAE by " +
                   std::to_string(100.0 * change) + "%");
        }
        check["results"].push_back({{"model", pipeline::to_string(b.model_kind)},
                                     {"added_feature", data.feature_names[extended.back()]},
                                     {"mae_base", b.mae.mean},
                                     {"mae_extended", r.mae.mean},
                                     {"relative_change", report::detail::finite_or_null(change)},
                                     {"within_tolerance", within}});
        summary += report::summary_csv_row(r);
        out << table_row(r);
      }
    }
    doc["next_feature_check"] = std::move(check);
  }

  io::write_atomic(opt.out, report::dump(doc));
  const fs::path csv =
      opt.summary_csv.empty() ? detail::sibling(opt.out, ".summary.csv") : opt.summary_csv;
  io::write_atomic(csv, summary);
  return too_many_failures ? kExitInput : kExitOk;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOptions {
  fs::path out_dir;
  synth::CohortParams cohort;
};

inline int cmd_simulate(const SimulateOptions& opt, RunLog& log) {
  synth::validate(opt.cohort);
  gait::validate(opt.cohort.extraction);
  std::error_code ec;
  fs::create_directories(opt.out_dir, ec);
  require(!ec && fs::is_directory(opt.out_dir), ErrorKind::Io,
          "cannot create output directory " + opt.out_dir.string());

  const auto start = std::chrono::steady_clock::now();
  const auto cohort = synth::generate_cohort(
      opt.cohort, [&](const synth::CohortVideo& video, const PoseSeries& series) {
        io::write_atomic(opt.out_dir / (video.video_id + ".csv"), io::format_pose_csv(series));
      });
  std::vector<io::ManifestEntry> manifest;
  for (const auto& v : cohort.truth.videos) manifest.push_back({v.video_id, v.subject_id, v.tug_s});
  io::write_atomic(opt.out_dir / "manifest.csv", io::format_manifest_csv(manifest));
  io::write_atomic(opt.out_dir / "ground_truth.json",
                   report::dump(report::to_json(cohort, opt.cohort)));
  log.info("simulated " + std::to_string(manifest.size()) + " videos (" +
           std::to_string(cohort.truth.regenerations) + " regenerated) in " +
           std::to_string(detail::seconds_since(start)) + " s");
  return kExitOk;
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Gait-based TUG score estimation: feature extraction, association ranking, "
               "model evaluation and synthetic cohorts"};
  app.set_config("--config", "", "TOML/INI file with option defaults; flags override it");
  app.require_subcommand(1);
  std::string run_log;
  app.add_option("--run-log", run_log, "Append the run log to this file instead of stderr");

  ExtractOptions ex;
  auto* extract = app.add_subcommand("extract", "Pose CSV directory -> feature CSV");
  extract->add_option("--pose-dir", ex.pose_dir, "Directory of <video_id>.csv pose files")
      ->required();
  extract->add_option("--manifest", ex.manifest, "Manifest CSV (default <pose-dir>/manifest.csv)");
  extract->add_option("--out", ex.out, "Feature CSV to write")->required();
  extract->add_option("--window-s", ex.gait.window_s, "Window length")->capture_default_str();
  extract->add_option("--threshold-hz", ex.gait.threshold_hz, "Low-frequency threshold")
      ->capture_default_str();
  extract->add_option("--prominence-ratio", ex.gait.prominence_ratio)->capture_default_str();
  extract->add_option("--min-peak-separation-s", ex.gait.min_peak_separation_s)
      ->capture_default_str();
  extract->add_option("--threads", ex.threads)->capture_default_str();

  RankOptions rk;
  std::uint64_t jitter_seed = 0;
  auto* rank = app.add_subcommand("rank", "Feature CSV -> copula-entropy ranking");
  rank->add_option("--features", rk.features, "Feature CSV")->required();
  rank->add_option("--out", rk.out, "Ranking JSON to write")->required();
  rank->add_option("--csv", rk.csv, "Ranking CSV (default <out>.csv)");
  rank->add_option("-k,--k", rk.k, "Nearest neighbours")->capture_default_str();
  auto* jitter_opt =
      rank->add_option("--jitter-seed", jitter_seed, "Break ties with seeded 1e-10 jitter");

  EvaluateOptions ev;
  auto* evaluate = app.add_subcommand("evaluate", "Rank, select and evaluate LR/SVR");
  evaluate->add_option("--features", ev.features, "Feature CSV")->required();
  evaluate->add_option("--out", ev.out, "Report JSON to write")->required();
  evaluate->add_option("--summary-csv", ev.summary_csv, "Summary CSV (default <out>.summary.csv)");
  evaluate->add_option("--model", ev.model, "lr | svr | both")
      ->check(CLI::IsMember({"lr", "svr", "both"}))
      ->capture_default_str();
  evaluate->add_option("--top-k", ev.top_k)->capture_default_str();
  evaluate->add_option("-k,--k", ev.k, "Nearest neighbours for ranking")->capture_default_str();
  evaluate->add_option("--n-splits", ev.eval.n_splits)->capture_default_str();
  evaluate->add_option("--train-ratio", ev.eval.train_ratio)->capture_default_str();
  evaluate->add_option("--cutoff-s", ev.eval.cutoff_s)->capture_default_str();
  evaluate->add_option("--master-seed", ev.eval.master_seed)->capture_default_str();
  evaluate->add_option("--threads", ev.eval.threads)->capture_default_str();
  evaluate->add_option("--svr-c", ev.eval.svr_grid.C)->delimiter(',');
  evaluate->add_option("--svr-epsilon", ev.eval.svr_grid.epsilon)->delimiter(',');
  evaluate->add_option("--svr-gamma-factor", ev.eval.svr_grid.gamma_factor)->delimiter(',');
  evaluate->add_option("--svr-tolerance", ev.eval.svr_grid.tolerance)->capture_default_str();
  evaluate->add_flag("--next-feature-check", ev.next_feature_check,
                     "Also evaluate with the next ranked feature and report the MAE change");
  evaluate->add_option("--next-feature-tolerance", ev.next_feature_tolerance)
      ->capture_default_str();

  SimulateOptions sm;
  bool no_dependence = false;
  auto* simulate = app.add_subcommand("simulate", "Write a synthetic cohort of pose CSVs");
  simulate->add_option("--out-dir", sm.out_dir)->required();
  simulate->add_option("--n-videos", sm.cohort.n_videos)->capture_default_str();
  simulate->add_option("--n-subjects", sm.cohort.n_subjects)->capture_default_str();
  simulate->add_option("--seed", sm.cohort.seed)->capture_default_str();
  simulate->add_option("--duration-s", sm.cohort.duration_s)->capture_default_str();
  simulate->add_option("--fps", sm.cohort.fps)->capture_default_str();
  simulate->add_option("--sensor-noise-m", sm.cohort.sensor_noise_m)->capture_default_str();
  simulate->add_flag("--no-dependence", no_dependence,
                     "Draw gait independently of the TUG score");

  RunLog log(err);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (!run_log.empty()) log.open(run_log);
    if (*extract) return cmd_extract(ex, log);
    if (*rank) {
      if (jitter_opt->count() > 0) rk.jitter_seed = jitter_seed;
      return cmd_rank(rk, log, out);
    }
    if (*evaluate) return cmd_evaluate(ev, log, out);
    sm.cohort.dependence.enabled = !no_dependence;
    return cmd_simulate(sm, log);
  } catch (const Error& e) {
    log.error(e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    log.error(std::string("internal: ") + e.what());
    return kExitInternal;
  }
}

}  // namespace tugscore::cli
