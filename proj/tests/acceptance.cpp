// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>

#include "support.hpp"
#include "tugscore/copent.hpp"
#include "tugscore/io.hpp"
#include "tugscore/models.hpp"
#include "tugscore/pipeline.hpp"
#include "tugscore/report.hpp"
#include "tugscore/synthgait.hpp"

using namespace tugscore;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// 1. CE of Gaussian pairs against 1/2 ln(1 - rho^2).
Outcome estimator_accuracy() {
  Outcome o{true, ""};
  double slowest = 0.0;
  for (double rho : {0.0, 0.5, 0.9}) {
    const double truth = 0.5 * std::log(1.0 - rho * rho);
    const double tol = rho == 0.9 ? 0.1 : 0.05;
    int good = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto g = synth::gaussian_samples(rho, 5000, 500 + seed);
      const auto t0 = Clock::now();
      const double ce = copent::copula_entropy(g, 3).value;
      slowest = std::max(slowest, seconds_since(t0));
      if (std::abs(ce - truth) <= tol) ++good;
    }
    o.pass = o.pass && good >= 18;
    o.detail += "rho=" + fmt(rho, 1) + ": " + std::to_string(good) + "/20; ";
  }
  o.pass = o.pass && slowest < 5.0;
  o.detail += "slowest estimate " + fmt(slowest) + " s";
  return o;
}

// 2. MI is the exact negation of CE.
Outcome negation_contract() {
  std::size_t checked = 0;
  for (double rho : {0.0, 0.3, -0.7, 0.95}) {
    for (std::size_t n : {20u, 200u, 2000u}) {
      const auto g = synth::gaussian_samples(rho, n, n + 7);
      for (int k : {1, 3, 5}) {
        if (copent::mutual_information(g, k).value != -copent::copula_entropy(g, k).value) {
          return {false, "mismatch at rho=" + fmt(rho, 2) + " n=" + std::to_string(n)};
        }
        ++checked;
      }
    }
  }
  return {true, std::to_string(checked) + " inputs"};
}

// 3. H(joint) - sum H(marginal) agrees with the copula estimate.
Outcome decomposition() {
  double worst = 0.0;
  for (double rho : {0.0, 0.5, 0.9}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto g = synth::gaussian_samples(rho, 5000, 800 + seed);
      double marginals = 0.0;
      for (std::size_t j = 0; j < 2; ++j) {
        const std::size_t which[] = {j};
        marginals += copent::knn_entropy(g.select_columns(which), 3).value;
      }
      const double gap = copent::knn_entropy(g, 3).value - marginals - copent::copula_entropy(g, 3).value;
      worst = std::max(worst, std::abs(gap));
    }
  }
  return {worst <= 0.15, "worst gap " + fmt(worst, 4) + " nats"};
}

// 4. Per-column strictly increasing maps leave CE bit-identical.
Outcome monotone_invariance() {
  const std::vector<std::function<double(double)>> maps = {
      [](double x) { return std::exp(x); }, [](double x) { return x * x * x; },
      [](double x) { return 2.5 * x - 4.0; }};
  std::size_t checked = 0;
  for (double rho : {0.0, 0.5, 0.9}) {
    const auto g = synth::gaussian_samples(rho, 2000, 31);
    const double base = copent::copula_entropy(g).value;
    for (const auto& f : maps) {
      for (std::size_t col = 0; col < 2; ++col) {
        std::vector<double> v;
        for (std::size_t i = 0; i < g.rows(); ++i) {
          for (std::size_t j = 0; j < 2; ++j) v.push_back(j == col ? f(g(i, j)) : g(i, j));
        }
        if (copent::copula_entropy(copent::SampleMatrix(g.rows(), 2, v)).value != base) {
          return {false, "changed at rho=" + fmt(rho, 1)};
        }
        ++checked;
      }
    }
  }
  return {true, std::to_string(checked) + " transformed matrices"};
}

// 5. Walker ground truth recovery and degenerate zeros.
Outcome feature_recovery() {
  using gait::Characteristic;
  int good = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    rng::Engine e(seed + 9000);
    synth::WalkerParams p;
    p.speed_mps = rng::uniform(e, 0.6, 1.5);
    p.step_period_s = rng::uniform(e, 0.5, 0.7);
    p.step_length_m = p.speed_mps * p.step_period_s;
    p.speed_jitter_mps = 0.02;
    p.sensor_noise_m = 0.001;
    p.heading_rad = rng::uniform(e, -3.0, 3.0);
    p.seed = seed;
    const auto truth = synth::walker_truth(p);
    try {
      const auto fv = gait::extract_features(synth::generate_walker(p));
      const auto within = [](double got, double want) { return std::abs(got - want) <= 0.05 * want; };
      if (within(fv.mean(Characteristic::GaitSpeed), truth.gait_speed) &&
          within(fv.mean(Characteristic::StrideTime), truth.stride_time) &&
          within(fv.mean(Characteristic::StepLength), truth.step_length)) {
        ++good;
      }
    } catch (const Error&) {
    }
  }
  bool zeros = true;
  for (const auto& w : gait::characterize_windows(testing_support::constant_velocity_series(0.8, 0.6, 20.0))) {
    zeros = zeros && w[Characteristic::MovementIntensity] == 0.0 &&
            w[Characteristic::AccelerationRange] == 0.0;
  }
  return {good >= 45 && zeros, std::to_string(good) + "/50 within 5%; constant-velocity zeros " +
                                   (zeros ? "exact" : "NOT exact")};
}

// 6. SMO against the dense projected-gradient oracle on small instances.
Outcome svr_correctness() {
  double worst_gap = 0.0, worst_sum = 0.0, worst_box = 0.0;
  int instances = 0;
  rng::Engine e(77);
  for (int rep = 0; rep < 30; ++rep) {
    const auto n = static_cast<Eigen::Index>(2 + rep % 7);
    const auto d = static_cast<Eigen::Index>(1 + rep % 3);
    models::Matrix X(n, d);
    models::Vector y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) X(i, j) = rng::normal(e);
      y(i) = 10.0 + 3.0 * rng::normal(e);
    }
    models::SVRParams p;
    p.C = rep % 3 == 0 ? 1.0 : (rep % 3 == 1 ? 10.0 : 100.0);
    p.epsilon = rep % 2 == 0 ? 0.1 : 0.5;
    p.kernel = rep % 2 == 0 ? models::KernelSpec::rbf(0.5) : models::KernelSpec::linear();
    p.tolerance = 1e-6;
    const auto model = models::fit_svr(X, y, p);
    const auto Z = model.standardization.apply(X);
    const auto K = models::gram_matrix(p.kernel, Z);
    const auto oracle = testing_support::svr_dual_oracle(K, y, p.C, p.epsilon);
    worst_gap = std::max(worst_gap, std::abs(model.solver.dual_objective - oracle.objective));
    double sum = 0.0;
    for (double v : model.dual_weights) {
      sum += v;
      worst_box = std::max(worst_box, std::abs(v) - p.C);
    }
    worst_sum = std::max(worst_sum, std::abs(sum));
    ++instances;
  }
  return {worst_gap <= 1e-3 && worst_sum <= 1e-6 && worst_box <= 0.0,
          std::to_string(instances) + " instances; max objective gap " + fmt(worst_gap, 7) +
              "; max |sum v| " + fmt(worst_sum, 9)};
}

// 7. LR exactness and the singular-design error.
Outcome lr_correctness() {
  rng::Engine e(5);
  double worst = 0.0;
  for (int rep = 0; rep < 10; ++rep) {
    const Eigen::Index n = 40, d = 1 + rep % 4;
    models::Matrix X(n, d);
    models::Vector beta(d);
    for (Eigen::Index j = 0; j < d; ++j) beta(j) = rng::uniform(e, -5.0, 5.0);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) X(i, j) = rng::normal(e);
    }
    const models::Vector y = (X * beta).array() + 2.5;
    const auto m = models::fit_lr(X, y);
    for (Eigen::Index j = 0; j < d; ++j) {
      worst = std::max(worst, std::abs(m.coefficients[static_cast<std::size_t>(j)] - beta(j)));
    }
    worst = std::max(worst, std::abs(m.intercept - 2.5));
  }
  models::Matrix S(6, 2);
  S << 1, 2, 2, 4, 3, 6, 4, 8, 5, 10, 6, 12;
  bool raised = false;
  try {
    (void)models::fit_lr(S, models::Vector::LinSpaced(6, 1, 6), {"a", "twice_a"});
  } catch (const Error& err) {
    raised = err.kind() == ErrorKind::SingularDesign;
  }
  return {worst <= 1e-8 && raised,
          "max coefficient error " + fmt(worst * 1e12, 3) + "e-12; singular design " +
              (raised ? "raised" : "NOT raised")};
}

const Dataset& default_cohort() {
  static const Dataset d = synth::generate_cohort({}).dataset;
  return d;
}

// 8. Defaults, byte-identical reruns, no leakage.
Outcome pipeline_fidelity() {
  const auto& d = default_cohort();
  const auto features = pipeline::select_features(pipeline::rank_features(d), 3);
  pipeline::EvaluationConfig c;
  bool ok = c.n_splits == 100 && c.train_ratio == 0.8 && c.cutoff_s == 13.5;
  std::string detail;
  for (auto kind : {pipeline::ModelKind::LR, pipeline::ModelKind::SVR}) {
    const auto a = report::dump(report::to_json(pipeline::evaluate(d, kind, features, c)));
    auto threaded = c;
    threaded.threads = 4;
    const auto r = pipeline::evaluate(d, kind, features, threaded);
    const auto b = report::dump(report::to_json(r));
    ok = ok && a == b && r.per_split.size() == 100 && r.per_split[0].n_train == 116;
    detail += pipeline::to_string(kind) + (a == b ? " identical; " : " DIFFERS; ");
  }
  auto keep = c;
  keep.keep_models = true;
  bool sealed = true;
  for (auto kind : {pipeline::ModelKind::LR, pipeline::ModelKind::SVR}) {
    const auto clean = pipeline::run_split(d, kind, features, keep, 3);
    Dataset corrupted = d;
    for (std::size_t row : pipeline::make_split(d.size(), 0.8, clean.seed).test) {
      corrupted.samples[row].tug_s = 999.0;
      for (auto& v : corrupted.samples[row].features) v = 1e6;
    }
    const auto dirty = pipeline::run_split(corrupted, kind, features, keep, 3);
    sealed = sealed && clean.model && dirty.model &&
             report::dump(report::model_to_json(*clean.model)) ==
                 report::dump(report::model_to_json(*dirty.model));
  }
  detail += sealed ? "no leakage" : "LEAKAGE";
  return {ok && sealed, detail};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + TUGSCORE_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
  return std::system(cmd.c_str());
}

// 9. Planted speed variability in the top three, plus a full CLI run.
Outcome selection_power(const fs::path& work) {
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    synth::CohortParams p;
    p.seed = seed;
    const auto r = pipeline::rank_features(synth::generate_cohort(p).dataset);
    for (std::size_t i = 0; i < 3; ++i) {
      if (r.entries[i].name == "speed_variability.mean") ++hits;
    }
  }
  const auto t0 = Clock::now();
  const std::string dir = work.string();
  bool cli_ok = run_cli("simulate --out-dir \"" + dir + "/poses\"") == 0 &&
                run_cli("extract --pose-dir \"" + dir + "/poses\" --out \"" + dir + "/features.csv\"") == 0 &&
                run_cli("rank --features \"" + dir + "/features.csv\" --out \"" + dir + "/rank.json\"") == 0 &&
                run_cli("evaluate --features \"" + dir + "/features.csv\" --out \"" + dir +
                        "/evaluation.json\" --model both --next-feature-check") == 0;
  const double elapsed = seconds_since(t0);
  return {hits >= 95 && cli_ok && elapsed < 600.0,
          std::to_string(hits) + "/100 seeds; end-to-end " + (cli_ok ? "ok" : "FAILED") + " in " +
              fmt(elapsed, 1) + " s"};
}

// 10. Soft check read back from the end-to-end report.
Outcome next_feature(const fs::path& work) {
  try {
    const auto doc = report::parse(io::read_file(work / "evaluation.json"), "evaluation.json");
    const auto& check = doc.at("next_feature_check");
    bool ok = true;
    std::string detail = "tolerance " + fmt(check.at("tolerance").get<double>(), 2) + ":";
    for (const auto& e : check.at("results")) {
      ok = ok && e.at("within_tolerance").get<bool>();
      detail += " " + e.at("model").get<std::string>() + " " +
                fmt(100.0 * e.at("relative_change").get<double>(), 1) + "%";
    }
    return {ok && check.at("results").size() == 2, detail};
  } catch (const std::exception& e) {
    return {false, e.what()};
  }
}

}  // namespace

int main() {
  const auto work = fs::temp_directory_path() / "tugscore_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"estimator accuracy", estimator_accuracy},
      {"mutual information = -copula entropy", negation_contract},
      {"entropy decomposition", decomposition},
      {"monotone invariance", monotone_invariance},
      {"feature recovery", feature_recovery},
      {"SVR correctness", svr_correctness},
      {"LR correctness", lr_correctness},
      {"pipeline fidelity", pipeline_fidelity},
      {"feature-selection power", [&] { return selection_power(work); }},
      {"next-feature soft check", [&] { return next_feature(work); }},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s criterion %zu (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].first, o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
