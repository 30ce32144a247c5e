// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <unistd.h>

#include "../oracles.hpp"
#include "gridbench/data.hpp"
#include "gridbench/explain.hpp"
#include "gridbench/metrics.hpp"
#include "gridbench/model.hpp"
#include "gridbench/preprocess.hpp"
#include "gridbench/stats.hpp"
#include "gridbench/store.hpp"
#include "gridbench/study.hpp"

using namespace gridbench;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string failure;  // first failed check
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      failure = what;
    }
  }
};

std::vector<double> row_of(const Matrix& m, std::size_t i) { return {m.row(i).begin(), m.row(i).end()}; }

Matrix uniform_rows(std::size_t n, std::size_t d, Rng& rng, double lo = 0, double hi = 1) {
  Matrix m(n, d);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) m(r, c) = rng.uniform(lo, hi);
  return m;
}

explain::ShapleyOptions exact() { return {explain::ShapleyMode::kExact, 0, 1}; }

explain::ExplainFn exact_fn(const model::Scorer& f, const explain::Background& bg) {
  return [&f, &bg](std::span<const double> x) { return explain::shapley_explain(f, x, bg, exact()); };
}

template <class F>
std::optional<ErrorCode> code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

struct Prepared {
  Matrix xtr, xte;
  std::vector<int> ytr;
};

Prepared synthetic(std::size_t d_numeric, std::size_t d_categorical, std::uint64_t seed) {
  data::SyntheticSpec spec;
  spec.n = 300;
  spec.d_numeric = d_numeric;
  spec.d_categorical = d_categorical;
  auto parts = data::split(data::generate_synthetic(spec, seed), 0.7, seed);
  auto p = preprocess::fit_pipeline(parts.train, {});
  return {p.apply(parts.train), p.apply(parts.test), parts.train.labels()};
}

std::vector<model::ModelPtr> every_kind(const Prepared& t, std::uint64_t seed) {
  const std::vector<model::ModelSpec> three = {
      {model::ModelKind::kLogReg, {}}, {model::ModelKind::kTree, {}}, {model::ModelKind::kMlp, {{"epochs", 100}}}};
  std::vector<model::ModelPtr> out;
  out.push_back(model::train(model::ModelKind::kLogReg, t.xtr, t.ytr, {}, seed));
  out.push_back(model::train(model::ModelKind::kTree, t.xtr, t.ytr, {}, seed));
  out.push_back(model::train(model::ModelKind::kMlp, t.xtr, t.ytr, {{"epochs", 100}}, seed));
  out.push_back(model::train_stack(three, {model::ModelKind::kLogReg, {}}, t.xtr, t.ytr, 3, seed));
  return out;
}

// ---------------------------------------------------------------------------

void shapley_local_accuracy(Outcome& o) {
  // d = 10 after preprocessing: 7 numeric + one 3-category feature.
  auto t = synthetic(7, 1, 101);
  Rng rng(derive_seed(101, "instances"));
  double worst = 0;
  std::size_t checked = 0;
  auto models = every_kind(t, 5);
  const std::size_t d = t.xtr.cols();
  o.check(d <= 10, "feature count " + std::to_string(d));
  explain::Background bg = explain::make_background(t.xtr, 20, 3);
  for (const auto& m : models) {
    for (int i = 0; i < 100; ++i) {
      auto x = row_of(uniform_rows(1, d, rng), 0);
      auto e = explain::shapley_explain(*m, x, bg, exact());
      double err = std::abs(e.base_value + std::accumulate(e.phi.begin(), e.phi.end(), 0.0) - m->score(x));
      worst = std::max(worst, err);
      ++checked;
    }
  }
  o.check(worst < 1e-9, "max error " + std::to_string(worst));
  o.detail << checked << " explanations over 4 model kinds, d=" << d << ", max |base+sum(phi)-score| = " << worst;
}

void linear_closed_form(Outcome& o) {
  Rng rng(202);
  double worst = 0;
  for (int c = 0; c < 50; ++c) {
    std::size_t d = 2 + rng.below(7);
    std::vector<double> w(d);
    for (auto& v : w) v = rng.uniform(-3, 3);
    oracle::LinearStub f(w, rng.uniform(-1, 1));
    explain::Background bg{uniform_rows(1 + rng.below(30), d, rng, -2, 2), 0};
    auto mu = bg.rows.column_means();
    auto x = row_of(uniform_rows(1, d, rng, -2, 2), 0);
    auto e = explain::shapley_explain(f, x, bg, exact());
    for (std::size_t i = 0; i < d; ++i) worst = std::max(worst, std::abs(e.phi[i] - w[i] * (x[i] - mu[i])));
  }
  o.check(worst <= 1e-6, "max deviation " + std::to_string(worst));
  o.detail << "50 cases, max |phi_i - w_i(x_i - mu_i)| = " << worst;
}

void sens_max_analytic(Outcome& o) {
  oracle::LinearStub f({1, 2});
  explain::Background bg{Matrix::from_rows({{0, 0}, {0.4, 0.9}}), 0};
  double v = metrics::sens_max(exact_fn(f, bg), std::vector<double>{0.3, 0.7}, 0.01, 20, 3);
  double target = 0.01 * std::sqrt(5.0);
  o.check(std::abs(v - target) <= 1e-9, "linear case gave " + std::to_string(v));

  auto t = synthetic(4, 1, 303);
  auto models = every_kind(t, 7);
  explain::Background tb = explain::make_background(t.xtr, 15, 1);
  oracle::ConstantStub c(t.xtr.cols(), 0.3);
  oracle::HalfPlaneStub hp(std::vector<double>(t.xtr.cols(), 1.0), -1.0);
  std::vector<const model::Scorer*> all = {&f, &c, &hp};
  for (const auto& m : models) all.push_back(m.get());
  std::size_t zero = 0;
  for (const auto* m : all) {
    const explain::Background& b = m == &f ? bg : tb;
    std::vector<double> x = m == &f ? std::vector<double>{0.3, 0.7} : row_of(t.xte, 0);
    double s = metrics::sens_max(exact_fn(*m, b), x, 0.0, 20, 9);
    if (s == 0.0) ++zero;
  }
  o.check(zero == all.size(), "r=0 nonzero for some model");
  char buf[160];
  std::snprintf(buf, sizeof buf, "w=(1,2), r=0.01: %.12f vs 0.01*sqrt(5) = %.12f; r=0 gives 0 for %zu/%zu models", v,
                target, zero, all.size());
  o.detail << buf;
}

void auc_morf_criterion(Outcome& o) {
  Rng rng(404);
  oracle::ConstantStub c(6, 0.5);
  explain::Background cb{uniform_rows(5, 6, rng), 0};
  double flat = metrics::auc_morf(exact_fn(c, cb), c, row_of(uniform_rows(1, 6, rng), 0), 5, cb);
  o.check(flat == 2.5, "constant model gave " + std::to_string(flat));

  const std::size_t d = 8, k = 5;
  std::vector<double> w(d);
  for (auto& v : w) v = rng.uniform(-2, 2);
  oracle::HalfPlaneStub f(w, 0.0);
  explain::Background bg{uniform_rows(40, d, rng), 0};
  auto means = bg.rows.column_means();
  auto fn = exact_fn(f, bg);
  int wins = 0;
  for (int i = 0; i < 100; ++i) {
    auto x = row_of(uniform_rows(1, d, rng), 0);
    double morf = metrics::auc_morf(fn, f, x, k, bg);
    double random_mean = 0;
    for (int r = 0; r < 20; ++r) {
      std::vector<std::size_t> order(d);
      std::iota(order.begin(), order.end(), 0);
      rng.shuffle(order);
      random_mean += metrics::perturbation_curve_area(f, x, order, k, means);
    }
    if (morf <= random_mean / 20) ++wins;
  }
  o.check(wins >= 95, "MoRF <= random on " + std::to_string(wins) + "/100");
  o.detail << "constant model K*c = " << flat << " (K=5, c=0.5); MoRF <= random-order mean on " << wins << "/100";
}

void robustness_criterion(Outcome& o) {
  oracle::ThresholdStub step(1, 0, 0.5);
  auto r1 = metrics::adversarial_robustness(step, std::vector<double>{0.3}, Matrix::from_rows({{0.9}, {0.1}}), 2, 1);
  o.check(std::abs(r1.distance - 0.2) <= 1e-5, "threshold stub gave " + std::to_string(r1.distance));

  // Separators at signed distance 0.4 from x, one candidate across the boundary along w.
  Rng rng(505);
  double worst_sep = 0;
  for (int t = 0; t < 20; ++t) {
    std::size_t d = 2 + rng.below(5);
    std::vector<double> w(d), x(d);
    double norm = 0;
    for (auto& v : w) {
      v = rng.uniform(-2, 2);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    double wx = 0;
    for (std::size_t i = 0; i < d; ++i) {
      x[i] = rng.uniform(-1, 1);
      wx += w[i] * x[i];
    }
    double b = -wx - 0.4 * norm;  // w.x + b = -0.4 |w|
    oracle::HalfPlaneStub f(w, b);
    Matrix cands = uniform_rows(20, d, rng, -3, 3);
    std::vector<double> across(d);
    for (std::size_t i = 0; i < d; ++i) across[i] = x[i] + 0.9 * w[i] / norm;
    cands.append_row(across);
    auto r = metrics::adversarial_robustness(f, x, cands, 4, t);
    worst_sep = std::max(worst_sep, std::abs(r.distance - 0.4));
  }
  o.check(worst_sep <= 1e-4, "separator distance off by " + std::to_string(worst_sep));

  oracle::LinearStub lin({3, 4});
  auto attained = metrics::lipschitz_lower(lin, Matrix::from_rows({{0, 0}, {3, 4}, {1, 0}, {0, 2}}), 100, 1).value;
  o.check(std::abs(attained - 5.0) < 1e-12, "parallel pair gave " + std::to_string(attained));
  double worst_ratio = 0;
  for (int t = 0; t < 50; ++t) {
    std::vector<double> w(4);
    double norm = 0;
    for (auto& v : w) {
      v = rng.uniform(-3, 3);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    oracle::LinearStub f(w, rng.uniform(-1, 1));
    double l = metrics::lipschitz_lower(f, uniform_rows(20, 4, rng, -2, 2), 150, t).value;
    worst_ratio = std::max(worst_ratio, l / norm);
  }
  o.check(worst_ratio <= 1.0 + 1e-12, "Lipschitz exceeded |w| by ratio " + std::to_string(worst_ratio));
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "threshold stub %.9f; separator max error %.2e; Lipschitz parallel pair %.12g, max L/|w| = %.12f", r1.distance,
                worst_sep, attained, worst_ratio);
  o.detail << buf;
}

void wilcoxon_criterion(Outcome& o) {
  Rng rng(606);
  double worst = 0;
  std::vector<bool> sizes(13, false);
  int compared = 0;
  for (int t = 0; t < 100; ++t) {
    std::size_t n = 1 + t % 12;
    std::vector<double> a(n), b(n);
    bool coarse = t % 2 == 0;
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = coarse ? std::round(rng.uniform(0, 6)) : rng.normal();
      b[i] = coarse ? std::round(rng.uniform(0, 6)) : rng.normal();
    }
    auto ref = oracle::wilcoxon_brute(a, b);
    if (ref.n_effective == 0) {
      o.check(code_of([&] { stats::wilcoxon_signed_rank(a, b); }) == ErrorCode::kAllPairsTied, "tied sample accepted");
      continue;
    }
    auto r = stats::wilcoxon_signed_rank(a, b);
    o.check(r.n_effective == ref.n_effective && r.statistic == ref.statistic, "statistic mismatch in trial " + std::to_string(t));
    worst = std::max(worst, std::abs(r.p_value - ref.p_value));
    sizes[ref.n_effective] = true;
    ++compared;
  }
  o.check(worst <= 1e-12, "p mismatch " + std::to_string(worst));
  int covered = 0;
  for (std::size_t n = 1; n <= 12; ++n) covered += sizes[n];
  o.check(covered == 12, "only " + std::to_string(covered) + " of n_effective 1..12 exercised");
  std::vector<double> same = {0.3, 0.5, 0.9};
  auto code = code_of([&] { stats::wilcoxon_signed_rank(same, same); });
  o.check(code == ErrorCode::kAllPairsTied, "all-tied input did not raise AllPairsTied");
  o.detail << compared << " samples, n_effective 1..12 all covered, max |p - oracle| = " << worst
           << "; all-tied raises AllPairsTied";
}

void cohens_d_criterion(Outcome& o) {
  double d = stats::cohens_d(std::vector<double>{1, 2, 3}, std::vector<double>{2, 3, 4});
  o.check(d == -1.0, "d = " + std::to_string(d));
  std::vector<double> flat = {1, 1, 1};
  o.check(code_of([&] { stats::cohens_d(flat, flat); }) == ErrorCode::kZeroDeviation, "zero deviation accepted");
  using stats::EffectLabel;
  o.check(stats::effect_label(0.2) == EffectLabel::kSmall && stats::effect_label(-0.2) == EffectLabel::kSmall &&
              stats::effect_label(0.1) == EffectLabel::kSmall,
          "0.2 or lower not small");
  o.check(stats::effect_label(0.5) == EffectLabel::kMedium && stats::effect_label(-0.5) == EffectLabel::kMedium,
          "0.5 not medium");
  o.check(stats::effect_label(0.8) == EffectLabel::kLarge && stats::effect_label(-0.8) == EffectLabel::kLarge &&
              stats::effect_label(2.0) == EffectLabel::kLarge,
          "0.8 or higher not large");
  o.detail << "d((1,2,3),(2,3,4)) = " << d << "; ZeroDeviation raised; 0.2 small, 0.5 medium, 0.8 large";
}

void bootstrap_coverage(Outcome& o) {
  Rng rng(derive_seed(707, "coverage"));
  int covered = 0;
  for (int t = 0; t < 500; ++t) {
    std::vector<double> a(30), b(30);
    for (int i = 0; i < 30; ++i) {
      a[i] = 1 + rng.normal();
      b[i] = rng.normal();
    }
    auto ci = stats::bootstrap_ci_mean_diff(a, b, 0.95, 5000, derive_seed(707, "coverage/resample", t));
    if (ci.low <= 1.0 && 1.0 <= ci.high) ++covered;
  }
  o.check(covered >= 465, "coverage " + std::to_string(covered) + "/500");
  o.detail << "95% BCa interval covered 1.0 in " << covered << "/500 trials (" << covered / 5.0 << "%)";
}

void mlp_gradient(Outcome& o) {
  Matrix x = Matrix::from_rows({{0.2, -0.5}, {0.9, 0.1}, {-0.4, 0.8}, {0.6, -0.7}, {-0.8, -0.2}});
  std::vector<int> y{1, 0, 1, 0, 1};
  model::MlpParameters p;
  p.inputs = 2;
  p.hidden = 4;
  Rng rng(808);
  p.w1.resize(8);
  p.b1.resize(4);
  p.w2.resize(4);
  for (auto& v : p.w1) v = rng.uniform(-1, 1);
  for (auto& v : p.b1) v = rng.uniform(-1, 1);
  for (auto& v : p.w2) v = rng.uniform(-1, 1);
  p.b2 = -0.2;
  double worst = 0;
  std::size_t params = 0;
  for (double l2 : {0.0, 0.01}) {
    auto analytic = model::mlp_gradient(p, x, y, l2).flatten();
    auto flat = p.flatten();
    params = flat.size();
    for (std::size_t i = 0; i < flat.size(); ++i) {
      const double h = 1e-6;
      auto fp = flat, fm = flat;
      fp[i] += h;
      fm[i] -= h;
      model::MlpParameters plus = p, minus = p;
      plus.assign(fp);
      minus.assign(fm);
      double numeric = (model::mlp_loss(plus, x, y, l2) - model::mlp_loss(minus, x, y, l2)) / (2 * h);
      double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
  }
  o.check(worst < 1e-4, "relative error " + std::to_string(worst));
  o.detail << params << " parameters, 5 points, max relative error " << worst;
}

void basic_join_algebra(Outcome& o) {
  Matrix a = Matrix::from_rows({{0.5, 0.2}, {0.1, 0.4}});
  auto e1 = explain::basic_join_combine(a, std::vector<double>{1.0, 0.0});
  auto e2 = explain::basic_join_combine(a, std::vector<double>{0.5, 0.5});
  // Reference products written out term by term.
  o.check(e1 == std::vector<double>{0.5 * 1.0 + 0.2 * 0.0, 0.1 * 1.0 + 0.4 * 0.0}, "w=(1,0) mismatch");
  o.check(e2 == std::vector<double>{0.5 * 0.5 + 0.2 * 0.5, 0.1 * 0.5 + 0.4 * 0.5}, "w=(0.5,0.5) mismatch");
  o.check(std::abs(e1[0] - 0.5) < 1e-15 && std::abs(e1[1] - 0.1) < 1e-15, "w=(1,0) not (0.5,0.1)");
  o.check(std::abs(e2[0] - 0.35) < 1e-15 && std::abs(e2[1] - 0.25) < 1e-15, "w=(0.5,0.5) not (0.35,0.25)");

  // A trained stack: the joined explanation is exactly A*w of the sub-explanations.
  auto t = synthetic(3, 1, 909);
  const std::vector<model::ModelSpec> three = {
      {model::ModelKind::kLogReg, {}}, {model::ModelKind::kTree, {}}, {model::ModelKind::kMlp, {{"epochs", 100}}}};
  auto ens = model::train_stack(three, {model::ModelKind::kLogReg, {}}, t.xtr, t.ytr, 3, 9);
  explain::Background bg = explain::make_background(t.xtr, 12, 2);
  std::size_t exact_rows = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    auto x = t.xte.row(i);
    auto joined = explain::basic_join_explain(*ens, x, bg, exact());
    Matrix am(x.size(), 3);
    for (std::size_t j = 0; j < 3; ++j) {
      auto e = explain::shapley_explain(*ens->first_level()[j], x, bg, exact());
      for (std::size_t k = 0; k < x.size(); ++k) am(k, j) = e.phi[k];
    }
    Matrix mapped(0, 3);
    for (std::size_t r = 0; r < bg.rows.rows(); ++r) mapped.append_row(ens->first_level_scores(bg.rows.row(r)));
    auto w = explain::shapley_explain(*ens->second_level(), ens->first_level_scores(x), {mapped, 0}, exact());
    bool same = true;
    for (std::size_t k = 0; k < x.size(); ++k) {
      double expected = 0;
      for (std::size_t j = 0; j < 3; ++j) expected += am(k, j) * w.phi[j];
      same = same && joined.phi[k] == expected;
    }
    exact_rows += same;
  }
  o.check(exact_rows == 5, "trained stack join differs from A*w");

  // m = 1 with the identity join returns the inner explanation unchanged.
  auto single = model::train_stack({{model::ModelKind::kMlp, {{"epochs", 100}}}}, {model::ModelKind::kLogReg, {}}, t.xtr,
                                   t.ytr, 3, 4);
  auto inner = explain::shapley_explain(*single->first_level()[0], t.xte.row(0), bg, exact());
  Matrix column(inner.phi.size(), 1);
  for (std::size_t k = 0; k < inner.phi.size(); ++k) column(k, 0) = inner.phi[k];
  auto identity = explain::basic_join_combine(column, std::vector<double>{1.0});
  o.check(identity == inner.phi, "identity join changed the inner explanation");
  o.detail << "hand fixtures (0.5,0.1) and (0.35,0.25); trained stack A*w exact on " << exact_rows
           << "/5 instances; m=1 identity join equals inner explanation";
}

void end_to_end(Outcome& o) {
  fs::path config = fs::path(GRIDBENCH_SOURCE_DIR) / "configs" / "case_study.json";
  fs::path work = fs::temp_directory_path() / ("gridbench_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(work);
  auto cfg = study::load_config(config);

  auto t0 = std::chrono::steady_clock::now();
  auto first = study::run_study(cfg, work / "store", work / "reports");
  double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  o.check(seconds < 600, "run took " + std::to_string(seconds) + " s");

  const auto& doc = first.record.document();
  auto violations = store::validate_record(store::DocumentStore(work / "store").load(first.record.study_id()).document());
  o.check(violations.empty(), "record invalid: " + store::format_violations(violations));
  o.check(doc["datasets"].size() == 3, "expected 3 datasets");
  o.check(doc["models"].size() == 6, "expected 2 algorithms on each of 3 datasets");
  for (const auto& m : doc["models"]) {
    std::string first_level = m.dump();
    o.check(m["kind"] == "stack" && first_level.find("logreg") != std::string::npos &&
                first_level.find("tree") != std::string::npos && first_level.find("mlp") != std::string::npos,
            "model is not a logreg+tree+mlp stack");
  }
  for (const auto& m : doc["metrics"])
    for (const char* group : {"classification", "explanation", "robustness"})
      o.check(m.contains(group), std::string("metric group missing: ") + group);
  std::string algos;
  for (const auto& e : doc["explainers"]) algos += e.dump();
  o.check(algos.find("basic_join") != std::string::npos && algos.find("blackbox") != std::string::npos,
          "explainers are not blackbox and basic_join");

  fs::path svg = work / "reports" / first.record.study_id() / "gardner_altman_sens_max.svg";
  o.check(fs::exists(svg), "missing " + svg.string());
  if (fs::exists(svg)) {
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::read_xml(svg.string(), tree);
    } catch (const std::exception& e) {
      o.check(false, std::string("SVG is not well-formed: ") + e.what());
    }
  }

  std::size_t finite = 0;
  for (const auto& c : doc["comparison"]) {
    bool ok = c["wilcoxon"].contains("statistic") && c["cohens_d"].contains("value");
    if (ok)
      for (double v : {c["wilcoxon"]["statistic"].get<double>(), c["wilcoxon"]["p_value"].get<double>(),
                       c["cohens_d"]["value"].get<double>(), c["bootstrap_ci"]["low"].get<double>(),
                       c["bootstrap_ci"]["high"].get<double>()})
        ok = ok && std::isfinite(v);
    finite += ok;
    o.check(ok, "non-finite comparison for " + c["metric"].get<std::string>());
  }
  o.check(finite > 0, "empty comparison block");

  auto second = study::build_record(cfg);
  o.check(second.reproducibility_digest() == first.record.reproducibility_digest(), "rerun digest differs");
  o.detail << "case study ran in " << std::fixed;
  o.detail.precision(1);
  o.detail << seconds << " s on " << store::capture_environment().logical_cores << " core(s); " << finite
           << " comparisons finite; digest " << first.record.reproducibility_digest().substr(0, 16)
           << " reproduced on rerun";
  fs::remove_all(work);
}

void classification_oracle(Outcome& o) {
  std::vector<double> s = {0.1, 0.4, 0.35, 0.8};
  std::vector<int> y = {0, 0, 1, 1};
  auto m = metrics::classification_metrics(s, y, 0.5);
  double ref = oracle::auc_pairs(s, y);
  o.check(m.auc == 0.75 && ref == 0.75, "auc " + std::to_string(m.auc) + " oracle " + std::to_string(ref));
  auto perfect = metrics::classification_metrics(std::vector<double>{0, 0, 1, 1}, y, 0.5);
  o.check(perfect.auc == 1.0 && perfect.mcc == 1.0 && perfect.false_positive_rate == 0.0 &&
              perfect.balanced_accuracy == 1.0,
          "perfect classifier off the boundary");
  auto inverted = metrics::classification_metrics(std::vector<double>{1, 0}, std::vector<int>{0, 1}, 0.5);
  o.check(inverted.auc == 0.0 && inverted.mcc == -1.0 && inverted.false_positive_rate == 1.0 &&
              inverted.balanced_accuracy == 0.0,
          "inverted classifier off the boundary");
  o.detail << "AUC " << m.auc << " (pair-count oracle " << ref << "); perfect auc/mcc = 1/1, inverted auc/mcc = "
           << inverted.auc << "/" << inverted.mcc;
}

struct Criterion {
  const char* name;
  double limit_seconds;
  std::function<void(Outcome&)> run;
};

}  // namespace

// With arguments, only the named criteria run.
int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {"exact-shapley-local-accuracy", 60, shapley_local_accuracy},
      {"linear-shapley-closed-form", 0, linear_closed_form},
      {"sens-max-analytic", 0, sens_max_analytic},
      {"auc-morf", 120, auc_morf_criterion},
      {"robustness", 0, robustness_criterion},
      {"wilcoxon-exact", 0, wilcoxon_criterion},
      {"cohens-d", 0, cohens_d_criterion},
      {"bootstrap-coverage", 120, bootstrap_coverage},
      {"mlp-gradient-check", 0, mlp_gradient},
      {"basic-join-algebra", 0, basic_join_algebra},
      {"end-to-end-case-study", 600, end_to_end},
      {"classification-metric-oracle", 0, classification_oracle},
  };
  std::vector<std::string> only(argv + 1, argv + argc);
  int failures = 0, ran = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.name) == only.end()) continue;
    ++ran;
    Outcome o;
    auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.check(false, std::string("threw: ") + e.what());
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit_seconds > 0 && secs >= c.limit_seconds)
      o.check(false, "took " + std::to_string(secs) + " s, limit " + std::to_string(c.limit_seconds) + " s");
    failures += !o.pass;
    std::string text = o.pass ? o.detail.str() : o.failure + " | " + o.detail.str();
    std::printf("%s %s (%.2f s): %s\n", o.pass ? "PASS" : "FAIL", c.name, secs, text.c_str());
    std::fflush(stdout);
  }
  if (ran == 0) {
    std::fprintf(stderr, "no such criterion\n");
    return 2;
  }
  std::printf("%d/%d criteria passed\n", ran - failures, ran);
  return failures == 0 ? 0 : 1;
}
