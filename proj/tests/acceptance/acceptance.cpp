// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include "growthiv/count_models.hpp"
#include "growthiv/counterfactual.hpp"
#include "growthiv/diagnostics.hpp"
#include "growthiv/estimators.hpp"
#include "growthiv/sweep.hpp"
#include "growthiv/synth.hpp"

#include "fixtures.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace growthiv;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

using Check = std::function<void(Verdict&)>;

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

// ---- 1 ------------------------------------------------------------------

long long choose(int n, int k) {
  if (k < 0 || k > n) return 0;
  long long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

long long choose_range(int n, int lo, int hi) {
  long long s = 0;
  for (int k = lo; k <= hi; ++k) s += choose(n, k);
  return s;
}

void enumeration(Verdict& o) {
  // Seven national prices in Guatemala; four current and four lagged
  // community prices in the Philippines.
  const long long gt_protein = choose_range(7, 3, 4) + 5 * choose_range(7, 2, 4);
  const long long gt_energy = gt_protein + choose(7, 2);
  const long long ph = choose_range(8, 4, 6) + choose_range(8, 3, 6) + choose_range(8, 2, 6);
  o.require(gt_protein == 525 && gt_energy == 546 && ph == 602, "closed forms");
  for (auto outcome : {Outcome::height, Outcome::weight}) {
    const auto a = enumerate_sets(Country::guatemala, Model::protein_split, outcome).size();
    const auto b = enumerate_sets(Country::guatemala, Model::energy, outcome).size();
    const auto c = enumerate_sets(Country::philippines, Model::protein_split, outcome).size();
    const auto d = enumerate_sets(Country::philippines, Model::energy, outcome).size();
    o.require(static_cast<long long>(a) == gt_protein, "guatemala protein_split");
    o.require(static_cast<long long>(b) == gt_energy, "guatemala energy");
    o.require(static_cast<long long>(c) == ph && static_cast<long long>(d) == ph, "philippines");
    if (outcome == Outcome::height) o.detail << a << "/" << b << "/" << c << "/" << d << " sets";
  }
}

// ---- 2 ------------------------------------------------------------------

struct Reference {
  const char* what;
  double display_median;
  double display_scale;
  double increment_per_day;
  int days;
  double stated;
  int decimals;
};

void median_reconciliation(Verdict& o) {
  const double prot = protein_grams_to_kcal(10.0);
  const Reference rows[] = {
      {"GT height energy", 0.0231, 1000.0, 300.0, 90, 0.62, 2},
      {"GT weight energy", 0.0230, 1.0, 300.0, 90, 620.0, 0},
      {"PH height energy", 0.0098, 1000.0, 300.0, 60, 0.18, 2},
      {"GT height protein", 0.1079, 1000.0, prot, 90, 0.39, 2},
      {"GT weight protein", 0.0542, 1.0, prot, 90, 195.0, 0},
      {"PH height protein", 0.9324, 1000.0, prot, 60, 2.24, 2},
      {"PH weight protein", 0.2929, 1.0, prot, 60, 703.0, 0},
  };
  for (const auto& r : rows) {
    const double pred = median_prediction_from_display(r.display_median, r.display_scale, r.increment_per_day, r.days);
    const double rel = std::abs(pred - r.stated) / r.stated;
    const double unit = std::pow(10.0, -r.decimals);
    const bool rounds = std::abs(std::round(pred / unit) * unit - r.stated) < 1e-9 * std::max(1.0, r.stated);
    o.require(rel <= 0.01 || rounds, r.what);
    o.detail << r.what << " " << fmt(pred) << " vs " << r.stated << " (" << fmt(100.0 * rel, 2) << "%"
             << (rel > 0.01 ? ", equal after rounding" : "") << "); ";
  }
}

// ---- 3 ------------------------------------------------------------------

void equivalences(Verdict& o) {
  fixtures::Rng rng(301);
  double own = 0.0, kappa = 0.0, gmm = 0.0, hj = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    auto d = fixtures::iv_design({.n = 400, .k1 = 2, .m = 2, .pi = 0.4, .cluster_size = 4}, rng);

    auto self = d;
    self.z_excl = d.x_endog;
    self.instrument_names = d.endog_names;
    own = std::max(own, fixtures::max_abs_diff(fit_iv_gmm(self).coef, fit_ols(d).coef));

    const auto liml = fit_liml(d);
    kappa = std::max(kappa, std::abs(liml.kappa - 1.0));
    gmm = std::max(gmm, fixtures::max_abs_diff(liml.coef, fit_iv_gmm(d).coef));

    auto over = fixtures::iv_design({.n = 400, .k1 = 1, .m = 4, .pi = 0.3, .cluster_size = 4}, rng);
    Matrix a = rng.normal(4, 4);
    a.diagonal().array() += 3.0;
    auto t = over;
    t.z_excl = over.z_excl * a;
    const double j0 = hansen_j(fit_liml(over), over).stat;
    const double j1 = hansen_j(fit_liml(t), t).stat;
    hj = std::max(hj, std::abs(j1 - j0) / std::max(1.0, std::abs(j0)));
  }
  o.require(own <= 1e-10, "IV with own regressors vs OLS");
  o.require(kappa <= 1e-8, "exactly identified kappa");
  o.require(gmm <= 1e-8, "exactly identified LIML vs GMM");
  o.require(hj <= 1e-8, "Hansen J invariance");
  o.detail << "max |IV-OLS| " << fmt(own, 2) << ", max |kappa-1| " << fmt(kappa, 2) << ", max |LIML-GMM| "
           << fmt(gmm, 2) << ", max rel dJ " << fmt(hj, 2);
}

// ---- 4 ------------------------------------------------------------------

struct RecoveryTally {
  int iv_within = 0;
  int ols_outside = 0;
  int ols_below = 0;
  int iv_below = 0;
  int reps = 0;
};

RecoveryTally recovery_runs(const StructuralParams& p, int reps, std::uint64_t seed0) {
  RecoveryTally t;
  for (int rep = 0; rep < reps; ++rep) {
    const auto panel = generate_panel(p, seed0 + static_cast<std::uint64_t>(rep));
    const auto rows = oracle_bias_report(panel, p);
    for (const auto& r : rows) {
      if (r.coefficient != coef::kProtein) continue;
      const bool within = std::abs(r.bias) < 3.0 * r.std_error;
      if (r.estimator == "liml") {
        t.iv_within += within;
        t.iv_below += r.estimate < r.truth;
      } else {
        t.ols_outside += !within;
        t.ols_below += std::abs(r.estimate) < r.truth;
      }
    }
    ++t.reps;
  }
  return t;
}

void oracle_recovery(Verdict& o) {
  auto p = StructuralParams::defaults(Country::philippines);
  p.n_children = 2000;
  p.n_periods = 7;
  const auto endo = recovery_runs(p, 100, 40000);
  o.require(endo.iv_within >= 90, "IV within 3 SE in >= 90/100");
  o.require(endo.ols_outside >= 80, "OLS outside 3 SE in >= 80/100");
  o.detail << "endogenous: IV within 3 SE " << endo.iv_within << "/100, OLS outside " << endo.ols_outside
           << "/100; ";

  // Classical measurement error only: no compensation, no mu loading.
  auto q = p;
  for (auto* rule : {&q.protein, &q.nonprotein}) {
    rule->a_comp = 0.0;
    rule->a_mu = 0.0;
  }
  q.protein.a0 = 150.0;
  q.protein.meas_err_sd = 30.0;
  const auto me = recovery_runs(q, 100, 50000);
  o.require(me.ols_below >= 90, "OLS attenuated in >= 90/100");
  o.require(me.iv_within >= 90, "IV within 3 SE in >= 90/100 under measurement error");
  o.require(me.iv_below <= 65, "IV not attenuated");
  o.detail << "measurement error: |OLS| < truth " << me.ols_below << "/100, IV within 3 SE " << me.iv_within
           << "/100, IV below truth " << me.iv_below << "/100";
}

// ---- 5 ------------------------------------------------------------------

Matrix annihilator(const Matrix& a) {
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(a);
  return Matrix::Identity(a.rows(), a.rows()) - a * cod.pseudoInverse();
}

void diagnostics_calibration(Verdict& o) {
  fixtures::Rng rng(501);
  double worst = 0.0;
  for (int rep = 0; rep < 5; ++rep) {
    const auto d = fixtures::iv_design({.n = 400, .k1 = 1, .m = 4, .pi = 0.2}, rng);
    Matrix full(d.n(), d.k_exog() + d.m());
    full << d.x_exog, d.z_excl;
    const Vector x = d.x_endog.col(0);
    const double rss_r = x.dot(annihilator(d.x_exog) * x);
    const double rss_u = x.dot(annihilator(full) * x);
    const double classical = ((rss_r - rss_u) / d.m()) / (rss_u / static_cast<double>(d.n() - d.k_exog() - d.m()));
    worst = std::max(worst, std::abs(kp_wald_f(d, Weighting::homoskedastic) - classical) / classical);
  }
  o.require(worst <= 1e-6, "KP F vs classical F");
  o.detail << "KP vs classical F rel " << fmt(worst, 2) << "; ";

  const int reps = 200;
  auto rejection = [&](const fixtures::IvDgp& g, auto&& stat) {
    int r = 0;
    for (int rep = 0; rep < reps; ++rep) {
      const auto d = fixtures::iv_design(g, rng);
      if (stat(d) < 0.05) ++r;
    }
    return static_cast<double>(r) / reps;
  };
  auto hj_p = [](const DesignMatrices& d) { return *hansen_j(fit_liml(d), d).p; };
  auto hausman_p = [](const DesignMatrices& d) { return *hausman(fit_ols(d), fit_liml(d)).p; };

  const double hj_size = rejection({.n = 2000, .k1 = 1, .m = 4, .pi = 0.3, .heteroskedastic = true}, hj_p);
  const double hj_power =
      rejection({.n = 2000, .k1 = 1, .m = 4, .pi = 0.3, .invalid = 0.15, .heteroskedastic = true}, hj_p);
  const double h_size = rejection({.n = 1000, .k1 = 1, .m = 4, .pi = 0.3, .endogeneity = 0.0}, hausman_p);
  const double h_power = rejection({.n = 1000, .k1 = 1, .m = 4, .pi = 0.3, .endogeneity = 0.5}, hausman_p);
  o.require(hj_size >= 0.01 && hj_size <= 0.12, "Hansen J size in [1%, 12%]");
  o.require(hj_power > 0.5, "Hansen J power > 50%");
  o.require(h_size <= 0.12, "Hausman size <= 12%");
  o.require(h_power >= 0.9, "Hausman power >= 90%");
  o.detail << "HJ size " << fmt(100 * hj_size, 3) << "%, power " << fmt(100 * hj_power, 3) << "%; Hausman size "
           << fmt(100 * h_size, 3) << "%, power " << fmt(100 * h_power, 3) << "%";
}

// ---- 6 ------------------------------------------------------------------

void sweep_scale(Verdict& o) {
  auto p = StructuralParams::defaults(Country::philippines);
  p.n_children = 1700;
  p.n_periods = 9;
  const auto data = generate_panel(p, 606).growth_data(Model::protein_split);
  const auto sets = enumerate_sets(Country::philippines, Model::protein_split, Outcome::height);
  std::string bytes[2];
  double seconds[2];
  const int workers[2] = {1, 4};
  for (int k = 0; k < 2; ++k) {
    SweepOptions opt;
    opt.workers = workers[k];
    const auto t0 = std::chrono::steady_clock::now();
    const auto results = run_sweep(data, Model::protein_split, Outcome::height, sets, opt);
    seconds[k] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ostringstream os;
    write_specs_csv(os, results, Model::protein_split, Country::philippines);
    bytes[k] = os.str();
    if (k == 0) {
      std::size_t ok = 0;
      for (const auto& r : results) ok += r.status == SpecStatus::ok;
      o.detail << results.size() << " specs (" << ok << " ok) on " << data.rows.size() << " rows; ";
    }
  }
  o.require(data.rows.size() >= 14000, "about 15,000 rows");
  o.require(bytes[0] == bytes[1], "byte-identical specs across worker counts");
  o.require(seconds[0] < 600.0 && seconds[1] < 600.0, "under 10 minutes");
  o.detail << "1 worker " << fmt(seconds[0], 3) << " s, 4 workers " << fmt(seconds[1], 3) << " s, outputs "
           << (bytes[0] == bytes[1] ? "identical" : "differ");
}

// ---- 7 ------------------------------------------------------------------

CountDataset count_data(int n, double b0, double b1, double alpha, std::mt19937_64& eng) {
  std::normal_distribution<double> z(0.0, 1.0);
  CountDataset d;
  d.x.resize(n, 2);
  d.names = {"intercept", "x"};
  d.window_label = "mc";
  for (int i = 0; i < n; ++i) {
    const double x = z(eng);
    d.x(i, 0) = 1.0;
    d.x(i, 1) = x;
    double mu = std::exp(b0 + b1 * x);
    if (alpha > 0.0) mu *= std::gamma_distribution<double>(1.0 / alpha, alpha)(eng);
    d.y.push_back(std::poisson_distribution<int>(mu)(eng));
  }
  return d;
}

void count_models(Verdict& o) {
  CountDataset mean_only;
  mean_only.y = {1, 2, 3, 4, 5, 6, 3, 4};
  mean_only.x = Matrix::Ones(8, 1);
  mean_only.names = {"intercept"};
  const auto p0 = fit_count(mean_only, CountFamily::poisson);
  const double mle_err = std::abs(p0.coef(0) - std::log(3.5));
  o.require(mle_err <= 1e-8, "intercept-only Poisson");

  std::mt19937_64 eng(707);
  const auto d = count_data(1000, 0.7, 0.3, 0.6, eng);
  bool bic_exact = true;
  for (auto fam : {CountFamily::poisson, CountFamily::negbin, CountFamily::zip, CountFamily::zinb}) {
    const auto f = fit_count(d, fam);
    bic_exact = bic_exact && f.bic == -2.0 * f.loglik + f.n_parameters() * std::log(static_cast<double>(f.n));
  }
  o.require(bic_exact, "BIC identity");

  const auto pd = count_data(800, 1.0, 0.4, 0.0, eng);
  const auto pf = fit_count(pd, CountFamily::poisson);
  Vector nb(3);
  nb << pf.coef, std::log(1e-8);
  const double gap = std::abs(count_loglik(CountFamily::negbin, nb, pd) - pf.loglik);
  o.require(gap < 1e-3, "NB nests Poisson");

  int wins = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const auto nd = count_data(500, 0.7, 0.3, 0.8, eng);
    const std::vector<CountFit> fits{fit_count(nd, CountFamily::poisson), fit_count(nd, CountFamily::negbin)};
    if (select_model(fits).best_by_bic == 1) ++wins;
  }
  o.require(wins >= 90, "NB BIC win rate >= 90%");

  double worst = 0.0;
  for (double mu : {0.1, 1.0, 5.0, 20.0, 50.0}) {
    double s = 0.0;
    for (int y = 0; y <= 200; ++y) s += count_pmf(CountFamily::poisson, y, mu);
    worst = std::max(worst, std::abs(1.0 - s));
  }
  for (auto fam : {CountFamily::negbin, CountFamily::zip, CountFamily::zinb}) {
    double s = 0.0;
    for (int y = 0; y <= 400; ++y) s += count_pmf(fam, y, 5.0, 0.5, 0.3);
    worst = std::max(worst, std::abs(1.0 - s));
  }
  o.require(worst <= 1e-8, "pmf normalization");
  o.detail << "|b0 - ln 3.5| " << fmt(mle_err, 2) << ", NB-Poisson loglik gap " << fmt(gap, 2) << ", NB wins "
           << wins << "/100, pmf error " << fmt(worst, 2);
}

// ---- 8 ------------------------------------------------------------------

FitResult equation(double prot, double nonprot, double lag_w, double lag_h, double intercept = 0.0) {
  FitResult f;
  f.method = Method::liml;
  f.names = {coef::kProtein, coef::kNonProtein, coef::kLagWeight, coef::kLagHeight, coef::kIntercept, "age"};
  f.coef.resize(6);
  f.coef << prot, nonprot, lag_w, lag_h, intercept, 0.001;
  f.k_endog = 4;
  f.k_exog = 2;
  return f;
}

InterventionScenario scenario(double p, double q, int periods, int days) {
  InterventionScenario s;
  s.protein_kcal_per_day = p;
  s.nonprotein_kcal_per_day = q;
  s.n_periods = periods;
  s.days_per_period = days;
  return s;
}

void counterfactual(Verdict& o) {
  BaselinePath base;
  base.height0_cm = 65.0;
  base.weight0_g = 7000.0;
  for (int t = 0; t < 6; ++t) {
    BaselinePeriod bp;
    bp.protein_kcal = 4000.0 + 100.0 * t;
    bp.nonprotein_kcal = 30000.0;
    bp.controls = {{"age", 200.0 + 90.0 * t}};
    base.periods.push_back(bp);
  }
  const auto h = equation(3e-4, 4e-5, 0.002, -0.15, 1.0);
  const auto w = equation(0.06, 0.01, -0.2, 30.0, 200.0);
  const auto a = simulate_intervention(h, w, base, scenario(10.0, 25.0, 6, 90));
  const auto a3 = simulate_intervention(h, w, base, scenario(30.0, 75.0, 6, 90));
  const auto b = simulate_intervention(h, w, base, scenario(3.0, 7.0, 6, 90));
  const auto ab = simulate_intervention(h, w, base, scenario(13.0, 32.0, 6, 90));
  const auto z = simulate_intervention(h, w, base, scenario(0.0, 0.0, 6, 90));
  double worst = 0.0;
  auto rel = [](double x, double y) { return std::abs(x - y) / std::max(1.0, std::abs(x)); };
  for (std::size_t t = 0; t < 6; ++t) {
    worst = std::max({worst, rel(a3.cumulative_dh[t], 3.0 * a.cumulative_dh[t]),
                      rel(a3.cumulative_dw[t], 3.0 * a.cumulative_dw[t]),
                      rel(ab.cumulative_dh[t], a.cumulative_dh[t] + b.cumulative_dh[t]),
                      rel(ab.cumulative_dw[t], a.cumulative_dw[t] + b.cumulative_dw[t]), std::abs(z.cumulative_dh[t]),
                      std::abs(z.cumulative_dw[t])});
  }
  o.require(worst <= 1e-12, "linearity");

  InterventionScenario s = scenario(0.0, 0.0, 2, 1);
  s.schedule = {{100.0, 0.0}, {100.0, 0.0}};
  BaselinePath two = base;
  two.periods.resize(2);
  const auto d = simulate_intervention(equation(1e-3, 0.0, 0.0, -0.1), equation(0.0, 0.0, 0.0, 0.0), two, s);
  const double err = std::max({std::abs(d.period_dh[0] - 0.1), std::abs(d.period_dh[1] - 0.09),
                               std::abs(d.cumulative_dh[1] - 0.19)});
  o.require(err <= 1e-12, "two-period recursion");
  o.detail << "linearity rel error " << fmt(worst, 2) << "; recursion 0.1, 0.09 -> " << fmt(d.cumulative_dh[1], 6)
           << " (error " << fmt(err, 2) << ")";
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, Check>> criteria{
      {"enumeration counts", enumeration},
      {"median-prediction reconciliation", median_reconciliation},
      {"estimator equivalences", equivalences},
      {"oracle recovery", oracle_recovery},
      {"diagnostics calibration", diagnostics_calibration},
      {"sweep determinism and scale", sweep_scale},
      {"count models", count_models},
      {"counterfactual linearity and recursion", counterfactual},
  };
  // Optional arguments select criteria by number.
  std::vector<bool> selected(criteria.size(), argc <= 1);
  for (int i = 1; i < argc; ++i) {
    const int k = std::atoi(argv[i]);
    if (k >= 1 && k <= static_cast<int>(criteria.size())) selected[static_cast<std::size_t>(k - 1)] = true;
  }

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected[i]) continue;
    Verdict o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "[exception: " << e.what() << "]";
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << i + 1 << " (" << criteria[i].first << ", "
              << fmt(s, 3) << " s): " << o.detail.str() << std::endl;
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
