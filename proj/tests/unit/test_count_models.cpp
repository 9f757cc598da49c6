#include "growthiv/count_models.hpp"
#include "growthiv/error.hpp"
#include "growthiv/synth.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace growthiv;

namespace {

CountDataset intercept_only(const std::vector<int>& y) {
  CountDataset d;
  d.y = y;
  d.x = linalg::Matrix::Ones(static_cast<Eigen::Index>(y.size()), 1);
  d.names = {"intercept"};
  d.window_label = "test";
  return d;
}

// y ~ NB2(mu = exp(b0 + b1 x), alpha) via the gamma-Poisson mixture; alpha
// 0 gives Poisson.
CountDataset simulate(int n, double b0, double b1, double alpha, std::uint64_t seed, double zero_prob = 0.0) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  CountDataset d;
  d.x.resize(n, 2);
  d.names = {"intercept", "x"};
  d.window_label = "sim";
  for (int i = 0; i < n; ++i) {
    const double x = z(eng);
    d.x(i, 0) = 1.0;
    d.x(i, 1) = x;
    double mu = std::exp(b0 + b1 * x);
    if (alpha > 0.0) {
      std::gamma_distribution<double> g(1.0 / alpha, alpha);
      mu *= g(eng);
    }
    std::poisson_distribution<int> p(mu);
    int y = p(eng);
    if (u(eng) < zero_prob) y = 0;
    d.y.push_back(y);
  }
  return d;
}

}  // namespace

TEST_CASE("intercept-only Poisson MLE is the log of the sample mean") {
  const auto d = intercept_only({1, 2, 3, 4, 5, 6, 3, 4});   // mean 3.5
  const auto fit = fit_count(d, CountFamily::poisson);
  CHECK(fit.converged);
  CHECK(std::abs(fit.coef(0) - std::log(3.5)) < 1e-8);
  CHECK(predict_mean(fit, linalg::Vector::Ones(1)) == doctest::Approx(3.5).epsilon(1e-8));
}

TEST_CASE("Poisson recovers simulated coefficients") {
  const auto d = simulate(5000, 0.5, -0.2, 0.0, 11);
  const auto fit = fit_count(d, CountFamily::poisson);
  CHECK(fit.converged);
  CHECK(std::abs(fit.coef(0) - 0.5) < 3.0 * fit.std_errors(0));
  CHECK(std::abs(fit.coef(1) + 0.2) < 3.0 * fit.std_errors(1));
}

TEST_CASE("BIC identity holds exactly for every family") {
  const auto d = simulate(800, 0.8, 0.3, 0.5, 12, 0.2);
  for (auto fam : {CountFamily::poisson, CountFamily::negbin, CountFamily::zip, CountFamily::zinb}) {
    const auto fit = fit_count(d, fam);
    CHECK(fit.bic == -2.0 * fit.loglik + fit.n_parameters() * std::log(static_cast<double>(fit.n)));
    CHECK(fit.loglik == doctest::Approx(count_loglik(fam, fit.parameters(), d)).epsilon(1e-14));
    if (has_dispersion(fam)) CHECK(*fit.alpha > 0.0);
  }
}

TEST_CASE("nested models reduce to Poisson") {
  const auto d = simulate(500, 1.0, 0.4, 0.0, 13);
  const auto p = fit_count(d, CountFamily::poisson);
  const double llp = p.loglik;

  linalg::Vector nb(3);
  nb << p.coef, std::log(1e-8);
  CHECK(std::abs(count_loglik(CountFamily::negbin, nb, d) - llp) < 1e-3);

  linalg::Vector zip(3);
  zip << p.coef, -60.0;
  CHECK(std::abs(count_loglik(CountFamily::zip, zip, d) - llp) < 1e-8);
  for (int y = 0; y < 10; ++y) {
    CHECK(count_log_pmf(CountFamily::zip, y, 2.5, 0.0, 0.0) == doctest::Approx(count_log_pmf(CountFamily::poisson, y, 2.5)));
  }
}

TEST_CASE("pmfs are normalized") {
  for (double mu : {0.1, 1.0, 7.5, 20.0, 50.0}) {
    double s = 0.0;
    for (int y = 0; y <= 200; ++y) s += count_pmf(CountFamily::poisson, y, mu);
    CHECK(s >= 1.0 - 1e-8);
    CHECK(s <= 1.0 + 1e-12);
  }
  for (auto fam : {CountFamily::negbin, CountFamily::zip, CountFamily::zinb}) {
    double s = 0.0;
    for (int y = 0; y <= 200; ++y) s += count_pmf(fam, y, 5.0, 0.5, 0.3);
    CHECK(std::abs(s - 1.0) < 1e-8);
  }
  CHECK(count_pmf(CountFamily::poisson, 0, 2.0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-15));
  CHECK(count_pmf(CountFamily::poisson, 3, 2.0) == doctest::Approx(std::exp(-2.0) * 8.0 / 6.0).epsilon(1e-14));
}

TEST_CASE("score at the optimum vanishes and matches finite differences") {
  const auto d = simulate(1500, 0.6, 0.3, 0.7, 14, 0.15);
  for (auto fam : {CountFamily::poisson, CountFamily::negbin, CountFamily::zip, CountFamily::zinb}) {
    const auto fit = fit_count(d, fam);
    REQUIRE(fit.converged);
    const auto theta = fit.parameters();
    const auto score = count_score(fam, theta, d);
    const double n = static_cast<double>(d.n());
    linalg::Vector fd(theta.size());
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
      auto up = theta, dn = theta;
      up(j) += 1e-5;
      dn(j) -= 1e-5;
      fd(j) = (count_loglik(fam, up, d) - count_loglik(fam, dn, d)) / 2e-5;
    }
    CHECK(fd.lpNorm<Eigen::Infinity>() / n < 1e-6);
    CHECK(score.lpNorm<Eigen::Infinity>() / n < 1e-8);

    // away from the optimum the analytic score agrees with the numerical one
    auto off = theta;
    off(0) += 0.1;
    const auto s_off = count_score(fam, off, d);
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
      auto up = off, dn = off;
      up(j) += 1e-5;
      dn(j) -= 1e-5;
      const double num = (count_loglik(fam, up, d) - count_loglik(fam, dn, d)) / 2e-5;
      CHECK(s_off(j) == doctest::Approx(num).epsilon(1e-3));
    }
  }
}

TEST_CASE("negative binomial wins on BIC for overdispersed data") {
  int wins = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const auto d = simulate(400, 0.7, 0.3, 0.8, 100 + rep);
    const std::vector<CountFit> fits{fit_count(d, CountFamily::poisson), fit_count(d, CountFamily::negbin)};
    if (select_model(fits).best_by_bic == 1) ++wins;
  }
  CHECK(wins >= 18);
}

TEST_CASE("model selection rules") {
  CountFit a, b;
  a.family = CountFamily::poisson;
  b.family = CountFamily::negbin;
  a.converged = b.converged = true;
  a.bic = 100.0;
  b.bic = 90.0;
  a.coef = b.coef = linalg::Vector::Zero(1);
  a.names = b.names = {"intercept"};
  b.alpha = 0.5;
  const auto sel = select_model({a, b});
  CHECK(sel.best_by_bic == 1);

  b.bic = 100.0;
  CHECK(select_model({b, a}).best_by_bic == 1);   // tie goes to the earlier family

  b.converged = false;
  CHECK(select_model({a, b}).best_by_bic == 0);
  a.converged = false;
  CHECK_THROWS_AS(select_model({a, b}), Error);

  // a fit whose predictions equal the holdout counts has r2 = 1
  CountDataset holdout;
  holdout.x.resize(6, 2);
  holdout.x << 1, 0, 1, 1, 1, 0, 1, 1, 1, 0, 1, 1;
  holdout.y = {2, 5, 2, 5, 2, 5};
  holdout.names = {"intercept", "d"};
  CountFit exact;
  exact.family = CountFamily::poisson;
  exact.converged = true;
  exact.names = holdout.names;
  exact.coef.resize(2);
  exact.coef << std::log(2.0), std::log(2.5);
  CHECK(select_model({exact}, &holdout).r2.at(0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("predict_days") {
  CountFit f;
  f.family = CountFamily::poisson;
  f.names = {"intercept", "x"};
  f.coef.resize(2);
  f.coef << std::log(4.0), 0.0;
  CHECK(predict_days(f, {{"x", 1.0}}, 61) == doctest::Approx(4.0).epsilon(1e-15));
  f.coef << std::log(75.0), 0.0;
  CHECK(predict_days(f, {{"x", 0.0}}, 61) == 61.0);
  f.coef << 0.3, -0.7;
  CHECK(predict_days(f, {{"intercept", 1.0}, {"x", 2.0}}, 61) == doctest::Approx(std::exp(0.3 - 1.4)).epsilon(1e-15));
  CHECK_THROWS_AS(predict_days(f, {}, 61), ValidationError);

  f.family = CountFamily::zip;
  f.inflation_logit = 0.0;
  CHECK(predict_days(f, {{"x", 0.0}}, 61) == doctest::Approx(0.5 * std::exp(0.3)).epsilon(1e-15));
}

TEST_CASE("all-zero counts are rejected as separated") {
  const auto d = intercept_only(std::vector<int>(40, 0));
  CHECK_THROWS_AS(fit_count(d, CountFamily::poisson), NumericalError);
  const auto battery = fit_window_battery({d});
  REQUIRE(battery.windows.size() == 1);
  CHECK(battery.windows[0].degenerate);
  CHECK_FALSE(battery.windows[0].fit.has_value());
}

TEST_CASE("count windows") {
  CHECK(count_window_of_age(0) == 0);
  CHECK(count_window_of_age(60) == 0);
  CHECK(count_window_of_age(61) == 1);
  CHECK(count_window_label(0) == "0-2");
  CHECK(count_window_label(11) == "22-24");
  CHECK(count_covariate_names().size() == 17);
}

TEST_CASE("battery on a synthetic Guatemala panel") {
  auto p = StructuralParams::defaults(Country::guatemala);
  p.n_children = 300;
  const auto s = generate_panel(p, 5);
  const auto windows = build_count_windows(s.panel);
  REQUIRE(windows.size() == kCountWindows);
  const auto battery = fit_window_battery(windows);
  REQUIRE(battery.windows.size() == 12);
  for (const auto& w : battery.windows) {
    CHECK_FALSE(w.degenerate);
    REQUIRE(w.fit.has_value());
    CHECK(w.fit->converged);
  }

  const std::string json = battery_to_json(battery);
  const auto back = battery_from_json(json);
  CHECK(battery_to_json(back) == json);
  for (std::size_t w = 0; w < 12; ++w) {
    const auto a = predict_means(*battery.windows[w].fit, windows[w].x);
    const auto b = predict_means(*back.windows[w].fit, windows[w].x);
    CHECK(a == b);
  }

  // a window with too few rows is flagged while the others proceed
  auto short_windows = windows;
  short_windows[3].x.conservativeResize(5, Eigen::NoChange);
  short_windows[3].y.resize(5);
  if (!short_windows[3].row_ids.empty()) short_windows[3].row_ids.resize(5);
  const auto partial = fit_window_battery(short_windows);
  CHECK(partial.windows[3].degenerate);
  CHECK_FALSE(partial.windows[4].degenerate);
}

TEST_CASE("recall table fills missing slots with the child mean") {
  Panel panel;
  auto row = [](const std::string& id, const std::string& c, int age, std::optional<double> diar) {
    ChildObservation o;
    o.child_id = id;
    o.community_id = c;
    o.age_days = age;
    o.diarrhea_days_reported = diar;
    o.reporting_window_days = 15;
    o.birth_year = 1970;
    return o;
  };
  panel.push_back(row("a", "v1", 30, 3.0));
  panel.push_back(row("a", "v1", 100, 1.0));
  panel.push_back(row("b", "v1", 30, 5.0));
  const auto t = RecallTable::from_panel(panel);
  const auto ia = t.find("a");
  REQUIRE(ia.has_value());
  const auto x = t.covariates(*ia, 0);
  REQUIRE(x.has_value());
  CHECK((*x)(0) == 1.0);
  CHECK((*x)(1) == 3.0);    // slot 0-2
  CHECK((*x)(2) == 1.0);    // slot 2-4
  CHECK((*x)(3) == 2.0);    // missing slot: child mean
  CHECK((*x)(13) == 4.0);   // village average for slot 0-2
  CHECK_FALSE(t.find("zz").has_value());
}
