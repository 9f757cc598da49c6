#include "growthiv/count_models.hpp"

#include "growthiv/error.hpp"
#include "growthiv/stats.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace growthiv {

using linalg::Matrix;
using linalg::Vector;

std::string_view to_string(CountFamily f) {
  switch (f) {
    case CountFamily::poisson: return "poisson";
    case CountFamily::negbin: return "negbin";
    case CountFamily::zip: return "zip";
    case CountFamily::zinb: return "zinb";
  }
  return "unknown";
}

CountFamily parse_count_family(std::string_view s) {
  for (auto f : {CountFamily::poisson, CountFamily::negbin, CountFamily::zip, CountFamily::zinb}) {
    if (s == to_string(f)) return f;
  }
  throw ValidationError("unknown count family '" + std::string(s) + "'");
}

bool has_dispersion(CountFamily f) { return f == CountFamily::negbin || f == CountFamily::zinb; }
bool is_zero_inflated(CountFamily f) { return f == CountFamily::zip || f == CountFamily::zinb; }

void CountDataset::validate() const {
  if (static_cast<Eigen::Index>(y.size()) != x.rows()) throw ValidationError("count data: y and X row mismatch");
  if (static_cast<Eigen::Index>(names.size()) != x.cols()) throw ValidationError("count data: names and X mismatch");
  for (int v : y) {
    if (v < 0) throw ValidationError("count data: negative count");
  }
  if (!x.allFinite()) throw ValidationError("count data: non-finite covariate");
}

int CountFit::n_parameters() const {
  return static_cast<int>(coef.size()) + (alpha ? 1 : 0) + (inflation_logit ? 1 : 0);
}

double CountFit::inflation_probability() const {
  return inflation_logit ? 1.0 / (1.0 + std::exp(-*inflation_logit)) : 0.0;
}

Vector CountFit::parameters() const {
  Vector t(n_parameters());
  t.head(coef.size()) = coef;
  Eigen::Index i = coef.size();
  if (alpha) t(i++) = std::log(*alpha);
  if (inflation_logit) t(i++) = *inflation_logit;
  return t;
}

namespace {

// log(1 + exp(x)) without overflow.
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

struct BaseTerms {
  double lf = 0.0;      // log f(y)
  double d_eta = 0.0;   // d log f / d eta
  double d_la = 0.0;    // d log f / d log alpha
};

BaseTerms base_terms(bool nb, int y, double eta, double alpha) {
  BaseTerms t;
  const double mu = std::exp(eta);
  const double lgy = std::lgamma(y + 1.0);
  if (!nb) {
    t.lf = y * eta - mu - lgy;
    t.d_eta = y - mu;
    return t;
  }
  const double x = alpha * mu;
  const double l1 = std::log1p(x);
  double sum_log = 0.0;
  double sum_frac = 0.0;
  for (int j = 0; j < y; ++j) {
    sum_log += std::log1p(alpha * j);
    sum_frac += j / (1.0 + alpha * j);
  }
  t.lf = sum_log - lgy - l1 / alpha + y * (eta - l1);
  t.d_eta = (y - mu) / (1.0 + x);
  // log1p(x)/alpha^2 - mu/(alpha(1+x)), expanded for small x to avoid cancellation.
  const double tail = x < 1e-4 ? mu * mu * (0.5 - 2.0 * x / 3.0) : l1 / (alpha * alpha) - mu / (alpha * (1.0 + x));
  t.d_la = alpha * (sum_frac + tail - y * mu / (1.0 + x));
  return t;
}

struct ObsTerms {
  double l = 0.0;
  double d_eta = 0.0;
  double d_la = 0.0;
  double d_g = 0.0;
};

ObsTerms obs_terms(CountFamily fam, int y, double eta, double alpha, double g) {
  const BaseTerms b = base_terms(has_dispersion(fam), y, eta, alpha);
  ObsTerms o;
  if (!is_zero_inflated(fam)) {
    o.l = b.lf;
    o.d_eta = b.d_eta;
    o.d_la = b.d_la;
    return o;
  }
  const double log_pi = -softplus(-g);
  const double log_1mpi = -softplus(g);
  const double pi = std::exp(log_pi);
  if (y > 0) {
    o.l = log_1mpi + b.lf;
    o.d_eta = b.d_eta;
    o.d_la = b.d_la;
    o.d_g = -pi;
    return o;
  }
  // P0 = pi + (1 - pi) f0, in logs.
  const double a = log_pi;
  const double c = log_1mpi + b.lf;
  const double m = std::max(a, c);
  o.l = m + std::log(std::exp(a - m) + std::exp(c - m));
  const double w = std::exp(c - o.l);   // share of the count component in P0
  o.d_eta = w * b.d_eta;
  o.d_la = w * b.d_la;
  o.d_g = std::exp(a - o.l) * (1.0 - pi) - w * pi;
  return o;
}

struct Layout {
  Eigen::Index k = 0;
  Eigen::Index la = -1;
  Eigen::Index g = -1;
  Eigen::Index size = 0;
};

Layout layout(CountFamily fam, Eigen::Index k) {
  Layout l;
  l.k = k;
  l.size = k;
  if (has_dispersion(fam)) l.la = l.size++;
  if (is_zero_inflated(fam)) l.g = l.size++;
  return l;
}

void unpack(const Layout& l, const Vector& theta, double& alpha, double& g) {
  alpha = l.la >= 0 ? std::exp(theta(l.la)) : 0.0;
  g = l.g >= 0 ? theta(l.g) : 0.0;
}

double loglik_impl(CountFamily fam, const Vector& theta, const CountDataset& d) {
  const Layout l = layout(fam, d.x.cols());
  double alpha = 0.0;
  double g = 0.0;
  unpack(l, theta, alpha, g);
  const Vector eta = d.x * theta.head(l.k);
  double ll = 0.0;
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    ll += obs_terms(fam, d.y[static_cast<std::size_t>(i)], eta(i), alpha, g).l;
  }
  return std::isfinite(ll) ? ll : -std::numeric_limits<double>::infinity();
}

Vector score_impl(CountFamily fam, const Vector& theta, const CountDataset& d) {
  const Layout l = layout(fam, d.x.cols());
  double alpha = 0.0;
  double g = 0.0;
  unpack(l, theta, alpha, g);
  const Vector eta = d.x * theta.head(l.k);
  Vector w(d.n());
  double s_la = 0.0;
  double s_g = 0.0;
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    const ObsTerms o = obs_terms(fam, d.y[static_cast<std::size_t>(i)], eta(i), alpha, g);
    w(i) = o.d_eta;
    s_la += o.d_la;
    s_g += o.d_g;
  }
  Vector s(l.size);
  s.head(l.k) = d.x.transpose() * w;
  if (l.la >= 0) s(l.la) = s_la;
  if (l.g >= 0) s(l.g) = s_g;
  return s;
}

Matrix hessian(CountFamily fam, const Vector& theta, const CountDataset& d) {
  if (fam == CountFamily::poisson) {
    const Vector mu = (d.x * theta).array().exp();
    return -(d.x.transpose() * mu.asDiagonal() * d.x);
  }
  const Eigen::Index p = theta.size();
  Matrix h(p, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double step = 1e-5 * std::max(1.0, std::abs(theta(j)));
    Vector up = theta;
    Vector dn = theta;
    up(j) += step;
    dn(j) -= step;
    h.col(j) = (score_impl(fam, up, d) - score_impl(fam, dn, d)) / (2.0 * step);
  }
  return linalg::symmetrize(h);
}

Vector start_values(const CountDataset& d) {
  Vector target(d.n());
  for (Eigen::Index i = 0; i < d.n(); ++i) target(i) = std::log(d.y[static_cast<std::size_t>(i)] + 0.5);
  return d.x.colPivHouseholderQr().solve(target);
}

void check_design(const CountDataset& d) {
  d.validate();
  if (d.n() <= d.x.cols()) throw ValidationError("count data '" + d.window_label + "': n <= k");
  const auto basis = linalg::orthonormal_basis(d.x);
  if (!basis.dependent.empty()) {
    throw RankError("count data '" + d.window_label + "': column '" +
                    d.names[static_cast<std::size_t>(basis.dependent.front())] + "' is linearly dependent");
  }
  if (std::all_of(d.y.begin(), d.y.end(), [](int v) { return v == 0; })) {
    throw NumericalError("count data '" + d.window_label + "': all counts are zero (intercept diverges)");
  }
}

CountFit newton(CountFamily fam, Vector theta, const CountDataset& d, const CountFitOptions& opt) {
  const Layout lay = layout(fam, d.x.cols());
  const double n = static_cast<double>(d.n());
  const Vector rms = (d.x.colwise().squaredNorm() / n).array().sqrt().transpose();

  CountFit fit;
  fit.family = fam;
  fit.names = d.names;
  fit.n = static_cast<int>(d.n());

  double ll = loglik_impl(fam, theta, d);
  if (!std::isfinite(ll)) throw NumericalError("count fit: non-finite starting log-likelihood");
  Vector s = score_impl(fam, theta, d);
  int iter = 0;
  bool stalled = false;
  for (; iter < opt.max_iterations; ++iter) {
    if (s.lpNorm<Eigen::Infinity>() / n < opt.gradient_tol) break;
    Matrix a = -hessian(fam, theta, d);
    Vector step;
    double ridge = 0.0;
    const double diag_scale = std::max(1e-12, a.diagonal().cwiseAbs().maxCoeff());
    for (int attempt = 0; attempt < 12; ++attempt) {
      Matrix ar = a;
      ar.diagonal().array() += ridge;
      Eigen::LDLT<Matrix> ldlt(ar);
      if (ldlt.info() == Eigen::Success && ldlt.isPositive() && (ldlt.vectorD().array() > 0.0).all()) {
        step = ldlt.solve(s);
        if (step.allFinite()) break;
      }
      step.resize(0);
      ridge = ridge == 0.0 ? 1e-8 * diag_scale : ridge * 10.0;
    }
    if (step.size() == 0) step = s / diag_scale;

    double t = 1.0;
    Vector next;
    double next_ll = -std::numeric_limits<double>::infinity();
    for (int h = 0; h < 40; ++h) {
      next = theta + t * step;
      next_ll = loglik_impl(fam, next, d);
      if (next_ll >= ll - 1e-12 * std::abs(ll)) break;
      t *= 0.5;
    }
    if (!(next_ll >= ll - 1e-12 * std::abs(ll))) {
      stalled = true;
      break;
    }
    theta = next;
    ll = next_ll;
    s = score_impl(fam, theta, d);
    for (Eigen::Index j = 0; j < lay.k; ++j) {
      if (std::abs(theta(j)) * rms(j) > opt.separation_bound) {
        throw NumericalError("count fit '" + d.window_label + "': separation detected on '" +
                             d.names[static_cast<std::size_t>(j)] + "'");
      }
    }
  }

  fit.iterations = iter;
  fit.gradient_norm = s.lpNorm<Eigen::Infinity>();
  fit.converged = fit.gradient_norm / n < opt.gradient_tol;
  (void)stalled;
  fit.coef = theta.head(lay.k);
  if (lay.la >= 0) fit.alpha = std::exp(theta(lay.la));
  if (lay.g >= 0) fit.inflation_logit = theta(lay.g);
  fit.loglik = ll;
  fit.bic = -2.0 * ll + fit.n_parameters() * std::log(n);

  const Matrix info = -hessian(fam, theta, d);
  int rank = 0;
  const Matrix cov = linalg::symmetric_pinv(info, 1e-12, &rank);
  fit.std_errors = cov.diagonal().cwiseMax(0.0).cwiseSqrt();

  const auto pred = predict_means(fit, d.x);
  std::vector<double> obs(d.y.begin(), d.y.end());
  fit.r2_pred = stats::squared_correlation(pred, obs);
  return fit;
}

}  // namespace

double count_log_pmf(CountFamily family, int y, double mu, double alpha, double inflation_prob) {
  if (y < 0) return -std::numeric_limits<double>::infinity();
  const double eta = std::log(mu);
  if (!is_zero_inflated(family)) return base_terms(has_dispersion(family), y, eta, alpha).lf;
  const double pi = inflation_prob;
  const double lf = base_terms(has_dispersion(family), y, eta, alpha).lf;
  if (y > 0) return std::log1p(-pi) + lf;
  return std::log(pi + (1.0 - pi) * std::exp(lf));
}

double count_pmf(CountFamily family, int y, double mu, double alpha, double inflation_prob) {
  return std::exp(count_log_pmf(family, y, mu, alpha, inflation_prob));
}

double count_loglik(CountFamily family, const Vector& theta, const CountDataset& data) {
  return loglik_impl(family, theta, data);
}

Vector count_score(CountFamily family, const Vector& theta, const CountDataset& data) {
  return score_impl(family, theta, data);
}

CountFit fit_count(const CountDataset& data, CountFamily family, const CountFitOptions& options) {
  check_design(data);
  Vector beta = start_values(data);
  if (family != CountFamily::poisson) {
    // Start from the Poisson optimum; dispersion and inflation from moments.
    beta = newton(CountFamily::poisson, beta, data, options).coef;
  }
  const Layout lay = layout(family, data.x.cols());
  Vector theta(lay.size);
  theta.head(lay.k) = beta;
  if (lay.la >= 0) theta(lay.la) = std::log(0.5);
  if (lay.g >= 0) {
    const Vector mu = (data.x * beta).array().exp();
    double zeros = 0.0;
    double expected = 0.0;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
      zeros += data.y[static_cast<std::size_t>(i)] == 0 ? 1.0 : 0.0;
      expected += std::exp(-mu(i));
    }
    const double excess = std::clamp((zeros - expected) / static_cast<double>(data.n()), 0.05, 0.5);
    theta(lay.g) = std::log(excess / (1.0 - excess));
  }
  return newton(family, theta, data, options);
}

double predict_mean(const CountFit& fit, const Vector& row) {
  if (row.size() != fit.coef.size()) throw ValidationError("covariate row length does not match the fit");
  return std::exp(row.dot(fit.coef)) * (1.0 - fit.inflation_probability());
}

std::vector<double> predict_means(const CountFit& fit, const Matrix& x) {
  if (x.cols() != fit.coef.size()) throw ValidationError("covariate matrix width does not match the fit");
  const Vector eta = x * fit.coef;
  const double keep = 1.0 - fit.inflation_probability();
  std::vector<double> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) out[static_cast<std::size_t>(i)] = std::exp(eta(i)) * keep;
  return out;
}

double predict_days(const CountFit& fit, const std::vector<std::pair<std::string, double>>& covariates,
                    double clamp_max) {
  Vector row(fit.coef.size());
  for (std::size_t j = 0; j < fit.names.size(); ++j) {
    const auto& name = fit.names[j];
    auto it = std::find_if(covariates.begin(), covariates.end(), [&](const auto& p) { return p.first == name; });
    if (it != covariates.end()) {
      row(static_cast<Eigen::Index>(j)) = it->second;
    } else if (name == "intercept") {
      row(static_cast<Eigen::Index>(j)) = 1.0;
    } else {
      throw ValidationError("missing covariate '" + name + "'");
    }
  }
  return std::clamp(predict_mean(fit, row), 0.0, clamp_max);
}

ModelSelection select_model(const std::vector<CountFit>& fits, const CountDataset* holdout) {
  ModelSelection sel;
  sel.r2.assign(fits.size(), 0.0);
  std::optional<std::size_t> bic;
  std::optional<std::size_t> r2;
  auto earlier = [&](std::size_t a, std::size_t b) { return fits[a].family < fits[b].family; };
  for (std::size_t i = 0; i < fits.size(); ++i) {
    const auto& f = fits[i];
    if (holdout) {
      const auto pred = predict_means(f, holdout->x);
      std::vector<double> obs(holdout->y.begin(), holdout->y.end());
      sel.r2[i] = stats::squared_correlation(pred, obs);
    } else {
      sel.r2[i] = f.r2_pred;
    }
    if (!f.converged) continue;
    if (!bic || f.bic < fits[*bic].bic || (f.bic == fits[*bic].bic && earlier(i, *bic))) bic = i;
    if (!r2 || sel.r2[i] > sel.r2[*r2] || (sel.r2[i] == sel.r2[*r2] && earlier(i, *r2))) r2 = i;
  }
  if (!bic) throw NumericalError("select_model: no converged fit");
  sel.best_by_bic = *bic;
  sel.best_by_r2 = *r2;
  return sel;
}

CountBattery fit_window_battery(const std::vector<CountDataset>& windows, SelectionCriterion criterion,
                                const std::vector<CountFamily>& families) {
  CountBattery battery;
  battery.criterion = criterion;
  battery.covariates = count_covariate_names();
  for (const auto& data : windows) {
    BatteryEntry e;
    e.window_label = data.window_label;
    std::vector<CountFit> fits;
    std::string errors;
    for (auto fam : families) {
      try {
        fits.push_back(fit_count(data, fam));
      } catch (const Error& ex) {
        if (!errors.empty()) errors += "; ";
        errors += std::string(to_string(fam)) + ": " + ex.what();
      }
    }
    const bool any = std::any_of(fits.begin(), fits.end(), [](const CountFit& f) { return f.converged; });
    if (!any) {
      e.degenerate = true;
      e.message = errors.empty() ? "no family converged" : errors;
    } else {
      const auto sel = select_model(fits);
      e.fit = fits[criterion == SelectionCriterion::by_bic ? sel.best_by_bic : sel.best_by_r2];
      e.message = errors;
    }
    battery.windows.push_back(std::move(e));
  }
  return battery;
}

// ---- JSON -------------------------------------------------------------

namespace {

using ojson = nlohmann::ordered_json;

ojson vector_json(const Vector& v) {
  ojson a = ojson::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Vector json_vector(const ojson& a) {
  Vector v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
  return v;
}

ojson fit_json(const CountFit& f) {
  ojson j;
  j["family"] = std::string(to_string(f.family));
  j["names"] = f.names;
  j["coef"] = vector_json(f.coef);
  j["alpha"] = f.alpha ? ojson(*f.alpha) : ojson(nullptr);
  j["inflation_logit"] = f.inflation_logit ? ojson(*f.inflation_logit) : ojson(nullptr);
  j["std_errors"] = vector_json(f.std_errors);
  j["loglik"] = f.loglik;
  j["bic"] = f.bic;
  j["r2_pred"] = f.r2_pred;
  j["converged"] = f.converged;
  j["iterations"] = f.iterations;
  j["gradient_norm"] = f.gradient_norm;
  j["n"] = f.n;
  return j;
}

CountFit json_fit(const ojson& j) {
  CountFit f;
  f.family = parse_count_family(j.at("family").get<std::string>());
  f.names = j.at("names").get<std::vector<std::string>>();
  f.coef = json_vector(j.at("coef"));
  if (!j.at("alpha").is_null()) f.alpha = j.at("alpha").get<double>();
  if (!j.at("inflation_logit").is_null()) f.inflation_logit = j.at("inflation_logit").get<double>();
  f.std_errors = json_vector(j.at("std_errors"));
  f.loglik = j.at("loglik").get<double>();
  f.bic = j.at("bic").get<double>();
  f.r2_pred = j.at("r2_pred").get<double>();
  f.converged = j.at("converged").get<bool>();
  f.iterations = j.at("iterations").get<int>();
  f.gradient_norm = j.at("gradient_norm").get<double>();
  f.n = j.at("n").get<int>();
  if (static_cast<Eigen::Index>(f.names.size()) != f.coef.size()) {
    throw ValidationError("battery: names and coefficients differ in length");
  }
  return f;
}

}  // namespace

std::string battery_to_json(const CountBattery& b) {
  ojson j;
  j["criterion"] = b.criterion == SelectionCriterion::by_bic ? "by_bic" : "by_r2";
  j["covariates"] = b.covariates;
  j["windows"] = ojson::array();
  for (const auto& e : b.windows) {
    ojson w;
    w["window"] = e.window_label;
    w["degenerate"] = e.degenerate;
    w["message"] = e.message;
    w["fit"] = e.fit ? fit_json(*e.fit) : ojson(nullptr);
    j["windows"].push_back(std::move(w));
  }
  return j.dump(2) + "\n";
}

CountBattery battery_from_json(std::string_view text) {
  CountBattery b;
  try {
    const ojson j = ojson::parse(text);
    const auto crit = j.at("criterion").get<std::string>();
    if (crit == "by_bic") {
      b.criterion = SelectionCriterion::by_bic;
    } else if (crit == "by_r2") {
      b.criterion = SelectionCriterion::by_r2;
    } else {
      throw ValidationError("battery: unknown criterion '" + crit + "'");
    }
    b.covariates = j.at("covariates").get<std::vector<std::string>>();
    for (const auto& w : j.at("windows")) {
      BatteryEntry e;
      e.window_label = w.at("window").get<std::string>();
      e.degenerate = w.at("degenerate").get<bool>();
      e.message = w.at("message").get<std::string>();
      if (!w.at("fit").is_null()) e.fit = json_fit(w.at("fit"));
      b.windows.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError(std::string("battery JSON: ") + ex.what());
  }
  return b;
}

// ---- windows from a panel ---------------------------------------------

namespace {

constexpr double kWindowSpan = 2.0 * kDaysPerMonth;

}  // namespace

int count_window_of_age(int age_days) {
  const int w = static_cast<int>(std::floor(age_days / kWindowSpan));
  return std::clamp(w, 0, kCountWindows - 1);
}

std::string count_window_label(int w) { return std::to_string(2 * w) + "-" + std::to_string(2 * w + 2); }

std::vector<std::string> count_covariate_names() {
  std::vector<std::string> names{"intercept"};
  for (int s = 0; s < kCountWindows; ++s) names.push_back("diar_recall_" + count_window_label(s));
  names.insert(names.end(), {"village_avg", "female", "birth_order_2_3", "birth_order_4plus"});
  return names;
}

RecallTable RecallTable::from_panel(const Panel& panel) {
  RecallTable t;
  std::map<std::pair<std::string, int>, std::pair<double, int>> village;
  for (const auto& span : child_spans(panel)) {
    const auto& first = panel[span.begin];
    ChildRecall c;
    c.child_id = first.child_id;
    c.community_id = first.community_id;
    c.female = first.female;
    c.birth_order = first.birth_order;
    c.slot_days.assign(kCountWindows, std::nullopt);
    c.slot_windows.assign(kCountWindows, {});
    for (std::size_t i = span.begin; i < span.end; ++i) {
      const auto& o = panel[i];
      if (!o.diarrhea_days_reported) continue;
      if (o.age_days < 0 || o.age_days >= kCountWindows * kWindowSpan) continue;
      c.slot_windows[static_cast<std::size_t>(count_window_of_age(o.age_days))].emplace_back(
          *o.diarrhea_days_reported, o.reporting_window_days);
    }
    for (int s = 0; s < kCountWindows; ++s) {
      const auto& ws = c.slot_windows[static_cast<std::size_t>(s)];
      if (ws.empty()) continue;
      double sum = 0.0;
      for (const auto& [d, len] : ws) sum += d;
      c.slot_days[static_cast<std::size_t>(s)] = sum / static_cast<double>(ws.size());
      auto& v = village[{c.community_id, s}];
      v.first += *c.slot_days[static_cast<std::size_t>(s)];
      v.second += 1;
    }
    t.index_.emplace(c.child_id, t.children_.size());
    t.children_.push_back(std::move(c));
  }
  for (const auto& [key, v] : village) t.village_mean_[key] = v.first / v.second;
  return t;
}

std::optional<std::size_t> RecallTable::find(const std::string& child_id) const {
  auto it = index_.find(child_id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<Vector> RecallTable::covariates(std::size_t c, int w, double scale) const {
  const auto& ch = children_.at(c);
  double sum = 0.0;
  int count = 0;
  for (const auto& v : ch.slot_days) {
    if (v) {
      sum += *v;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  const double fill = sum / count;
  Vector row(static_cast<Eigen::Index>(count_covariate_names().size()));
  Eigen::Index j = 0;
  row(j++) = 1.0;
  for (int s = 0; s < kCountWindows; ++s) row(j++) = ch.slot_days[static_cast<std::size_t>(s)].value_or(fill) * scale;
  auto it = village_mean_.find({ch.community_id, w});
  row(j++) = (it != village_mean_.end() ? it->second : ch.slot_days[static_cast<std::size_t>(w)].value_or(fill)) * scale;
  row(j++) = ch.female ? 1.0 : 0.0;
  row(j++) = (ch.birth_order >= 2 && ch.birth_order <= 3) ? 1.0 : 0.0;
  row(j++) = ch.birth_order >= 4 ? 1.0 : 0.0;
  return row;
}

std::vector<CountDataset> build_count_windows(const Panel& panel, double recall_scale) {
  const RecallTable table = RecallTable::from_panel(panel);
  const auto names = count_covariate_names();
  std::vector<CountDataset> out;
  for (int w = 0; w < kCountWindows; ++w) {
    std::vector<Vector> rows;
    CountDataset d;
    d.names = names;
    d.window_label = count_window_label(w);
    for (std::size_t c = 0; c < table.children().size(); ++c) {
      const auto& ws = table.children()[c].slot_windows[static_cast<std::size_t>(w)];
      const auto days = scale_diarrhea_guatemala(ws, kCountWindowDays);
      if (!days) continue;
      auto row = table.covariates(c, w, recall_scale);
      if (!row) continue;
      rows.push_back(std::move(*row));
      d.y.push_back(static_cast<int>(std::lround(*days)));
      d.row_ids.push_back(table.children()[c].child_id);
    }
    d.x.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(names.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) d.x.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    out.push_back(std::move(d));
  }
  return out;
}

DiarrheaResolver battery_resolver(CountBattery battery, const Panel& panel, double recall_scale) {
  if (static_cast<int>(battery.windows.size()) != kCountWindows) {
    throw ValidationError("battery must hold " + std::to_string(kCountWindows) + " windows");
  }
  auto table = std::make_shared<const RecallTable>(RecallTable::from_panel(panel));
  auto fits = std::make_shared<const CountBattery>(std::move(battery));
  return [table, fits, recall_scale](const Panel& p, std::size_t start, std::size_t end,
                                     int gap) -> std::optional<double> {
    const auto c = table->find(p[end].child_id);
    if (!c) return std::nullopt;
    const double a0 = p[start].age_days;
    const double a1 = p[end].age_days;
    double total = 0.0;
    for (int w = 0; w < kCountWindows; ++w) {
      const double lo = w == 0 ? -std::numeric_limits<double>::infinity() : w * kWindowSpan;
      const double hi = w == kCountWindows - 1 ? std::numeric_limits<double>::infinity() : (w + 1) * kWindowSpan;
      const double overlap = std::min(a1, hi) - std::max(a0, lo);
      if (overlap <= 0.0) continue;
      const auto& e = fits->windows[static_cast<std::size_t>(w)];
      if (!e.fit) return std::nullopt;
      const auto row = table->covariates(*c, w, recall_scale);
      if (!row) return std::nullopt;
      const double days = std::clamp(predict_mean(*e.fit, *row), 0.0, static_cast<double>(kCountWindowDays));
      total += days * overlap / kWindowSpan;
    }
    return std::clamp(total, 0.0, static_cast<double>(gap));
  };
}

}  // namespace growthiv
