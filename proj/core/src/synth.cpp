#include "growthiv/synth.hpp"

#include "growthiv/error.hpp"
#include "growthiv/estimators.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <tuple>

namespace growthiv {

namespace {

constexpr std::uint64_t kPriceStream = 0x5052494345ULL;
constexpr std::uint64_t kChildStream = 0x4348494c44ULL;

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t a, std::uint64_t b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b)};
  return std::mt19937_64(seq);
}

std::string padded(char prefix, int i, int width) {
  std::string digits = std::to_string(i);
  if (static_cast<int>(digits.size()) < width) digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
  return prefix + digits;
}

}  // namespace

StructuralParams StructuralParams::defaults(Country c) {
  StructuralParams p;
  p.country = c;
  if (c == Country::philippines) {
    p.price_items = {"eggs", "fish", "tomatoes", "corn"};
    p.price_process = {{60.0, 0.85, 0.08}, {40.0, 0.85, 0.08}, {20.0, 0.85, 0.08}, {15.0, 0.85, 0.08}};
    p.protein = {80.0, {-12.0, -15.0, 0.0, -3.0}, 5.0, -60.0, 10.0, 15.0};
    p.nonprotein = {600.0, {-10.0, -10.0, -20.0, -60.0}, 30.0, -100.0, 80.0, 100.0};
    p.n_communities = 33;
    p.gap_days = 60;
    p.birth_year_min = 1983;
    p.birth_year_max = 1984;
  } else {
    p.price_items = {"eggs", "chicken", "pork", "beef", "rice", "beans", "corn"};
    p.price_process = {{60.0, 0.95, 0.05}, {80.0, 0.95, 0.05}, {90.0, 0.95, 0.05}, {100.0, 0.95, 0.05},
                       {20.0, 0.95, 0.05}, {25.0, 0.95, 0.05}, {10.0, 0.95, 0.05}};
    p.protein = {70.0, {-8.0, -6.0, -4.0, -6.0, 0.0, -3.0, -2.0}, 5.0, -60.0, 10.0, 15.0};
    p.nonprotein = {550.0, {-5.0, 0.0, 0.0, 0.0, -30.0, -20.0, -60.0}, 30.0, -100.0, 80.0, 100.0};
    p.n_communities = 4;
    p.gap_days = 90;
    p.n_periods = 6;
    p.birth_year_min = 1969;
    p.birth_year_max = 1977;
  }
  p.delta0_prot = (1.0 + p.sigma) / p.alpha * p.beta0_prot;
  p.delta0_nonprot = (1.0 + p.sigma) / p.alpha * p.beta0_nonprot;
  return p;
}

int StructuralParams::effective_gap() const {
  if (gap_days > 0) return gap_days;
  return country == Country::guatemala ? 90 : 60;
}

int StructuralParams::effective_communities() const {
  if (n_communities > 0) return n_communities;
  return country == Country::guatemala ? 4 : 33;
}

std::vector<std::string> StructuralParams::items() const {
  return price_items.empty() ? default_price_items(country) : price_items;
}

double StructuralParams::effective_delta0_prot() const {
  return strict_assumption2 ? (1.0 + sigma) / alpha * beta0_prot : delta0_prot;
}

double StructuralParams::effective_delta0_nonprot() const {
  return strict_assumption2 ? (1.0 + sigma) / alpha * beta0_nonprot : delta0_nonprot;
}

void StructuralParams::validate() const {
  auto fail = [](const std::string& what) { throw ValidationError("invalid parameter '" + what + "'"); };
  auto finite = [&](double v, const char* name) {
    if (!std::isfinite(v)) fail(name);
  };
  finite(alpha, "alpha");
  finite(sigma, "sigma");
  finite(beta0_prot, "beta0_prot");
  finite(beta0_nonprot, "beta0_nonprot");
  finite(delta0_prot, "delta0_prot");
  finite(delta0_nonprot, "delta0_nonprot");
  finite(mu_mean, "mu_mean");
  if (!(gamma > 0.0 && gamma < 1.0)) fail("gamma");
  if (!(alpha != 0.0)) fail("alpha");
  if (!(mu_sd >= 0.0)) fail("mu_sd");
  if (!(eps_h_sd >= 0.0)) fail("eps_h_sd");
  if (!(eps_w_sd >= 0.0)) fail("eps_w_sd");
  if (!(diarrhea_rate >= 0.0 && diarrhea_rate < 1.0)) fail("diarrhea_rate");
  if (!(missing_intake_prob >= 0.0 && missing_intake_prob < 1.0)) fail("missing_intake_prob");
  if (n_children < 1) fail("n_children");
  if (n_periods < 1) fail("n_periods");
  if (first_age_days < 1) fail("first_age_days");
  if (gap_jitter_days < 0 || gap_jitter_days * 2 >= effective_gap()) fail("gap_jitter_days");
  if (birth_year_min > birth_year_max) fail("birth_year_min");
  const auto k = items().size();
  if (price_process.size() != k) fail("price_process");
  if (protein.a_price.size() != k) fail("protein.a_price");
  if (nonprotein.a_price.size() != k) fail("nonprotein.a_price");
  for (const auto& pp : price_process) {
    if (!(pp.base > 0.0) || !(std::abs(pp.rho) < 1.0) || !(pp.sd >= 0.0)) fail("price_process");
  }
  for (const auto* r : {&protein, &nonprotein}) {
    if (!(r->noise_sd >= 0.0) || !(r->meas_err_sd >= 0.0)) fail(r == &protein ? "protein" : "nonprotein");
  }
}

LagWeights lag_weights(const StructuralParams& p, int horizon) {
  LagWeights w;
  double g = 1.0;
  for (int k = 0; k < horizon; ++k) {
    w.beta_prot.push_back(g * p.beta0_prot);
    w.beta_nonprot.push_back(g * p.beta0_nonprot);
    w.delta_prot.push_back(g * p.effective_delta0_prot());
    w.delta_nonprot.push_back(g * p.effective_delta0_nonprot());
    g *= p.gamma;
  }
  return w;
}

ImpliedCoefficients implied_growth_coefficients(const StructuralParams& p) {
  ImpliedCoefficients c;
  const double g1 = p.gamma - 1.0;
  c.height_prot = p.beta0_prot;
  c.height_nonprot = p.beta0_nonprot;
  c.height_lag_weight = p.alpha * g1;
  c.height_lag_height = -p.sigma * g1;
  c.weight_prot = p.effective_delta0_prot();
  c.weight_nonprot = p.effective_delta0_nonprot();
  c.weight_lag_weight = g1 * (1.0 + p.sigma);
  c.weight_lag_height = -p.sigma * g1 * (1.0 + p.sigma) / p.alpha;
  return c;
}

namespace {

std::map<std::string, double> control_truth(const StructuralParams& p, double scale) {
  std::map<std::string, double> m;
  for (const auto& n : exogenous_names(p.country)) m[n] = 0.0;
  m["days_no_diar"] = -p.beta_diarrhea * scale;
  m["gap_msmt"] = (p.beta_gap + p.beta_diarrhea) * scale;
  m["bf"] = p.beta_bf * scale;
  return m;
}

}  // namespace

std::map<std::string, double> ImpliedCoefficients::height(const StructuralParams& p) const {
  auto m = control_truth(p, 1.0);
  m[coef::kProtein] = height_prot;
  m[coef::kNonProtein] = height_nonprot;
  m[coef::kLagWeight] = height_lag_weight;
  m[coef::kLagHeight] = height_lag_height;
  return m;
}

std::map<std::string, double> ImpliedCoefficients::weight(const StructuralParams& p) const {
  auto m = control_truth(p, (1.0 + p.sigma) / p.alpha);
  m[coef::kProtein] = weight_prot;
  m[coef::kNonProtein] = weight_nonprot;
  m[coef::kLagWeight] = weight_lag_weight;
  m[coef::kLagHeight] = weight_lag_height;
  return m;
}

const VisitTruth* SyntheticPanel::find_truth(const std::string& child_id, int age_days) const {
  auto it = std::lower_bound(truth.begin(), truth.end(), child_id,
                             [](const ChildTruth& c, const std::string& id) { return c.child_id < id; });
  if (it == truth.end() || it->child_id != child_id) return nullptr;
  for (const auto& v : it->visits) {
    if (v.age_days == age_days) return &v;
  }
  return nullptr;
}

GrowthBuildOptions SyntheticPanel::build_options(Model model) const {
  GrowthBuildOptions o;
  o.country = country;
  o.model = model;
  int lo = o.band_min_days;
  int hi = o.band_max_days;
  for (const auto& c : truth) {
    if (c.visits.empty()) continue;
    lo = std::min(lo, c.visits.front().age_days);
    hi = std::max(hi, c.visits.back().age_days);
  }
  o.band_min_days = lo;
  o.band_max_days = hi;
  return o;
}

GrowthData SyntheticPanel::growth_data(Model model) const {
  auto built = build_growth_observations(panel, prices, build_options(model));
  return GrowthData(country, std::move(built.rows));
}

SyntheticPanel generate_panel(StructuralParams params, std::uint64_t seed) {
  params.seed = seed;
  return generate_panel(params);
}

SyntheticPanel generate_panel(const StructuralParams& p) {
  p.validate();
  const auto items = p.items();
  const int n_items = static_cast<int>(items.size());
  const int n_comm = p.effective_communities();
  const int gap = p.effective_gap();
  const bool gt = p.country == Country::guatemala;
  const double d_scale = (1.0 + p.sigma) / p.alpha;
  const double dp0 = p.effective_delta0_prot();
  const double dn0 = p.effective_delta0_nonprot();

  SyntheticPanel out;
  out.country = p.country;

  // Monthly AR(1) log-price deviations per (scope, item).
  const int month_lo = (p.birth_year_min - 2) * 12;
  const int last_age = p.first_age_days + p.n_periods * (gap + p.gap_jitter_days) + 31;
  const int month_hi = (p.birth_year_max + 1) * 12 + static_cast<int>(last_age / kDaysPerMonth) + 24;
  std::vector<std::string> scopes;
  if (gt) {
    scopes.push_back("national");
  } else {
    for (int c = 0; c < n_comm; ++c) scopes.push_back(padded('c', c + 1, 2));
  }
  // z[scope][item][month - month_lo]
  std::vector<std::vector<std::vector<double>>> z(scopes.size(),
                                                  std::vector<std::vector<double>>(static_cast<std::size_t>(n_items)));
  for (std::size_t s = 0; s < scopes.size(); ++s) {
    for (int k = 0; k < n_items; ++k) {
      const auto& pp = p.price_process[static_cast<std::size_t>(k)];
      auto rng = make_rng(p.seed, kPriceStream, s, static_cast<std::uint64_t>(k));
      std::normal_distribution<double> innov(0.0, 1.0);
      const double stat_sd = pp.sd / std::sqrt(1.0 - pp.rho * pp.rho);
      double dev = stat_sd * innov(rng);
      auto& series = z[s][static_cast<std::size_t>(k)];
      for (int m = month_lo; m < month_hi; ++m) {
        if (m > month_lo) dev = pp.rho * dev + pp.sd * innov(rng);
        series.push_back(stat_sd > 0.0 ? dev / stat_sd : 0.0);
        out.prices.push_back({items[static_cast<std::size_t>(k)], scopes[s], m, pp.base * std::exp(dev)});
      }
    }
  }
  std::sort(out.prices.begin(), out.prices.end(), [](const PriceSeries& a, const PriceSeries& b) {
    return std::tie(a.item, a.scope, a.month_index) < std::tie(b.item, b.scope, b.month_index);
  });

  // Standardized price seen by a household at a visit, using the same
  // matching convention as the growth builder.
  auto price_z = [&](int community, int month, int k) {
    int scope = community;
    int idx = month;
    if (gt) {
      scope = 0;
      const int year = (month >= 0 ? month / 12 : -((-month + 11) / 12)) - 1;
      idx = year * 12 + 11;
    }
    const int off = std::clamp(idx - month_lo, 0, month_hi - month_lo - 1);
    return z[static_cast<std::size_t>(scope)][static_cast<std::size_t>(k)][static_cast<std::size_t>(off)];
  };

  const int width = std::max(5, static_cast<int>(std::to_string(p.n_children).size()));
  const int window = default_reporting_window(p.country);
  for (int i = 0; i < p.n_children; ++i) {
    auto rng = make_rng(p.seed, kChildStream, static_cast<std::uint64_t>(i));
    std::normal_distribution<double> nrm(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::uniform_int_distribution<int> jitter(-p.gap_jitter_days, p.gap_jitter_days);
    std::uniform_int_distribution<int> year_draw(p.birth_year_min, p.birth_year_max);
    std::uniform_int_distribution<int> comm_draw(0, n_comm - 1);
    std::poisson_distribution<int> order_draw(1.5);

    ChildTruth truth;
    truth.child_id = padded('k', i + 1, width);
    const int community = comm_draw(rng);
    const bool female = unif(rng) < 0.5;
    const int birth_order = 1 + order_draw(rng);
    const int birth_year = year_draw(rng);
    const bool atole = gt && community < (n_comm + 1) / 2;
    const std::optional<double> distance = gt ? std::optional<double>(0.2 + 2.8 * unif(rng)) : std::nullopt;
    const double mu_std = nrm(rng);
    truth.mu = p.mu_mean + p.mu_sd * mu_std;
    const double weaning = 300.0 + 600.0 * unif(rng);
    const double diar_p = std::clamp(p.diarrhea_rate * std::exp(0.5 * nrm(rng) - 0.125), 0.0, 0.9);
    std::binomial_distribution<int> recall_15(15, diar_p);
    std::binomial_distribution<int> recall_w(window, diar_p);

    auto base_row = [&](int age) {
      ChildObservation o;
      o.child_id = truth.child_id;
      o.community_id = padded('c', community + 1, 2);
      o.age_days = age;
      o.female = female;
      o.birth_order = birth_order;
      o.birth_year = birth_year;
      o.atole_village = atole;
      o.distance_to_center = distance;
      o.reporting_window_days = window;
      o.breastfed_last_month = age < weaning;
      return o;
    };

    std::vector<int> ages;
    for (int t = 0; t <= p.n_periods; ++t) ages.push_back(p.first_age_days + t * gap + jitter(rng));

    std::vector<ChildObservation> rows;
    double a_cum = 0.0;
    double w_cum = 0.0;
    double prev_eps_h = 0.0;
    double prev_dp = 0.0;
    double prev_dn = 0.0;
    for (int t = 0; t <= p.n_periods; ++t) {
      const int age = ages[static_cast<std::size_t>(t)];
      const int month = calendar_month_index(birth_year, age);
      double dp = p.protein.a0 + p.protein.a_mu * mu_std + p.protein.noise_sd * nrm(rng);
      double dn = p.nonprotein.a0 + p.nonprotein.a_mu * mu_std + p.nonprotein.noise_sd * nrm(rng);
      if (t > 0) {
        dp += p.protein.a_comp * prev_eps_h;
        dn += p.nonprotein.a_comp * prev_eps_h;
      }
      for (int k = 0; k < n_items; ++k) {
        const double zk = price_z(community, month, k);
        dp += p.protein.a_price[static_cast<std::size_t>(k)] * zk;
        dn += p.nonprotein.a_price[static_cast<std::size_t>(k)] * zk;
      }
      dp = std::max(dp, 0.0);
      dn = std::max(dn, 0.0);
      const double eps_h = p.eps_h_sd * nrm(rng);
      const double eps_w = p.eps_w_sd * nrm(rng);

      VisitTruth v;
      v.age_days = age;
      v.eps_h = eps_h;
      v.eps_w = eps_w;
      v.protein_kcal_day = dp;
      v.nonprotein_kcal_day = dn;

      ChildObservation o = base_row(age);
      if (t > 0) {
        const int g = age - ages[static_cast<std::size_t>(t - 1)];
        if (gt) {
          const double take = 0.5 + unif(rng);
          if (atole) {
            o.supplement_protein_kcal = p.atole_protein_kcal_day * g * take;
          } else {
            o.supplement_nonprotein_kcal = p.fresco_nonprotein_kcal_day * g * take;
          }
        }
        v.protein_period_kcal = 0.5 * (prev_dp + dp) * g + o.supplement_protein_kcal;
        v.nonprotein_period_kcal = 0.5 * (prev_dn + dn) * g + o.supplement_nonprotein_kcal;
        const double days_with = diar_p * g;
        const double bf = o.breastfed_last_month ? 1.0 : 0.0;
        const double controls = p.beta_gap * g + p.beta_diarrhea * days_with + p.beta_bf * bf;
        a_cum = p.gamma * a_cum + p.beta0_prot * v.protein_period_kcal + p.beta0_nonprot * v.nonprotein_period_kcal +
                controls;
        w_cum = p.gamma * w_cum + dp0 * v.protein_period_kcal + dn0 * v.nonprotein_period_kcal + d_scale * controls;
      }
      const double h = p.alpha * truth.mu + a_cum + eps_h;
      const double w = p.sigma * truth.mu + w_cum + eps_w;
      if (!std::isfinite(h) || !std::isfinite(w)) {
        throw NumericalError("non-finite trajectory; check 'gamma' and the input rule");
      }
      if (h <= 0.0) throw NumericalError("non-positive height; check 'mu_mean' and 'alpha'");
      if (w <= 0.0) throw NumericalError("non-positive weight; check 'mu_mean' and 'sigma'");
      o.height_cm = h;
      o.weight_g = w;
      if (unif(rng) >= p.missing_intake_prob) {
        o.protein_kcal_day = std::max(0.0, dp + p.protein.meas_err_sd * nrm(rng));
        o.nonprotein_kcal_day = std::max(0.0, dn + p.nonprotein.meas_err_sd * nrm(rng));
      }
      o.diarrhea_days_reported = static_cast<double>(recall_w(rng));
      rows.push_back(std::move(o));
      truth.visits.push_back(v);

      prev_eps_h = eps_h;
      prev_dp = dp;
      prev_dn = dn;
    }

    // Morbidity-only recall rows: fortnightly throughout (Guatemala),
    // bimonthly before the first visit (Philippines).
    const int cadence = gt ? 14 : 60;
    const int stop = gt ? ages.back() : ages.front();
    for (int age = gt ? 14 : 30; age < stop; age += cadence) {
      if (std::find(ages.begin(), ages.end(), age) != ages.end()) continue;
      ChildObservation o = base_row(age);
      o.diarrhea_days_reported = static_cast<double>(gt ? recall_15(rng) : recall_w(rng));
      rows.push_back(std::move(o));
    }
    std::sort(rows.begin(), rows.end(),
              [](const ChildObservation& a, const ChildObservation& b) { return a.age_days < b.age_days; });
    out.panel.insert(out.panel.end(), rows.begin(), rows.end());
    out.truth.push_back(std::move(truth));
  }
  return out;
}

std::string truth_to_json(const SyntheticPanel& s, const StructuralParams& p) {
  using ojson = nlohmann::ordered_json;
  ojson j;
  const auto c = implied_growth_coefficients(p);
  j["country"] = std::string(to_string(s.country));
  j["seed"] = p.seed;
  j["params"] = {{"alpha", p.alpha},
                 {"sigma", p.sigma},
                 {"gamma", p.gamma},
                 {"beta0_prot", p.beta0_prot},
                 {"beta0_nonprot", p.beta0_nonprot},
                 {"delta0_prot", p.effective_delta0_prot()},
                 {"delta0_nonprot", p.effective_delta0_nonprot()},
                 {"mu_mean", p.mu_mean},
                 {"mu_sd", p.mu_sd},
                 {"eps_h_sd", p.eps_h_sd},
                 {"eps_w_sd", p.eps_w_sd}};
  ojson implied;
  for (const auto& [k, v] : c.height(p)) implied["height"][k] = v;
  for (const auto& [k, v] : c.weight(p)) implied["weight"][k] = v;
  j["implied"] = implied;
  j["children"] = ojson::array();
  for (const auto& ch : s.truth) {
    ojson cj;
    cj["child_id"] = ch.child_id;
    cj["mu"] = ch.mu;
    cj["visits"] = ojson::array();
    for (const auto& v : ch.visits) {
      cj["visits"].push_back({{"age_days", v.age_days},
                              {"eps_h", v.eps_h},
                              {"eps_w", v.eps_w},
                              {"protein_kcal_day", v.protein_kcal_day},
                              {"nonprotein_kcal_day", v.nonprotein_kcal_day},
                              {"protein_period_kcal", v.protein_period_kcal},
                              {"nonprotein_period_kcal", v.nonprotein_period_kcal}});
    }
    j["children"].push_back(std::move(cj));
  }
  return j.dump(1) + "\n";
}

std::vector<std::string> oracle_instruments(const StructuralParams& p) {
  std::vector<std::string> names;
  if (p.country == Country::guatemala) {
    names = {instrument::kAtole, instrument::kAtoleDistance};
  }
  names.emplace_back(instrument::kLag2Height);
  names.emplace_back(instrument::kLag2Weight);
  for (const auto& item : p.items()) names.push_back(instrument::price(item));
  if (p.country == Country::philippines) {
    for (const auto& item : p.items()) names.push_back(instrument::lagged_price(item));
  }
  return names;
}

std::vector<BiasRow> oracle_bias_report(const SyntheticPanel& panel, const StructuralParams& params,
                                        Outcome outcome) {
  const GrowthData data = panel.growth_data(Model::protein_split);
  const auto instruments = oracle_instruments(params);
  const DesignMatrices d = build_design(data, Model::protein_split, outcome, instruments);
  const auto implied = implied_growth_coefficients(params);
  const auto truth = outcome == Outcome::height ? implied.height(params) : implied.weight(params);
  const FitResult ols = fit_ols(d);
  const FitResult iv = fit_liml(d);
  std::vector<BiasRow> rows;
  for (const auto* fit : {&ols, &iv}) {
    for (const auto& name : endogenous_names(Model::protein_split)) {
      BiasRow r;
      r.estimator = fit->method == Method::ols ? "ols" : "liml";
      r.coefficient = name;
      r.truth = truth.at(name);
      r.estimate = fit->coefficient(name);
      r.std_error = fit->has_vcov() ? fit->std_error(name) : 0.0;
      r.bias = r.estimate - r.truth;
      rows.push_back(r);
    }
  }
  return rows;
}

}  // namespace growthiv
