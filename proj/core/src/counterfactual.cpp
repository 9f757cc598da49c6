#include "growthiv/counterfactual.hpp"

#include "growthiv/design.hpp"
#include "growthiv/error.hpp"
#include "growthiv/panel.hpp"
#include "growthiv/stats.hpp"

#include <cmath>

namespace growthiv {

int days_per_period(Country c) { return c == Country::guatemala ? 90 : 60; }

double protein_grams_to_kcal(double grams) { return grams * kKcalPerGramProtein; }

double median_prediction(const std::vector<SpecResult>& filtered, const std::string& coefficient,
                         double increment_per_day, int days) {
  std::vector<double> values;
  for (const auto& r : filtered) {
    if (r.ok()) values.push_back(r.fit->coefficient(coefficient));
  }
  if (values.empty()) throw ValidationError("median prediction: no specifications");
  return stats::median(std::move(values)) * increment_per_day * days;
}

double median_prediction_from_display(double display_median, double scale, double increment_per_day, int days) {
  return display_median / scale * increment_per_day * days;
}

std::vector<SpecResult> prediction_filter(const std::vector<SpecResult>& results, int min_count,
                                          FilterCriteria* used) {
  FilterCriteria strict{true, 7.0, 0.05};
  auto out = filter_specs(results, strict);
  if (static_cast<int>(out.size()) >= min_count) {
    if (used) *used = strict;
    return out;
  }
  FilterCriteria loose{true, 3.0, 0.05};
  out = filter_specs(results, loose);
  if (out.empty()) throw ValidationError("no specification passes CD>3 with HJ p>0.05");
  if (used) *used = loose;
  return out;
}

const SpecResult& select_best_spec(const std::vector<SpecResult>& results) {
  const SpecResult* best = nullptr;
  for (const auto& r : results) {
    const auto p = r.hj_p();
    if (!p || !(*p > 0.05)) continue;
    const double cd = r.diagnostics->kp_wald_f;
    if (!best || cd > best->diagnostics->kp_wald_f ||
        (cd == best->diagnostics->kp_wald_f && r.set_id < best->set_id)) {
      best = &r;
    }
  }
  if (!best) throw ValidationError("no specification with HJ p > 0.05");
  return *best;
}

void InterventionScenario::validate() const {
  if (n_periods < 1) throw ValidationError("scenario: n_periods must be >= 1");
  if (days_per_period < 1) throw ValidationError("scenario: days_per_period must be >= 1");
  if (!schedule.empty() && static_cast<int>(schedule.size()) != n_periods) {
    throw ValidationError("scenario: schedule length must equal n_periods");
  }
  auto check = [&](double v) {
    if (!std::isfinite(v)) throw ValidationError("scenario: non-finite increment");
    if (v < 0.0 && !allow_negative) throw ValidationError("scenario: negative increment without allow_negative");
  };
  check(protein_kcal_per_day);
  check(nonprotein_kcal_per_day);
  for (const auto& [p, q] : schedule) {
    check(p);
    check(q);
  }
}

std::pair<double, double> InterventionScenario::period_increment_kcal(int t) const {
  const auto [p, q] = schedule.empty() ? std::pair{protein_kcal_per_day, nonprotein_kcal_per_day}
                                       : schedule.at(static_cast<std::size_t>(t));
  return {p * days_per_period, q * days_per_period};
}

InterventionScenario egg_scenario(int days, int n_periods, double eggs_per_week) {
  InterventionScenario s;
  s.protein_kcal_per_day = eggs_per_week * protein_grams_to_kcal(kEggProteinGrams) / 7.0;
  s.nonprotein_kcal_per_day = eggs_per_week * kEggNonProteinKcal / 7.0;
  s.days_per_period = days;
  s.n_periods = n_periods;
  return s;
}

namespace {

struct Equation {
  double prot = 0.0;
  double nonprot = 0.0;
  double lag_h = 0.0;
  double lag_w = 0.0;
  const FitResult* fit = nullptr;

  explicit Equation(const FitResult& f) : fit(&f) {
    if (f.index_of(coef::kEnergy) >= 0) {
      prot = nonprot = f.coefficient(coef::kEnergy);
    } else {
      prot = f.coefficient(coef::kProtein);
      nonprot = f.coefficient(coef::kNonProtein);
    }
    lag_h = f.coefficient(coef::kLagHeight);
    lag_w = f.coefficient(coef::kLagWeight);
  }

  double growth(double p, double q, double h, double w, const BaselinePeriod& period) const {
    double g = prot * p + nonprot * q + lag_h * h + lag_w * w;
    const int ic = fit->index_of(coef::kIntercept);
    if (ic >= 0) g += fit->coef(ic);
    for (const auto& [name, value] : period.controls) {
      const int i = fit->index_of(name);
      if (i >= 0) g += fit->coef(i) * value;
    }
    return g;
  }
};

}  // namespace

TrajectoryDelta simulate_intervention(const FitResult& height_fit, const FitResult& weight_fit,
                                      const BaselinePath& baseline, const InterventionScenario& scenario,
                                      const SimulationOptions& options) {
  scenario.validate();
  if (static_cast<int>(baseline.periods.size()) < scenario.n_periods) {
    throw ValidationError("scenario horizon exceeds the baseline path");
  }
  const Equation eh(height_fit);
  const Equation ew(weight_fit);
  const double cross = options.cross_feedback ? 1.0 : 0.0;

  TrajectoryDelta out;
  double h = baseline.height0_cm;
  double w = baseline.weight0_g;
  double dh = 0.0;   // cumulative level differences
  double dw = 0.0;
  for (int t = 0; t < scenario.n_periods; ++t) {
    const auto& per = baseline.periods[static_cast<std::size_t>(t)];
    const auto [ip, iq] = scenario.period_increment_kcal(t);

    const double gh = eh.growth(per.protein_kcal, per.nonprotein_kcal, h, w, per);
    const double gw = ew.growth(per.protein_kcal, per.nonprotein_kcal, h, w, per);
    const double step_h = eh.prot * ip + eh.nonprot * iq + eh.lag_h * dh + cross * eh.lag_w * dw;
    const double step_w = ew.prot * ip + ew.nonprot * iq + cross * ew.lag_h * dh + ew.lag_w * dw;

    h += gh;
    w += gw;
    dh += step_h;
    dw += step_w;
    out.baseline_height.push_back(h);
    out.baseline_weight.push_back(w);
    out.period_dh.push_back(step_h);
    out.period_dw.push_back(step_w);
    out.cumulative_dh.push_back(dh);
    out.cumulative_dw.push_back(dw);
  }
  return out;
}

}  // namespace growthiv
