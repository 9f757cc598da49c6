#pragma once

#include "growthiv/design.hpp"
#include "growthiv/growth.hpp"
#include "growthiv/panel.hpp"
#include "growthiv/prices.hpp"
#include "growthiv/types.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace growthiv {

// Daily intake rule for one nutrient (kcal/day):
// a0 + sum_k a_price[k] z_k + a_mu * mu_std + a_comp * eps_h(t-1) + noise,
// where z_k is the standardized log price of item k at the visit.
struct InputRule {
  double a0 = 0.0;
  std::vector<double> a_price;
  double a_mu = 0.0;
  double a_comp = 0.0;            // kcal/day per cm of last period's height shock
  double noise_sd = 0.0;
  double meas_err_sd = 0.0;       // reported = true + N(0, meas_err_sd)
};

struct PriceProcess {
  double base = 50.0;             // currency per 100 g
  double rho = 0.8;               // monthly AR(1) on log price
  double sd = 0.1;                // innovation SD of log price
};

struct StructuralParams {
  Country country = Country::philippines;

  // Production functions h = alpha mu + sum beta_{t-j} x_j + eps_h and
  // w = sigma mu + sum delta_{t-j} x_j + eps_w with beta_k = gamma^k beta0.
  double alpha = 0.01;
  double sigma = 1.0;
  double gamma = 0.8;
  double beta0_prot = 3e-4;       // cm per kcal
  double beta0_nonprot = 5e-5;
  double delta0_prot = 0.06;      // g per kcal
  double delta0_nonprot = 0.01;
  bool strict_assumption2 = true; // delta0 = (1 + sigma) / alpha * beta0
  double beta_gap = 0.0;          // growth per day of the period, cm
  double beta_diarrhea = 0.0;     // per day with diarrhea, cm
  double beta_bf = 0.0;           // per breastfed period, cm

  double mu_mean = 6500.0;
  double mu_sd = 300.0;
  double eps_h_sd = 0.5;
  double eps_w_sd = 100.0;

  InputRule protein;
  InputRule nonprotein;
  std::vector<std::string> price_items;   // empty: country defaults
  std::vector<PriceProcess> price_process;

  // Guatemala supplementation: daily kcal in atole (protein) and fresco
  // (non-protein) villages, scaled by a per-visit participation draw.
  double atole_protein_kcal_day = 40.0;
  double fresco_nonprotein_kcal_day = 20.0;

  double diarrhea_rate = 0.08;    // mean share of days with diarrhea

  int n_children = 500;
  int n_periods = 7;
  int n_communities = 0;          // 0: 4 (Guatemala) or 33 (Philippines)
  int first_age_days = 183;
  int gap_days = 0;               // 0: 90 (Guatemala) or 60 (Philippines)
  int gap_jitter_days = 5;
  int birth_year_min = 0;         // 0: country default cohort
  int birth_year_max = 0;
  double missing_intake_prob = 0.0;
  std::uint64_t seed = 1;

  // Fills country-dependent zero defaults and the price/intake rules.
  static StructuralParams defaults(Country c);

  // Throws ValidationError naming the offending parameter.
  void validate() const;

  int effective_gap() const;
  int effective_communities() const;
  std::vector<std::string> items() const;
  double effective_delta0_prot() const;
  double effective_delta0_nonprot() const;
};

// Geometric lag weights beta_k and delta_k for k = 0..horizon-1.
struct LagWeights {
  std::vector<double> beta_prot;
  std::vector<double> beta_nonprot;
  std::vector<double> delta_prot;
  std::vector<double> delta_nonprot;
};
LagWeights lag_weights(const StructuralParams& p, int horizon);

// Coefficients of the differenced growth equations implied by the
// structural parameters.
struct ImpliedCoefficients {
  double height_prot = 0.0;
  double height_nonprot = 0.0;
  double height_lag_weight = 0.0;   // alpha (gamma - 1)
  double height_lag_height = 0.0;   // -sigma (gamma - 1)
  double weight_prot = 0.0;
  double weight_nonprot = 0.0;
  double weight_lag_weight = 0.0;   // (gamma - 1)(1 + sigma)
  double weight_lag_height = 0.0;   // -sigma (gamma - 1)(1 + sigma) / alpha

  // Full coefficient map for a design's names (controls included).
  std::map<std::string, double> height(const StructuralParams& p) const;
  std::map<std::string, double> weight(const StructuralParams& p) const;
};
ImpliedCoefficients implied_growth_coefficients(const StructuralParams& p);

struct VisitTruth {
  int age_days = 0;
  double eps_h = 0.0;
  double eps_w = 0.0;
  double protein_kcal_day = 0.0;       // true daily intakes at the visit
  double nonprotein_kcal_day = 0.0;
  double protein_period_kcal = 0.0;    // true period inputs ending at the visit
  double nonprotein_period_kcal = 0.0;
};

struct ChildTruth {
  std::string child_id;
  double mu = 0.0;
  std::vector<VisitTruth> visits;
};

struct SyntheticPanel {
  Country country = Country::philippines;
  Panel panel;
  std::vector<PriceSeries> prices;
  std::vector<ChildTruth> truth;

  const VisitTruth* find_truth(const std::string& child_id, int age_days) const;

  // Build options matching the generator's timing and band.
  GrowthBuildOptions build_options(Model model) const;
  GrowthData growth_data(Model model) const;
};

SyntheticPanel generate_panel(const StructuralParams& params);
SyntheticPanel generate_panel(StructuralParams params, std::uint64_t seed);

std::string truth_to_json(const SyntheticPanel& s, const StructuralParams& p);

struct BiasRow {
  std::string estimator;
  std::string coefficient;
  double truth = 0.0;
  double estimate = 0.0;
  double std_error = 0.0;
  double bias = 0.0;
};

// OLS and LIML (all prices plus both second lags as instruments) on the
// height equation of the protein-split model.
std::vector<BiasRow> oracle_bias_report(const SyntheticPanel& panel, const StructuralParams& params,
                                        Outcome outcome = Outcome::height);

// Instruments used by oracle_bias_report.
std::vector<std::string> oracle_instruments(const StructuralParams& params);

}  // namespace growthiv
