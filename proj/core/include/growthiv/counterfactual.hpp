#pragma once

#include "growthiv/estimators.hpp"
#include "growthiv/sweep.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace growthiv {

inline constexpr double kEggProteinGrams = 5.5;
inline constexpr double kEggNonProteinKcal = 40.9;

// Days per growth period: 90 in Guatemala, 60 in the Philippines.
int days_per_period(Country c);

double protein_grams_to_kcal(double grams);

// median(coef) * increment_per_day * days_per_period, in the coefficient's
// natural units (cm or g per kcal).
double median_prediction(const std::vector<SpecResult>& filtered, const std::string& coefficient,
                         double increment_per_day, int days_per_period);

// The same arithmetic starting from a table median in display units.
double median_prediction_from_display(double display_median, double display_scale, double increment_per_day,
                                      int days_per_period);

// Specs used for median predictions: CD > 7 with HJ p > 0.05, falling back
// to CD > 3 when fewer than `min_count` survive. Throws ValidationError if
// the fallback is empty too. `used` receives the criteria applied.
std::vector<SpecResult> prediction_filter(const std::vector<SpecResult>& results, int min_count = 10,
                                          FilterCriteria* used = nullptr);

// Among specs with HJ p > 0.05, the largest KP F; ties go to the lower id.
const SpecResult& select_best_spec(const std::vector<SpecResult>& results);

struct InterventionScenario {
  double protein_kcal_per_day = 0.0;
  double nonprotein_kcal_per_day = 0.0;
  int days_per_period = 90;
  int n_periods = 1;
  // Optional per-period (protein, nonprotein) kcal/day overriding the constants.
  std::vector<std::pair<double, double>> schedule;
  bool allow_negative = false;

  void validate() const;
  std::pair<double, double> period_increment_kcal(int t) const;   // period totals
};

InterventionScenario egg_scenario(int days_per_period, int n_periods, double eggs_per_week = 1.0);

struct BaselinePeriod {
  double protein_kcal = 0.0;      // period totals
  double nonprotein_kcal = 0.0;
  // Values for the exogenous controls of the fits (intercept implied).
  std::vector<std::pair<std::string, double>> controls;
};

struct BaselinePath {
  double height0_cm = 0.0;
  double weight0_g = 0.0;
  std::vector<BaselinePeriod> periods;
};

struct TrajectoryDelta {
  std::vector<double> period_dh;
  std::vector<double> period_dw;
  std::vector<double> cumulative_dh;
  std::vector<double> cumulative_dw;
  // Levels of the baseline pass; the scenario pass is baseline + cumulative.
  std::vector<double> baseline_height;
  std::vector<double> baseline_weight;
};

struct SimulationOptions {
  // Propagate lagged weight into height growth and lagged height into weight
  // growth. Own-lag feedback is always on.
  bool cross_feedback = true;
};

// Iterates the height and weight growth equations forward with and without
// the scenario's increments; the delta carries the induced changes in the
// lagged anthropometrics through the lag coefficients.
TrajectoryDelta simulate_intervention(const FitResult& height_fit, const FitResult& weight_fit,
                                      const BaselinePath& baseline, const InterventionScenario& scenario,
                                      const SimulationOptions& options = {});

}  // namespace growthiv
