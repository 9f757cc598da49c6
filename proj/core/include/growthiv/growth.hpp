#pragma once

#include "growthiv/panel.hpp"
#include "growthiv/prices.hpp"
#include "growthiv/types.hpp"

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace growthiv {

struct PeriodIntake {
  double protein_kcal = 0.0;
  double nonprotein_kcal = 0.0;
};

// Period intake = mean of the endpoint daily intakes times the gap, plus the
// supplement totals recorded on the closing visit. Returns nullopt when
// either endpoint lacks an intake.
std::optional<PeriodIntake> aggregate_intakes(const ChildObservation& start, const ChildObservation& end,
                                              int gap_days);

struct ImputationSummary {
  std::size_t protein_imputed = 0;
  std::size_t nonprotein_imputed = 0;
};

// Fills missing daily intakes on anthropometric visits from child
// fixed-effects models (age-in-months dummies plus a child intercept; the
// birth-year dummies are absorbed by the intercept). A value is filled only
// when the previous or next anthropometric visit of the same child has an
// observed value. Observed values are never changed.
ImputationSummary impute_intakes_fe(Panel& panel);

// Days with diarrhea over a growth period, scaled from the observed recall
// windows; each window is (days reported, window length). nullopt when no
// window was observed.
std::optional<double> scale_diarrhea_guatemala(std::span<const std::pair<double, int>> windows, int gap_days);

// Diarrhea days over the period that closes at panel[end] and opens at
// panel[start]; both indices refer to rows of the same child.
using DiarrheaResolver =
    std::function<std::optional<double>(const Panel& panel, std::size_t start, std::size_t end, int gap_days)>;

// Scales the recall windows reported on visits in (start age, end age].
DiarrheaResolver window_scaling_resolver();

// Instrument identifiers.
namespace instrument {
inline constexpr const char* kAtole = "atole";
inline constexpr const char* kAtoleDistance = "atole_dist";
inline constexpr const char* kLag2Height = "lag2_height";
inline constexpr const char* kLag2Weight = "lag2_weight";
std::string price(const std::string& item);       // "price_<item>"
std::string lagged_price(const std::string& item); // "price_<item>_lag"
}  // namespace instrument

// One differenced regression row.
struct GrowthObservation {
  std::string child_id;
  std::string community_id;
  int period_index = 0;           // index of the closing visit among the child's anthropometric visits
  double delta_height_cm = 0.0;
  double delta_weight_g = 0.0;
  double energy_period_kcal = 0.0;
  double protein_period_kcal = 0.0;
  double nonprotein_period_kcal = 0.0;
  double lag_height_cm = 0.0;
  double lag_weight_g = 0.0;
  std::optional<double> lag2_height_cm;
  std::optional<double> lag2_weight_g;
  double days_no_diar = 0.0;
  double days_with_diar = 0.0;
  bool bf = false;
  double age_days = 0.0;
  double age_days_sq = 0.0;
  bool female = false;
  int gap_msmt = 0;
  bool season = false;
  int month_index = 0;
  std::map<std::string, std::optional<double>> instruments;   // nullopt marks a missing instrument

  std::optional<double> instrument_value(const std::string& name) const;
};

struct GrowthBuildOptions {
  Country country = Country::guatemala;
  Model model = Model::protein_split;
  int band_min_days = 168;        // closing and opening visits must lie in the band
  int band_max_days = 745;
  int birth_month = 7;
  std::set<int> season_months{6, 7, 8, 9, 10, 11};
  int price_lag_months = 2;       // community prices (Philippines): one survey round
  int national_price_lag_years = 1;
  Deflator deflator;              // national prices are divided by index(year)
  std::vector<std::string> price_items;   // empty: country defaults
  DiarrheaResolver diarrhea;      // empty: window_scaling_resolver()
};

struct Exclusion {
  std::string child_id;
  int age_days = 0;
  std::string reason;
};

struct GrowthBuildResult {
  std::vector<GrowthObservation> rows;     // canonical (child_id, period_index) order
  std::vector<Exclusion> excluded;
};

// Default price catalogs: seven national items for Guatemala, four
// community items for the Philippines.
std::vector<std::string> default_price_items(Country c);

GrowthBuildResult build_growth_observations(const Panel& panel, const std::vector<PriceSeries>& prices,
                                            const GrowthBuildOptions& options);

}  // namespace growthiv
