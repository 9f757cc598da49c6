#pragma once

#include "growthiv/types.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace growthiv {

inline constexpr double kKcalPerGramProtein = 4.0;
inline constexpr double kDaysPerMonth = 30.4375;

// One visit of one child. Anthropometric visits carry both height and
// weight; morbidity-only visits (fortnightly diarrhea recalls) leave them
// empty.
struct ChildObservation {
  std::string child_id;
  std::string community_id;
  int age_days = 0;
  std::optional<double> height_cm;
  std::optional<double> weight_g;
  std::optional<double> protein_kcal_day;
  std::optional<double> nonprotein_kcal_day;
  double supplement_protein_kcal = 0.0;
  double supplement_nonprotein_kcal = 0.0;
  bool breastfed_last_month = false;
  std::optional<double> diarrhea_days_reported;
  int reporting_window_days = 0;
  bool female = false;
  int birth_order = 1;
  int birth_year = 0;
  bool atole_village = false;
  std::optional<double> distance_to_center;

  bool protein_imputed = false;
  bool nonprotein_imputed = false;

  bool is_measurement() const { return height_cm.has_value() && weight_g.has_value(); }
};

// Rows in canonical (child_id, age_days) order.
using Panel = std::vector<ChildObservation>;

// Column layout of the panel CSV, in order.
inline constexpr std::string_view kPanelHeader =
    "child_id,community_id,age_days,height_cm,weight_g,protein_g_day,nonprotein_kcal_day,"
    "suppl_protein_kcal,suppl_nonprotein_kcal,breastfed,diar_days,diar_window_days,female,"
    "birth_order,birth_year,atole,distance_km";

// Default diarrhea recall window per country: 15 days (Guatemala), 7 (Philippines).
int default_reporting_window(Country c);

Panel parse_panel(std::istream& in, Country country, std::string_view source = "<stream>");
Panel load_panel(const std::filesystem::path& path, Country country);

// Writes the panel CSV; protein is converted back to grams.
void write_panel(std::ostream& out, const Panel& panel);

// Throws ValidationError naming the offending field if any invariant fails.
void validate_observation(const ChildObservation& obs);

// Row ranges [begin, end) per child in a canonically ordered panel.
struct ChildSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};
std::vector<ChildSpan> child_spans(const Panel& panel);

// Calendar month index (year * 12 + month - 1) of a visit, assuming birth in
// `birth_month` (1-12) of the birth year.
int calendar_month_index(int birth_year, int age_days, int birth_month = 7);

}  // namespace growthiv
