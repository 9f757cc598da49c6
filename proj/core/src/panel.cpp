#include "growthiv/panel.hpp"

#include "growthiv/csv.hpp"
#include "growthiv/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

namespace growthiv {

std::string_view to_string(Country c) { return c == Country::guatemala ? "guatemala" : "philippines"; }
std::string_view to_string(Model m) { return m == Model::energy ? "energy" : "protein_split"; }
std::string_view to_string(Outcome o) { return o == Outcome::height ? "height" : "weight"; }

Country parse_country(std::string_view s) {
  if (s == "guatemala") return Country::guatemala;
  if (s == "philippines") return Country::philippines;
  throw ValidationError("unknown country '" + std::string(s) + "'");
}

Model parse_model(std::string_view s) {
  if (s == "energy") return Model::energy;
  if (s == "protein_split") return Model::protein_split;
  throw ValidationError("unknown model '" + std::string(s) + "'");
}

Outcome parse_outcome(std::string_view s) {
  if (s == "height") return Outcome::height;
  if (s == "weight") return Outcome::weight;
  throw ValidationError("unknown outcome '" + std::string(s) + "'");
}

int default_reporting_window(Country c) { return c == Country::guatemala ? 15 : 7; }

int calendar_month_index(int birth_year, int age_days, int birth_month) {
  return birth_year * 12 + (birth_month - 1) + static_cast<int>(std::floor(age_days / kDaysPerMonth));
}

void validate_observation(const ChildObservation& o) {
  auto fail = [&](std::string_view field, const std::string& why) {
    throw ValidationError("child '" + o.child_id + "' age " + std::to_string(o.age_days) + ": field '" +
                          std::string(field) + "' " + why);
  };
  if (o.child_id.empty()) fail("child_id", "is empty");
  if (o.age_days < 0) fail("age_days", "must be non-negative");
  if (o.height_cm && !(*o.height_cm > 0.0)) fail("height_cm", "must be positive");
  if (o.weight_g && !(*o.weight_g > 0.0)) fail("weight_g", "must be positive");
  if (o.protein_kcal_day && !(*o.protein_kcal_day >= 0.0)) fail("protein_g_day", "must be non-negative");
  if (o.nonprotein_kcal_day && !(*o.nonprotein_kcal_day >= 0.0)) fail("nonprotein_kcal_day", "must be non-negative");
  if (!(o.supplement_protein_kcal >= 0.0)) fail("suppl_protein_kcal", "must be non-negative");
  if (!(o.supplement_nonprotein_kcal >= 0.0)) fail("suppl_nonprotein_kcal", "must be non-negative");
  if (o.reporting_window_days <= 0) fail("diar_window_days", "must be positive");
  if (o.diarrhea_days_reported &&
      !(*o.diarrhea_days_reported >= 0.0 && *o.diarrhea_days_reported <= o.reporting_window_days)) {
    fail("diar_days", "must lie in [0, diar_window_days]");
  }
  if (o.distance_to_center && !(*o.distance_to_center >= 0.0)) fail("distance_km", "must be non-negative");
}

namespace {

enum Col {
  kChild, kCommunity, kAge, kHeight, kWeight, kProtein, kNonProtein, kSupplProt, kSupplNonProt, kBreastfed,
  kDiarDays, kDiarWindow, kFemale, kBirthOrder, kBirthYear, kAtole, kDistance, kNumCols
};

constexpr std::string_view kColumnNames[kNumCols] = {
    "child_id", "community_id", "age_days", "height_cm", "weight_g", "protein_g_day",
    "nonprotein_kcal_day", "suppl_protein_kcal", "suppl_nonprotein_kcal", "breastfed", "diar_days",
    "diar_window_days", "female", "birth_order", "birth_year", "atole", "distance_km"};

bool parse_flag(std::string_view s) {
  const auto v = csv::parse_integer(s);
  if (!v) return false;
  if (*v != 0 && *v != 1) throw std::invalid_argument("expected 0 or 1");
  return *v == 1;
}

}  // namespace

Panel parse_panel(std::istream& in, Country country, std::string_view source) {
  std::vector<std::string> fields;
  std::size_t line_no = 0;
  if (!csv::next_record(in, fields, line_no)) {
    throw ValidationError(std::string(source) + ": missing header row");
  }
  if (fields.size() != kNumCols) {
    throw ValidationError(std::string(source) + ": header has " + std::to_string(fields.size()) +
                          " columns, expected " + std::to_string(kNumCols));
  }
  for (int c = 0; c < kNumCols; ++c) {
    if (fields[static_cast<std::size_t>(c)] != kColumnNames[c]) {
      throw ValidationError(std::string(source) + ": header column " + std::to_string(c + 1) + " is '" +
                            fields[static_cast<std::size_t>(c)] + "', expected '" + std::string(kColumnNames[c]) +
                            "'");
    }
  }

  Panel panel;
  while (csv::next_record(in, fields, line_no)) {
    const std::string where = std::string(source) + " row " + std::to_string(line_no);
    if (fields.size() != kNumCols) {
      throw ValidationError(where + ": expected " + std::to_string(kNumCols) + " fields, found " +
                            std::to_string(fields.size()));
    }
    ChildObservation o;
    int col = 0;
    try {
      col = kChild;
      o.child_id = fields[kChild];
      col = kCommunity;
      o.community_id = fields[kCommunity];
      col = kAge;
      const auto age = csv::parse_integer(fields[kAge]);
      if (!age) throw std::invalid_argument("required");
      o.age_days = static_cast<int>(*age);
      col = kHeight;
      o.height_cm = csv::parse_real(fields[kHeight]);
      col = kWeight;
      o.weight_g = csv::parse_real(fields[kWeight]);
      col = kProtein;
      if (auto g = csv::parse_real(fields[kProtein])) o.protein_kcal_day = *g * kKcalPerGramProtein;
      col = kNonProtein;
      o.nonprotein_kcal_day = csv::parse_real(fields[kNonProtein]);
      col = kSupplProt;
      o.supplement_protein_kcal = csv::parse_real(fields[kSupplProt]).value_or(0.0);
      col = kSupplNonProt;
      o.supplement_nonprotein_kcal = csv::parse_real(fields[kSupplNonProt]).value_or(0.0);
      col = kBreastfed;
      o.breastfed_last_month = parse_flag(fields[kBreastfed]);
      col = kDiarDays;
      o.diarrhea_days_reported = csv::parse_real(fields[kDiarDays]);
      col = kDiarWindow;
      o.reporting_window_days =
          static_cast<int>(csv::parse_integer(fields[kDiarWindow]).value_or(default_reporting_window(country)));
      col = kFemale;
      o.female = parse_flag(fields[kFemale]);
      col = kBirthOrder;
      o.birth_order = static_cast<int>(csv::parse_integer(fields[kBirthOrder]).value_or(1));
      col = kBirthYear;
      const auto by = csv::parse_integer(fields[kBirthYear]);
      if (!by) throw std::invalid_argument("required");
      o.birth_year = static_cast<int>(*by);
      col = kAtole;
      o.atole_village = parse_flag(fields[kAtole]);
      col = kDistance;
      o.distance_to_center = csv::parse_real(fields[kDistance]);
    } catch (const std::invalid_argument& e) {
      throw ValidationError(where + ": field '" + std::string(kColumnNames[col]) + "': " + e.what());
    } catch (const std::out_of_range&) {
      throw ValidationError(where + ": field '" + std::string(kColumnNames[col]) + "': out of range");
    }
    if (country != Country::guatemala) {
      o.supplement_protein_kcal = 0.0;
      o.supplement_nonprotein_kcal = 0.0;
    }
    try {
      validate_observation(o);
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    panel.push_back(std::move(o));
  }

  std::stable_sort(panel.begin(), panel.end(), [](const ChildObservation& a, const ChildObservation& b) {
    if (a.child_id != b.child_id) return a.child_id < b.child_id;
    return a.age_days < b.age_days;
  });
  for (std::size_t i = 1; i < panel.size(); ++i) {
    if (panel[i].child_id == panel[i - 1].child_id && panel[i].age_days == panel[i - 1].age_days) {
      throw ValidationError(std::string(source) + ": duplicate observation for child '" + panel[i].child_id +
                            "' at age_days " + std::to_string(panel[i].age_days));
    }
  }
  return panel;
}

Panel load_panel(const std::filesystem::path& path, Country country) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open panel file '" + path.string() + "'");
  return parse_panel(in, country, path.string());
}

void write_panel(std::ostream& out, const Panel& panel) {
  out << kPanelHeader << '\n';
  for (const auto& o : panel) {
    std::optional<double> protein_g;
    if (o.protein_kcal_day) protein_g = *o.protein_kcal_day / kKcalPerGramProtein;
    out << csv::escape(o.child_id) << ',' << csv::escape(o.community_id) << ',' << o.age_days << ','
        << csv::format_optional(o.height_cm) << ',' << csv::format_optional(o.weight_g) << ','
        << csv::format_optional(protein_g) << ',' << csv::format_optional(o.nonprotein_kcal_day) << ','
        << csv::format_real(o.supplement_protein_kcal) << ',' << csv::format_real(o.supplement_nonprotein_kcal)
        << ',' << (o.breastfed_last_month ? 1 : 0) << ',' << csv::format_optional(o.diarrhea_days_reported)
        << ',' << o.reporting_window_days << ',' << (o.female ? 1 : 0) << ',' << o.birth_order << ','
        << o.birth_year << ',' << (o.atole_village ? 1 : 0) << ',' << csv::format_optional(o.distance_to_center)
        << '\n';
  }
}

std::vector<ChildSpan> child_spans(const Panel& panel) {
  std::vector<ChildSpan> spans;
  std::size_t i = 0;
  while (i < panel.size()) {
    std::size_t j = i + 1;
    while (j < panel.size() && panel[j].child_id == panel[i].child_id) ++j;
    spans.push_back({i, j});
    i = j;
  }
  return spans;
}

}  // namespace growthiv
