#include "growthiv/growth.hpp"

#include "growthiv/error.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace growthiv {

std::optional<PeriodIntake> aggregate_intakes(const ChildObservation& start, const ChildObservation& end,
                                              int gap_days) {
  if (gap_days <= 0) throw ValidationError("gap_days must be positive");
  if (!start.protein_kcal_day || !start.nonprotein_kcal_day || !end.protein_kcal_day ||
      !end.nonprotein_kcal_day) {
    return std::nullopt;
  }
  PeriodIntake p;
  p.protein_kcal = 0.5 * (*start.protein_kcal_day + *end.protein_kcal_day) * gap_days + end.supplement_protein_kcal;
  p.nonprotein_kcal =
      0.5 * (*start.nonprotein_kcal_day + *end.nonprotein_kcal_day) * gap_days + end.supplement_nonprotein_kcal;
  return p;
}

std::optional<double> scale_diarrhea_guatemala(std::span<const std::pair<double, int>> windows, int gap_days) {
  if (gap_days <= 0) throw ValidationError("gap_days must be positive");
  double days = 0.0;
  double length = 0.0;
  for (const auto& [d, w] : windows) {
    if (w <= 0) continue;
    days += d;
    length += w;
  }
  if (length <= 0.0) return std::nullopt;
  return std::clamp(days / length * gap_days, 0.0, static_cast<double>(gap_days));
}

DiarrheaResolver window_scaling_resolver() {
  return [](const Panel& panel, std::size_t start, std::size_t end, int gap) -> std::optional<double> {
    std::vector<std::pair<double, int>> windows;
    for (std::size_t i = start + 1; i <= end; ++i) {
      if (panel[i].diarrhea_days_reported) {
        windows.emplace_back(*panel[i].diarrhea_days_reported, panel[i].reporting_window_days);
      }
    }
    return scale_diarrhea_guatemala(windows, gap);
  };
}

namespace instrument {
std::string price(const std::string& item) { return "price_" + item; }
std::string lagged_price(const std::string& item) { return "price_" + item + "_lag"; }
}  // namespace instrument

std::optional<double> GrowthObservation::instrument_value(const std::string& name) const {
  auto it = instruments.find(name);
  if (it == instruments.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> default_price_items(Country c) {
  if (c == Country::guatemala) return {"eggs", "chicken", "pork", "beef", "rice", "beans", "corn"};
  return {"eggs", "fish", "tomatoes", "corn"};
}

namespace {

class PriceLookup {
public:
  explicit PriceLookup(const std::vector<PriceSeries>& prices) {
    for (const auto& p : prices) cells_[{p.item, p.scope, p.month_index}] = p.unit_price;
  }

  std::optional<double> at(const std::string& item, const std::string& scope, int month) const {
    auto it = cells_.find({item, scope, month});
    if (it == cells_.end()) return std::nullopt;
    return it->second;
  }

  // December quote of `year`, else the mean of that year's quotes.
  std::optional<double> annual(const std::string& item, const std::string& scope, int year) const {
    if (auto dec = at(item, scope, year * 12 + 11)) return dec;
    double s = 0.0;
    int n = 0;
    for (int m = 0; m < 12; ++m) {
      if (auto v = at(item, scope, year * 12 + m)) {
        s += *v;
        ++n;
      }
    }
    if (n == 0) return std::nullopt;
    return s / n;
  }

private:
  std::map<std::tuple<std::string, std::string, int>, double> cells_;
};

int floor_div(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

}  // namespace

GrowthBuildResult build_growth_observations(const Panel& panel, const std::vector<PriceSeries>& prices,
                                            const GrowthBuildOptions& opt) {
  const PriceLookup lookup(prices);
  const std::vector<std::string> items = opt.price_items.empty() ? default_price_items(opt.country) : opt.price_items;
  const DiarrheaResolver diarrhea = opt.diarrhea ? opt.diarrhea : window_scaling_resolver();

  GrowthBuildResult out;
  for (const auto& span : child_spans(panel)) {
    std::vector<std::size_t> visits;
    for (std::size_t i = span.begin; i < span.end; ++i) {
      if (panel[i].is_measurement()) visits.push_back(i);
    }
    for (std::size_t t = 1; t < visits.size(); ++t) {
      const ChildObservation& s = panel[visits[t - 1]];
      const ChildObservation& e = panel[visits[t]];
      if (s.age_days < opt.band_min_days || e.age_days > opt.band_max_days) continue;
      const int gap = e.age_days - s.age_days;
      const auto intake = aggregate_intakes(s, e, gap);
      if (!intake) {
        out.excluded.push_back({e.child_id, e.age_days, "missing endpoint intake"});
        continue;
      }
      const auto days_with = diarrhea(panel, visits[t - 1], visits[t], gap);
      if (!days_with) {
        out.excluded.push_back({e.child_id, e.age_days, "no diarrhea information"});
        continue;
      }

      GrowthObservation g;
      g.child_id = e.child_id;
      g.community_id = e.community_id;
      g.period_index = static_cast<int>(t);
      g.delta_height_cm = *e.height_cm - *s.height_cm;
      g.delta_weight_g = *e.weight_g - *s.weight_g;
      g.protein_period_kcal = intake->protein_kcal;
      g.nonprotein_period_kcal = intake->nonprotein_kcal;
      g.energy_period_kcal = intake->protein_kcal + intake->nonprotein_kcal;
      g.lag_height_cm = *s.height_cm;
      g.lag_weight_g = *s.weight_g;
      if (t >= 2) {
        g.lag2_height_cm = panel[visits[t - 2]].height_cm;
        g.lag2_weight_g = panel[visits[t - 2]].weight_g;
      }
      g.days_with_diar = std::clamp(*days_with, 0.0, static_cast<double>(gap));
      g.days_no_diar = gap - g.days_with_diar;
      g.bf = e.breastfed_last_month;
      g.age_days = e.age_days;
      g.age_days_sq = static_cast<double>(e.age_days) * e.age_days;
      g.female = e.female;
      g.gap_msmt = gap;
      g.month_index = calendar_month_index(e.birth_year, e.age_days, opt.birth_month);
      const int calendar_month = (g.month_index % 12 + 12) % 12 + 1;
      g.season = opt.country == Country::philippines && opt.season_months.count(calendar_month) > 0;

      g.instruments[instrument::kLag2Height] = g.lag2_height_cm;
      g.instruments[instrument::kLag2Weight] = g.lag2_weight_g;
      if (opt.country == Country::guatemala) {
        g.instruments[instrument::kAtole] = e.atole_village ? 1.0 : 0.0;
        std::optional<double> ad;
        if (e.distance_to_center) ad = (e.atole_village ? 1.0 : 0.0) * *e.distance_to_center;
        g.instruments[instrument::kAtoleDistance] = ad;
        const int year = floor_div(g.month_index, 12) - opt.national_price_lag_years;
        for (const auto& item : items) {
          std::optional<double> p = lookup.annual(item, "national", year);
          if (p && !opt.deflator.empty()) {
            auto it = opt.deflator.find(year);
            p = it == opt.deflator.end() ? std::nullopt : std::optional<double>(*p / it->second);
          }
          g.instruments[instrument::price(item)] = p;
        }
      } else {
        for (const auto& item : items) {
          g.instruments[instrument::price(item)] = lookup.at(item, e.community_id, g.month_index);
          g.instruments[instrument::lagged_price(item)] =
              lookup.at(item, e.community_id, g.month_index - opt.price_lag_months);
        }
      }
      out.rows.push_back(std::move(g));
    }
  }
  return out;
}

}  // namespace growthiv
