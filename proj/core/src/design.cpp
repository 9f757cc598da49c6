#include "growthiv/design.hpp"

#include "growthiv/error.hpp"

#include <algorithm>
#include <map>

namespace growthiv {

std::vector<std::string> endogenous_names(Model model) {
  if (model == Model::energy) return {coef::kEnergy, coef::kLagWeight, coef::kLagHeight};
  return {coef::kProtein, coef::kNonProtein, coef::kLagWeight, coef::kLagHeight};
}

std::vector<std::string> exogenous_names(Country country) {
  std::vector<std::string> names{coef::kIntercept, "days_no_diar", "bf", "age", "age_sq", "female", "gap_msmt"};
  if (country == Country::philippines) names.push_back("season");
  return names;
}

std::vector<std::string> nutrient_names(Model model) {
  if (model == Model::energy) return {coef::kEnergy};
  return {coef::kProtein, coef::kNonProtein};
}

GrowthData::GrowthData(Country c, std::vector<GrowthObservation> r) : country(c), rows(std::move(r)) {
  std::map<std::string, long long> codes;
  for (const auto& g : rows) codes.emplace(g.child_id, 0);
  long long next = 0;
  for (auto& [id, code] : codes) code = next++;
  cluster.reserve(rows.size());
  for (const auto& g : rows) cluster.push_back(codes[g.child_id]);
}

DesignMatrices build_design(const GrowthData& data, Model model, Outcome outcome,
                            std::span<const std::string> instruments, std::vector<std::size_t>* used) {
  std::vector<std::size_t> keep;
  keep.reserve(data.rows.size());
  for (std::size_t i = 0; i < data.rows.size(); ++i) {
    const auto& g = data.rows[i];
    bool ok = true;
    for (const auto& name : instruments) {
      auto it = g.instruments.find(name);
      if (it == g.instruments.end()) {
        throw ValidationError("unknown instrument '" + name + "'");
      }
      if (!it->second) {
        ok = false;
        break;
      }
    }
    if (ok) keep.push_back(i);
  }

  DesignMatrices d;
  d.endog_names = endogenous_names(model);
  d.exog_names = exogenous_names(data.country);
  d.instrument_names.assign(instruments.begin(), instruments.end());
  const auto n = static_cast<Eigen::Index>(keep.size());
  const auto k1 = static_cast<Eigen::Index>(d.endog_names.size());
  const auto k2 = static_cast<Eigen::Index>(d.exog_names.size());
  const auto m = static_cast<Eigen::Index>(instruments.size());
  d.y.resize(n);
  d.x_endog.resize(n, k1);
  d.x_exog.resize(n, k2);
  d.z_excl.resize(n, m);
  d.cluster_ids.resize(static_cast<std::size_t>(n));
  for (Eigen::Index r = 0; r < n; ++r) {
    const std::size_t i = keep[static_cast<std::size_t>(r)];
    const auto& g = data.rows[i];
    d.y(r) = outcome == Outcome::height ? g.delta_height_cm : g.delta_weight_g;
    if (model == Model::energy) {
      d.x_endog.row(r) << g.energy_period_kcal, g.lag_weight_g, g.lag_height_cm;
    } else {
      d.x_endog.row(r) << g.protein_period_kcal, g.nonprotein_period_kcal, g.lag_weight_g, g.lag_height_cm;
    }
    d.x_exog(r, 0) = 1.0;
    d.x_exog(r, 1) = g.days_no_diar;
    d.x_exog(r, 2) = g.bf ? 1.0 : 0.0;
    d.x_exog(r, 3) = g.age_days;
    d.x_exog(r, 4) = g.age_days_sq;
    d.x_exog(r, 5) = g.female ? 1.0 : 0.0;
    d.x_exog(r, 6) = g.gap_msmt;
    if (data.country == Country::philippines) d.x_exog(r, 7) = g.season ? 1.0 : 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      d.z_excl(r, j) = *g.instruments.at(instruments[static_cast<std::size_t>(j)]);
    }
    d.cluster_ids[static_cast<std::size_t>(r)] = data.cluster[i];
  }
  if (used) *used = std::move(keep);
  return d;
}

}  // namespace growthiv
