#pragma once

#include "growthiv/estimators.hpp"
#include "growthiv/growth.hpp"
#include "growthiv/types.hpp"

#include <span>
#include <string>
#include <vector>

namespace growthiv {

// Coefficient names used across fits and outputs.
namespace coef {
inline constexpr const char* kEnergy = "energy";
inline constexpr const char* kProtein = "protein";
inline constexpr const char* kNonProtein = "nonprotein";
inline constexpr const char* kLagWeight = "lag_weight";
inline constexpr const char* kLagHeight = "lag_height";
inline constexpr const char* kIntercept = "intercept";
}  // namespace coef

std::vector<std::string> endogenous_names(Model model);
std::vector<std::string> exogenous_names(Country country);

// Nutrient coefficients summarized by the sweep for a model.
std::vector<std::string> nutrient_names(Model model);

// Growth rows with precomputed dense cluster keys.
struct GrowthData {
  Country country = Country::guatemala;
  std::vector<GrowthObservation> rows;
  std::vector<long long> cluster;

  GrowthData() = default;
  GrowthData(Country c, std::vector<GrowthObservation> r);
};

// Design for one specification restricted to rows where every listed
// instrument is present. `used` receives the selected row indices.
DesignMatrices build_design(const GrowthData& data, Model model, Outcome outcome,
                            std::span<const std::string> instruments, std::vector<std::size_t>* used = nullptr);

}  // namespace growthiv
