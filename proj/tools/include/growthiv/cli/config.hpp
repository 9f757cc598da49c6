#pragma once

#include "growthiv/counterfactual.hpp"
#include "growthiv/count_models.hpp"
#include "growthiv/sweep.hpp"
#include "growthiv/synth.hpp"
#include "growthiv/types.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace growthiv::cli {

struct DataPaths {
  std::filesystem::path panel;
  std::filesystem::path prices;
  std::filesystem::path units;
  std::filesystem::path deflator;
  std::filesystem::path battery;          // Philippines diarrhea predictions
  std::filesystem::path height_specs;     // completed sweeps for counterfactuals
  std::filesystem::path weight_specs;
};

struct ScenarioConfig {
  std::string kind = "egg";               // "egg" or "custom"
  double eggs_per_week = 1.0;
  double protein_kcal_per_day = 0.0;
  double nonprotein_kcal_per_day = 0.0;
  int n_periods = 0;                      // 0: the baseline horizon
  std::vector<std::pair<double, double>> schedule;
  bool allow_negative = false;
  bool cross_feedback = true;
};

struct MedianIncrements {
  double energy_kcal = 300.0;
  double protein_g = 10.0;
  double nonprotein_kcal = 300.0;
};

struct RunConfig {
  Country country = Country::philippines;
  Model model = Model::protein_split;
  Outcome outcome = Outcome::height;
  DataPaths data;
  std::vector<FilterCriteria> filters = FilterCriteria::table_rows();
  int min_count = 10;
  int max_sets = 0;                       // 0: every enumerated set
  bool hausman = true;
  ScenarioConfig scenario;
  MedianIncrements increments;
  SelectionCriterion count_criterion = SelectionCriterion::by_r2;
  double recall_scale = 1.0;
  StructuralParams synth = StructuralParams::defaults(Country::philippines);
  int workers = 1;
  std::uint64_t seed = 1;
  std::filesystem::path out = "out";

  // Checks ranges and that referenced input files exist. `needs` lists the
  // data paths a command requires ("panel", "prices", ...).
  void validate(const std::vector<std::string>& needs) const;
};

// Parses a JSON config; a run manifest (with a "config" member) is
// accepted as well. Throws ValidationError.
RunConfig parse_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_config(const std::filesystem::path& path);

// Canonical JSON of the effective configuration.
std::string config_to_json(const RunConfig& c);

// 64-bit FNV-1a of the canonical config, hex encoded.
std::string config_hash(const RunConfig& c);

}  // namespace growthiv::cli
