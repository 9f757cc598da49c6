#include "growthiv/cli/commands.hpp"

#include "growthiv/csv.hpp"
#include "growthiv/design.hpp"
#include "growthiv/error.hpp"
#include "growthiv/growth.hpp"
#include "growthiv/panel.hpp"
#include "growthiv/prices.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <chrono>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#ifndef GROWTHIV_VERSION
#define GROWTHIV_VERSION "0.0.0"
#endif

namespace growthiv::cli {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::ofstream open_output(const fs::path& dir, const std::string& name) {
  fs::create_directories(dir);
  std::ofstream out(dir / name, std::ios::binary);
  if (!out) throw Error("cannot write " + (dir / name).string());
  return out;
}

json versions() {
  std::ostringstream eigen;
  eigen << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION;
  return json{{"growthiv", GROWTHIV_VERSION}, {"eigen", eigen.str()}, {"compiler", __VERSION__}};
}

// The manifest holds nothing run-dependent beyond the config, so re-running
// it reproduces every file including itself.
void write_manifest(const RunConfig& c, const std::string& command, json extra) {
  json m;
  m["manifest_version"] = 1;
  m["command"] = command;
  m["config_hash"] = config_hash(c);
  m["seed"] = c.seed;
  m["versions"] = versions();
  for (auto& [k, v] : extra.items()) m[k] = v;
  m["config"] = json::parse(config_to_json(c));
  auto out = open_output(c.out, "manifest.json");
  out << m.dump(2) << '\n';
}

struct PreparedData {
  GrowthData data;
  std::size_t panel_rows = 0;
  std::size_t excluded = 0;
  ImputationSummary imputed;
};

PreparedData prepare(const RunConfig& c, Model model) {
  Panel panel = load_panel(c.data.panel, c.country);
  const UnitTable units = c.data.units.empty() ? UnitTable{} : UnitTable::load(c.data.units);
  const auto series = preprocess_prices(load_price_quotes(c.data.prices), units);

  PreparedData p;
  p.panel_rows = panel.size();
  p.imputed = impute_intakes_fe(panel);

  GrowthBuildOptions opts;
  opts.country = c.country;
  opts.model = model;
  if (!c.data.deflator.empty()) opts.deflator = load_deflator(c.data.deflator);
  if (c.country == Country::philippines && !c.data.battery.empty()) {
    std::ifstream in(c.data.battery);
    std::stringstream ss;
    ss << in.rdbuf();
    opts.diarrhea = battery_resolver(battery_from_json(ss.str()), panel, c.recall_scale);
  }
  auto built = build_growth_observations(panel, series, opts);
  p.excluded = built.excluded.size();
  p.data = GrowthData(c.country, std::move(built.rows));
  return p;
}

std::vector<SpecResult> sweep_outcome(const RunConfig& c, const GrowthData& data, Outcome outcome) {
  auto sets = enumerate_sets(c.country, c.model, outcome);
  if (c.max_sets > 0 && static_cast<std::size_t>(c.max_sets) < sets.size()) {
    sets.resize(static_cast<std::size_t>(c.max_sets));
  }
  SweepOptions so;
  so.workers = c.workers;
  so.hausman = c.hausman;
  return run_sweep(data, c.model, outcome, sets, so);
}

json status_counts(const std::vector<SpecResult>& results) {
  std::map<std::string, int> counts;
  for (auto s : {SpecStatus::ok, SpecStatus::skipped_rank, SpecStatus::skipped_underidentified,
                 SpecStatus::skipped_sample}) {
    counts[std::string(to_string(s))] = 0;
  }
  for (const auto& r : results) ++counts[std::string(to_string(r.status))];
  json j;
  j["total"] = results.size();
  for (const auto& [k, v] : counts) j[k] = v;
  return j;
}

std::vector<SpecResult> read_specs(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  return read_specs_csv(in, path.string());
}

double nutrient_increment(const MedianIncrements& inc, const std::string& coefficient) {
  if (coefficient == coef::kProtein) return protein_grams_to_kcal(inc.protein_g);
  if (coefficient == coef::kNonProtein) return inc.nonprotein_kcal;
  return inc.energy_kcal;
}

// Period means of the growth rows, in period-index order.
BaselinePath baseline_from(const GrowthData& data) {
  struct Acc {
    int n = 0;
    double p = 0, q = 0, h0 = 0, w0 = 0;
    std::map<std::string, double> ctl;
  };
  std::map<int, Acc> by_period;
  for (const auto& g : data.rows) {
    auto& a = by_period[g.period_index];
    ++a.n;
    a.p += g.protein_period_kcal;
    a.q += g.nonprotein_period_kcal;
    a.h0 += g.lag_height_cm;
    a.w0 += g.lag_weight_g;
    a.ctl["days_no_diar"] += g.days_no_diar;
    a.ctl["bf"] += g.bf ? 1.0 : 0.0;
    a.ctl["age"] += g.age_days;
    a.ctl["age_sq"] += g.age_days_sq;
    a.ctl["female"] += g.female ? 1.0 : 0.0;
    a.ctl["gap_msmt"] += g.gap_msmt;
    if (data.country == Country::philippines) a.ctl["season"] += g.season ? 1.0 : 0.0;
  }
  BaselinePath path;
  bool first = true;
  for (const auto& [t, a] : by_period) {
    const double n = a.n;
    if (first) {
      path.height0_cm = a.h0 / n;
      path.weight0_g = a.w0 / n;
      first = false;
    }
    BaselinePeriod per;
    per.protein_kcal = a.p / n;
    per.nonprotein_kcal = a.q / n;
    for (const auto& [name, v] : a.ctl) per.controls.emplace_back(name, v / n);
    path.periods.push_back(std::move(per));
  }
  return path;
}

InterventionScenario make_scenario(const ScenarioConfig& s, int days, int n_periods) {
  if (s.kind == "egg") return egg_scenario(days, n_periods, s.eggs_per_week);
  InterventionScenario sc;
  sc.protein_kcal_per_day = s.protein_kcal_per_day;
  sc.nonprotein_kcal_per_day = s.nonprotein_kcal_per_day;
  sc.days_per_period = days;
  sc.n_periods = n_periods;
  sc.schedule = s.schedule;
  sc.allow_negative = s.allow_negative;
  return sc;
}

}  // namespace

int cmd_sweep(const RunConfig& c, std::ostream& log) {
  c.validate({"panel", "prices"});
  const auto t0 = std::chrono::steady_clock::now();
  const auto prepared = prepare(c, c.model);
  const auto results = sweep_outcome(c, prepared.data, c.outcome);

  {
    auto out = open_output(c.out, "specs.csv");
    write_specs_csv(out, results, c.model, c.country);
  }
  const double scale = display_scale(c.outcome);
  {
    auto summary = open_output(c.out, "summary.csv");
    auto figure = open_output(c.out, "figure.csv");
    write_summary_header(summary);
    write_figure_header(figure);
    for (const auto& f : c.filters) {
      const auto filtered = filter_specs(results, f);
      for (const auto& name : nutrient_names(c.model)) {
        write_summary_row(summary, summarize(filtered, name, c.min_count, f.label()), scale);
        write_figure_csv(figure, figure_data(filtered, name), name, f.label());
      }
    }
  }

  json failures = json::array();
  for (const auto& r : results) {
    if (!r.ok()) failures.push_back({{"id", r.set_id}, {"status", to_string(r.status)}, {"message", r.message}});
  }
  json extra;
  extra["data"] = {{"panel_rows", prepared.panel_rows},
                   {"growth_rows", prepared.data.rows.size()},
                   {"excluded_periods", prepared.excluded},
                   {"protein_imputed", prepared.imputed.protein_imputed},
                   {"nonprotein_imputed", prepared.imputed.nonprotein_imputed}};
  extra["specs"] = status_counts(results);
  extra["failures"] = failures;
  write_manifest(c, "sweep", extra);

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  extra["wall_time_s"] = secs;
  log << extra.dump(2) << '\n';
  return kExitOk;
}

int cmd_counterfactual(const RunConfig& c, std::ostream& log) {
  const bool from_files = !c.data.height_specs.empty() || !c.data.weight_specs.empty();
  if (from_files) {
    c.validate({"height_specs", "weight_specs"});
  } else {
    c.validate({"panel", "prices"});
  }
  const int days = days_per_period(c.country);

  std::optional<PreparedData> prepared;
  std::vector<SpecResult> height, weight;
  if (from_files) {
    height = read_specs(c.data.height_specs);
    weight = read_specs(c.data.weight_specs);
  } else {
    prepared = prepare(c, c.model);
    height = sweep_outcome(c, prepared->data, Outcome::height);
    weight = sweep_outcome(c, prepared->data, Outcome::weight);
  }

  int n_periods = c.scenario.n_periods;
  BaselinePath baseline;
  if (prepared) {
    baseline = baseline_from(prepared->data);
    if (n_periods == 0) n_periods = static_cast<int>(baseline.periods.size());
  } else {
    if (n_periods == 0) throw ValidationError("scenario.n_periods is required when fits come from spec files");
    baseline.periods.resize(static_cast<std::size_t>(n_periods));
  }
  const auto scenario = make_scenario(c.scenario, days, n_periods);
  scenario.validate();

  const SpecResult* best_h = nullptr;
  const SpecResult* best_w = nullptr;
  std::vector<std::pair<Outcome, std::vector<SpecResult>>> predictions;
  std::vector<FilterCriteria> used(2);
  try {
    best_h = &select_best_spec(height);
    best_w = &select_best_spec(weight);
    predictions.emplace_back(Outcome::height, prediction_filter(height, c.min_count, &used[0]));
    predictions.emplace_back(Outcome::weight, prediction_filter(weight, c.min_count, &used[1]));
  } catch (const ValidationError& e) {
    log << "no qualifying specification: " << e.what() << '\n';
    return kExitNoSpec;
  }

  SimulationOptions so;
  so.cross_feedback = c.scenario.cross_feedback;
  const auto delta = simulate_intervention(*best_h->fit, *best_w->fit, baseline, scenario, so);
  {
    auto out = open_output(c.out, "counterfactual.csv");
    out << "period,increment_protein_kcal,increment_nonprotein_kcal,period_dh_cm,period_dw_g,cumulative_dh_cm,"
           "cumulative_dw_g\n";
    for (int t = 0; t < n_periods; ++t) {
      const auto i = static_cast<std::size_t>(t);
      const auto [ip, iq] = scenario.period_increment_kcal(t);
      out << t + 1 << ',' << csv::format_real(ip) << ',' << csv::format_real(iq) << ','
          << csv::format_real(delta.period_dh[i]) << ',' << csv::format_real(delta.period_dw[i]) << ','
          << csv::format_real(delta.cumulative_dh[i]) << ',' << csv::format_real(delta.cumulative_dw[i]) << '\n';
    }
  }
  {
    auto out = open_output(c.out, "median_prediction.csv");
    out << "outcome,coefficient,filter,n_specs,median_coef,increment_per_day,days_per_period,prediction\n";
    for (std::size_t k = 0; k < predictions.size(); ++k) {
      const auto& [outcome, filtered] = predictions[k];
      for (const auto& name : nutrient_names(c.model)) {
        const double inc = nutrient_increment(c.increments, name);
        const auto s = summarize(filtered, name, 0);
        const double pred = median_prediction(filtered, name, inc, days);
        out << to_string(outcome) << ',' << name << ',' << csv::escape(used[k].label()) << ',' << s.n_specs << ','
            << csv::format_real(s.p50) << ',' << csv::format_real(inc) << ',' << days << ','
            << csv::format_real(pred) << '\n';
      }
    }
  }

  json extra;
  extra["best_height_spec"] = best_h->set_id;
  extra["best_weight_spec"] = best_w->set_id;
  extra["n_periods"] = n_periods;
  write_manifest(c, "counterfactual", extra);
  log << extra.dump(2) << '\n';
  return kExitOk;
}

int cmd_countfit(const RunConfig& c, std::ostream& log) {
  c.validate({"panel"});
  const Panel panel = load_panel(c.data.panel, c.country);
  const auto windows = build_count_windows(panel, c.recall_scale);
  const auto battery = fit_window_battery(windows, c.count_criterion);
  {
    auto out = open_output(c.out, "battery.json");
    out << battery_to_json(battery) << '\n';
  }
  int degenerate = 0;
  json fams = json::array();
  for (const auto& w : battery.windows) {
    if (w.degenerate) ++degenerate;
    fams.push_back(w.fit ? std::string(to_string(w.fit->family)) : std::string("none"));
  }
  json extra{{"windows", battery.windows.size()}, {"degenerate", degenerate}, {"families", fams}};
  write_manifest(c, "countfit", extra);
  log << extra.dump(2) << '\n';
  return kExitOk;
}

int cmd_synth(const RunConfig& c, std::ostream& log) {
  c.validate({});
  StructuralParams p = c.synth;
  p.country = c.country;
  p.validate();
  const auto s = generate_panel(p, c.seed);
  {
    auto out = open_output(c.out, "panel.csv");
    write_panel(out, s.panel);
  }
  {
    auto out = open_output(c.out, "prices.csv");
    write_price_quotes(out, to_quotes(s.prices));
  }
  {
    p.seed = c.seed;
    auto out = open_output(c.out, "truth.json");
    out << truth_to_json(s, p) << '\n';
  }
  json extra{{"panel_rows", s.panel.size()}, {"children", s.truth.size()}, {"price_series", s.prices.size()}};
  write_manifest(c, "synth", extra);
  log << extra.dump(2) << '\n';
  return kExitOk;
}

int cmd_validate(const RunConfig& c, std::ostream& log) {
  std::vector<std::string> needs;
  for (const auto& [name, p] : {std::pair{"panel", c.data.panel}, std::pair{"prices", c.data.prices},
                                std::pair{"battery", c.data.battery}, std::pair{"height_specs", c.data.height_specs},
                                std::pair{"weight_specs", c.data.weight_specs}}) {
    if (!p.empty()) needs.emplace_back(name);
  }
  c.validate(needs);
  c.synth.validate();
  json report;
  if (!c.data.panel.empty()) report["panel_rows"] = load_panel(c.data.panel, c.country).size();
  if (!c.data.prices.empty()) {
    const UnitTable units = c.data.units.empty() ? UnitTable{} : UnitTable::load(c.data.units);
    PriceReport pr;
    report["price_series"] = preprocess_prices(load_price_quotes(c.data.prices), units, &pr).size();
    report["prices_dropped"] = pr.dropped_nonpositive + pr.dropped_outliers;
  }
  report["config_hash"] = config_hash(c);
  log << report.dump(2) << '\n';
  return kExitOk;
}

}  // namespace growthiv::cli
