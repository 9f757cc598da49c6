#include "growthiv/cli/config.hpp"

#include "growthiv/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace growthiv::cli {

namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void bad(const std::string& source, const std::string& what) {
  throw ValidationError(source + ": " + what);
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where,
                const std::string& source) {
  if (!j.is_object()) bad(source, "'" + where + "' must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) bad(source, "unknown key '" + where + "." + k + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& source) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    bad(source, std::string("bad value for '") + key + "'");
  }
}

void read_path(const json& j, const char* key, std::filesystem::path& out, const std::string& source) {
  std::string s;
  if (!j.contains(key)) return;
  read(j, key, s, source);
  out = s;
}

std::string filter_text(const FilterCriteria& c) {
  std::string s;
  auto add = [&](const std::string& part) {
    if (!s.empty()) s += ',';
    s += part;
  };
  auto num = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  if (c.min_cd > 0.0) add("cd>" + num(c.min_cd));
  if (c.min_hj_p > 0.0) add("hjp>" + num(c.min_hj_p));
  if (c.overidentified_only) add("overid");
  return s.empty() ? "all" : s;
}

void read_rule(const json& j, InputRule& r, const std::string& where, const std::string& source) {
  check_keys(j, {"a0", "a_price", "a_mu", "a_comp", "noise_sd", "meas_err_sd"}, where, source);
  read(j, "a0", r.a0, source);
  read(j, "a_price", r.a_price, source);
  read(j, "a_mu", r.a_mu, source);
  read(j, "a_comp", r.a_comp, source);
  read(j, "noise_sd", r.noise_sd, source);
  read(j, "meas_err_sd", r.meas_err_sd, source);
}

json rule_json(const InputRule& r) {
  return json{{"a0", r.a0},         {"a_price", r.a_price},   {"a_mu", r.a_mu},
              {"a_comp", r.a_comp}, {"noise_sd", r.noise_sd}, {"meas_err_sd", r.meas_err_sd}};
}

void read_synth(const json& j, StructuralParams& p, const std::string& source) {
  check_keys(j,
             {"alpha", "sigma", "gamma", "beta0_prot", "beta0_nonprot", "delta0_prot", "delta0_nonprot",
              "strict_assumption2", "beta_gap", "beta_diarrhea", "beta_bf", "mu_mean", "mu_sd", "eps_h_sd",
              "eps_w_sd", "protein", "nonprotein", "price_process", "atole_protein_kcal_day",
              "fresco_nonprotein_kcal_day", "diarrhea_rate", "n_children", "n_periods", "n_communities",
              "first_age_days", "gap_days", "gap_jitter_days", "birth_year_min", "birth_year_max",
              "missing_intake_prob"},
             "synth", source);
  read(j, "alpha", p.alpha, source);
  read(j, "sigma", p.sigma, source);
  read(j, "gamma", p.gamma, source);
  read(j, "beta0_prot", p.beta0_prot, source);
  read(j, "beta0_nonprot", p.beta0_nonprot, source);
  read(j, "delta0_prot", p.delta0_prot, source);
  read(j, "delta0_nonprot", p.delta0_nonprot, source);
  read(j, "strict_assumption2", p.strict_assumption2, source);
  read(j, "beta_gap", p.beta_gap, source);
  read(j, "beta_diarrhea", p.beta_diarrhea, source);
  read(j, "beta_bf", p.beta_bf, source);
  read(j, "mu_mean", p.mu_mean, source);
  read(j, "mu_sd", p.mu_sd, source);
  read(j, "eps_h_sd", p.eps_h_sd, source);
  read(j, "eps_w_sd", p.eps_w_sd, source);
  if (j.contains("protein")) read_rule(j["protein"], p.protein, "synth.protein", source);
  if (j.contains("nonprotein")) read_rule(j["nonprotein"], p.nonprotein, "synth.nonprotein", source);
  if (j.contains("price_process")) {
    p.price_process.clear();
    for (const auto& e : j["price_process"]) {
      check_keys(e, {"base", "rho", "sd"}, "synth.price_process[]", source);
      PriceProcess pp;
      read(e, "base", pp.base, source);
      read(e, "rho", pp.rho, source);
      read(e, "sd", pp.sd, source);
      p.price_process.push_back(pp);
    }
  }
  read(j, "atole_protein_kcal_day", p.atole_protein_kcal_day, source);
  read(j, "fresco_nonprotein_kcal_day", p.fresco_nonprotein_kcal_day, source);
  read(j, "diarrhea_rate", p.diarrhea_rate, source);
  read(j, "n_children", p.n_children, source);
  read(j, "n_periods", p.n_periods, source);
  read(j, "n_communities", p.n_communities, source);
  read(j, "first_age_days", p.first_age_days, source);
  read(j, "gap_days", p.gap_days, source);
  read(j, "gap_jitter_days", p.gap_jitter_days, source);
  read(j, "birth_year_min", p.birth_year_min, source);
  read(j, "birth_year_max", p.birth_year_max, source);
  read(j, "missing_intake_prob", p.missing_intake_prob, source);
}

json synth_json(const StructuralParams& p) {
  json pp = json::array();
  for (const auto& e : p.price_process) pp.push_back({{"base", e.base}, {"rho", e.rho}, {"sd", e.sd}});
  return json{{"alpha", p.alpha},
              {"sigma", p.sigma},
              {"gamma", p.gamma},
              {"beta0_prot", p.beta0_prot},
              {"beta0_nonprot", p.beta0_nonprot},
              {"delta0_prot", p.delta0_prot},
              {"delta0_nonprot", p.delta0_nonprot},
              {"strict_assumption2", p.strict_assumption2},
              {"beta_gap", p.beta_gap},
              {"beta_diarrhea", p.beta_diarrhea},
              {"beta_bf", p.beta_bf},
              {"mu_mean", p.mu_mean},
              {"mu_sd", p.mu_sd},
              {"eps_h_sd", p.eps_h_sd},
              {"eps_w_sd", p.eps_w_sd},
              {"protein", rule_json(p.protein)},
              {"nonprotein", rule_json(p.nonprotein)},
              {"price_process", pp},
              {"atole_protein_kcal_day", p.atole_protein_kcal_day},
              {"fresco_nonprotein_kcal_day", p.fresco_nonprotein_kcal_day},
              {"diarrhea_rate", p.diarrhea_rate},
              {"n_children", p.n_children},
              {"n_periods", p.n_periods},
              {"n_communities", p.n_communities},
              {"first_age_days", p.first_age_days},
              {"gap_days", p.gap_days},
              {"gap_jitter_days", p.gap_jitter_days},
              {"birth_year_min", p.birth_year_min},
              {"birth_year_max", p.birth_year_max},
              {"missing_intake_prob", p.missing_intake_prob}};
}

}  // namespace

void RunConfig::validate(const std::vector<std::string>& needs) const {
  if (workers < 1) throw ValidationError("workers must be >= 1");
  if (min_count < 0) throw ValidationError("sweep.min_count must be >= 0");
  if (max_sets < 0) throw ValidationError("sweep.max_sets must be >= 0");
  if (!(recall_scale > 0.0)) throw ValidationError("countfit.recall_scale must be positive");
  auto need = [&](const std::string& name, const std::filesystem::path& p) {
    if (std::find(needs.begin(), needs.end(), name) == needs.end()) return;
    if (p.empty()) throw ValidationError("missing required path data." + name);
    if (!std::filesystem::exists(p)) throw ValidationError("file not found: " + p.string());
  };
  need("panel", data.panel);
  need("prices", data.prices);
  need("battery", data.battery);
  need("height_specs", data.height_specs);
  need("weight_specs", data.weight_specs);
  for (const auto& [name, p] : {std::pair{"units", data.units}, std::pair{"deflator", data.deflator}}) {
    if (!p.empty() && !std::filesystem::exists(p)) throw ValidationError("file not found: " + p.string());
  }
  if (std::find(needs.begin(), needs.end(), "battery_optional") != needs.end() && !data.battery.empty() &&
      !std::filesystem::exists(data.battery)) {
    throw ValidationError("file not found: " + data.battery.string());
  }
}

RunConfig parse_config(const std::string& text, const std::string& source) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    bad(source, std::string("malformed JSON: ") + e.what());
  }
  if (root.is_object() && root.contains("manifest_version")) {
    if (!root.contains("config")) bad(source, "manifest without a config member");
    root = root["config"];
  }
  check_keys(root,
             {"country", "model", "outcome", "data", "filters", "sweep", "counterfactual", "countfit", "synth",
              "workers", "seed", "out"},
             "config", source);

  RunConfig c;
  try {
    std::string s;
    if (root.contains("country")) {
      read(root, "country", s, source);
      c.country = parse_country(s);
    }
    if (root.contains("model")) {
      read(root, "model", s, source);
      c.model = parse_model(s);
    }
    if (root.contains("outcome")) {
      read(root, "outcome", s, source);
      c.outcome = parse_outcome(s);
    }
    c.synth = StructuralParams::defaults(c.country);
    if (root.contains("data")) {
      const auto& d = root["data"];
      check_keys(d, {"panel", "prices", "units", "deflator", "battery", "height_specs", "weight_specs"}, "data",
                 source);
      read_path(d, "panel", c.data.panel, source);
      read_path(d, "prices", c.data.prices, source);
      read_path(d, "units", c.data.units, source);
      read_path(d, "deflator", c.data.deflator, source);
      read_path(d, "battery", c.data.battery, source);
      read_path(d, "height_specs", c.data.height_specs, source);
      read_path(d, "weight_specs", c.data.weight_specs, source);
    }
    if (root.contains("filters")) {
      std::vector<std::string> f;
      read(root, "filters", f, source);
      c.filters.clear();
      for (const auto& t : f) c.filters.push_back(FilterCriteria::parse(t));
    }
    if (root.contains("sweep")) {
      const auto& sw = root["sweep"];
      check_keys(sw, {"min_count", "max_sets", "hausman"}, "sweep", source);
      read(sw, "min_count", c.min_count, source);
      read(sw, "max_sets", c.max_sets, source);
      read(sw, "hausman", c.hausman, source);
    }
    if (root.contains("counterfactual")) {
      const auto& cf = root["counterfactual"];
      check_keys(cf, {"scenario", "median_increments"}, "counterfactual", source);
      if (cf.contains("scenario")) {
        const auto& sc = cf["scenario"];
        check_keys(sc,
                   {"kind", "eggs_per_week", "protein_kcal_per_day", "nonprotein_kcal_per_day", "n_periods",
                    "schedule", "allow_negative", "cross_feedback"},
                   "counterfactual.scenario", source);
        read(sc, "kind", c.scenario.kind, source);
        if (c.scenario.kind != "egg" && c.scenario.kind != "custom") {
          bad(source, "scenario kind must be 'egg' or 'custom'");
        }
        read(sc, "eggs_per_week", c.scenario.eggs_per_week, source);
        read(sc, "protein_kcal_per_day", c.scenario.protein_kcal_per_day, source);
        read(sc, "nonprotein_kcal_per_day", c.scenario.nonprotein_kcal_per_day, source);
        read(sc, "n_periods", c.scenario.n_periods, source);
        read(sc, "schedule", c.scenario.schedule, source);
        read(sc, "allow_negative", c.scenario.allow_negative, source);
        read(sc, "cross_feedback", c.scenario.cross_feedback, source);
        if (c.scenario.n_periods < 0) bad(source, "scenario n_periods must be >= 0");
      }
      if (cf.contains("median_increments")) {
        const auto& mi = cf["median_increments"];
        check_keys(mi, {"energy_kcal", "protein_g", "nonprotein_kcal"}, "counterfactual.median_increments",
                   source);
        read(mi, "energy_kcal", c.increments.energy_kcal, source);
        read(mi, "protein_g", c.increments.protein_g, source);
        read(mi, "nonprotein_kcal", c.increments.nonprotein_kcal, source);
      }
    }
    if (root.contains("countfit")) {
      const auto& cf = root["countfit"];
      check_keys(cf, {"criterion", "recall_scale"}, "countfit", source);
      std::string crit = "by_r2";
      read(cf, "criterion", crit, source);
      if (crit == "by_r2") {
        c.count_criterion = SelectionCriterion::by_r2;
      } else if (crit == "by_bic") {
        c.count_criterion = SelectionCriterion::by_bic;
      } else {
        bad(source, "countfit.criterion must be 'by_r2' or 'by_bic'");
      }
      read(cf, "recall_scale", c.recall_scale, source);
    }
    if (root.contains("synth")) read_synth(root["synth"], c.synth, source);
    read(root, "workers", c.workers, source);
    read(root, "seed", c.seed, source);
    read_path(root, "out", c.out, source);
  } catch (const ValidationError&) {
    throw;
  } catch (const Error& e) {
    bad(source, e.what());
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string config_to_json(const RunConfig& c) {
  json j;
  j["country"] = std::string(to_string(c.country));
  j["model"] = std::string(to_string(c.model));
  j["outcome"] = std::string(to_string(c.outcome));
  j["data"] = {{"panel", c.data.panel.string()},
               {"prices", c.data.prices.string()},
               {"units", c.data.units.string()},
               {"deflator", c.data.deflator.string()},
               {"battery", c.data.battery.string()},
               {"height_specs", c.data.height_specs.string()},
               {"weight_specs", c.data.weight_specs.string()}};
  json filters = json::array();
  for (const auto& f : c.filters) filters.push_back(filter_text(f));
  j["filters"] = filters;
  j["sweep"] = {{"min_count", c.min_count}, {"max_sets", c.max_sets}, {"hausman", c.hausman}};
  j["counterfactual"] = {
      {"scenario",
       {{"kind", c.scenario.kind},
        {"eggs_per_week", c.scenario.eggs_per_week},
        {"protein_kcal_per_day", c.scenario.protein_kcal_per_day},
        {"nonprotein_kcal_per_day", c.scenario.nonprotein_kcal_per_day},
        {"n_periods", c.scenario.n_periods},
        {"schedule", c.scenario.schedule},
        {"allow_negative", c.scenario.allow_negative},
        {"cross_feedback", c.scenario.cross_feedback}}},
      {"median_increments",
       {{"energy_kcal", c.increments.energy_kcal},
        {"protein_g", c.increments.protein_g},
        {"nonprotein_kcal", c.increments.nonprotein_kcal}}}};
  j["countfit"] = {{"criterion", c.count_criterion == SelectionCriterion::by_bic ? "by_bic" : "by_r2"},
                   {"recall_scale", c.recall_scale}};
  j["synth"] = synth_json(c.synth);
  j["workers"] = c.workers;
  j["seed"] = c.seed;
  j["out"] = c.out.string();
  return j.dump(2);
}

std::string config_hash(const RunConfig& c) {
  // Neither the worker count nor the output directory affects the results,
  // so both are left out of the hash.
  RunConfig copy = c;
  copy.workers = 1;
  copy.out.clear();
  const std::string text = config_to_json(copy);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace growthiv::cli
