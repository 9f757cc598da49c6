#include "growthiv/cli/commands.hpp"

#include "growthiv/error.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <ostream>
#include <sstream>

namespace growthiv::cli {

namespace {

using json = nlohmann::ordered_json;

struct Flags {
  std::string config;
  std::string data;
  std::string prices;
  std::string country;
  std::string model;
  std::string outcome;
  std::vector<std::string> filters;
  int workers = 0;
  std::optional<std::uint64_t> seed;
  std::string out;
};

// Flags override the file; the merged document goes through the same parser
// so both paths share validation.
RunConfig merge(const Flags& f) {
  json j = json::object();
  std::string source = "<flags>";
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    if (!in) throw ValidationError("cannot open config file: " + f.config);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
      j = json::parse(ss.str());
    } catch (const json::exception& e) {
      throw ValidationError(f.config + ": malformed JSON: " + e.what());
    }
    if (j.is_object() && j.contains("manifest_version") && j.contains("config")) j = j["config"];
    source = f.config;
  }
  if (!j.is_object()) throw ValidationError(source + ": config must be a JSON object");
  if (!f.data.empty()) j["data"]["panel"] = f.data;
  if (!f.prices.empty()) j["data"]["prices"] = f.prices;
  if (!f.country.empty()) j["country"] = f.country;
  if (!f.model.empty()) j["model"] = f.model;
  if (!f.outcome.empty()) j["outcome"] = f.outcome;
  if (!f.filters.empty()) j["filters"] = f.filters;
  if (f.workers > 0) j["workers"] = f.workers;
  if (f.seed) j["seed"] = *f.seed;
  if (!f.out.empty()) j["out"] = f.out;
  return parse_config(j.dump(), source);
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Instrumental-variable growth production functions"};
  app.name("growthiv");
  app.require_subcommand(1);

  Flags flags;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "JSON config file or run manifest");
    sub->add_option("--data", flags.data, "Panel CSV");
    sub->add_option("--prices", flags.prices, "Price quotes CSV");
    sub->add_option("--country", flags.country, "guatemala | philippines");
    sub->add_option("--model", flags.model, "energy | protein_split");
    sub->add_option("--outcome", flags.outcome, "height | weight");
    sub->add_option("--filter", flags.filters, "Filter row, e.g. \"cd>3,hjp>0.05\" (repeatable)");
    sub->add_option("--workers", flags.workers, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed", flags.seed, "Random seed");
    sub->add_option("--out", flags.out, "Output directory");
  };
  struct Sub {
    const char* name;
    const char* help;
    int (*fn)(const RunConfig&, std::ostream&);
  };
  const Sub subs[] = {
      {"sweep", "Estimate every instrument set and summarize", &cmd_sweep},
      {"counterfactual", "Simulate a dietary intervention", &cmd_counterfactual},
      {"countfit", "Fit the diarrhea count-model battery", &cmd_countfit},
      {"synth", "Generate a synthetic panel", &cmd_synth},
      {"validate", "Check a config and its inputs", &cmd_validate},
  };
  std::vector<CLI::App*> apps;
  for (const auto& s : subs) {
    auto* sub = app.add_subcommand(s.name, s.help);
    add_common(sub);
    apps.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitValidation;
  }

  for (std::size_t i = 0; i < apps.size(); ++i) {
    if (!apps[i]->parsed()) continue;
    try {
      const RunConfig config = merge(flags);
      return subs[i].fn(config, out);
    } catch (const ValidationError& e) {
      err << "error: " << e.what() << '\n';
      return kExitValidation;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return kExitFailure;
    }
  }
  err << app.help();
  return kExitValidation;
}

}  // namespace growthiv::cli
