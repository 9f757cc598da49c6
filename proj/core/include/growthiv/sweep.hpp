#pragma once

#include "growthiv/design.hpp"
#include "growthiv/diagnostics.hpp"
#include "growthiv/estimators.hpp"
#include "growthiv/types.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace growthiv {

struct InstrumentSet {
  int id = 0;                     // 1-based position in the canonical enumeration
  std::vector<std::string> names;
  Country country = Country::guatemala;
  Model model = Model::protein_split;
  Outcome outcome = Outcome::height;
  int m() const { return static_cast<int>(names.size()); }
};

// Candidate instruments by role. Price names are instrument identifiers
// (e.g. "price_eggs", "price_eggs_lag").
struct InstrumentCatalog {
  std::vector<std::string> prices;
  static InstrumentCatalog defaults(Country c);
};

// Instrument families:
//  Guatemala  atole + 3..4 prices; atole, atole_dist + 2..4 prices; the same
//             two bases with the outcome's complementary second lag, and
//             with both second lags, each + 2..4 prices. The energy model
//             adds atole + 2 prices.
//  Philippines 4..6 prices; complementary second lag + 3..6 prices; both
//             second lags + 2..6 prices.
std::vector<InstrumentSet> enumerate_sets(Country country, Model model, Outcome outcome,
                                          const InstrumentCatalog& catalog);
std::vector<InstrumentSet> enumerate_sets(Country country, Model model, Outcome outcome);

enum class SpecStatus { ok, skipped_rank, skipped_underidentified, skipped_sample };
std::string_view to_string(SpecStatus s);
SpecStatus parse_spec_status(std::string_view s);

struct SpecResult {
  int set_id = 0;
  std::vector<std::string> instruments;
  std::optional<FitResult> fit;
  std::optional<DiagnosticsReport> diagnostics;
  int n_used = 0;
  SpecStatus status = SpecStatus::skipped_sample;
  std::string message;

  bool ok() const { return status == SpecStatus::ok; }
  bool exactly_identified() const { return ok() && !diagnostics->hansen_j.has_value(); }
  std::optional<double> hj_p() const;
};

struct SweepOptions {
  int workers = 1;
  bool hausman = true;
  bool keep_residuals = false;
};

// Estimates every set on its own maximal subsample. Failures are recorded
// per spec; results come back ordered by set id regardless of scheduling.
std::vector<SpecResult> run_sweep(const GrowthData& data, Model model, Outcome outcome,
                                  const std::vector<InstrumentSet>& sets, const SweepOptions& options = {});

// Single-spec kernel used by run_sweep.
SpecResult run_spec(const GrowthData& data, Model model, Outcome outcome, const InstrumentSet& set,
                    const SweepOptions& options = {});

struct FilterCriteria {
  bool overidentified_only = false;
  double min_cd = 0.0;
  double min_hj_p = 0.0;

  // "All IV", "All Over-Identified IV", "CD>3 P-val HJ>5", ...
  std::string label() const;

  // Accepts "all", "overid", or comma-separated "cd>3,hjp>0.05[,overid]".
  static FilterCriteria parse(std::string_view text);

  // The five table rows: all, over-identified, and HJ p > 0.05 with CD > 1, 3, 7.
  static std::vector<FilterCriteria> table_rows();
};

std::vector<SpecResult> filter_specs(const std::vector<SpecResult>& results, const FilterCriteria& criteria);

struct SweepSummary {
  std::string filter_label;
  std::string coefficient;
  int n_specs = 0;
  double p25 = 0.0;
  double p50 = 0.0;
  double p75 = 0.0;
  double pct_sig_pos = 0.0;
  double pct_sig_neg = 0.0;
  bool suppressed = true;
};

// Percentiles by linear interpolation; significance at |coef/se| > 1.96.
// Rows with n_specs <= min_count are suppressed.
SweepSummary summarize(const std::vector<SpecResult>& filtered, const std::string& coefficient, int min_count = 10,
                       const std::string& filter_label = "");

// Height coefficients are displayed in cm per 1000 kcal.
double display_scale(Outcome outcome);

struct FigureRow {
  double ln_cd = 0.0;
  double coef = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int set_id = 0;
};

// One row per spec with a positive CD, ordered by set id. `dropped`
// receives the number of specs skipped for a non-positive CD.
std::vector<FigureRow> figure_data(const std::vector<SpecResult>& filtered, const std::string& coefficient,
                                   std::size_t* dropped = nullptr);

// ---- CSV output -------------------------------------------------------

void write_specs_csv(std::ostream& out, const std::vector<SpecResult>& results, Model model, Country country);
std::vector<SpecResult> read_specs_csv(std::istream& in, std::string_view source = "<stream>");

void write_summary_header(std::ostream& out);
void write_summary_row(std::ostream& out, const SweepSummary& s, double scale);

void write_figure_header(std::ostream& out);
void write_figure_csv(std::ostream& out, const std::vector<FigureRow>& rows, const std::string& coefficient,
                      const std::string& filter_label);

}  // namespace growthiv
