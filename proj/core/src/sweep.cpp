#include "growthiv/sweep.hpp"

#include "growthiv/error.hpp"
#include "growthiv/stats.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

namespace growthiv {

std::string_view to_string(SpecStatus s) {
  switch (s) {
    case SpecStatus::ok: return "ok";
    case SpecStatus::skipped_rank: return "skipped_rank";
    case SpecStatus::skipped_underidentified: return "skipped_underidentified";
    case SpecStatus::skipped_sample: return "skipped_sample";
  }
  return "unknown";
}

SpecStatus parse_spec_status(std::string_view s) {
  for (auto st : {SpecStatus::ok, SpecStatus::skipped_rank, SpecStatus::skipped_underidentified,
                  SpecStatus::skipped_sample}) {
    if (s == to_string(st)) return st;
  }
  throw ValidationError("unknown spec status '" + std::string(s) + "'");
}

std::optional<double> SpecResult::hj_p() const {
  if (!ok() || !diagnostics->hansen_j) return std::nullopt;
  return diagnostics->hansen_j->p;
}

SpecResult run_spec(const GrowthData& data, Model model, Outcome outcome, const InstrumentSet& set,
                    const SweepOptions& options) {
  SpecResult r;
  r.set_id = set.id;
  r.instruments = set.names;
  DesignMatrices d = build_design(data, model, outcome, set.names);
  r.n_used = static_cast<int>(d.n());
  const int k1 = d.k_endog();
  if (d.m() < k1) {
    r.status = SpecStatus::skipped_underidentified;
    r.message = "m < k1 before pruning";
    return r;
  }
  std::vector<int> dense;
  const int g = d.n() > 0 ? dense_clusters(d.cluster_ids, dense) : 0;
  if (d.n() <= k1 + d.k_exog() + d.m() || g < 2) {
    r.status = SpecStatus::skipped_sample;
    r.message = "insufficient rows or clusters";
    return r;
  }
  try {
    std::vector<std::string> dropped;
    DesignMatrices p = prune_instruments(d, &dropped);
    if (p.m() < k1) {
      r.status = SpecStatus::skipped_underidentified;
      r.message = "m < k1 after dropping redundant instruments";
      return r;
    }
    FitResult fit = p.m() == k1 ? fit_iv_gmm(p) : fit_liml(p);
    fit.dropped_instruments = dropped;
    std::optional<FitResult> ols;
    if (options.hausman) ols = fit_ols(p);
    DiagnosticsReport diag = diagnose(p, fit, ols ? &*ols : nullptr);
    if (!options.keep_residuals) fit.residuals = Vector();
    r.fit = std::move(fit);
    r.diagnostics = std::move(diag);
    r.status = SpecStatus::ok;
  } catch (const RankError& e) {
    r.status = SpecStatus::skipped_rank;
    r.message = e.what();
  } catch (const NumericalError& e) {
    r.status = SpecStatus::skipped_rank;
    r.message = e.what();
  } catch (const ValidationError& e) {
    r.status = SpecStatus::skipped_underidentified;
    r.message = e.what();
  }
  return r;
}

std::vector<SpecResult> run_sweep(const GrowthData& data, Model model, Outcome outcome,
                                  const std::vector<InstrumentSet>& sets, const SweepOptions& options) {
  if (sets.empty()) throw ValidationError("run_sweep: empty instrument-set list");
  std::vector<SpecResult> out(sets.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    while (!failed.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= sets.size()) return;
      try {
        out[i] = run_spec(data, model, outcome, sets[i], options);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
        return;
      }
    }
  };
  const int workers = std::max(1, std::min<int>(options.workers, static_cast<int>(sets.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  std::stable_sort(out.begin(), out.end(), [](const SpecResult& a, const SpecResult& b) { return a.set_id < b.set_id; });
  return out;
}

// ---- filtering --------------------------------------------------------

namespace {

std::string trim_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

std::string lower(std::string_view s) {
  std::string r(s);
  for (auto& c : r) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return r;
}

std::string strip(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::string FilterCriteria::label() const {
  if (min_cd <= 0.0 && min_hj_p <= 0.0) return overidentified_only ? "All Over-Identified IV" : "All IV";
  std::string s;
  if (min_cd > 0.0) s = "CD>" + trim_number(min_cd);
  if (min_hj_p > 0.0) {
    if (!s.empty()) s += ' ';
    s += "P-val HJ>" + trim_number(min_hj_p * 100.0);
  } else if (overidentified_only) {
    s += " Over-Identified";
  }
  return s;
}

FilterCriteria FilterCriteria::parse(std::string_view text) {
  FilterCriteria c;
  const std::string t = lower(strip(text));
  if (t.empty() || t == "all") return c;
  std::size_t pos = 0;
  while (pos <= t.size()) {
    const auto comma = t.find(',', pos);
    const std::string part = strip(std::string_view(t).substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
    pos = comma == std::string::npos ? t.size() + 1 : comma + 1;
    if (part.empty()) continue;
    if (part == "overid") {
      c.overidentified_only = true;
      continue;
    }
    const auto gt = part.find('>');
    if (gt == std::string::npos) throw ValidationError("bad filter term '" + part + "'");
    const std::string key = strip(std::string_view(part).substr(0, gt));
    const std::string val = strip(std::string_view(part).substr(gt + 1));
    double v = 0.0;
    try {
      std::size_t used = 0;
      v = std::stod(val, &used);
      if (used != val.size()) throw std::invalid_argument(val);
    } catch (const std::exception&) {
      throw ValidationError("bad filter value in '" + part + "'");
    }
    if (key == "cd") {
      c.min_cd = v;
    } else if (key == "hjp") {
      if (v < 0.0 || v >= 1.0) throw ValidationError("hjp threshold must lie in [0,1)");
      c.min_hj_p = v;
    } else {
      throw ValidationError("unknown filter key '" + key + "'");
    }
  }
  return c;
}

std::vector<FilterCriteria> FilterCriteria::table_rows() {
  return {{false, 0.0, 0.0}, {true, 0.0, 0.0}, {true, 1.0, 0.05}, {true, 3.0, 0.05}, {true, 7.0, 0.05}};
}

std::vector<SpecResult> filter_specs(const std::vector<SpecResult>& results, const FilterCriteria& c) {
  std::vector<SpecResult> out;
  const bool need_hj = c.overidentified_only || c.min_hj_p > 0.0;
  for (const auto& r : results) {
    if (!r.ok()) continue;
    const auto& d = *r.diagnostics;
    if (c.min_cd > 0.0 && !(d.kp_wald_f > c.min_cd)) continue;
    if (need_hj) {
      if (!d.hansen_j || !d.hansen_j->p) continue;
      if (c.min_hj_p > 0.0 && !(*d.hansen_j->p > c.min_hj_p)) continue;
    }
    out.push_back(r);
  }
  return out;
}

SweepSummary summarize(const std::vector<SpecResult>& filtered, const std::string& coefficient, int min_count,
                       const std::string& filter_label) {
  SweepSummary s;
  s.filter_label = filter_label;
  s.coefficient = coefficient;
  std::vector<double> values;
  int pos = 0;
  int neg = 0;
  for (const auto& r : filtered) {
    if (!r.ok()) continue;
    const int i = r.fit->index_of(coefficient);
    if (i < 0) throw ValidationError("coefficient '" + coefficient + "' missing from spec " + std::to_string(r.set_id));
    const double b = r.fit->coef(i);
    const double se = r.fit->std_error(coefficient);
    values.push_back(b);
    if (se > 0.0 && std::isfinite(se)) {
      if (b / se > stats::kCritical95) ++pos;
      if (b / se < -stats::kCritical95) ++neg;
    }
  }
  s.n_specs = static_cast<int>(values.size());
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  s.p25 = stats::quantile_sorted(values, 0.25);
  s.p50 = stats::quantile_sorted(values, 0.50);
  s.p75 = stats::quantile_sorted(values, 0.75);
  s.pct_sig_pos = 100.0 * pos / s.n_specs;
  s.pct_sig_neg = 100.0 * neg / s.n_specs;
  s.suppressed = s.n_specs <= min_count;
  return s;
}

double display_scale(Outcome outcome) { return outcome == Outcome::height ? 1000.0 : 1.0; }

std::vector<FigureRow> figure_data(const std::vector<SpecResult>& filtered, const std::string& coefficient,
                                   std::size_t* dropped) {
  std::vector<FigureRow> rows;
  std::size_t skipped = 0;
  for (const auto& r : filtered) {
    if (!r.ok()) continue;
    const double cd = r.diagnostics->kp_wald_f;
    if (!(cd > 0.0) || !std::isfinite(cd)) {
      ++skipped;
      continue;
    }
    FigureRow f;
    f.set_id = r.set_id;
    f.ln_cd = std::log(cd);
    f.coef = r.fit->coefficient(coefficient);
    const double se = r.fit->std_error(coefficient);
    f.ci_low = f.coef - stats::kCritical95 * se;
    f.ci_high = f.coef + stats::kCritical95 * se;
    rows.push_back(f);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const FigureRow& a, const FigureRow& b) { return a.set_id < b.set_id; });
  if (dropped) *dropped = skipped;
  return rows;
}

}  // namespace growthiv
