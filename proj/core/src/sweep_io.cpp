#include "growthiv/csv.hpp"
#include "growthiv/error.hpp"
#include "growthiv/sweep.hpp"

#include <map>
#include <ostream>

namespace growthiv {

namespace {

std::string join(const std::vector<std::string>& v, char sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += sep;
    s += v[i];
  }
  return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::size_t pos = 0;
  while (true) {
    const auto next = s.find(sep, pos);
    out.push_back(s.substr(pos, next == std::string::npos ? std::string::npos : next - pos));
    if (next == std::string::npos) return out;
    pos = next + 1;
  }
}

void put_test(std::vector<std::string>& row, const std::optional<TestResult>& t) {
  if (!t) {
    row.insert(row.end(), 3, "");
    return;
  }
  row.push_back(csv::format_real(t->stat));
  row.push_back(std::to_string(t->df));
  row.push_back(csv::format_optional(t->p));
}

Method parse_method(std::string_view s) {
  for (auto m : {Method::ols, Method::iv_gmm, Method::liml}) {
    if (s == to_string(m)) return m;
  }
  throw ValidationError("unknown method '" + std::string(s) + "'");
}

}  // namespace

void write_specs_csv(std::ostream& out, const std::vector<SpecResult>& results, Model model, Country country) {
  std::vector<std::string> names = endogenous_names(model);
  const auto exog = exogenous_names(country);
  names.insert(names.end(), exog.begin(), exog.end());
  const auto endog = endogenous_names(model);

  std::vector<std::string> header{"id", "instruments", "status", "method", "n", "m", "n_clusters", "kappa", "dropped"};
  for (const auto& n : names) header.push_back("coef_" + n);
  for (const auto& n : names) header.push_back("se_" + n);
  for (const char* h : {"hj_stat", "hj_df", "hj_p", "underid_stat", "underid_df", "underid_p", "kp_wald_f"}) {
    header.emplace_back(h);
  }
  for (const auto& n : endog) header.push_back("ap_f_" + n);
  for (const char* h : {"hausman_stat", "hausman_df", "hausman_p", "hausman_ginv", "message"}) header.emplace_back(h);
  out << join(header, ',') << '\n';

  for (const auto& r : results) {
    std::vector<std::string> row;
    row.push_back(std::to_string(r.set_id));
    row.push_back(csv::escape(join(r.instruments, ';')));
    row.emplace_back(to_string(r.status));
    if (r.ok()) {
      const FitResult& f = *r.fit;
      const DiagnosticsReport& d = *r.diagnostics;
      row.emplace_back(to_string(f.method));
      row.push_back(std::to_string(f.n));
      row.push_back(std::to_string(f.m));
      row.push_back(std::to_string(f.n_clusters));
      row.push_back(csv::format_real(f.kappa));
      row.push_back(csv::escape(join(f.dropped_instruments, ';')));
      for (const auto& n : names) row.push_back(csv::format_real(f.coefficient(n)));
      for (const auto& n : names) row.push_back(f.has_vcov() ? csv::format_real(f.std_error(n)) : "");
      put_test(row, d.hansen_j);
      put_test(row, d.underid);
      row.push_back(csv::format_real(d.kp_wald_f));
      for (const auto& n : endog) row.push_back(csv::format_real(d.ap_f(n)));
      put_test(row, d.hausman);
      row.push_back(d.hausman ? (d.hausman->generalized_inverse ? "1" : "0") : "");
    } else {
      row.emplace_back("");
      row.push_back(std::to_string(r.n_used));
      row.push_back(std::to_string(r.instruments.size()));
      row.insert(row.end(), 3, "");
      row.insert(row.end(), 2 * names.size() + 7 + endog.size() + 4, "");
    }
    row.push_back(csv::escape(r.message));
    out << join(row, ',') << '\n';
  }
}

std::vector<SpecResult> read_specs_csv(std::istream& in, std::string_view source) {
  std::vector<std::string> header;
  std::size_t line = 0;
  if (!csv::next_record(in, header, line)) throw ValidationError(std::string(source) + ": empty specs file");
  std::map<std::string, std::size_t> col;
  std::vector<std::string> coef_names;
  std::vector<std::string> ap_names;
  for (std::size_t i = 0; i < header.size(); ++i) {
    col[header[i]] = i;
    if (header[i].rfind("coef_", 0) == 0) coef_names.push_back(header[i].substr(5));
    if (header[i].rfind("ap_f_", 0) == 0) ap_names.push_back(header[i].substr(5));
  }
  for (const char* need : {"id", "instruments", "status", "method", "kp_wald_f", "hj_p"}) {
    if (!col.count(need)) throw ValidationError(std::string(source) + ": missing column '" + need + "'");
  }

  std::vector<SpecResult> out;
  std::vector<std::string> f;
  while (csv::next_record(in, f, line)) {
    if (f.size() != header.size()) {
      throw ValidationError(std::string(source) + ": line " + std::to_string(line) + " has " +
                            std::to_string(f.size()) + " fields, expected " + std::to_string(header.size()));
    }
    auto get = [&](const std::string& name) -> const std::string& { return f[col.at(name)]; };
    auto real = [&](const std::string& name) { return csv::parse_real(get(name)); };
    auto integer = [&](const std::string& name) {
      auto v = csv::parse_integer(get(name));
      return v ? static_cast<int>(*v) : 0;
    };
    try {
      SpecResult r;
      r.set_id = integer("id");
      r.instruments = split(get("instruments"), ';');
      r.status = parse_spec_status(get("status"));
      r.n_used = integer("n");
      r.message = col.count("message") ? get("message") : "";
      if (r.ok()) {
        FitResult fit;
        fit.method = parse_method(get("method"));
        fit.names = coef_names;
        const auto k = static_cast<Eigen::Index>(coef_names.size());
        fit.coef.resize(k);
        fit.vcov = Matrix::Zero(k, k);
        bool have_se = true;
        for (Eigen::Index i = 0; i < k; ++i) {
          const auto& n = coef_names[static_cast<std::size_t>(i)];
          fit.coef(i) = real("coef_" + n).value_or(0.0);
          const auto se = col.count("se_" + n) ? real("se_" + n) : std::nullopt;
          if (se) {
            fit.vcov(i, i) = *se * *se;
          } else {
            have_se = false;
          }
        }
        if (!have_se) fit.vcov = Matrix();
        fit.n = r.n_used;
        fit.m = integer("m");
        fit.n_clusters = integer("n_clusters");
        fit.kappa = real("kappa").value_or(0.0);
        fit.dropped_instruments = split(get("dropped"), ';');
        DiagnosticsReport d;
        d.kp_wald_f = real("kp_wald_f").value_or(0.0);
        if (auto hs = real("hj_stat")) {
          TestResult t;
          t.stat = *hs;
          t.df = integer("hj_df");
          t.p = real("hj_p");
          if (t.df > 0) d.hansen_j = t;
        }
        d.underid.stat = real("underid_stat").value_or(0.0);
        d.underid.df = integer("underid_df");
        d.underid.p = real("underid_p");
        for (const auto& n : ap_names) d.ap_partial_f.emplace_back(n, real("ap_f_" + n).value_or(0.0));
        if (auto hs = real("hausman_stat")) {
          TestResult t;
          t.stat = *hs;
          t.df = integer("hausman_df");
          t.p = real("hausman_p");
          t.generalized_inverse = get("hausman_ginv") == "1";
          d.hausman = t;
        }
        r.fit = std::move(fit);
        r.diagnostics = std::move(d);
      }
      out.push_back(std::move(r));
    } catch (const std::invalid_argument& e) {
      throw ValidationError(std::string(source) + ": line " + std::to_string(line) + ": " + e.what());
    }
  }
  return out;
}

void write_summary_header(std::ostream& out) {
  out << "filter,coefficient,n_specs,p25,p50,p75,pct_sig_pos,pct_sig_neg,suppressed\n";
}

void write_summary_row(std::ostream& out, const SweepSummary& s, double scale) {
  out << csv::escape(s.filter_label) << ',' << s.coefficient << ',' << s.n_specs << ',';
  if (s.suppressed) {
    out << ",,,,,1\n";
    return;
  }
  out << csv::format_real(s.p25 * scale) << ',' << csv::format_real(s.p50 * scale) << ','
      << csv::format_real(s.p75 * scale) << ',' << csv::format_real(s.pct_sig_pos) << ','
      << csv::format_real(s.pct_sig_neg) << ",0\n";
}

void write_figure_header(std::ostream& out) { out << "filter,coefficient,set_id,ln_cd,coef,ci_low,ci_high\n"; }

void write_figure_csv(std::ostream& out, const std::vector<FigureRow>& rows, const std::string& coefficient,
                      const std::string& filter_label) {
  for (const auto& r : rows) {
    out << csv::escape(filter_label) << ',' << coefficient << ',' << r.set_id << ',' << csv::format_real(r.ln_cd)
        << ',' << csv::format_real(r.coef) << ',' << csv::format_real(r.ci_low) << ','
        << csv::format_real(r.ci_high) << '\n';
  }
}

}  // namespace growthiv
