#include "growthiv/prices.hpp"

#include "growthiv/csv.hpp"
#include "growthiv/error.hpp"
#include "growthiv/stats.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <tuple>

namespace growthiv {

UnitTable::UnitTable() {
  set("*", "g", 1.0);
  set("*", "100g", 100.0);
  set("*", "kg", 1000.0);
  set("*", "lb", 453.59237);
  set("eggs", "piece", 50.0);
  set("eggs", "dozen", 600.0);
  set("eggs", "hundred", 5000.0);
  set("tomatoes", "piece", 100.0);
  set("corn", "chupa", 375.0);
  set("fish", "piece", 40.0);
  set("fish", "pack", 100.0);
}

void UnitTable::set(const std::string& item, const std::string& unit, double grams) {
  if (!(grams > 0.0)) throw ValidationError("unit '" + unit + "' must weigh a positive number of grams");
  grams_[{item, unit}] = grams;
}

std::optional<double> UnitTable::grams(const std::string& item, const std::string& unit) const {
  if (auto it = grams_.find({item, unit}); it != grams_.end()) return it->second;
  if (auto it = grams_.find({"*", unit}); it != grams_.end()) return it->second;
  return std::nullopt;
}

UnitTable UnitTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open unit table '" + path.string() + "'");
  UnitTable t;
  std::vector<std::string> f;
  std::size_t line = 0;
  if (!csv::next_record(in, f, line) || f != std::vector<std::string>{"item", "unit", "grams"}) {
    throw ValidationError(path.string() + ": expected header item,unit,grams");
  }
  while (csv::next_record(in, f, line)) {
    if (f.size() != 3) throw ValidationError(path.string() + " row " + std::to_string(line) + ": expected 3 fields");
    const auto g = csv::parse_real(f[2]);
    if (!g) throw ValidationError(path.string() + " row " + std::to_string(line) + ": field 'grams' is empty");
    t.set(f[0], f[1], *g);
  }
  return t;
}

std::vector<PriceSeries> preprocess_prices(const std::vector<PriceQuote>& quotes, const UnitTable& units,
                                           PriceReport* report) {
  PriceReport rep;
  struct Normalized {
    const PriceQuote* q;
    double per100g;
  };
  std::vector<Normalized> norm;
  norm.reserve(quotes.size());
  for (const auto& q : quotes) {
    const auto g = units.grams(q.item, q.unit);
    if (!g) throw ValidationError("unknown unit '" + q.unit + "' for item '" + q.item + "'");
    if (!(q.price > 0.0) || !(q.quantity > 0.0)) {
      ++rep.dropped_nonpositive;
      continue;
    }
    norm.push_back({&q, q.price / (q.quantity * *g) * 100.0});
  }

  std::map<std::string, std::vector<double>> by_item;
  for (const auto& n : norm) by_item[n.q->item].push_back(n.per100g);
  std::map<std::string, double> item_median;
  for (auto& [item, values] : by_item) item_median[item] = stats::median(values);

  // (item, scope, month_index) -> store prices
  std::map<std::tuple<std::string, std::string, int>, std::vector<double>> cells;
  for (const auto& n : norm) {
    const double med = item_median[n.q->item];
    if (n.per100g < kOutlierLow * med || n.per100g > kOutlierHigh * med) {
      ++rep.dropped_outliers;
      continue;
    }
    if (n.q->month < 1 || n.q->month > 12) {
      throw ValidationError("price quote month " + std::to_string(n.q->month) + " outside 1-12");
    }
    cells[{n.q->item, n.q->scope, n.q->year * 12 + n.q->month - 1}].push_back(n.per100g);
  }

  std::map<std::tuple<std::string, std::string, int>, double> averaged;
  for (const auto& [key, values] : cells) {
    double s = 0.0;
    for (double v : values) s += v;
    averaged[key] = s / static_cast<double>(values.size());
  }

  // Even calendar months (Feb, Apr, ...) have month_index % 12 odd.
  std::vector<std::pair<std::tuple<std::string, std::string, int>, double>> fills;
  for (const auto& [key, value] : averaged) {
    const auto& [item, scope, month] = key;
    const int target = month + 1;
    if (((target % 12) + 12) % 12 % 2 != 1) continue;
    if (averaged.count({item, scope, target})) continue;
    auto next = averaged.find({item, scope, target + 1});
    if (next == averaged.end()) continue;
    fills.push_back({{item, scope, target}, 0.5 * (value + next->second)});
  }
  for (auto& [key, value] : fills) averaged.emplace(key, value);
  rep.interpolated = fills.size();

  std::vector<PriceSeries> out;
  out.reserve(averaged.size());
  for (const auto& [key, value] : averaged) {
    out.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), value});
  }
  if (report) *report = rep;
  return out;
}

std::vector<PriceQuote> to_quotes(const std::vector<PriceSeries>& series) {
  std::vector<PriceQuote> out;
  out.reserve(series.size());
  for (const auto& s : series) {
    const int year = s.month_index >= 0 ? s.month_index / 12 : (s.month_index - 11) / 12;
    out.push_back({s.item, s.scope, year, s.month_index - year * 12 + 1, s.unit_price, 1.0, "100g", "avg"});
  }
  return out;
}

std::vector<PriceQuote> parse_price_quotes(std::istream& in, std::string_view source) {
  static const std::vector<std::string> header{"item", "scope", "year", "month", "price", "quantity", "unit", "store"};
  std::vector<std::string> f;
  std::size_t line = 0;
  if (!csv::next_record(in, f, line) || f != header) {
    throw ValidationError(std::string(source) + ": expected header item,scope,year,month,price,quantity,unit,store");
  }
  std::vector<PriceQuote> out;
  while (csv::next_record(in, f, line)) {
    const std::string where = std::string(source) + " row " + std::to_string(line);
    if (f.size() != header.size()) throw ValidationError(where + ": expected 8 fields");
    PriceQuote q;
    std::size_t col = 0;
    try {
      q.item = f[0];
      q.scope = f[1];
      col = 2;
      q.year = static_cast<int>(csv::parse_integer(f[2]).value());
      col = 3;
      q.month = static_cast<int>(csv::parse_integer(f[3]).value_or(12));
      col = 4;
      q.price = csv::parse_real(f[4]).value_or(0.0);
      col = 5;
      q.quantity = csv::parse_real(f[5]).value_or(1.0);
      q.unit = f[6].empty() ? "100g" : f[6];
      q.store = f[7];
    } catch (const std::exception& e) {
      throw ValidationError(where + ": field '" + header[col] + "': " + e.what());
    }
    out.push_back(std::move(q));
  }
  return out;
}

std::vector<PriceQuote> load_price_quotes(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open price file '" + path.string() + "'");
  return parse_price_quotes(in, path.string());
}

void write_price_quotes(std::ostream& out, const std::vector<PriceQuote>& quotes) {
  out << "item,scope,year,month,price,quantity,unit,store\n";
  for (const auto& q : quotes) {
    out << csv::escape(q.item) << ',' << csv::escape(q.scope) << ',' << q.year << ',' << q.month << ','
        << csv::format_real(q.price) << ',' << csv::format_real(q.quantity) << ',' << csv::escape(q.unit) << ','
        << csv::escape(q.store) << '\n';
  }
}

Deflator parse_deflator(std::istream& in, std::string_view source) {
  std::vector<std::string> f;
  std::size_t line = 0;
  if (!csv::next_record(in, f, line) || f != std::vector<std::string>{"year", "index"}) {
    throw ValidationError(std::string(source) + ": expected header year,index");
  }
  Deflator d;
  while (csv::next_record(in, f, line)) {
    const std::string where = std::string(source) + " row " + std::to_string(line);
    if (f.size() != 2) throw ValidationError(where + ": expected 2 fields");
    try {
      const int year = static_cast<int>(csv::parse_integer(f[0]).value());
      const double idx = csv::parse_real(f[1]).value();
      if (!(idx > 0.0)) throw std::invalid_argument("must be positive");
      d[year] = idx;
    } catch (const std::exception& e) {
      throw ValidationError(where + ": " + e.what());
    }
  }
  return d;
}

Deflator load_deflator(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open deflator file '" + path.string() + "'");
  return parse_deflator(in, path.string());
}

}  // namespace growthiv
