#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace growthiv {

// A raw store quote before unit normalization.
struct PriceQuote {
  std::string item;
  std::string scope;              // community key or "national"
  int year = 0;
  int month = 1;                  // 1-12
  double price = 0.0;             // currency for `quantity` units
  double quantity = 1.0;
  std::string unit;
  std::string store;
};

// Normalized price: currency per 100 g (community series) or the deflated
// national price (Guatemala).
struct PriceSeries {
  std::string item;
  std::string scope;
  int month_index = 0;            // year * 12 + month - 1
  double unit_price = 0.0;

  friend bool operator==(const PriceSeries&, const PriceSeries&) = default;
};

// Grams per unit, looked up by (item, unit) first and then ("*", unit).
class UnitTable {
public:
  UnitTable();                    // g, 100g, kg, lb plus per-item piece weights
  void set(const std::string& item, const std::string& unit, double grams);
  std::optional<double> grams(const std::string& item, const std::string& unit) const;
  static UnitTable load(const std::filesystem::path& path);   // CSV item,unit,grams

private:
  std::map<std::pair<std::string, std::string>, double> grams_;
};

struct PriceReport {
  std::size_t dropped_nonpositive = 0;
  std::size_t dropped_outliers = 0;
  std::size_t interpolated = 0;
};

// Outlier band relative to the item-wide median quote.
inline constexpr double kOutlierLow = 0.1;
inline constexpr double kOutlierHigh = 10.0;

// Normalizes to currency per 100 g, drops non-positive quotes and outliers,
// averages stores, fills even months from both adjacent odd months, and
// returns series sorted by (item, scope, month). Unknown units throw.
std::vector<PriceSeries> preprocess_prices(const std::vector<PriceQuote>& quotes, const UnitTable& units,
                                           PriceReport* report = nullptr);

// Expresses normalized series as single-store 100 g quotes.
std::vector<PriceQuote> to_quotes(const std::vector<PriceSeries>& series);

std::vector<PriceQuote> parse_price_quotes(std::istream& in, std::string_view source = "<stream>");
std::vector<PriceQuote> load_price_quotes(const std::filesystem::path& path);
void write_price_quotes(std::ostream& out, const std::vector<PriceQuote>& quotes);

// Deflator index by year (CSV year,index).
using Deflator = std::map<int, double>;
Deflator parse_deflator(std::istream& in, std::string_view source = "<stream>");
Deflator load_deflator(const std::filesystem::path& path);

}  // namespace growthiv
