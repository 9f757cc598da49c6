#pragma once

#include <span>
#include <vector>

namespace growthiv::stats {

// Upper-tail probability P(X > x) for X ~ chi-square(df). Returns 1 for x <= 0.
double chi2_sf(double x, double df);

// Upper-tail probability P(X > x) for X ~ F(df1, df2).
double f_sf(double x, double df1, double df2);

// Two-sided 5% normal critical value, used for significance counts and
// confidence intervals alike.
inline constexpr double kCritical95 = 1.96;

// Quantile by linear interpolation on sorted data: rank = (n - 1) * p.
double quantile_sorted(std::span<const double> sorted, double p);

// Sorts a copy and interpolates.
double quantile(std::vector<double> values, double p);

double median(std::vector<double> values);

// Squared Pearson correlation. Returns 0 when either side has zero variance.
double squared_correlation(std::span<const double> a, std::span<const double> b);

}  // namespace growthiv::stats
