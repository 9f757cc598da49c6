#pragma once

#include "growthiv/growth.hpp"
#include "growthiv/linalg.hpp"
#include "growthiv/panel.hpp"

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace growthiv {

enum class CountFamily { poisson, negbin, zip, zinb };

std::string_view to_string(CountFamily f);
CountFamily parse_count_family(std::string_view s);
bool has_dispersion(CountFamily f);
bool is_zero_inflated(CountFamily f);

struct CountDataset {
  std::vector<int> y;
  linalg::Matrix x;
  std::vector<std::string> names;
  std::string window_label;
  std::vector<std::string> row_ids;   // optional, for bookkeeping

  Eigen::Index n() const { return x.rows(); }
  void validate() const;
};

struct CountFit {
  CountFamily family = CountFamily::poisson;
  std::vector<std::string> names;
  linalg::Vector coef;
  std::optional<double> alpha;            // NB2 dispersion, variance mu + alpha mu^2
  std::optional<double> inflation_logit;  // zero-inflation intercept
  linalg::Vector std_errors;              // observed-information diagonal, same layout as parameters()
  double loglik = 0.0;
  double bic = 0.0;
  double r2_pred = 0.0;
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;             // infinity norm of the score at the reported optimum
  int n = 0;

  int n_parameters() const;
  double inflation_probability() const;   // 0 when not zero-inflated

  // [beta..., log alpha (NB families), inflation logit (ZI families)]
  linalg::Vector parameters() const;
};

struct CountFitOptions {
  int max_iterations = 100;
  double gradient_tol = 1e-8;             // on the mean score
  double separation_bound = 30.0;         // |beta * column RMS| beyond this signals separation
};

// Maximum likelihood with log link. Throws NumericalError when the data are
// separated (e.g. all counts zero).
CountFit fit_count(const CountDataset& data, CountFamily family, const CountFitOptions& options = {});

double count_pmf(CountFamily family, int y, double mu, double alpha = 0.0, double inflation_prob = 0.0);
double count_log_pmf(CountFamily family, int y, double mu, double alpha = 0.0, double inflation_prob = 0.0);

// Log-likelihood at a packed parameter vector (layout of CountFit::parameters()).
double count_loglik(CountFamily family, const linalg::Vector& theta, const CountDataset& data);
linalg::Vector count_score(CountFamily family, const linalg::Vector& theta, const CountDataset& data);

// Expected count mu (1 - pi) for one covariate row.
double predict_mean(const CountFit& fit, const linalg::Vector& row);
std::vector<double> predict_means(const CountFit& fit, const linalg::Matrix& x);

// Named covariates; "intercept" defaults to 1 when not given. The
// prediction is clamped to [0, clamp_max].
double predict_days(const CountFit& fit, const std::vector<std::pair<std::string, double>>& covariates,
                    double clamp_max);

struct ModelSelection {
  std::size_t best_by_bic = 0;
  std::size_t best_by_r2 = 0;
  std::vector<double> r2;                 // per fit; holdout when given
};

// Non-converged fits are ignored; ties resolve to the earlier family.
ModelSelection select_model(const std::vector<CountFit>& fits, const CountDataset* holdout = nullptr);

enum class SelectionCriterion { by_r2, by_bic };

struct BatteryEntry {
  std::string window_label;
  std::optional<CountFit> fit;            // the selected family
  bool degenerate = false;
  std::string message;
};

struct CountBattery {
  SelectionCriterion criterion = SelectionCriterion::by_r2;
  std::vector<std::string> covariates;
  std::vector<BatteryEntry> windows;
};

// Fits every family per window and keeps the selected one. Windows that
// cannot be fitted are flagged degenerate; the others proceed.
CountBattery fit_window_battery(const std::vector<CountDataset>& windows,
                                SelectionCriterion criterion = SelectionCriterion::by_r2,
                                const std::vector<CountFamily>& families = {CountFamily::poisson, CountFamily::negbin,
                                                                            CountFamily::zip, CountFamily::zinb});

std::string battery_to_json(const CountBattery& battery);
CountBattery battery_from_json(std::string_view text);

// ---- windows from a panel ---------------------------------------------

inline constexpr int kCountWindows = 12;        // 2-month windows from birth to 24 months
inline constexpr int kCountWindowDays = 61;

int count_window_of_age(int age_days);
std::string count_window_label(int w);

// Covariate layout: intercept, the child's recall days in each 2-month
// slot, the community average recall for the focal slot, female, and
// birth-order dummies (2-3, 4+). Missing slots take the child's mean over
// observed slots; recall days are multiplied by `recall_scale`.
std::vector<std::string> count_covariate_names();

struct ChildRecall {
  std::string child_id;
  std::string community_id;
  bool female = false;
  int birth_order = 1;
  std::vector<std::optional<double>> slot_days;   // mean recall days per slot
  std::vector<std::vector<std::pair<double, int>>> slot_windows;   // (days, window length) per slot
};

// Recall summaries per child with community averages per slot.
class RecallTable {
public:
  static RecallTable from_panel(const Panel& panel);

  const std::vector<ChildRecall>& children() const { return children_; }
  std::optional<std::size_t> find(const std::string& child_id) const;

  // Covariate row for child `c` in window `w`; nullopt when the child has
  // no recall at all.
  std::optional<linalg::Vector> covariates(std::size_t c, int w, double recall_scale = 1.0) const;

private:
  std::vector<ChildRecall> children_;
  std::map<std::string, std::size_t> index_;
  std::map<std::pair<std::string, int>, double> village_mean_;
};

// Guatemala training data: y is the diarrhea days in the window scaled
// from the fortnightly recalls and rounded.
std::vector<CountDataset> build_count_windows(const Panel& panel, double recall_scale = 1.0);

// Predicts days with diarrhea over a growth period from the battery,
// prorating each overlapping 2-month window. Used for the Philippines.
DiarrheaResolver battery_resolver(CountBattery battery, const Panel& panel, double recall_scale = 1.0);

}  // namespace growthiv
