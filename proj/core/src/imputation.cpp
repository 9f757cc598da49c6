#include "growthiv/growth.hpp"
#include "growthiv/linalg.hpp"

#include <cmath>
#include <map>

namespace growthiv {

namespace {

int age_level(int age_days) { return static_cast<int>(std::lround(age_days / kDaysPerMonth)); }

using Getter = std::optional<double> ChildObservation::*;
using Flag = bool ChildObservation::*;

std::size_t impute_one(Panel& panel, Getter field, Flag flag) {
  const auto spans = child_spans(panel);

  // Anthropometric visits only; intakes are scheduled with them.
  std::vector<std::vector<std::size_t>> visits(spans.size());
  for (std::size_t c = 0; c < spans.size(); ++c) {
    for (std::size_t i = spans[c].begin; i < spans[c].end; ++i) {
      if (panel[i].is_measurement()) visits[c].push_back(i);
    }
  }

  std::map<int, int> level_col;   // age level -> dummy column (base level omitted)
  for (const auto& v : visits) {
    for (std::size_t i : v) {
      if ((panel[i].*field).has_value()) level_col.emplace(age_level(panel[i].age_days), 0);
    }
  }
  if (level_col.empty()) return 0;
  int next = -1;
  for (auto& [level, col] : level_col) col = next++;   // first level is the base (-1)
  const int n_dummies = next;

  // Within-child demeaned design.
  std::vector<std::size_t> rows;
  std::vector<std::size_t> row_child;
  for (std::size_t c = 0; c < visits.size(); ++c) {
    for (std::size_t i : visits[c]) {
      if ((panel[i].*field).has_value()) {
        rows.push_back(i);
        row_child.push_back(c);
      }
    }
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  linalg::Matrix d = linalg::Matrix::Zero(n, n_dummies);
  linalg::Vector y(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& o = panel[rows[static_cast<std::size_t>(r)]];
    y(r) = *(o.*field);
    const int col = level_col[age_level(o.age_days)];
    if (col >= 0) d(r, col) = 1.0;
  }
  linalg::Matrix dd = d;
  linalg::Vector yd = y;
  {
    Eigen::Index r = 0;
    while (r < n) {
      Eigen::Index e = r;
      while (e < n && row_child[static_cast<std::size_t>(e)] == row_child[static_cast<std::size_t>(r)]) ++e;
      const Eigen::Index len = e - r;
      dd.middleRows(r, len).rowwise() -= d.middleRows(r, len).colwise().mean();
      yd.segment(r, len).array() -= y.segment(r, len).mean();
      r = e;
    }
  }

  // Age effects; levels not identified from within-child variation stay NaN.
  linalg::Vector effect = linalg::Vector::Constant(n_dummies, std::nan(""));
  if (n_dummies > 0) {
    const auto basis = linalg::orthonormal_basis(dd, 1e-9);
    if (!basis.kept.empty()) {
      linalg::Matrix dk(n, static_cast<Eigen::Index>(basis.kept.size()));
      for (std::size_t k = 0; k < basis.kept.size(); ++k) dk.col(static_cast<Eigen::Index>(k)) = dd.col(basis.kept[k]);
      const linalg::Vector b = dk.colPivHouseholderQr().solve(yd);
      for (std::size_t k = 0; k < basis.kept.size(); ++k) effect(basis.kept[k]) = b(static_cast<Eigen::Index>(k));
    }
  }
  auto level_effect = [&](int age_days) -> std::optional<double> {
    auto it = level_col.find(age_level(age_days));
    if (it == level_col.end()) return std::nullopt;
    if (it->second < 0) return 0.0;
    const double e = effect(it->second);
    if (std::isnan(e)) return std::nullopt;
    return e;
  };

  std::size_t filled = 0;
  for (std::size_t c = 0; c < visits.size(); ++c) {
    const auto& v = visits[c];
    // Child intercept from observed, identified rows.
    double sum = 0.0;
    int count = 0;
    for (std::size_t i : v) {
      if (!(panel[i].*field).has_value()) continue;
      if (auto e = level_effect(panel[i].age_days)) {
        sum += *(panel[i].*field) - *e;
        ++count;
      }
    }
    if (count == 0) continue;
    const double intercept = sum / count;
    std::vector<bool> observed(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) observed[k] = (panel[v[k]].*field).has_value();
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (observed[k]) continue;
      const bool adjacent = (k > 0 && observed[k - 1]) || (k + 1 < v.size() && observed[k + 1]);
      if (!adjacent) continue;
      auto& o = panel[v[k]];
      const auto e = level_effect(o.age_days);
      if (!e) continue;
      o.*field = std::max(0.0, intercept + *e);
      o.*flag = true;
      ++filled;
    }
  }
  return filled;
}

}  // namespace

ImputationSummary impute_intakes_fe(Panel& panel) {
  ImputationSummary s;
  s.protein_imputed = impute_one(panel, &ChildObservation::protein_kcal_day, &ChildObservation::protein_imputed);
  s.nonprotein_imputed =
      impute_one(panel, &ChildObservation::nonprotein_kcal_day, &ChildObservation::nonprotein_imputed);
  return s;
}

}  // namespace growthiv
