#include "growthiv/error.hpp"
#include "growthiv/growth.hpp"
#include "growthiv/sweep.hpp"

namespace growthiv {

InstrumentCatalog InstrumentCatalog::defaults(Country c) {
  InstrumentCatalog cat;
  const auto items = default_price_items(c);
  for (const auto& item : items) cat.prices.push_back(instrument::price(item));
  if (c == Country::philippines) {
    for (const auto& item : items) cat.prices.push_back(instrument::lagged_price(item));
  }
  return cat;
}

namespace {

// All size-k subsets of [0, n) in lexicographic order.
void combinations(int n, int k, std::vector<std::vector<int>>& out) {
  if (k < 0 || k > n) return;
  std::vector<int> idx(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
  while (true) {
    out.push_back(idx);
    int i = k - 1;
    while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - k + i) --i;
    if (i < 0) return;
    ++idx[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < k; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
  }
}

struct Family {
  std::vector<std::string> base;
  int min_prices;
  int max_prices;
};

}  // namespace

std::vector<InstrumentSet> enumerate_sets(Country country, Model model, Outcome outcome,
                                          const InstrumentCatalog& catalog) {
  using namespace instrument;
  const std::string other_lag = outcome == Outcome::height ? kLag2Weight : kLag2Height;
  std::vector<Family> families;
  if (country == Country::guatemala) {
    families = {
        {{kAtole}, 3, 4},
        {{kAtole, kAtoleDistance}, 2, 4},
        {{kAtole, other_lag}, 2, 4},
        {{kAtole, kAtoleDistance, other_lag}, 2, 4},
        {{kAtole, kLag2Height, kLag2Weight}, 2, 4},
        {{kAtole, kAtoleDistance, kLag2Height, kLag2Weight}, 2, 4},
    };
    if (model == Model::energy) families.push_back({{kAtole}, 2, 2});
  } else if (country == Country::philippines) {
    families = {
        {{}, 4, 6},
        {{other_lag}, 3, 6},
        {{kLag2Height, kLag2Weight}, 2, 6},
    };
  } else {
    throw ValidationError("unknown country");
  }

  std::vector<InstrumentSet> sets;
  const int np = static_cast<int>(catalog.prices.size());
  for (const auto& fam : families) {
    for (int k = fam.min_prices; k <= fam.max_prices; ++k) {
      std::vector<std::vector<int>> combos;
      combinations(np, k, combos);
      for (const auto& c : combos) {
        InstrumentSet s;
        s.id = static_cast<int>(sets.size()) + 1;
        s.names = fam.base;
        for (int i : c) s.names.push_back(catalog.prices[static_cast<std::size_t>(i)]);
        s.country = country;
        s.model = model;
        s.outcome = outcome;
        sets.push_back(std::move(s));
      }
    }
  }
  return sets;
}

std::vector<InstrumentSet> enumerate_sets(Country country, Model model, Outcome outcome) {
  return enumerate_sets(country, model, outcome, InstrumentCatalog::defaults(country));
}

}  // namespace growthiv
