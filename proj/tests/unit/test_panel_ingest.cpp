#include "growthiv/error.hpp"
#include "growthiv/growth.hpp"
#include "growthiv/panel.hpp"
#include "growthiv/prices.hpp"

#include <doctest.h>

#include <algorithm>
#include <array>
#include <sstream>
#include <tuple>

using namespace growthiv;

namespace {

std::string panel_csv(const std::vector<std::string>& rows) {
  std::string s(kPanelHeader);
  s += '\n';
  for (const auto& r : rows) s += r + '\n';
  return s;
}

Panel parse(const std::vector<std::string>& rows, Country c = Country::guatemala) {
  std::istringstream in(panel_csv(rows));
  return parse_panel(in, c);
}

ChildObservation visit(const std::string& id, int age, double h, double w, std::optional<double> prot,
                       std::optional<double> nonprot) {
  ChildObservation o;
  o.child_id = id;
  o.community_id = "v1";
  o.age_days = age;
  o.height_cm = h;
  o.weight_g = w;
  o.protein_kcal_day = prot;
  o.nonprotein_kcal_day = nonprot;
  o.reporting_window_days = 15;
  o.diarrhea_days_reported = 0.0;
  o.birth_year = 1970;
  return o;
}

PriceQuote quote(const std::string& item, int month, double price, const std::string& unit = "100g",
                 const std::string& store = "a", const std::string& scope = "v1") {
  PriceQuote q;
  q.item = item;
  q.scope = scope;
  q.year = 1983;
  q.month = month;
  q.price = price;
  q.unit = unit;
  q.store = store;
  return q;
}

std::optional<double> series_at(const std::vector<PriceSeries>& s, const std::string& item, int month) {
  for (const auto& p : s) {
    if (p.item == item && p.month_index == 1983 * 12 + month - 1) return p.unit_price;
  }
  return std::nullopt;
}

}  // namespace

TEST_CASE("panel rows convert protein grams to kcal") {
  const auto p = parse({"c1,v1,200,70.5,8000,10,300,0,0,1,2,15,1,2,1970,1,3.5"});
  REQUIRE(p.size() == 1);
  CHECK(*p[0].protein_kcal_day == 40.0);
  CHECK(*p[0].nonprotein_kcal_day == 300.0);
  CHECK(p[0].breastfed_last_month);
  CHECK(p[0].female);
  CHECK(p[0].atole_village);
  CHECK(*p[0].distance_to_center == 3.5);

  std::ostringstream out;
  write_panel(out, p);
  std::istringstream back(out.str());
  const auto q = parse_panel(back, Country::guatemala);
  CHECK(*q[0].protein_kcal_day == 40.0);
}

TEST_CASE("panel ingestion edge cases") {
  CHECK(parse({}).empty());

  try {
    parse({"c1,v1,200,-1,8000,10,300,0,0,1,2,15,1,2,1970,1,3.5"});
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("height_cm") != std::string::npos);
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }

  CHECK_THROWS_AS(parse({"c1,v1,200,70,8000,10,300,0,0,1,2,15,1,2,1970,1,",
                         "c1,v1,200,71,8100,10,300,0,0,1,2,15,1,2,1970,1,"}),
                  ValidationError);
  CHECK_THROWS_AS(parse({"c1,v1,200,70,8000,10,300,0,0,1,16,15,1,2,1970,1,"}), ValidationError);
  CHECK_THROWS_AS(parse({"c1,v1,abc,70,8000,10,300,0,0,1,2,15,1,2,1970,1,"}), ValidationError);

  std::istringstream bad_header("child,community\n");
  CHECK_THROWS_AS(parse_panel(bad_header, Country::guatemala), ValidationError);

  // rows come back in (child, age) order; supplements are zeroed outside Guatemala
  const auto p = parse({"c2,v1,100,60,6000,,,5,5,0,,,0,1,1970,0,", "c1,v1,300,70,8000,,,5,5,0,,,0,1,1970,0,",
                        "c1,v1,100,60,6000,,,5,5,0,,,0,1,1970,0,"},
                       Country::philippines);
  CHECK(p[0].child_id == "c1");
  CHECK(p[0].age_days == 100);
  CHECK(p[2].child_id == "c2");
  CHECK(p[0].supplement_protein_kcal == 0.0);
  CHECK(p[0].reporting_window_days == 7);
  CHECK(p[0].is_measurement());
}

TEST_CASE("price preprocessing") {
  const UnitTable units;

  SUBCASE("unit normalization") {
    const auto s = preprocess_prices({quote("rice", 1, 500.0, "kg")}, units);
    REQUIRE(s.size() == 1);
    CHECK(s[0].unit_price == doctest::Approx(50.0).epsilon(1e-15));
  }
  SUBCASE("stores are averaged") {
    const auto s = preprocess_prices({quote("rice", 3, 40.0, "100g", "a"), quote("rice", 3, 60.0, "100g", "b")}, units);
    REQUIRE(s.size() == 1);
    CHECK(s[0].unit_price == 50.0);
  }
  SUBCASE("even months are interpolated only between two odd neighbours") {
    PriceReport r;
    const auto s = preprocess_prices({quote("rice", 1, 40.0), quote("rice", 3, 60.0), quote("rice", 7, 55.0)}, units, &r);
    CHECK(*series_at(s, "rice", 2) == 50.0);
    CHECK_FALSE(series_at(s, "rice", 4).has_value());
    CHECK_FALSE(series_at(s, "rice", 6).has_value());
    CHECK(r.interpolated == 1);
  }
  SUBCASE("non-positive quotes and outliers are dropped") {
    PriceReport r;
    const auto s = preprocess_prices({quote("rice", 1, 50.0), quote("rice", 3, 52.0), quote("rice", 5, 48.0),
                                      quote("rice", 7, 0.0), quote("rice", 9, 1000.0), quote("rice", 11, 2.0)},
                                     units, &r);
    CHECK(r.dropped_nonpositive == 1);
    CHECK(r.dropped_outliers == 2);
    CHECK(s.size() == 5);   // 1, 3, 5 plus interpolated 2 and 4
  }
  SUBCASE("unknown units throw") {
    CHECK_THROWS_AS(preprocess_prices({quote("rice", 1, 5.0, "bushel")}, units), ValidationError);
  }
  SUBCASE("idempotent and sorted") {
    const std::vector<PriceQuote> raw{quote("eggs", 5, 30.0, "100g", "a", "v2"), quote("rice", 1, 40.0),
                                      quote("rice", 3, 60.0, "kg"),             quote("eggs", 3, 20.0, "100g", "b", "v2"),
                                      quote("eggs", 3, 22.0, "100g", "a", "v2"), quote("corn", 9, 14.0, "lb")};
    const auto once = preprocess_prices(raw, units);
    const auto twice = preprocess_prices(to_quotes(once), units);
    CHECK(once == twice);
    for (std::size_t i = 1; i < once.size(); ++i) {
      const auto& a = once[i - 1];
      const auto& b = once[i];
      CHECK(std::tie(a.item, a.scope, a.month_index) < std::tie(b.item, b.scope, b.month_index));
    }
  }
}

TEST_CASE("price quote CSV round trip") {
  const std::vector<PriceQuote> q{quote("rice", 1, 40.0, "kg"), quote("eggs", 12, 3.25, "100g", "b", "national")};
  std::ostringstream out;
  write_price_quotes(out, q);
  std::istringstream in(out.str());
  const auto back = parse_price_quotes(in);
  REQUIRE(back.size() == 2);
  CHECK(back[0].unit == "kg");
  CHECK(back[1].price == 3.25);
  CHECK(back[1].scope == "national");
}

TEST_CASE("period intake aggregation") {
  auto s = visit("c", 200, 70, 8000, 80.0, 120.0);
  auto e = visit("c", 290, 72, 8500, 120.0, 180.0);
  e.supplement_protein_kcal = 300.0;
  e.supplement_nonprotein_kcal = 600.0;
  auto pi = aggregate_intakes(s, e, 90);
  REQUIRE(pi);
  CHECK(pi->protein_kcal + pi->nonprotein_kcal == 23400.0);   // 250 kcal/d * 90 + 900

  s = visit("c", 200, 70, 8000, 40.0, 60.0);
  e = visit("c", 260, 72, 8500, 40.0, 60.0);
  pi = aggregate_intakes(s, e, 60);
  CHECK(pi->protein_kcal + pi->nonprotein_kcal == 6000.0);

  s = visit("c", 200, 70, 8000, 0.0, 0.0);
  e = visit("c", 260, 72, 8500, 0.0, 0.0);
  e.supplement_protein_kcal = 100.0;
  e.supplement_nonprotein_kcal = 400.0;
  pi = aggregate_intakes(s, e, 60);
  CHECK(pi->protein_kcal == 100.0);
  CHECK(pi->nonprotein_kcal == 400.0);

  e.protein_kcal_day.reset();
  CHECK_FALSE(aggregate_intakes(s, e, 60).has_value());
}

TEST_CASE("fixed-effects imputation only fills adjacent gaps") {
  // intake = child effect + age effect, exactly; the imputed value must
  // reproduce the additive structure.
  const std::array<int, 4> ages{91, 183, 274, 365};   // 3, 6, 9, 12 months
  const std::array<double, 4> age_effect{0.0, 20.0, 35.0, 60.0};
  Panel panel;
  for (int c = 0; c < 5; ++c) {
    for (int k = 0; k < 4; ++k) {
      const double v = 100.0 + 10.0 * c + age_effect[k];
      panel.push_back(visit("full" + std::to_string(c), ages[k], 60 + k, 6000 + k, v, 2 * v));
    }
  }
  for (int k = 0; k < 4; ++k) {
    const double v = 150.0 + age_effect[k];
    const bool edge = k == 0 || k == 3;
    panel.push_back(visit("target", ages[k], 60 + k, 6000 + k, edge ? std::optional(v) : std::nullopt,
                          edge ? std::optional(2 * v) : std::nullopt));
  }
  for (int k = 0; k < 4; ++k) {
    const double v = 130.0 + age_effect[k];
    panel.push_back(visit("z_late", ages[k], 60 + k, 6000 + k, k == 3 ? std::optional(v) : std::nullopt,
                          std::nullopt));
  }
  std::stable_sort(panel.begin(), panel.end(),
                   [](const auto& a, const auto& b) { return std::tie(a.child_id, a.age_days) < std::tie(b.child_id, b.age_days); });
  const Panel before = panel;

  const auto summary = impute_intakes_fe(panel);
  CHECK(summary.protein_imputed == 3);      // target at 6 and 9, z_late at 9
  CHECK(summary.nonprotein_imputed == 2);   // z_late has no observed non-protein intake

  for (std::size_t i = 0; i < panel.size(); ++i) {
    const auto& o = panel[i];
    if (before[i].protein_kcal_day) {
      CHECK(*o.protein_kcal_day == *before[i].protein_kcal_day);
      CHECK_FALSE(o.protein_imputed);
    }
    CHECK(o.protein_imputed == (!before[i].protein_kcal_day && o.protein_kcal_day.has_value()));
    if (o.child_id == "target") {
      const int k = static_cast<int>(std::find(ages.begin(), ages.end(), o.age_days) - ages.begin());
      CHECK(*o.protein_kcal_day == doctest::Approx(150.0 + age_effect[k]).epsilon(1e-9));
      CHECK(*o.nonprotein_kcal_day == doctest::Approx(2 * (150.0 + age_effect[k])).epsilon(1e-9));
    }
    if (o.child_id == "z_late") {
      CHECK(o.protein_kcal_day.has_value() == (o.age_days >= 274));
      if (o.age_days == 274) CHECK(*o.protein_kcal_day == doctest::Approx(130.0 + 35.0).epsilon(1e-9));
      CHECK_FALSE(o.nonprotein_kcal_day.has_value());
    }
  }

  Panel complete;
  for (const auto& o : before) {
    if (o.child_id.starts_with("full")) complete.push_back(o);
  }
  const Panel copy = complete;
  const auto none = impute_intakes_fe(complete);
  CHECK(none.protein_imputed + none.nonprotein_imputed == 0);
  for (std::size_t i = 0; i < copy.size(); ++i) CHECK(*complete[i].protein_kcal_day == *copy[i].protein_kcal_day);
}

TEST_CASE("diarrhea scaling") {
  const std::vector<std::pair<double, int>> two{{3.0, 15}, {5.0, 15}};
  CHECK(*scale_diarrhea_guatemala(two, 90) == doctest::Approx(24.0).epsilon(1e-15));
  const std::vector<std::pair<double, int>> zero{{0.0, 15}, {0.0, 15}};
  CHECK(*scale_diarrhea_guatemala(zero, 90) == 0.0);
  const std::vector<std::pair<double, int>> full{{15.0, 15}};
  CHECK(*scale_diarrhea_guatemala(full, 90) == 90.0);
  CHECK_FALSE(scale_diarrhea_guatemala({}, 90).has_value());
}

TEST_CASE("growth observations") {
  SUBCASE("differences, gaps and lags") {
    Panel p{visit("c", 200, 65, 7000, 40, 200), visit("c", 290, 68, 7600, 40, 200)};
    const auto r = build_growth_observations(p, {}, {});
    REQUIRE(r.rows.size() == 1);
    const auto& g = r.rows[0];
    CHECK(g.delta_height_cm == 3.0);
    CHECK(g.delta_weight_g == 600.0);
    CHECK(g.gap_msmt == 90);
    CHECK(g.lag_height_cm == 65.0);
    CHECK(g.period_index == 1);
    CHECK_FALSE(g.lag2_height_cm.has_value());
    CHECK_FALSE(g.instrument_value(instrument::kLag2Height).has_value());
    CHECK(g.energy_period_kcal == 240.0 * 90);
  }
  SUBCASE("rows per child follow the analysis band") {
    Panel p;
    const std::array<int, 6> ages{90, 180, 270, 360, 450, 800};
    for (std::size_t k = 0; k < ages.size(); ++k) p.push_back(visit("c", ages[k], 60 + k, 6000 + 100 * k, 40, 200));
    const auto r = build_growth_observations(p, {}, {});
    CHECK(r.rows.size() == 3);   // 4 visits inside [168, 745]
    CHECK(r.rows[0].lag2_height_cm.has_value());   // previous visit is outside the band but still a lag
  }
  SUBCASE("missing community prices are flagged per instrument") {
    ChildObservation a = visit("c", 200, 65, 7000, 40, 200), b = visit("c", 290, 68, 7600, 40, 200);
    a.reporting_window_days = b.reporting_window_days = 7;
    Panel p{a, b};
    const int month = calendar_month_index(1970, 290);
    std::vector<PriceSeries> prices{{"eggs", "v1", month, 30.0}, {"eggs", "v1", month - 2, 28.0},
                                    {"fish", "v1", month, 12.0}};
    GrowthBuildOptions o;
    o.country = Country::philippines;
    const auto r = build_growth_observations(p, prices, o);
    REQUIRE(r.rows.size() == 1);
    const auto& g = r.rows[0];
    CHECK(*g.instrument_value("price_eggs") == 30.0);
    CHECK(*g.instrument_value("price_eggs_lag") == 28.0);
    CHECK(*g.instrument_value("price_fish") == 12.0);
    CHECK_FALSE(g.instrument_value("price_fish_lag").has_value());
    CHECK_FALSE(g.instrument_value("price_corn").has_value());
    CHECK(g.instruments.count("price_corn") == 1);
  }
  SUBCASE("Guatemala uses the previous December's deflated national price") {
    Panel p{visit("c", 200, 65, 7000, 40, 200), visit("c", 290, 68, 7600, 40, 200)};
    p[1].atole_village = true;
    p[1].distance_to_center = 2.0;
    const int year = calendar_month_index(1970, 290) / 12;
    std::vector<PriceSeries> prices{{"eggs", "national", (year - 1) * 12 + 11, 8.0},
                                    {"eggs", "national", (year - 1) * 12 + 5, 100.0}};
    GrowthBuildOptions o;
    o.deflator = {{year - 1, 2.0}};
    const auto r = build_growth_observations(p, prices, o);
    const auto& g = r.rows[0];
    CHECK(*g.instrument_value("price_eggs") == 4.0);
    CHECK(*g.instrument_value("atole") == 1.0);
    CHECK(*g.instrument_value("atole_dist") == 2.0);
  }
  SUBCASE("invariants hold on a mixed panel") {
    Panel p;
    for (int k = 0; k < 5; ++k) {
      auto v = visit("c", 180 + 91 * k, 65 + k, 7000 + 200 * k, 30.0 + k, 150.0 + 7 * k);
      v.supplement_protein_kcal = 10.0 * k;
      v.supplement_nonprotein_kcal = 33.3 * k;
      p.push_back(v);
      ChildObservation m;   // morbidity-only recall between measurements
      m.child_id = "c";
      m.community_id = "v1";
      m.age_days = 180 + 91 * k + 40;
      m.diarrhea_days_reported = 1.0 + k;
      m.reporting_window_days = 15;
      m.birth_year = 1970;
      p.push_back(m);
    }
    const auto r = build_growth_observations(p, {}, {});
    REQUIRE(r.rows.size() == 4);
    for (const auto& g : r.rows) {
      CHECK(std::abs(g.energy_period_kcal - g.protein_period_kcal - g.nonprotein_period_kcal) <=
            1e-9 * g.energy_period_kcal);
      CHECK(g.days_no_diar + g.days_with_diar == g.gap_msmt);
      CHECK(g.days_no_diar >= 0.0);
    }
    // the period closing at visit 2 sees the recall at age 220 and the visit itself
    CHECK(r.rows[0].days_with_diar == doctest::Approx((1.0 + 0.0) / 30.0 * 91).epsilon(1e-12));
  }
}
