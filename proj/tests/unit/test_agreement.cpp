#include <doctest.h>

#include <chrono>
#include <random>
#include <sstream>

#include "coannot/agreement.hpp"
#include "coannot/error.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace coannot;
using fixtures::ann;

namespace {

ReliabilityTable table(int q, std::vector<oracle::Row> rows) { return {q, std::move(rows)}; }

struct Tally {
  long tables = 0, alpha_checked = 0, ac1_checked = 0, mismatches = 0;
};

void compare_with_oracle(const std::vector<oracle::Row>& rows, int q, Tally& tally) {
  ++tally.tables;
  const ReliabilityTable t{q, rows};
  const auto expected_alpha = oracle::alpha_ordinal(rows);
  try {
    const double a = krippendorff_alpha(t, DistanceMetric::Ordinal);
    if (!expected_alpha || std::abs(a - *expected_alpha) > 1e-9) ++tally.mismatches;
    ++tally.alpha_checked;
  } catch (const Error&) {
    if (expected_alpha) ++tally.mismatches;
  }
  const auto expected_ac1 = oracle::gwet_ac1(rows, q);
  try {
    const double a = gwet_ac1(t);
    if (!expected_ac1 || std::abs(a - *expected_ac1) > 1e-9) ++tally.mismatches;
    ++tally.ac1_checked;
  } catch (const Error&) {
    if (expected_ac1) ++tally.mismatches;
  }
}

}  // namespace

TEST_CASE("alpha is 1 on unanimous tables spanning several categories") {
  CHECK(krippendorff_alpha(table(3, {{0, 0, 0}, {2, 2, 2}, {1, 1, 1}}), DistanceMetric::Ordinal) ==
        doctest::Approx(1.0));
  CHECK(krippendorff_alpha(table(2, {{0, 0}, {1, 1}}), DistanceMetric::Nominal) ==
        doctest::Approx(1.0));
}

TEST_CASE("ordinal alpha on the crossed (0,2)/(2,0) table is -0.5") {
  // n0 = n2 = 2, delta^2(0,2) = 4, D_obs = 4, D_exp = 8/3
  const double a = krippendorff_alpha(table(3, {{0, 2}, {2, 0}}), DistanceMetric::Ordinal);
  CHECK(std::abs(a - -0.5) < 1e-9);
}

TEST_CASE("alpha ignores unpairable items and rejects degenerate tables") {
  const auto with_single = table(3, {{0, 2}, {2, 0}, {1, std::nullopt}});
  CHECK(std::abs(krippendorff_alpha(with_single, DistanceMetric::Ordinal) - -0.5) < 1e-9);
  CHECK_THROWS_AS(krippendorff_alpha(table(3, {{1, std::nullopt}}), DistanceMetric::Ordinal), Error);
  CHECK_THROWS_AS(krippendorff_alpha(table(3, {{1, 1}, {1, 1}}), DistanceMetric::Ordinal), Error);
}

TEST_CASE("alpha matches the oracle on seeded 3x6 tables") {
  std::mt19937_64 rng(20240601);
  std::uniform_int_distribution<int> pick(0, 2);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<oracle::Row> rows(6);
    for (auto& r : rows) {
      for (int k = 0; k < 3; ++k) r.push_back(pick(rng));
    }
    const auto expected = oracle::alpha_ordinal(rows);
    if (!expected) continue;
    CHECK(std::abs(krippendorff_alpha(table(3, rows), DistanceMetric::Ordinal) - *expected) < 1e-9);
  }
}

TEST_CASE("AC1 hand examples") {
  // P_a = 0.75, pi = 0.625, P_e = 0.46875
  const auto t = table(2, {{1, 1}, {0, 0}, {1, 1}, {1, 0}});
  CHECK(std::abs(gwet_ac1(t) - 0.5294) < 1e-4);
  CHECK(gwet_ac1(table(2, {{0, 1}, {0, 1}, {0, 1}})) == doctest::Approx(-1.0));
  CHECK(gwet_ac1(table(2, {{1, 1}, {0, 0}})) == doctest::Approx(1.0));
  CHECK_THROWS_AS(gwet_ac1(table(2, {{1, std::nullopt}})), Error);
}

TEST_CASE("both coefficients match the oracle on every small table") {
  const auto start = std::chrono::steady_clock::now();
  Tally tally;
  for (int q : {2, 3}) {
    for (int raters = 1; raters <= 3; ++raters) {
      const auto patterns = oracle::row_patterns(raters, q);
      for (int items = 1; items <= 4; ++items) {
        oracle::for_each_multiset(patterns, items, [&](const auto& rows) {
          compare_with_oracle(rows, q, tally);
        });
      }
    }
  }
  const auto elapsed = std::chrono::steady_clock::now() - start;
  MESSAGE("tables: " << tally.tables << ", alpha defined: " << tally.alpha_checked
                     << ", ac1 defined: " << tally.ac1_checked);
  CHECK(tally.mismatches == 0);
  CHECK(tally.alpha_checked > 0);
  CHECK(std::chrono::duration<double>(elapsed).count() < 10.0);
}

TEST_CASE("item disagreement") {
  LabellingSchema plain;
  std::vector<Annotation> same{ann("i", "a", 1), ann("i", "b", 1), ann("i", "c", 1)};
  CHECK(item_disagreement(same, plain) == 0.0);

  std::vector<Annotation> split{ann("i", "a", 0), ann("i", "b", 0), ann("i", "c", 2)};
  CHECK(item_disagreement(split, plain) == doctest::Approx(2.0 / 3.0));

  std::vector<Annotation> pair{ann("i", "a", 0), ann("i", "b", 1)};
  CHECK(item_disagreement(pair, plain) == doctest::Approx(0.5));

  // Flags nobody asserts are not scored, so the contested item keeps 0.667.
  std::vector<Annotation> contested{ann("i", "a", 0), ann("i", "b", 1), ann("i", "c", 2)};
  CHECK(item_disagreement(contested, default_schema()) == doctest::Approx(2.0 / 3.0));

  std::vector<Annotation> flagged{ann("i", "a", 2, {"vilification"}), ann("i", "b", 2),
                                  ann("i", "c", 1, {"vilification"})};
  const double expected = oracle::item_disagreement(
      {{2, {true}}, {2, {false}}, {1, {true}}}, 3);
  CHECK(item_disagreement(flagged, default_schema()) == doctest::Approx(expected));
}

TEST_CASE("tables put items in rows and annotators in columns") {
  std::vector<Annotation> anns{ann("b", "x", 1), ann("a", "y", 2, {"vilification"}),
                               ann("a", "x", 0)};
  const auto t = classification_table(anns, default_schema());
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0] == std::vector<std::optional<int>>{0, 2});
  CHECK(t.rows[1] == std::vector<std::optional<int>>{1, std::nullopt});
  const auto f = flag_table(anns, "vilification");
  CHECK(f.category_count == 2);
  CHECK(f.rows[0] == std::vector<std::optional<int>>{0, 1});
}

TEST_CASE("agreement report") {
  const auto schema = default_schema();
  SUBCASE("unanimous round") {
    std::vector<Annotation> anns;
    for (std::string item : {"p", "q", "r"}) {
      const int cls = item == "p" ? 0 : (item == "q" ? 1 : 2);
      for (std::string who : {"a", "b", "c"}) anns.push_back(ann(item, who, cls, {"dehumanisation"}));
    }
    const auto r = agreement_report(anns, schema, 1, Timestamp{});
    REQUIRE(r.alpha_classification);
    CHECK(*r.alpha_classification == doctest::Approx(1.0));
    for (const auto& [flag, v] : r.ac1_per_flag) {
      REQUIRE(v);
      CHECK(*v == doctest::Approx(1.0));
    }
    for (const auto& [item, s] : r.item_scores) CHECK(s.score == 0.0);
  }
  SUBCASE("one contested item has the top score") {
    std::vector<Annotation> anns;
    for (std::string item : {"p", "q"}) {
      for (std::string who : {"a", "b", "c"}) anns.push_back(ann(item, who, item == "p" ? 0 : 2));
    }
    anns.push_back(ann("x", "a", 0));
    anns.push_back(ann("x", "b", 1));
    anns.push_back(ann("x", "c", 2));
    anns.push_back(ann("lonely", "a", 2));
    const auto r = agreement_report(anns, schema, 1, Timestamp{});
    CHECK(r.item_scores.at("x").score == doctest::Approx(2.0 / 3.0));
    CHECK(r.item_scores.at("p").score == 0.0);
    CHECK_FALSE(r.item_scores.count("lonely"));
    CHECK(r.below_minimum == std::vector<ItemId>{"lonely"});

    std::ostringstream csv;
    write_item_scores_csv(csv, r);
    CHECK(csv.str().rfind("item_id,score,n_annotations,marked_for_review\n", 0) == 0);
    CHECK(Json(r).get<AgreementReport>() == r);
  }
  SUBCASE("empty round") {
    const auto r = agreement_report(std::vector<Annotation>{}, schema, 3, Timestamp{});
    CHECK(r.item_scores.empty());
    CHECK_FALSE(r.alpha_classification);
    CHECK_FALSE(r.warnings.empty());
  }
}
