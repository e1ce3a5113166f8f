#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "coannot/error.hpp"
#include "coannot/orchestration.hpp"
#include "coannot/random.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace coannot;
using fixtures::ann;

namespace {

std::vector<ItemId> ids_of(const std::vector<Item>& items) {
  std::vector<ItemId> ids;
  for (const auto& i : items) ids.push_back(i.id);
  return ids;
}

int sum(const std::vector<int>& v) { return std::accumulate(v.begin(), v.end(), 0); }

}  // namespace

TEST_CASE("seeded rng is stable and uniform enough") {
  SeededRng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.below(1000) == b.below(1000));
  SeededRng c(7);
  std::vector<int> hist(4, 0);
  for (int i = 0; i < 40000; ++i) ++hist[c.below(4)];
  for (int h : hist) CHECK(std::abs(h - 10000) < 500);
}

TEST_CASE("pool sampling") {
  const auto kenya = fixtures::make_items(10633);
  const auto all = sample_pool(kenya, 10633, 1);
  CHECK(std::set<ItemId>(all.begin(), all.end()).size() == 10633);

  const auto sudan = fixtures::make_items(8746);
  const auto s = sample_pool(sudan, 8746, 1);
  CHECK(std::set<ItemId>(s.begin(), s.end()).size() == 8746);

  CHECK(sample_pool(kenya, 500, 42) == sample_pool(kenya, 500, 42));
  CHECK(sample_pool(kenya, 500, 42) != sample_pool(kenya, 500, 43));
  CHECK_THROWS_AS(sample_pool(kenya, 10634, 1), Error);
}

TEST_CASE("round plans") {
  CHECK(plan_rounds(10633, 4, 2.0).round_sizes == std::vector<int>{709, 1418, 2835, 5671});
  CHECK(plan_rounds(10633, 4, 2.0).round_sizes == oracle::plan(10633, 4, 2.0));
  CHECK(plan_rounds(1000, 4, 2.0).round_sizes == std::vector<int>{67, 133, 267, 533});
  // The nearest-integer rule gives 2332.27 -> 2332 for the third round.
  CHECK(plan_rounds(8746, 4, 2.0).round_sizes == oracle::plan(8746, 4, 2.0));
  CHECK(plan_rounds(8746, 4, 2.0).round_sizes == std::vector<int>{583, 1166, 2332, 4665});
  CHECK(plan_rounds(4, 4, 1.0).round_sizes == std::vector<int>{1, 1, 1, 1});
  CHECK_THROWS_AS(plan_rounds(3, 4, 2.0), Error);
  CHECK_THROWS_AS(plan_rounds(100, 4, 0.5), Error);
}

TEST_CASE("round plans always sum to the total and never shrink") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 2000; ++trial) {
    const int rounds = 1 + static_cast<int>(rng() % 6);
    const int total = rounds + static_cast<int>(rng() % 20000);
    const double g = 1.0 + static_cast<double>(rng() % 300) / 100.0;
    const auto p = plan_rounds(total, rounds, g);
    REQUIRE(p.round_sizes.size() == static_cast<std::size_t>(rounds));
    CHECK(sum(p.round_sizes) == total);
    for (int s : p.round_sizes) CHECK(s >= 1);
    CHECK(std::is_sorted(p.round_sizes.begin(), p.round_sizes.end()));
    const auto expected = oracle::plan(total, rounds, g);
    if (std::is_sorted(expected.begin(), expected.end())) CHECK(p.round_sizes == expected);
  }
}

TEST_CASE("batch assignment") {
  const std::vector<AnnotatorId> three{"a", "b", "c"};
  const auto one = assign_batch(std::vector<ItemId>{"x"}, three, 3, 1);
  CHECK(one.items.at("x") == std::set<AnnotatorId>{"a", "b", "c"});

  CHECK_THROWS_AS(assign_batch(std::vector<ItemId>{"x"}, std::vector<AnnotatorId>{"a", "b"}, 3, 1),
                  Error);

  const auto items = ids_of(fixtures::make_items(10));
  const std::vector<AnnotatorId> five{"a", "b", "c", "d", "e"};
  const auto a = assign_batch(items, five, 3, 42);
  for (const auto& [who, load] : a.loads()) CHECK(load == 6);
  int total = 0;
  for (const auto& [item, who] : a.items) {
    CHECK(who.size() == 3);
    total += static_cast<int>(who.size());
  }
  CHECK(total == 30);
  CHECK(a == assign_batch(items, five, 3, 42));
}

TEST_CASE("assignment loads stay balanced") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const int n_items = 1 + static_cast<int>(rng() % 60);
    const int n_ann = 3 + static_cast<int>(rng() % 6);
    const int k = 1 + static_cast<int>(rng() % n_ann);
    std::vector<AnnotatorId> who;
    for (int i = 0; i < n_ann; ++i) who.push_back("ann" + std::to_string(i));
    const auto a = assign_batch(ids_of(fixtures::make_items(n_items)), who, k, rng());
    int lo = 1 << 30, hi = 0;
    for (const auto& w : who) {
      const int l = a.loads().count(w) ? a.loads().at(w) : 0;
      lo = std::min(lo, l);
      hi = std::max(hi, l);
    }
    CHECK(hi - lo <= 1);
    for (const auto& [item, set] : a.items) CHECK(set.size() == static_cast<std::size_t>(k));
  }
}

TEST_CASE("holdout carving") {
  const auto ids = ids_of(fixtures::make_items(10633));
  CHECK(carve_holdout(ids, 0.0, 1).empty());
  CHECK(carve_holdout(ids, 1.0, 1).size() == ids.size());
  const auto h = carve_holdout(ids, 4980.0 / 10633.0, 42);
  CHECK(h.size() == 4980);
  CHECK(h == carve_holdout(ids, 4980.0 / 10633.0, 42));
  CHECK_THROWS_AS(carve_holdout(ids, 1.5, 1), Error);
}

TEST_CASE("round batch puts the re-annotation queue first") {
  const std::vector<ItemId> queue{"q2", "q1"};
  const std::vector<ItemId> fresh{"f1", "f2", "f3"};
  CHECK(compose_round_batch(queue, fresh, 2) == std::vector<ItemId>{"q2", "q1", "f1", "f2"});
}

TEST_CASE("round summaries") {
  const auto schema = default_schema();
  std::vector<Annotation> calm;
  for (std::string item : {"p", "q"}) {
    for (std::string who : {"a", "b", "c"}) calm.push_back(ann(item, who, 0));
  }
  const auto quiet = summarize_round(1, calm, schema, 0.5, Timestamp{});
  CHECK(quiet.reannotation_queue.empty());
  CHECK(quiet.labels.size() == 2);

  auto contested = calm;
  contested.push_back(ann("x", "a", 0));
  contested.push_back(ann("x", "b", 1));
  contested.push_back(ann("x", "c", 2));
  const auto s = summarize_round(1, contested, schema, 0.5, Timestamp{});
  CHECK(s.reannotation_queue == std::vector<ItemId>{"x"});
  CHECK(std::find(s.review_queue.begin(), s.review_queue.end(), "x") != s.review_queue.end());
  for (const auto& l : s.labels) CHECK(l.item_id != "x");
  CHECK(s == summarize_round(1, contested, schema, 0.5, Timestamp{}));

  const auto held = summarize_round(1, contested, schema, 0.5, Timestamp{}, {"x"});
  CHECK(held.reannotation_queue.empty());
  CHECK(Json(s).get<RoundSummary>() == s);
}
