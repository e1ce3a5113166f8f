#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <vector>

#include "coannot/agreement.hpp"
#include "coannot/domain.hpp"

namespace coannot {

/// Uniform sample without replacement, returned in draw order.
/// Throws Error(Infeasible) when n exceeds the corpus size.
std::vector<ItemId> sample_pool(std::span<const Item> corpus, std::size_t n,
                                std::uint64_t seed);

struct RoundPlan {
  std::vector<int> round_sizes;
  double growth_factor = 2.0;
  int total = 0;

  friend bool operator==(const RoundPlan&, const RoundPlan&) = default;
};

/// Geometric round sizes: round i gets total * g^i / sum_j g^j rounded to
/// the nearest integer (at least 1); the last round takes the remainder.
RoundPlan plan_rounds(int total, int n_rounds, double growth_factor);

struct Assignment {
  RoundId round_id = 0;
  std::map<ItemId, std::set<AnnotatorId>> items;

  std::map<AnnotatorId, int> loads() const;

  friend bool operator==(const Assignment&, const Assignment&) = default;
};

/// Gives every item exactly k distinct annotators. Items and annotators are
/// shuffled with the seed and then dealt cyclically, so loads differ by at
/// most one.
Assignment assign_batch(std::span<const ItemId> items,
                        std::span<const AnnotatorId> annotators, int k,
                        std::uint64_t seed, RoundId round_id = 0);

/// Uniform subset of size round(fraction * N).
std::set<ItemId> carve_holdout(std::span<const ItemId> labelled_items, double fraction,
                               std::uint64_t seed);

/// Next round's batch: re-annotation items first (in queue order), then
/// `fresh_count` fresh items. Round sizes count fresh items only.
std::vector<ItemId> compose_round_batch(std::span<const ItemId> reannotation_queue,
                                        std::span<const ItemId> fresh_items,
                                        std::size_t fresh_count);

struct RoundSummary {
  RoundId round_id = 0;
  AgreementReport agreement;
  std::vector<ItemId> review_queue;
  std::vector<ItemId> reannotation_queue;
  /// Labels for items that are not queued for re-annotation.
  std::vector<AggregateLabel> labels;

  friend bool operator==(const RoundSummary&, const RoundSummary&) = default;
};

/// Pure part of closing a round. `round_annotations` are the round's
/// annotations (superseded ones are ignored). Items in `holdout` are never
/// queued for re-annotation.
RoundSummary summarize_round(RoundId round_id, std::span<const Annotation> round_annotations,
                             const LabellingSchema& schema, double threshold,
                             Timestamp computed_at, const std::set<ItemId>& holdout = {});

void to_json(Json& j, const RoundPlan& plan);
void to_json(Json& j, const Assignment& assignment);
void from_json(const Json& j, Assignment& assignment);
void to_json(Json& j, const RoundSummary& summary);
void from_json(const Json& j, RoundSummary& summary);

}  // namespace coannot
