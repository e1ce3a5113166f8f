#include "coannot/orchestration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "coannot/aggregation.hpp"
#include "coannot/error.hpp"
#include "coannot/random.hpp"

namespace coannot {

namespace {

// First `n` positions of a seeded partial Fisher-Yates shuffle.
std::vector<std::size_t> draw_indices(std::size_t population, std::size_t n,
                                      std::uint64_t seed) {
  std::vector<std::size_t> index(population);
  std::iota(index.begin(), index.end(), std::size_t{0});
  SeededRng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(population - i));
    std::swap(index[i], index[j]);
  }
  index.resize(n);
  return index;
}

}  // namespace

std::vector<ItemId> sample_pool(std::span<const Item> corpus, std::size_t n,
                                std::uint64_t seed) {
  if (n > corpus.size()) {
    throw Error(ErrorCode::Infeasible, "cannot sample " + std::to_string(n) +
                                           " items from a corpus of " +
                                           std::to_string(corpus.size()));
  }
  std::vector<ItemId> out;
  out.reserve(n);
  for (auto i : draw_indices(corpus.size(), n, seed)) out.push_back(corpus[i].id);
  return out;
}

RoundPlan plan_rounds(int total, int n_rounds, double growth_factor) {
  if (n_rounds < 1) throw Error(ErrorCode::InvalidArgument, "need at least one round");
  if (!(growth_factor >= 1.0) || !std::isfinite(growth_factor)) {
    throw Error(ErrorCode::InvalidArgument, "growth factor must be >= 1");
  }
  if (total < n_rounds) {
    throw Error(ErrorCode::Infeasible, "total " + std::to_string(total) +
                                           " is smaller than the number of rounds " +
                                           std::to_string(n_rounds));
  }
  double weight_sum = 0.0;
  for (int i = 0; i < n_rounds; ++i) weight_sum += std::pow(growth_factor, i);
  const double base = total / weight_sum;

  auto build = [&](bool floor_terms) {
    std::vector<int> sizes;
    int assigned = 0;
    for (int i = 0; i + 1 < n_rounds; ++i) {
      const double exact = base * std::pow(growth_factor, i);
      const auto rounded = floor_terms ? std::floor(exact) : std::round(exact);
      const int size = std::max(1, static_cast<int>(rounded));
      sizes.push_back(size);
      assigned += size;
    }
    sizes.push_back(total - assigned);
    return sizes;
  };

  RoundPlan plan;
  plan.growth_factor = growth_factor;
  plan.total = total;
  plan.round_sizes = build(false);
  // Rounding up several small early rounds can starve the last one; flooring
  // the early terms keeps the remainder the largest round.
  if (n_rounds > 1 && plan.round_sizes.back() < plan.round_sizes[plan.round_sizes.size() - 2]) {
    plan.round_sizes = build(true);
  }
  return plan;
}

std::map<AnnotatorId, int> Assignment::loads() const {
  std::map<AnnotatorId, int> out;
  for (const auto& [item, annotators] : items) {
    for (const auto& a : annotators) ++out[a];
  }
  return out;
}

Assignment assign_batch(std::span<const ItemId> items,
                        std::span<const AnnotatorId> annotators, int k,
                        std::uint64_t seed, RoundId round_id) {
  const std::set<AnnotatorId> distinct(annotators.begin(), annotators.end());
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  if (distinct.size() < static_cast<std::size_t>(k)) {
    throw Error(ErrorCode::Infeasible, "need at least " + std::to_string(k) +
                                           " annotators, have " +
                                           std::to_string(distinct.size()));
  }
  std::vector<ItemId> order(items.begin(), items.end());
  std::vector<AnnotatorId> pool(distinct.begin(), distinct.end());
  SeededRng rng(seed);
  rng.shuffle(order);
  rng.shuffle(pool);

  Assignment assignment;
  assignment.round_id = round_id;
  std::size_t cursor = 0;
  for (const auto& item : order) {
    auto& slot = assignment.items[item];
    for (int j = 0; j < k; ++j) {
      slot.insert(pool[cursor % pool.size()]);
      ++cursor;
    }
  }
  return assignment;
}

std::set<ItemId> carve_holdout(std::span<const ItemId> labelled_items, double fraction,
                               std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "holdout fraction outside [0,1]");
  }
  std::vector<ItemId> ids(labelled_items.begin(), labelled_items.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  const auto n = static_cast<std::size_t>(std::llround(fraction * ids.size()));
  std::set<ItemId> out;
  for (auto i : draw_indices(ids.size(), n, seed)) out.insert(ids[i]);
  return out;
}

std::vector<ItemId> compose_round_batch(std::span<const ItemId> reannotation_queue,
                                        std::span<const ItemId> fresh_items,
                                        std::size_t fresh_count) {
  if (fresh_count > fresh_items.size()) {
    throw Error(ErrorCode::Infeasible, "only " + std::to_string(fresh_items.size()) +
                                           " fresh items remain, " +
                                           std::to_string(fresh_count) + " requested");
  }
  std::vector<ItemId> batch(reannotation_queue.begin(), reannotation_queue.end());
  std::set<ItemId> seen(batch.begin(), batch.end());
  for (std::size_t i = 0; i < fresh_count; ++i) {
    if (seen.insert(fresh_items[i]).second) batch.push_back(fresh_items[i]);
  }
  return batch;
}

RoundSummary summarize_round(RoundId round_id, std::span<const Annotation> round_annotations,
                             const LabellingSchema& schema, double threshold,
                             Timestamp computed_at, const std::set<ItemId>& holdout) {
  RoundSummary summary;
  summary.round_id = round_id;
  summary.agreement = agreement_report(round_annotations, schema, round_id, computed_at);

  std::map<ItemId, std::vector<Annotation>> by_item;
  for (const auto& a : round_annotations) {
    if (a.live() && !a.is_review) by_item[a.item_id].push_back(a);
  }
  for (const auto& [item_id, anns] : by_item) {
    if (review_candidate(anns, schema.review_policy, schema)) {
      summary.review_queue.push_back(item_id);
    }
    bool queue = false;
    if (auto it = summary.agreement.item_scores.find(item_id);
        it != summary.agreement.item_scores.end()) {
      queue = it->second.score > threshold || it->second.marked_for_review;
    } else {
      queue = std::any_of(anns.begin(), anns.end(),
                          [](const auto& a) { return a.content.mark_for_review; });
    }
    if (queue && !holdout.count(item_id)) {
      summary.reannotation_queue.push_back(item_id);
    } else {
      summary.labels.push_back(aggregate_item(item_id, anns, schema));
    }
  }
  return summary;
}

void to_json(Json& j, const RoundPlan& plan) {
  j = Json{{"round_sizes", plan.round_sizes},
           {"growth_factor", plan.growth_factor},
           {"total", plan.total}};
}

void to_json(Json& j, const Assignment& assignment) {
  j = Json{{"round_id", assignment.round_id}, {"items", assignment.items}};
}

void from_json(const Json& j, Assignment& assignment) {
  assignment.round_id = j.at("round_id").get<int>();
  assignment.items = j.at("items").get<std::map<ItemId, std::set<AnnotatorId>>>();
}

void to_json(Json& j, const RoundSummary& summary) {
  j = Json{{"round_id", summary.round_id},
           {"agreement", summary.agreement},
           {"review_queue", summary.review_queue},
           {"reannotation_queue", summary.reannotation_queue},
           {"labels", summary.labels}};
}

void from_json(const Json& j, RoundSummary& summary) {
  summary.round_id = j.at("round_id").get<int>();
  summary.agreement = j.at("agreement").get<AgreementReport>();
  summary.review_queue = j.at("review_queue").get<std::vector<ItemId>>();
  summary.reannotation_queue = j.at("reannotation_queue").get<std::vector<ItemId>>();
  summary.labels = j.at("labels").get<std::vector<AggregateLabel>>();
}

}  // namespace coannot
