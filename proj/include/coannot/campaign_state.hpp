#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "coannot/agreement.hpp"
#include "coannot/dataset.hpp"
#include "coannot/domain.hpp"
#include "coannot/event_log.hpp"
#include "coannot/orchestration.hpp"

namespace coannot {

struct RoundState {
  RoundId round_id = 0;
  bool closed = false;
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<ItemId> items;
  /// Items carried over from a re-annotation queue.
  std::set<ItemId> reannotation_items;
  std::map<ItemId, std::set<AnnotatorId>> assigned;
  std::set<std::pair<ItemId, AnnotatorId>> expired;
  std::optional<RoundSummary> summary;

  friend bool operator==(const RoundState&, const RoundState&) = default;
};

/// Broadcast review of one item: every eligible reviewer is asked once.
struct ReviewTask {
  ItemId item_id;
  RoundId round_id = 0;
  std::set<AnnotatorId> pending;
  std::set<AnnotatorId> done;

  friend bool operator==(const ReviewTask&, const ReviewTask&) = default;
};

struct Campaign {
  std::string id;
  LabellingSchema schema;
  /// annotator id -> sha256 of bearer token
  std::map<AnnotatorId, std::string> token_hashes;
  bool anonymize_deliberation = true;
  double reannotation_threshold = 0.5;

  std::map<ItemId, Item> items;
  std::vector<ItemId> item_order;
  std::map<RoundId, RoundState> rounds;
  std::vector<Annotation> annotations;  // ascending ref
  /// item id -> positions in `annotations`; derived, rebuilt on load
  std::map<ItemId, std::vector<std::size_t>> annotation_index;
  /// "<annotator>\x1f<key>" -> annotation ref
  std::map<std::string, AnnotationRef> acks;
  std::vector<ItemId> reannotation_queue;
  std::vector<ReviewTask> review_tasks;
  std::set<ItemId> harmonised;
  std::set<ItemId> holdout;
  bool holdout_carved = false;

  const RoundState* open_round() const;
  RoundId last_round_id() const;
  /// Items never placed in any round, in import order, excluding holdout.
  std::vector<ItemId> fresh_items() const;
  bool item_in_any_round(const ItemId& id) const;

  std::vector<Annotation> round_annotations(RoundId round_id) const;
  std::vector<Annotation> live_annotations(const ItemId& item_id) const;
  /// The annotations the item's final label is computed from: the harmonised
  /// record if any, else the live annotations (plus reviews) of the latest
  /// round in which the item was annotated.
  std::vector<Annotation> label_basis(const ItemId& item_id) const;
  std::optional<AggregateLabel> label(const ItemId& item_id) const;
  std::vector<AggregateLabel> labels() const;
  std::vector<LabelledItem> labelled_corpus() const;
  /// Items eligible for deliberation: queued for re-annotation or review in
  /// a closed round, or already harmonised.
  std::set<ItemId> deliberation_items() const;

  friend bool operator==(const Campaign&, const Campaign&) = default;
};

/// Materialised state: a pure left fold over the event log.
class CampaignState {
 public:
  void apply(const Event& event);

  const std::map<std::string, Campaign>& campaigns() const { return campaigns_; }
  const Campaign* find(const std::string& campaign_id) const;
  const Campaign& at(const std::string& campaign_id) const;
  std::uint64_t last_sequence() const { return last_sequence_; }

  Json to_json() const;
  static CampaignState from_json(const Json& j);

  friend bool operator==(const CampaignState&, const CampaignState&) = default;

 private:
  Campaign& mutable_at(const std::string& campaign_id);

  std::map<std::string, Campaign> campaigns_;
  std::uint64_t last_sequence_ = 0;
};

CampaignState replay(const std::vector<Event>& events, CampaignState initial = {});

std::string idempotency_slot(const AnnotatorId& annotator, const std::string& key);

}  // namespace coannot
