#include "coannot/campaign_state.hpp"

#include <algorithm>

#include "coannot/aggregation.hpp"
#include "coannot/error.hpp"

namespace coannot {

std::string idempotency_slot(const AnnotatorId& annotator, const std::string& key) {
  return annotator + '\x1f' + key;
}

const RoundState* Campaign::open_round() const {
  for (const auto& [id, round] : rounds) {
    if (!round.closed) return &round;
  }
  return nullptr;
}

RoundId Campaign::last_round_id() const { return rounds.empty() ? 0 : rounds.rbegin()->first; }

bool Campaign::item_in_any_round(const ItemId& id) const {
  return std::any_of(rounds.begin(), rounds.end(), [&](const auto& r) {
    return r.second.assigned.count(id) > 0;
  });
}

std::vector<ItemId> Campaign::fresh_items() const {
  std::set<ItemId> used;
  for (const auto& [rid, round] : rounds) used.insert(round.items.begin(), round.items.end());
  std::vector<ItemId> out;
  for (const auto& id : item_order) {
    if (!used.count(id) && !holdout.count(id)) out.push_back(id);
  }
  return out;
}

std::vector<Annotation> Campaign::round_annotations(RoundId round_id) const {
  std::vector<Annotation> out;
  for (const auto& a : annotations) {
    if (a.round_id == round_id) out.push_back(a);
  }
  return out;
}

std::vector<Annotation> Campaign::live_annotations(const ItemId& item_id) const {
  std::vector<Annotation> out;
  auto it = annotation_index.find(item_id);
  if (it == annotation_index.end()) return out;
  for (auto pos : it->second) {
    if (annotations[pos].live()) out.push_back(annotations[pos]);
  }
  return out;
}

std::vector<Annotation> Campaign::label_basis(const ItemId& item_id) const {
  const auto live = live_annotations(item_id);
  if (harmonised.count(item_id)) {
    for (auto it = live.rbegin(); it != live.rend(); ++it) {
      if (it->annotator_id.rfind("session:", 0) == 0) return {*it};
    }
  }
  RoundId latest = -1;
  for (const auto& a : live) {
    if (!a.is_review) latest = std::max(latest, a.round_id);
  }
  std::vector<Annotation> out;
  for (const auto& a : live) {
    if (a.round_id == latest) out.push_back(a);
  }
  return out;
}

std::optional<AggregateLabel> Campaign::label(const ItemId& item_id) const {
  const auto basis = label_basis(item_id);
  if (basis.empty()) return std::nullopt;
  return aggregate_item(item_id, basis, schema, harmonised.count(item_id) > 0);
}

std::vector<AggregateLabel> Campaign::labels() const {
  std::vector<AggregateLabel> out;
  for (const auto& id : item_order) {
    if (auto l = label(id)) out.push_back(std::move(*l));
  }
  return out;
}

std::vector<LabelledItem> Campaign::labelled_corpus() const {
  std::vector<LabelledItem> out;
  for (const auto& l : labels()) {
    out.push_back(LabelledItem{items.at(l.item_id), l.final_class, l.flag_consensus});
  }
  return out;
}

std::set<ItemId> Campaign::deliberation_items() const {
  std::set<ItemId> out(harmonised.begin(), harmonised.end());
  for (const auto& [rid, round] : rounds) {
    if (!round.summary) continue;
    out.insert(round.summary->reannotation_queue.begin(), round.summary->reannotation_queue.end());
    out.insert(round.summary->review_queue.begin(), round.summary->review_queue.end());
  }
  return out;
}

const Campaign* CampaignState::find(const std::string& campaign_id) const {
  auto it = campaigns_.find(campaign_id);
  return it == campaigns_.end() ? nullptr : &it->second;
}

const Campaign& CampaignState::at(const std::string& campaign_id) const {
  if (const auto* c = find(campaign_id)) return *c;
  throw Error(ErrorCode::NotFound, "unknown campaign " + campaign_id);
}

Campaign& CampaignState::mutable_at(const std::string& campaign_id) {
  auto it = campaigns_.find(campaign_id);
  if (it == campaigns_.end()) {
    throw Error(ErrorCode::Corruption, "event references unknown campaign " + campaign_id);
  }
  return it->second;
}

namespace {

void erase_value(std::vector<ItemId>& v, const ItemId& id) {
  v.erase(std::remove(v.begin(), v.end(), id), v.end());
}

RoundState& round_at(Campaign& c, RoundId id) {
  auto it = c.rounds.find(id);
  if (it == c.rounds.end()) {
    throw Error(ErrorCode::Corruption, "event references unknown round " + std::to_string(id));
  }
  return it->second;
}

}  // namespace

void CampaignState::apply(const Event& event) {
  if (event.sequence != last_sequence_ + 1) {
    throw Error(ErrorCode::Corruption,
                "event log gap: missing sequence number " + std::to_string(last_sequence_ + 1),
                {std::to_string(last_sequence_ + 1)});
  }
  const Json& p = event.payload;
  const auto campaign_id = p.at("campaign_id").get<std::string>();

  switch (event.kind) {
    case EventKind::CampaignCreated: {
      if (campaigns_.count(campaign_id)) {
        throw Error(ErrorCode::Corruption, "campaign created twice: " + campaign_id);
      }
      Campaign c;
      c.id = campaign_id;
      c.schema = p.at("schema").get<LabellingSchema>();
      for (const auto& a : p.at("annotators")) {
        c.token_hashes[a.at("id").get<std::string>()] = a.at("token_sha256").get<std::string>();
      }
      c.anonymize_deliberation = p.value("anonymize_deliberation", true);
      c.reannotation_threshold =
          p.value("reannotation_threshold", c.schema.high_disagreement_threshold);
      campaigns_.emplace(campaign_id, std::move(c));
      break;
    }
    case EventKind::ItemsImported: {
      auto& c = mutable_at(campaign_id);
      for (const auto& j : p.at("items")) {
        auto item = j.get<Item>();
        if (c.items.count(item.id)) {
          throw Error(ErrorCode::Corruption, "item imported twice: " + item.id);
        }
        c.item_order.push_back(item.id);
        c.items.emplace(item.id, std::move(item));
      }
      break;
    }
    case EventKind::RoundOpened: {
      auto& c = mutable_at(campaign_id);
      RoundState round;
      round.round_id = p.at("round_id").get<int>();
      round.items = p.at("items").get<std::vector<ItemId>>();
      round.k = p.at("k").get<int>();
      round.seed = p.at("seed").get<std::uint64_t>();
      for (const auto& id : p.value("reannotation_items", std::vector<ItemId>{})) {
        round.reannotation_items.insert(id);
        erase_value(c.reannotation_queue, id);
      }
      c.rounds[round.round_id] = std::move(round);
      break;
    }
    case EventKind::AssignmentIssued: {
      auto& c = mutable_at(campaign_id);
      auto& round = round_at(c, p.at("round_id").get<int>());
      for (const auto& pair : p.value("expired", Json::array())) {
        const auto item = pair.at(0).get<ItemId>();
        const auto annotator = pair.at(1).get<AnnotatorId>();
        round.assigned[item].erase(annotator);
        round.expired.emplace(item, annotator);
      }
      for (const auto& [item, annotators] : p.at("assignments").items()) {
        for (const auto& a : annotators) round.assigned[item].insert(a.get<AnnotatorId>());
      }
      break;
    }
    case EventKind::AnnotationSubmitted:
    case EventKind::ReviewSubmitted: {
      auto& c = mutable_at(campaign_id);
      Annotation a;
      a.ref = event.sequence;
      a.item_id = p.at("item_id").get<std::string>();
      a.annotator_id = p.at("annotator_id").get<std::string>();
      a.round_id = p.at("round_id").get<int>();
      a.content = p.at("content").get<AnnotationContent>();
      a.submitted_at = event.recorded_at;
      a.is_review = event.kind == EventKind::ReviewSubmitted;
      for (const auto& other : c.live_annotations(a.item_id)) {
        if (other.annotator_id == a.annotator_id && other.round_id == a.round_id &&
            other.is_review == a.is_review) {
          throw Error(ErrorCode::Corruption, "second live annotation for " + a.item_id + " by " +
                                                 a.annotator_id);
        }
      }
      if (a.is_review) {
        for (auto& task : c.review_tasks) {
          if (task.item_id == a.item_id && task.round_id == a.round_id &&
              task.pending.erase(a.annotator_id)) {
            task.done.insert(a.annotator_id);
          }
        }
      }
      c.acks[idempotency_slot(a.annotator_id, p.at("idempotency_key").get<std::string>())] = a.ref;
      c.annotation_index[a.item_id].push_back(c.annotations.size());
      c.annotations.push_back(std::move(a));
      break;
    }
    case EventKind::ItemHarmonised: {
      auto& c = mutable_at(campaign_id);
      Annotation a;
      a.ref = event.sequence;
      a.item_id = p.at("item_id").get<std::string>();
      a.annotator_id = "session:" + p.at("session_ref").get<std::string>();
      a.content = p.at("content").get<AnnotationContent>();
      a.submitted_at = event.recorded_at;
      RoundId round = 0;
      for (auto pos : c.annotation_index[a.item_id]) {
        auto& other = c.annotations[pos];
        if (other.live()) {
          other.superseded_by = a.ref;
          round = std::max(round, other.round_id);
        }
      }
      a.round_id = round;
      c.harmonised.insert(a.item_id);
      erase_value(c.reannotation_queue, a.item_id);
      for (auto& task : c.review_tasks) {
        if (task.item_id == a.item_id) task.pending.clear();
      }
      c.annotation_index[a.item_id].push_back(c.annotations.size());
      c.annotations.push_back(std::move(a));
      break;
    }
    case EventKind::RoundClosed: {
      auto& c = mutable_at(campaign_id);
      auto& round = round_at(c, p.at("round_id").get<int>());
      if (round.closed) throw Error(ErrorCode::Corruption, "round closed twice");
      auto summary = summarize_round(round.round_id, c.round_annotations(round.round_id), c.schema,
                                     c.reannotation_threshold, event.recorded_at, c.holdout);
      summary.agreement.alpha_cumulative =
          cumulative_alpha(c.annotations, c.schema, &summary.agreement.warnings);
      for (const auto& id : summary.reannotation_queue) {
        if (std::find(c.reannotation_queue.begin(), c.reannotation_queue.end(), id) ==
            c.reannotation_queue.end()) {
          c.reannotation_queue.push_back(id);
        }
      }
      for (const auto& id : summary.review_queue) {
        if (c.holdout.count(id)) continue;
        ReviewTask task{id, round.round_id, {}, {}};
        const auto live = c.live_annotations(id);
        for (const auto& [annotator, hash] : c.token_hashes) {
          const bool annotated =
              std::any_of(live.begin(), live.end(), [&](const Annotation& a) {
                return !a.is_review && a.round_id == round.round_id && a.annotator_id == annotator;
              });
          if (!annotated) task.pending.insert(annotator);
        }
        c.review_tasks.push_back(std::move(task));
      }
      round.summary = std::move(summary);
      round.closed = true;
      break;
    }
    case EventKind::HoldoutCarved: {
      auto& c = mutable_at(campaign_id);
      for (const auto& id : p.at("holdout_ids")) c.holdout.insert(id.get<ItemId>());
      c.holdout_carved = true;
      for (const auto& id : c.holdout) erase_value(c.reannotation_queue, id);
      for (auto& task : c.review_tasks) {
        if (c.holdout.count(task.item_id)) task.pending.clear();
      }
      break;
    }
  }
  last_sequence_ = event.sequence;
}

namespace {

Json round_to_json(const RoundState& r) {
  Json expired = Json::array();
  for (const auto& [item, annotator] : r.expired) expired.push_back({item, annotator});
  return Json{{"round_id", r.round_id},
              {"closed", r.closed},
              {"k", r.k},
              {"seed", r.seed},
              {"items", r.items},
              {"reannotation_items", r.reannotation_items},
              {"assigned", r.assigned},
              {"expired", expired},
              {"summary", r.summary ? Json(*r.summary) : Json()}};
}

RoundState round_from_json(const Json& j) {
  RoundState r;
  r.round_id = j.at("round_id").get<int>();
  r.closed = j.at("closed").get<bool>();
  r.k = j.at("k").get<int>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.items = j.at("items").get<std::vector<ItemId>>();
  r.reannotation_items = j.at("reannotation_items").get<std::set<ItemId>>();
  r.assigned = j.at("assigned").get<std::map<ItemId, std::set<AnnotatorId>>>();
  for (const auto& pair : j.at("expired")) {
    r.expired.emplace(pair.at(0).get<ItemId>(), pair.at(1).get<AnnotatorId>());
  }
  if (!j.at("summary").is_null()) r.summary = j.at("summary").get<RoundSummary>();
  return r;
}

Json campaign_to_json(const Campaign& c) {
  Json items = Json::array();
  for (const auto& id : c.item_order) items.push_back(c.items.at(id));
  Json rounds = Json::array();
  for (const auto& [id, r] : c.rounds) rounds.push_back(round_to_json(r));
  Json reviews = Json::array();
  for (const auto& t : c.review_tasks) {
    reviews.push_back({{"item_id", t.item_id},
                       {"round_id", t.round_id},
                       {"pending", t.pending},
                       {"done", t.done}});
  }
  return Json{{"id", c.id},
              {"schema", c.schema},
              {"token_hashes", c.token_hashes},
              {"anonymize_deliberation", c.anonymize_deliberation},
              {"reannotation_threshold", c.reannotation_threshold},
              {"items", items},
              {"rounds", rounds},
              {"annotations", c.annotations},
              {"acks", c.acks},
              {"reannotation_queue", c.reannotation_queue},
              {"review_tasks", reviews},
              {"harmonised", c.harmonised},
              {"holdout", c.holdout},
              {"holdout_carved", c.holdout_carved}};
}

Campaign campaign_from_json(const Json& j) {
  Campaign c;
  c.id = j.at("id").get<std::string>();
  c.schema = j.at("schema").get<LabellingSchema>();
  c.token_hashes = j.at("token_hashes").get<std::map<AnnotatorId, std::string>>();
  c.anonymize_deliberation = j.at("anonymize_deliberation").get<bool>();
  c.reannotation_threshold = j.at("reannotation_threshold").get<double>();
  for (const auto& item : j.at("items")) {
    auto parsed = item.get<Item>();
    c.item_order.push_back(parsed.id);
    c.items.emplace(parsed.id, std::move(parsed));
  }
  for (const auto& r : j.at("rounds")) {
    auto round = round_from_json(r);
    c.rounds.emplace(round.round_id, std::move(round));
  }
  c.annotations = j.at("annotations").get<std::vector<Annotation>>();
  for (std::size_t i = 0; i < c.annotations.size(); ++i) {
    c.annotation_index[c.annotations[i].item_id].push_back(i);
  }
  c.acks = j.at("acks").get<std::map<std::string, AnnotationRef>>();
  c.reannotation_queue = j.at("reannotation_queue").get<std::vector<ItemId>>();
  for (const auto& t : j.at("review_tasks")) {
    c.review_tasks.push_back(ReviewTask{t.at("item_id").get<ItemId>(), t.at("round_id").get<int>(),
                                        t.at("pending").get<std::set<AnnotatorId>>(),
                                        t.at("done").get<std::set<AnnotatorId>>()});
  }
  c.harmonised = j.at("harmonised").get<std::set<ItemId>>();
  c.holdout = j.at("holdout").get<std::set<ItemId>>();
  c.holdout_carved = j.at("holdout_carved").get<bool>();
  return c;
}

}  // namespace

Json CampaignState::to_json() const {
  Json campaigns = Json::object();
  for (const auto& [id, c] : campaigns_) campaigns[id] = campaign_to_json(c);
  return Json{{"last_sequence", last_sequence_}, {"campaigns", campaigns}};
}

CampaignState CampaignState::from_json(const Json& j) {
  CampaignState state;
  state.last_sequence_ = j.at("last_sequence").get<std::uint64_t>();
  for (const auto& [id, c] : j.at("campaigns").items()) {
    state.campaigns_.emplace(id, campaign_from_json(c));
  }
  return state;
}

CampaignState replay(const std::vector<Event>& events, CampaignState initial) {
  for (const auto& e : events) {
    if (e.sequence <= initial.last_sequence()) continue;
    initial.apply(e);
  }
  return initial;
}

}  // namespace coannot
