#include "coannot/service.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>

#include "coannot/aggregation.hpp"
#include "coannot/csv.hpp"
#include "coannot/error.hpp"

namespace coannot {

std::string_view to_string(WorkKind kind) {
  switch (kind) {
    case WorkKind::Review: return "review";
    case WorkKind::Reannotation: return "reannotation";
    case WorkKind::Fresh: return "fresh";
  }
  return "fresh";
}

namespace {

void check_content(const AnnotationContent& content, const LabellingSchema& schema) {
  if (auto errors = validate_annotation(content, schema); !errors.empty()) {
    throw Error(ErrorCode::Validation, "annotation does not match the schema", std::move(errors));
  }
}

const RoundState& round_of(const Campaign& c, RoundId round_id) {
  auto it = c.rounds.find(round_id);
  if (it == c.rounds.end()) {
    throw Error(ErrorCode::NotFound, "unknown round " + std::to_string(round_id));
  }
  return it->second;
}

bool has_submitted(const Campaign& c, const ItemId& item, const AnnotatorId& annotator,
                   RoundId round_id) {
  auto it = c.annotation_index.find(item);
  if (it == c.annotation_index.end()) return false;
  return std::any_of(it->second.begin(), it->second.end(), [&](std::size_t pos) {
    const auto& a = c.annotations[pos];
    return !a.is_review && a.annotator_id == annotator && a.round_id == round_id;
  });
}

}  // namespace

CampaignService::CampaignService(ServiceOptions options) : options_(std::move(options)) {
  if (!options_.clock) options_.clock = system_now;
  if (options_.log_path.empty()) return;

  log_ = EventLog(options_.log_path);
  const auto snap = snapshot_path();
  if (std::filesystem::exists(snap)) {
    try {
      std::ifstream in(snap);
      auto cached = CampaignState::from_json(Json::parse(in));
      if (cached.last_sequence() <= log_.last_sequence()) state_ = std::move(cached);
    } catch (const std::exception&) {
      state_ = CampaignState{};  // unusable cache; replay from scratch
    }
  }
  state_ = replay(log_.events(), std::move(state_));
}

std::filesystem::path CampaignService::snapshot_path() const {
  if (options_.log_path.empty()) return {};
  auto p = options_.log_path;
  p += ".snapshot.json";
  return p;
}

void CampaignService::write_snapshot() const {
  const auto target = snapshot_path();
  auto tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << state_.to_json().dump();
    if (!out) return;
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
}

const Event& CampaignService::commit(EventKind kind, Json payload) {
  const Event& event = log_.append(kind, std::move(payload), options_.clock());
  state_.apply(event);
  if (!options_.log_path.empty() && options_.snapshot_every > 0 &&
      event.sequence % options_.snapshot_every == 0) {
    write_snapshot();
  }
  return event;
}

void CampaignService::create_campaign(const CampaignSpec& spec) {
  if (spec.id.empty()) throw Error(ErrorCode::Validation, "campaign id is empty");
  if (auto errors = validate_schema(spec.schema); !errors.empty()) {
    throw Error(ErrorCode::Validation, "invalid schema", std::move(errors));
  }
  std::set<std::string> ids, tokens;
  Json annotators = Json::array();
  for (const auto& a : spec.annotators) {
    if (a.id.empty() || a.id.rfind("session:", 0) == 0) {
      throw Error(ErrorCode::Validation, "invalid annotator id '" + a.id + "'");
    }
    if (a.token.empty()) throw Error(ErrorCode::Validation, "annotator " + a.id + " has no token");
    if (!ids.insert(a.id).second) throw Error(ErrorCode::Validation, "duplicate annotator " + a.id);
    if (!tokens.insert(a.token).second) throw Error(ErrorCode::Validation, "duplicate token");
    annotators.push_back({{"id", a.id}, {"token_sha256", sha256_hex(a.token)}});
  }
  Json payload{{"campaign_id", spec.id},
               {"schema", spec.schema},
               {"annotators", annotators},
               {"anonymize_deliberation", spec.anonymize_deliberation}};
  if (spec.reannotation_threshold) payload["reannotation_threshold"] = *spec.reannotation_threshold;

  std::unique_lock lock(mutex_);
  if (state_.find(spec.id)) throw Error(ErrorCode::Conflict, "campaign exists: " + spec.id);
  commit(EventKind::CampaignCreated, std::move(payload));
}

std::size_t CampaignService::import_items(const std::string& campaign_id, std::vector<Item> items) {
  std::unique_lock lock(mutex_);
  const auto& c = state_.at(campaign_id);
  std::set<ItemId> seen;
  Json batch = Json::array();
  for (auto& item : items) {
    if (item.id.empty()) throw Error(ErrorCode::Validation, "item with empty id");
    if (item.text.empty()) throw Error(ErrorCode::Validation, "item " + item.id + " has empty text");
    if (c.items.count(item.id) || !seen.insert(item.id).second) {
      throw Error(ErrorCode::Conflict, "duplicate item id " + item.id);
    }
    batch.push_back(item);
  }
  if (batch.empty()) return 0;
  commit(EventKind::ItemsImported, Json{{"campaign_id", campaign_id}, {"items", batch}});
  return items.size();
}

RoundId CampaignService::open_round(const std::string& campaign_id, std::size_t fresh_count,
                                    int k, std::uint64_t seed) {
  std::unique_lock lock(mutex_);
  const auto& c = state_.at(campaign_id);
  if (c.open_round()) throw Error(ErrorCode::Conflict, "a round is already open");
  if (k < c.schema.min_annotators_per_item) {
    throw Error(ErrorCode::Validation, "k below min_annotators_per_item (" +
                                           std::to_string(c.schema.min_annotators_per_item) + ")");
  }
  const auto fresh = c.fresh_items();
  const auto batch = compose_round_batch(c.reannotation_queue, fresh, fresh_count);
  if (batch.empty()) throw Error(ErrorCode::Infeasible, "round would contain no items");

  std::vector<AnnotatorId> annotators;
  for (const auto& [id, hash] : c.token_hashes) annotators.push_back(id);
  const RoundId round_id = c.last_round_id() + 1;
  const auto assignment = assign_batch(batch, annotators, k, seed, round_id);

  commit(EventKind::RoundOpened, Json{{"campaign_id", campaign_id},
                                      {"round_id", round_id},
                                      {"items", batch},
                                      {"reannotation_items", c.reannotation_queue},
                                      {"k", k},
                                      {"seed", seed}});
  commit(EventKind::AssignmentIssued, Json{{"campaign_id", campaign_id},
                                           {"round_id", round_id},
                                           {"assignments", assignment.items}});
  return round_id;
}

std::optional<AnnotatorId> CampaignService::expire_assignment(const std::string& campaign_id,
                                                              RoundId round_id,
                                                              const ItemId& item_id,
                                                              const AnnotatorId& annotator_id) {
  std::unique_lock lock(mutex_);
  const auto& c = state_.at(campaign_id);
  const auto& round = round_of(c, round_id);
  if (round.closed) throw Error(ErrorCode::RoundClosed, "round is closed");
  auto it = round.assigned.find(item_id);
  if (it == round.assigned.end() || !it->second.count(annotator_id)) {
    throw Error(ErrorCode::NotFound, "no such assignment");
  }
  if (has_submitted(c, item_id, annotator_id, round_id)) {
    throw Error(ErrorCode::Conflict, "assignment already submitted");
  }
  std::map<AnnotatorId, int> load;
  for (const auto& [id, hash] : c.token_hashes) load[id] = 0;
  for (const auto& [item, holders] : round.assigned) {
    for (const auto& h : holders) ++load[h];
  }
  std::optional<AnnotatorId> replacement;
  for (const auto& [candidate, n] : load) {
    if (candidate == annotator_id || it->second.count(candidate) ||
        round.expired.count({item_id, candidate}) ||
        has_submitted(c, item_id, candidate, round_id)) {
      continue;
    }
    if (!replacement || n < load[*replacement]) replacement = candidate;
  }
  Json assignments = Json::object();
  if (replacement) assignments[item_id] = Json::array({*replacement});
  commit(EventKind::AssignmentIssued, Json{{"campaign_id", campaign_id},
                                           {"round_id", round_id},
                                           {"assignments", assignments},
                                           {"expired", Json::array({{item_id, annotator_id}})}});
  return replacement;
}

SubmitAck CampaignService::submit(EventKind kind, const std::string& campaign_id,
                                  const AnnotatorId& annotator_id, const ItemId& item_id,
                                  RoundId round_id, const AnnotationContent& content,
                                  const std::string& idempotency_key) {
  if (idempotency_key.empty()) throw Error(ErrorCode::Validation, "idempotency_key is required");
  std::unique_lock lock(mutex_);
  const auto& c = state_.at(campaign_id);
  if (!c.token_hashes.count(annotator_id)) {
    throw Error(ErrorCode::NotFound, "unknown annotator " + annotator_id);
  }
  if (auto it = c.acks.find(idempotency_slot(annotator_id, idempotency_key)); it != c.acks.end()) {
    return SubmitAck{it->second, it->second, true};
  }
  check_content(content, c.schema);
  if (!c.items.count(item_id)) throw Error(ErrorCode::NotFound, "unknown item " + item_id);
  if (c.holdout.count(item_id)) throw Error(ErrorCode::Conflict, "item is in the holdout");
  const auto& round = round_of(c, round_id);

  if (kind == EventKind::AnnotationSubmitted) {
    if (round.closed) throw Error(ErrorCode::RoundClosed, "round " + std::to_string(round_id) + " is closed");
    auto it = round.assigned.find(item_id);
    if (it == round.assigned.end() || !it->second.count(annotator_id)) {
      throw Error(ErrorCode::NotFound, "no such assignment");
    }
    if (has_submitted(c, item_id, annotator_id, round_id)) {
      throw Error(ErrorCode::Conflict, "annotation already submitted for this assignment");
    }
  } else {
    const bool pending = std::any_of(c.review_tasks.begin(), c.review_tasks.end(), [&](const auto& t) {
      return t.item_id == item_id && t.round_id == round_id && t.pending.count(annotator_id);
    });
    if (!pending) throw Error(ErrorCode::NotFound, "no such review request");
  }

  const auto& event = commit(kind, Json{{"campaign_id", campaign_id},
                                        {"round_id", round_id},
                                        {"item_id", item_id},
                                        {"annotator_id", annotator_id},
                                        {"content", content},
                                        {"idempotency_key", idempotency_key}});
  return SubmitAck{event.sequence, event.sequence, false};
}

SubmitAck CampaignService::submit_annotation(const std::string& campaign_id,
                                             const AnnotatorId& annotator_id,
                                             const ItemId& item_id, RoundId round_id,
                                             const AnnotationContent& content,
                                             const std::string& idempotency_key) {
  return submit(EventKind::AnnotationSubmitted, campaign_id, annotator_id, item_id, round_id,
                content, idempotency_key);
}

SubmitAck CampaignService::submit_review(const std::string& campaign_id,
                                         const AnnotatorId& annotator_id, const ItemId& item_id,
                                         RoundId round_id, const AnnotationContent& content,
                                         const std::string& idempotency_key) {
  return submit(EventKind::ReviewSubmitted, campaign_id, annotator_id, item_id, round_id, content,
                idempotency_key);
}

AggregateLabel CampaignService::harmonise_item(const std::string& campaign_id,
                                               const ItemId& item_id,
                                               const AnnotationContent& consensus,
                                               const std::string& session_ref) {
  if (session_ref.empty()) throw Error(ErrorCode::Validation, "session_ref is required");
  std::unique_lock lock(mutex_);
  const auto& c = state_.at(campaign_id);
  if (!c.items.count(item_id)) throw Error(ErrorCode::NotFound, "unknown item " + item_id);
  check_content(consensus, c.schema);
  if (c.live_annotations(item_id).empty()) {
    throw Error(ErrorCode::InsufficientData, "item " + item_id + " has no annotations");
  }
  if (!c.deliberation_items().count(item_id)) {
    throw Error(ErrorCode::Conflict, "item " + item_id + " is not in a deliberation queue");
  }
  commit(EventKind::ItemHarmonised, Json{{"campaign_id", campaign_id},
                                         {"item_id", item_id},
                                         {"session_ref", session_ref},
                                         {"content", consensus}});
  return *state_.at(campaign_id).label(item_id);
}

CloseResult CampaignService::close_round(const std::string& campaign_id, RoundId round_id) {
  std::unique_lock lock(mutex_);
  const auto& c = state_.at(campaign_id);
  const auto& round = round_of(c, round_id);
  if (round.closed) return CloseResult{*round.summary, true};

  std::vector<std::string> outstanding;
  for (const auto& [item, holders] : round.assigned) {
    for (const auto& h : holders) {
      if (!has_submitted(c, item, h, round_id)) outstanding.push_back(item + ":" + h);
    }
  }
  if (!outstanding.empty()) {
    throw Error(ErrorCode::Conflict,
                std::to_string(outstanding.size()) + " assignments neither submitted nor expired",
                std::move(outstanding));
  }
  commit(EventKind::RoundClosed, Json{{"campaign_id", campaign_id}, {"round_id", round_id}});
  return CloseResult{*state_.at(campaign_id).rounds.at(round_id).summary, false};
}

std::set<ItemId> CampaignService::carve_holdout(const std::string& campaign_id, double fraction,
                                                std::uint64_t seed) {
  std::unique_lock lock(mutex_);
  const auto& c = state_.at(campaign_id);
  if (c.holdout_carved) throw Error(ErrorCode::Conflict, "holdout already carved");
  if (c.open_round()) throw Error(ErrorCode::Conflict, "close the open round first");
  std::vector<ItemId> labelled;
  for (const auto& l : c.labels()) labelled.push_back(l.item_id);
  auto holdout = coannot::carve_holdout(labelled, fraction, seed);
  commit(EventKind::HoldoutCarved, Json{{"campaign_id", campaign_id},
                                        {"fraction", fraction},
                                        {"seed", seed},
                                        {"holdout_ids", holdout}});
  return holdout;
}

std::optional<Principal> CampaignService::authenticate(const std::string& token) const {
  if (token.empty()) return std::nullopt;
  const auto hash = sha256_hex(token);
  std::shared_lock lock(mutex_);
  for (const auto& [cid, c] : state_.campaigns()) {
    for (const auto& [annotator, h] : c.token_hashes) {
      if (h == hash) return Principal{cid, annotator};
    }
  }
  return std::nullopt;
}

std::vector<WorkUnit> CampaignService::next_queue(const std::string& campaign_id,
                                                  const AnnotatorId& annotator_id) const {
  std::shared_lock lock(mutex_);
  const auto& c = state_.at(campaign_id);
  if (!c.token_hashes.count(annotator_id)) {
    throw Error(ErrorCode::NotFound, "unknown annotator " + annotator_id);
  }
  std::vector<WorkUnit> units;
  for (const auto& task : c.review_tasks) {
    if (task.pending.count(annotator_id) && !c.holdout.count(task.item_id)) {
      units.push_back({task.item_id, task.round_id, WorkKind::Review, c.items.at(task.item_id).text});
    }
  }
  if (const auto* round = c.open_round()) {
    std::vector<WorkUnit> fresh;
    for (const auto& item : round->items) {
      auto it = round->assigned.find(item);
      if (it == round->assigned.end() || !it->second.count(annotator_id)) continue;
      if (c.holdout.count(item) || has_submitted(c, item, annotator_id, round->round_id)) continue;
      const bool again = round->reannotation_items.count(item) > 0;
      WorkUnit unit{item, round->round_id, again ? WorkKind::Reannotation : WorkKind::Fresh,
                    c.items.at(item).text};
      (again ? units : fresh).push_back(std::move(unit));
    }
    units.insert(units.end(), fresh.begin(), fresh.end());
  }
  return units;
}

Json CampaignService::agreement(const std::string& campaign_id) const {
  std::shared_lock lock(mutex_);
  const auto& c = state_.at(campaign_id);
  Json rounds = Json::array();
  for (const auto& [id, round] : c.rounds) {
    if (round.summary) rounds.push_back(round.summary->agreement);
  }
  std::vector<std::string> warnings;
  const auto cumulative = cumulative_alpha(c.annotations, c.schema, &warnings);
  std::vector<Annotation> individual;
  for (const auto& a : c.annotations) {
    if (a.annotator_id.rfind("session:", 0) != 0) individual.push_back(a);
  }
  const auto pre = cumulative_alpha(individual, c.schema, &warnings, {.include_superseded = true});
  return Json{{"campaign_id", campaign_id},
              {"rounds", rounds},
              {"cumulative_alpha", cumulative ? Json(*cumulative) : Json()},
              {"pre_harmonisation_alpha", pre ? Json(*pre) : Json()},
              {"warnings", warnings}};
}

Json CampaignService::deliberation(const std::string& campaign_id) const {
  std::shared_lock lock(mutex_);
  const auto& c = state_.at(campaign_id);
  std::map<AnnotatorId, std::string> alias;
  {
    int n = 0;
    for (const auto& [id, hash] : c.token_hashes) {
      std::string label = "Annotator ";
      if (n < 26) label += static_cast<char>('A' + n);
      else label += std::to_string(n + 1);
      alias[id] = c.anonymize_deliberation ? label : id;
      ++n;
    }
  }
  struct Entry {
    ItemId id;
    double score;
    Json body;
  };
  std::vector<Entry> entries;
  for (const auto& item : c.deliberation_items()) {
    if (c.harmonised.count(item) || c.holdout.count(item)) continue;
    double score = 0.0;
    RoundId scored_round = 0;
    bool marked = false;
    for (const auto& [rid, round] : c.rounds) {
      if (!round.summary) continue;
      if (auto it = round.summary->agreement.item_scores.find(item);
          it != round.summary->agreement.item_scores.end()) {
        score = it->second.score;
        marked = it->second.marked_for_review;
        scored_round = rid;
      }
    }
    Json labels = Json::array();
    for (const auto& a : c.live_annotations(item)) {
      labels.push_back({{"annotator", alias.count(a.annotator_id) ? alias[a.annotator_id] : a.annotator_id},
                        {"round_id", a.round_id},
                        {"review", a.is_review},
                        {"content", a.content}});
    }
    entries.push_back({item, score,
                       Json{{"item_id", item},
                            {"text", c.items.at(item).text},
                            {"score", score},
                            {"round_id", scored_round},
                            {"marked_for_review", marked},
                            {"annotations", labels}}});
  }
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.score > b.score;
  });
  Json items = Json::array();
  for (auto& e : entries) items.push_back(std::move(e.body));
  return Json{{"campaign_id", campaign_id}, {"items", items}};
}

std::vector<AggregateLabel> CampaignService::labels(const std::string& campaign_id) const {
  std::shared_lock lock(mutex_);
  return state_.at(campaign_id).labels();
}

std::vector<LabelledItem> CampaignService::labelled_corpus(const std::string& campaign_id) const {
  std::shared_lock lock(mutex_);
  return state_.at(campaign_id).labelled_corpus();
}

LabellingSchema CampaignService::schema(const std::string& campaign_id) const {
  std::shared_lock lock(mutex_);
  return state_.at(campaign_id).schema;
}

CampaignState CampaignService::state() const {
  std::shared_lock lock(mutex_);
  return state_;
}

std::uint64_t CampaignService::last_sequence() const {
  std::shared_lock lock(mutex_);
  return state_.last_sequence();
}

void write_labels_csv(std::ostream& out, const std::vector<AggregateLabel>& labels) {
  out << "item_id,final_class,binary_label,method,flags\n";
  for (const auto& l : labels) {
    std::string flags;
    for (const auto& f : l.flag_consensus) flags += (flags.empty() ? "" : ";") + f;
    out << csv_field(l.item_id) << ',' << l.final_class << ',' << (l.final_class > 0 ? 1 : 0)
        << ',' << to_string(l.method) << ',' << csv_field(flags) << '\n';
  }
}

ExportKind parse_export_kind(std::string_view text) {
  if (text == "train") return ExportKind::Train;
  if (text == "test") return ExportKind::Test;
  if (text == "labels") return ExportKind::Labels;
  throw Error(ErrorCode::Validation, "unknown export kind: " + std::string(text));
}

std::string export_campaign(const Campaign& campaign, ExportKind kind, bool include_flags) {
  std::ostringstream out;
  if (kind == ExportKind::Labels) {
    write_labels_csv(out, campaign.labels());
    return out.str();
  }
  const bool want_holdout = kind == ExportKind::Test;
  const std::string split = want_holdout ? "test" : "train";
  for (const auto& item : campaign.labelled_corpus()) {
    if (campaign.holdout.count(item.item.id) != static_cast<std::size_t>(want_holdout)) continue;
    out << dataset_record(item, split, include_flags) << '\n';
  }
  return out.str();
}

}  // namespace coannot
