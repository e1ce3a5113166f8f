#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "coannot/campaign_state.hpp"
#include "coannot/event_log.hpp"

namespace coannot {

struct AnnotatorCredential {
  AnnotatorId id;
  std::string token;
};

struct CampaignSpec {
  std::string id;
  LabellingSchema schema;
  std::vector<AnnotatorCredential> annotators;
  bool anonymize_deliberation = true;
  /// Defaults to schema.high_disagreement_threshold.
  std::optional<double> reannotation_threshold;
};

struct SubmitAck {
  std::uint64_t sequence = 0;
  AnnotationRef annotation = 0;
  bool duplicate = false;

  friend bool operator==(const SubmitAck&, const SubmitAck&) = default;
};

enum class WorkKind { Review, Reannotation, Fresh };
std::string_view to_string(WorkKind kind);

struct WorkUnit {
  ItemId item_id;
  RoundId round_id = 0;
  WorkKind kind = WorkKind::Fresh;
  std::string text;

  friend bool operator==(const WorkUnit&, const WorkUnit&) = default;
};

struct CloseResult {
  RoundSummary summary;
  bool already_closed = false;
};

struct Principal {
  std::string campaign_id;
  AnnotatorId annotator_id;
};

struct ServiceOptions {
  /// Empty path keeps the log in memory.
  std::filesystem::path log_path;
  /// Write a state snapshot every N events (0 disables). Snapshots only
  /// speed up start-up; the log stays authoritative.
  std::size_t snapshot_every = 1000;
  Clock clock = system_now;
};

/// Campaign workflow over an append-only event log. Every mutation is
/// validated, appended (durably) and then folded into the in-memory state
/// under a single writer lock; queries take a shared lock.
class CampaignService {
 public:
  explicit CampaignService(ServiceOptions options = {});

  void create_campaign(const CampaignSpec& spec);
  std::size_t import_items(const std::string& campaign_id, std::vector<Item> items);
  /// Opens the next round with the pending re-annotation queue followed by
  /// `fresh_count` fresh items, each assigned to k annotators.
  RoundId open_round(const std::string& campaign_id, std::size_t fresh_count, int k,
                     std::uint64_t seed);
  /// Expires an unsubmitted assignment and hands the item to the least
  /// loaded annotator not yet holding it (if any).
  std::optional<AnnotatorId> expire_assignment(const std::string& campaign_id, RoundId round_id,
                                               const ItemId& item_id,
                                               const AnnotatorId& annotator_id);
  SubmitAck submit_annotation(const std::string& campaign_id, const AnnotatorId& annotator_id,
                              const ItemId& item_id, RoundId round_id,
                              const AnnotationContent& content,
                              const std::string& idempotency_key);
  SubmitAck submit_review(const std::string& campaign_id, const AnnotatorId& annotator_id,
                          const ItemId& item_id, RoundId round_id,
                          const AnnotationContent& content, const std::string& idempotency_key);
  AggregateLabel harmonise_item(const std::string& campaign_id, const ItemId& item_id,
                                const AnnotationContent& consensus,
                                const std::string& session_ref);
  CloseResult close_round(const std::string& campaign_id, RoundId round_id);
  std::set<ItemId> carve_holdout(const std::string& campaign_id, double fraction,
                                 std::uint64_t seed);

  std::optional<Principal> authenticate(const std::string& token) const;
  std::vector<WorkUnit> next_queue(const std::string& campaign_id,
                                   const AnnotatorId& annotator_id) const;
  Json agreement(const std::string& campaign_id) const;
  Json deliberation(const std::string& campaign_id) const;
  std::vector<AggregateLabel> labels(const std::string& campaign_id) const;
  std::vector<LabelledItem> labelled_corpus(const std::string& campaign_id) const;
  LabellingSchema schema(const std::string& campaign_id) const;

  /// Deep copy of the materialised state.
  CampaignState state() const;
  std::uint64_t last_sequence() const;
  std::filesystem::path snapshot_path() const;

 private:
  const Event& commit(EventKind kind, Json payload);
  SubmitAck submit(EventKind kind, const std::string& campaign_id,
                   const AnnotatorId& annotator_id, const ItemId& item_id, RoundId round_id,
                   const AnnotationContent& content, const std::string& idempotency_key);
  void write_snapshot() const;

  ServiceOptions options_;
  mutable std::shared_mutex mutex_;
  EventLog log_;
  CampaignState state_;
};

/// CSV columns: item_id, final_class, binary_label, method, flags (';'-joined).
void write_labels_csv(std::ostream& out, const std::vector<AggregateLabel>& labels);

enum class ExportKind { Train, Test, Labels };
ExportKind parse_export_kind(std::string_view text);

/// train: labelled items outside the holdout; test: labelled holdout items;
/// labels: aggregate label CSV.
std::string export_campaign(const Campaign& campaign, ExportKind kind, bool include_flags = true);

}  // namespace coannot
