#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "coannot/domain.hpp"

namespace coannot {

enum class EventKind {
  CampaignCreated,
  ItemsImported,
  RoundOpened,
  AssignmentIssued,
  AnnotationSubmitted,
  ReviewSubmitted,
  ItemHarmonised,
  RoundClosed,
  HoldoutCarved,
};

std::string_view to_string(EventKind kind);
EventKind parse_event_kind(std::string_view text);

struct Event {
  std::uint64_t sequence = 0;
  EventKind kind = EventKind::CampaignCreated;
  Json payload;
  Timestamp recorded_at{};

  friend bool operator==(const Event&, const Event&) = default;
};

void to_json(Json& j, const Event& event);
void from_json(const Json& j, Event& event);

/// Structural checks on a payload for its kind; empty when well formed.
std::vector<std::string> validate_payload(EventKind kind, const Json& payload);

/// Parses newline-delimited events. Sequence numbers must be dense from 1;
/// a gap raises Error(Corruption) naming the first missing number. A final
/// line without a terminating newline that does not parse is treated as a
/// torn write and dropped (reported through `torn_tail`).
std::vector<Event> read_event_log(std::istream& in, bool* torn_tail = nullptr);

/// Append-only event log, optionally backed by a file. Each append is
/// flushed and fsync'd before the sequence number is returned.
class EventLog {
 public:
  /// In-memory log.
  EventLog();
  /// Opens (or creates) a file-backed log and loads existing events.
  explicit EventLog(const std::filesystem::path& path);
  ~EventLog();

  EventLog(const EventLog&) = delete;
  EventLog& operator=(const EventLog&) = delete;
  EventLog(EventLog&&) noexcept;
  EventLog& operator=(EventLog&&) noexcept;

  /// Validates the payload, assigns the next sequence number and persists.
  /// Nothing is written when validation fails.
  const Event& append(EventKind kind, Json payload, Timestamp recorded_at);

  const std::vector<Event>& events() const { return events_; }
  std::uint64_t last_sequence() const { return events_.empty() ? 0 : events_.back().sequence; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::FILE* file_ = nullptr;
  std::vector<Event> events_;
};

}  // namespace coannot
