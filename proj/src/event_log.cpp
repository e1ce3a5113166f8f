#include "coannot/event_log.hpp"

#include <unistd.h>

#include <fstream>
#include <istream>
#include <sstream>

#include "coannot/error.hpp"

namespace coannot {

namespace {

constexpr std::pair<EventKind, std::string_view> kKindNames[] = {
    {EventKind::CampaignCreated, "campaign-created"},
    {EventKind::ItemsImported, "items-imported"},
    {EventKind::RoundOpened, "round-opened"},
    {EventKind::AssignmentIssued, "assignment-issued"},
    {EventKind::AnnotationSubmitted, "annotation-submitted"},
    {EventKind::ReviewSubmitted, "review-submitted"},
    {EventKind::ItemHarmonised, "item-harmonised"},
    {EventKind::RoundClosed, "round-closed"},
    {EventKind::HoldoutCarved, "holdout-carved"},
};

}  // namespace

std::string_view to_string(EventKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

EventKind parse_event_kind(std::string_view text) {
  for (const auto& [k, name] : kKindNames) {
    if (name == text) return k;
  }
  throw Error(ErrorCode::Validation, "unknown event kind: " + std::string(text));
}

void to_json(Json& j, const Event& event) {
  j = Json{{"seq", event.sequence},
           {"kind", to_string(event.kind)},
           {"recorded_at", format_timestamp(event.recorded_at)},
           {"payload", event.payload}};
}

void from_json(const Json& j, Event& event) {
  event.sequence = j.at("seq").get<std::uint64_t>();
  event.kind = parse_event_kind(j.at("kind").get<std::string>());
  event.recorded_at = parse_timestamp(j.at("recorded_at").get<std::string>());
  event.payload = j.at("payload");
}

namespace {

void require(std::vector<std::string>& errors, const Json& p, const char* key,
             Json::value_t type) {
  if (!p.contains(key)) {
    errors.push_back(std::string("missing field ") + key);
  } else if (p.at(key).type() != type &&
             !(type == Json::value_t::number_integer &&
               p.at(key).type() == Json::value_t::number_unsigned) &&
             !(type == Json::value_t::number_float && p.at(key).is_number())) {
    errors.push_back(std::string("field ") + key + " has wrong type");
  }
}

}  // namespace

std::vector<std::string> validate_payload(EventKind kind, const Json& p) {
  using T = Json::value_t;
  std::vector<std::string> errors;
  if (!p.is_object()) return {"payload must be an object"};
  require(errors, p, "campaign_id", T::string);
  switch (kind) {
    case EventKind::CampaignCreated:
      require(errors, p, "schema", T::object);
      require(errors, p, "annotators", T::array);
      if (p.contains("schema") && p["schema"].is_object()) {
        try {
          for (auto& e : validate_schema(p["schema"].get<LabellingSchema>())) {
            errors.push_back("schema: " + e);
          }
        } catch (const std::exception& e) {
          errors.push_back(std::string("schema: ") + e.what());
        }
      }
      break;
    case EventKind::ItemsImported:
      require(errors, p, "items", T::array);
      break;
    case EventKind::RoundOpened:
      require(errors, p, "round_id", T::number_integer);
      require(errors, p, "items", T::array);
      require(errors, p, "k", T::number_integer);
      require(errors, p, "seed", T::number_integer);
      break;
    case EventKind::AssignmentIssued:
      require(errors, p, "round_id", T::number_integer);
      require(errors, p, "assignments", T::object);
      break;
    case EventKind::AnnotationSubmitted:
    case EventKind::ReviewSubmitted:
      require(errors, p, "round_id", T::number_integer);
      require(errors, p, "item_id", T::string);
      require(errors, p, "annotator_id", T::string);
      require(errors, p, "content", T::object);
      require(errors, p, "idempotency_key", T::string);
      if (p.contains("content") && p["content"].is_object() &&
          !p["content"].contains("class_value")) {
        errors.emplace_back("content.class_value missing");
      }
      break;
    case EventKind::ItemHarmonised:
      require(errors, p, "item_id", T::string);
      require(errors, p, "session_ref", T::string);
      require(errors, p, "content", T::object);
      break;
    case EventKind::RoundClosed:
      require(errors, p, "round_id", T::number_integer);
      break;
    case EventKind::HoldoutCarved:
      require(errors, p, "fraction", T::number_float);
      require(errors, p, "seed", T::number_integer);
      require(errors, p, "holdout_ids", T::array);
      break;
  }
  return errors;
}

std::vector<Event> read_event_log(std::istream& in, bool* torn_tail) {
  if (torn_tail) *torn_tail = false;
  std::vector<Event> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const bool terminated = !in.eof();
    if (line.empty()) continue;
    Event event;
    try {
      event = Json::parse(line).get<Event>();
    } catch (const std::exception& e) {
      if (!terminated) {
        if (torn_tail) *torn_tail = true;
        break;
      }
      throw Error(ErrorCode::Corruption,
                  "event log line " + std::to_string(line_no) + ": " + e.what());
    }
    const std::uint64_t expected = events.size() + 1;
    if (event.sequence != expected) {
      throw Error(ErrorCode::Corruption,
                  "event log gap: missing sequence number " + std::to_string(expected),
                  {std::to_string(expected)});
    }
    events.push_back(std::move(event));
  }
  return events;
}

EventLog::EventLog() = default;

EventLog::EventLog(const std::filesystem::path& path) : path_(path) {
  if (std::filesystem::exists(path_)) {
    std::ifstream in(path_, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read event log " + path_.string());
    bool torn = false;
    events_ = read_event_log(in, &torn);
    if (torn) {
      // Rewrite without the torn tail so later appends start on a clean line.
      std::ostringstream clean;
      for (const auto& e : events_) clean << Json(e).dump() << '\n';
      std::ofstream out(path_, std::ios::binary | std::ios::trunc);
      out << clean.str();
      if (!out) throw Error(ErrorCode::Io, "cannot repair event log " + path_.string());
    }
  } else if (path_.has_parent_path()) {
    std::filesystem::create_directories(path_.parent_path());
  }
  file_ = std::fopen(path_.c_str(), "ab");
  if (!file_) throw Error(ErrorCode::Io, "cannot open event log " + path_.string());
}

EventLog::~EventLog() {
  if (file_) std::fclose(file_);
}

EventLog::EventLog(EventLog&& other) noexcept
    : path_(std::move(other.path_)), file_(other.file_), events_(std::move(other.events_)) {
  other.file_ = nullptr;
}

EventLog& EventLog::operator=(EventLog&& other) noexcept {
  if (this != &other) {
    if (file_) std::fclose(file_);
    path_ = std::move(other.path_);
    file_ = other.file_;
    events_ = std::move(other.events_);
    other.file_ = nullptr;
  }
  return *this;
}

const Event& EventLog::append(EventKind kind, Json payload, Timestamp recorded_at) {
  if (auto errors = validate_payload(kind, payload); !errors.empty()) {
    throw Error(ErrorCode::Validation,
                "malformed " + std::string(to_string(kind)) + " payload", std::move(errors));
  }
  Event event{last_sequence() + 1, kind, std::move(payload), recorded_at};
  if (file_) {
    const std::string line = Json(event).dump() + "\n";
    if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() ||
        std::fflush(file_) != 0 || ::fsync(::fileno(file_)) != 0) {
      throw Error(ErrorCode::Io, "event log write failed: " + path_.string());
    }
  }
  events_.push_back(std::move(event));
  return events_.back();
}

}  // namespace coannot
