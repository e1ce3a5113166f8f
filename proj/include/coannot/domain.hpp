#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "coannot/time_util.hpp"

namespace coannot {

using Json = nlohmann::json;

using ItemId = std::string;
using AnnotatorId = std::string;
using RoundId = int;
/// Annotations are identified by the sequence number of the event that
/// recorded them.
using AnnotationRef = std::uint64_t;

struct ClassLevel {
  int value = 0;
  std::string name;

  friend bool operator==(const ClassLevel&, const ClassLevel&) = default;
};

enum class ReviewPolicy { AnyPositive, AggregatePositive };

struct LabellingSchema {
  std::vector<ClassLevel> classification_scale{
      {0, "Not"}, {1, "Potentially"}, {2, "Definitely"}};
  std::vector<std::string> flags;
  int min_annotators_per_item = 3;
  ReviewPolicy review_policy = ReviewPolicy::AnyPositive;
  double high_disagreement_threshold = 0.5;

  int class_count() const { return static_cast<int>(classification_scale.size()); }
  bool in_scale(int value) const { return value >= 0 && value < class_count(); }
  bool has_flag(const std::string& flag) const;

  friend bool operator==(const LabellingSchema&, const LabellingSchema&) = default;
};

/// Three-class schema with the five affective-polarisation flags.
LabellingSchema default_schema();

struct Item {
  ItemId id;
  std::string text;
  Json meta = Json::object();
  std::string pool_id;

  friend bool operator==(const Item&, const Item&) = default;
};

/// What an annotator asserts about one item. Flags present in the set are
/// asserted true; absent flags are false.
struct AnnotationContent {
  int class_value = 0;
  std::set<std::string> flags;
  bool mark_for_review = false;

  friend bool operator==(const AnnotationContent&, const AnnotationContent&) = default;
};

struct Annotation {
  AnnotationRef ref = 0;
  ItemId item_id;
  AnnotatorId annotator_id;
  RoundId round_id = 0;
  AnnotationContent content;
  Timestamp submitted_at{};
  std::optional<AnnotationRef> superseded_by;
  bool is_review = false;

  bool live() const { return !superseded_by.has_value(); }

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

enum class BinaryLabel { Negative, Positive };

enum class AggregationMethod { Plurality, TieLower, Harmonised, ReviewConfirmed };

struct AggregateLabel {
  ItemId item_id;
  int final_class = 0;
  AggregationMethod method = AggregationMethod::Plurality;
  std::set<std::string> flag_consensus;
  std::vector<AnnotationRef> contributing_annotations;

  friend bool operator==(const AggregateLabel&, const AggregateLabel&) = default;
};

/// Every violated schema invariant, empty when the schema is valid.
std::vector<std::string> validate_schema(const LabellingSchema& schema);

/// Class 0 is the only negative class, whatever the scale size.
/// Throws Error(InvalidClass) for values outside the scale.
BinaryLabel collapse_binary(int class_value, const LabellingSchema& schema);

std::vector<std::string> validate_annotation(const AnnotationContent& content,
                                             const LabellingSchema& schema);
std::vector<std::string> validate_annotation(const Annotation& annotation,
                                             const LabellingSchema& schema);

std::string_view to_string(ReviewPolicy policy);
ReviewPolicy parse_review_policy(std::string_view text);
std::string_view to_string(BinaryLabel label);
std::string_view to_string(AggregationMethod method);
AggregationMethod parse_aggregation_method(std::string_view text);

void to_json(Json& j, const LabellingSchema& schema);
void from_json(const Json& j, LabellingSchema& schema);
void to_json(Json& j, const Item& item);
void from_json(const Json& j, Item& item);
void to_json(Json& j, const AnnotationContent& content);
void from_json(const Json& j, AnnotationContent& content);
void to_json(Json& j, const Annotation& annotation);
void from_json(const Json& j, Annotation& annotation);
void to_json(Json& j, const AggregateLabel& label);
void from_json(const Json& j, AggregateLabel& label);

/// Reads one {"id","text","meta"} object per line. Blank lines are skipped;
/// duplicate ids and empty texts are rejected with the offending line number.
std::vector<Item> read_items_jsonl(std::istream& in);
std::vector<Item> load_items_file(const std::string& path);
void write_items_jsonl(std::ostream& out, const std::vector<Item>& items);

/// Loads and validates a schema JSON document.
LabellingSchema load_schema_file(const std::string& path);

}  // namespace coannot
