#include "coannot/domain.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include "coannot/error.hpp"

namespace coannot {

bool LabellingSchema::has_flag(const std::string& flag) const {
  return std::find(flags.begin(), flags.end(), flag) != flags.end();
}

LabellingSchema default_schema() {
  LabellingSchema schema;
  schema.flags = {"stereotyping", "dehumanisation", "deindividuation",
                  "vilification", "calls_to_violence"};
  return schema;
}

std::vector<std::string> validate_schema(const LabellingSchema& schema) {
  std::vector<std::string> errors;
  if (schema.classification_scale.size() < 2) {
    errors.emplace_back("fewer than 2 classes");
  }
  for (std::size_t i = 0; i < schema.classification_scale.size(); ++i) {
    if (schema.classification_scale[i].value != static_cast<int>(i)) {
      errors.push_back("class values must be consecutive from 0 (position " +
                       std::to_string(i) + " has value " +
                       std::to_string(schema.classification_scale[i].value) + ")");
      break;
    }
  }
  std::unordered_set<std::string> seen;
  for (const auto& flag : schema.flags) {
    if (flag.empty()) errors.emplace_back("empty flag name");
    if (!seen.insert(flag).second) errors.push_back("duplicate flag: " + flag);
  }
  if (schema.min_annotators_per_item < 1) {
    errors.emplace_back("min_annotators_per_item must be >= 1");
  }
  if (!(schema.high_disagreement_threshold >= 0.0 &&
        schema.high_disagreement_threshold <= 1.0)) {
    errors.emplace_back("high_disagreement_threshold outside [0,1]");
  }
  return errors;
}

BinaryLabel collapse_binary(int class_value, const LabellingSchema& schema) {
  if (!schema.in_scale(class_value)) {
    throw Error(ErrorCode::InvalidClass,
                "class " + std::to_string(class_value) + " out of scale");
  }
  return class_value == 0 ? BinaryLabel::Negative : BinaryLabel::Positive;
}

std::vector<std::string> validate_annotation(const AnnotationContent& content,
                                             const LabellingSchema& schema) {
  std::vector<std::string> errors;
  if (!schema.in_scale(content.class_value)) {
    errors.push_back("class out of scale: " + std::to_string(content.class_value));
  }
  for (const auto& flag : content.flags) {
    if (!schema.has_flag(flag)) errors.push_back("undeclared flag: " + flag);
  }
  return errors;
}

std::vector<std::string> validate_annotation(const Annotation& annotation,
                                             const LabellingSchema& schema) {
  auto errors = validate_annotation(annotation.content, schema);
  if (annotation.item_id.empty()) errors.emplace_back("missing item id");
  if (annotation.annotator_id.empty()) errors.emplace_back("missing annotator id");
  return errors;
}

std::string_view to_string(ReviewPolicy policy) {
  return policy == ReviewPolicy::AnyPositive ? "any-positive" : "aggregate-positive";
}

ReviewPolicy parse_review_policy(std::string_view text) {
  if (text == "any-positive") return ReviewPolicy::AnyPositive;
  if (text == "aggregate-positive") return ReviewPolicy::AggregatePositive;
  throw Error(ErrorCode::Validation, "unknown review policy: " + std::string(text));
}

std::string_view to_string(BinaryLabel label) {
  return label == BinaryLabel::Positive ? "positive" : "negative";
}

std::string_view to_string(AggregationMethod method) {
  switch (method) {
    case AggregationMethod::Plurality: return "plurality";
    case AggregationMethod::TieLower: return "tie-lower";
    case AggregationMethod::Harmonised: return "harmonised";
    case AggregationMethod::ReviewConfirmed: return "review-confirmed";
  }
  return "plurality";
}

AggregationMethod parse_aggregation_method(std::string_view text) {
  if (text == "plurality") return AggregationMethod::Plurality;
  if (text == "tie-lower") return AggregationMethod::TieLower;
  if (text == "harmonised") return AggregationMethod::Harmonised;
  if (text == "review-confirmed") return AggregationMethod::ReviewConfirmed;
  throw Error(ErrorCode::Validation, "unknown aggregation method: " + std::string(text));
}

void to_json(Json& j, const LabellingSchema& schema) {
  Json scale = Json::array();
  for (const auto& level : schema.classification_scale) {
    scale.push_back({{"value", level.value}, {"name", level.name}});
  }
  j = Json{{"classification_scale", scale},
           {"flags", schema.flags},
           {"min_annotators_per_item", schema.min_annotators_per_item},
           {"review_policy", to_string(schema.review_policy)},
           {"high_disagreement_threshold", schema.high_disagreement_threshold}};
}

void from_json(const Json& j, LabellingSchema& schema) {
  schema = LabellingSchema{};
  if (j.contains("classification_scale")) {
    schema.classification_scale.clear();
    for (const auto& level : j.at("classification_scale")) {
      schema.classification_scale.push_back(
          {level.at("value").get<int>(), level.at("name").get<std::string>()});
    }
  }
  schema.flags = j.value("flags", std::vector<std::string>{});
  schema.min_annotators_per_item = j.value("min_annotators_per_item", 3);
  schema.review_policy =
      parse_review_policy(j.value("review_policy", std::string("any-positive")));
  schema.high_disagreement_threshold = j.value("high_disagreement_threshold", 0.5);
}

void to_json(Json& j, const Item& item) {
  j = Json{{"id", item.id}, {"text", item.text}, {"meta", item.meta}};
  if (!item.pool_id.empty()) j["pool_id"] = item.pool_id;
}

void from_json(const Json& j, Item& item) {
  item.id = j.at("id").get<std::string>();
  item.text = j.at("text").get<std::string>();
  item.meta = j.value("meta", Json::object());
  item.pool_id = j.value("pool_id", std::string{});
}

void to_json(Json& j, const AnnotationContent& content) {
  j = Json{{"class_value", content.class_value},
           {"flags", content.flags},
           {"mark_for_review", content.mark_for_review}};
}

void from_json(const Json& j, AnnotationContent& content) {
  content.class_value = j.at("class_value").get<int>();
  content.flags = j.value("flags", std::set<std::string>{});
  content.mark_for_review = j.value("mark_for_review", false);
}

void to_json(Json& j, const Annotation& a) {
  j = Json{{"ref", a.ref},
           {"item_id", a.item_id},
           {"annotator_id", a.annotator_id},
           {"round_id", a.round_id},
           {"class_value", a.content.class_value},
           {"flags", a.content.flags},
           {"mark_for_review", a.content.mark_for_review},
           {"submitted_at", format_timestamp(a.submitted_at)},
           {"superseded_by", a.superseded_by ? Json(*a.superseded_by) : Json()},
           {"is_review", a.is_review}};
}

void from_json(const Json& j, Annotation& a) {
  a.ref = j.at("ref").get<AnnotationRef>();
  a.item_id = j.at("item_id").get<std::string>();
  a.annotator_id = j.at("annotator_id").get<std::string>();
  a.round_id = j.at("round_id").get<int>();
  from_json(j, a.content);
  a.submitted_at = parse_timestamp(j.at("submitted_at").get<std::string>());
  const auto& sup = j.at("superseded_by");
  a.superseded_by = sup.is_null() ? std::nullopt
                                  : std::optional<AnnotationRef>(sup.get<AnnotationRef>());
  a.is_review = j.value("is_review", false);
}

void to_json(Json& j, const AggregateLabel& label) {
  j = Json{{"item_id", label.item_id},
           {"final_class", label.final_class},
           {"method", to_string(label.method)},
           {"flag_consensus", label.flag_consensus},
           {"contributing_annotations", label.contributing_annotations}};
}

void from_json(const Json& j, AggregateLabel& label) {
  label.item_id = j.at("item_id").get<std::string>();
  label.final_class = j.at("final_class").get<int>();
  label.method = parse_aggregation_method(j.at("method").get<std::string>());
  label.flag_consensus = j.at("flag_consensus").get<std::set<std::string>>();
  label.contributing_annotations =
      j.at("contributing_annotations").get<std::vector<AnnotationRef>>();
}

std::vector<Item> read_items_jsonl(std::istream& in) {
  std::vector<Item> items;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Item item;
    try {
      item = Json::parse(line).get<Item>();
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::Validation,
                  "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (item.text.empty()) {
      throw Error(ErrorCode::Validation,
                  "line " + std::to_string(line_no) + ": empty text for item " + item.id);
    }
    if (!ids.insert(item.id).second) {
      throw Error(ErrorCode::Validation,
                  "line " + std::to_string(line_no) + ": duplicate item id " + item.id);
    }
    items.push_back(std::move(item));
  }
  return items;
}

std::vector<Item> load_items_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  return read_items_jsonl(in);
}

void write_items_jsonl(std::ostream& out, const std::vector<Item>& items) {
  for (const auto& item : items) out << Json(item).dump() << '\n';
}

LabellingSchema load_schema_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  LabellingSchema schema;
  try {
    schema = Json::parse(in).get<LabellingSchema>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Validation, path + ": " + e.what());
  }
  if (auto errors = validate_schema(schema); !errors.empty()) {
    throw Error(ErrorCode::Validation, "invalid schema " + path, std::move(errors));
  }
  return schema;
}

}  // namespace coannot
