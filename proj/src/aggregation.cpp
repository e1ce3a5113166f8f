#include "coannot/aggregation.hpp"

#include <algorithm>
#include <map>
#include <vector>

#include "coannot/error.hpp"

namespace coannot {

ClassDecision aggregate_classification(std::span<const int> class_values,
                                       const LabellingSchema& schema) {
  if (class_values.empty()) {
    throw Error(ErrorCode::InsufficientData, "no annotations to aggregate");
  }
  std::vector<int> votes(static_cast<std::size_t>(schema.class_count()), 0);
  for (int v : class_values) {
    if (!schema.in_scale(v)) {
      throw Error(ErrorCode::InvalidClass, "class " + std::to_string(v) + " out of scale");
    }
    ++votes[static_cast<std::size_t>(v)];
  }
  const int top = *std::max_element(votes.begin(), votes.end());
  const auto first = std::find(votes.begin(), votes.end(), top);
  const bool tied = std::count(votes.begin(), votes.end(), top) > 1;
  return {static_cast<int>(first - votes.begin()),
          tied ? AggregationMethod::TieLower : AggregationMethod::Plurality};
}

std::set<std::string> aggregate_flags(std::span<const Annotation> annotations,
                                      const LabellingSchema& schema) {
  if (annotations.empty()) {
    throw Error(ErrorCode::InsufficientData, "no annotations to aggregate");
  }
  std::map<std::string, std::size_t> asserted;
  for (const auto& a : annotations) {
    for (const auto& flag : a.content.flags) ++asserted[flag];
  }
  std::set<std::string> consensus;
  for (const auto& flag : schema.flags) {
    if (2 * asserted[flag] > annotations.size()) consensus.insert(flag);
  }
  return consensus;
}

bool review_candidate(std::span<const Annotation> annotations, ReviewPolicy policy,
                      const LabellingSchema& schema) {
  if (annotations.empty()) {
    throw Error(ErrorCode::InsufficientData, "no annotations on item");
  }
  const bool marked = std::any_of(annotations.begin(), annotations.end(),
                                  [](const auto& a) { return a.content.mark_for_review; });
  if (marked) return true;
  if (policy == ReviewPolicy::AnyPositive) {
    return std::any_of(annotations.begin(), annotations.end(),
                       [](const auto& a) { return a.content.class_value >= 1; });
  }
  std::vector<int> classes;
  for (const auto& a : annotations) classes.push_back(a.content.class_value);
  return aggregate_classification(classes, schema).final_class >= 1;
}

AggregateLabel aggregate_item(const ItemId& item_id,
                              std::span<const Annotation> annotations,
                              const LabellingSchema& schema, bool harmonised) {
  std::vector<int> classes;
  AggregateLabel label;
  label.item_id = item_id;
  bool reviewed = false;
  for (const auto& a : annotations) {
    classes.push_back(a.content.class_value);
    label.contributing_annotations.push_back(a.ref);
    reviewed = reviewed || a.is_review;
  }
  const auto decision = aggregate_classification(classes, schema);
  label.final_class = decision.final_class;
  label.method = decision.method;
  label.flag_consensus = aggregate_flags(annotations, schema);
  if (harmonised) {
    label.method = AggregationMethod::Harmonised;
  } else if (reviewed && decision.method == AggregationMethod::Plurality &&
             decision.final_class >= 1) {
    label.method = AggregationMethod::ReviewConfirmed;
  }
  return label;
}

}  // namespace coannot
