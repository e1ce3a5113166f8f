#pragma once

#include <set>
#include <span>
#include <string>

#include "coannot/domain.hpp"

namespace coannot {

struct ClassDecision {
  int final_class = 0;
  AggregationMethod method = AggregationMethod::Plurality;

  friend bool operator==(const ClassDecision&, const ClassDecision&) = default;
};

/// Strict plurality wins; any tie at the top count resolves to the lowest
/// tied class, so positives are a lower bound.
ClassDecision aggregate_classification(std::span<const int> class_values,
                                       const LabellingSchema& schema);

/// A flag is in the consensus iff strictly more than half of the
/// annotations assert it. An exact half is absent.
std::set<std::string> aggregate_flags(std::span<const Annotation> annotations,
                                      const LabellingSchema& schema);

/// Whether the item goes to broadcast review.
bool review_candidate(std::span<const Annotation> annotations, ReviewPolicy policy,
                      const LabellingSchema& schema);

/// Aggregate label over the given live annotations. When any of them is a
/// review and the outcome is a positive plurality, the method is
/// review-confirmed. A single harmonised record yields method harmonised.
AggregateLabel aggregate_item(const ItemId& item_id,
                              std::span<const Annotation> annotations,
                              const LabellingSchema& schema, bool harmonised = false);

}  // namespace coannot
