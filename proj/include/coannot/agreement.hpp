#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coannot/domain.hpp"

namespace coannot {

/// Items x annotators matrix of category values; std::nullopt marks a
/// missing rating.
struct ReliabilityTable {
  int category_count = 0;
  std::vector<std::vector<std::optional<int>>> rows;

  std::size_t item_count() const { return rows.size(); }
};

enum class DistanceMetric { Nominal, Ordinal, Interval };

/// Krippendorff's alpha via the coincidence matrix. Items with fewer than
/// two ratings are unpairable and ignored.
///
/// Throws Error(InsufficientData) when no item has two ratings and
/// Error(DegenerateDistribution) when expected disagreement is zero.
double krippendorff_alpha(const ReliabilityTable& table, DistanceMetric metric);

/// Gwet's AC1 treating categories as nominal, with Q = table.category_count.
double gwet_ac1(const ReliabilityTable& table);

/// Mean normalised pairwise distance over all annotator pairs and scored
/// fields: the classification, plus each schema flag that at least one of
/// the annotations asserts. Result is in [0, 1].
double item_disagreement(std::span<const Annotation> annotations,
                         const LabellingSchema& schema);

/// One row per item (sorted by id), one column per distinct annotator.
ReliabilityTable classification_table(std::span<const Annotation> annotations,
                                      const LabellingSchema& schema);
/// Presence/absence table for one flag (absence = category 0).
ReliabilityTable flag_table(std::span<const Annotation> annotations,
                            const std::string& flag);

struct ItemScore {
  double score = 0.0;
  int n_annotations = 0;
  bool marked_for_review = false;

  friend bool operator==(const ItemScore&, const ItemScore&) = default;
};

struct AgreementReport {
  RoundId round_id = 0;
  Timestamp computed_at{};
  std::optional<double> alpha_classification;
  std::optional<double> alpha_cumulative;
  std::map<std::string, std::optional<double>> ac1_per_flag;
  std::map<ItemId, ItemScore> item_scores;
  std::vector<ItemId> below_minimum;
  std::vector<std::string> warnings;

  friend bool operator==(const AgreementReport&, const AgreementReport&) = default;
};

struct AgreementOptions {
  /// Count superseded annotations too ("pre-harmonisation" audit view).
  bool include_superseded = false;
};

/// Corpus-level and per-item agreement for one round. Coefficient failures
/// become warnings; the report is always produced.
AgreementReport agreement_report(std::span<const Annotation> round_annotations,
                                 const LabellingSchema& schema, RoundId round_id,
                                 Timestamp computed_at,
                                 AgreementOptions options = {});

/// Ordinal alpha over every (item, round) unit in `annotations`.
std::optional<double> cumulative_alpha(std::span<const Annotation> annotations,
                                       const LabellingSchema& schema,
                                       std::vector<std::string>* warnings = nullptr,
                                       AgreementOptions options = {});

void to_json(Json& j, const AgreementReport& report);
void from_json(const Json& j, AgreementReport& report);

/// CSV columns: item_id, score, n_annotations, marked_for_review.
void write_item_scores_csv(std::ostream& out, const AgreementReport& report);

}  // namespace coannot
