#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "coannot/domain.hpp"
#include "coannot/text_normalize.hpp"

namespace coannot {

using GoldLabels = std::map<ItemId, BinaryLabel>;

struct PredictionSet {
  std::string model_name;
  std::map<ItemId, BinaryLabel> labels;
};

struct ConfusionMatrix {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// Throws Error(Coverage) listing "missing: <id>" / "extra: <id>" details
/// when the prediction ids differ from the gold ids.
ConfusionMatrix confusion_matrix(const GoldLabels& gold, const PredictionSet& predictions);

struct ClassificationMetrics {
  double accuracy = 0.0;
  double precision_positive = 0.0, recall_positive = 0.0, f1_positive = 0.0;
  double precision_negative = 0.0, recall_negative = 0.0, f1_negative = 0.0;
  double precision_macro = 0.0, recall_macro = 0.0, f1_macro = 0.0;
  std::vector<std::string> warnings;
};

/// Binary metrics with 0/0 defined as 0. Macro values are unweighted means
/// of the two per-class values; f1_macro is the mean of per-class F1, not
/// the F1 of macro precision and recall.
ClassificationMetrics classification_metrics(const ConfusionMatrix& matrix);

class KeywordClassifier {
 public:
  KeywordClassifier(std::vector<std::string> keywords, TextNormalizer normalizer);

  BinaryLabel classify(std::string_view text) const;
  PredictionSet predict(const std::string& model_name, std::span<const Item> items) const;

 private:
  TextNormalizer normalizer_;
  std::vector<std::string> keywords_;  // normalised
};

/// Positive iff any normalised keyword is a substring of the normalised text.
BinaryLabel keyword_classify(std::string_view text, const std::vector<std::string>& keywords,
                             Normalization normalization);

enum class RowOrigin { Recomputed, Reported };

struct ReportRow {
  std::string model_name;
  RowOrigin origin = RowOrigin::Recomputed;
  double accuracy = 0.0;
  double precision_positive = 0.0;
  double recall_positive = 0.0;
  double precision_macro = 0.0;
  double recall_macro = 0.0;
  double f1_macro = 0.0;
};

ReportRow make_row(const std::string& model_name, const ClassificationMetrics& metrics);

struct EvaluationReport {
  /// Column label for the positive class, e.g. "Hate" or "polarization".
  std::string positive_name = "positive";
  std::vector<ReportRow> rows;
  std::vector<std::string> warnings;
};

/// One recomputed row per prediction set that passes coverage (others are
/// dropped with a warning), plus any reported rows, sorted by f1_macro
/// descending. Reported rows are carried through verbatim.
EvaluationReport compare_models(const GoldLabels& gold,
                                std::span<const PredictionSet> prediction_sets,
                                std::span<const ReportRow> reported = {},
                                std::string positive_name = "positive");

void write_report_table(std::ostream& out, const EvaluationReport& report);
void write_report_csv(std::ostream& out, const EvaluationReport& report);
void to_json(Json& j, const EvaluationReport& report);
void to_json(Json& j, const ClassificationMetrics& metrics);
void to_json(Json& j, const ConfusionMatrix& matrix);

/// Reads reported rows from CSV with header
/// model,accuracy,precision_positive,recall_positive,precision_macro,recall_macro,f1_macro.
std::vector<ReportRow> read_reported_rows_csv(std::istream& in);

/// {"id": ..., "label": 0|1} or {"id": ..., "score": s}; scores are
/// thresholded (score >= threshold is positive).
PredictionSet read_predictions_jsonl(std::istream& in, const std::string& model_name,
                                     double threshold = 0.5);
PredictionSet load_predictions_file(const std::string& path, double threshold = 0.5);

/// Gold records carry "binary", "label" or "class" (class > 0 is positive).
GoldLabels read_gold_jsonl(std::istream& in);
GoldLabels load_gold_file(const std::string& path);

struct TrainingLogEntry {
  int epoch = 0;
  double training_loss = 0.0;
  double validation_loss = 0.0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

enum class EpochPolicy { MinValLoss, MaxF1, Trajectory };

EpochPolicy parse_epoch_policy(std::string_view text);

/// min-val-loss: argmin validation loss. max-f1: argmax F1. trajectory: the
/// epoch before the first one whose validation loss rises while F1 falls,
/// or the last epoch if that never happens. Ties go to the earliest epoch.
int select_epoch(std::span<const TrainingLogEntry> log, EpochPolicy policy);

/// CSV (or tab-separated) log with a header naming Epoch, Training Loss,
/// Validation Loss, Accuracy, Precision, Recall, F1. A trailing "*" on the
/// epoch number is ignored. Epochs must increase strictly from 1.
std::vector<TrainingLogEntry> read_training_log(std::istream& in);
std::vector<TrainingLogEntry> load_training_log_file(const std::string& path);

}  // namespace coannot
