#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "coannot/domain.hpp"

namespace coannot {

struct LabelledItem {
  Item item;
  int final_class = 0;
  std::set<std::string> flags;

  BinaryLabel binary() const {
    return final_class == 0 ? BinaryLabel::Negative : BinaryLabel::Positive;
  }

  friend bool operator==(const LabelledItem&, const LabelledItem&) = default;
};

struct DatasetSplit {
  std::string name;
  std::vector<LabelledItem> items;
};

struct TrainTestSplit {
  DatasetSplit train{"train", {}};
  DatasetSplit test{"test", {}};
};

/// Disjoint, exhaustive partition with |test| = round(test_fraction * N).
/// Stratified splits draw positives and negatives separately so each split's
/// positive count is within one item of proportional. Items keep corpus order.
TrainTestSplit split_corpus(std::span<const LabelledItem> corpus, double test_fraction,
                            std::uint64_t seed, bool stratified = false);

struct SplitStats {
  std::string name;
  std::size_t n_total = 0;
  std::size_t n_positive = 0;
  double positive_rate = 0.0;
};

struct SplitReport {
  std::vector<SplitStats> splits;
  std::vector<std::string> warnings;
};

SplitReport split_stats(std::span<const DatasetSplit> splits);

/// Percentage with one decimal, e.g. 0.01238 -> "1.2%".
std::string format_rate(double rate);

void to_json(Json& j, const SplitReport& report);
void write_split_report_table(std::ostream& out, const SplitReport& report);
void write_split_report_csv(std::ostream& out, const SplitReport& report);

struct ExportOptions {
  std::filesystem::path directory;
  bool include_flags = true;
  bool csv_mirror = false;
  /// Free-form provenance copied into the manifest (seed, fractions, ...).
  Json parameters = Json::object();
};

struct ExportedFile {
  std::string split;
  std::filesystem::path path;
  std::size_t n_records = 0;
  std::size_t n_positive = 0;
  std::string sha256;
};

struct ExportManifest {
  std::vector<ExportedFile> files;
  Json parameters;
};

/// One JSON record per line: id, text, class, binary, [flags], split.
std::string dataset_record(const LabelledItem& item, const std::string& split,
                           bool include_flags);

/// Writes <split>.jsonl (and <split>.csv when requested) per split plus
/// manifest.json. A split named "train" must not contain any holdout item.
ExportManifest export_dataset(std::span<const DatasetSplit> splits,
                              const ExportOptions& options,
                              const std::set<ItemId>& holdout = {});

struct DatasetRecord {
  LabelledItem labelled;
  BinaryLabel binary = BinaryLabel::Negative;
  std::string split;
  bool has_flags = false;
};

std::vector<DatasetRecord> read_dataset_jsonl(std::istream& in);

std::string sha256_hex(std::string_view data);

}  // namespace coannot
