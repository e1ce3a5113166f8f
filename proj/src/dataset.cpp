#include "coannot/dataset.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

#include "coannot/csv.hpp"
#include "coannot/error.hpp"
#include "coannot/random.hpp"

namespace coannot {

namespace {

// Partial Fisher-Yates over `pool`, moving `n` drawn indices into `chosen`.
void draw_into(std::vector<std::size_t> pool, std::size_t n, SeededRng& rng,
               std::vector<bool>& chosen) {
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
    chosen[pool[i]] = true;
  }
}

}  // namespace

TrainTestSplit split_corpus(std::span<const LabelledItem> corpus, double test_fraction,
                            std::uint64_t seed, bool stratified) {
  if (corpus.empty()) throw Error(ErrorCode::InvalidArgument, "corpus is empty");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "test fraction must be in (0,1)");
  }
  const std::size_t n = corpus.size();
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * n));
  std::vector<bool> in_test(n, false);
  SeededRng rng(seed);

  if (!stratified) {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    draw_into(std::move(all), n_test, rng, in_test);
  } else {
    std::vector<std::size_t> positives, negatives;
    for (std::size_t i = 0; i < n; ++i) {
      (corpus[i].binary() == BinaryLabel::Positive ? positives : negatives).push_back(i);
    }
    auto test_pos = static_cast<std::size_t>(std::llround(test_fraction * positives.size()));
    test_pos = std::min(test_pos, n_test);
    auto test_neg = n_test - test_pos;
    if (test_neg > negatives.size()) {
      test_pos += test_neg - negatives.size();
      test_neg = negatives.size();
    }
    draw_into(std::move(positives), test_pos, rng, in_test);
    draw_into(std::move(negatives), test_neg, rng, in_test);
  }

  TrainTestSplit split;
  for (std::size_t i = 0; i < n; ++i) {
    (in_test[i] ? split.test : split.train).items.push_back(corpus[i]);
  }
  return split;
}

SplitReport split_stats(std::span<const DatasetSplit> splits) {
  SplitReport report;
  for (const auto& split : splits) {
    SplitStats stats;
    stats.name = split.name;
    stats.n_total = split.items.size();
    stats.n_positive = static_cast<std::size_t>(
        std::count_if(split.items.begin(), split.items.end(),
                      [](const auto& it) { return it.binary() == BinaryLabel::Positive; }));
    if (stats.n_total == 0) {
      report.warnings.push_back("split " + split.name + " is empty; rate reported as 0");
    } else {
      stats.positive_rate = double(stats.n_positive) / double(stats.n_total);
    }
    report.splits.push_back(stats);
  }
  return report;
}

std::string format_rate(double rate) { return format_fixed(rate * 100.0, 1) + "%"; }

void to_json(Json& j, const SplitReport& report) {
  Json splits = Json::array();
  for (const auto& s : report.splits) {
    splits.push_back({{"split", s.name},
                      {"n_total", s.n_total},
                      {"n_positive", s.n_positive},
                      {"positive_rate", s.positive_rate}});
  }
  j = Json{{"splits", splits}, {"warnings", report.warnings}};
}

void write_split_report_table(std::ostream& out, const SplitReport& report) {
  out << std::left << std::setw(10) << "split" << std::right << std::setw(10) << "n_total"
      << std::setw(12) << "n_positive" << std::setw(10) << "rate" << '\n';
  for (const auto& s : report.splits) {
    out << std::left << std::setw(10) << s.name << std::right << std::setw(10) << s.n_total
        << std::setw(12) << s.n_positive << std::setw(10) << format_rate(s.positive_rate)
        << '\n';
  }
}

void write_split_report_csv(std::ostream& out, const SplitReport& report) {
  out << "split,n_total,n_positive,positive_rate\n";
  for (const auto& s : report.splits) {
    out << csv_field(s.name) << ',' << s.n_total << ',' << s.n_positive << ','
        << format_fixed(s.positive_rate, 6) << '\n';
  }
}

std::string dataset_record(const LabelledItem& item, const std::string& split,
                           bool include_flags) {
  nlohmann::ordered_json record;
  record["id"] = item.item.id;
  record["text"] = item.item.text;
  record["class"] = item.final_class;
  record["binary"] = item.binary() == BinaryLabel::Positive ? 1 : 0;
  if (include_flags) record["flags"] = item.flags;
  record["split"] = split;
  return record.dump();
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::Io, "sha256 computation failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < length; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open for writing: " + path.string());
  out << content;
  out.flush();
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

std::string csv_mirror(const DatasetSplit& split, bool include_flags) {
  std::ostringstream out;
  out << "id,text,class,binary" << (include_flags ? ",flags" : "") << ",split\n";
  for (const auto& item : split.items) {
    out << csv_field(item.item.id) << ',' << csv_field(item.item.text) << ','
        << item.final_class << ',' << (item.binary() == BinaryLabel::Positive ? 1 : 0);
    if (include_flags) {
      std::string joined;
      for (const auto& f : item.flags) joined += (joined.empty() ? "" : ";") + f;
      out << ',' << csv_field(joined);
    }
    out << ',' << csv_field(split.name) << '\n';
  }
  return out.str();
}

}  // namespace

ExportManifest export_dataset(std::span<const DatasetSplit> splits,
                              const ExportOptions& options,
                              const std::set<ItemId>& holdout) {
  for (const auto& split : splits) {
    if (split.name != "train") continue;
    std::vector<std::string> leaked;
    for (const auto& item : split.items) {
      if (holdout.count(item.item.id)) leaked.push_back(item.item.id);
    }
    if (!leaked.empty()) {
      throw Error(ErrorCode::Validation, "holdout items in train split", std::move(leaked));
    }
  }
  std::error_code ec;
  std::filesystem::create_directories(options.directory, ec);
  if (ec) {
    throw Error(ErrorCode::Io,
                "cannot create " + options.directory.string() + ": " + ec.message());
  }

  ExportManifest manifest;
  manifest.parameters = options.parameters;
  Json files = Json::array();
  for (const auto& split : splits) {
    std::string content;
    std::size_t positives = 0;
    for (const auto& item : split.items) {
      content += dataset_record(item, split.name, options.include_flags);
      content += '\n';
      if (item.binary() == BinaryLabel::Positive) ++positives;
    }
    ExportedFile file{split.name, options.directory / (split.name + ".jsonl"),
                      split.items.size(), positives, sha256_hex(content)};
    write_file(file.path, content);
    if (options.csv_mirror) {
      write_file(options.directory / (split.name + ".csv"),
                 csv_mirror(split, options.include_flags));
    }
    files.push_back({{"split", file.split},
                     {"file", file.path.filename().string()},
                     {"n_records", file.n_records},
                     {"n_positive", file.n_positive},
                     {"sha256", file.sha256}});
    manifest.files.push_back(std::move(file));
  }
  const Json doc{{"parameters", options.parameters},
                 {"include_flags", options.include_flags},
                 {"splits", files}};
  write_file(options.directory / "manifest.json", doc.dump(2) + "\n");
  return manifest;
}

std::vector<DatasetRecord> read_dataset_jsonl(std::istream& in) {
  std::vector<DatasetRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = Json::parse(line);
      DatasetRecord rec;
      rec.labelled.item.id = j.at("id").get<std::string>();
      rec.labelled.item.text = j.value("text", std::string{});
      const int binary_field = j.value("binary", 0);
      rec.labelled.final_class = j.value("class", binary_field);
      rec.has_flags = j.contains("flags");
      if (rec.has_flags) rec.labelled.flags = j.at("flags").get<std::set<std::string>>();
      const int binary = j.contains("binary") ? binary_field
                                              : (rec.labelled.final_class > 0 ? 1 : 0);
      rec.binary = binary ? BinaryLabel::Positive : BinaryLabel::Negative;
      rec.split = j.value("split", std::string{});
      out.push_back(std::move(rec));
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::Validation,
                  "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace coannot
