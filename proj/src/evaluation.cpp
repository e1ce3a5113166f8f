#include "coannot/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>

#include "coannot/csv.hpp"
#include "coannot/error.hpp"

namespace coannot {

ConfusionMatrix confusion_matrix(const GoldLabels& gold, const PredictionSet& predictions) {
  std::vector<std::string> problems;
  for (const auto& [id, label] : gold) {
    if (!predictions.labels.count(id)) problems.push_back("missing: " + id);
  }
  for (const auto& [id, label] : predictions.labels) {
    if (!gold.count(id)) problems.push_back("extra: " + id);
  }
  if (!problems.empty()) {
    throw Error(ErrorCode::Coverage,
                "predictions for " + predictions.model_name + " do not cover the gold set",
                std::move(problems));
  }
  ConfusionMatrix m;
  for (const auto& [id, truth] : gold) {
    const bool predicted = predictions.labels.at(id) == BinaryLabel::Positive;
    const bool actual = truth == BinaryLabel::Positive;
    if (predicted && actual) ++m.tp;
    else if (predicted) ++m.fp;
    else if (actual) ++m.fn;
    else ++m.tn;
  }
  return m;
}

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : double(num) / double(den);
}

double harmonic(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

}  // namespace

ClassificationMetrics classification_metrics(const ConfusionMatrix& m) {
  if (m.total() == 0) throw Error(ErrorCode::InvalidArgument, "empty confusion matrix");
  ClassificationMetrics out;
  out.accuracy = ratio(m.tp + m.tn, m.total());

  out.precision_positive = ratio(m.tp, m.tp + m.fp);
  out.recall_positive = ratio(m.tp, m.tp + m.fn);
  out.f1_positive = harmonic(out.precision_positive, out.recall_positive);
  out.precision_negative = ratio(m.tn, m.tn + m.fn);
  out.recall_negative = ratio(m.tn, m.tn + m.fp);
  out.f1_negative = harmonic(out.precision_negative, out.recall_negative);

  if (m.tp + m.fp == 0) out.warnings.emplace_back("no predicted positives: precision_positive set to 0");
  if (m.tp + m.fn == 0) out.warnings.emplace_back("no gold positives: recall_positive set to 0");
  if (m.tn + m.fn == 0) out.warnings.emplace_back("no predicted negatives: precision_negative set to 0");
  if (m.tn + m.fp == 0) out.warnings.emplace_back("no gold negatives: recall_negative set to 0");

  out.precision_macro = (out.precision_positive + out.precision_negative) / 2.0;
  out.recall_macro = (out.recall_positive + out.recall_negative) / 2.0;
  out.f1_macro = (out.f1_positive + out.f1_negative) / 2.0;
  return out;
}

KeywordClassifier::KeywordClassifier(std::vector<std::string> keywords,
                                     TextNormalizer normalizer)
    : normalizer_(std::move(normalizer)) {
  for (const auto& k : keywords) {
    auto norm = normalizer_(k);
    if (!norm.empty()) keywords_.push_back(std::move(norm));
  }
  if (keywords_.empty()) throw Error(ErrorCode::Configuration, "keyword list is empty");
}

BinaryLabel KeywordClassifier::classify(std::string_view text) const {
  const std::string norm = normalizer_(text);
  for (const auto& k : keywords_) {
    if (norm.find(k) != std::string::npos) return BinaryLabel::Positive;
  }
  return BinaryLabel::Negative;
}

PredictionSet KeywordClassifier::predict(const std::string& model_name,
                                         std::span<const Item> items) const {
  PredictionSet out{model_name, {}};
  for (const auto& item : items) out.labels[item.id] = classify(item.text);
  return out;
}

BinaryLabel keyword_classify(std::string_view text, const std::vector<std::string>& keywords,
                             Normalization normalization) {
  return KeywordClassifier(keywords, TextNormalizer(normalization)).classify(text);
}

ReportRow make_row(const std::string& model_name, const ClassificationMetrics& metrics) {
  return ReportRow{model_name,
                   RowOrigin::Recomputed,
                   metrics.accuracy,
                   metrics.precision_positive,
                   metrics.recall_positive,
                   metrics.precision_macro,
                   metrics.recall_macro,
                   metrics.f1_macro};
}

EvaluationReport compare_models(const GoldLabels& gold,
                                std::span<const PredictionSet> prediction_sets,
                                std::span<const ReportRow> reported,
                                std::string positive_name) {
  EvaluationReport report;
  report.positive_name = std::move(positive_name);
  for (const auto& set : prediction_sets) {
    try {
      const auto metrics = classification_metrics(confusion_matrix(gold, set));
      report.rows.push_back(make_row(set.model_name, metrics));
      for (const auto& w : metrics.warnings) report.warnings.push_back(set.model_name + ": " + w);
    } catch (const Error& e) {
      std::string msg = set.model_name + " excluded: " + e.what();
      if (!e.details().empty()) msg += " (" + std::to_string(e.details().size()) + " ids)";
      report.warnings.push_back(std::move(msg));
    }
  }
  for (auto row : reported) {
    row.origin = RowOrigin::Reported;
    report.rows.push_back(std::move(row));
  }
  std::stable_sort(report.rows.begin(), report.rows.end(),
                   [](const ReportRow& a, const ReportRow& b) { return a.f1_macro > b.f1_macro; });
  return report;
}

namespace {

std::vector<std::string> column_names(const EvaluationReport& report) {
  return {"Model",
          "Accuracy",
          "Precision (" + report.positive_name + ")",
          "Recall (" + report.positive_name + ")",
          "Precision (Macro)",
          "Recall (Macro)",
          "F1 (Macro)"};
}

std::string display_name(const ReportRow& row) {
  return row.origin == RowOrigin::Reported ? row.model_name + " [reported]" : row.model_name;
}

std::vector<double> values(const ReportRow& row) {
  return {row.accuracy,        row.precision_positive, row.recall_positive,
          row.precision_macro, row.recall_macro,       row.f1_macro};
}

}  // namespace

void write_report_table(std::ostream& out, const EvaluationReport& report) {
  const auto columns = column_names(report);
  std::size_t name_width = columns[0].size();
  for (const auto& row : report.rows) name_width = std::max(name_width, display_name(row).size());
  std::vector<std::size_t> widths{name_width};
  for (std::size_t c = 1; c < columns.size(); ++c) widths.push_back(std::max<std::size_t>(columns[c].size(), 6));

  out << std::left << std::setw(static_cast<int>(widths[0])) << columns[0];
  for (std::size_t c = 1; c < columns.size(); ++c) {
    out << "  " << std::right << std::setw(static_cast<int>(widths[c])) << columns[c];
  }
  out << '\n';
  std::size_t rule = widths[0];
  for (std::size_t c = 1; c < widths.size(); ++c) rule += 2 + widths[c];
  out << std::string(rule, '-') << '\n';
  for (const auto& row : report.rows) {
    out << std::left << std::setw(static_cast<int>(widths[0])) << display_name(row);
    const auto vals = values(row);
    for (std::size_t c = 0; c < vals.size(); ++c) {
      out << "  " << std::right << std::setw(static_cast<int>(widths[c + 1]))
          << format_fixed(vals[c], 3);
    }
    out << '\n';
  }
}

void write_report_csv(std::ostream& out, const EvaluationReport& report) {
  out << "model,origin,accuracy,precision_positive,recall_positive,precision_macro,"
         "recall_macro,f1_macro\n";
  for (const auto& row : report.rows) {
    out << csv_field(row.model_name) << ','
        << (row.origin == RowOrigin::Reported ? "reported" : "recomputed");
    for (double v : values(row)) out << ',' << format_fixed(v, 6);
    out << '\n';
  }
}

void to_json(Json& j, const EvaluationReport& report) {
  Json rows = Json::array();
  for (const auto& row : report.rows) {
    rows.push_back({{"model", row.model_name},
                    {"origin", row.origin == RowOrigin::Reported ? "reported" : "recomputed"},
                    {"accuracy", row.accuracy},
                    {"precision_positive", row.precision_positive},
                    {"recall_positive", row.recall_positive},
                    {"precision_macro", row.precision_macro},
                    {"recall_macro", row.recall_macro},
                    {"f1_macro", row.f1_macro}});
  }
  j = Json{{"positive_name", report.positive_name},
           {"rows", rows},
           {"warnings", report.warnings}};
}

void to_json(Json& j, const ClassificationMetrics& m) {
  j = Json{{"accuracy", m.accuracy},
           {"precision_positive", m.precision_positive},
           {"recall_positive", m.recall_positive},
           {"f1_positive", m.f1_positive},
           {"precision_negative", m.precision_negative},
           {"recall_negative", m.recall_negative},
           {"f1_negative", m.f1_negative},
           {"precision_macro", m.precision_macro},
           {"recall_macro", m.recall_macro},
           {"f1_macro", m.f1_macro},
           {"warnings", m.warnings}};
}

void to_json(Json& j, const ConfusionMatrix& m) {
  j = Json{{"tp", m.tp}, {"fp", m.fp}, {"fn", m.fn}, {"tn", m.tn}};
}

namespace {

std::string normalise_header(std::string h) {
  std::string out;
  for (char c : h) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  return out;
}

double parse_number(const std::string& field, std::size_t line_no) {
  try {
    return std::stod(field);
  } catch (const std::exception&) {
    throw Error(ErrorCode::Validation,
                "line " + std::to_string(line_no) + ": not a number: '" + field + "'");
  }
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

}  // namespace

std::vector<ReportRow> read_reported_rows_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<ReportRow> rows;
  std::map<std::string, std::size_t> col;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const auto fields = split_csv_line(line);
    if (col.empty()) {
      for (std::size_t i = 0; i < fields.size(); ++i) col[normalise_header(fields[i])] = i;
      for (const char* need : {"model", "accuracy", "precisionpositive", "recallpositive",
                               "precisionmacro", "recallmacro", "f1macro"}) {
        if (!col.count(need)) {
          throw Error(ErrorCode::Validation, std::string("reported rows: missing column ") + need);
        }
      }
      continue;
    }
    auto get = [&](const char* name) -> const std::string& {
      const auto i = col.at(name);
      if (i >= fields.size()) {
        throw Error(ErrorCode::Validation, "line " + std::to_string(line_no) + ": too few fields");
      }
      return fields[i];
    };
    ReportRow row;
    row.model_name = get("model");
    row.origin = RowOrigin::Reported;
    row.accuracy = parse_number(get("accuracy"), line_no);
    row.precision_positive = parse_number(get("precisionpositive"), line_no);
    row.recall_positive = parse_number(get("recallpositive"), line_no);
    row.precision_macro = parse_number(get("precisionmacro"), line_no);
    row.recall_macro = parse_number(get("recallmacro"), line_no);
    row.f1_macro = parse_number(get("f1macro"), line_no);
    rows.push_back(std::move(row));
  }
  return rows;
}

PredictionSet read_predictions_jsonl(std::istream& in, const std::string& model_name,
                                     double threshold) {
  PredictionSet out{model_name, {}};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const auto where = "line " + std::to_string(line_no) + ": ";
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::Validation, where + e.what());
    }
    if (!j.contains("id") || !j["id"].is_string()) {
      throw Error(ErrorCode::Validation, where + "missing string id");
    }
    BinaryLabel label;
    if (j.contains("label")) {
      const int v = j["label"].get<int>();
      if (v != 0 && v != 1) throw Error(ErrorCode::Validation, where + "label must be 0 or 1");
      label = v ? BinaryLabel::Positive : BinaryLabel::Negative;
    } else if (j.contains("score")) {
      const double s = j["score"].get<double>();
      if (!(s >= 0.0 && s <= 1.0)) throw Error(ErrorCode::Validation, where + "score outside [0,1]");
      label = s >= threshold ? BinaryLabel::Positive : BinaryLabel::Negative;
    } else {
      throw Error(ErrorCode::Validation, where + "record has neither label nor score");
    }
    const auto id = j["id"].get<std::string>();
    if (!out.labels.emplace(id, label).second) {
      throw Error(ErrorCode::Validation, where + "duplicate prediction for " + id);
    }
  }
  return out;
}

PredictionSet load_predictions_file(const std::string& path, double threshold) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open prediction file " + path);
  auto name = std::filesystem::path(path).stem().string();
  return read_predictions_jsonl(in, name, threshold);
}

GoldLabels read_gold_jsonl(std::istream& in) {
  GoldLabels gold;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const auto where = "line " + std::to_string(line_no) + ": ";
    try {
      const auto j = Json::parse(line);
      const auto id = j.at("id").get<std::string>();
      int positive;
      if (j.contains("binary")) positive = j["binary"].get<int>();
      else if (j.contains("label")) positive = j["label"].get<int>();
      else positive = j.at("class").get<int>() > 0 ? 1 : 0;
      if (!gold.emplace(id, positive ? BinaryLabel::Positive : BinaryLabel::Negative).second) {
        throw Error(ErrorCode::Validation, where + "duplicate gold id " + id);
      }
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::Validation, where + e.what());
    }
  }
  return gold;
}

GoldLabels load_gold_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open gold file " + path);
  return read_gold_jsonl(in);
}

EpochPolicy parse_epoch_policy(std::string_view text) {
  if (text == "min-val-loss") return EpochPolicy::MinValLoss;
  if (text == "max-f1") return EpochPolicy::MaxF1;
  if (text == "trajectory") return EpochPolicy::Trajectory;
  throw Error(ErrorCode::Configuration, "unknown epoch policy: " + std::string(text));
}

int select_epoch(std::span<const TrainingLogEntry> log, EpochPolicy policy) {
  if (log.empty()) throw Error(ErrorCode::InvalidArgument, "training log is empty");
  switch (policy) {
    case EpochPolicy::MinValLoss:
      return std::min_element(log.begin(), log.end(), [](const auto& a, const auto& b) {
               return a.validation_loss < b.validation_loss;
             })->epoch;
    case EpochPolicy::MaxF1:
      return std::max_element(log.begin(), log.end(), [](const auto& a, const auto& b) {
               return a.f1 < b.f1;
             })->epoch;
    case EpochPolicy::Trajectory:
      for (std::size_t i = 1; i < log.size(); ++i) {
        if (log[i].validation_loss > log[i - 1].validation_loss && log[i].f1 < log[i - 1].f1) {
          return log[i - 1].epoch;
        }
      }
      return log.back().epoch;
  }
  return log.back().epoch;
}

std::vector<TrainingLogEntry> read_training_log(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::map<std::string, std::size_t> col;
  char delimiter = ',';
  std::vector<TrainingLogEntry> log;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    if (col.empty()) {
      if (line.find('\t') != std::string::npos && line.find(',') == std::string::npos) {
        delimiter = '\t';
      }
      const auto header = split_csv_line(line, delimiter);
      for (std::size_t i = 0; i < header.size(); ++i) col[normalise_header(header[i])] = i;
      for (const char* need : {"epoch", "trainingloss", "validationloss", "accuracy",
                               "precision", "recall", "f1"}) {
        if (!col.count(need)) {
          throw Error(ErrorCode::Validation, std::string("training log: missing column ") + need);
        }
      }
      continue;
    }
    const auto fields = split_csv_line(line, delimiter);
    auto field = [&](const char* name) {
      const auto i = col.at(name);
      if (i >= fields.size()) {
        throw Error(ErrorCode::Validation, "line " + std::to_string(line_no) + ": too few fields");
      }
      return fields[i];
    };
    std::string epoch = field("epoch");
    while (!epoch.empty() && (epoch.back() == '*' || epoch.back() == ' ')) epoch.pop_back();
    TrainingLogEntry e;
    e.epoch = static_cast<int>(parse_number(epoch, line_no));
    e.training_loss = parse_number(field("trainingloss"), line_no);
    e.validation_loss = parse_number(field("validationloss"), line_no);
    e.accuracy = parse_number(field("accuracy"), line_no);
    e.precision = parse_number(field("precision"), line_no);
    e.recall = parse_number(field("recall"), line_no);
    e.f1 = parse_number(field("f1"), line_no);
    if (log.empty() ? e.epoch != 1 : e.epoch <= log.back().epoch) {
      throw Error(ErrorCode::Validation, "line " + std::to_string(line_no) +
                                             ": epochs must increase strictly from 1, got " +
                                             std::to_string(e.epoch));
    }
    log.push_back(e);
  }
  return log;
}

std::vector<TrainingLogEntry> load_training_log_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open training log " + path);
  return read_training_log(in);
}

}  // namespace coannot
