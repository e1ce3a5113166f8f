#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "coannot/error.hpp"
#include "coannot/evaluation.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace coannot;

namespace {

/// Gold/prediction pair whose confusion matrix is exactly (tp, fp, fn, tn).
std::pair<GoldLabels, PredictionSet> engineered(int tp, int fp, int fn, int tn) {
  GoldLabels gold;
  PredictionSet pred{"engineered", {}};
  int n = 0;
  auto add = [&](int count, BinaryLabel g, BinaryLabel p) {
    for (int i = 0; i < count; ++i) {
      const auto id = "e" + std::to_string(n++);
      gold[id] = g;
      pred.labels[id] = p;
    }
  };
  add(tp, BinaryLabel::Positive, BinaryLabel::Positive);
  add(fp, BinaryLabel::Negative, BinaryLabel::Positive);
  add(fn, BinaryLabel::Positive, BinaryLabel::Negative);
  add(tn, BinaryLabel::Negative, BinaryLabel::Negative);
  return {gold, pred};
}

std::vector<TrainingLogEntry> table02() {
  std::ifstream in(COANNOT_TEST_DATA "/table02.csv");
  return read_training_log(in);
}

}  // namespace

TEST_CASE("confusion matrix") {
  GoldLabels gold;
  PredictionSet same{"same", {}}, flipped{"flipped", {}};
  for (int i = 0; i < 100; ++i) {
    const auto id = "g" + std::to_string(i);
    gold[id] = i < 10 ? BinaryLabel::Positive : BinaryLabel::Negative;
    same.labels[id] = gold[id];
    flipped.labels[id] = i < 10 ? BinaryLabel::Negative : BinaryLabel::Positive;
  }
  CHECK(confusion_matrix(gold, same) == ConfusionMatrix{10, 0, 0, 90});
  CHECK(confusion_matrix(gold, flipped) == ConfusionMatrix{0, 90, 10, 0});

  auto missing = same;
  missing.labels.erase("g5");
  missing.labels["zz"] = BinaryLabel::Negative;
  try {
    confusion_matrix(gold, missing);
    FAIL("expected a coverage error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Coverage);
    CHECK(e.details() == std::vector<std::string>{"missing: g5", "extra: zz"});
  }
}

TEST_CASE("metrics on the (10, 5, 10, 75) matrix") {
  const auto m = classification_metrics({10, 5, 10, 75});
  CHECK(std::abs(m.accuracy - 0.85) < 1e-9);
  CHECK(std::abs(m.precision_positive - 10.0 / 15.0) < 1e-9);
  CHECK(std::abs(m.recall_positive - 0.5) < 1e-9);
  CHECK(std::abs(m.f1_positive - 4.0 / 7.0) < 1e-9);
  CHECK(std::abs(m.f1_negative - 10.0 / 11.0) < 1e-9);
  CHECK(std::abs(m.f1_macro - (4.0 / 7.0 + 10.0 / 11.0) / 2.0) < 1e-9);
  CHECK(m.f1_macro == doctest::Approx(0.7403).epsilon(1e-4));
  CHECK(m.warnings.empty());
}

TEST_CASE("metric edge cases") {
  const auto perfect = classification_metrics({10, 0, 0, 90});
  for (double v : {perfect.accuracy, perfect.precision_positive, perfect.recall_positive,
                   perfect.f1_positive, perfect.f1_negative, perfect.f1_macro}) {
    CHECK(v == 1.0);
  }
  const auto none = classification_metrics({0, 0, 10, 90});
  CHECK(none.precision_positive == 0.0);
  CHECK(none.recall_positive == 0.0);
  CHECK_FALSE(none.warnings.empty());
}

TEST_CASE("metrics agree with the label-vector oracle for small corpora") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 50);
    std::vector<int> g(n), p(n);
    GoldLabels gold;
    PredictionSet pred{"m", {}};
    for (int i = 0; i < n; ++i) {
      g[i] = static_cast<int>(rng() % 2);
      p[i] = static_cast<int>(rng() % 2);
      gold["x" + std::to_string(i)] = g[i] ? BinaryLabel::Positive : BinaryLabel::Negative;
      pred.labels["x" + std::to_string(i)] = p[i] ? BinaryLabel::Positive : BinaryLabel::Negative;
    }
    const auto want = oracle::metrics(g, p);
    const auto got = classification_metrics(confusion_matrix(gold, pred));
    CHECK(std::abs(got.accuracy - want.accuracy) < 1e-12);
    CHECK(std::abs(got.precision_positive - want.p_pos) < 1e-12);
    CHECK(std::abs(got.recall_positive - want.r_pos) < 1e-12);
    CHECK(std::abs(got.f1_negative - want.f1_neg) < 1e-12);
    CHECK(std::abs(got.f1_macro - want.f1_macro) < 1e-12);
  }
}

TEST_CASE("macro F1 is the mean of per-class F1 on random matrices") {
  std::mt19937_64 rng(1000);
  for (int trial = 0; trial < 1000; ++trial) {
    ConfusionMatrix m{rng() % 200, rng() % 200, rng() % 200, rng() % 200};
    const auto metrics = classification_metrics(m);
    CHECK(std::abs(metrics.f1_macro - (metrics.f1_positive + metrics.f1_negative) / 2.0) < 1e-12);
  }
}

TEST_CASE("keyword classifier") {
  TextNormalizer casefold(Normalization::Casefold);
  KeywordClassifier classifier({"Madhouse", "wonderful ones"}, casefold);
  CHECK(classifier.classify("look at the madhouse") == BinaryLabel::Positive);
  CHECK(classifier.classify("a calm day") == BinaryLabel::Negative);
  CHECK(classifier.classify("THE WONDERFUL ONES again") == BinaryLabel::Positive);
  CHECK(keyword_classify("MADHOUSE", {"madhouse"}, Normalization::None) == BinaryLabel::Negative);
  CHECK(keyword_classify("MADHOUSE", {"madhouse"}, Normalization::Casefold) ==
        BinaryLabel::Positive);
}

TEST_CASE("comparative report") {
  const auto [gold, engineered_pred] = engineered(10, 5, 10, 75);
  PredictionSet perfect{"perfect", gold};

  std::ifstream in(COANNOT_TEST_DATA "/table04_reported.csv");
  const auto reported = read_reported_rows_csv(in);
  REQUIRE(reported.size() == 4);
  CHECK(reported[0].model_name == "rana811/Arabic_HateSpeech_Model");
  CHECK(reported[3].f1_macro == doctest::Approx(0.673));

  const std::vector<PredictionSet> sets{engineered_pred, perfect};
  const auto report = compare_models(gold, sets, reported, "Hate");
  REQUIRE(report.rows.size() == 6);
  CHECK(report.rows[0].model_name == "perfect");
  CHECK(report.rows[0].accuracy == 1.0);
  for (std::size_t i = 1; i < report.rows.size(); ++i) {
    CHECK(report.rows[i - 1].f1_macro >= report.rows[i].f1_macro);
  }
  const auto it = std::find_if(report.rows.begin(), report.rows.end(),
                               [](const auto& r) { return r.model_name == "engineered"; });
  REQUIRE(it != report.rows.end());
  const auto direct = make_row("engineered", classification_metrics({10, 5, 10, 75}));
  CHECK(it->f1_macro == direct.f1_macro);
  CHECK(it->precision_macro == direct.precision_macro);

  std::ostringstream table;
  write_report_table(table, report);
  const auto text = table.str();
  for (const char* col : {"Model", "Accuracy", "Precision (Hate)", "Recall (Hate)",
                          "Precision (Macro)", "Recall (Macro)", "F1 (Macro)"}) {
    CHECK(text.find(col) != std::string::npos);
  }
  CHECK(text.find("[reported]") != std::string::npos);

  std::ostringstream csv;
  write_report_csv(csv, report);
  const auto csv_text = csv.str();
  CHECK(std::count(csv_text.begin(), csv_text.end(), '\n') == 7);
}

TEST_CASE("models failing coverage are dropped with a warning") {
  const auto [gold, good] = engineered(3, 1, 1, 5);
  PredictionSet partial{"partial", {}};
  partial.labels["e0"] = BinaryLabel::Positive;
  const std::vector<PredictionSet> sets{good, partial};
  const auto report = compare_models(gold, sets);
  CHECK(report.rows.size() == 1);
  CHECK(report.warnings.size() == 1);
}

TEST_CASE("prediction and gold readers") {
  std::istringstream preds(R"({"id":"a","label":1}
{"id":"b","score":0.7}
{"id":"c","score":0.2}
)");
  const auto set = read_predictions_jsonl(preds, "m", 0.5);
  CHECK(set.labels.at("a") == BinaryLabel::Positive);
  CHECK(set.labels.at("b") == BinaryLabel::Positive);
  CHECK(set.labels.at("c") == BinaryLabel::Negative);

  std::istringstream gold(R"({"id":"a","binary":1}
{"id":"b","class":2}
{"id":"c","label":0}
)");
  const auto g = read_gold_jsonl(gold);
  CHECK(g.at("a") == BinaryLabel::Positive);
  CHECK(g.at("b") == BinaryLabel::Positive);
  CHECK(g.at("c") == BinaryLabel::Negative);
  CHECK_THROWS_AS(load_predictions_file("/nonexistent/file.jsonl"), Error);
}

TEST_CASE("epoch selection on the published training log") {
  const auto log = table02();
  REQUIRE(log.size() == 6);
  CHECK(log[5].epoch == 6);
  CHECK(log[1].validation_loss == doctest::Approx(0.6723));
  CHECK(log[4].f1 == doctest::Approx(0.6645));
  CHECK(select_epoch(log, EpochPolicy::Trajectory) == 5);
  CHECK(select_epoch(log, EpochPolicy::MinValLoss) == 2);
  CHECK(select_epoch(log, EpochPolicy::MaxF1) == 5);
  CHECK(parse_epoch_policy("min-val-loss") == EpochPolicy::MinValLoss);
  CHECK_THROWS_AS(parse_epoch_policy("best"), Error);
}

TEST_CASE("trajectory policy falls back to the last epoch") {
  std::vector<TrainingLogEntry> log;
  for (int e = 1; e <= 4; ++e) log.push_back({e, 1.0, 1.0 - 0.1 * e, 0.9, 0.5, 0.5, 0.1 * e});
  CHECK(select_epoch(log, EpochPolicy::Trajectory) == 4);

  std::istringstream bad("Epoch,Training Loss,Validation Loss,Accuracy,Precision,Recall,F1\n"
                         "2,0.1,0.1,0.1,0.1,0.1,0.1\n");
  CHECK_THROWS_AS(read_training_log(bad), Error);
}
