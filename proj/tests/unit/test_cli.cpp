#include <doctest.h>

#include <fstream>
#include <sstream>

#include "coannot/cli.hpp"
#include "coannot/evaluation.hpp"
#include "coannot/orchestration.hpp"
#include "coannot/service.hpp"
#include "fixtures.hpp"

using namespace coannot;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

void write(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

std::string read(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

const std::string kTable02 = COANNOT_TEST_DATA "/table02.csv";

}  // namespace

TEST_CASE("select-epoch prints the chosen epoch") {
  auto r = invoke({"select-epoch", "--log", kTable02, "--policy", "trajectory"});
  CHECK(r.code == 0);
  CHECK(r.out == "5\n");
  CHECK(invoke({"select-epoch", "--log", kTable02, "--policy", "min-val-loss"}).out == "2\n");
  CHECK(invoke({"select-epoch", "--log", kTable02, "--policy", "max-f1"}).out == "5\n");
  CHECK(invoke({"select-epoch", "--log", kTable02, "--policy", "bogus"}).code == 1);
}

TEST_CASE("plan prints the round sizes") {
  auto r = invoke({"plan", "--total", "10633", "--rounds", "4", "--growth", "2.0"});
  CHECK(r.code == 0);
  CHECK(r.out == "709 1418 2835 5671\n");
  const auto j = Json::parse(invoke({"plan", "--total", "1000", "--rounds", "4", "--format", "json"}).out);
  CHECK(j == Json(plan_rounds(1000, 4, 2.0)));
}

TEST_CASE("usage and domain errors have distinct exit codes") {
  fixtures::TempDir dir;
  write(dir / "gold.jsonl", "{\"id\":\"a\",\"binary\":1}\n");
  auto r = invoke({"compare", "--gold", (dir / "gold.jsonl").string(), "--pred",
                (dir / "nonexistent.jsonl").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("nonexistent.jsonl") != std::string::npos);

  CHECK(invoke({}).code == 2);
  CHECK(invoke({"frobnicate"}).code == 2);
  CHECK(invoke({"plan", "--total", "10"}).code == 2);
  CHECK(invoke({"plan", "--total", "10", "--rounds", "4", "--bogus"}).code == 2);
  CHECK(invoke({"plan", "--total", "2", "--rounds", "4"}).code == 1);
  CHECK(invoke({"--help"}).code == 0);
}

TEST_CASE("randomised subcommands require a seed") {
  fixtures::TempDir dir;
  std::ostringstream items;
  write_items_jsonl(items, fixtures::make_items(20));
  write(dir / "items.jsonl", items.str());
  const auto path = (dir / "items.jsonl").string();
  CHECK(invoke({"sample", "--items", path, "--n", "5"}).code == 2);
  CHECK(invoke({"assign", "--items", path, "--annotators", "a,b,c", "--k", "3"}).code == 2);
  CHECK(invoke({"split", "--corpus", path, "--test-fraction", "0.5"}).code == 2);

  const auto sampled = invoke({"sample", "--items", path, "--n", "5", "--seed", "42"});
  CHECK(sampled.code == 0);
  std::string expected;
  const auto pool = fixtures::make_items(20);
  std::vector<Item> drawn;
  for (const auto& id : sample_pool(pool, 5, 42)) {
    drawn.push_back(*std::find_if(pool.begin(), pool.end(), [&](const Item& i) { return i.id == id; }));
  }
  std::ostringstream direct;
  write_items_jsonl(direct, drawn);
  CHECK(sampled.out == direct.str());

  const auto assigned = invoke({"assign", "--items", path, "--annotators", "a,b,c,d", "--k", "3",
                             "--seed", "7", "--format", "json"});
  CHECK(assigned.code == 0);
  std::vector<ItemId> ids;
  for (const auto& i : pool) ids.push_back(i.id);
  const std::vector<AnnotatorId> who{"a", "b", "c", "d"};
  CHECK(Json::parse(assigned.out) == Json(assign_batch(ids, who, 3, 7)));
}

TEST_CASE("compare output equals the direct module call") {
  fixtures::TempDir dir;
  write(dir / "gold.jsonl", "{\"id\":\"a\",\"binary\":1}\n{\"id\":\"b\",\"binary\":0}\n"
                            "{\"id\":\"c\",\"binary\":1}\n");
  write(dir / "model.jsonl", "{\"id\":\"a\",\"label\":1}\n{\"id\":\"b\",\"label\":1}\n"
                             "{\"id\":\"c\",\"label\":0}\n");
  const auto r = invoke({"compare", "--gold", (dir / "gold.jsonl").string(), "--pred",
                      (dir / "model.jsonl").string(), "--reported",
                      COANNOT_TEST_DATA "/table04_reported.csv", "--positive-name", "Hate"});
  CHECK(r.code == 0);

  const auto gold = load_gold_file((dir / "gold.jsonl").string());
  const std::vector<PredictionSet> sets{load_predictions_file((dir / "model.jsonl").string())};
  std::ifstream rep(COANNOT_TEST_DATA "/table04_reported.csv");
  const auto reported = read_reported_rows_csv(rep);
  std::ostringstream direct;
  write_report_table(direct, compare_models(gold, sets, reported, "Hate"));
  CHECK(r.out == direct.str());
}

TEST_CASE("keyword baseline through evaluate") {
  fixtures::TempDir dir;
  write(dir / "items.jsonl", "{\"id\":\"a\",\"text\":\"They are COCKROACHES\"}\n"
                             "{\"id\":\"b\",\"text\":\"lovely weather\"}\n");
  write(dir / "gold.jsonl", "{\"id\":\"a\",\"binary\":1}\n{\"id\":\"b\",\"binary\":0}\n");
  write(dir / "keywords.txt", "# terms\ncockroaches\n");
  const auto r = invoke({"evaluate", "--gold", (dir / "gold.jsonl").string(), "--keywords",
                      (dir / "keywords.txt").string(), "--items", (dir / "items.jsonl").string(),
                      "--format", "json"});
  REQUIRE(r.code == 0);
  const auto j = Json::parse(r.out);
  CHECK(j["metrics"]["accuracy"] == 1.0);
}

TEST_CASE("a campaign driven entirely from the command line") {
  fixtures::TempDir dir;
  const auto log = (dir / "events.ndjson").string();
  write(dir / "annotators.json",
        R"([{"id":"a","token":"ta"},{"id":"b","token":"tb"},{"id":"c","token":"tc"}])");
  std::ostringstream items;
  write_items_jsonl(items, fixtures::make_items(6));
  write(dir / "items.jsonl", items.str());

  REQUIRE(invoke({"init", "--log", log, "--campaign", "k", "--annotators",
               (dir / "annotators.json").string()})
              .code == 0);
  CHECK(invoke({"init", "--log", log, "--campaign", "k", "--annotators",
             (dir / "annotators.json").string()})
            .code == 1);
  REQUIRE(invoke({"import", "--log", log, "--campaign", "k", "--items",
               (dir / "items.jsonl").string()})
              .code == 0);
  const auto assigned = invoke({"assign", "--log", log, "--campaign", "k", "--size", "6", "--k",
                             "3", "--seed", "1", "--format", "csv"});
  REQUIRE(assigned.code == 0);
  CHECK(std::count(assigned.out.begin(), assigned.out.end(), '\n') == 1 + 18);

  CHECK(invoke({"close-round", "--log", log, "--campaign", "k", "--round", "1"}).code == 1);
  {
    ServiceOptions o;
    o.log_path = log;
    CampaignService svc(o);
    for (const std::string who : {"a", "b", "c"}) {
      for (const auto& u : svc.next_queue("k", who)) {
        svc.submit_annotation("k", who, u.item_id, 1, {u.item_id == "item-00000" ? 2 : 0, {}, false},
                              who + u.item_id);
      }
    }
  }
  const auto closed = invoke({"close-round", "--log", log, "--campaign", "k", "--round", "1",
                           "--format", "json"});
  REQUIRE(closed.code == 0);
  CHECK(Json::parse(closed.out)["round_id"] == 1);
  CHECK(invoke({"close-round", "--log", log, "--campaign", "k", "--round", "1"}).code == 1);

  const auto agreement = invoke({"agreement", "--log", log, "--campaign", "k"});
  CHECK(agreement.code == 0);
  CHECK(agreement.out.find("cumulative alpha") != std::string::npos);

  const auto labels = invoke({"aggregate", "--log", log, "--campaign", "k"});
  CHECK(labels.code == 0);
  CHECK(labels.out.find("item-00000,2,1,plurality") != std::string::npos);

  CHECK(invoke({"holdout", "--log", log, "--campaign", "k", "--fraction", "0.5", "--seed", "3"})
            .code == 0);
  const auto exported = invoke({"export", "--log", log, "--campaign", "k", "--out-dir",
                             (dir / "export").string()});
  REQUIRE(exported.code == 0);
  const auto train = read(dir / "export/train.jsonl");
  const auto test = read(dir / "export/test.jsonl");
  CHECK(std::count(train.begin(), train.end(), '\n') == 3);
  CHECK(std::count(test.begin(), test.end(), '\n') == 3);
  CHECK(std::filesystem::exists(dir / "export/manifest.json"));

  const auto split = invoke({"split", "--corpus", (dir / "export/train.jsonl").string(),
                          "--test-fraction", "0.34", "--seed", "5", "--format", "csv"});
  CHECK(split.code == 0);
  CHECK(split.out.rfind("split,n_total,n_positive,positive_rate\n", 0) == 0);
}

TEST_CASE("standalone ratings files") {
  fixtures::TempDir dir;
  write(dir / "ratings.jsonl",
        "{\"item_id\":\"x\",\"annotator_id\":\"a\",\"class_value\":0}\n"
        "{\"item_id\":\"x\",\"annotator_id\":\"b\",\"class_value\":2}\n"
        "{\"item_id\":\"y\",\"annotator_id\":\"a\",\"class_value\":2}\n"
        "{\"item_id\":\"y\",\"annotator_id\":\"b\",\"class_value\":0}\n");
  const auto r = invoke({"agreement", "--ratings", (dir / "ratings.jsonl").string(), "--format", "json"});
  REQUIRE(r.code == 0);
  CHECK(Json::parse(r.out)["rounds"][0]["alpha_classification"].get<double>() ==
        doctest::Approx(-0.5));
  const auto labels = invoke({"aggregate", "--ratings", (dir / "ratings.jsonl").string()});
  CHECK(labels.out.find("x,0,0,tie-lower") != std::string::npos);
}

TEST_CASE("options can come from a config file") {
  fixtures::TempDir dir;
  write(dir / "plan.ini", "[plan]\ntotal=1000\nrounds=4\n");
  const auto r = invoke({"--config", (dir / "plan.ini").string(), "plan"});
  CHECK(r.code == 0);
  CHECK(r.out == "67 133 267 533\n");
}
