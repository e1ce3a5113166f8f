#include "coannot/cli.hpp"

#include <CLI11.hpp>
#include <pthread.h>
#include <signal.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include "coannot/aggregation.hpp"
#include "coannot/agreement.hpp"
#include "coannot/csv.hpp"
#include "coannot/dataset.hpp"
#include "coannot/error.hpp"
#include "coannot/evaluation.hpp"
#include "coannot/http_api.hpp"
#include "coannot/orchestration.hpp"
#include "coannot/service.hpp"

namespace coannot::cli {

namespace {

enum class Format { Table, Json, Csv };

const std::map<std::string, Format> kFormats{
    {"table", Format::Table}, {"json", Format::Json}, {"csv", Format::Csv}};

CLI::Option* add_format(CLI::App* cmd, Format& format) {
  return cmd->add_option("--format", format, "Output format: table, json or csv")
      ->transform(CLI::CheckedTransformer(kFormats, CLI::ignore_case));
}

std::string fixed(std::optional<double> v, int precision = 4) {
  return v ? format_fixed(*v, precision) : "n/a";
}

Json opt_json(std::optional<double> v) { return v ? Json(*v) : Json(); }

/// Writes to --out when given, otherwise to stdout.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary | std::ios::trunc);
      if (!file_) throw Error(ErrorCode::Io, "cannot open for writing: " + path);
      stream_ = &file_;
    }
  }
  std::ostream& operator*() { return *stream_; }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

std::vector<std::string> read_keywords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open keyword file " + path);
  std::vector<std::string> keywords;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    keywords.push_back(line);
  }
  return keywords;
}

/// Lenient rating records: item_id, annotator_id, class_value, optional
/// round_id (default 1), flags, mark_for_review, is_review.
std::vector<Annotation> load_ratings_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open ratings file " + path);
  std::vector<Annotation> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = Json::parse(line);
      Annotation a;
      a.ref = out.size() + 1;
      a.item_id = j.at("item_id").get<std::string>();
      a.annotator_id = j.at("annotator_id").get<std::string>();
      a.round_id = j.value("round_id", 1);
      a.content = j.get<AnnotationContent>();
      a.is_review = j.value("is_review", false);
      out.push_back(std::move(a));
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::Validation,
                  path + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<AnnotatorCredential> load_annotators_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open annotator file " + path);
  std::vector<AnnotatorCredential> out;
  try {
    for (const auto& a : Json::parse(in)) {
      out.push_back({a.at("id").get<std::string>(), a.at("token").get<std::string>()});
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Validation, path + ": " + e.what());
  }
  return out;
}

std::vector<AnnotatorId> split_list(const std::string& text) {
  std::vector<AnnotatorId> out;
  for (auto& f : split_csv_line(text, ',')) {
    if (!f.empty()) out.push_back(f);
  }
  return out;
}

CampaignService open_service(const std::string& log, std::size_t snapshot_every = 1000) {
  ServiceOptions options;
  options.log_path = log;
  options.snapshot_every = snapshot_every;
  return CampaignService(std::move(options));
}

void write_assignment(std::ostream& out, const Assignment& a, Format format) {
  switch (format) {
    case Format::Json:
      out << Json(a).dump(2) << '\n';
      break;
    case Format::Csv:
      out << "item_id,annotator_id\n";
      for (const auto& [item, who] : a.items) {
        for (const auto& w : who) out << csv_field(item) << ',' << csv_field(w) << '\n';
      }
      break;
    case Format::Table:
      for (const auto& [item, who] : a.items) {
        out << item;
        for (const auto& w : who) out << ' ' << w;
        out << '\n';
      }
      break;
  }
}

void write_labels(std::ostream& out, const std::vector<AggregateLabel>& labels, Format format) {
  switch (format) {
    case Format::Json:
      out << Json(labels).dump(2) << '\n';
      break;
    case Format::Csv:
      write_labels_csv(out, labels);
      break;
    case Format::Table:
      out << std::left << std::setw(16) << "item" << std::setw(7) << "class" << std::setw(18)
          << "method" << "flags\n";
      for (const auto& l : labels) {
        std::string flags;
        for (const auto& f : l.flag_consensus) flags += (flags.empty() ? "" : ",") + f;
        out << std::left << std::setw(16) << l.item_id << std::setw(7) << l.final_class
            << std::setw(18) << to_string(l.method) << flags << '\n';
      }
      break;
  }
}

void write_agreement(std::ostream& out, const std::vector<AgreementReport>& rounds,
                     std::optional<double> cumulative, Format format) {
  switch (format) {
    case Format::Json: {
      out << Json{{"rounds", rounds}, {"cumulative_alpha", opt_json(cumulative)}}.dump(2) << '\n';
      break;
    }
    case Format::Csv:
      out << "round_id,item_id,score,n_annotations,marked_for_review\n";
      for (const auto& r : rounds) {
        std::ostringstream body;
        write_item_scores_csv(body, r);
        std::istringstream lines(body.str());
        std::string line;
        std::getline(lines, line);  // per-round header
        while (std::getline(lines, line)) out << r.round_id << ',' << line << '\n';
      }
      break;
    case Format::Table: {
      std::set<std::string> flags;
      for (const auto& r : rounds) {
        for (const auto& [f, v] : r.ac1_per_flag) flags.insert(f);
      }
      out << std::left << std::setw(7) << "round" << std::setw(9) << "alpha" << std::setw(7)
          << "items" << std::setw(10) << "contested";
      for (const auto& f : flags) out << std::setw(20) << ("ac1:" + f);
      out << '\n';
      for (const auto& r : rounds) {
        const auto contested = std::count_if(r.item_scores.begin(), r.item_scores.end(),
                                             [](const auto& kv) { return kv.second.score > 0; });
        out << std::left << std::setw(7) << r.round_id << std::setw(9)
            << fixed(r.alpha_classification) << std::setw(7) << r.item_scores.size()
            << std::setw(10) << contested;
        for (const auto& f : flags) {
          auto it = r.ac1_per_flag.find(f);
          out << std::setw(20) << (it == r.ac1_per_flag.end() ? "n/a" : fixed(it->second));
        }
        out << '\n';
        for (const auto& w : r.warnings) out << "  warning: " << w << '\n';
      }
      out << "cumulative alpha: " << fixed(cumulative) << '\n';
      break;
    }
  }
}

void write_metrics(std::ostream& out, const std::string& name, const ConfusionMatrix& m,
                   const ClassificationMetrics& metrics, Format format) {
  switch (format) {
    case Format::Json:
      out << Json{{"model", name}, {"confusion", m}, {"metrics", metrics}}.dump(2) << '\n';
      break;
    case Format::Csv:
      out << "model,tp,fp,fn,tn,accuracy,precision_positive,recall_positive,f1_positive,"
             "precision_negative,recall_negative,f1_negative,precision_macro,recall_macro,"
             "f1_macro\n";
      out << csv_field(name) << ',' << m.tp << ',' << m.fp << ',' << m.fn << ',' << m.tn;
      for (double v : {metrics.accuracy, metrics.precision_positive, metrics.recall_positive,
                       metrics.f1_positive, metrics.precision_negative, metrics.recall_negative,
                       metrics.f1_negative, metrics.precision_macro, metrics.recall_macro,
                       metrics.f1_macro}) {
        out << ',' << format_fixed(v, 6);
      }
      out << '\n';
      break;
    case Format::Table:
      out << "model: " << name << '\n'
          << "TP=" << m.tp << " FP=" << m.fp << " FN=" << m.fn << " TN=" << m.tn << '\n'
          << "accuracy        " << format_fixed(metrics.accuracy, 4) << '\n'
          << "positive P/R/F1 " << format_fixed(metrics.precision_positive, 4) << ' '
          << format_fixed(metrics.recall_positive, 4) << ' ' << format_fixed(metrics.f1_positive, 4)
          << '\n'
          << "negative P/R/F1 " << format_fixed(metrics.precision_negative, 4) << ' '
          << format_fixed(metrics.recall_negative, 4) << ' ' << format_fixed(metrics.f1_negative, 4)
          << '\n'
          << "macro P/R/F1    " << format_fixed(metrics.precision_macro, 4) << ' '
          << format_fixed(metrics.recall_macro, 4) << ' ' << format_fixed(metrics.f1_macro, 4)
          << '\n';
      for (const auto& w : metrics.warnings) out << "warning: " << w << '\n';
      break;
  }
}

void write_split_report(std::ostream& out, const SplitReport& report, Format format) {
  switch (format) {
    case Format::Json: out << Json(report).dump(2) << '\n'; break;
    case Format::Csv: write_split_report_csv(out, report); break;
    case Format::Table: write_split_report_table(out, report); break;
  }
}

void serve_until_signal(ApiServer& server) {
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);
  std::thread([&server, signals] {
    int received = 0;
    sigwait(&signals, &received);
    server.stop();
  }).detach();
  if (!server.serve()) throw Error(ErrorCode::Io, "server stopped with an error");
}

struct Options {
  Format format = Format::Table;
  std::string log, campaign, out, out_dir;
  std::uint64_t seed = 0;

  std::string schema, annotators_file, items, annotators, ratings, gold, corpus, keywords,
      reported, training_log, policy = "trajectory", normalize = "casefold", kind, name,
      positive_name = "positive", holdout_mode = "as-test", host = "127.0.0.1", admin_token;
  std::vector<std::string> predictions;
  std::optional<double> reannotation_threshold;
  bool no_anonymize = false, stratified = false, csv_mirror = false, no_flags = false;
  int total = 0, rounds = 0, k = 3, round = 0, port = 8080;
  std::size_t n = 0, size = 0, snapshot_every = 1000;
  double growth = 2.0, fraction = 0.0, test_fraction = 0.2, threshold = 0.5;
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Collaborative annotation campaigns, agreement analysis and evaluation", "coannot"};
  app.set_config("--config", "", "Read options from an INI/TOML file");
  app.require_subcommand(1);
  app.fallthrough();
  Options o;

  auto log_opt = [&](CLI::App* c) {
    c->add_option("--log", o.log, "Campaign event log (NDJSON)")->required();
    c->add_option("--campaign", o.campaign, "Campaign id")->required();
  };
  auto seed_opt = [&](CLI::App* c) {
    return c->add_option("--seed", o.seed, "Random seed")->required();
  };

  auto* init = app.add_subcommand("init", "Create a campaign in an event log");
  log_opt(init);
  init->add_option("--schema", o.schema, "Labelling schema JSON (default: three-level scale)");
  init->add_option("--annotators", o.annotators_file, "JSON array of {id, token}")->required();
  init->add_option("--reannotation-threshold", o.reannotation_threshold);
  init->add_flag("--no-anonymize", o.no_anonymize, "Show annotator ids in deliberation views");

  auto* import = app.add_subcommand("import", "Import items (JSONL) into a campaign");
  log_opt(import);
  import->add_option("--items", o.items, "Items JSONL")->required();

  auto* sample = app.add_subcommand("sample", "Draw a uniform sample from an item pool");
  sample->add_option("--items", o.items, "Items JSONL")->required();
  sample->add_option("-n,--n", o.n, "Sample size")->required();
  seed_opt(sample);
  sample->add_option("--out", o.out, "Output JSONL (default stdout)");

  auto* plan = app.add_subcommand("plan", "Plan escalating round sizes");
  plan->add_option("--total", o.total)->required();
  plan->add_option("--rounds", o.rounds)->required();
  plan->add_option("--growth", o.growth, "Growth factor between rounds")->capture_default_str();
  Format plan_format = Format::Csv;
  plan->add_option("--format", plan_format, "Output format: table, json or csv")
      ->transform(CLI::CheckedTransformer(kFormats, CLI::ignore_case));

  auto* assign = app.add_subcommand(
      "assign", "Open a campaign round (--log) or assign a standalone batch (--items)");
  assign->add_option("--log", o.log);
  assign->add_option("--campaign", o.campaign);
  assign->add_option("--size", o.size, "Fresh items in the round");
  assign->add_option("--items", o.items, "Items JSONL for a standalone batch");
  assign->add_option("--annotators", o.annotators, "Comma-separated annotator ids");
  assign->add_option("--round", o.round, "Round id for a standalone batch");
  assign->add_option("-k,--k", o.k, "Annotators per item")->capture_default_str();
  seed_opt(assign);
  add_format(assign, o.format);

  auto* serve = app.add_subcommand("serve", "Serve the HTTP/JSON API over an event log");
  serve->add_option("--log", o.log)->required();
  serve->add_option("--host", o.host)->capture_default_str();
  serve->add_option("--port", o.port)->capture_default_str();
  serve->add_option("--admin-token", o.admin_token, "Admin bearer token")->envname("COANNOT_TOKEN");
  serve->add_option("--snapshot-every", o.snapshot_every)->capture_default_str();

  auto* close = app.add_subcommand("close-round", "Close a round and compute its summary");
  log_opt(close);
  close->add_option("--round", o.round)->required();
  add_format(close, o.format);

  auto* agreement = app.add_subcommand("agreement", "Agreement report");
  agreement->add_option("--log", o.log);
  agreement->add_option("--campaign", o.campaign);
  agreement->add_option("--ratings", o.ratings, "Standalone ratings JSONL");
  agreement->add_option("--schema", o.schema, "Schema for --ratings");
  add_format(agreement, o.format);

  auto* aggregate = app.add_subcommand("aggregate", "Aggregate labels");
  aggregate->add_option("--log", o.log);
  aggregate->add_option("--campaign", o.campaign);
  aggregate->add_option("--ratings", o.ratings, "Standalone ratings JSONL");
  aggregate->add_option("--schema", o.schema, "Schema for --ratings");
  aggregate->add_option("--out", o.out);
  Format aggregate_format = Format::Csv;
  aggregate->add_option("--format", aggregate_format, "Output format: table, json or csv")
      ->transform(CLI::CheckedTransformer(kFormats, CLI::ignore_case));

  auto* holdout = app.add_subcommand("holdout", "Carve the evaluation holdout");
  log_opt(holdout);
  holdout->add_option("--fraction", o.fraction)->required();
  seed_opt(holdout);
  add_format(holdout, o.format);

  auto* split = app.add_subcommand("split", "Train/test split of a labelled dataset");
  split->add_option("--corpus", o.corpus, "Labelled dataset JSONL")->required();
  split->add_option("--test-fraction", o.test_fraction)->capture_default_str();
  seed_opt(split);
  split->add_flag("--stratified", o.stratified);
  split->add_option("--out-dir", o.out_dir, "Write split files and manifest here");
  split->add_flag("--csv", o.csv_mirror, "Also write CSV mirrors");
  add_format(split, o.format);

  auto* exp = app.add_subcommand("export", "Export campaign labels or dataset splits");
  log_opt(exp);
  exp->add_option("--kind", o.kind, "train, test or labels (single stream)");
  exp->add_option("--out", o.out);
  exp->add_option("--out-dir", o.out_dir, "Write train/test files and manifest here");
  exp->add_option("--holdout-mode", o.holdout_mode, "as-test or separate")
      ->check(CLI::IsMember({"as-test", "separate"}))
      ->capture_default_str();
  exp->add_option("--test-fraction", o.test_fraction, "Test share for --holdout-mode separate");
  exp->add_option("--seed", o.seed, "Split seed for --holdout-mode separate");
  exp->add_flag("--stratified", o.stratified);
  exp->add_flag("--csv", o.csv_mirror, "Also write CSV mirrors");
  exp->add_flag("--no-flags", o.no_flags, "Omit flag fields");

  auto* evaluate = app.add_subcommand("evaluate", "Metrics for one prediction set");
  evaluate->add_option("--gold", o.gold)->required();
  evaluate->add_option("--pred", o.predictions, "Prediction JSONL")->expected(0, 1);
  evaluate->add_option("--keywords", o.keywords, "Keyword list for the keyword baseline");
  evaluate->add_option("--items", o.items, "Items JSONL classified by --keywords");
  evaluate->add_option("--normalize", o.normalize)->capture_default_str();
  evaluate->add_option("--threshold", o.threshold)->capture_default_str();
  add_format(evaluate, o.format);

  auto* compare = app.add_subcommand("compare", "Comparative model report");
  compare->add_option("--gold", o.gold)->required();
  compare->add_option("--pred", o.predictions, "Prediction JSONL (repeatable)");
  compare->add_option("--reported", o.reported, "CSV of reported rows");
  compare->add_option("--keywords", o.keywords, "Add a keyword baseline row");
  compare->add_option("--items", o.items, "Items JSONL classified by --keywords");
  compare->add_option("--normalize", o.normalize)->capture_default_str();
  compare->add_option("--name", o.name, "Keyword baseline row name");
  compare->add_option("--positive-name", o.positive_name)->capture_default_str();
  compare->add_option("--threshold", o.threshold)->capture_default_str();
  add_format(compare, o.format);

  auto* epoch = app.add_subcommand("select-epoch", "Pick the reported epoch from a training log");
  epoch->add_option("--log", o.training_log, "Training log CSV")->required();
  epoch->add_option("--policy", o.policy, "trajectory, min-val-loss or max-f1")
      ->capture_default_str();
  Format epoch_format = Format::Csv;
  epoch->add_option("--format", epoch_format, "Output format: table, json or csv")
      ->transform(CLI::CheckedTransformer(kFormats, CLI::ignore_case));

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kSuccess;
    }
    app.exit(e, err, err);
    return kUsageError;
  }

  auto usage = [&](const std::string& message) {
    err << message << "\nRun with --help for more information.\n";
    return kUsageError;
  };

  try {
    if (*init) {
      CampaignSpec spec;
      spec.id = o.campaign;
      spec.schema = o.schema.empty() ? default_schema() : load_schema_file(o.schema);
      spec.annotators = load_annotators_file(o.annotators_file);
      spec.anonymize_deliberation = !o.no_anonymize;
      spec.reannotation_threshold = o.reannotation_threshold;
      auto service = open_service(o.log);
      service.create_campaign(spec);
      out << "created campaign " << spec.id << " with " << spec.annotators.size()
          << " annotators\n";
    } else if (*import) {
      auto service = open_service(o.log);
      out << "imported " << service.import_items(o.campaign, load_items_file(o.items))
          << " items\n";
    } else if (*sample) {
      const auto pool = load_items_file(o.items);
      std::map<ItemId, const Item*> by_id;
      for (const auto& item : pool) by_id[item.id] = &item;
      std::vector<Item> drawn;
      for (const auto& id : sample_pool(pool, o.n, o.seed)) drawn.push_back(*by_id.at(id));
      Sink sink(o.out, out);
      write_items_jsonl(*sink, drawn);
    } else if (*plan) {
      const auto p = plan_rounds(o.total, o.rounds, o.growth);
      switch (plan_format) {
        case Format::Json: out << Json(p).dump(2) << '\n'; break;
        case Format::Csv:
          for (std::size_t i = 0; i < p.round_sizes.size(); ++i) {
            out << (i ? " " : "") << p.round_sizes[i];
          }
          out << '\n';
          break;
        case Format::Table:
          out << "round  size\n";
          for (std::size_t i = 0; i < p.round_sizes.size(); ++i) {
            out << std::left << std::setw(7) << i + 1 << p.round_sizes[i] << '\n';
          }
          out << "total  " << p.total << '\n';
          break;
      }
    } else if (*assign) {
      if (!o.log.empty()) {
        if (o.campaign.empty() || !assign->count("--size")) {
          return usage("assign --log requires --campaign and --size");
        }
        auto service = open_service(o.log);
        const auto round_id = service.open_round(o.campaign, o.size, o.k, o.seed);
        const auto state = service.state();
        const auto& round = state.at(o.campaign).rounds.at(round_id);
        write_assignment(out, Assignment{round_id, round.assigned}, o.format);
      } else {
        if (o.items.empty() || o.annotators.empty()) {
          return usage("assign requires either --log or both --items and --annotators");
        }
        std::vector<ItemId> ids;
        for (const auto& item : load_items_file(o.items)) ids.push_back(item.id);
        const auto annotators = split_list(o.annotators);
        write_assignment(out, assign_batch(ids, annotators, o.k, o.seed, o.round), o.format);
      }
    } else if (*serve) {
      auto service = open_service(o.log, o.snapshot_every);
      ApiServer server(service, HttpOptions{o.admin_token});
      const int port = server.bind(o.host, o.port);
      if (port < 0) throw Error(ErrorCode::Io, "cannot bind " + o.host + ":" + std::to_string(o.port));
      out << "listening on " << o.host << ':' << port << std::endl;
      serve_until_signal(server);
    } else if (*close) {
      auto service = open_service(o.log);
      const auto result = service.close_round(o.campaign, o.round);
      if (result.already_closed) {
        throw Error(ErrorCode::AlreadyClosed, "round " + std::to_string(o.round) + " is already closed");
      }
      const auto& s = result.summary;
      if (o.format == Format::Json) {
        out << Json(s).dump(2) << '\n';
      } else {
        if (o.format == Format::Csv) {
          out << "round_id,alpha,alpha_cumulative,n_items,review_queue,reannotation_queue,labelled\n"
              << s.round_id << ',' << fixed(s.agreement.alpha_classification, 6) << ','
              << fixed(s.agreement.alpha_cumulative, 6) << ',' << s.agreement.item_scores.size()
              << ',' << s.review_queue.size() << ',' << s.reannotation_queue.size() << ','
              << s.labels.size() << '\n';
        } else {
          out << "round " << s.round_id << " closed\n"
              << "alpha (round)       " << fixed(s.agreement.alpha_classification) << '\n'
              << "alpha (cumulative)  " << fixed(s.agreement.alpha_cumulative) << '\n'
              << "items scored        " << s.agreement.item_scores.size() << '\n'
              << "review queue        " << s.review_queue.size() << '\n'
              << "re-annotation queue " << s.reannotation_queue.size() << '\n'
              << "labelled            " << s.labels.size() << '\n';
          for (const auto& w : s.agreement.warnings) out << "warning: " << w << '\n';
        }
      }
    } else if (*agreement) {
      std::vector<AgreementReport> reports;
      std::optional<double> cumulative;
      if (!o.ratings.empty()) {
        const auto schema = o.schema.empty() ? default_schema() : load_schema_file(o.schema);
        const auto ratings = load_ratings_file(o.ratings);
        std::map<RoundId, std::vector<Annotation>> by_round;
        for (const auto& a : ratings) by_round[a.round_id].push_back(a);
        const Timestamp epoch{};
        for (const auto& [rid, anns] : by_round) {
          reports.push_back(agreement_report(anns, schema, rid, epoch));
        }
        cumulative = cumulative_alpha(ratings, schema);
      } else if (!o.log.empty() && !o.campaign.empty()) {
        auto service = open_service(o.log);
        const auto j = service.agreement(o.campaign);
        reports = j.at("rounds").get<std::vector<AgreementReport>>();
        if (!j.at("cumulative_alpha").is_null()) cumulative = j.at("cumulative_alpha").get<double>();
        if (o.format == Format::Json) {
          out << j.dump(2) << '\n';
          return kSuccess;
        }
      } else {
        return usage("agreement requires --log and --campaign, or --ratings");
      }
      write_agreement(out, reports, cumulative, o.format);
    } else if (*aggregate) {
      std::vector<AggregateLabel> labels;
      if (!o.ratings.empty()) {
        const auto schema = o.schema.empty() ? default_schema() : load_schema_file(o.schema);
        std::map<ItemId, std::vector<Annotation>> by_item;
        for (auto& a : load_ratings_file(o.ratings)) by_item[a.item_id].push_back(std::move(a));
        for (const auto& [item, anns] : by_item) {
          for (const auto& a : anns) {
            if (auto errors = validate_annotation(a, schema); !errors.empty()) {
              throw Error(ErrorCode::Validation, "rating for " + item + " violates the schema",
                          errors);
            }
          }
          labels.push_back(aggregate_item(item, anns, schema));
        }
      } else if (!o.log.empty() && !o.campaign.empty()) {
        labels = open_service(o.log).labels(o.campaign);
      } else {
        return usage("aggregate requires --log and --campaign, or --ratings");
      }
      Sink sink(o.out, out);
      write_labels(*sink, labels, aggregate_format);
    } else if (*holdout) {
      auto service = open_service(o.log);
      const auto ids = service.carve_holdout(o.campaign, o.fraction, o.seed);
      if (o.format == Format::Json) {
        out << Json{{"holdout_ids", ids}}.dump(2) << '\n';
      } else if (o.format == Format::Csv) {
        out << "item_id\n";
        for (const auto& id : ids) out << csv_field(id) << '\n';
      } else {
        out << "holdout: " << ids.size() << " items\n";
      }
    } else if (*split) {
      std::ifstream in(o.corpus);
      if (!in) throw Error(ErrorCode::Io, "cannot open corpus " + o.corpus);
      std::vector<LabelledItem> corpus;
      for (auto& r : read_dataset_jsonl(in)) corpus.push_back(std::move(r.labelled));
      const auto parts = split_corpus(corpus, o.test_fraction, o.seed, o.stratified);
      const std::vector<DatasetSplit> splits{parts.train, parts.test};
      if (!o.out_dir.empty()) {
        ExportOptions options;
        options.directory = o.out_dir;
        options.csv_mirror = o.csv_mirror;
        options.parameters = Json{{"seed", o.seed},
                                  {"test_fraction", o.test_fraction},
                                  {"stratified", o.stratified}};
        export_dataset(splits, options);
      }
      write_split_report(out, split_stats(splits), o.format);
    } else if (*exp) {
      auto service = open_service(o.log);
      const auto state = service.state();
      const auto& campaign = state.at(o.campaign);
      if (!o.kind.empty()) {
        Sink sink(o.out, out);
        *sink << export_campaign(campaign, parse_export_kind(o.kind), !o.no_flags);
      } else if (!o.out_dir.empty()) {
        std::vector<LabelledItem> pool, held;
        for (auto& item : campaign.labelled_corpus()) {
          (campaign.holdout.count(item.item.id) ? held : pool).push_back(std::move(item));
        }
        ExportOptions options;
        options.directory = o.out_dir;
        options.include_flags = !o.no_flags;
        options.csv_mirror = o.csv_mirror;
        options.parameters = Json{{"campaign_id", o.campaign},
                                  {"holdout_mode", o.holdout_mode},
                                  {"last_sequence", state.last_sequence()}};
        std::vector<DatasetSplit> splits;
        if (o.holdout_mode == "as-test") {
          splits = {DatasetSplit{"train", pool}, DatasetSplit{"test", held}};
        } else {
          if (!exp->count("--seed")) return usage("--holdout-mode separate requires --seed");
          auto parts = split_corpus(pool, o.test_fraction, o.seed, o.stratified);
          splits = {parts.train, parts.test, DatasetSplit{"holdout", held}};
          options.parameters["seed"] = o.seed;
          options.parameters["test_fraction"] = o.test_fraction;
          options.parameters["stratified"] = o.stratified;
        }
        const auto manifest = export_dataset(splits, options, campaign.holdout);
        for (const auto& f : manifest.files) {
          out << f.split << ' ' << f.n_records << " records " << f.sha256 << '\n';
        }
      } else {
        return usage("export requires --kind or --out-dir");
      }
    } else if (*evaluate) {
      const auto gold = load_gold_file(o.gold);
      PredictionSet set;
      if (!o.predictions.empty()) {
        set = load_predictions_file(o.predictions.front(), o.threshold);
      } else if (!o.keywords.empty() && !o.items.empty()) {
        KeywordClassifier classifier(read_keywords(o.keywords),
                                     TextNormalizer(parse_normalization(o.normalize)));
        set = classifier.predict("Keyword", load_items_file(o.items));
      } else {
        return usage("evaluate requires --pred, or --keywords with --items");
      }
      const auto matrix = confusion_matrix(gold, set);
      write_metrics(out, set.model_name, matrix, classification_metrics(matrix), o.format);
    } else if (*compare) {
      const auto gold = load_gold_file(o.gold);
      std::vector<PredictionSet> sets;
      for (const auto& path : o.predictions) sets.push_back(load_predictions_file(path, o.threshold));
      if (!o.keywords.empty()) {
        if (o.items.empty()) return usage("--keywords requires --items");
        KeywordClassifier classifier(read_keywords(o.keywords),
                                     TextNormalizer(parse_normalization(o.normalize)));
        sets.push_back(classifier.predict(o.name.empty() ? "Keyword" : o.name,
                                          load_items_file(o.items)));
      }
      std::vector<ReportRow> reported;
      if (!o.reported.empty()) {
        std::ifstream in(o.reported);
        if (!in) throw Error(ErrorCode::Io, "cannot open reported rows " + o.reported);
        reported = read_reported_rows_csv(in);
      }
      if (sets.empty() && reported.empty()) {
        return usage("compare requires at least one --pred, --keywords or --reported");
      }
      const auto report = compare_models(gold, sets, reported, o.positive_name);
      const std::size_t recomputed = std::count_if(report.rows.begin(), report.rows.end(), [](const auto& r) {
        return r.origin == RowOrigin::Recomputed;
      });
      switch (o.format) {
        case Format::Json: out << Json(report).dump(2) << '\n'; break;
        case Format::Csv: write_report_csv(out, report); break;
        case Format::Table: write_report_table(out, report); break;
      }
      for (const auto& w : report.warnings) err << "warning: " << w << '\n';
      if (recomputed < sets.size()) return kDomainError;
    } else if (*epoch) {
      const auto log = load_training_log_file(o.training_log);
      const auto policy = parse_epoch_policy(o.policy);
      const int chosen = select_epoch(log, policy);
      switch (epoch_format) {
        case Format::Json:
          out << Json{{"policy", o.policy}, {"epoch", chosen}}.dump() << '\n';
          break;
        case Format::Csv: out << chosen << '\n'; break;
        case Format::Table: {
          out << "policy " << o.policy << ": epoch " << chosen << '\n';
          break;
        }
      }
    }
  } catch (const Error& e) {
    err << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
    for (const auto& d : e.details()) err << "  " << d << '\n';
    return kDomainError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDomainError;
  }
  return kSuccess;
}

}  // namespace coannot::cli
