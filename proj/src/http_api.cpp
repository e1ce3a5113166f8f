#include "coannot/http_api.hpp"

#include <httplib.h>

#include <atomic>
#include <map>
#include <mutex>
#include <sstream>

#include "coannot/evaluation.hpp"

namespace coannot {

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::Validation:
    case ErrorCode::InvalidArgument:
    case ErrorCode::InvalidClass:
    case ErrorCode::Configuration:
      return 400;
    case ErrorCode::Unauthorized:
      return 401;
    case ErrorCode::NotFound:
      return 404;
    case ErrorCode::Conflict:
    case ErrorCode::RoundClosed:
    case ErrorCode::AlreadyClosed:
      return 409;
    case ErrorCode::Infeasible:
    case ErrorCode::InsufficientData:
    case ErrorCode::DegenerateDistribution:
    case ErrorCode::Coverage:
      return 422;
    case ErrorCode::Io:
    case ErrorCode::Corruption:
      return 500;
  }
  return 500;
}

Json error_body(const Error& error) {
  return Json{{"code", to_string(error.code())},
              {"message", error.what()},
              {"details", error.details()}};
}

namespace {

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

std::string bearer(const httplib::Request& req) {
  const auto header = req.get_header_value("Authorization");
  constexpr std::string_view prefix = "Bearer ";
  if (header.size() > prefix.size() && header.compare(0, prefix.size(), prefix) == 0) {
    return header.substr(prefix.size());
  }
  return {};
}

Json parse_body(const httplib::Request& req) {
  try {
    return Json::parse(req.body);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Validation, std::string("malformed JSON body: ") + e.what());
  }
}

template <typename T>
T field(const Json& body, const char* key) {
  if (!body.contains(key)) throw Error(ErrorCode::Validation, std::string("missing field ") + key);
  try {
    return body.at(key).get<T>();
  } catch (const Json::exception&) {
    throw Error(ErrorCode::Validation, std::string("field ") + key + " has wrong type");
  }
}

/// Accepts {"content": {...}} or the content fields inline.
AnnotationContent content_of(const Json& body) {
  try {
    return (body.contains("content") ? body.at("content") : body).get<AnnotationContent>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Validation, std::string("malformed annotation content: ") + e.what());
  }
}

std::vector<Item> items_of(const httplib::Request& req) {
  const auto type = req.get_header_value("Content-Type");
  if (type.find("ndjson") != std::string::npos || type.find("jsonl") != std::string::npos) {
    std::istringstream in(req.body);
    return read_items_jsonl(in);
  }
  Json body = parse_body(req);
  if (body.is_object()) body = body.value("items", Json::array());
  if (!body.is_array()) throw Error(ErrorCode::Validation, "expected an array of items");
  try {
    return body.get<std::vector<Item>>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Validation, std::string("malformed item: ") + e.what());
  }
}

CampaignSpec spec_of(const Json& body) {
  CampaignSpec spec;
  spec.id = field<std::string>(body, "id");
  if (body.contains("schema")) {
    try {
      spec.schema = body.at("schema").get<LabellingSchema>();
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::Validation, std::string("malformed schema: ") + e.what());
    }
  }
  for (const auto& a : field<Json>(body, "annotators")) {
    spec.annotators.push_back({field<std::string>(a, "id"), field<std::string>(a, "token")});
  }
  spec.anonymize_deliberation = body.value("anonymize_deliberation", true);
  if (body.contains("reannotation_threshold")) {
    spec.reannotation_threshold = field<double>(body, "reannotation_threshold");
  }
  return spec;
}

}  // namespace

struct ApiServer::Impl {
  CampaignService& service;
  HttpOptions options;
  httplib::Server server;

  std::mutex evaluations_mutex;
  std::map<std::string, Json> evaluations;
  std::uint64_t next_evaluation = 1;

  Impl(CampaignService& s, HttpOptions o) : service(s), options(std::move(o)) { routes(); }

  void require_admin(const httplib::Request& req) const {
    if (options.admin_token.empty()) return;
    if (bearer(req) != options.admin_token) {
      throw Error(ErrorCode::Unauthorized, "admin token required");
    }
  }

  Principal require_annotator(const httplib::Request& req) const {
    auto principal = service.authenticate(bearer(req));
    if (!principal) throw Error(ErrorCode::Unauthorized, "unknown or missing annotator token");
    return *principal;
  }

  template <typename F>
  httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const Error& e) {
        send_json(res, http_status(e.code()), error_body(e));
      } catch (const std::exception& e) {
        send_json(res, 500, error_body(Error(ErrorCode::Io, e.what())));
      }
    };
  }

  static RoundId round_param(const httplib::Request& req) {
    try {
      return std::stoi(req.path_params.at("round"));
    } catch (const std::exception&) {
      throw Error(ErrorCode::Validation, "round id must be an integer");
    }
  }

  void routes() {
    server.Post("/campaigns", guarded([this](const auto& req, auto& res) {
      require_admin(req);
      const auto spec = spec_of(parse_body(req));
      service.create_campaign(spec);
      send_json(res, 201, Json{{"id", spec.id}, {"sequence", service.last_sequence()}});
    }));

    server.Get("/campaigns/:id/schema", guarded([this](const auto& req, auto& res) {
      send_json(res, 200, Json(service.schema(req.path_params.at("id"))));
    }));

    server.Post("/campaigns/:id/items", guarded([this](const auto& req, auto& res) {
      require_admin(req);
      const auto n = service.import_items(req.path_params.at("id"), items_of(req));
      send_json(res, 201, Json{{"imported", n}});
    }));

    server.Post("/campaigns/:id/rounds", guarded([this](const auto& req, auto& res) {
      require_admin(req);
      const auto body = parse_body(req);
      const auto& cid = req.path_params.at("id");
      const auto round_id = service.open_round(cid, field<std::size_t>(body, "size"),
                                               body.value("k", service.schema(cid).min_annotators_per_item),
                                               field<std::uint64_t>(body, "seed"));
      const auto state = service.state();
      const auto& round = state.at(cid).rounds.at(round_id);
      send_json(res, 201, Json{{"round_id", round_id},
                               {"items", round.items},
                               {"reannotation_items", round.reannotation_items},
                               {"assignments", round.assigned}});
    }));

    server.Post("/campaigns/:id/rounds/:round/expire", guarded([this](const auto& req, auto& res) {
      require_admin(req);
      const auto body = parse_body(req);
      const auto replacement = service.expire_assignment(
          req.path_params.at("id"), round_param(req),
          field<std::string>(body, "item_id"), field<std::string>(body, "annotator_id"));
      send_json(res, 200, Json{{"replacement", replacement ? Json(*replacement) : Json()}});
    }));

    server.Post("/campaigns/:id/rounds/:round/close", guarded([this](const auto& req, auto& res) {
      require_admin(req);
      const auto round_id = round_param(req);
      const auto result = service.close_round(req.path_params.at("id"), round_id);
      if (result.already_closed) {
        Json body = error_body(Error(ErrorCode::AlreadyClosed,
                                     "round " + std::to_string(round_id) + " is already closed"));
        body["summary"] = result.summary;
        send_json(res, 409, body);
        return;
      }
      send_json(res, 200, Json(result.summary));
    }));

    server.Post("/campaigns/:id/holdout", guarded([this](const auto& req, auto& res) {
      require_admin(req);
      const auto body = parse_body(req);
      const auto holdout = service.carve_holdout(req.path_params.at("id"),
                                                 field<double>(body, "fraction"),
                                                 field<std::uint64_t>(body, "seed"));
      send_json(res, 201, Json{{"holdout_ids", holdout}});
    }));

    server.Get("/queue", guarded([this](const auto& req, auto& res) {
      const auto who = require_annotator(req);
      Json units = Json::array();
      for (const auto& u : service.next_queue(who.campaign_id, who.annotator_id)) {
        units.push_back({{"item_id", u.item_id},
                         {"round_id", u.round_id},
                         {"kind", to_string(u.kind)},
                         {"text", u.text}});
      }
      send_json(res, 200, Json{{"campaign_id", who.campaign_id},
                               {"annotator_id", who.annotator_id},
                               {"items", units}});
    }));

    auto submit = [this](bool review) {
      return guarded([this, review](const httplib::Request& req, httplib::Response& res) {
        const auto who = require_annotator(req);
        const auto body = parse_body(req);
        const auto item = field<std::string>(body, "item_id");
        const auto round = field<int>(body, "round_id");
        const auto key = field<std::string>(body, "idempotency_key");
        const auto content = content_of(body);
        const auto ack =
            review ? service.submit_review(who.campaign_id, who.annotator_id, item, round, content, key)
                   : service.submit_annotation(who.campaign_id, who.annotator_id, item, round,
                                               content, key);
        send_json(res, ack.duplicate ? 200 : 201,
                  Json{{"sequence", ack.sequence},
                       {"annotation_ref", ack.annotation},
                       {"duplicate", ack.duplicate}});
      });
    };
    server.Post("/annotations", submit(false));
    server.Post("/reviews", submit(true));

    server.Get("/campaigns/:id/deliberation", guarded([this](const auto& req, auto& res) {
      require_admin(req);
      send_json(res, 200, service.deliberation(req.path_params.at("id")));
    }));

    server.Post("/campaigns/:id/harmonisations", guarded([this](const auto& req, auto& res) {
      require_admin(req);
      const auto body = parse_body(req);
      const auto label =
          service.harmonise_item(req.path_params.at("id"), field<std::string>(body, "item_id"),
                                 content_of(body), field<std::string>(body, "session_ref"));
      send_json(res, 201, Json(label));
    }));

    server.Get("/campaigns/:id/agreement", guarded([this](const auto& req, auto& res) {
      send_json(res, 200, service.agreement(req.path_params.at("id")));
    }));

    server.Get("/campaigns/:id/export", guarded([this](const auto& req, auto& res) {
      require_admin(req);
      const auto kind = parse_export_kind(req.has_param("kind") ? req.get_param_value("kind") : "");
      const bool flags = req.get_param_value("flags") != "false";
      const auto state = service.state();
      res.status = 200;
      res.set_content(export_campaign(state.at(req.path_params.at("id")), kind, flags),
                      kind == ExportKind::Labels ? "text/csv" : "application/x-ndjson");
    }));

    server.Post("/evaluations", guarded([this](const auto& req, auto& res) {
      require_admin(req);
      if (!req.is_multipart_form_data()) {
        throw Error(ErrorCode::Validation, "expected multipart/form-data");
      }
      if (!req.has_file("gold")) throw Error(ErrorCode::Validation, "missing part: gold");
      const auto predictions = req.get_file_values("predictions");
      if (predictions.empty()) throw Error(ErrorCode::Validation, "missing part: predictions");

      double threshold = 0.5;
      if (req.has_file("threshold")) {
        try {
          threshold = std::stod(req.get_file_value("threshold").content);
        } catch (const std::exception&) {
          throw Error(ErrorCode::Validation, "threshold must be a number");
        }
      }
      std::istringstream gold_in(req.get_file_value("gold").content);
      const auto gold = read_gold_jsonl(gold_in);

      std::vector<PredictionSet> sets;
      for (std::size_t i = 0; i < predictions.size(); ++i) {
        const auto& part = predictions[i];
        std::string name = std::filesystem::path(part.filename).stem().string();
        if (name.empty()) name = "model-" + std::to_string(i + 1);
        std::istringstream in(part.content);
        sets.push_back(read_predictions_jsonl(in, name, threshold));
      }
      std::vector<ReportRow> reported;
      if (req.has_file("reported")) {
        std::istringstream in(req.get_file_value("reported").content);
        reported = read_reported_rows_csv(in);
      }
      std::string positive = "positive";
      if (req.has_file("positive_name")) positive = req.get_file_value("positive_name").content;

      Json report = compare_models(gold, sets, reported, positive);
      std::string id;
      {
        std::lock_guard lock(evaluations_mutex);
        id = "eval-" + std::to_string(next_evaluation++);
        report["id"] = id;
        evaluations[id] = report;
      }
      send_json(res, 201, report);
    }));

    server.Get("/evaluations/:id", guarded([this](const auto& req, auto& res) {
      std::lock_guard lock(evaluations_mutex);
      auto it = evaluations.find(req.path_params.at("id"));
      if (it == evaluations.end()) {
        throw Error(ErrorCode::NotFound, "unknown evaluation " + req.path_params.at("id"));
      }
      send_json(res, 200, it->second);
    }));

    server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
      if (res.status == 404 && res.body.empty()) {
        send_json(res, 404, error_body(Error(ErrorCode::NotFound, "no route for " + req.path)));
      }
    });
  }
};

ApiServer::ApiServer(CampaignService& service, HttpOptions options)
    : impl_(std::make_unique<Impl>(service, std::move(options))) {}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool ApiServer::serve() { return impl_->server.listen_after_bind(); }

void ApiServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

void ApiServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace coannot
