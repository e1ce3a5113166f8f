#pragma once

#include <memory>
#include <string>

#include "coannot/error.hpp"
#include "coannot/service.hpp"

namespace coannot {

struct HttpOptions {
  /// Bearer token for administrative routes. Empty leaves them open.
  std::string admin_token;
};

int http_status(ErrorCode code);
Json error_body(const Error& error);

/// JSON API over a CampaignService. Annotator routes authenticate with the
/// annotator's bearer token; campaign management and evaluations use the
/// admin token.
class ApiServer {
 public:
  ApiServer(CampaignService& service, HttpOptions options = {});
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// Binds to `port` (0 picks a free one) and returns the bound port, or -1.
  int bind(const std::string& host, int port);
  /// Serves until stop(); returns false if the server failed.
  bool serve();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace coannot
