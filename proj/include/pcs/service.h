#ifndef PCS_SERVICE_H_
#define PCS_SERVICE_H_

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcs/baselines.h"
#include "pcs/core.h"
#include "pcs/scheduler.h"

namespace pcs {

struct ServiceConfig {
  std::string listen_addr = "127.0.0.1:8080";
  std::string items_path;
  std::string log_path;
  std::string live_rating = "elo";  // "elo" or "none"
  std::optional<std::string> model_checkpoint;
  std::optional<std::string> static_dir;
  SchedulerConfig scheduler;
  EloConfig elo;
  std::int64_t pair_ttl_ms = 24LL * 3600 * 1000;
  // Scheduler snapshot cadence, in accepted responses. 0 disables snapshots.
  std::size_t snapshot_every = 100;
  std::optional<std::int64_t> max_responses_per_respondent;
  // Seed for pair tokens; the scheduler has its own in `scheduler.seed`.
  std::uint64_t seed = 0;

  void validate() const;
};

ServiceConfig service_config_from_json(const std::string& text,
                                       const ServiceConfig& base = {});
// PCS_LISTEN_ADDR, PCS_ITEMS_PATH, PCS_LOG_PATH, PCS_MODEL_CHECKPOINT.
void apply_env_overrides(ServiceConfig& config);

struct ResponseRecord {
  std::string response_id;
  std::string pair_id;
  std::string left_id;
  std::string right_id;
  Outcome outcome = Outcome::kTie;
  std::string respondent_id;
  std::int64_t received_at = 0;  // ms since epoch, strictly increasing

  Comparison comparison() const;
};

nlohmann::json record_to_json(const ResponseRecord& r);
ResponseRecord record_from_json(const nlohmann::json& j);

// "left" -> kLeft, "tie" -> kTie, "right" -> kRight; nullopt otherwise.
std::optional<Outcome> parse_choice(const std::string& choice);
std::string choice_name(Outcome y);

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

// Transport-independent survey state: scheduler, append-only response log,
// live leaderboard and optional model scores. All mutations hold one
// exclusive lock; reads share it.
class SurveyService {
 public:
  using Clock = std::function<std::int64_t()>;

  // Loads the catalog (and checkpoint, if configured) and replays the log.
  // Throws when the catalog or checkpoint cannot be loaded.
  explicit SurveyService(ServiceConfig config, Clock clock = {});

  ApiResponse get_pair(const std::optional<std::string>& respondent);
  ApiResponse post_response(const std::string& body);
  ApiResponse get_scores(const std::string& method) const;
  ApiResponse get_stats() const;

  std::vector<ResponseRecord> records() const;
  ScoreTable live_scores() const;
  Exposure exposure() const;
  const ItemCatalog& catalog() const { return *items_; }
  const ServiceConfig& config() const { return config_; }

  void write_snapshot();

 private:
  struct Token {
    std::string left_id;
    std::string right_id;
    std::int64_t issued_at = 0;
  };

  void replay();
  void apply(const ResponseRecord& r);
  void append_to_log(const ResponseRecord& r);
  std::string new_token();
  std::int64_t now() const { return clock_(); }

  ServiceConfig config_;
  Clock clock_;
  std::optional<ScoreTable> model_scores_;
  std::shared_ptr<const ItemCatalog> items_;

  mutable std::shared_mutex mu_;
  Scheduler scheduler_;
  EloRater rater_;
  Rng token_rng_;
  std::unordered_map<std::string, Token> tokens_;
  std::vector<ResponseRecord> records_;
  std::unordered_map<std::string, std::size_t> by_response_id_;
  std::map<std::string, std::int64_t> per_respondent_;
  std::size_t n_ties_ = 0;
  std::int64_t last_received_at_ = 0;
};

// HTTP front end over a SurveyService.
class HttpServer {
 public:
  HttpServer(SurveyService& service, std::optional<std::string> static_dir);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Port 0 binds an ephemeral port. Returns the bound port.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void serve();
  // serve() on a background thread.
  void start();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// "host:port" with a numeric port.
std::pair<std::string, int> parse_listen_addr(const std::string& addr);

// Boots the service and serves until the process is stopped.
void run_service(const ServiceConfig& config);

}  // namespace pcs

#endif  // PCS_SERVICE_H_
