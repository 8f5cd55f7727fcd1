#include "pcs/service.h"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "pcs/dataio.h"
#include "pcs/metrics.h"
#include "pcs/model.h"

namespace pcs {

namespace {

using nlohmann::json;

std::int64_t system_now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

bool valid_identifier(const std::string& s) {
  if (s.empty() || s.size() > 128) return false;
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == ':' ||
           c == '@';
  });
}

ApiResponse error_response(int status, const std::string& message) {
  return {status, json{{"error", message}}};
}

json item_json(const Item& it) {
  json j{{"id", it.id},
         {"media_uri", it.media_uri ? json(*it.media_uri) : json(nullptr)}};
  if (!it.attributes.empty()) j["attributes"] = it.attributes;
  return j;
}

json ranked(const ScoreTable& t) {
  std::vector<std::pair<std::string, double>> rows(t.scores.begin(),
                                                   t.scores.end());
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return a.second > b.second;
  });
  json list = json::array();
  for (const auto& [id, score] : rows) {
    list.push_back({{"item_id", id}, {"score", score}});
  }
  return list;
}

std::shared_ptr<const ItemCatalog> boot_catalog(
    const ServiceConfig& config, std::optional<ScoreTable>& model_scores) {
  config.validate();
  std::optional<Checkpoint> ckpt;
  if (config.model_checkpoint) ckpt = load_checkpoint(*config.model_checkpoint);
  const Standardization* fixed =
      ckpt && ckpt->standardization ? &*ckpt->standardization : nullptr;
  LoadedItems loaded = load_items(config.items_path, fixed);
  if (ckpt) {
    if (loaded.catalog->size() > 0 &&
        loaded.catalog->feature_dim() != ckpt->params.arch.input_dim) {
      throw Error("checkpoint input_dim does not match item features");
    }
    model_scores = model_score_table(ckpt->params, *loaded.catalog);
  }
  return loaded.catalog;
}

std::string snapshot_path(const ServiceConfig& c) {
  return c.log_path + ".snapshot";
}

}  // namespace

// --------------------------------------------------------------- config

void ServiceConfig::validate() const {
  if (items_path.empty()) throw Error("service: items_path is required");
  if (log_path.empty()) throw Error("service: log_path is required");
  if (live_rating != "elo" && live_rating != "none") {
    throw Error("service: live_rating must be 'elo' or 'none'");
  }
  if (pair_ttl_ms <= 0) throw Error("service: pair_ttl must be > 0");
  if (max_responses_per_respondent && *max_responses_per_respondent < 1) {
    throw Error("service: max_responses_per_respondent must be >= 1");
  }
  scheduler.validate();
  parse_listen_addr(listen_addr);
}

ServiceConfig service_config_from_json(const std::string& text,
                                       const ServiceConfig& base) {
  ServiceConfig c = base;
  try {
    const json doc = json::parse(text);
    if (!doc.is_object()) throw Error("service config must be a JSON object");
    c.listen_addr = doc.value("listen_addr", c.listen_addr);
    c.items_path = doc.value("items_path", c.items_path);
    c.log_path = doc.value("log_path", c.log_path);
    c.live_rating = doc.value("live_rating", c.live_rating);
    if (doc.contains("model_checkpoint") && !doc["model_checkpoint"].is_null()) {
      c.model_checkpoint = doc["model_checkpoint"].get<std::string>();
    }
    if (doc.contains("static_dir") && !doc["static_dir"].is_null()) {
      c.static_dir = doc["static_dir"].get<std::string>();
    }
    if (doc.contains("scheduler")) {
      const json& s = doc["scheduler"];
      c.scheduler.n_match_attributes =
          s.value("n_match_attributes", c.scheduler.n_match_attributes);
      c.scheduler.match_tolerance =
          s.value("match_tolerance", c.scheduler.match_tolerance);
      c.scheduler.seed = s.value("seed", c.scheduler.seed);
    }
    if (doc.contains("elo")) {
      const json& e = doc["elo"];
      c.elo.k_factor = e.value("k_factor", c.elo.k_factor);
      c.elo.initial_rating = e.value("initial_rating", c.elo.initial_rating);
      c.elo.scale = e.value("scale", c.elo.scale);
    }
    if (doc.contains("pair_ttl_hours")) {
      c.pair_ttl_ms = static_cast<std::int64_t>(
          doc["pair_ttl_hours"].get<double>() * 3600.0 * 1000.0);
    }
    c.snapshot_every = doc.value("snapshot_every", c.snapshot_every);
    if (doc.contains("max_responses_per_respondent") &&
        !doc["max_responses_per_respondent"].is_null()) {
      c.max_responses_per_respondent =
          doc["max_responses_per_respondent"].get<std::int64_t>();
    }
    c.seed = doc.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw Error(std::string("malformed service config: ") + e.what());
  }
  return c;
}

void apply_env_overrides(ServiceConfig& c) {
  auto env = [](const char* name) -> std::optional<std::string> {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
  };
  if (auto v = env("PCS_LISTEN_ADDR")) c.listen_addr = *v;
  if (auto v = env("PCS_ITEMS_PATH")) c.items_path = *v;
  if (auto v = env("PCS_LOG_PATH")) c.log_path = *v;
  if (auto v = env("PCS_MODEL_CHECKPOINT")) c.model_checkpoint = *v;
}

std::pair<std::string, int> parse_listen_addr(const std::string& addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == addr.size()) {
    throw Error("listen address must be host:port, got '" + addr + "'");
  }
  const std::string port_text = addr.substr(colon + 1);
  if (!std::all_of(port_text.begin(), port_text.end(),
                   [](unsigned char c) { return std::isdigit(c); }) ||
      port_text.size() > 5) {
    throw Error("bad port in listen address '" + addr + "'");
  }
  const int port = std::stoi(port_text);
  if (port > 65535) throw Error("bad port in listen address '" + addr + "'");
  return {addr.substr(0, colon), port};
}

// -------------------------------------------------------------- records

Comparison ResponseRecord::comparison() const {
  Comparison c;
  c.left_id = left_id;
  c.right_id = right_id;
  c.outcome = outcome;
  c.respondent_id = respondent_id;
  c.created_at = received_at;
  return c;
}

std::optional<Outcome> parse_choice(const std::string& choice) {
  if (choice == "left") return Outcome::kLeft;
  if (choice == "tie") return Outcome::kTie;
  if (choice == "right") return Outcome::kRight;
  return std::nullopt;
}

std::string choice_name(Outcome y) {
  switch (y) {
    case Outcome::kLeft: return "left";
    case Outcome::kTie: return "tie";
    case Outcome::kRight: return "right";
  }
  return "tie";
}

json record_to_json(const ResponseRecord& r) {
  return {{"response_id", r.response_id},
          {"pair_id", r.pair_id},
          {"left_id", r.left_id},
          {"right_id", r.right_id},
          {"choice", choice_name(r.outcome)},
          {"outcome", to_int(r.outcome)},
          {"respondent_id", r.respondent_id},
          {"received_at", r.received_at}};
}

ResponseRecord record_from_json(const json& j) {
  ResponseRecord r;
  r.response_id = j.at("response_id").get<std::string>();
  r.pair_id = j.value("pair_id", std::string());
  r.left_id = j.at("left_id").get<std::string>();
  r.right_id = j.at("right_id").get<std::string>();
  r.outcome = outcome_from_int(j.at("outcome").get<long>());
  r.respondent_id = j.at("respondent_id").get<std::string>();
  r.received_at = j.at("received_at").get<std::int64_t>();
  return r;
}

// -------------------------------------------------------------- service

SurveyService::SurveyService(ServiceConfig config, Clock clock)
    : config_(std::move(config)),
      clock_(clock ? std::move(clock) : Clock(system_now_ms)),
      items_(boot_catalog(config_, model_scores_)),
      scheduler_(items_, config_.scheduler),
      rater_(config_.elo),
      token_rng_(derive_seed(config_.seed, 7)) {
  replay();
}

void SurveyService::replay() {
  int fd = ::open(config_.log_path.c_str(), O_RDWR);
  if (fd < 0) {
    if (errno == ENOENT) return;
    throw Error("cannot open log '" + config_.log_path + "': " +
                std::strerror(errno));
  }
  std::string data;
  char buf[1 << 16];
  for (;;) {
    const ssize_t n = ::read(fd, buf, sizeof buf);
    if (n < 0) {
      ::close(fd);
      throw Error("cannot read log '" + config_.log_path + "'");
    }
    if (n == 0) break;
    data.append(buf, static_cast<std::size_t>(n));
  }

  std::vector<ResponseRecord> loaded;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < data.size()) {
    const std::size_t nl = data.find('\n', pos);
    if (nl == std::string::npos) break;  // unterminated tail from a crash
    ++line_no;
    const std::string line = data.substr(pos, nl - pos);
    try {
      loaded.push_back(record_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      if (nl + 1 == data.size()) break;  // damaged final line
      ::close(fd);
      throw Error("log '" + config_.log_path + "' line " +
                  std::to_string(line_no) + ": " + e.what());
    }
    pos = nl + 1;
  }
  if (pos < data.size()) {
    // Drop the torn record so later appends start on a clean line.
    if (::ftruncate(fd, static_cast<off_t>(pos)) != 0) {
      ::close(fd);
      throw Error("cannot truncate damaged log tail");
    }
  }
  ::close(fd);

  // A snapshot restores scheduler state (rng included) up to its position.
  std::size_t from_snapshot = 0;
  std::ifstream snap(snapshot_path(config_));
  if (snap) {
    try {
      std::stringstream ss;
      ss << snap.rdbuf();
      const json doc = json::parse(ss.str());
      const auto n = doc.at("n_responses").get<std::size_t>();
      if (n <= loaded.size()) {
        scheduler_.restore_json(doc.at("scheduler").dump());
        if (scheduler_.n_recorded() == n) {
          from_snapshot = n;
        } else {
          scheduler_ = Scheduler(items_, config_.scheduler);
        }
      }
    } catch (const std::exception&) {
      scheduler_ = Scheduler(items_, config_.scheduler);
    }
  }

  for (std::size_t k = 0; k < loaded.size(); ++k) {
    const ResponseRecord& r = loaded[k];
    if (by_response_id_.count(r.response_id)) {
      throw Error("log '" + config_.log_path + "' repeats response_id '" +
                  r.response_id + "'");
    }
    if (!items_->find(r.left_id) || !items_->find(r.right_id)) {
      throw Error("log '" + config_.log_path + "' references unknown item");
    }
    if (k >= from_snapshot) scheduler_.record_response(r.response_id, r.comparison());
    if (config_.live_rating == "elo") rater_.update(r.comparison());
    by_response_id_[r.response_id] = records_.size();
    records_.push_back(r);
    ++per_respondent_[r.respondent_id];
    if (is_tie(r.outcome)) ++n_ties_;
    last_received_at_ = std::max(last_received_at_, r.received_at);
  }
}

void SurveyService::apply(const ResponseRecord& r) {
  scheduler_.record_response(r.response_id, r.comparison());
  if (config_.live_rating == "elo") rater_.update(r.comparison());
  by_response_id_[r.response_id] = records_.size();
  records_.push_back(r);
  ++per_respondent_[r.respondent_id];
  if (is_tie(r.outcome)) ++n_ties_;
  last_received_at_ = r.received_at;
}

void SurveyService::append_to_log(const ResponseRecord& r) {
  const std::string line = record_to_json(r).dump() + "\n";
  const int fd =
      ::open(config_.log_path.c_str(), O_WRONLY | O_APPEND | O_CREAT, 0644);
  if (fd < 0) {
    throw Error("cannot open log: " + std::string(std::strerror(errno)));
  }
  struct stat st {};
  const off_t before = ::fstat(fd, &st) == 0 ? st.st_size : -1;
  std::size_t done = 0;
  bool ok = true;
  while (done < line.size()) {
    const ssize_t n = ::write(fd, line.data() + done, line.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      ok = false;
      break;
    }
    done += static_cast<std::size_t>(n);
  }
  if (ok && ::fsync(fd) != 0) ok = false;
  if (!ok) {
    const std::string why = std::strerror(errno);
    if (before >= 0 && ::ftruncate(fd, before) != 0) {
      // Replay drops a torn tail anyway.
    }
    ::close(fd);
    throw Error("log append failed: " + why);
  }
  ::close(fd);
}

std::string SurveyService::new_token() {
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx",
                static_cast<unsigned long long>(token_rng_()),
                static_cast<unsigned long long>(token_rng_()));
  return buf;
}

ApiResponse SurveyService::get_pair(
    const std::optional<std::string>& respondent) {
  if (!respondent || !valid_identifier(*respondent)) {
    return error_response(400, "missing or malformed respondent");
  }
  std::unique_lock lock(mu_);
  if (items_->size() < 2) return error_response(503, "item catalog is empty");
  if (config_.max_responses_per_respondent) {
    auto it = per_respondent_.find(*respondent);
    if (it != per_respondent_.end() &&
        it->second >= *config_.max_responses_per_respondent) {
      return error_response(403, "respondent quota reached");
    }
  }
  const std::int64_t t = now();
  std::erase_if(tokens_, [&](const auto& kv) {
    return t - kv.second.issued_at >= config_.pair_ttl_ms;
  });
  const IssuedPair pair = scheduler_.next_pair();
  std::string token = new_token();
  while (tokens_.count(token)) token = new_token();
  tokens_[token] = {pair.left_id, pair.right_id, t};
  return {200, json{{"pair_id", token},
                    {"left", item_json(items_->at(pair.left_id))},
                    {"right", item_json(items_->at(pair.right_id))}}};
}

ApiResponse SurveyService::post_response(const std::string& body) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::exception&) {
    return error_response(400, "body is not valid JSON");
  }
  auto text = [&](const char* key) -> std::optional<std::string> {
    if (!doc.is_object() || !doc.contains(key) || !doc[key].is_string()) {
      return std::nullopt;
    }
    return doc[key].get<std::string>();
  };
  const auto response_id = text("response_id");
  if (!response_id || !valid_identifier(*response_id)) {
    return error_response(400, "missing or malformed response_id");
  }

  std::unique_lock lock(mu_);
  if (auto it = by_response_id_.find(*response_id); it != by_response_id_.end()) {
    return {200, json{{"status", "duplicate"},
                      {"record", record_to_json(records_[it->second])}}};
  }
  const auto choice_text = text("choice");
  const auto choice = choice_text ? parse_choice(*choice_text) : std::nullopt;
  if (!choice) return error_response(400, "choice must be left, tie or right");
  const auto respondent = text("respondent");
  if (!respondent || !valid_identifier(*respondent)) {
    return error_response(400, "missing or malformed respondent");
  }
  const auto pair_id = text("pair_id");
  if (!pair_id) return error_response(400, "missing pair_id");

  const std::int64_t t = now();
  auto tok = tokens_.find(*pair_id);
  if (tok == tokens_.end() || t - tok->second.issued_at >= config_.pair_ttl_ms) {
    return error_response(404, "unknown or expired pair_id");
  }

  ResponseRecord r;
  r.response_id = *response_id;
  r.pair_id = *pair_id;
  r.left_id = tok->second.left_id;
  r.right_id = tok->second.right_id;
  r.outcome = *choice;
  r.respondent_id = *respondent;
  r.received_at = std::max(t, last_received_at_ + 1);
  try {
    append_to_log(r);
  } catch (const Error& e) {
    return error_response(500, e.what());
  }
  apply(r);
  tokens_.erase(tok);
  if (config_.snapshot_every > 0 &&
      records_.size() % config_.snapshot_every == 0) {
    try {
      write_snapshot();
    } catch (const Error&) {
      // The log is authoritative; a missing snapshot only slows replay.
    }
  }
  return {201, json{{"status", "recorded"}, {"record", record_to_json(r)}}};
}

void SurveyService::write_snapshot() {
  const json doc{{"n_responses", records_.size()},
                 {"scheduler", json::parse(scheduler_.checkpoint_json())}};
  const std::string path = snapshot_path(config_);
  const std::string tmp = path + ".tmp";
  write_file(tmp, doc.dump());
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw Error("cannot install snapshot '" + path + "'");
  }
}

ApiResponse SurveyService::get_scores(const std::string& method) const {
  if (method == "model") {
    if (!model_scores_) return error_response(404, "no model checkpoint loaded");
    return {200, json{{"method", "model"}, {"scores", ranked(*model_scores_)}}};
  }
  if (method == "live") {
    if (config_.live_rating != "elo") {
      return error_response(404, "live leaderboard disabled");
    }
    return {200, json{{"method", "live"}, {"scores", ranked(live_scores())}}};
  }
  return error_response(404, "unknown score method '" + method + "'");
}

ScoreTable SurveyService::live_scores() const {
  std::shared_lock lock(mu_);
  ScoreTable t;
  t.method = "elo";
  t.default_score = config_.elo.initial_rating;
  for (const Item& it : items_->items()) t.scores[it.id] = rater_.rating(it.id);
  return t;
}

ApiResponse SurveyService::get_stats() const {
  std::shared_lock lock(mu_);
  const Exposure e = scheduler_.exposure();
  const double n = static_cast<double>(records_.size());
  return {200, json{{"n_responses", records_.size()},
                    {"tie_fraction", records_.empty() ? 0.0 : n_ties_ / n},
                    {"exposure", {{"min", e.min}, {"max", e.max}}},
                    {"per_respondent_counts", per_respondent_}}};
}

std::vector<ResponseRecord> SurveyService::records() const {
  std::shared_lock lock(mu_);
  return records_;
}

Exposure SurveyService::exposure() const {
  std::shared_lock lock(mu_);
  return scheduler_.exposure();
}

// ----------------------------------------------------------------- HTTP

struct HttpServer::Impl {
  explicit Impl(SurveyService& s) : service(s) {}
  SurveyService& service;
  httplib::Server server;
  std::thread thread;
};

namespace {

void reply(httplib::Response& res, const ApiResponse& r) {
  res.status = r.status;
  res.set_content(r.body.dump(), "application/json");
}

}  // namespace

HttpServer::HttpServer(SurveyService& service,
                       std::optional<std::string> static_dir)
    : impl_(std::make_unique<Impl>(service)) {
  auto& srv = impl_->server;
  SurveyService& svc = impl_->service;
  srv.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
    reply(res, {200, json{{"status", "ok"}}});
  });
  srv.Get("/api/pair", [&svc](const httplib::Request& req,
                              httplib::Response& res) {
    std::optional<std::string> who;
    if (req.has_param("respondent")) who = req.get_param_value("respondent");
    reply(res, svc.get_pair(who));
  });
  srv.Post("/api/response", [&svc](const httplib::Request& req,
                                   httplib::Response& res) {
    reply(res, svc.post_response(req.body));
  });
  srv.Get("/api/scores", [&svc](const httplib::Request& req,
                                httplib::Response& res) {
    const std::string method =
        req.has_param("method") ? req.get_param_value("method") : "live";
    reply(res, svc.get_scores(method));
  });
  srv.Get("/api/stats", [&svc](const httplib::Request&, httplib::Response& res) {
    reply(res, svc.get_stats());
  });
  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res,
                               std::exception_ptr ep) {
    std::string what = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    reply(res, error_response(500, what));
  });
  if (static_dir && !srv.set_mount_point("/", *static_dir)) {
    throw Error("static directory '" + *static_dir + "' not found");
  }
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error("cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw Error("cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpServer::serve() { impl_->server.listen_after_bind(); }

void HttpServer::start() {
  impl_->thread = std::thread([this] { serve(); });
  impl_->server.wait_until_ready();
}

void HttpServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

void run_service(const ServiceConfig& config) {
  SurveyService service(config);
  HttpServer http(service, config.static_dir);
  const auto [host, port] = parse_listen_addr(config.listen_addr);
  const int bound = http.bind(host, port);
  std::fprintf(stderr, "serving %zu items on %s:%d\n", service.catalog().size(),
               host.c_str(), bound);
  http.serve();
}

}  // namespace pcs
