#include <gtest/gtest.h>

#include <sys/stat.h>
#include <unistd.h>

#include <cstdlib>
#include <fstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "pcs/dataio.h"
#include "pcs/metrics.h"
#include "pcs/service.h"
#include "test_util.h"

namespace {

using nlohmann::json;
using pcs::Outcome;

std::string write_items(const testutil::TempDir& dir, int n) {
  const auto path = dir.file("items.jsonl");
  std::ofstream out(path);
  for (int k = 0; k < n; ++k) {
    out << json{{"id", "it" + std::to_string(k)},
                {"features", {k * 0.5, (k % 3) * 1.0}},
                {"attributes", {{"group", k % 2}}},
                {"media_uri", "img/" + std::to_string(k) + ".jpg"}}
               .dump()
        << "\n";
  }
  return path;
}

struct Fixture {
  testutil::TempDir dir;
  pcs::ServiceConfig cfg;
  std::int64_t now = 1'000'000;

  explicit Fixture(int n_items = 6) {
    cfg.items_path = write_items(dir, n_items);
    cfg.log_path = dir.file("responses.jsonl");
  }
  pcs::SurveyService make() {
    return pcs::SurveyService(cfg, [this] { return now; });
  }
};

std::string body(const std::string& pair_id, const std::string& choice,
                 const std::string& rid, const std::string& who = "alice") {
  return json{{"pair_id", pair_id}, {"choice", choice}, {"response_id", rid},
              {"respondent", who}}
      .dump();
}

// Fetches a pair and answers it; returns the post response.
pcs::ApiResponse answer(pcs::SurveyService& s, const std::string& choice,
                        const std::string& rid, const std::string& who = "alice") {
  const auto p = s.get_pair(who);
  EXPECT_EQ(p.status, 200);
  return s.post_response(body(p.body.at("pair_id"), choice, rid, who));
}

TEST(Choice, Mapping) {
  EXPECT_EQ(pcs::parse_choice("left"), Outcome::kLeft);
  EXPECT_EQ(pcs::parse_choice("tie"), Outcome::kTie);
  EXPECT_EQ(pcs::parse_choice("right"), Outcome::kRight);
  EXPECT_FALSE(pcs::parse_choice("LEFT").has_value());
  EXPECT_EQ(pcs::choice_name(Outcome::kTie), "tie");
}

TEST(Service, PairCarriesItemsAndMedia) {
  Fixture f;
  auto s = f.make();
  const auto r = s.get_pair("alice");
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body.at("pair_id").get<std::string>().size(), 32u);
  EXPECT_NE(r.body["left"]["id"], r.body["right"]["id"]);
  EXPECT_EQ(r.body["left"]["media_uri"].get<std::string>().rfind("img/", 0), 0u);
}

TEST(Service, RecordsResponseWithItemOrderAndTieMapping) {
  Fixture f;
  auto s = f.make();
  const auto p = s.get_pair("alice");
  const auto r = s.post_response(body(p.body["pair_id"], "tie", "r1"));
  ASSERT_EQ(r.status, 201);
  EXPECT_EQ(r.body["status"], "recorded");
  const auto& rec = r.body["record"];
  EXPECT_EQ(rec["left_id"], p.body["left"]["id"]);
  EXPECT_EQ(rec["right_id"], p.body["right"]["id"]);
  EXPECT_EQ(rec["outcome"], 0);
  EXPECT_EQ(rec["choice"], "tie");
  EXPECT_EQ(rec["received_at"], f.now);
  ASSERT_EQ(s.records().size(), 1u);
  EXPECT_EQ(s.records()[0].comparison().outcome, Outcome::kTie);
}

TEST(Service, StatusCodes) {
  Fixture f;
  auto s = f.make();
  EXPECT_EQ(s.get_pair(std::nullopt).status, 400);
  EXPECT_EQ(s.get_pair("bad id!").status, 400);
  const std::string pid = s.get_pair("alice").body["pair_id"];
  EXPECT_EQ(s.post_response("{not json").status, 400);
  EXPECT_EQ(s.post_response(body(pid, "left", "")).status, 400);
  EXPECT_EQ(s.post_response(body(pid, "maybe", "r1")).status, 400);
  EXPECT_EQ(s.post_response(body(pid, "left", "r1", "")).status, 400);
  EXPECT_EQ(s.post_response(body("nope", "left", "r1")).status, 404);
  EXPECT_EQ(s.post_response(body(pid, "left", "r1")).status, 201);
  // The token was consumed.
  EXPECT_EQ(s.post_response(body(pid, "left", "r2")).status, 404);
  EXPECT_EQ(s.get_scores("bogus").status, 404);
  EXPECT_EQ(s.get_scores("model").status, 404);
}

TEST(Service, DuplicateResponseIdIsIdempotent) {
  Fixture f;
  auto s = f.make();
  ASSERT_EQ(answer(s, "left", "r1").status, 201);
  // Even with a dead pair_id, a known response_id short-circuits to 200.
  const auto again = s.post_response(body("whatever", "right", "r1"));
  EXPECT_EQ(again.status, 200);
  EXPECT_EQ(again.body["status"], "duplicate");
  EXPECT_EQ(again.body["record"]["choice"], "left");
  EXPECT_EQ(s.records().size(), 1u);
  EXPECT_EQ(s.get_stats().body["n_responses"], 1);
}

TEST(Service, StatsReportTieFractionAndCounts) {
  Fixture f;
  auto s = f.make();
  EXPECT_EQ(s.get_stats().body["tie_fraction"], 0.0);
  const char* choices[] = {"tie", "left", "right", "left", "right"};
  for (int k = 0; k < 5; ++k) {
    ASSERT_EQ(answer(s, choices[k], "r" + std::to_string(k), k < 3 ? "alice" : "bob").status,
              201);
  }
  const auto st = s.get_stats().body;
  EXPECT_EQ(st["n_responses"], 5);
  EXPECT_DOUBLE_EQ(st["tie_fraction"].get<double>(), 0.2);
  EXPECT_EQ(st["per_respondent_counts"]["alice"], 3);
  EXPECT_EQ(st["per_respondent_counts"]["bob"], 2);
  EXPECT_EQ(st["exposure"]["max"].get<int>() + 0, s.exposure().max);
}

TEST(Service, LiveScoresStartAtInitialRating) {
  Fixture f;
  f.cfg.elo.initial_rating = 1200;
  auto s = f.make();
  const auto r = s.get_scores("live");
  ASSERT_EQ(r.status, 200);
  ASSERT_EQ(r.body["scores"].size(), 6u);
  for (const auto& e : r.body["scores"]) EXPECT_EQ(e["score"], 1200.0);
}

TEST(Service, LiveScoresMoveWinnerAbove) {
  Fixture f;
  auto s = f.make();
  const auto p = s.get_pair("alice");
  ASSERT_EQ(s.post_response(body(p.body["pair_id"], "left", "r1")).status, 201);
  const auto live = s.live_scores();
  EXPECT_GT(live.scores.at(p.body["left"]["id"]), live.scores.at(p.body["right"]["id"]));
  const auto ranked = s.get_scores("live").body["scores"];
  EXPECT_EQ(ranked[0]["item_id"], p.body["left"]["id"]);
}

TEST(Service, LiveRatingCanBeDisabled) {
  Fixture f;
  f.cfg.live_rating = "none";
  auto s = f.make();
  EXPECT_EQ(s.get_scores("live").status, 404);
}

TEST(Service, ModelScoresMatchOfflineScoring) {
  Fixture f;
  pcs::Architecture arch;
  arch.input_dim = 2;
  arch.trunk_widths = {4};
  const auto items = pcs::load_items(f.cfg.items_path);
  pcs::save_checkpoint({pcs::init_params(arch, 3), items.standardization},
                       f.dir.file("model.json"));
  f.cfg.model_checkpoint = f.dir.file("model.json");
  auto s = f.make();
  const auto r = s.get_scores("model");
  ASSERT_EQ(r.status, 200);

  const auto ckpt = pcs::load_checkpoint(f.dir.file("model.json"));
  const auto fixed = pcs::load_items(f.cfg.items_path, &*ckpt.standardization);
  const auto want = pcs::model_score_table(ckpt.params, *fixed.catalog);
  ASSERT_EQ(r.body["scores"].size(), want.scores.size());
  for (const auto& e : r.body["scores"]) {
    EXPECT_EQ(e["score"].get<double>(), want.scores.at(e["item_id"].get<std::string>()));
  }
}

TEST(Service, PairTokensExpire) {
  Fixture f;
  f.cfg.pair_ttl_ms = 1000;
  auto s = f.make();
  const std::string pid = s.get_pair("alice").body["pair_id"];
  f.now += 999;
  const std::string pid2 = s.get_pair("alice").body["pair_id"];
  EXPECT_EQ(s.post_response(body(pid, "left", "r1")).status, 201);
  f.now += 1;  // pid2 is 1 ms old; pid would be exactly at the TTL
  EXPECT_EQ(s.post_response(body(pid2, "left", "r2")).status, 201);
  const std::string pid3 = s.get_pair("alice").body["pair_id"];
  f.now += 1000;
  EXPECT_EQ(s.post_response(body(pid3, "left", "r3")).status, 404);
}

TEST(Service, ReceivedAtIsStrictlyIncreasing) {
  Fixture f;
  auto s = f.make();
  for (int k = 0; k < 4; ++k) ASSERT_EQ(answer(s, "left", "r" + std::to_string(k)).status, 201);
  const auto recs = s.records();
  for (std::size_t k = 1; k < recs.size(); ++k) {
    EXPECT_GT(recs[k].received_at, recs[k - 1].received_at);
  }
}

TEST(Service, RespondentQuota) {
  Fixture f;
  f.cfg.max_responses_per_respondent = 2;
  auto s = f.make();
  ASSERT_EQ(answer(s, "left", "r1").status, 201);
  ASSERT_EQ(answer(s, "left", "r2").status, 201);
  EXPECT_EQ(s.get_pair("alice").status, 403);
  EXPECT_EQ(s.get_pair("bob").status, 200);
}

TEST(Service, TooFewItemsIsUnavailable) {
  Fixture f(1);
  auto s = f.make();
  EXPECT_EQ(s.get_pair("alice").status, 503);
}

TEST(Service, MissingCatalogThrows) {
  Fixture f;
  f.cfg.items_path = f.dir.file("missing.jsonl");
  EXPECT_THROW(f.make(), pcs::Error);
}

TEST(Service, UnwritableLogGives500AndKeepsState) {
  if (::geteuid() == 0) GTEST_SKIP() << "root ignores file permissions";
  Fixture f;
  f.cfg.log_path = f.dir.file("ro/responses.jsonl");
  std::filesystem::create_directories(f.dir.file("ro"));
  auto s = f.make();
  ::chmod(f.dir.file("ro").c_str(), 0500);
  const auto r = answer(s, "left", "r1");
  ::chmod(f.dir.file("ro").c_str(), 0700);
  EXPECT_EQ(r.status, 500);
  EXPECT_TRUE(s.records().empty());
}

TEST(Service, LogInMissingDirectoryGives500) {
  Fixture f;
  f.cfg.log_path = f.dir.file("no/such/dir/responses.jsonl");
  auto s = f.make();
  const auto r = answer(s, "left", "r1");
  EXPECT_EQ(r.status, 500);
  EXPECT_TRUE(s.records().empty());
  EXPECT_EQ(s.get_stats().body["n_responses"], 0);
}

TEST(Service, RestartReplaysLog) {
  Fixture f;
  f.cfg.snapshot_every = 0;
  std::vector<pcs::ResponseRecord> before;
  pcs::Exposure exp_before;
  {
    auto s = f.make();
    for (int k = 0; k < 7; ++k) ASSERT_EQ(answer(s, k % 3 ? "left" : "tie", "r" + std::to_string(k)).status, 201);
    before = s.records();
    exp_before = s.exposure();
  }
  auto s = f.make();
  const auto after = s.records();
  ASSERT_EQ(after.size(), before.size());
  for (std::size_t k = 0; k < after.size(); ++k) {
    EXPECT_EQ(pcs::record_to_json(after[k]), pcs::record_to_json(before[k]));
  }
  EXPECT_EQ(s.exposure().max, exp_before.max);
  EXPECT_EQ(s.post_response(body("x", "left", "r3")).status, 200);
  // Live scores equal an offline Elo fit over the same log.
  std::vector<pcs::Comparison> cs;
  for (const auto& r : after) cs.push_back(r.comparison());
  const auto offline = pcs::elo_fit(cs);
  for (const auto& [id, v] : offline.scores) EXPECT_DOUBLE_EQ(s.live_scores().scores.at(id), v);
}

TEST(Service, TornTailIsDroppedOnReplay) {
  Fixture f;
  {
    auto s = f.make();
    ASSERT_EQ(answer(s, "left", "r1").status, 201);
    ASSERT_EQ(answer(s, "right", "r2").status, 201);
  }
  {
    std::ofstream out(f.cfg.log_path, std::ios::app);
    out << R"({"response_id": "r3", "pair_id": "p", "left_)";
  }
  {
    auto s = f.make();
    EXPECT_EQ(s.records().size(), 2u);
    ASSERT_EQ(answer(s, "tie", "r4").status, 201);
  }
  auto s = f.make();
  ASSERT_EQ(s.records().size(), 3u);
  EXPECT_EQ(s.records()[2].response_id, "r4");
}

TEST(Service, DamagedMiddleLineIsAnError) {
  Fixture f;
  {
    auto s = f.make();
    ASSERT_EQ(answer(s, "left", "r1").status, 201);
  }
  const auto text = pcs::read_file(f.cfg.log_path);
  pcs::write_file(f.cfg.log_path, "garbage\n" + text);
  EXPECT_THROW(f.make(), pcs::Error);
}

TEST(Service, SnapshotRestoresSchedulerState) {
  Fixture f;
  f.cfg.snapshot_every = 3;
  std::vector<std::string> next_with_snapshot;
  {
    auto s = f.make();
    for (int k = 0; k < 6; ++k) ASSERT_EQ(answer(s, "left", "r" + std::to_string(k)).status, 201);
  }
  EXPECT_TRUE(std::filesystem::exists(f.cfg.log_path + ".snapshot"));
  auto a = f.make();
  std::filesystem::remove(f.cfg.log_path + ".snapshot");
  auto b = f.make();
  // Exposure comes out the same whether or not the snapshot was used.
  EXPECT_EQ(a.exposure().min, b.exposure().min);
  EXPECT_EQ(a.exposure().max, b.exposure().max);
  EXPECT_EQ(a.records().size(), 6u);
}

TEST(ServiceConfig, JsonEnvAndValidation) {
  const auto cfg = pcs::service_config_from_json(R"({
    "listen_addr": "0.0.0.0:9000", "items_path": "i.jsonl", "log_path": "l.jsonl",
    "pair_ttl_hours": 2, "elo": {"k_factor": 16}, "scheduler": {"n_match_attributes": 3},
    "max_responses_per_respondent": 50})");
  EXPECT_EQ(cfg.listen_addr, "0.0.0.0:9000");
  EXPECT_EQ(cfg.pair_ttl_ms, 2 * 3600 * 1000);
  EXPECT_EQ(cfg.elo.k_factor, 16);
  EXPECT_EQ(cfg.scheduler.n_match_attributes, 3u);
  EXPECT_EQ(cfg.max_responses_per_respondent, 50);

  auto env_cfg = cfg;
  ::setenv("PCS_LISTEN_ADDR", "127.0.0.1:7777", 1);
  ::setenv("PCS_LOG_PATH", "/tmp/other.jsonl", 1);
  pcs::apply_env_overrides(env_cfg);
  ::unsetenv("PCS_LISTEN_ADDR");
  ::unsetenv("PCS_LOG_PATH");
  EXPECT_EQ(env_cfg.listen_addr, "127.0.0.1:7777");
  EXPECT_EQ(env_cfg.log_path, "/tmp/other.jsonl");
  EXPECT_EQ(env_cfg.items_path, "i.jsonl");

  EXPECT_THROW(pcs::service_config_from_json("[]"), pcs::Error);
  // Validation runs once all layers are merged, at boot.
  auto bad = pcs::service_config_from_json(R"({"live_rating": "glicko"})", cfg);
  EXPECT_THROW(bad.validate(), pcs::Error);
  EXPECT_NO_THROW(cfg.validate());
  Fixture f;
  f.cfg.live_rating = "glicko";
  EXPECT_THROW(f.make(), pcs::Error);
}

TEST(ListenAddr, Parses) {
  EXPECT_EQ(pcs::parse_listen_addr("127.0.0.1:8080"), (std::pair<std::string, int>{"127.0.0.1", 8080}));
  EXPECT_THROW(pcs::parse_listen_addr("localhost"), pcs::Error);
  EXPECT_THROW(pcs::parse_listen_addr("host:http"), pcs::Error);
  EXPECT_THROW(pcs::parse_listen_addr("host:70000"), pcs::Error);
}

TEST(Http, EndpointsAndStaticFiles) {
  Fixture f;
  std::filesystem::create_directories(f.dir.file("static"));
  pcs::write_file(f.dir.file("static/index.html"), "<html>survey</html>");
  pcs::SurveyService svc(f.cfg);
  pcs::HttpServer server(svc, f.dir.file("static"));
  const int port = server.bind("127.0.0.1", 0);
  server.start();
  httplib::Client cli("127.0.0.1", port);

  auto health = cli.Get("/healthz");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);
  EXPECT_EQ(json::parse(health->body)["status"], "ok");

  auto page = cli.Get("/index.html");
  ASSERT_TRUE(page);
  EXPECT_EQ(page->status, 200);
  EXPECT_EQ(page->body, "<html>survey</html>");

  auto pair = cli.Get("/api/pair?respondent=carol");
  ASSERT_TRUE(pair);
  ASSERT_EQ(pair->status, 200);
  const auto pid = json::parse(pair->body)["pair_id"].get<std::string>();
  auto posted = cli.Post("/api/response", body(pid, "right", "h1", "carol"), "application/json");
  ASSERT_TRUE(posted);
  EXPECT_EQ(posted->status, 201);
  auto bad = cli.Post("/api/response", "{", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  EXPECT_TRUE(json::parse(bad->body).contains("error"));

  auto scores = cli.Get("/api/scores");
  ASSERT_TRUE(scores);
  EXPECT_EQ(json::parse(scores->body)["method"], "live");
  auto stats = cli.Get("/api/stats");
  ASSERT_TRUE(stats);
  EXPECT_EQ(json::parse(stats->body)["n_responses"], 1);
  server.stop();
}

TEST(Http, MissingStaticDirThrows) {
  Fixture f;
  pcs::SurveyService svc(f.cfg);
  EXPECT_THROW(pcs::HttpServer(svc, f.dir.file("nope")), pcs::Error);
}

}  // namespace
