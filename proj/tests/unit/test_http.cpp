#include <filesystem>

#include "salesopt/http_api.hpp"

#include "doctest.h"
#include "httplib.h"

using namespace salesopt;
namespace fs = std::filesystem;

namespace {

struct Fixture {
  fs::path path;
  std::unique_ptr<Service> service;
  std::unique_ptr<HttpApi> api;
  std::unique_ptr<httplib::Client> client;

  Fixture() {
    path = fs::temp_directory_path() / "salesopt_http_test.jsonl";
    fs::remove(path);
    Settings s;
    s.gen.n_accounts = 300;
    s.gen.n_reps = 5;
    service = Service::open(s, path);
    api = std::make_unique<HttpApi>(*service);
    const int port = api->start("127.0.0.1", 0);
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
  }
  ~Fixture() {
    api->stop();
    fs::remove(path);
  }
};

Json body_of(const httplib::Result& r) {
  REQUIRE(r);
  return Json::parse(r->body);
}

}  // namespace

TEST_CASE("http routes") {
  Fixture f;
  auto& c = *f.client;

  auto r = c.Get("/metrics");
  REQUIRE(r);
  CHECK(r->status == 200);
  CHECK(r->get_header_value("Content-Type") == "application/json");
  CHECK(body_of(r).at("runs") == 0);

  r = c.Post("/runs", "", "application/json");
  REQUIRE(r);
  CHECK(r->status == 201);
  const Json run = body_of(r);
  CHECK(run.at("run_id") == 1);
  const auto& recs = run.at("recommendations");
  REQUIRE_FALSE(recs.empty());
  const Json first = recs.at(0);

  r = c.Get("/runs/1");
  REQUIRE(r);
  CHECK(r->status == 200);
  CHECK(body_of(r) == run);

  r = c.Get("/runs/7");
  REQUIRE(r);
  CHECK(r->status == 404);
  CHECK(body_of(r).at("error") == "not_found");

  const std::string rep = first.at("rep_id");
  r = c.Get("/reps/" + rep + "/recommendations");
  REQUIRE(r);
  CHECK(r->status == 200);
  const Json reps = body_of(r);
  CHECK(reps.at("rep_id") == rep);
  for (std::size_t i = 0; i < reps.at("recommendations").size(); ++i)
    CHECK(reps.at("recommendations").at(i).at("r_rank") == static_cast<int>(i) + 1);

  r = c.Get("/reps/R999/recommendations");
  REQUIRE(r);
  CHECK(r->status == 404);

  const Json fb{{"rep_id", rep},
                {"account_id", first.at("account_id")},
                {"action", first.at("action")},
                {"feedback", "DeepLinkClicked"},
                {"t", 0}};
  r = c.Post("/feedback", fb.dump(), "application/json");
  REQUIRE(r);
  CHECK(r->status == 202);
  const Json ack = body_of(r);
  CHECK(ack.at("reward") == 1);
  CHECK(ack.at("queued") == true);

  Json bad = fb;
  bad["feedback"] = "Maybe";
  r = c.Post("/feedback", bad.dump(), "application/json");
  REQUIRE(r);
  CHECK(r->status == 400);
  CHECK(body_of(r).at("error") == "invalid_argument");

  r = c.Post("/feedback", "{not json", "application/json");
  REQUIRE(r);
  CHECK(r->status == 400);

  bad = fb;
  bad["reward"] = -1;
  r = c.Post("/feedback", bad.dump(), "application/json");
  REQUIRE(r);
  CHECK(r->status == 400);

  bad = fb;
  bad["t"] = 3;
  r = c.Post("/feedback", bad.dump(), "application/json");
  REQUIRE(r);
  CHECK(r->status == 404);

  r = c.Get("/metrics");
  const Json m = body_of(r);
  CHECK(m.at("cumulative_reward") == 1);
  CHECK(m.at("pending_updates") == 1);
  CHECK(m.at("feedback_counts").at("DeepLinkClicked") == 1);
  CHECK(m.at("per_day").size() == 1);

  r = c.Get("/nowhere");
  REQUIRE(r);
  CHECK(r->status == 404);
  CHECK(body_of(r).at("error") == "not_found");
}
