#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("salesopt_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Result run(const std::string& args, const fs::path& dir) {
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = std::string(SALESOPT_CLI_PATH) + " " + args + " 2>" + err.string();
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = slurp(err);
  return r;
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("gen is deterministic per seed") {
  const auto a = scratch("gen_a");
  const auto b = scratch("gen_b");
  const auto c = scratch("gen_c");
  const std::string small = " --set gen.n_accounts=50 --set gen.n_reps=3 --set panel.n_treat=20 --set panel.n_ctrl=20";
  REQUIRE(run("gen --seed 5 --out " + a.string() + small, a).code == 0);
  REQUIRE(run("gen --seed 5 --out " + b.string() + small, b).code == 0);
  REQUIRE(run("gen --seed 6 --out " + c.string() + small, c).code == 0);
  for (const char* f : {"accounts.jsonl", "reps.jsonl", "panel.jsonl"}) {
    CHECK(slurp(a / f) == slurp(b / f));
    CHECK_FALSE(slurp(a / f).empty());
  }
  CHECK(slurp(a / "accounts.jsonl") != slurp(c / "accounts.jsonl"));
  CHECK(count_lines(slurp(a / "accounts.jsonl")) == 50);
  CHECK(count_lines(slurp(a / "reps.jsonl")) == 3);
  const json first = json::parse(slurp(a / "accounts.jsonl").substr(0, slurp(a / "accounts.jsonl").find('\n')));
  CHECK(first.at("id") == "A00001");
}

TEST_CASE("evaluate recovers a noiseless DiD effect") {
  const auto d = scratch("eval");
  const auto r = run("evaluate --did --effect 0.4 --set panel.noise_sd=0 --set panel.unit_sd=0 --out " + d.string(), d);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("tau_hat") != std::string::npos);
  const json e = json::parse(slurp(d / "evaluation.json"));
  CHECK(e.at("did").at("tau_hat").get<double>() == doctest::Approx(0.4).epsilon(1e-12));
  CHECK_FALSE(e.contains("deciles"));
}

TEST_CASE("train, optimize and simulate-bandit write their outputs") {
  const auto d = scratch("pipeline");
  const std::string small = " --set gen.n_accounts=200 --set gen.n_reps=4 --out " + d.string();
  REQUIRE(run("train" + small, d).code == 0);
  CHECK(fs::exists(d / "models.json"));
  CHECK(count_lines(slurp(d / "scores.jsonl")) == 200);
  REQUIRE(run("optimize --day 0" + small, d).code == 0);
  const json a = json::parse(slurp(d / "assignment.json"));
  CHECK(a.contains("objective"));
  CHECK(count_lines(slurp(d / "recommendations.jsonl")) <= 40);
  const auto sim = run("simulate-bandit --rounds 200 --every 100" + small, d);
  REQUIRE(sim.code == 0);
  CHECK(count_lines(slurp(d / "bandit_trace.jsonl")) == 200);
  CHECK(fs::exists(d / "bandit_policy.json"));
}

TEST_CASE("ablate prints one row per variant") {
  const auto d = scratch("ablate");
  const auto r = run("ablate --set gen.n_accounts=200 --set gen.n_reps=4 --out " + d.string(), d);
  REQUIRE(r.code == 0);
  CHECK(count_lines(r.out) == 5);
  for (const char* v : {"Full", "A_NoWeighting", "B_NoCapacity", "C_SimplifiedRules"})
    CHECK(r.out.find(v) != std::string::npos);
  CHECK(count_lines(slurp(d / "ablation.jsonl")) == 1);
}

TEST_CASE("errors are a single machine-readable line") {
  const auto d = scratch("errors");
  auto r = run("gen --set gen.nope=1 --out " + d.string(), d);
  CHECK(r.code == 1);
  CHECK(count_lines(r.err) == 1);
  CHECK(r.err.rfind("error: code=config_error message=", 0) == 0);

  r = run("replay --log " + (d / "missing.jsonl").string() + " --out " + d.string(), d);
  CHECK(r.code == 1);
  CHECK(r.err.rfind("error: code=not_found", 0) == 0);

  r = run("frobnicate", d);
  CHECK(r.code != 0);
  CHECK(count_lines(r.err) == 1);
  CHECK(r.err.rfind("error: code=usage", 0) == 0);

  r = run("evaluate --placebo --set panel.n_pre_periods=0 --out " + d.string(), d);
  CHECK(r.code == 1);
  CHECK(count_lines(r.err) == 1);
}
