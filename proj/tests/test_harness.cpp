#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "dense_oracle.hpp"
#include "doctest.h"
#include "itercomm/errors.hpp"
#include "itercomm/harness/config.hpp"
#include "itercomm/harness/experiment.hpp"
#include "itercomm/harness/report.hpp"
#include "itercomm/solver/oracle.hpp"
#include "scenarios.hpp"

using namespace itercomm;
using namespace itercomm::harness;

namespace {

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);)
    if (!l.empty()) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("empty config gives defaults") {
  auto cfg = parse_config_text("");
  RunConfig d;
  CHECK(cfg.p == d.p);
  CHECK(cfg.n == d.n);
  CHECK(cfg.scheme == comm::Scheme::overlap);
  CHECK(cfg.q == 0.5);
  CHECK(cfg.threshold == 1e-6);
  CHECK(cfg.max_recv_requests == 2);
}

TEST_CASE("config text parsing") {
  auto cfg = parse_config_text("# comment\nscheme = async\nmax_recv_requests=3\n\np=8\na=0.1,-0.2,0.3\n");
  CHECK(cfg.scheme == comm::Scheme::async);
  CHECK(cfg.max_recv_requests == 3);
  CHECK(cfg.p == 8);
  CHECK(cfg.a[1] == -0.2);

  CHECK_THROWS_AS(parse_config_text("threshold=-1"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("max_recv_requests=0"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("p=0"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("scheme=bogus"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("n=ten"), ConfigError);
  try {
    parse_config_text("frobnicate=1");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("frobnicate") != std::string::npos);
  }
  // a dominance-violating problem is rejected up front
  CHECK_THROWS_AS(parse_config_text("nu=0.001\na=10,0,0"), ConfigError);
}

TEST_CASE("every listed key is settable") {
  for (const auto& k : config_keys()) {
    RunConfig c;
    CHECK_NOTHROW(set_key(c, k, k == "scheme"      ? "trivial"
                                : k == "backend"   ? "sim"
                                : k == "kernel"    ? "serial"
                                : k == "format"    ? "json"
                                : k == "output"    ? "out.csv"
                                : k == "a"         ? "0,0,0"
                                : k == "slowdown"  ? "1,2"
                                : k == "slow_rank" ? "0"
                                                   : "2"));
  }
}

TEST_CASE("report json round trip and csv shape") {
  RunConfig cfg;
  cfg.p = 2;
  cfg.n = 4;
  cfg.time_steps = 3;
  auto rep = run_experiment(cfg);
  REQUIRE(rep.rows.size() == 3);
  CHECK(rep.converged);
  CHECK(report_from_json(to_json(rep)) == rep);

  auto ls = lines(to_csv(rep));
  REQUIRE(ls.size() == 4);
  CHECK(ls[0] == kCsvHeader);
  CHECK(ls[1].rfind("1,overlap,2,4,", 0) == 0);
  CHECK_THROWS_AS(report_from_json("{not json"), ConfigError);
  CHECK_THROWS_AS(report_from_json("{\"scheme\": 3}"), ConfigError);
}

TEST_CASE("non-converging run is tagged") {
  RunConfig cfg;
  cfg.p = 2;
  cfg.n = 4;
  cfg.time_steps = 3;
  cfg.max_iterations = 2;
  auto rep = run_experiment(cfg);
  CHECK_FALSE(rep.converged);
  REQUIRE(rep.rows.size() == 1);
  CHECK(rep.rows[0].failed);
  CHECK(lines(to_csv(rep))[1].find("overlap:failed") != std::string::npos);
}

TEST_CASE("emit to file and to bad path") {
  RunConfig cfg;
  cfg.p = 1;
  cfg.n = 3;
  cfg.time_steps = 1;
  auto rep = run_experiment(cfg);
  const std::string path = "test_harness_report.json";
  emit_report(rep, Format::json, path);
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(report_from_json(ss.str()) == rep);
  std::remove(path.c_str());
  CHECK_THROWS_AS(emit_report(rep, Format::csv, "/nonexistent-dir/x.csv"), IoError);
}

TEST_CASE("same seed gives identical reports") {
  for (auto s : {comm::Scheme::overlap, comm::Scheme::async}) {
    RunConfig cfg;
    cfg.p = 4;
    cfg.n = 6;
    cfg.time_steps = 2;
    cfg.scheme = s;
    cfg.jitter = 3.0;
    cfg.slowdown_max = 4.0;
    cfg.seed = 77;
    auto a = to_csv(run_experiment(cfg));
    auto b = to_csv(run_experiment(cfg));
    CHECK(a == b);
    CHECK(to_json(run_experiment(cfg)) == to_json(run_experiment(cfg)));
  }
}

TEST_CASE("sync iteration counts equal the sequential oracle") {
  RunConfig cfg;
  cfg.p = 8;
  cfg.n = 10;
  cfg.time_steps = 3;
  cfg.jitter = 5.0;
  cfg.slowdown_max = 3.0;
  auto oracle = solver::SequentialOracle(solver::discretize(cfg.problem())).run(cfg.norm(), 100000);
  for (auto s : {comm::Scheme::trivial, comm::Scheme::overlap}) {
    cfg.scheme = s;
    auto out = run_experiment_detailed(cfg);
    REQUIRE(out.report.rows.size() == 3);
    for (std::size_t t = 0; t < 3; ++t) {
      for (auto k : out.report.rows[t].rank_iterations) CHECK(k == oracle.steps[t].iterations);
      CHECK(out.report.rows[t].snapshots == 0);
      for (std::size_t i = 0; i < out.solutions[t].size(); ++i)
        CHECK(std::abs(out.solutions[t][i] - oracle.steps[t].u[i]) <= 1e-12);
    }
  }
}

TEST_CASE("async with one slow rank converges by dense audit") {
  RunConfig cfg;
  cfg.p = 8;
  cfg.n = 10;
  cfg.time_steps = 2;
  cfg.scheme = comm::Scheme::async;
  cfg.slow_rank = 3;
  cfg.slow_factor = 10.0;
  scenarios::SnapshotLog log;
  auto out = run_experiment_detailed(cfg, &log);
  REQUIRE(out.report.converged);
  auto A = dense::assemble(cfg.problem());
  std::vector<double> prev(out.solutions[0].size(), 0.0);
  for (std::size_t t = 0; t < out.solutions.size(); ++t) {
    CHECK(out.report.rows[t].snapshots >= 1);
    CHECK(dense::residual_inf(A, out.solutions[t], dense::rhs(cfg.problem(), prev)) < 1e-6);
    CHECK(out.report.rows[t].residual < 1e-6);
    prev = out.solutions[t];
  }
  CHECK(log.consistent_rounds(partition_to_graph(out.partition)) >= 2);
  for (const auto& r : out.report.ranks) {
    CHECK(r.max_pending_sends_per_link <= 1);
    CHECK(r.max_active_recvs_per_link <= cfg.max_recv_requests);
  }
}

TEST_CASE("single process") {
  for (auto s : {comm::Scheme::trivial, comm::Scheme::overlap, comm::Scheme::async}) {
    RunConfig cfg;
    cfg.p = 1;
    cfg.n = 5;
    cfg.time_steps = 2;
    cfg.scheme = s;
    auto rep = run_experiment(cfg);
    CHECK(rep.converged);
    CHECK(rep.rows.size() == 2);
    for (const auto& row : rep.rows) CHECK(row.residual < 1e-6);
  }
}

TEST_CASE("infeasible partition is a config error") {
  RunConfig cfg;
  cfg.p = 1000;
  cfg.n = 4;
  CHECK_THROWS_AS(run_experiment(cfg), ConfigError);
}

TEST_CASE("socket backend matches the oracle") {
  RunConfig cfg;
  cfg.backend = Backend::socket;
  cfg.p = 4;
  cfg.n = 6;
  cfg.time_steps = 2;
  cfg.scheme = comm::Scheme::overlap;
  auto oracle = solver::SequentialOracle(solver::discretize(cfg.problem())).run(cfg.norm(), 100000);
  auto out = run_experiment_detailed(cfg);
  REQUIRE(out.report.rows.size() == 2);
  CHECK(out.report.converged);
  for (std::size_t t = 0; t < 2; ++t) {
    for (auto k : out.report.rows[t].rank_iterations) CHECK(k == oracle.steps[t].iterations);
    for (std::size_t i = 0; i < out.solutions[t].size(); ++i)
      CHECK(std::abs(out.solutions[t][i] - oracle.steps[t].u[i]) <= 1e-12);
  }

  cfg.scheme = comm::Scheme::async;
  auto rep = run_experiment(cfg);
  CHECK(rep.converged);
  for (const auto& row : rep.rows) CHECK(row.residual < 1e-6);
}
