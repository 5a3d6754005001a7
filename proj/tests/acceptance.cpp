// Acceptance checks 1-9: one PASS/FAIL line each, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "dense_oracle.hpp"
#include "itercomm/errors.hpp"
#include "itercomm/harness/config.hpp"
#include "itercomm/harness/experiment.hpp"
#include "itercomm/solver/problem.hpp"
#include "itercomm/solver/time_loop.hpp"
#include "scenarios.hpp"

using namespace itercomm;

namespace {

constexpr double kTrajectoryTol = 1e-12;
constexpr double kResidualBound = 1e-6;
constexpr double kNormTol = 1e-12;
constexpr int kSyncSeeds = 10;
constexpr int kAsyncSeeds = 100;
constexpr int kNormCases = 1000;
constexpr int kTrendSeeds = 10;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Block of a global vector (x fastest) owned by one box, x fastest.
std::vector<double> extract(const Box& b, const std::vector<double>& g, int n) {
  std::vector<double> out;
  for (int k = b.lo[2]; k < b.hi[2]; ++k)
    for (int j = b.lo[1]; j < b.hi[1]; ++j)
      for (int i = b.lo[0]; i < b.hi[0]; ++i) out.push_back(g[i + static_cast<std::size_t>(n) * (j + n * k)]);
  return out;
}

std::vector<double> assemble(const Partition3D& part, const std::vector<solver::RankRun>& ranks, std::size_t step,
                             int n) {
  std::vector<double> g(static_cast<std::size_t>(n) * n * n, std::numeric_limits<double>::quiet_NaN());
  for (const auto& r : ranks) {
    const Box& b = part.boxes[r.rank];
    const auto& blk = r.steps.at(step).solution;
    std::size_t at = 0;
    for (int k = b.lo[2]; k < b.hi[2]; ++k)
      for (int j = b.lo[1]; j < b.hi[1]; ++j)
        for (int i = b.lo[0]; i < b.hi[0]; ++i) g[i + static_cast<std::size_t>(n) * (j + n * k)] = blk.at(at++);
  }
  return g;
}

// Sequential Jacobi on the dense matrix: trajectory per time step, stopping
// once the residual of the iterate a step was computed from is below the bound.
struct DenseRun {
  std::vector<std::vector<std::vector<double>>> traj;  // [step][k-1]
};

DenseRun dense_run(const solver::ProblemSpec& s, double threshold) {
  auto A = dense::assemble(s);
  DenseRun out;
  std::vector<double> u(A.m, 0.0);
  for (int t = 0; t < s.time_steps; ++t) {
    auto b = dense::rhs(s, u);
    std::vector<std::vector<double>> tr;
    for (;;) {
      const double r = dense::residual_inf(A, u, b);
      u = dense::jacobi_step(A, b, u);
      tr.push_back(u);
      if (r < threshold || tr.size() > 100000) break;
    }
    out.traj.push_back(std::move(tr));
  }
  return out;
}

// Shared by criteria 1 and 6.
struct SyncSweep {
  bool ran = false;
  std::size_t runs = 0, mismatched_counts = 0, compared = 0;
  double worst = 0.0;
  std::uint64_t copies = 0, delivered = 0;
};
SyncSweep g_sync;

void run_sync_sweep() {
  if (g_sync.ran) return;
  g_sync.ran = true;
  for (int n : {6, 10}) {
    harness::RunConfig base;
    base.n = n;
    const auto ref = dense_run(base.problem(), base.threshold);
    for (int p : {2, 4, 8})
      for (auto scheme : {comm::Scheme::trivial, comm::Scheme::overlap})
        for (int seed = 1; seed <= kSyncSeeds; ++seed) {
          harness::RunConfig cfg = base;
          cfg.p = p;
          cfg.seed = static_cast<std::uint64_t>(seed);
          cfg.jitter = 4.0;
          cfg.slowdown_max = 5.0;
          const auto part = build_partition(n, n, n, p);
          solver::SolverOptions opt;
          opt.scheme = scheme;
          opt.norm = cfg.norm();
          std::vector<std::map<std::pair<int, std::size_t>, std::vector<double>>> iter(p);
          opt.on_iterate = [&](Rank r, int step, std::size_t k, std::span<const double> blk) {
            iter[r][{step, k}].assign(blk.begin(), blk.end());
          };
          auto sim = scenarios::run_solver_sim(part, solver::discretize(cfg.problem()), opt, cfg.delays());
          ++g_sync.runs;
          for (Rank r = 0; r < p; ++r) {
            const auto& rr = sim.ranks[r];
            g_sync.copies += rr.comm.recv_element_copies;
            g_sync.delivered += rr.comm.messages_delivered;
            if (rr.steps.size() != ref.traj.size()) {
              ++g_sync.mismatched_counts;
              continue;
            }
            for (std::size_t t = 0; t < ref.traj.size(); ++t) {
              if (rr.steps[t].iterations != ref.traj[t].size()) ++g_sync.mismatched_counts;
              for (std::size_t k = 1; k <= ref.traj[t].size(); ++k) {
                auto it = iter[r].find({static_cast<int>(t) + 1, k});
                if (it == iter[r].end()) {
                  g_sync.worst = INFINITY;
                  continue;
                }
                const auto want = extract(part.boxes[r], ref.traj[t][k - 1], n);
                for (std::size_t i = 0; i < want.size(); ++i)
                  g_sync.worst = std::max(g_sync.worst, std::fabs(it->second[i] - want[i]));
                ++g_sync.compared;
              }
            }
          }
        }
  }
}

Verdict sync_equivalence() {
  run_sync_sweep();
  const bool ok = g_sync.mismatched_counts == 0 && g_sync.worst <= kTrajectoryTol && g_sync.compared > 0;
  return {ok, fmt("%zu runs, %zu rank iterates compared, max |diff| %.3e (tol %.0e), %zu count mismatches", g_sync.runs,
                  g_sync.compared, g_sync.worst, kTrajectoryTol, g_sync.mismatched_counts)};
}

// Shared by criteria 2, 5 and 7.
struct AsyncSweep {
  bool ran = false;
  int runs = 0, terminated = 0, audited_ok = 0;
  double worst_residual = 0.0;
  std::size_t budget_violations = 0, rounds_checked = 0, inconsistent_runs = 0, errors = 0;
  std::size_t max_pending = 0, min_active = SIZE_MAX, max_active = 0;
  std::size_t max_recv = 0;
  std::string first_error;
};
AsyncSweep g_async;

void run_async_sweep() {
  if (g_async.ran) return;
  g_async.ran = true;
  harness::RunConfig base;
  base.p = 8;
  base.n = 10;
  base.scheme = comm::Scheme::async;
  base.slowdown_max = 10.0;
  base.jitter = 2.0;
  g_async.max_recv = base.max_recv_requests;
  const auto A = dense::assemble(base.problem());
  for (int seed = 1; seed <= kAsyncSeeds; ++seed) {
    harness::RunConfig cfg = base;
    cfg.seed = static_cast<std::uint64_t>(seed);
    ++g_async.runs;
    scenarios::SnapshotLog log;
    harness::ExperimentOutput out;
    try {
      out = harness::run_experiment_detailed(cfg, &log);
    } catch (const std::exception& e) {
      ++g_async.errors;
      if (g_async.first_error.empty()) g_async.first_error = e.what();
      continue;
    }
    bool done = out.report.converged && out.ranks.size() == 8;
    for (const auto& r : out.ranks) done = done && r.steps.size() == static_cast<std::size_t>(cfg.time_steps);
    if (!done) continue;
    ++g_async.terminated;

    bool ok = true;
    std::vector<double> prev(A.m, 0.0);
    for (std::size_t t = 0; t < static_cast<std::size_t>(cfg.time_steps); ++t) {
      auto u = assemble(out.partition, out.ranks, t, cfg.n);
      const double rn = dense::residual_inf(A, u, dense::rhs(cfg.problem(), prev));
      g_async.worst_residual = std::max(g_async.worst_residual, std::isnan(rn) ? INFINITY : rn);
      ok = ok && rn < kResidualBound;
      prev = std::move(u);
    }
    if (ok) ++g_async.audited_ok;

    for (const auto& r : out.ranks) {
      const auto& c = r.comm;
      g_async.max_pending = std::max(g_async.max_pending, c.max_pending_sends_per_link);
      g_async.min_active = std::min(g_async.min_active, c.min_active_recvs_per_link);
      g_async.max_active = std::max(g_async.max_active, c.max_active_recvs_per_link);
      if (c.max_pending_sends_per_link > 1 || c.min_active_recvs_per_link < 1 ||
          c.max_active_recvs_per_link > cfg.max_recv_requests)
        ++g_async.budget_violations;
    }

    const long rounds = log.consistent_rounds(partition_to_graph(out.partition));
    if (rounds < 1)
      ++g_async.inconsistent_runs;
    else
      g_async.rounds_checked += static_cast<std::size_t>(rounds);
  }
}

Verdict termination_soundness() {
  run_async_sweep();
  const auto& a = g_async;
  std::string d = fmt("%d/%d runs terminated, %d/%d audited r_n < %.0e (worst %.3e)", a.terminated, a.runs,
                      a.audited_ok, a.runs, kResidualBound, a.worst_residual);
  if (a.errors > 0) d += fmt(", %zu errors (first: %s)", a.errors, a.first_error.c_str());
  return {a.terminated == kAsyncSeeds && a.audited_ok == kAsyncSeeds, d};
}

Verdict no_premature_detection() {
  const auto o = scenarios::run_adversarial();
  const bool ok = o.flags_armed_at_trigger && o.root_triggered && o.first_round_norm > kResidualBound &&
                  !o.terminated_in_first_round && o.terminated_later && o.detection_round > 0 &&
                  o.final_residual < kResidualBound && o.consistent_rounds >= 2;
  return {ok, fmt("first round norm %.3g, stopped on it: %s, detected in round %u after %llu failed, final %.3e",
                  o.first_round_norm, o.terminated_in_first_round ? "yes" : "no", o.detection_round,
                  static_cast<unsigned long long>(o.failed_rounds), o.final_residual)};
}

double concat_norm(const std::vector<double>& v, double q) {
  if (q < 1) {
    double m = 0;
    for (double x : v) m = std::max(m, std::fabs(x));
    return m;
  }
  long double acc = 0;
  for (double x : v) acc += std::pow(std::fabs(static_cast<long double>(x)), static_cast<long double>(q));
  return static_cast<double>(std::pow(acc, 1.0L / q));
}

Verdict norm_correctness() {
  std::mt19937_64 rng(2024);
  int good = 0, cases = 0;
  double worst = 0;
  const double qs[] = {1.0, 2.0, 0.5};
  for (int c = 0; c < kNormCases; ++c) {
    const int p = std::uniform_int_distribution<int>(1, 16)(rng);
    const double q = qs[c % 3];
    // random shape: attach each node to an earlier one, then relabel
    std::vector<Rank> label(p);
    std::iota(label.begin(), label.end(), 0);
    std::shuffle(label.begin(), label.end(), rng);
    SpanningTree t;
    t.parent.assign(p, std::nullopt);
    t.children.assign(p, {});
    std::vector<std::pair<Rank, Rank>> edges;
    for (int i = 1; i < p; ++i) {
      const Rank par = label[std::uniform_int_distribution<int>(0, i - 1)(rng)];
      t.parent[label[i]] = par;
      t.children[par].push_back(label[i]);
      edges.emplace_back(par, label[i]);
    }
    for (auto& ch : t.children) std::sort(ch.begin(), ch.end());
    std::vector<std::vector<double>> blocks(p);
    std::vector<double> all;
    for (auto& b : blocks) {
      b.resize(std::uniform_int_distribution<int>(0, 8)(rng));
      for (auto& x : b) x = std::uniform_real_distribution<double>(-5, 5)(rng);
      all.insert(all.end(), b.begin(), b.end());
    }
    const convergence::NormSpec spec{q, 1e-6};
    transport::DelayModel d;
    d.jitter = 3.0;
    d.seed = rng();
    transport::SimWorld world(CommGraph::undirected(p, edges), d);
    std::vector<double> got(p);
    world.run([&](transport::Endpoint& ep) {
      got[ep.rank()] =
          convergence::tree_norm(ep, t.local(ep.rank()), convergence::local_accumulate(blocks[ep.rank()], spec), spec);
    });
    const double want = concat_norm(all, q);
    bool ok = true;
    for (double g : got) {
      worst = std::max(worst, std::fabs(g - want));
      ok = ok && std::fabs(g - want) <= kNormTol;
    }
    good += ok;
    ++cases;
  }
  return {good == kNormCases, fmt("%d/%d cases within %.0e (max |diff| %.3e)", good, cases, kNormTol, worst)};
}

Verdict request_budgets() {
  run_async_sweep();
  const auto& a = g_async;
  const bool ok = a.terminated > 0 && a.budget_violations == 0 && a.max_pending <= 1 && a.min_active >= 1 &&
                  a.max_active <= a.max_recv;
  return {ok, fmt("over %d async runs: max pending sends/link %zu (<= 1), active recvs/link in [%zu, %zu] (budget [1, %zu])",
                  a.runs, a.max_pending, a.min_active == SIZE_MAX ? 0 : a.min_active, a.max_active, a.max_recv)};
}

Verdict zero_copy() {
  run_sync_sweep();
  return {g_sync.copies == 0 && g_sync.delivered > 0,
          fmt("%llu element copies over %llu sync deliveries", static_cast<unsigned long long>(g_sync.copies),
              static_cast<unsigned long long>(g_sync.delivered))};
}

Verdict snapshot_consistency() {
  run_async_sweep();
  const auto& a = g_async;
  return {a.inconsistent_runs == 0 && a.errors == 0 && a.rounds_checked > 0,
          fmt("%zu completed rounds checked link by link, %zu runs with a mismatch", a.rounds_checked,
              a.inconsistent_runs)};
}

Verdict async_trend() {
  std::vector<double> async_t, sync_t;
  int failed = 0;
  for (int seed = 1; seed <= kTrendSeeds; ++seed) {
    harness::RunConfig cfg;
    cfg.n = 12;
    cfg.p = 8;
    cfg.seed = static_cast<std::uint64_t>(seed);
    cfg.jitter = 2.0;
    cfg.slow_rank = seed % cfg.p;
    cfg.slow_factor = 10.0;
    for (auto s : {comm::Scheme::async, comm::Scheme::overlap}) {
      cfg.scheme = s;
      auto rep = harness::run_experiment(cfg);
      if (!rep.converged) ++failed;
      double loop = 0;
      for (const auto& row : rep.rows) loop += row.time_s;
      (s == comm::Scheme::async ? async_t : sync_t).push_back(loop);
    }
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
  };
  const double ma = median(async_t), ms = median(sync_t);
  return {failed == 0 && ma < ms,
          fmt("median loop time async %.6f s vs overlap %.6f s (ratio %.3f), %d unconverged", ma, ms, ma / ms, failed)};
}

Verdict discretization_audit() {
  // dyadic inputs: every operation is exact in binary floating point
  int dyadic = 0, dyadic_ok = 0;
  for (int n : {3, 7, 15, 31})
    for (double nu : {0.5, 0.25, 1.0})
      for (double dt : {0.5, 0.125, 0.0078125})
        for (double a : {0.0, 0.25, -0.5}) {
          solver::ProblemSpec s;
          s.n = n;
          s.nu = nu;
          s.dt = dt;
          s.a = {a, -a, 0.5 * a};
          solver::DiscreteSystem sys;
          try {
            sys = solver::discretize(s);
          } catch (const ConfigError&) {
            continue;
          }
          ++dyadic;
          if (sys.stencil.diag - sys.stencil.off_abs_sum() == 1.0 / dt) ++dyadic_ok;
        }
  // arbitrary accepted inputs: equal up to the rounding of the two sums
  std::mt19937_64 rng(9);
  int accepted = 0, random_ok = 0;
  double worst = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    solver::ProblemSpec s;
    s.n = std::uniform_int_distribution<int>(2, 64)(rng);
    s.nu = std::uniform_real_distribution<double>(0.01, 2)(rng);
    s.dt = std::uniform_real_distribution<double>(1e-4, 1)(rng);
    for (auto& ai : s.a) ai = std::uniform_real_distribution<double>(-3, 3)(rng);
    solver::DiscreteSystem sys;
    try {
      sys = solver::discretize(s);
    } catch (const ConfigError&) {
      continue;
    }
    ++accepted;
    const double gap = std::fabs(sys.stencil.diag - sys.stencil.off_abs_sum() - 1.0 / s.dt);
    const double ulp_bound = 8 * std::numeric_limits<double>::epsilon() * sys.stencil.diag;
    worst = std::max(worst, gap / sys.stencil.diag);
    if (gap <= ulp_bound) ++random_ok;
  }
  // dense matrix columns against the matrix-free operator
  std::size_t entries = 0, entry_mismatch = 0;
  for (int n : {2, 3}) {
    solver::ProblemSpec s;
    s.n = n;
    const auto sys = solver::discretize(s);
    const auto A = dense::assemble(s);
    std::vector<double> e(A.m, 0.0), z(A.m, 0.0), un(A.m), r(A.m);
    for (std::size_t j = 0; j < A.m; ++j) {
      std::fill(e.begin(), e.end(), 0.0);
      e[j] = 1.0;
      solver::SweepArgs args;
      args.ext = {n, n, n};
      args.u_old = e.data();
      args.rhs = z.data();
      args.stencil = sys.stencil;
      args.u_new = un.data();
      args.residual = r.data();
      solver::jacobi_sweep_serial(args);
      for (std::size_t i = 0; i < A.m; ++i) {
        ++entries;
        if (-r[i] != A.at(i, j)) ++entry_mismatch;
      }
    }
  }
  const bool ok = dyadic > 0 && dyadic_ok == dyadic && accepted > 0 && random_ok == accepted && entry_mismatch == 0;
  return {ok, fmt("dyadic specs exact %d/%d, random specs %d/%d within 8 ulp(d) (worst rel %.2e), dense n=2,3 "
                  "%zu/%zu entries equal",
                  dyadic_ok, dyadic, random_ok, accepted, worst, entries - entry_mismatch, entries)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"synchronous equivalence", sync_equivalence},
      {"termination soundness", termination_soundness},
      {"no premature detection", no_premature_detection},
      {"norm correctness", norm_correctness},
      {"request budgets", request_budgets},
      {"zero-copy delivery", zero_copy},
      {"snapshot consistency", snapshot_consistency},
      {"async beats overlap with a slow rank", async_trend},
      {"discretization audit", discretization_audit},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %zu (%s): %s [%.1fs]\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                v.detail.c_str(), secs);
    std::fflush(stdout);
    failures += !v.pass;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
