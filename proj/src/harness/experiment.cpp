#include "itercomm/harness/experiment.hpp"

#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <string>

#include "itercomm/errors.hpp"
#include "itercomm/solver/block.hpp"
#include "itercomm/solver/kernels.hpp"
#include "itercomm/transport/sim.hpp"
#include "itercomm/transport/socket.hpp"
#include "json.hpp"

namespace itercomm::harness {

using nlohmann::json;

namespace {

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

std::string encode_rank_run(const solver::RankRun& r) {
  json steps = json::array();
  for (const auto& s : r.steps)
    steps.push_back({{"step", s.step},
                     {"iterations", s.iterations},
                     {"snapshots", s.snapshots},
                     {"converged", s.converged},
                     {"residual_norm", finite_or_null(s.residual_norm)},
                     {"loop_time", s.loop_time},
                     {"wall_seconds", s.wall_seconds},
                     {"solution", s.solution}});
  const auto& c = r.comm;
  json j{{"rank", r.rank},
         {"steps", steps},
         {"comm",
          {c.sends_posted, c.sends_discarded, c.messages_delivered, c.messages_superseded, c.stale_dropped,
           c.recv_element_copies, c.max_pending_sends_per_link, c.min_active_recvs_per_link,
           c.max_active_recvs_per_link}},
         {"detector", {r.detector.rounds_evaluated, r.detector.rounds_failed}}};
  return j.dump();
}

solver::RankRun decode_rank_run(const std::string& text) {
  json j = json::parse(text);
  if (j.contains("error")) throw ProtocolError("rank failed: " + j.at("error").get<std::string>());
  solver::RankRun r;
  r.rank = j.at("rank").get<int>();
  for (const auto& s : j.at("steps")) {
    solver::StepRecord rec;
    rec.step = s.at("step");
    rec.iterations = s.at("iterations");
    rec.snapshots = s.at("snapshots");
    rec.converged = s.at("converged");
    rec.residual_norm =
        s.at("residual_norm").is_null() ? std::numeric_limits<double>::infinity() : s.at("residual_norm").get<double>();
    rec.loop_time = s.at("loop_time");
    rec.wall_seconds = s.at("wall_seconds");
    rec.solution = s.at("solution").get<std::vector<double>>();
    r.steps.push_back(std::move(rec));
  }
  const auto& c = j.at("comm");
  r.comm.sends_posted = c[0];
  r.comm.sends_discarded = c[1];
  r.comm.messages_delivered = c[2];
  r.comm.messages_superseded = c[3];
  r.comm.stale_dropped = c[4];
  r.comm.recv_element_copies = c[5];
  r.comm.max_pending_sends_per_link = c[6];
  r.comm.min_active_recvs_per_link = c[7];
  r.comm.max_active_recvs_per_link = c[8];
  r.detector.rounds_evaluated = j.at("detector")[0];
  r.detector.rounds_failed = j.at("detector")[1];
  return r;
}

void write_all(int fd, const std::string& s) {
  std::size_t off = 0;
  while (off < s.size()) {
    ssize_t w = ::write(fd, s.data() + off, s.size() - off);
    if (w < 0 && errno == EINTR) continue;
    if (w <= 0) return;
    off += static_cast<std::size_t>(w);
  }
}

// Keeps the endpoint progressing (flushing queued bytes, accepting late
// traffic) until the parent says every rank is done.
void linger(transport::Endpoint& ep, int go_fd) {
  std::optional<transport::Request> idle;
  if (!ep.in_peers().empty()) idle = ep.post_recv(ep.in_peers().front(), transport::Tag::control);
  pollfd pfd{go_fd, POLLIN, 0};
  for (;;) {
    if (::poll(&pfd, 1, 1) > 0) return;
    if (idle && ep.test(*idle)) idle = ep.post_recv(ep.in_peers().front(), transport::Tag::control);
  }
}

std::vector<solver::RankRun> run_sockets(const RunConfig& cfg, const Partition3D& part,
                                         const solver::DiscreteSystem& sys, const solver::SolverOptions& opt) {
  const int p = part.size();
  transport::SocketMesh mesh(partition_to_graph(part));
  transport::SocketOptions sopt;
  sopt.deadlock_timeout = std::chrono::milliseconds(cfg.deadlock_timeout_ms);
  sopt.connect_timeout = std::chrono::milliseconds(cfg.deadlock_timeout_ms);

  // a rank that died early must not take the parent down on the go write
  struct sigaction ign {}, old {};
  ign.sa_handler = SIG_IGN;
  ::sigaction(SIGPIPE, &ign, &old);
  struct Restore {
    struct sigaction* o;
    ~Restore() { ::sigaction(SIGPIPE, o, nullptr); }
  } restore{&old};

  std::vector<pid_t> pids;
  std::vector<int> res_fds, go_fds;
  for (Rank r = 0; r < p; ++r) {
    int res[2], go[2];
    if (::pipe(res) != 0 || ::pipe(go) != 0) throw IoError(std::string("pipe: ") + std::strerror(errno));
    pid_t pid = ::fork();
    if (pid < 0) throw IoError(std::string("fork: ") + std::strerror(errno));
    if (pid == 0) {
      ::close(res[0]);
      ::close(go[1]);
      int code = 0;
      try {
        mesh.close_listeners_except(r);
        auto ep = mesh.open(r, sopt);
        auto run = solver::time_step_loop(*ep, part, sys, opt);
        write_all(res[1], encode_rank_run(run));
        ::close(res[1]);
        linger(*ep, go[0]);
      } catch (const std::exception& e) {
        write_all(res[1], json{{"error", e.what()}}.dump());
        code = 1;
      }
      ::_exit(code);
    }
    ::close(res[1]);
    ::close(go[0]);
    pids.push_back(pid);
    res_fds.push_back(res[0]);
    go_fds.push_back(go[1]);
  }

  std::vector<std::string> out(p);
  std::vector<bool> open(p, true);
  int remaining = p;
  while (remaining > 0) {
    std::vector<pollfd> fds;
    std::vector<int> who;
    for (int r = 0; r < p; ++r)
      if (open[r]) {
        fds.push_back({res_fds[r], POLLIN, 0});
        who.push_back(r);
      }
    if (::poll(fds.data(), fds.size(), -1) < 0) {
      if (errno == EINTR) continue;
      throw IoError(std::string("poll: ") + std::strerror(errno));
    }
    for (std::size_t i = 0; i < fds.size(); ++i) {
      if (!(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
      char buf[65536];
      ssize_t got = ::read(fds[i].fd, buf, sizeof buf);
      if (got > 0) {
        out[who[i]].append(buf, static_cast<std::size_t>(got));
      } else if (got == 0 || errno != EINTR) {
        open[who[i]] = false;
        ::close(fds[i].fd);
        --remaining;
      }
    }
  }
  for (int fd : go_fds) {
    write_all(fd, "x");
    ::close(fd);
  }
  for (pid_t pid : pids) ::waitpid(pid, nullptr, 0);

  std::vector<solver::RankRun> runs;
  for (Rank r = 0; r < p; ++r) {
    if (out[r].empty()) throw ProtocolError("rank " + std::to_string(r) + " exited without a result");
    runs.push_back(decode_rank_run(out[r]));
  }
  return runs;
}

}  // namespace

ExperimentOutput run_experiment_detailed(const RunConfig& cfg, convergence::SnapshotObserver* observer) {
  cfg.validate();
  const auto sys = solver::discretize(cfg.problem());
  ExperimentOutput out;
  try {
    out.partition = build_partition(cfg.n, cfg.n, cfg.n, cfg.p);
  } catch (const InfeasibleError& e) {
    throw ConfigError(std::string("p: ") + e.what());
  }
  const auto& part = out.partition;

  solver::SolverOptions opt;
  opt.scheme = cfg.scheme;
  opt.max_recv_requests = cfg.max_recv_requests;
  opt.norm = cfg.norm();
  opt.kernel = cfg.kernel;
  opt.max_iterations = cfg.max_iterations;
  opt.cost_per_cell = cfg.cost_per_cell;

  double makespan = 0.0;
  if (cfg.backend == Backend::sim) {
    opt.observer = observer;
    transport::SimWorld world(partition_to_graph(part), cfg.delays());
    out.ranks.resize(cfg.p);
    world.run([&](transport::Endpoint& ep) { out.ranks[ep.rank()] = solver::time_step_loop(ep, part, sys, opt); });
    makespan = world.makespan() * cfg.tick_seconds;
  } else {
    out.ranks = run_sockets(cfg, part, sys, opt);
  }

  RunReport& rep = out.report;
  rep.scheme = std::string(comm::scheme_name(cfg.scheme));
  rep.backend = std::string(backend_name(cfg.backend));
  rep.p = cfg.p;
  rep.n = cfg.n;
  rep.seed = cfg.seed;
  rep.q = cfg.q;
  rep.threshold = cfg.threshold;

  std::size_t steps = std::numeric_limits<std::size_t>::max();
  for (const auto& r : out.ranks) steps = std::min(steps, r.steps.size());
  const int n = cfg.n;
  const std::size_t m = static_cast<std::size_t>(n) * n * n;
  std::vector<double> prev(m, 0.0), rhs(m);
  bool all_ok = steps == static_cast<std::size_t>(cfg.time_steps);
  for (std::size_t t = 0; t < steps; ++t) {
    std::vector<double> u(m, 0.0);
    StepRow row;
    row.step = static_cast<int>(t) + 1;
    row.scheme = rep.scheme;
    row.p = cfg.p;
    row.n = n;
    double time = 0.0;
    for (const auto& r : out.ranks) {
      const auto& s = r.steps[t];
      solver::LocalBlock(part, r.rank).scatter(s.solution, u, n);
      row.rank_iterations.push_back(s.iterations);
      row.iterations = std::max(row.iterations, s.iterations);
      row.snapshots = std::max(row.snapshots, s.snapshots);
      row.failed = row.failed || !s.converged;
      time = std::max(time, cfg.backend == Backend::sim ? s.loop_time * cfg.tick_seconds : s.wall_seconds);
    }
    row.time_s = time;
    for (std::size_t i = 0; i < m; ++i) rhs[i] = sys.rhs(prev[i]);
    row.residual = solver::global_residual_inf_openmp(sys, u.data(), rhs.data());
    all_ok = all_ok && !row.failed;
    rep.rows.push_back(std::move(row));
    prev = u;
    out.solutions.push_back(std::move(u));
  }
  rep.converged = all_ok;
  if (cfg.backend == Backend::socket)
    for (const auto& row : rep.rows) makespan += row.time_s;
  rep.makespan_s = makespan;

  for (const auto& r : out.ranks) {
    RankSummary s;
    s.rank = r.rank;
    for (const auto& st : r.steps) s.iterations += st.iterations;
    s.sends_posted = r.comm.sends_posted;
    s.sends_discarded = r.comm.sends_discarded;
    s.messages_delivered = r.comm.messages_delivered;
    s.messages_superseded = r.comm.messages_superseded;
    s.recv_element_copies = r.comm.recv_element_copies;
    s.max_pending_sends_per_link = r.comm.max_pending_sends_per_link;
    s.min_active_recvs_per_link = cfg.scheme == comm::Scheme::async ? r.comm.min_active_recvs_per_link : 0;
    s.max_active_recvs_per_link = r.comm.max_active_recvs_per_link;
    s.snapshot_rounds = r.detector.rounds_evaluated;
    s.snapshot_rounds_failed = r.detector.rounds_failed;
    rep.ranks.push_back(s);
  }
  return out;
}

RunReport run_experiment(const RunConfig& cfg) { return run_experiment_detailed(cfg).report; }

}  // namespace itercomm::harness
