#include "itercomm/harness/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "itercomm/errors.hpp"
#include "itercomm/solver/problem.hpp"

namespace itercomm::harness {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(std::string_view key, std::string_view value, std::string_view why) {
  throw ConfigError("invalid value '" + std::string(value) + "' for " + std::string(key) + ": " + std::string(why));
}

double to_double(std::string_view key, std::string_view v) {
  v = trim(v);
  double x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) bad(key, v, "expected a number");
  return x;
}

long long to_int(std::string_view key, std::string_view v) {
  v = trim(v);
  long long x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) bad(key, v, "expected an integer");
  return x;
}

std::vector<double> to_list(std::string_view key, std::string_view v) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= v.size()) {
    auto end = v.find(',', start);
    if (end == std::string_view::npos) end = v.size();
    out.push_back(to_double(key, v.substr(start, end - start)));
    start = end + 1;
  }
  return out;
}

void require(bool ok, std::string_view key, const std::string& why) {
  if (!ok) throw ConfigError(std::string(key) + ": " + why);
}

}  // namespace

std::string_view backend_name(Backend b) noexcept { return b == Backend::sim ? "sim" : "socket"; }
std::string_view format_name(Format f) noexcept { return f == Format::csv ? "csv" : "json"; }

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "p",          "n",           "scheme",        "q",         "threshold",  "max_recv_requests",
      "latency",    "jitter",      "slowdown",      "slow_rank", "slow_factor", "slowdown_max",
      "cost_per_cell", "tick_seconds", "seed",      "time_steps", "dt",        "nu",
      "a",          "source",      "max_iterations", "backend",  "kernel",     "deadlock_timeout_ms",
      "output",     "format"};
  return keys;
}

void set_key(RunConfig& c, std::string_view key, std::string_view value) {
  const std::string_view v = trim(value);
  if (key == "p") c.p = static_cast<int>(to_int(key, v));
  else if (key == "n") c.n = static_cast<int>(to_int(key, v));
  else if (key == "scheme") c.scheme = comm::parse_scheme(v);
  else if (key == "q") c.q = to_double(key, v);
  else if (key == "threshold") c.threshold = to_double(key, v);
  else if (key == "max_recv_requests") {
    auto x = to_int(key, v);
    if (x < 1) bad(key, v, "at least 1 receive request per link");
    c.max_recv_requests = static_cast<std::size_t>(x);
  } else if (key == "latency") c.latency = to_double(key, v);
  else if (key == "jitter") c.jitter = to_double(key, v);
  else if (key == "slowdown") c.slowdown = v.empty() ? std::vector<double>{} : to_list(key, v);
  else if (key == "slow_rank") c.slow_rank = static_cast<int>(to_int(key, v));
  else if (key == "slow_factor") c.slow_factor = to_double(key, v);
  else if (key == "slowdown_max") c.slowdown_max = to_double(key, v);
  else if (key == "cost_per_cell") c.cost_per_cell = to_double(key, v);
  else if (key == "tick_seconds") c.tick_seconds = to_double(key, v);
  else if (key == "seed") {
    auto x = to_int(key, v);
    if (x < 0) bad(key, v, "must be non-negative");
    c.seed = static_cast<std::uint64_t>(x);
  } else if (key == "time_steps") c.time_steps = static_cast<int>(to_int(key, v));
  else if (key == "dt") c.dt = to_double(key, v);
  else if (key == "nu") c.nu = to_double(key, v);
  else if (key == "a") {
    auto l = to_list(key, v);
    if (l.size() != 3) bad(key, v, "expected three comma-separated components");
    c.a = {l[0], l[1], l[2]};
  } else if (key == "source") c.source = to_double(key, v);
  else if (key == "max_iterations") {
    auto x = to_int(key, v);
    if (x < 1) bad(key, v, "must be positive");
    c.max_iterations = static_cast<std::size_t>(x);
  } else if (key == "backend") {
    if (v == "sim") c.backend = Backend::sim;
    else if (v == "socket") c.backend = Backend::socket;
    else bad(key, v, "expected sim or socket");
  } else if (key == "kernel") c.kernel = solver::parse_kernel(v);
  else if (key == "deadlock_timeout_ms") c.deadlock_timeout_ms = static_cast<int>(to_int(key, v));
  else if (key == "output") c.output = std::string(v);
  else if (key == "format") {
    if (v == "csv") c.format = Format::csv;
    else if (v == "json") c.format = Format::json;
    else bad(key, v, "expected csv or json");
  } else {
    throw ConfigError("unknown configuration key '" + std::string(key) + "'");
  }
}

void RunConfig::validate() const {
  require(p >= 1, "p", "at least one process");
  require(n >= 2, "n", "at least 2 interior points per axis");
  require(static_cast<long long>(p) <= static_cast<long long>(n) * n * n, "p", "more processes than grid points");
  require(std::isfinite(q), "q", "must be finite");
  require(threshold > 0 && std::isfinite(threshold), "threshold", "must be a positive number");
  require(max_recv_requests >= 1, "max_recv_requests", "at least 1");
  require(latency >= 0 && std::isfinite(latency), "latency", "must be non-negative");
  require(jitter >= 0 && std::isfinite(jitter), "jitter", "must be non-negative");
  require(slowdown.empty() || static_cast<int>(slowdown.size()) == p, "slowdown", "needs one factor per rank");
  for (double s : slowdown) require(s > 0 && std::isfinite(s), "slowdown", "factors must be positive");
  require(slow_rank >= -1 && slow_rank < p, "slow_rank", "must be a rank in 0..p-1");
  require(slow_factor > 0 && std::isfinite(slow_factor), "slow_factor", "must be positive");
  require(slowdown_max >= 1 && std::isfinite(slowdown_max), "slowdown_max", "must be at least 1");
  require(cost_per_cell > 0 && std::isfinite(cost_per_cell), "cost_per_cell",
          "must be positive (simulated time has to advance every iteration)");
  require(tick_seconds > 0, "tick_seconds", "must be positive");
  require(time_steps >= 0, "time_steps", "must be non-negative");
  require(dt > 0 && std::isfinite(dt), "dt", "must be positive");
  require(nu > 0 && std::isfinite(nu), "nu", "must be positive");
  require(deadlock_timeout_ms > 0, "deadlock_timeout_ms", "must be positive");
  solver::discretize(problem());
}

solver::ProblemSpec RunConfig::problem() const {
  solver::ProblemSpec s;
  s.nu = nu;
  s.a = a;
  s.dt = dt;
  s.n = n;
  s.time_steps = time_steps;
  s.source = source;
  return s;
}

transport::DelayModel RunConfig::delays() const {
  transport::DelayModel d;
  d.base_latency = latency;
  d.jitter = jitter;
  d.seed = seed;
  std::vector<double> f(p, 1.0);
  if (!slowdown.empty()) f = slowdown;
  if (slowdown_max > 1.0) {
    std::mt19937_64 rng(seed ^ 0x5deece66dULL);
    std::uniform_real_distribution<double> u(1.0, slowdown_max);
    for (auto& x : f) x *= u(rng);
  }
  if (slow_rank >= 0) f[slow_rank] *= slow_factor;
  d.slowdown = std::move(f);
  return d;
}

RunConfig parse_config_text(std::string_view text, RunConfig base) {
  std::size_t line_no = 0, start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key=value, got '" + std::string(line) + "'");
    set_key(base, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  base.validate();
  return base;
}

RunConfig parse_config_file(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), std::move(base));
}

}  // namespace itercomm::harness
