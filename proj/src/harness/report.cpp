#include "itercomm/harness/report.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>

#include "itercomm/errors.hpp"
#include "json.hpp"

namespace itercomm::harness {

using nlohmann::json;

void to_json(json& j, const StepRow& s) {
  j = json{{"step", s.step},         {"scheme", s.scheme},         {"p", s.p},
           {"n", s.n},               {"time_s", s.time_s},         {"residual", s.residual},
           {"iterations", s.iterations}, {"snapshots", s.snapshots}, {"failed", s.failed},
           {"rank_iterations", s.rank_iterations}};
}

void from_json(const json& j, StepRow& s) {
  j.at("step").get_to(s.step);
  j.at("scheme").get_to(s.scheme);
  j.at("p").get_to(s.p);
  j.at("n").get_to(s.n);
  j.at("time_s").get_to(s.time_s);
  j.at("residual").get_to(s.residual);
  j.at("iterations").get_to(s.iterations);
  j.at("snapshots").get_to(s.snapshots);
  j.at("failed").get_to(s.failed);
  j.at("rank_iterations").get_to(s.rank_iterations);
}

void to_json(json& j, const RankSummary& r) {
  j = json{{"rank", r.rank},
           {"iterations", r.iterations},
           {"sends_posted", r.sends_posted},
           {"sends_discarded", r.sends_discarded},
           {"messages_delivered", r.messages_delivered},
           {"messages_superseded", r.messages_superseded},
           {"recv_element_copies", r.recv_element_copies},
           {"max_pending_sends_per_link", r.max_pending_sends_per_link},
           {"min_active_recvs_per_link", r.min_active_recvs_per_link},
           {"max_active_recvs_per_link", r.max_active_recvs_per_link},
           {"snapshot_rounds", r.snapshot_rounds},
           {"snapshot_rounds_failed", r.snapshot_rounds_failed}};
}

void from_json(const json& j, RankSummary& r) {
  j.at("rank").get_to(r.rank);
  j.at("iterations").get_to(r.iterations);
  j.at("sends_posted").get_to(r.sends_posted);
  j.at("sends_discarded").get_to(r.sends_discarded);
  j.at("messages_delivered").get_to(r.messages_delivered);
  j.at("messages_superseded").get_to(r.messages_superseded);
  j.at("recv_element_copies").get_to(r.recv_element_copies);
  j.at("max_pending_sends_per_link").get_to(r.max_pending_sends_per_link);
  j.at("min_active_recvs_per_link").get_to(r.min_active_recvs_per_link);
  j.at("max_active_recvs_per_link").get_to(r.max_active_recvs_per_link);
  j.at("snapshot_rounds").get_to(r.snapshot_rounds);
  j.at("snapshot_rounds_failed").get_to(r.snapshot_rounds_failed);
}

std::string to_json(const RunReport& r) {
  json j{{"scheme", r.scheme},         {"backend", r.backend}, {"p", r.p},
         {"n", r.n},                   {"seed", r.seed},       {"q", r.q},
         {"threshold", r.threshold},   {"converged", r.converged}, {"makespan_s", r.makespan_s},
         {"rows", r.rows},             {"ranks", r.ranks}};
  return j.dump(2) + "\n";
}

RunReport report_from_json(std::string_view text) {
  RunReport r;
  try {
    json j = json::parse(text);
    j.at("scheme").get_to(r.scheme);
    j.at("backend").get_to(r.backend);
    j.at("p").get_to(r.p);
    j.at("n").get_to(r.n);
    j.at("seed").get_to(r.seed);
    j.at("q").get_to(r.q);
    j.at("threshold").get_to(r.threshold);
    j.at("converged").get_to(r.converged);
    j.at("makespan_s").get_to(r.makespan_s);
    j.at("rows").get_to(r.rows);
    j.at("ranks").get_to(r.ranks);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed report: ") + e.what());
  }
  return r;
}

std::string to_csv(const RunReport& r) {
  std::string out(kCsvHeader);
  out += '\n';
  char line[256];
  for (const auto& s : r.rows) {
    // failed steps carry the tag in the scheme field to keep the header fixed
    const std::string scheme = s.failed ? s.scheme + ":failed" : s.scheme;
    std::snprintf(line, sizeof line, "%d,%s,%d,%d,%.6f,%.6e,%zu,%llu\n", s.step, scheme.c_str(), s.p, s.n, s.time_s,
                  s.residual, s.iterations, static_cast<unsigned long long>(s.snapshots));
    out += line;
  }
  return out;
}

void emit_report(const RunReport& r, Format format, const std::string& path) {
  const std::string text = format == Format::csv ? to_csv(r) : to_json(r);
  if (path.empty() || path == "-") {
    std::cout << text << std::flush;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << text;
  out.close();
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace itercomm::harness
