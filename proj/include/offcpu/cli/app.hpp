#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "offcpu/offcpu.hpp"

namespace offcpu::cli {

enum Exit : int { kOk = 0, kUsage = 2, kNotFound = 3, kInternal = 4 };

// Raised for lookups that name something absent from the input.
struct NotFound : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Writes next to the target and renames over it, so readers never see a
// half-written file.
inline void write_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::InvalidParameter, "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error(Errc::InvalidParameter, "short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error(Errc::InvalidParameter, "cannot replace " + path + ": " + ec.message());
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string fmt_us(Duration ns) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(0) << to_us(ns);
  return s.str();
}

struct SpanSelect {
  std::string begin = "span_begin";
  std::string end = "span_end";
  std::optional<Tid> root_tid;
  std::optional<std::string> root_comm;

  void add_to(CLI::App* app) {
    app->add_option("--begin", begin, "Span start delimiter, kind[:name]")->capture_default_str();
    app->add_option("--end", end, "Span end delimiter, kind[:name]")->capture_default_str();
    app->add_option("--root-tid", root_tid, "Only spans rooted at this tid");
    app->add_option("--root-comm", root_comm, "Only spans rooted at threads with this name");
  }

  DelimiterSpec spec() const {
    DelimiterSpec d;
    d.begin = EventMatcher::parse(begin);
    d.end = EventMatcher::parse(end);
    d.root_tid = root_tid;
    d.root_comm = root_comm;
    return d;
  }
};

struct Loaded {
  std::vector<TraceEvent> events;
  StateDatabase db;
  SpanSet spans;
};

inline Loaded load(const std::string& trace, const SpanSelect& sel) {
  Loaded l;
  l.events = parse_trace(read_file(trace));
  l.db = build_state_db(l.events);
  l.spans = extract_spans(l.events, sel.spec());
  return l;
}

struct Common {
  std::string trace;
  SpanSelect select;
  int max_depth = 16;
};

inline int cmd_synth(const std::string& scenario, ScenarioSpec spec, const std::string& out,
                     const std::string& truth, std::ostream& log) {
  auto result = generate(spec);
  write_atomic(out, write_trace(result.events));
  write_atomic(truth, ground_truth_to_json(spec, result.truth).dump(2) + "\n");
  std::size_t slow = 0;
  for (const auto& t : result.truth) slow += t.label == "slow";
  log << "synth " << scenario << ": " << result.events.size() << " events, " << result.truth.size()
      << " spans (" << slow << " slow) -> " << out << ", " << truth << "\n";
  return kOk;
}

inline int cmd_graph(const Common& c, const std::optional<std::string>& span_id, std::optional<std::size_t> index,
                     const std::string& out, const std::optional<std::string>& json_out, const DotOptions& dot,
                     std::ostream& log) {
  Loaded l = load(c.trace, c.select);
  const ExecutionSpan* span = nullptr;
  if (span_id) {
    span = l.spans.find(*span_id);
    if (!span) throw NotFound("span " + *span_id + " not found");
  } else {
    const std::size_t i = index.value_or(0);
    if (i >= l.spans.spans.size()) throw NotFound("span index " + std::to_string(i) + " not found");
    span = &l.spans.spans[i];
  }
  DepGraph g = build_depgraph(*span, l.db, GraphOptions{c.max_depth});
  write_atomic(out, to_dot(g, dot));
  if (json_out) write_atomic(*json_out, graph_to_json(g).dump(2) + "\n");
  log << "span " << span->span_id << " root " << g.root().label << " total " << fmt_us(g.root().total) << " us, "
      << g.nodes().size() << " nodes, " << g.edges().size() << " edges";
  if (g.meta().cycle_broken) log << ", cycle broken";
  if (g.meta().depth_limited) log << ", depth limited";
  log << "\n";
  return kOk;
}

inline int cmd_cluster(const Common& c, int k, std::uint64_t seed, const std::string& out, std::ostream& log) {
  Loaded l = load(c.trace, c.select);
  ClusterReport r = cluster_spans(l.spans.spans, l.db, k, seed);
  write_atomic(out, report_to_json(r).dump(2) + "\n");
  for (int i = 0; i < k; ++i) {
    auto m = r.members(i);
    double mean = 0;
    for (const auto& s : m) mean += to_us(s.duration());
    if (!m.empty()) mean /= static_cast<double>(m.size());
    log << "cluster " << i << ": " << m.size() << " spans, mean total " << std::fixed << std::setprecision(0)
        << mean << " us\n";
  }
  return kOk;
}

inline Representative cluster_representative(const Loaded& l, const ClusterReport& r, int cluster, int max_depth) {
  std::vector<DepGraph> graphs;
  for (const auto& s : r.members(cluster)) graphs.push_back(canonicalize(build_depgraph(s, l.db, GraphOptions{max_depth})));
  if (graphs.empty()) throw NotFound("cluster " + std::to_string(cluster) + " has no spans");
  return representative(graphs);
}

inline int cmd_compare(const Common& c, const std::string& report, int left, int right, CompareStat stat,
                       const std::string& out, const std::optional<std::string>& json_out, std::ostream& log) {
  Loaded l = load(c.trace, c.select);
  ClusterReport r = report_from_json(nlohmann::json::parse(read_file(report)));
  for (int id : {left, right})
    if (id < 0 || id >= r.k) throw NotFound("cluster " + std::to_string(id) + " not in report");
  const Representative lrep = cluster_representative(l, r, left, c.max_depth);
  const Representative rrep = cluster_representative(l, r, right, c.max_depth);
  ComparisonGraph cg = compare(lrep, rrep, stat);
  write_atomic(out, comparison_to_dot(cg));
  if (json_out) write_atomic(*json_out, comparison_to_json(cg).dump(2) + "\n");
  log << "compare " << left << " vs " << right << ": " << cg.count(EdgeStyle::solid) << " solid, "
      << cg.count(EdgeStyle::dashed) << " dashed, " << cg.count(EdgeStyle::dotted) << " dotted edges\n";
  return kOk;
}

inline int cmd_inspect(const std::string& trace, const std::optional<std::string>& key,
                       std::optional<Timestamp> from, std::optional<Timestamp> to,
                       const std::optional<std::string>& snapshot, bool list_spans, std::ostream& out) {
  auto events = parse_trace(read_file(trace));
  StateDatabase db = build_state_db(events);
  if (snapshot) write_atomic(*snapshot, write_snapshot(db));
  const Timestamp a = from.value_or(db.trace_begin());
  const Timestamp b = to.value_or(db.trace_end() + 1);
  out << "events " << db.stats().events_consumed << ", keys " << db.table().size() << ", values "
      << db.stats().values << ", time [" << db.trace_begin() << ", " << db.trace_end() << "]\n";
  if (list_spans) {
    for (const auto& s : extract_spans(events).spans)
      out << "span " << s.span_id << " tid " << s.root_tid << " [" << s.t_start << ", " << s.t_end << ") "
          << fmt_us(s.duration()) << " us\n";
  }
  if (key) {
    const StateKey k = StateKey::parse(*key);
    if (!db.series(k)) throw NotFound("key " + *key + " not in database");
    for (const auto& v : db.query_range(k, a, b))
      out << k.path() << " [" << v.start << ", " << v.end << ") " << value_str(v.value) << "\n";
  }
  return kOk;
}

// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Off-CPU latency analysis over kernel-style event traces"};
  app.require_subcommand(1);

  std::string scenario_name = "lock";
  std::uint64_t seed = 1;
  std::optional<int> spans;
  std::optional<double> slow_fraction, fast_us, slow_us, jitter;
  std::optional<std::size_t> n_events;
  std::optional<int> workers;
  std::string synth_out = "trace.jsonl", synth_truth = "ground_truth.json";
  auto* synth = app.add_subcommand("synth", "Write a synthetic trace and its ground truth");
  synth->add_option("--scenario", scenario_name, "lock, cpu, disk or mixed")->capture_default_str();
  synth->add_option("--seed", seed, "Seed for every random choice")->capture_default_str();
  synth->add_option("--spans", spans, "Number of spans");
  synth->add_option("--slow-fraction", slow_fraction, "Share of contended spans, in [0, 1]");
  synth->add_option("--fast-us", fast_us, "Typical span length");
  synth->add_option("--slow-us", slow_us, "Typical contended span length");
  synth->add_option("--jitter", jitter, "Relative spread of drawn lengths");
  synth->add_option("--workers", workers, "Lock scenario worker count");
  synth->add_option("--events", n_events, "Mixed scenario event budget");
  synth->add_option("-o,--out", synth_out, "Trace output")->capture_default_str();
  synth->add_option("--truth", synth_truth, "Ground-truth output")->capture_default_str();

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-t,--trace", common.trace, "Trace file (JSONL, optionally gzip)")->required();
    sub->add_option("--max-depth", common.max_depth, "Recursion limit for graph walks")->capture_default_str();
    common.select.add_to(sub);
  };

  std::optional<std::string> span_id, json_out;
  std::optional<std::size_t> span_index;
  std::string dot_out = "graph.dot";
  DotOptions dot;
  bool no_pct = false;
  auto* graph = app.add_subcommand("graph", "Build the dependency graph of one span");
  add_common(graph);
  graph->add_option("--span", span_id, "Span id");
  graph->add_option("--index", span_index, "Span position in start order (default 0)");
  graph->add_option("-o,--out", dot_out, "DOT output")->capture_default_str();
  graph->add_option("--json", json_out, "Also write the graph as JSON");
  graph->add_flag("--no-percentages", no_pct, "Omit edge percentages");
  graph->add_option("--min-edge-us", dot.min_edge_us, "Hide lighter edges in the drawing");

  int k = 2;
  std::string report_out = "clusters.json";
  auto* cluster = app.add_subcommand("cluster", "Cluster spans by their feature vectors");
  add_common(cluster);
  cluster->add_option("-k", k, "Number of clusters")->capture_default_str();
  cluster->add_option("--seed", seed, "Seed for every random choice")->capture_default_str();
  cluster->add_option("-o,--out", report_out, "Report output")->capture_default_str();

  std::string report_in, stat_name = "count", cmp_out = "compare.dot";
  int left = 0, right = 1;
  auto* cmp = app.add_subcommand("compare", "Compare two cluster representatives");
  add_common(cmp);
  cmp->add_option("--report", report_in, "Cluster report from the cluster command")->required();
  cmp->add_option("--left", left, "Baseline cluster")->capture_default_str();
  cmp->add_option("--right", right, "Compared cluster")->capture_default_str();
  cmp->add_option("--stat", stat_name, "count or duration")->capture_default_str();
  cmp->add_option("-o,--out", cmp_out, "DOT output")->capture_default_str();
  cmp->add_option("--json", json_out, "Also write the comparison as JSON");

  std::string inspect_trace;
  std::optional<std::string> key, snapshot;
  std::optional<Timestamp> from, to;
  bool list_spans = false;
  auto* inspect = app.add_subcommand("inspect", "Print state database slices");
  inspect->add_option("-t,--trace", inspect_trace, "Trace file")->required();
  inspect->add_option("--key", key, "Key path, e.g. thread/42/state");
  inspect->add_option("--from", from, "Window start (ns)");
  inspect->add_option("--to", to, "Window end (ns)");
  inspect->add_option("--snapshot", snapshot, "Write the database snapshot here");
  inspect->add_flag("--spans", list_spans, "List the spans");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  }

  try {
    if (*synth) {
      ScenarioSpec spec = default_spec(parse_scenario(scenario_name));
      spec.seed = seed;
      if (spans) spec.n_spans = *spans;
      if (slow_fraction) spec.slow_fraction = *slow_fraction;
      if (fast_us) spec.fast_us = *fast_us;
      if (slow_us) spec.slow_us = *slow_us;
      if (jitter) spec.jitter = *jitter;
      if (workers) spec.workers = *workers;
      if (n_events) spec.n_events = *n_events;
      return cmd_synth(scenario_name, spec, synth_out, synth_truth, out);
    }
    if (*graph) {
      dot.percentages = !no_pct;
      if (span_id && span_index) throw Error(Errc::InvalidParameter, "--span and --index are exclusive");
      return cmd_graph(common, span_id, span_index, dot_out, json_out, dot, out);
    }
    if (*cluster) return cmd_cluster(common, k, seed, report_out, out);
    if (*cmp) return cmd_compare(common, report_in, left, right, parse_compare_stat(stat_name), cmp_out, json_out, out);
    if (*inspect) return cmd_inspect(inspect_trace, key, from, to, snapshot, list_spans, out);
  } catch (const NotFound& e) {
    err << "error: " << e.what() << "\n";
    return kNotFound;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}

}  // namespace offcpu::cli
