#pragma once

#include <cstdint>
#include <set>
#include <sstream>
#include <string>

#include "json.hpp"
#include "offcpu/error.hpp"
#include "offcpu/graph/depgraph.hpp"

namespace offcpu {

struct DotOptions {
  bool percentages = true;
  // Display filter only: edges lighter than this are left out of the drawing.
  double min_edge_us = 0.0;
};

namespace detail {

inline std::string dot_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

// Whole microseconds, rounded half up.
inline std::int64_t whole_us(Duration ns) { return (ns + 500) / 1000; }

inline const char* dot_shape(NodeKind k) {
  switch (k) {
    case NodeKind::thread: return "box";
    case NodeKind::syscall: return "ellipse";
    case NodeKind::resource: return "diamond";
  }
  return "box";
}

// Floor keeps the shares leaving one node at or below 100%.
inline std::int64_t percent_of(Duration part, Duration whole) {
  if (whole <= 0) return 0;
  return static_cast<std::int64_t>((static_cast<__int128>(part) * 100) / whole);
}

inline std::string node_caption(const DepNode& n) {
  return n.label + " (" + std::to_string(whole_us(n.total)) + " \xC2\xB5s)";
}

}  // namespace detail

// Nodes and edges come out in identity order, so equal graphs print equal
// text.
inline std::string to_dot(const DepGraph& g, const DotOptions& opts = {}) {
  std::ostringstream out;
  out << "digraph depgraph {\n";
  out << "  rankdir=LR;\n";
  std::set<std::string> shown;
  std::ostringstream edges;
  for (const auto& [key, e] : g.edges()) {
    if (static_cast<double>(e.weight) < opts.min_edge_us * 1000.0) continue;
    shown.insert(e.src);
    shown.insert(e.dst);
    std::string caption = std::to_string(detail::whole_us(e.weight)) + " \xC2\xB5s";
    if (opts.percentages) {
      const DepNode* src = g.node(e.src);
      caption += "\\n" + std::to_string(detail::percent_of(e.weight, src ? src->total : 0)) + "%";
    }
    edges << "  " << detail::dot_quote(e.src) << " -> " << detail::dot_quote(e.dst)
          << " [label=\"" << caption << "\"];\n";
  }
  if (!g.empty()) shown.insert(g.root_id());
  for (const auto& [id, n] : g.nodes()) {
    if (!shown.count(id)) continue;
    out << "  " << detail::dot_quote(id) << " [shape=" << detail::dot_shape(n.kind)
        << ", label=" << detail::dot_quote(detail::node_caption(n));
    if (id == g.root_id()) out << ", style=bold";
    out << "];\n";
  }
  out << edges.str() << "}\n";
  return out.str();
}

inline nlohmann::ordered_json graph_to_json(const DepGraph& g) {
  nlohmann::ordered_json j;
  j["root"] = g.root_id();
  j["span_id"] = g.meta().span_id;
  j["t_start"] = g.meta().t_start;
  j["t_end"] = g.meta().t_end;
  j["cycle_broken"] = g.meta().cycle_broken;
  j["depth_limited"] = g.meta().depth_limited;
  auto& nodes = j["nodes"] = nlohmann::ordered_json::array();
  for (const auto& [id, n] : g.nodes()) {
    nlohmann::ordered_json o;
    o["id"] = id;
    o["kind"] = to_string(n.kind);
    o["label"] = n.label;
    o["total_us"] = to_us(n.total);
    o["total_ns"] = n.total;
    if (n.kind == NodeKind::thread) o["comm"] = n.comm;
    if (n.tid != 0) o["tid"] = n.tid;
    nodes.push_back(std::move(o));
  }
  auto& edges = j["edges"] = nlohmann::ordered_json::array();
  for (const auto& [key, e] : g.edges()) {
    nlohmann::ordered_json o;
    o["src"] = e.src;
    o["dst"] = e.dst;
    o["weight_us"] = to_us(e.weight);
    o["weight_ns"] = e.weight;
    o["count"] = e.count;
    if (!e.resources.empty()) o["resources"] = e.resources;
    edges.push_back(std::move(o));
  }
  return j;
}

inline DepGraph graph_from_json(const nlohmann::json& j) {
  auto bad = [](const std::string& what) { return Error(Errc::MalformedRecord, "graph json: " + what); };
  if (!j.is_object() || !j.contains("nodes") || !j.contains("edges")) throw bad("missing nodes/edges");
  auto kind_of = [&](const std::string& s) {
    if (s == "thread") return NodeKind::thread;
    if (s == "syscall") return NodeKind::syscall;
    if (s == "resource") return NodeKind::resource;
    throw bad("unknown node kind " + s);
  };
  DepGraph g;
  try {
    std::map<std::string, DepNode> nodes;
    for (const auto& o : j.at("nodes")) {
      DepNode n;
      n.id = o.at("id").get<std::string>();
      n.kind = kind_of(o.at("kind").get<std::string>());
      n.label = o.at("label").get<std::string>();
      n.comm = o.value("comm", std::string{});
      n.tid = o.value("tid", Tid{0});
      n.total = o.at("total_ns").get<Duration>();
      nodes[n.id] = n;
      g.ensure_node(n).total = n.total;
    }
    for (const auto& o : j.at("edges")) {
      DepEdge e;
      e.src = o.at("src").get<std::string>();
      e.dst = o.at("dst").get<std::string>();
      e.weight = o.at("weight_ns").get<Duration>();
      e.count = o.at("count").get<std::int64_t>();
      if (o.contains("resources")) e.resources = o.at("resources").get<std::set<std::string>>();
      if (!nodes.count(e.src) || !nodes.count(e.dst)) throw bad("edge endpoint is not a node");
      add_to_graph(g, e, nodes[e.src], nodes[e.dst]);
    }
    if (j.contains("root") && !j["root"].get<std::string>().empty()) {
      const auto root = j["root"].get<std::string>();
      if (!g.node(root)) throw bad("root " + root + " is not a node");
      g.set_root(root);
    }
    g.meta().span_id = j.value("span_id", std::string{});
    g.meta().t_start = j.value("t_start", Timestamp{0});
    g.meta().t_end = j.value("t_end", Timestamp{0});
    g.meta().cycle_broken = j.value("cycle_broken", false);
    g.meta().depth_limited = j.value("depth_limited", false);
  } catch (const nlohmann::json::exception& e) {
    throw bad(e.what());
  }
  return g;
}

}  // namespace offcpu
