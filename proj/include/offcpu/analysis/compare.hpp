#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include "json.hpp"
#include "offcpu/analysis/representative.hpp"
#include "offcpu/error.hpp"
#include "offcpu/graph/export.hpp"

namespace offcpu {

enum class EdgeStyle { solid, dashed, dotted };  // both, left only, right only

constexpr std::string_view to_string(EdgeStyle s) {
  switch (s) {
    case EdgeStyle::solid: return "solid";
    case EdgeStyle::dashed: return "dashed";
    case EdgeStyle::dotted: return "dotted";
  }
  return "solid";
}

enum class CompareStat { count, duration };

inline CompareStat parse_compare_stat(std::string_view s) {
  if (s == "count") return CompareStat::count;
  if (s == "duration") return CompareStat::duration;
  throw Error(Errc::InvalidParameter, "unknown statistic \"" + std::string(s) + "\"");
}

// |z| bands: [0,0.5) [0.5,1) [1,2) [2,3) [3,inf).
inline int boldness_for(double abs_z) {
  if (abs_z < 0.5) return 1;
  if (abs_z < 1.0) return 2;
  if (abs_z < 2.0) return 3;
  if (abs_z < 3.0) return 4;
  return 5;
}

// Boldness of a shared edge from the left baseline's mean/std and the right
// mean. A zero-variance baseline is level 1 when unchanged and 5 otherwise.
inline int boldness(double mean_left, double std_left, double mean_right) {
  if (std_left == 0.0) return mean_left == mean_right ? 1 : 5;
  return boldness_for(std::abs((mean_right - mean_left) / std_left));
}

struct ComparisonEdge {
  std::string src, dst;
  EdgeStyle style = EdgeStyle::solid;
  int boldness = 0;  // 1..5 on solid edges, 0 otherwise
  std::optional<double> z;
  std::optional<EdgeStats> left, right;
};

struct ComparisonNode {
  DepNode node;
  bool in_left = false, in_right = false;
  int emphasis = 1;  // highest boldness among the node's solid edges
};

struct ComparisonGraph {
  CompareStat stat = CompareStat::count;
  std::string left_root, right_root;
  std::map<std::string, ComparisonNode> nodes;
  std::map<DepGraph::EdgeKey, ComparisonEdge> edges;

  std::size_t count(EdgeStyle s) const {
    std::size_t n = 0;
    for (const auto& [k, e] : edges) n += e.style == s;
    return n;
  }
};

inline ComparisonGraph compare(const Representative& left, const Representative& right,
                               CompareStat stat = CompareStat::count) {
  ComparisonGraph cg;
  cg.stat = stat;
  cg.left_root = left.graph.empty() ? "" : left.graph.root_id();
  cg.right_root = right.graph.empty() ? "" : right.graph.root_id();
  for (const auto& [id, n] : left.graph.nodes()) {
    auto& c = cg.nodes[id];
    c.node = n;
    c.in_left = true;
  }
  for (const auto& [id, n] : right.graph.nodes()) {
    auto [it, fresh] = cg.nodes.try_emplace(id);
    if (fresh) it->second.node = n;
    it->second.in_right = true;
  }
  auto pick = [&](const EdgeStats& s, bool mean) {
    if (stat == CompareStat::count) return mean ? s.mean_count : s.std_count;
    return mean ? s.mean_weight : s.std_weight;
  };
  for (const auto& [key, s] : left.stats) {
    auto& e = cg.edges[key];
    e.src = key.first;
    e.dst = key.second;
    e.left = s;
    e.style = EdgeStyle::dashed;
  }
  for (const auto& [key, s] : right.stats) {
    auto& e = cg.edges[key];
    e.src = key.first;
    e.dst = key.second;
    e.right = s;
    e.style = e.left ? EdgeStyle::solid : EdgeStyle::dotted;
  }
  for (auto& [key, e] : cg.edges) {
    if (e.style != EdgeStyle::solid) continue;
    const double ml = pick(*e.left, true), sl = pick(*e.left, false), mr = pick(*e.right, true);
    e.boldness = boldness(ml, sl, mr);
    if (sl != 0.0) e.z = (mr - ml) / sl;
    else if (ml == mr) e.z = 0.0;
    for (const auto& id : {e.src, e.dst}) {
      auto& n = cg.nodes.at(id);
      n.emphasis = std::max(n.emphasis, e.boldness);
    }
  }
  return cg;
}

inline std::string comparison_to_dot(const ComparisonGraph& cg) {
  std::ostringstream out;
  out << "digraph comparison {\n  rankdir=LR;\n";
  for (const auto& [id, n] : cg.nodes) {
    out << "  " << detail::dot_quote(id) << " [shape=" << detail::dot_shape(n.node.kind)
        << ", label=" << detail::dot_quote(n.node.label) << ", penwidth=" << n.emphasis;
    if (!n.in_left) out << ", style=dotted";
    else if (!n.in_right) out << ", style=dashed";
    out << "];\n";
  }
  for (const auto& [key, e] : cg.edges) {
    const EdgeStats& s = e.right ? *e.right : *e.left;
    std::string caption = std::to_string(detail::whole_us(detail::round_ns(s.mean_weight))) +
                          " \xC2\xB5s";
    out << "  " << detail::dot_quote(e.src) << " -> " << detail::dot_quote(e.dst)
        << " [style=" << to_string(e.style)
        << ", penwidth=" << (e.style == EdgeStyle::solid ? e.boldness : 1) << ", label=\""
        << caption << "\"];\n";
  }
  out << "}\n";
  return out.str();
}

inline nlohmann::ordered_json comparison_to_json(const ComparisonGraph& cg) {
  auto stats_json = [](const std::optional<EdgeStats>& s) -> nlohmann::ordered_json {
    if (!s) return nullptr;
    nlohmann::ordered_json o;
    o["mean_weight_us"] = s->mean_weight / 1000.0;
    o["std_weight_us"] = s->std_weight / 1000.0;
    o["mean_count"] = s->mean_count;
    o["std_count"] = s->std_count;
    o["present"] = s->present;
    return o;
  };
  nlohmann::ordered_json j;
  j["stat"] = cg.stat == CompareStat::count ? "count" : "duration";
  j["left_root"] = cg.left_root;
  j["right_root"] = cg.right_root;
  auto& nodes = j["nodes"] = nlohmann::ordered_json::array();
  for (const auto& [id, n] : cg.nodes) {
    nlohmann::ordered_json o;
    o["id"] = id;
    o["kind"] = to_string(n.node.kind);
    o["label"] = n.node.label;
    o["in_left"] = n.in_left;
    o["in_right"] = n.in_right;
    o["emphasis"] = n.emphasis;
    nodes.push_back(std::move(o));
  }
  auto& edges = j["edges"] = nlohmann::ordered_json::array();
  for (const auto& [key, e] : cg.edges) {
    nlohmann::ordered_json o;
    o["src"] = e.src;
    o["dst"] = e.dst;
    o["style"] = to_string(e.style);
    o["boldness"] = e.boldness;
    o["z"] = e.z ? nlohmann::ordered_json(*e.z) : nlohmann::ordered_json(nullptr);
    o["left"] = stats_json(e.left);
    o["right"] = stats_json(e.right);
    edges.push_back(std::move(o));
  }
  return j;
}

}  // namespace offcpu
