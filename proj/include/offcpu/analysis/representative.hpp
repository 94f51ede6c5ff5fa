#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "offcpu/error.hpp"
#include "offcpu/graph/depgraph.hpp"

namespace offcpu {

// Re-keys a single-execution graph so graphs from different executions can
// be merged. Threads become their comm; two threads sharing a comm get an
// ordinal ("apache2", "apache2#1", ...) with the root first, then by
// descending total time, then by tid. Syscall nodes keep their owner's new
// name in the identity.
inline DepGraph canonicalize(const DepGraph& g) {
  if (g.empty()) return g;
  std::map<std::string, std::vector<const DepNode*>> by_comm;
  for (const auto& [id, n] : g.nodes())
    if (n.kind == NodeKind::thread && n.tid != 0) by_comm[n.comm].push_back(&n);

  std::map<Tid, std::string> name_of;
  for (auto& [comm, members] : by_comm) {
    std::sort(members.begin(), members.end(), [&](const DepNode* a, const DepNode* b) {
      const bool ra = a->id == g.root_id(), rb = b->id == g.root_id();
      return std::make_tuple(!ra, -a->total, a->tid) < std::make_tuple(!rb, -b->total, b->tid);
    });
    for (std::size_t i = 0; i < members.size(); ++i)
      name_of[members[i]->tid] = i == 0 ? comm : comm + "#" + std::to_string(i);
  }

  std::map<std::string, DepNode> renamed;
  for (const auto& [id, n] : g.nodes()) {
    DepNode c = n;
    if (n.kind == NodeKind::thread && n.tid != 0) {
      c.label = name_of.at(n.tid);
      c.id = "thread:" + c.label;
      c.tid = 0;
    } else if (n.kind == NodeKind::syscall && n.tid != 0) {
      auto owner = name_of.find(n.tid);
      const std::string who = owner == name_of.end() ? std::to_string(n.tid) : owner->second;
      c.id = "syscall:" + who + ":" + n.label;
      c.tid = 0;
    }
    renamed.emplace(id, std::move(c));
  }

  DepGraph out(renamed.at(g.root_id()));
  out.node(out.root_id())->total = g.root().total;
  for (const auto& [id, n] : renamed) out.ensure_node(n).total = n.total;
  for (const auto& [key, e] : g.edges()) {
    const DepNode& s = renamed.at(e.src);
    const DepNode& d = renamed.at(e.dst);
    add_to_graph(out, DepEdge{s.id, d.id, e.weight, e.count, e.resources}, s, d);
  }
  out.meta() = g.meta();
  return out;
}

struct EdgeStats {
  double mean_weight = 0;  // ns
  double std_weight = 0;
  double mean_count = 0;
  double std_count = 0;
  std::size_t present = 0;  // graphs that contain the edge
  bool operator==(const EdgeStats&) const = default;
};

// Cluster summary: `graph` holds the union of nodes and edges with mean
// weights and mean node totals (ns, rounded); `stats` has the exact
// per-edge figures, where a graph lacking an edge counts as zero.
struct Representative {
  DepGraph graph;
  std::map<DepGraph::EdgeKey, EdgeStats> stats;
  std::size_t members = 0;
};

namespace detail {

inline void mean_std(const std::vector<double>& xs, double& mean, double& sd) {
  mean = 0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0;
  for (double x : xs) var += (x - mean) * (x - mean);
  sd = std::sqrt(var / static_cast<double>(xs.size()));
}

inline Duration round_ns(double x) { return static_cast<Duration>(std::llround(x)); }

}  // namespace detail

// `graphs` must already be canonicalized. Different roots are joined under a
// super root named "all".
inline Representative representative(const std::vector<DepGraph>& graphs) {
  if (graphs.empty()) throw Error(Errc::EmptyCluster, "representative of an empty cluster");
  DepGraph sum;
  MergeOptions opts;
  opts.roots = MergeOptions::Roots::super_root;
  for (const auto& g : graphs) sum = merge_graphs(sum, g, opts);

  const double n = static_cast<double>(graphs.size());
  Representative rep;
  rep.members = graphs.size();
  for (const auto& [key, e] : sum.edges()) {
    std::vector<double> w, c;
    EdgeStats s;
    for (const auto& g : graphs) {
      const DepEdge* x = g.edge(key.first, key.second);
      if (!x && key.first == sum.root_id() && key.second == g.root_id() && g.root_id() != sum.root_id()) {
        // Edge from the super root: the member's whole span.
        w.push_back(static_cast<double>(g.root().total));
        c.push_back(1.0);
        ++s.present;
        continue;
      }
      w.push_back(x ? static_cast<double>(x->weight) : 0.0);
      c.push_back(x ? static_cast<double>(x->count) : 0.0);
      if (x) ++s.present;
    }
    detail::mean_std(w, s.mean_weight, s.std_weight);
    detail::mean_std(c, s.mean_count, s.std_count);
    rep.stats[key] = s;
  }

  DepNode root = *sum.node(sum.root_id());
  root.total = detail::round_ns(static_cast<double>(root.total) / n);
  rep.graph = DepGraph(root);
  for (const auto& [id, node] : sum.nodes()) {
    DepNode m = node;
    m.total = detail::round_ns(static_cast<double>(node.total) / n);
    rep.graph.ensure_node(m).total = m.total;
  }
  for (const auto& [key, e] : sum.edges()) {
    const auto& s = rep.stats.at(key);
    DepEdge m{e.src, e.dst, std::max<Duration>(1, detail::round_ns(s.mean_weight)),
              std::max<std::int64_t>(1, std::llround(s.mean_count)), e.resources};
    add_to_graph(rep.graph, m, *sum.node(e.src), *sum.node(e.dst));
  }
  rep.graph.meta().span_id = "representative";
  return rep;
}

}  // namespace offcpu
