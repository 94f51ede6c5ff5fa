#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "offcpu/error.hpp"
#include "offcpu/trace/event.hpp"

namespace offcpu {

enum class NodeKind { thread, syscall, resource };

constexpr std::string_view to_string(NodeKind k) {
  switch (k) {
    case NodeKind::thread: return "thread";
    case NodeKind::syscall: return "syscall";
    case NodeKind::resource: return "resource";
  }
  return "thread";
}

inline constexpr std::string_view kCpuResource = "CPU";
inline constexpr std::string_view kDiskResource = "DISK";

struct DepNode {
  std::string id;  // identity, unique within a graph
  NodeKind kind = NodeKind::thread;
  std::string label;
  Tid tid = 0;       // thread nodes of a single execution; 0 once canonicalized
  std::string comm;  // thread nodes
  Duration total = 0;

  bool operator==(const DepNode&) const = default;

  static DepNode thread(Tid tid, std::string comm) {
    DepNode n;
    n.id = "thread:" + std::to_string(tid);
    n.kind = NodeKind::thread;
    n.label = comm + "-" + std::to_string(tid);
    n.tid = tid;
    n.comm = std::move(comm);
    return n;
  }

  // Syscall nodes belong to the waiting thread's context.
  static DepNode syscall(Tid owner, const std::string& name) {
    DepNode n;
    n.id = "syscall:" + std::to_string(owner) + ":" + name;
    n.kind = NodeKind::syscall;
    n.label = name;
    n.tid = owner;
    return n;
  }

  static DepNode resource(std::string_view name) {
    DepNode n;
    n.id = "resource:" + std::string(name);
    n.kind = NodeKind::resource;
    n.label = std::string(name);
    return n;
  }
};

// `src` waited on `dst` for `weight` nanoseconds over `count` episodes.
struct DepEdge {
  std::string src;
  std::string dst;
  Duration weight = 0;
  std::int64_t count = 0;
  std::set<std::string> resources;  // per-device / per-cpu detail for CPU and DISK edges

  bool operator==(const DepEdge&) const = default;
};

struct GraphMeta {
  std::string span_id;
  Timestamp t_start = 0;
  Timestamp t_end = 0;
  bool cycle_broken = false;
  bool depth_limited = false;

  bool operator==(const GraphMeta&) const = default;
};

struct MergeOptions {
  enum class Roots {
    require_same,  // RootConflict when roots differ
    adopt_left,    // keep g1's root (recursive sub-graph merges)
    super_root,    // new root `super_root_label` with an edge to each root
  };
  Roots roots = Roots::require_same;
  std::string super_root_label = "all";
};

class DepGraph {
 public:
  using EdgeKey = std::pair<std::string, std::string>;

  DepGraph() = default;
  explicit DepGraph(DepNode root) {
    root_ = root.id;
    nodes_.emplace(root.id, std::move(root));
  }

  bool empty() const { return nodes_.empty(); }
  const std::string& root_id() const { return root_; }
  const DepNode& root() const { return nodes_.at(root_); }
  const std::map<std::string, DepNode>& nodes() const { return nodes_; }
  const std::map<EdgeKey, DepEdge>& edges() const { return edges_; }
  GraphMeta& meta() { return meta_; }
  const GraphMeta& meta() const { return meta_; }

  const DepNode* node(const std::string& id) const {
    auto it = nodes_.find(id);
    return it == nodes_.end() ? nullptr : &it->second;
  }
  DepNode* node(const std::string& id) {
    auto it = nodes_.find(id);
    return it == nodes_.end() ? nullptr : &it->second;
  }

  const DepEdge* edge(const std::string& src, const std::string& dst) const {
    auto it = edges_.find({src, dst});
    return it == edges_.end() ? nullptr : &it->second;
  }

  // Inserts the node if its identity is new; returns the stored node.
  DepNode& ensure_node(const DepNode& n) {
    auto [it, fresh] = nodes_.try_emplace(n.id, n);
    if (fresh) it->second.total = 0;
    if (root_.empty()) root_ = n.id;
    return it->second;
  }

  void set_root(const std::string& id) {
    if (!nodes_.count(id)) throw Error(Errc::InvalidParameter, "root " + id + " is not a node");
    root_ = id;
  }

  std::vector<const DepEdge*> out_edges(const std::string& id) const {
    std::vector<const DepEdge*> out;
    for (auto it = edges_.lower_bound({id, std::string{}}); it != edges_.end() && it->first.first == id; ++it)
      out.push_back(&it->second);
    return out;
  }

  std::vector<const DepEdge*> in_edges(const std::string& id) const {
    std::vector<const DepEdge*> out;
    for (const auto& [k, e] : edges_)
      if (k.second == id) out.push_back(&e);
    return out;
  }

  // Sets non-root totals to their incoming waiting time and the root total
  // to `root_total`.
  void finalize_totals(Duration root_total) {
    for (auto& [id, n] : nodes_) n.total = 0;
    for (const auto& [k, e] : edges_) nodes_.at(k.second).total += e.weight;
    if (!root_.empty()) nodes_.at(root_).total = root_total;
  }

  bool operator==(const DepGraph&) const = default;

 private:
  friend DepGraph& add_to_graph(DepGraph&, const DepEdge&, const DepNode&, const DepNode&);
  friend DepGraph merge_graphs(const DepGraph&, const DepGraph&, const MergeOptions&);
  friend void merge_into(DepGraph&, const DepGraph&);

  std::string root_;
  std::map<std::string, DepNode> nodes_;
  std::map<EdgeKey, DepEdge> edges_;
  GraphMeta meta_;
};

// Adds one waiting episode. An existing (src, dst) edge accumulates weight
// and count; otherwise the edge and any missing endpoint nodes are inserted.
inline DepGraph& add_to_graph(DepGraph& g, const DepEdge& e, const DepNode& src, const DepNode& dst) {
  if (e.weight <= 0 || e.count <= 0) return g;
  g.ensure_node(src);
  g.ensure_node(dst);
  auto [it, fresh] = g.edges_.try_emplace({src.id, dst.id}, DepEdge{src.id, dst.id, 0, 0, {}});
  it->second.weight += e.weight;
  it->second.count += e.count;
  it->second.resources.insert(e.resources.begin(), e.resources.end());
  return g;
}

inline DepGraph& add_to_graph(DepGraph& g, const DepNode& src, const DepNode& dst, Duration weight,
                              std::string resource = {}) {
  DepEdge e{src.id, dst.id, weight, 1, {}};
  if (!resource.empty()) e.resources.insert(std::move(resource));
  return add_to_graph(g, e, src, dst);
}

// Union of nodes and edges; matching edges sum weight and count, matching
// nodes sum total time.
inline void merge_into(DepGraph& dst, const DepGraph& src) {
  for (const auto& [id, n] : src.nodes_) {
    auto [it, fresh] = dst.nodes_.try_emplace(id, n);
    if (!fresh) it->second.total += n.total;
  }
  for (const auto& [k, e] : src.edges_) {
    auto [it, fresh] = dst.edges_.try_emplace(k, e);
    if (!fresh) {
      it->second.weight += e.weight;
      it->second.count += e.count;
      it->second.resources.insert(e.resources.begin(), e.resources.end());
    }
  }
  dst.meta_.cycle_broken = dst.meta_.cycle_broken || src.meta_.cycle_broken;
  dst.meta_.depth_limited = dst.meta_.depth_limited || src.meta_.depth_limited;
  if (dst.root_.empty()) dst.root_ = src.root_;
}

inline DepGraph merge_graphs(const DepGraph& g1, const DepGraph& g2, const MergeOptions& opts = {}) {
  if (g2.empty()) return g1;
  if (g1.empty()) return g2;
  DepGraph out = g1;
  if (g1.root_ == g2.root_ || opts.roots == MergeOptions::Roots::adopt_left) {
    merge_into(out, g2);
    out.root_ = g1.root_;
    return out;
  }
  if (opts.roots == MergeOptions::Roots::require_same)
    throw Error(Errc::RootConflict, "graphs rooted at " + g1.root_ + " and " + g2.root_);
  merge_into(out, g2);
  DepNode super;
  super.id = "root:" + opts.super_root_label;
  super.kind = NodeKind::thread;
  super.label = opts.super_root_label;
  for (const DepGraph* g : {&g1, &g2}) {
    // A root that is already the super root is absorbed, not nested.
    if (g->root_ == super.id) continue;
    const DepNode& r = g->root();
    add_to_graph(out, DepEdge{super.id, r.id, r.total, 1, {}}, super, r);
    out.node(super.id)->total += r.total;
  }
  out.root_ = super.id;
  return out;
}

}  // namespace offcpu
