#pragma once

#include <algorithm>
#include <iterator>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "offcpu/error.hpp"
#include "offcpu/graph/depgraph.hpp"
#include "offcpu/state/database.hpp"
#include "offcpu/trace/spans.hpp"

namespace offcpu {

struct GraphOptions {
  // Maximum nesting of recursive sub-graph walks below the root.
  int max_depth = 16;
};

// Builds the waiting dependency graph of one thread over [ts_s, ts_e).
//
// Walks the thread's states in the window:
//   blocked on a thread  -> thread [-> syscall] -> waker, then the waker's own
//                           graph over the blocked interval is merged in
//   blocked on the disk  -> thread [-> syscall] -> DISK -> every other thread
//                           with outstanding requests, weighted by overlap
//   runnable             -> thread [-> syscall] -> CPU -> every thread that ran
//                           on the last cpu of the waiting thread
// Recursion into a thread is refused when that thread is already on the
// walk stack over an interval containing the new one (a cycle) or at the
// depth limit; both are flagged in the metadata. Otherwise only the parts of
// the interval not already walked for that thread in this build are walked,
// so each (thread, instant) is expanded at most once per graph.
class DepGraphBuilder {
 public:
  DepGraphBuilder(const StateDatabase& db, GraphOptions opts = {}) : db_(db), opts_(opts) {}

  DepGraph build(Tid root, Timestamp ts_s, Timestamp ts_e, std::string span_id = {}) {
    if (ts_s >= ts_e) throw Error(Errc::InvalidParameter, "empty graph window");
    label_time_ = ts_s;
    stack_.clear();
    walked_.clear();
    cycle_broken_ = false;
    depth_limited_ = false;
    stack_.push_back({root, ts_s, ts_e});
    walked_[root].emplace(ts_s, ts_e);
    DepGraph g = walk(root, ts_s, ts_e);
    stack_.clear();
    g.finalize_totals(ts_e - ts_s);
    g.meta() = GraphMeta{std::move(span_id), ts_s, ts_e, cycle_broken_, depth_limited_};
    return g;
  }

 private:
  struct Frame {
    Tid tid;
    Timestamp start, end;
  };

  DepNode thread_node(Tid tid) const { return DepNode::thread(tid, db_.comm_of(tid, label_time_)); }

  DepGraph walk(Tid a, Timestamp s, Timestamp e) {
    const DepNode self = thread_node(a);
    DepGraph g(self);
    for (const StateValue& st : db_.query_range(StateKey::thread(a, Attr::state), s, e)) {
      const auto& state = std::get<ThreadState>(st.value);
      const Duration d = st.duration();
      const auto ctx = db_.syscall_at(a, st.start);
      const DepNode src = ctx ? DepNode::syscall(a, *ctx) : self;

      if (state.waits_on_thread()) {
        if (ctx) add_to_graph(g, self, src, d);
        add_to_graph(g, src, thread_node(state.waker), d);
        recurse(g, state.waker, {st.start, st.end});
      } else if (state.is_blocked() && state.reason == BlockReason::disk) {
        const DepNode disk = DepNode::resource(kDiskResource);
        auto uses = db_.disk_activity(std::nullopt, st.start, st.end);
        DepEdge to_disk{src.id, disk.id, d, 1, {}};
        for (const auto& u : uses)
          if (u.tid == a) to_disk.resources = u.devices;
        if (ctx) add_to_graph(g, self, src, d);
        add_to_graph(g, to_disk, src, disk);
        for (const auto& u : uses) {
          if (u.tid == a) continue;
          add_to_graph(g, DepEdge{disk.id, "", u.overlap, 1, u.devices}, disk, thread_node(u.tid));
          for (const Interval& iv : u.intervals) recurse(g, u.tid, iv);
        }
      } else if (state.kind == ThreadState::Kind::runnable) {
        const DepNode cpu_node = DepNode::resource(kCpuResource);
        const auto cpu = db_.last_cpu_at(a, st.start);
        const std::string cpu_name = cpu ? "cpu" + std::to_string(*cpu) : std::string{};
        if (ctx) add_to_graph(g, self, src, d);
        add_to_graph(g, src, cpu_node, d, cpu_name);
        if (!cpu) continue;
        for (const auto& u : db_.cpu_activity(*cpu, st.start, st.end)) {
          if (u.tid == a) continue;
          add_to_graph(g, cpu_node, thread_node(u.tid), u.overlap, cpu_name);
          for (const Interval& iv : u.intervals) recurse(g, u.tid, iv);
        }
      }
    }
    return g;
  }

  void recurse(DepGraph& g, Tid b, Interval iv) {
    for (const Frame& f : stack_) {
      if (f.tid == b && f.start <= iv.start && iv.end <= f.end) {
        cycle_broken_ = true;
        return;
      }
    }
    if (static_cast<int>(stack_.size()) > opts_.max_depth) {
      if (!uncovered(walked_[b], iv).empty()) depth_limited_ = true;
      return;
    }
    for (const Interval& part : claim(walked_[b], iv)) {
      stack_.push_back({b, part.start, part.end});
      DepGraph sub = walk(b, part.start, part.end);
      stack_.pop_back();
      merge_into(g, sub);
    }
  }

  // start -> end, disjoint and non-touching
  using Cover = std::map<Timestamp, Timestamp>;

  static std::vector<Interval> uncovered(const Cover& c, Interval iv) {
    std::vector<Interval> gaps;
    Timestamp at = iv.start;
    auto it = c.upper_bound(at);
    if (it != c.begin()) --it;
    for (; it != c.end() && it->first < iv.end && at < iv.end; ++it) {
      if (it->second <= at) continue;
      if (it->first > at) gaps.push_back({at, it->first});
      at = std::max(at, it->second);
    }
    if (at < iv.end) gaps.push_back({at, iv.end});
    return gaps;
  }

  // Returns the parts of iv not yet covered and adds iv to the cover.
  static std::vector<Interval> claim(Cover& c, Interval iv) {
    auto gaps = uncovered(c, iv);
    if (gaps.empty()) return gaps;
    Timestamp lo = iv.start, hi = iv.end;
    auto it = c.upper_bound(lo);
    if (it != c.begin() && std::prev(it)->second >= lo) --it;
    while (it != c.end() && it->first <= hi) {
      lo = std::min(lo, it->first);
      hi = std::max(hi, it->second);
      it = c.erase(it);
    }
    c.emplace(lo, hi);
    return gaps;
  }

  const StateDatabase& db_;
  GraphOptions opts_;
  Timestamp label_time_ = 0;
  std::vector<Frame> stack_;
  std::unordered_map<Tid, Cover> walked_;
  bool cycle_broken_ = false;
  bool depth_limited_ = false;
};

inline DepGraph build_depgraph(Tid root, const StateDatabase& db, Timestamp ts_s, Timestamp ts_e,
                               const GraphOptions& opts = {}) {
  return DepGraphBuilder(db, opts).build(root, ts_s, ts_e);
}

inline DepGraph build_depgraph(const ExecutionSpan& span, const StateDatabase& db,
                               const GraphOptions& opts = {}) {
  return DepGraphBuilder(db, opts).build(span.root_tid, span.t_start, span.t_end, span.span_id);
}

}  // namespace offcpu
