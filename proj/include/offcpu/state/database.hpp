#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "offcpu/state/value.hpp"

namespace offcpu {

// Half-open time interval [start, end).
struct Interval {
  Timestamp start = 0;
  Timestamp end = 0;
  Duration length() const { return end - start; }
  bool operator==(const Interval&) const = default;
};

// Per-thread use of a resource (cpu or disk) within a query window.
struct ResourceUse {
  Tid tid = 0;
  Duration overlap = 0;             // total length of `intervals`
  std::vector<Interval> intervals;  // disjoint, sorted, clipped to the window
  std::set<std::string> devices;    // disk queries only
  bool operator==(const ResourceUse&) const = default;
};

constexpr Timestamp kForever = std::numeric_limits<Timestamp>::max();

// Interval-indexed attribute history. Each key holds a start-sorted list of
// disjoint intervals, so point lookups are a binary search and range scans
// start from a binary search on interval ends. Immutable once built; every
// query is const and safe to run concurrently.
class StateDatabase {
 public:
  using Series = std::vector<StateValue>;
  using Table = std::map<StateKey, Series>;

  struct Stats {
    std::size_t events_consumed = 0;
    std::size_t values = 0;
  };

  StateDatabase() = default;
  StateDatabase(Table table, Timestamp trace_begin, Timestamp trace_end, Stats stats)
      : table_(std::move(table)), begin_(trace_begin), end_(trace_end), stats_(stats) {
    stats_.values = 0;
    for (const auto& [k, s] : table_) stats_.values += s.size();
  }

  Timestamp trace_begin() const { return begin_; }
  Timestamp trace_end() const { return end_; }
  const Stats& stats() const { return stats_; }
  const Table& table() const { return table_; }

  const Series* series(const StateKey& key) const {
    auto it = table_.find(key);
    return it == table_.end() ? nullptr : &it->second;
  }

  std::optional<Value> query_at(const StateKey& key, Timestamp t) const {
    const Series* s = series(key);
    if (!s) return std::nullopt;
    auto it = std::upper_bound(s->begin(), s->end(), t,
                               [](Timestamp x, const StateValue& v) { return x < v.start; });
    if (it == s->begin()) return std::nullopt;
    --it;
    if (t < it->end) return it->value;
    return std::nullopt;
  }

  // Values intersecting [a, b), clipped to the window, ordered by start.
  std::vector<StateValue> query_range(const StateKey& key, Timestamp a, Timestamp b) const {
    std::vector<StateValue> out;
    const Series* s = series(key);
    if (!s || a >= b) return out;
    auto it = std::upper_bound(s->begin(), s->end(), a,
                               [](Timestamp x, const StateValue& v) { return x < v.end; });
    for (; it != s->end() && it->start < b; ++it)
      out.push_back({std::max(it->start, a), std::min(it->end, b), it->value});
    return out;
  }

  std::optional<ThreadState> thread_state_at(Tid tid, Timestamp t) const {
    auto v = query_at(StateKey::thread(tid, Attr::state), t);
    if (!v) return std::nullopt;
    return std::get<ThreadState>(*v);
  }

  std::optional<std::string> syscall_at(Tid tid, Timestamp t) const {
    auto v = query_at(StateKey::thread(tid, Attr::syscall), t);
    if (!v) return std::nullopt;
    return std::get<std::string>(*v);
  }

  // Last cpu the thread ran on at or before t.
  std::optional<CpuId> last_cpu_at(Tid tid, Timestamp t) const {
    auto v = query_at(StateKey::thread(tid, Attr::last_cpu), t);
    if (!v) return std::nullopt;
    return static_cast<CpuId>(std::get<std::int64_t>(*v));
  }

  // Process name at t; falls back to the first name the thread ever had.
  std::string comm_of(Tid tid, Timestamp t) const {
    if (tid == kIdleTid) return "swapper";
    auto key = StateKey::thread(tid, Attr::comm);
    if (auto v = query_at(key, t)) return std::get<std::string>(*v);
    if (const Series* s = series(key); s && !s->empty()) {
      auto it = std::upper_bound(s->begin(), s->end(), t,
                                 [](Timestamp x, const StateValue& v) { return x < v.start; });
      if (it == s->end()) --it;
      return std::get<std::string>(it->value);
    }
    return "?";
  }

  // Cumulative counter value over all events strictly before t.
  std::int64_t counter_before(Tid tid, Attr attr, Timestamp t) const {
    const Series* s = series(StateKey::thread(tid, attr));
    if (!s) return 0;
    auto it = std::lower_bound(s->begin(), s->end(), t,
                               [](const StateValue& v, Timestamp x) { return v.start < x; });
    if (it == s->begin()) return 0;
    return std::get<std::int64_t>(std::prev(it)->value);
  }

  // Counter increments from events with timestamps in [a, b).
  std::int64_t counter_delta(Tid tid, Attr attr, Timestamp a, Timestamp b) const {
    return counter_before(tid, attr, b) - counter_before(tid, attr, a);
  }

  std::vector<Tid> threads() const {
    std::vector<Tid> out;
    for (const auto& [k, s] : table_)
      if (k.scope == Scope::thread && k.attr == Attr::state) out.push_back(k.id);
    return out;
  }

  std::vector<CpuId> cpus() const {
    std::vector<CpuId> out;
    for (const auto& [k, s] : table_)
      if (k.scope == Scope::cpu) out.push_back(static_cast<CpuId>(k.id));
    return out;
  }

  // Threads running on `cpu` within [a, b), idle excluded.
  std::vector<ResourceUse> cpu_activity(CpuId cpu, Timestamp a, Timestamp b) const {
    std::map<Tid, std::vector<Interval>> per_tid;
    for (const auto& v : query_range(StateKey::cpu(cpu), a, b)) {
      Tid tid = std::get<std::int64_t>(v.value);
      if (tid != kIdleTid) per_tid[tid].push_back({v.start, v.end});
    }
    return collect(std::move(per_tid));
  }

  // Threads with outstanding block requests within [a, b); all devices when
  // `dev` is empty.
  std::vector<ResourceUse> disk_activity(const std::optional<std::string>& dev, Timestamp a,
                                         Timestamp b) const {
    std::map<Tid, std::vector<Interval>> per_tid;
    std::map<Tid, std::set<std::string>> devices;
    StateKey lo{Scope::disk, std::numeric_limits<std::int64_t>::min(), dev.value_or(""),
                Attr::state};
    for (auto it = table_.lower_bound(lo); it != table_.end(); ++it) {
      const StateKey& k = it->first;
      if (k.scope != Scope::disk) break;
      if (dev && k.dev != *dev) break;
      for (const auto& v : query_range(k, a, b)) {
        per_tid[k.id].push_back({v.start, v.end});
        devices[k.id].insert(k.dev);
      }
    }
    auto out = collect(std::move(per_tid));
    for (auto& u : out) u.devices = std::move(devices[u.tid]);
    return out;
  }

  std::vector<std::pair<Tid, Duration>> threads_on_cpu(CpuId cpu, Timestamp a, Timestamp b) const {
    return totals(cpu_activity(cpu, a, b));
  }

  std::vector<std::pair<Tid, Duration>> threads_using_disk(const std::optional<std::string>& dev,
                                                           Timestamp a, Timestamp b) const {
    return totals(disk_activity(dev, a, b));
  }

 private:
  static std::vector<ResourceUse> collect(std::map<Tid, std::vector<Interval>> per_tid) {
    std::vector<ResourceUse> out;
    for (auto& [tid, ivs] : per_tid) {
      std::sort(ivs.begin(), ivs.end(),
                [](const Interval& x, const Interval& y) { return x.start < y.start; });
      ResourceUse use{tid, 0, {}, {}};
      for (const auto& iv : ivs) {
        if (!use.intervals.empty() && iv.start <= use.intervals.back().end) {
          use.intervals.back().end = std::max(use.intervals.back().end, iv.end);
        } else {
          use.intervals.push_back(iv);
        }
      }
      for (const auto& iv : use.intervals) use.overlap += iv.length();
      if (use.overlap > 0) out.push_back(std::move(use));
    }
    return out;
  }

  static std::vector<std::pair<Tid, Duration>> totals(const std::vector<ResourceUse>& uses) {
    std::vector<std::pair<Tid, Duration>> out;
    out.reserve(uses.size());
    for (const auto& u : uses) out.emplace_back(u.tid, u.overlap);
    return out;
  }

  Table table_;
  Timestamp begin_ = 0;
  Timestamp end_ = 0;
  Stats stats_;
};

}  // namespace offcpu
