#pragma once

#include <charconv>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <variant>

#include "offcpu/error.hpp"
#include "offcpu/trace/event.hpp"

namespace offcpu {

enum class BlockReason { task, disk, timer, network, futex, unknown };

constexpr std::string_view to_string(BlockReason r) {
  switch (r) {
    case BlockReason::task: return "task";
    case BlockReason::disk: return "disk";
    case BlockReason::timer: return "timer";
    case BlockReason::network: return "network";
    case BlockReason::futex: return "futex";
    case BlockReason::unknown: return "unknown";
  }
  return "unknown";
}

// Value held by thread/{tid}/state. `waker` is set for task and futex
// blocks only.
struct ThreadState {
  enum class Kind { running, runnable, interrupted, blocked };

  Kind kind = Kind::running;
  BlockReason reason = BlockReason::unknown;
  Tid waker = 0;

  static ThreadState running() { return {Kind::running}; }
  static ThreadState runnable() { return {Kind::runnable}; }
  static ThreadState interrupted() { return {Kind::interrupted}; }
  static ThreadState blocked(BlockReason r = BlockReason::unknown, Tid waker = 0) {
    return {Kind::blocked, r, waker};
  }

  bool is_blocked() const { return kind == Kind::blocked; }
  bool waits_on_thread() const {
    return kind == Kind::blocked && (reason == BlockReason::task || reason == BlockReason::futex) &&
           waker != 0;
  }

  bool operator==(const ThreadState&) const = default;

  std::string str() const {
    switch (kind) {
      case Kind::running: return "running";
      case Kind::runnable: return "runnable";
      case Kind::interrupted: return "interrupted";
      case Kind::blocked: break;
    }
    std::string out = "blocked(";
    out += to_string(reason);
    if (reason == BlockReason::task || reason == BlockReason::futex)
      out += ":" + std::to_string(waker);
    return out + ")";
  }

  static std::optional<ThreadState> parse(std::string_view s) {
    if (s == "running") return running();
    if (s == "runnable") return runnable();
    if (s == "interrupted") return interrupted();
    if (s.size() < 9 || s.substr(0, 8) != "blocked(" || s.back() != ')') return std::nullopt;
    std::string_view inner = s.substr(8, s.size() - 9);
    std::string_view reason = inner;
    Tid waker = 0;
    if (auto colon = inner.find(':'); colon != std::string_view::npos) {
      reason = inner.substr(0, colon);
      auto digits = inner.substr(colon + 1);
      auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), waker);
      if (ec != std::errc{} || p != digits.data() + digits.size()) return std::nullopt;
    }
    for (auto r : {BlockReason::task, BlockReason::disk, BlockReason::timer, BlockReason::network,
                   BlockReason::futex, BlockReason::unknown})
      if (to_string(r) == reason) return blocked(r, waker);
    return std::nullopt;
  }
};

using Value = std::variant<std::int64_t, std::string, ThreadState>;

enum class Scope { thread, cpu, disk };

enum class Attr {
  state,          // thread: ThreadState
  syscall,        // thread: syscall name while inside one
  comm,           // thread: process name
  last_cpu,       // thread: cpu the thread last ran on (step function)
  page_faults,    // thread: cumulative counter
  bytes_read,     // thread: cumulative counter
  bytes_written,  // thread: cumulative counter
  current_tid,    // cpu: tid running on the cpu, 0 for idle
  active_tid,     // disk: tid with outstanding requests on the device
};

constexpr std::string_view to_string(Attr a) {
  switch (a) {
    case Attr::state: return "state";
    case Attr::syscall: return "syscall";
    case Attr::comm: return "comm";
    case Attr::last_cpu: return "last_cpu";
    case Attr::page_faults: return "page_faults";
    case Attr::bytes_read: return "bytes_read";
    case Attr::bytes_written: return "bytes_written";
    case Attr::current_tid: return "current_tid";
    case Attr::active_tid: return "active_tid";
  }
  return "state";
}

constexpr bool is_counter(Attr a) {
  return a == Attr::page_faults || a == Attr::bytes_read || a == Attr::bytes_written;
}

// Structured attribute path:
//   thread/{tid}/{attr}, cpu/{idx}/current_tid, disk/{dev}/active_tid/{tid}
struct StateKey {
  Scope scope = Scope::thread;
  std::int64_t id = 0;  // tid for thread and disk scopes, cpu index for cpu scope
  std::string dev;      // disk scope only
  Attr attr = Attr::state;

  static StateKey thread(Tid tid, Attr attr) { return {Scope::thread, tid, {}, attr}; }
  static StateKey cpu(CpuId cpu) { return {Scope::cpu, cpu, {}, Attr::current_tid}; }
  static StateKey disk(std::string dev, Tid tid) {
    return {Scope::disk, tid, std::move(dev), Attr::active_tid};
  }

  auto tie() const { return std::tie(scope, dev, id, attr); }
  bool operator<(const StateKey& o) const { return tie() < o.tie(); }
  bool operator==(const StateKey& o) const { return tie() == o.tie(); }

  std::string path() const {
    switch (scope) {
      case Scope::thread:
        return "thread/" + std::to_string(id) + "/" + std::string(to_string(attr));
      case Scope::cpu: return "cpu/" + std::to_string(id) + "/current_tid";
      case Scope::disk: return "disk/" + dev + "/active_tid/" + std::to_string(id);
    }
    return {};
  }

  static StateKey parse(std::string_view path) {
    auto bad = [&] { return Error(Errc::InvalidParameter, "bad state key \"" + std::string(path) + "\""); };
    auto next = [&](std::string_view& rest) {
      auto slash = rest.find('/');
      std::string_view head = rest.substr(0, slash);
      rest = slash == std::string_view::npos ? std::string_view{} : rest.substr(slash + 1);
      return head;
    };
    auto number = [&](std::string_view s) {
      std::int64_t v = 0;
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (s.empty() || ec != std::errc{} || p != s.data() + s.size()) throw bad();
      return v;
    };
    std::string_view rest = path;
    std::string_view scope = next(rest);
    if (scope == "thread") {
      Tid tid = number(next(rest));
      std::string_view attr = rest;
      for (auto a : {Attr::state, Attr::syscall, Attr::comm, Attr::last_cpu, Attr::page_faults,
                     Attr::bytes_read, Attr::bytes_written})
        if (to_string(a) == attr) return thread(tid, a);
      throw bad();
    }
    if (scope == "cpu") {
      auto idx = number(next(rest));
      if (rest != "current_tid") throw bad();
      return cpu(static_cast<CpuId>(idx));
    }
    if (scope == "disk") {
      auto tail = path.rfind("/active_tid/");
      if (tail == std::string_view::npos || tail <= 5) throw bad();
      std::string dev(path.substr(5, tail - 5));
      return disk(std::move(dev), number(path.substr(tail + 12)));
    }
    throw bad();
  }
};

// One interval-keyed attribute value, [start, end).
struct StateValue {
  Timestamp start = 0;
  Timestamp end = 0;
  Value value;

  Duration duration() const { return end - start; }
  bool operator==(const StateValue&) const = default;
};

inline std::string value_str(const Value& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::int64_t>) return std::to_string(x);
        else if constexpr (std::is_same_v<T, std::string>) return x;
        else return x.str();
      },
      v);
}

}  // namespace offcpu
