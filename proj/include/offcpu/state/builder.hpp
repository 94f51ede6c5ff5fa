#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "offcpu/error.hpp"
#include "offcpu/state/database.hpp"
#include "offcpu/trace/event.hpp"

namespace offcpu {

// Linux softirq vector numbers.
namespace softirq {
constexpr std::int64_t HI = 0;
constexpr std::int64_t TIMER = 1;
constexpr std::int64_t NET_TX = 2;
constexpr std::int64_t NET_RX = 3;
constexpr std::int64_t BLOCK = 4;
constexpr std::int64_t IRQ_POLL = 5;
constexpr std::int64_t TASKLET = 6;
constexpr std::int64_t SCHED = 7;
constexpr std::int64_t HRTIMER = 8;
constexpr std::int64_t RCU = 9;
}  // namespace softirq

// Mapping from wakeup context to the blocked reason assigned to the wakee.
struct StateEngineConfig {
  std::map<std::int64_t, BlockReason> softirq_reasons = {
      {softirq::TIMER, BlockReason::timer},
      {softirq::NET_TX, BlockReason::network},
      {softirq::NET_RX, BlockReason::network},
      {softirq::BLOCK, BlockReason::disk},
  };
  std::map<std::int64_t, BlockReason> irq_reasons;
  // Task wakeups of a thread blocked inside this syscall count as futex waits.
  std::string futex_syscall = "futex";
};

namespace detail {

// Open/closed bookkeeping for one key while the database is being built.
class Track {
 public:
  void set(Timestamp t, Value v) {
    if (open_) {
      if (value_ == v) return;
      if (t == start_) {
        // Replaces a zero-length value; rejoin the previous interval when the
        // value reverts to it.
        if (!closed_.empty() && closed_.back().end == t && closed_.back().value == v) {
          start_ = closed_.back().start;
          closed_.pop_back();
        }
        value_ = std::move(v);
        return;
      }
      closed_.push_back({start_, t, std::move(value_)});
    } else if (!closed_.empty() && closed_.back().end == t && closed_.back().value == v) {
      // Closed and reopened with the same value at one instant.
      t = closed_.back().start;
      closed_.pop_back();
    }
    open_ = true;
    start_ = t;
    value_ = std::move(v);
  }

  void close(Timestamp t) {
    if (!open_) return;
    open_ = false;
    if (t > start_) closed_.push_back({start_, t, std::move(value_)});
  }

  bool is_open() const { return open_; }
  Value* open_value() { return open_ ? &value_ : nullptr; }
  std::vector<StateValue> take() { return std::move(closed_); }

 private:
  std::vector<StateValue> closed_;
  bool open_ = false;
  Timestamp start_ = 0;
  Value value_;
};

}  // namespace detail

// Applies the event-to-state mapping rules in one pass over a timestamp
// ordered, nesting-valid event sequence.
class StateBuilder {
 public:
  explicit StateBuilder(StateEngineConfig config = {}) : config_(std::move(config)) {}

  void consume(const TraceEvent& ev) {
    ++stats_.events_consumed;
    if (!started_) {
      begin_ = ev.ts;
      started_ = true;
    }
    end_ = ev.ts;
    now_ = ev.ts;
    if (ev.tid != kIdleTid) thread(ev.tid).comm.set(ev.ts, ev.comm);
    std::visit([&](const auto& p) { apply(ev, p); }, ev.payload);
  }

  StateDatabase finish() && {
    StateDatabase::Table table;
    auto put = [&](StateKey key, detail::Track& track, Timestamp end) {
      track.close(end);
      auto values = track.take();
      if (!values.empty()) table.emplace(std::move(key), std::move(values));
    };
    for (auto& [tid, th] : threads_) {
      put(StateKey::thread(tid, Attr::state), th.state, end_);
      put(StateKey::thread(tid, Attr::syscall), th.syscall, end_);
      put(StateKey::thread(tid, Attr::comm), th.comm, end_);
      put(StateKey::thread(tid, Attr::last_cpu), th.last_cpu, end_);
      put(StateKey::thread(tid, Attr::page_faults), th.page_faults, kForever);
      put(StateKey::thread(tid, Attr::bytes_read), th.bytes_read, kForever);
      put(StateKey::thread(tid, Attr::bytes_written), th.bytes_written, kForever);
    }
    for (auto& [cpu, c] : cpus_) put(StateKey::cpu(cpu), c.track, end_);
    for (auto& [k, d] : disks_) put(StateKey::disk(k.first, k.second), d.track, end_);
    return StateDatabase(std::move(table), begin_, end_, stats_);
  }

 private:
  enum class Run { unknown, running, runnable, blocked };

  struct Thread {
    Run run = Run::unknown;
    CpuId cpu = -1;  // valid while running
    std::optional<std::string> syscall_name;
    std::int64_t faults = 0, read = 0, written = 0;
    detail::Track state, syscall, comm, last_cpu, page_faults, bytes_read, bytes_written;
  };

  struct Cpu {
    std::optional<Tid> current;
    // (family, number): 0 irq, 1 softirq, 2 hrtimer
    std::vector<std::pair<int, std::int64_t>> interrupts;
    detail::Track track;
  };

  struct Disk {
    std::int64_t outstanding = 0;
    detail::Track track;
  };

  Thread& thread(Tid tid) { return threads_[tid]; }

  Cpu& cpu(CpuId id) { return cpus_[id]; }

  [[noreturn]] void fail(Errc code, const std::string& what) const {
    throw Error(code, "t=" + std::to_string(now_) + ": " + what);
  }

  void set_current(CpuId c, Tid tid) {
    Cpu& k = cpu(c);
    k.current = tid;
    k.track.set(now_, static_cast<std::int64_t>(tid));
  }

  void start_running(Tid tid, CpuId c) {
    Thread& th = thread(tid);
    th.run = Run::running;
    th.cpu = c;
    th.state.set(now_, cpu(c).interrupts.empty() ? ThreadState::running()
                                                 : ThreadState::interrupted());
    th.last_cpu.set(now_, static_cast<std::int64_t>(c));
  }

  // The event's thread must be the one executing on its cpu.
  void ensure_running(Tid tid, CpuId c) {
    Cpu& k = cpu(c);
    if (k.current && *k.current != tid)
      fail(Errc::SwitchConflict, "tid " + std::to_string(tid) + " acts on cpu " +
                                     std::to_string(c) + " while tid " +
                                     std::to_string(*k.current) + " is current");
    if (tid == kIdleTid) {
      if (!k.current) set_current(c, kIdleTid);
      return;
    }
    Thread& th = thread(tid);
    if (th.run == Run::unknown) {
      set_current(c, tid);
      start_running(tid, c);
      return;
    }
    if (th.run != Run::running || th.cpu != c)
      fail(Errc::InconsistentState,
           "tid " + std::to_string(tid) + " acts on cpu " + std::to_string(c) +
               " but is not running there");
    if (!k.current) set_current(c, tid);
  }

  void apply(const TraceEvent& ev, const event::SchedSwitch& p) {
    Cpu& k = cpu(ev.cpu);
    if (!k.interrupts.empty())
      fail(Errc::InconsistentState, "sched_switch inside an interrupt handler");
    ensure_running(p.prev_tid, ev.cpu);
    if (p.prev_tid != kIdleTid) {
      Thread& prev = thread(p.prev_tid);
      prev.cpu = -1;
      if (p.prev_state == PrevState::runnable) {
        prev.run = Run::runnable;
        prev.state.set(now_, ThreadState::runnable());
      } else {
        prev.run = Run::blocked;
        prev.state.set(now_, ThreadState::blocked());
      }
    }
    if (p.next_tid != kIdleTid) {
      Thread& next = thread(p.next_tid);
      if (next.run == Run::running)
        fail(Errc::SwitchConflict, "tid " + std::to_string(p.next_tid) +
                                       " switched in on cpu " + std::to_string(ev.cpu) +
                                       " while running on cpu " + std::to_string(next.cpu));
      // A blocked thread switched in without a wakeup keeps reason unknown.
      start_running(p.next_tid, ev.cpu);
    }
    set_current(ev.cpu, p.next_tid);
  }

  BlockReason wake_reason(const TraceEvent& ev, const event::SchedWakeup& p, const Thread& wakee) {
    auto innermost = [&](int family) -> std::optional<std::int64_t> {
      const auto& stack = cpu(ev.cpu).interrupts;
      for (auto it = stack.rbegin(); it != stack.rend(); ++it)
        if (it->first == family) return it->second;
      return std::nullopt;
    };
    auto lookup = [](const std::map<std::int64_t, BlockReason>& m, std::optional<std::int64_t> n) {
      if (!n) return BlockReason::unknown;
      auto it = m.find(*n);
      return it == m.end() ? BlockReason::unknown : it->second;
    };
    switch (p.waker_context) {
      case WakerContext::task:
        if (p.waker_tid == kIdleTid) return BlockReason::unknown;
        if (wakee.syscall_name && *wakee.syscall_name == config_.futex_syscall)
          return BlockReason::futex;
        return BlockReason::task;
      case WakerContext::hrtimer: return BlockReason::timer;
      case WakerContext::softirq: return lookup(config_.softirq_reasons, innermost(1));
      case WakerContext::irq: return lookup(config_.irq_reasons, innermost(0));
    }
    return BlockReason::unknown;
  }

  void apply(const TraceEvent& ev, const event::SchedWakeup& p) {
    ensure_running(ev.tid, ev.cpu);
    Thread& wakee = thread(p.wakee_tid);
    switch (wakee.run) {
      case Run::unknown:
        wakee.run = Run::runnable;
        wakee.state.set(now_, ThreadState::runnable());
        return;
      case Run::blocked: {
        BlockReason reason = wake_reason(ev, p, wakee);
        Tid waker = (reason == BlockReason::task || reason == BlockReason::futex) ? p.waker_tid : 0;
        // Reason is only known now; rewrite the still-open blocked value.
        if (Value* open = wakee.state.open_value()) *open = ThreadState::blocked(reason, waker);
        wakee.run = Run::runnable;
        wakee.state.set(now_, ThreadState::runnable());
        return;
      }
      case Run::running:
      case Run::runnable: return;  // spurious wakeup
    }
  }

  void apply(const TraceEvent& ev, const event::SyscallEntry& p) {
    ensure_running(ev.tid, ev.cpu);
    Thread& th = thread(ev.tid);
    if (th.syscall_name)
      fail(Errc::NestingViolation, "syscall_entry " + p.name + " inside " + *th.syscall_name);
    th.syscall_name = p.name;
    th.syscall.set(now_, p.name);
  }

  void apply(const TraceEvent& ev, const event::SyscallExit& p) {
    ensure_running(ev.tid, ev.cpu);
    Thread& th = thread(ev.tid);
    if (!th.syscall_name || *th.syscall_name != p.name)
      fail(Errc::NestingViolation, "syscall_exit " + p.name + " without matching entry");
    th.syscall_name.reset();
    th.syscall.close(now_);
  }

  void enter_interrupt(const TraceEvent& ev, int family, std::int64_t number) {
    ensure_running(ev.tid, ev.cpu);
    Cpu& k = cpu(ev.cpu);
    k.interrupts.emplace_back(family, number);
    Tid cur = k.current.value_or(kIdleTid);
    if (cur != kIdleTid) thread(cur).state.set(now_, ThreadState::interrupted());
  }

  void exit_interrupt(const TraceEvent& ev, int family, std::int64_t number) {
    ensure_running(ev.tid, ev.cpu);
    Cpu& k = cpu(ev.cpu);
    if (k.interrupts.empty() || k.interrupts.back() != std::make_pair(family, number))
      fail(Errc::NestingViolation,
           std::string(to_string(ev.kind())) + " without matching entry on cpu " +
               std::to_string(ev.cpu));
    k.interrupts.pop_back();
    Tid cur = k.current.value_or(kIdleTid);
    if (k.interrupts.empty() && cur != kIdleTid)
      thread(cur).state.set(now_, ThreadState::running());
  }

  void apply(const TraceEvent& ev, const event::IrqEntry& p) { enter_interrupt(ev, 0, p.irq); }
  void apply(const TraceEvent& ev, const event::IrqExit& p) { exit_interrupt(ev, 0, p.irq); }
  void apply(const TraceEvent& ev, const event::SoftirqEntry& p) { enter_interrupt(ev, 1, p.vec); }
  void apply(const TraceEvent& ev, const event::SoftirqExit& p) { exit_interrupt(ev, 1, p.vec); }
  void apply(const TraceEvent& ev, const event::HrtimerEntry&) { enter_interrupt(ev, 2, 0); }
  void apply(const TraceEvent& ev, const event::HrtimerExit&) { exit_interrupt(ev, 2, 0); }

  void apply(const TraceEvent& ev, const event::BlockRqIssue& p) {
    ensure_running(ev.tid, ev.cpu);
    Disk& d = disks_[{p.dev, ev.tid}];
    if (d.outstanding++ == 0) d.track.set(now_, static_cast<std::int64_t>(ev.tid));
  }

  // The event's tid names the request owner, which need not be on-cpu.
  void apply(const TraceEvent& ev, const event::BlockRqComplete& p) {
    auto it = disks_.find({p.dev, ev.tid});
    if (it == disks_.end() || it->second.outstanding == 0)
      fail(Errc::NestingViolation, "block_rq_complete on " + p.dev + " without issue");
    if (--it->second.outstanding == 0) it->second.track.close(now_);
  }

  void apply(const TraceEvent& ev, const event::PageFault&) {
    ensure_running(ev.tid, ev.cpu);
    Thread& th = thread(ev.tid);
    th.page_faults.set(now_, ++th.faults);
  }

  void apply(const TraceEvent& ev, const event::IoRead& p) {
    ensure_running(ev.tid, ev.cpu);
    Thread& th = thread(ev.tid);
    if (p.bytes > 0) th.bytes_read.set(now_, th.read += p.bytes);
  }

  void apply(const TraceEvent& ev, const event::IoWrite& p) {
    ensure_running(ev.tid, ev.cpu);
    Thread& th = thread(ev.tid);
    if (p.bytes > 0) th.bytes_written.set(now_, th.written += p.bytes);
  }

  // Span markers establish a thread seen for the first time but never change
  // a known state.
  void mark(const TraceEvent& ev) {
    if (ev.tid != kIdleTid && thread(ev.tid).run == Run::unknown) ensure_running(ev.tid, ev.cpu);
  }
  void apply(const TraceEvent& ev, const event::SpanBegin&) { mark(ev); }
  void apply(const TraceEvent& ev, const event::SpanEnd&) { mark(ev); }

  StateEngineConfig config_;
  StateDatabase::Stats stats_;
  bool started_ = false;
  Timestamp begin_ = 0, end_ = 0, now_ = 0;
  std::unordered_map<Tid, Thread> threads_;
  std::map<CpuId, Cpu> cpus_;
  std::map<std::pair<std::string, Tid>, Disk> disks_;
};

inline StateDatabase build_state_db(const std::vector<TraceEvent>& events,
                                    const StateEngineConfig& config = {}) {
  StateBuilder builder(config);
  for (const auto& ev : events) builder.consume(ev);
  return std::move(builder).finish();
}

}  // namespace offcpu
