#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace offcpu {

// Trace timestamps are integer nanoseconds since the trace origin.
using Timestamp = std::int64_t;
using Duration = std::int64_t;
// Thread id. 0 is reserved for the per-cpu idle task.
using Tid = std::int64_t;
using CpuId = std::int32_t;

constexpr Tid kIdleTid = 0;

inline double to_us(Duration ns) { return static_cast<double>(ns) / 1000.0; }

enum class PrevState { runnable, blocked };
enum class WakerContext { task, irq, softirq, hrtimer };

namespace event {

struct SchedSwitch {
  Tid prev_tid = 0;
  PrevState prev_state = PrevState::runnable;
  Tid next_tid = 0;
  bool operator==(const SchedSwitch&) const = default;
};
struct SchedWakeup {
  Tid waker_tid = 0;
  Tid wakee_tid = 0;
  WakerContext waker_context = WakerContext::task;
  bool operator==(const SchedWakeup&) const = default;
};
struct SyscallEntry {
  std::string name;
  bool operator==(const SyscallEntry&) const = default;
};
struct SyscallExit {
  std::string name;
  bool operator==(const SyscallExit&) const = default;
};
struct IrqEntry {
  std::int64_t irq = 0;
  bool operator==(const IrqEntry&) const = default;
};
struct IrqExit {
  std::int64_t irq = 0;
  bool operator==(const IrqExit&) const = default;
};
struct SoftirqEntry {
  std::int64_t vec = 0;
  bool operator==(const SoftirqEntry&) const = default;
};
struct SoftirqExit {
  std::int64_t vec = 0;
  bool operator==(const SoftirqExit&) const = default;
};
struct HrtimerEntry {
  bool operator==(const HrtimerEntry&) const = default;
};
struct HrtimerExit {
  bool operator==(const HrtimerExit&) const = default;
};
struct BlockRqIssue {
  std::string dev;
  bool operator==(const BlockRqIssue&) const = default;
};
struct BlockRqComplete {
  std::string dev;
  bool operator==(const BlockRqComplete&) const = default;
};
struct PageFault {
  bool operator==(const PageFault&) const = default;
};
struct IoRead {
  std::int64_t bytes = 0;
  bool operator==(const IoRead&) const = default;
};
struct IoWrite {
  std::int64_t bytes = 0;
  bool operator==(const IoWrite&) const = default;
};
struct SpanBegin {
  std::string span_id;
  bool operator==(const SpanBegin&) const = default;
};
struct SpanEnd {
  std::string span_id;
  bool operator==(const SpanEnd&) const = default;
};

}  // namespace event

// Alternative order defines EventKind; keep the two in sync.
using Payload = std::variant<event::SchedSwitch, event::SchedWakeup, event::SyscallEntry,
                             event::SyscallExit, event::IrqEntry, event::IrqExit,
                             event::SoftirqEntry, event::SoftirqExit, event::HrtimerEntry,
                             event::HrtimerExit, event::BlockRqIssue, event::BlockRqComplete,
                             event::PageFault, event::IoRead, event::IoWrite, event::SpanBegin,
                             event::SpanEnd>;

enum class EventKind {
  sched_switch,
  sched_wakeup,
  syscall_entry,
  syscall_exit,
  irq_entry,
  irq_exit,
  softirq_entry,
  softirq_exit,
  hrtimer_expire_entry,
  hrtimer_expire_exit,
  block_rq_issue,
  block_rq_complete,
  page_fault,
  io_read,
  io_write,
  span_begin,
  span_end,
};

constexpr std::size_t kEventKindCount = std::variant_size_v<Payload>;

constexpr std::string_view to_string(EventKind kind) {
  constexpr std::string_view names[] = {
      "sched_switch",  "sched_wakeup",         "syscall_entry",       "syscall_exit",
      "irq_entry",     "irq_exit",             "softirq_entry",       "softirq_exit",
      "hrtimer_expire_entry", "hrtimer_expire_exit", "block_rq_issue", "block_rq_complete",
      "page_fault",    "io_read",              "io_write",            "span_begin",
      "span_end"};
  static_assert(std::size(names) == kEventKindCount);
  return names[static_cast<std::size_t>(kind)];
}

inline std::optional<EventKind> parse_event_kind(std::string_view text) {
  for (std::size_t i = 0; i < kEventKindCount; ++i) {
    auto kind = static_cast<EventKind>(i);
    if (to_string(kind) == text) return kind;
  }
  return std::nullopt;
}

constexpr std::string_view to_string(PrevState s) {
  return s == PrevState::runnable ? "runnable" : "blocked";
}

constexpr std::string_view to_string(WakerContext c) {
  switch (c) {
    case WakerContext::task: return "task";
    case WakerContext::irq: return "irq";
    case WakerContext::softirq: return "softirq";
    case WakerContext::hrtimer: return "hrtimer";
  }
  return "task";
}

struct TraceEvent {
  Timestamp ts = 0;
  CpuId cpu = 0;
  Tid tid = 0;
  std::string comm;
  Payload payload;

  EventKind kind() const { return static_cast<EventKind>(payload.index()); }

  template <typename T>
  const T* as() const {
    return std::get_if<T>(&payload);
  }

  bool operator==(const TraceEvent&) const = default;
};

}  // namespace offcpu
