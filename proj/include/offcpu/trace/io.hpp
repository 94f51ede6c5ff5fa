#pragma once

#include <zlib.h>

#include <cstdint>
#include <fstream>
#include <iterator>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "offcpu/error.hpp"
#include "offcpu/trace/event.hpp"

namespace offcpu {

struct ReadOptions {
  // Reject exits without a matching entry (syscall, interrupt and block
  // request families).
  bool validate_nesting = true;
};

namespace detail {

inline bool is_gzip(std::string_view bytes) {
  return bytes.size() >= 2 && static_cast<unsigned char>(bytes[0]) == 0x1f &&
         static_cast<unsigned char>(bytes[1]) == 0x8b;
}

inline std::string gunzip(std::string_view bytes) {
  z_stream zs{};
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK)
    throw Error(Errc::MalformedRecord, "cannot initialise gzip decoder");
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(bytes.data()));
  zs.avail_in = static_cast<uInt>(bytes.size());
  std::string out;
  char buf[1 << 16];
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = reinterpret_cast<Bytef*>(buf);
    zs.avail_out = sizeof(buf);
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc == Z_STREAM_END && zs.avail_in > 0) {
      // concatenated gzip members
      out.append(buf, sizeof(buf) - zs.avail_out);
      inflateReset(&zs);
      rc = Z_OK;
      continue;
    }
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw Error(Errc::MalformedRecord, "corrupt gzip stream");
    }
    out.append(buf, sizeof(buf) - zs.avail_out);
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw Error(Errc::MalformedRecord, "truncated gzip stream");
    }
  }
  inflateEnd(&zs);
  return out;
}

using json = nlohmann::json;

inline const json& require(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end())
    throw Error(Errc::MalformedRecord, std::string("missing key \"") + key + "\"", line);
  return *it;
}

inline std::int64_t require_int(const json& obj, const char* key, std::size_t line) {
  const json& v = require(obj, key, line);
  if (!v.is_number_integer())
    throw Error(Errc::MalformedRecord, std::string("key \"") + key + "\" must be an integer",
                line);
  if (v.is_number_unsigned() && v.get<std::uint64_t>() > INT64_MAX)
    throw Error(Errc::MalformedRecord, std::string("key \"") + key + "\" out of range", line);
  return v.get<std::int64_t>();
}

inline std::int64_t require_non_negative(const json& obj, const char* key, std::size_t line) {
  std::int64_t v = require_int(obj, key, line);
  if (v < 0)
    throw Error(Errc::MalformedRecord, std::string("key \"") + key + "\" must be >= 0", line);
  return v;
}

inline std::string require_string(const json& obj, const char* key, std::size_t line) {
  const json& v = require(obj, key, line);
  if (!v.is_string())
    throw Error(Errc::MalformedRecord, std::string("key \"") + key + "\" must be a string",
                line);
  return v.get<std::string>();
}

inline Payload parse_payload(EventKind kind, const json& obj, std::size_t line) {
  using namespace event;
  switch (kind) {
    case EventKind::sched_switch: {
      SchedSwitch p;
      p.prev_tid = require_non_negative(obj, "prev_tid", line);
      p.next_tid = require_non_negative(obj, "next_tid", line);
      std::string st = require_string(obj, "prev_state", line);
      if (st == "runnable") {
        p.prev_state = PrevState::runnable;
      } else if (st == "blocked") {
        p.prev_state = PrevState::blocked;
      } else {
        throw Error(Errc::MalformedRecord, "prev_state must be runnable|blocked", line);
      }
      if (p.prev_tid == p.next_tid)
        throw Error(Errc::MalformedRecord, "sched_switch prev_tid equals next_tid", line);
      return p;
    }
    case EventKind::sched_wakeup: {
      SchedWakeup p;
      p.waker_tid = require_non_negative(obj, "waker_tid", line);
      p.wakee_tid = require_non_negative(obj, "wakee_tid", line);
      std::string ctx = require_string(obj, "waker_context", line);
      if (ctx == "task") {
        p.waker_context = WakerContext::task;
      } else if (ctx == "irq") {
        p.waker_context = WakerContext::irq;
      } else if (ctx == "softirq") {
        p.waker_context = WakerContext::softirq;
      } else if (ctx == "hrtimer") {
        p.waker_context = WakerContext::hrtimer;
      } else {
        throw Error(Errc::MalformedRecord, "waker_context must be task|irq|softirq|hrtimer", line);
      }
      if (p.wakee_tid == kIdleTid)
        throw Error(Errc::MalformedRecord, "sched_wakeup of the idle task", line);
      return p;
    }
    case EventKind::syscall_entry: return SyscallEntry{require_string(obj, "name", line)};
    case EventKind::syscall_exit: return SyscallExit{require_string(obj, "name", line)};
    case EventKind::irq_entry: return IrqEntry{require_int(obj, "irq", line)};
    case EventKind::irq_exit: return IrqExit{require_int(obj, "irq", line)};
    case EventKind::softirq_entry: return SoftirqEntry{require_int(obj, "vec", line)};
    case EventKind::softirq_exit: return SoftirqExit{require_int(obj, "vec", line)};
    case EventKind::hrtimer_expire_entry: return HrtimerEntry{};
    case EventKind::hrtimer_expire_exit: return HrtimerExit{};
    case EventKind::block_rq_issue: return BlockRqIssue{require_string(obj, "dev", line)};
    case EventKind::block_rq_complete: return BlockRqComplete{require_string(obj, "dev", line)};
    case EventKind::page_fault: return PageFault{};
    case EventKind::io_read: return IoRead{require_non_negative(obj, "bytes", line)};
    case EventKind::io_write: return IoWrite{require_non_negative(obj, "bytes", line)};
    case EventKind::span_begin: return SpanBegin{require_string(obj, "span_id", line)};
    case EventKind::span_end: return SpanEnd{require_string(obj, "span_id", line)};
  }
  throw Error(Errc::UnknownEventKind, "unhandled kind", line);
}

// Tracks entry/exit pairing while reading. Syscalls and block requests pair
// per thread; interrupt handlers pair per (thread, cpu) since the idle task
// runs on every cpu at once.
class NestingChecker {
 public:
  void check(const TraceEvent& ev, std::size_t line) {
    using namespace event;
    std::visit(
        [&](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, SyscallEntry>) {
            auto [it, fresh] = syscalls_.try_emplace(ev.tid, p.name);
            if (!fresh)
              throw Error(Errc::NestingViolation,
                          "syscall_entry " + p.name + " while tid " + std::to_string(ev.tid) +
                              " is inside " + it->second,
                          line);
          } else if constexpr (std::is_same_v<T, SyscallExit>) {
            auto it = syscalls_.find(ev.tid);
            if (it == syscalls_.end() || it->second != p.name)
              throw Error(Errc::NestingViolation,
                          "syscall_exit " + p.name + " without matching entry on tid " +
                              std::to_string(ev.tid),
                          line);
            syscalls_.erase(it);
          } else if constexpr (std::is_same_v<T, IrqEntry>) {
            interrupts_[{ev.tid, ev.cpu}].push_back({0, p.irq});
          } else if constexpr (std::is_same_v<T, IrqExit>) {
            pop_interrupt(ev, 0, p.irq, line);
          } else if constexpr (std::is_same_v<T, SoftirqEntry>) {
            interrupts_[{ev.tid, ev.cpu}].push_back({1, p.vec});
          } else if constexpr (std::is_same_v<T, SoftirqExit>) {
            pop_interrupt(ev, 1, p.vec, line);
          } else if constexpr (std::is_same_v<T, HrtimerEntry>) {
            interrupts_[{ev.tid, ev.cpu}].push_back({2, 0});
          } else if constexpr (std::is_same_v<T, HrtimerExit>) {
            pop_interrupt(ev, 2, 0, line);
          } else if constexpr (std::is_same_v<T, BlockRqIssue>) {
            ++requests_[{ev.tid, p.dev}];
          } else if constexpr (std::is_same_v<T, BlockRqComplete>) {
            auto it = requests_.find({ev.tid, p.dev});
            if (it == requests_.end() || it->second == 0)
              throw Error(Errc::NestingViolation,
                          "block_rq_complete on " + p.dev + " without issue by tid " +
                              std::to_string(ev.tid),
                          line);
            if (--it->second == 0) requests_.erase(it);
          }
        },
        ev.payload);
  }

 private:
  void pop_interrupt(const TraceEvent& ev, int family, std::int64_t number, std::size_t line) {
    auto it = interrupts_.find({ev.tid, ev.cpu});
    if (it == interrupts_.end() || it->second.empty() || it->second.back().first != family ||
        it->second.back().second != number)
      throw Error(Errc::NestingViolation,
                  std::string(to_string(ev.kind())) + " without matching entry on cpu " +
                      std::to_string(ev.cpu),
                  line);
    it->second.pop_back();
    if (it->second.empty()) interrupts_.erase(it);
  }

  std::map<Tid, std::string> syscalls_;
  std::map<std::pair<Tid, CpuId>, std::vector<std::pair<int, std::int64_t>>> interrupts_;
  std::map<std::pair<Tid, std::string>, std::int64_t> requests_;
};

inline std::string_view trim(std::string_view s) {
  auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && ws(s.back())) s.remove_suffix(1);
  return s;
}

}  // namespace detail

// Parses one JSONL record. `line` is only used for error positions.
inline TraceEvent parse_event(std::string_view text, std::size_t line = 0) {
  using detail::json;
  json obj = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (obj.is_discarded() || !obj.is_object())
    throw Error(Errc::MalformedRecord, "not a JSON object", line);
  TraceEvent ev;
  ev.ts = detail::require_int(obj, "ts", line);
  std::int64_t cpu = detail::require_non_negative(obj, "cpu", line);
  if (cpu > INT32_MAX) throw Error(Errc::MalformedRecord, "cpu out of range", line);
  ev.cpu = static_cast<CpuId>(cpu);
  ev.tid = detail::require_non_negative(obj, "tid", line);
  ev.comm = detail::require_string(obj, "comm", line);
  std::string kind_text = detail::require_string(obj, "kind", line);
  auto kind = parse_event_kind(kind_text);
  if (!kind) throw Error(Errc::UnknownEventKind, "unknown kind \"" + kind_text + "\"", line);
  ev.payload = detail::parse_payload(*kind, obj, line);
  return ev;
}

// Parses a whole trace held in memory (plain or gzip-compressed JSONL).
inline std::vector<TraceEvent> parse_trace(std::string_view bytes, const ReadOptions& opts = {}) {
  std::string inflated;
  if (detail::is_gzip(bytes)) {
    inflated = detail::gunzip(bytes);
    bytes = inflated;
  }
  std::vector<TraceEvent> events;
  detail::NestingChecker nesting;
  std::size_t line = 0;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) nl = bytes.size();
    std::string_view text = detail::trim(bytes.substr(pos, nl - pos));
    pos = nl + 1;
    ++line;
    if (text.empty()) continue;
    TraceEvent ev = parse_event(text, line);
    if (!events.empty() && ev.ts < events.back().ts)
      throw Error(Errc::NonMonotonicTimestamp,
                  "ts " + std::to_string(ev.ts) + " precedes " + std::to_string(events.back().ts),
                  line);
    if (opts.validate_nesting) nesting.check(ev, line);
    events.push_back(std::move(ev));
  }
  return events;
}

inline std::vector<TraceEvent> read_trace(std::istream& in, const ReadOptions& opts = {}) {
  std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return parse_trace(bytes, opts);
}

inline std::vector<TraceEvent> read_trace_file(const std::string& path,
                                               const ReadOptions& opts = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::InvalidParameter, "cannot open trace file " + path);
  return read_trace(in, opts);
}

inline nlohmann::ordered_json event_to_json(const TraceEvent& ev) {
  using namespace event;
  nlohmann::ordered_json j;
  j["ts"] = ev.ts;
  j["cpu"] = ev.cpu;
  j["tid"] = ev.tid;
  j["comm"] = ev.comm;
  j["kind"] = std::string(to_string(ev.kind()));
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, SchedSwitch>) {
          j["prev_tid"] = p.prev_tid;
          j["prev_state"] = std::string(to_string(p.prev_state));
          j["next_tid"] = p.next_tid;
        } else if constexpr (std::is_same_v<T, SchedWakeup>) {
          j["waker_tid"] = p.waker_tid;
          j["wakee_tid"] = p.wakee_tid;
          j["waker_context"] = std::string(to_string(p.waker_context));
        } else if constexpr (std::is_same_v<T, SyscallEntry> || std::is_same_v<T, SyscallExit>) {
          j["name"] = p.name;
        } else if constexpr (std::is_same_v<T, IrqEntry> || std::is_same_v<T, IrqExit>) {
          j["irq"] = p.irq;
        } else if constexpr (std::is_same_v<T, SoftirqEntry> || std::is_same_v<T, SoftirqExit>) {
          j["vec"] = p.vec;
        } else if constexpr (std::is_same_v<T, BlockRqIssue> ||
                             std::is_same_v<T, BlockRqComplete>) {
          j["dev"] = p.dev;
        } else if constexpr (std::is_same_v<T, IoRead> || std::is_same_v<T, IoWrite>) {
          j["bytes"] = p.bytes;
        } else if constexpr (std::is_same_v<T, SpanBegin> || std::is_same_v<T, SpanEnd>) {
          j["span_id"] = p.span_id;
        }
      },
      ev.payload);
  return j;
}

inline void write_trace(std::ostream& out, const std::vector<TraceEvent>& events) {
  for (const auto& ev : events) out << event_to_json(ev).dump() << '\n';
}

inline std::string write_trace(const std::vector<TraceEvent>& events) {
  std::ostringstream out;
  write_trace(out, events);
  return out.str();
}

}  // namespace offcpu
