#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "offcpu/error.hpp"
#include "offcpu/trace/event.hpp"

namespace offcpu {

struct ExecutionSpan {
  std::string span_id;
  Tid root_tid = 0;
  Timestamp t_start = 0;
  Timestamp t_end = 0;
  std::optional<std::string> label;

  Duration duration() const { return t_end - t_start; }
  bool operator==(const ExecutionSpan&) const = default;
};

struct OpenSpan {
  std::string span_id;
  Tid root_tid = 0;
  Timestamp t_start = 0;
  bool operator==(const OpenSpan&) const = default;
};

// Matches one delimiter event. `name` filters on the syscall name for
// syscall kinds and on the span id for span kinds.
struct EventMatcher {
  EventKind kind = EventKind::span_begin;
  std::optional<std::string> name;

  bool matches(const TraceEvent& ev) const {
    if (ev.kind() != kind) return false;
    if (!name) return true;
    if (auto* p = ev.as<event::SyscallEntry>()) return p->name == *name;
    if (auto* p = ev.as<event::SyscallExit>()) return p->name == *name;
    if (auto* p = ev.as<event::SpanBegin>()) return p->span_id == *name;
    if (auto* p = ev.as<event::SpanEnd>()) return p->span_id == *name;
    return true;
  }

  // "kind" or "kind:name", e.g. "syscall_entry:accept4".
  static EventMatcher parse(std::string_view text) {
    EventMatcher m;
    std::string_view kind_text = text;
    if (auto colon = text.find(':'); colon != std::string_view::npos) {
      kind_text = text.substr(0, colon);
      m.name = std::string(text.substr(colon + 1));
    }
    auto kind = parse_event_kind(kind_text);
    if (!kind)
      throw Error(Errc::InvalidParameter, "unknown delimiter kind \"" + std::string(kind_text) + "\"");
    m.kind = *kind;
    return m;
  }
};

struct DelimiterSpec {
  EventMatcher begin{EventKind::span_begin, std::nullopt};
  EventMatcher end{EventKind::span_end, std::nullopt};
  std::optional<Tid> root_tid;
  std::optional<std::string> root_comm;

  // Explicit span_begin/span_end pairs match on span_id; every other
  // delimiter pairs begin/end on the same thread.
  bool pairs_by_span_id() const {
    return begin.kind == EventKind::span_begin && end.kind == EventKind::span_end;
  }

  bool selects_root(const TraceEvent& ev) const {
    if (root_tid && ev.tid != *root_tid) return false;
    if (root_comm && ev.comm != *root_comm) return false;
    return true;
  }
};

struct SpanSet {
  std::vector<ExecutionSpan> spans;  // ordered by (t_start, span_id)
  std::vector<OpenSpan> open;        // begins without an end, same order

  const ExecutionSpan* find(std::string_view span_id) const {
    for (const auto& s : spans)
      if (s.span_id == span_id) return &s;
    return nullptr;
  }
};

inline SpanSet extract_spans(const std::vector<TraceEvent>& events,
                             const DelimiterSpec& spec = {}) {
  SpanSet out;
  std::map<std::string, OpenSpan> open_by_id;
  std::map<Tid, std::vector<OpenSpan>> open_by_tid;
  std::map<Tid, std::size_t> ordinal;
  const bool by_id = spec.pairs_by_span_id();

  auto close = [&](OpenSpan&& o, Timestamp t_end) {
    if (t_end <= o.t_start) return;  // zero-length spans carry no execution
    out.spans.push_back({std::move(o.span_id), o.root_tid, o.t_start, t_end, std::nullopt});
  };

  for (const auto& ev : events) {
    if (!spec.selects_root(ev)) continue;
    if (spec.begin.matches(ev)) {
      if (by_id) {
        const auto& id = std::get<event::SpanBegin>(ev.payload).span_id;
        if (open_by_id.count(id))
          throw Error(Errc::OverlappingSpan, "span " + id + " begins twice");
        open_by_id.emplace(id, OpenSpan{id, ev.tid, ev.ts});
      } else {
        std::string id = std::to_string(ev.tid) + ":" + std::to_string(++ordinal[ev.tid]);
        open_by_tid[ev.tid].push_back(OpenSpan{std::move(id), ev.tid, ev.ts});
      }
      continue;
    }
    if (spec.end.matches(ev)) {
      if (by_id) {
        const auto& id = std::get<event::SpanEnd>(ev.payload).span_id;
        auto it = open_by_id.find(id);
        if (it == open_by_id.end())
          throw Error(Errc::UnmatchedEnd, "span_end " + id + " without span_begin");
        OpenSpan o = std::move(it->second);
        open_by_id.erase(it);
        close(std::move(o), ev.ts);
      } else {
        auto it = open_by_tid.find(ev.tid);
        if (it == open_by_tid.end() || it->second.empty())
          throw Error(Errc::UnmatchedEnd, std::string(to_string(ev.kind())) +
                                              " without begin on tid " + std::to_string(ev.tid));
        OpenSpan o = std::move(it->second.back());
        it->second.pop_back();
        close(std::move(o), ev.ts);
      }
    }
  }

  for (auto& [id, o] : open_by_id) out.open.push_back(std::move(o));
  for (auto& [tid, stack] : open_by_tid)
    for (auto& o : stack) out.open.push_back(std::move(o));

  auto by_start = [](const auto& a, const auto& b) {
    return std::tie(a.t_start, a.span_id) < std::tie(b.t_start, b.span_id);
  };
  std::sort(out.spans.begin(), out.spans.end(), by_start);
  std::sort(out.open.begin(), out.open.end(), by_start);
  return out;
}

}  // namespace offcpu
