#pragma once

#include <array>
#include <cstddef>
#include <string_view>
#include <vector>

#include "offcpu/state/database.hpp"
#include "offcpu/trace/spans.hpp"

namespace offcpu {

// Fixed feature order. Durations are microseconds; "interrupt" is time the
// root spent in the interrupted state.
inline constexpr std::array<std::string_view, 16> kFeatureNames = {
    "disk_count",      "disk_us",      "cpu_wait_count", "cpu_wait_us",
    "futex_count",     "futex_us",     "task_count",     "task_us",
    "interrupt_count", "interrupt_us", "timer_count",    "timer_us",
    "page_faults",     "bytes_read",   "bytes_written",  "total_us",
};

namespace feature {
enum Index : std::size_t {
  disk_count, disk_us, cpu_wait_count, cpu_wait_us,
  futex_count, futex_us, task_count, task_us,
  interrupt_count, interrupt_us, timer_count, timer_us,
  page_faults, bytes_read, bytes_written, total_us,
};
}

using FeatureVector = std::array<double, kFeatureNames.size()>;

// Features of the span's root thread, from its clipped state intervals and
// counter step functions.
inline FeatureVector extract_features(const ExecutionSpan& span, const StateDatabase& db) {
  FeatureVector f{};
  auto bump = [&](std::size_t count_idx, Duration d) {
    f[count_idx] += 1;
    f[count_idx + 1] += to_us(d);
  };
  for (const auto& v : db.query_range(StateKey::thread(span.root_tid, Attr::state), span.t_start, span.t_end)) {
    const auto& st = std::get<ThreadState>(v.value);
    const Duration d = v.duration();
    switch (st.kind) {
      case ThreadState::Kind::running: break;
      case ThreadState::Kind::runnable: bump(feature::cpu_wait_count, d); break;
      case ThreadState::Kind::interrupted: bump(feature::interrupt_count, d); break;
      case ThreadState::Kind::blocked:
        switch (st.reason) {
          case BlockReason::disk: bump(feature::disk_count, d); break;
          case BlockReason::futex: bump(feature::futex_count, d); break;
          case BlockReason::task: bump(feature::task_count, d); break;
          case BlockReason::timer: bump(feature::timer_count, d); break;
          case BlockReason::network:
          case BlockReason::unknown: break;
        }
        break;
    }
  }
  auto delta = [&](Attr a) {
    return static_cast<double>(db.counter_delta(span.root_tid, a, span.t_start, span.t_end));
  };
  f[feature::page_faults] = delta(Attr::page_faults);
  f[feature::bytes_read] = delta(Attr::bytes_read);
  f[feature::bytes_written] = delta(Attr::bytes_written);
  f[feature::total_us] = to_us(span.duration());
  return f;
}

inline std::vector<FeatureVector> extract_features(const std::vector<ExecutionSpan>& spans,
                                                   const StateDatabase& db) {
  std::vector<FeatureVector> out;
  out.reserve(spans.size());
  for (const auto& s : spans) out.push_back(extract_features(s, db));
  return out;
}

}  // namespace offcpu
