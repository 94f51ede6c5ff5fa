#pragma once

#include <zlib.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "offcpu/offcpu.hpp"

namespace fx {

using namespace offcpu;

// Small event constructors for hand-written traces.
inline TraceEvent ev(Timestamp ts, CpuId cpu, Tid tid, Payload p, std::string comm = "") {
  if (comm.empty()) comm = tid == 0 ? "swapper" : "t" + std::to_string(tid);
  return {ts, cpu, tid, std::move(comm), std::move(p)};
}
inline TraceEvent sw(Timestamp ts, CpuId cpu, Tid prev, PrevState st, Tid next) {
  return ev(ts, cpu, prev, event::SchedSwitch{prev, st, next});
}
inline TraceEvent wake(Timestamp ts, CpuId cpu, Tid waker, Tid wakee, WakerContext ctx = WakerContext::task) {
  return ev(ts, cpu, waker, event::SchedWakeup{waker, wakee, ctx});
}
inline TraceEvent enter(Timestamp ts, CpuId cpu, Tid tid, std::string name) {
  return ev(ts, cpu, tid, event::SyscallEntry{std::move(name)});
}
inline TraceEvent leave(Timestamp ts, CpuId cpu, Tid tid, std::string name) {
  return ev(ts, cpu, tid, event::SyscallExit{std::move(name)});
}
inline TraceEvent begin(Timestamp ts, Tid tid, std::string id, CpuId cpu = 0) {
  return ev(ts, cpu, tid, event::SpanBegin{std::move(id)});
}
inline TraceEvent end(Timestamp ts, Tid tid, std::string id, CpuId cpu = 0) {
  return ev(ts, cpu, tid, event::SpanEnd{std::move(id)});
}

// The lock-wait walkthrough: A (tid 1) blocks inside fcntl at 10, B (tid 2)
// wakes it at 50 and hands the cpu back at 60.
inline std::vector<TraceEvent> fcntl_fixture() {
  return {
      enter(0, 0, 1, "fcntl"),
      sw(10, 0, 1, PrevState::blocked, 2),
      wake(50, 0, 2, 1),
      sw(60, 0, 2, PrevState::runnable, 1),
      leave(80, 0, 1, "fcntl"),
      ev(100, 0, 1, event::PageFault{}),
  };
}

inline std::string gzip(const std::string& data) {
  z_stream zs{};
  deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 16 + MAX_WBITS, 8, Z_DEFAULT_STRATEGY);
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
  zs.avail_in = static_cast<uInt>(data.size());
  std::string out;
  char buf[16384];
  int rc;
  do {
    zs.next_out = reinterpret_cast<Bytef*>(buf);
    zs.avail_out = sizeof buf;
    rc = deflate(&zs, Z_FINISH);
    out.append(buf, sizeof buf - zs.avail_out);
  } while (rc != Z_STREAM_END);
  deflateEnd(&zs);
  return out;
}

// Scratch directory removed at scope exit.
struct TempDir {
  std::filesystem::path path;
  TempDir() {
    char tmpl[] = "/tmp/offcpu_test_XXXXXX";
    path = mkdtemp(tmpl);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline SynthOutput scenario_trace(Scenario s, std::uint64_t seed, int spans = -1) {
  ScenarioSpec spec = default_spec(s);
  spec.seed = seed;
  if (spans >= 0) spec.n_spans = spans;
  return generate(spec);
}

inline SynthOutput mixed(std::uint64_t seed, std::size_t events, int spans = 10, int cpus = 3, int threads = 8) {
  ScenarioSpec spec = default_spec(Scenario::mixed);
  spec.seed = seed;
  spec.n_events = events;
  spec.n_spans = spans;
  spec.cpus = cpus;
  spec.threads = threads;
  return generate(spec);
}

}  // namespace fx
