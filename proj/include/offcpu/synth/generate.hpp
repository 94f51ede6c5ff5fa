#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "offcpu/error.hpp"
#include "offcpu/rng.hpp"
#include "offcpu/state/builder.hpp"
#include "offcpu/trace/event.hpp"

namespace offcpu {

enum class Scenario { lock_contention, cpu_contention, disk_contention, mixed };

inline Scenario parse_scenario(std::string_view s) {
  if (s == "lock" || s == "lock_contention") return Scenario::lock_contention;
  if (s == "cpu" || s == "cpu_contention") return Scenario::cpu_contention;
  if (s == "disk" || s == "disk_contention") return Scenario::disk_contention;
  if (s == "mixed") return Scenario::mixed;
  throw Error(Errc::InvalidParameter, "unknown scenario \"" + std::string(s) + "\"");
}

constexpr std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::lock_contention: return "lock_contention";
    case Scenario::cpu_contention: return "cpu_contention";
    case Scenario::disk_contention: return "disk_contention";
    case Scenario::mixed: return "mixed";
  }
  return "mixed";
}

struct ScenarioSpec {
  Scenario scenario = Scenario::lock_contention;
  std::uint64_t seed = 1;
  int n_spans = 200;
  double slow_fraction = 0.25;  // share of spans hit by the injected contention
  double fast_us = 2815;        // typical span length
  double slow_us = 40148;       // typical contended span length
  double jitter = 0.02;         // relative spread of every drawn length
  int workers = 4;              // lock: apache2 workers taking requests
  std::string lock_syscall = "fcntl";
  double lock_share = 0.91;       // lock: share of a slow span spent waiting in the lock syscall
  double lock_task_share = 0.82;  // lock: share of that wait blocked on a holder
  std::string irq_thread = "irq/154-hpd";
  std::string disk_syscall = "newfstat";
  double grep_share = 0.43;  // disk: grep's share of the blocked syscall
  // mixed
  std::size_t n_events = 10000;
  int cpus = 4;
  int threads = 12;
};

inline ScenarioSpec default_spec(Scenario s) {
  ScenarioSpec spec;
  spec.scenario = s;
  switch (s) {
    case Scenario::lock_contention: break;
    case Scenario::cpu_contention:
      spec.n_spans = 100;
      spec.slow_fraction = 0.2;
      spec.fast_us = 1000;
      spec.slow_us = 9000;
      break;
    case Scenario::disk_contention:
      spec.n_spans = 100;
      spec.slow_fraction = 0.2;
      spec.fast_us = 1200;
      spec.slow_us = 12000;
      break;
    case Scenario::mixed:
      spec.n_spans = 20;
      spec.slow_fraction = 0;
      break;
  }
  return spec;
}

inline void validate(const ScenarioSpec& s) {
  auto fail = [](const std::string& what) { throw Error(Errc::InvalidParameter, what); };
  auto unit = [&](double x, const char* name) {
    if (!(x >= 0.0 && x <= 1.0)) fail(std::string(name) + " must lie in [0, 1]");
  };
  unit(s.slow_fraction, "slow fraction");
  unit(s.lock_share, "lock share");
  unit(s.lock_task_share, "lock task share");
  unit(s.grep_share, "grep share");
  if (!(s.jitter >= 0.0 && s.jitter <= 0.2)) fail("jitter must lie in [0, 0.2]");
  if (s.n_spans < 0) fail("span count must not be negative");
  if (s.scenario == Scenario::mixed) {
    if (s.cpus < 1 || s.cpus > 64) fail("cpu count must lie in [1, 64]");
    if (s.threads < 2) fail("mixed workloads need at least 2 threads");
    return;
  }
  if (!(s.fast_us >= 100)) fail("fast span length must be at least 100 us");
  if (!(s.slow_us > s.fast_us)) fail("slow span length must exceed the fast one");
  if (s.workers < 1 || s.workers > 1000) fail("worker count must lie in [1, 1000]");
  if (s.grep_share > 0.5) fail("grep share above 0.5 leaves no room for the other contenders");
  if (s.lock_syscall.empty() || s.disk_syscall.empty() || s.irq_thread.empty()) fail("names must not be empty");
}

struct GroundTruthSpan {
  std::string span_id;
  std::string label;  // "fast", "slow" or "mixed"
  std::string injected_cause;
  std::vector<std::string> expected_path;
  bool operator==(const GroundTruthSpan&) const = default;
};

struct SynthOutput {
  std::vector<TraceEvent> events;
  std::vector<GroundTruthSpan> truth;
};

inline nlohmann::ordered_json ground_truth_to_json(const ScenarioSpec& spec, const std::vector<GroundTruthSpan>& t) {
  nlohmann::ordered_json j;
  j["scenario"] = to_string(spec.scenario);
  j["seed"] = spec.seed;
  auto& spans = j["spans"] = nlohmann::ordered_json::array();
  for (const auto& s : t) {
    nlohmann::ordered_json o;
    o["span_id"] = s.span_id;
    o["label"] = s.label;
    o["injected_cause"] = s.injected_cause;
    o["expected_path"] = s.expected_path;
    spans.push_back(std::move(o));
  }
  return j;
}

inline std::vector<GroundTruthSpan> ground_truth_from_json(const nlohmann::json& j) {
  std::vector<GroundTruthSpan> out;
  for (const auto& o : j.at("spans"))
    out.push_back({o.at("span_id").get<std::string>(), o.at("label").get<std::string>(),
                   o.at("injected_cause").get<std::string>(),
                   o.at("expected_path").get<std::vector<std::string>>()});
  return out;
}

namespace synth {

constexpr Duration kUs = 1000;

// Collects events from several per-cpu timelines; finish() orders them by
// time, keeping emission order among equal timestamps.
class Emitter {
 public:
  void name(Tid tid, std::string comm) { comms_[tid] = std::move(comm); }

  void emit(Timestamp ts, CpuId cpu, Tid tid, Payload p) {
    std::string comm = tid == kIdleTid ? "swapper/" + std::to_string(cpu) : comms_.at(tid);
    events_.push_back({ts, cpu, tid, std::move(comm), std::move(p)});
  }

  void switch_to(Timestamp ts, CpuId cpu, Tid prev, PrevState st, Tid next) {
    emit(ts, cpu, prev, event::SchedSwitch{prev, st, next});
  }
  void wake(Timestamp ts, CpuId cpu, Tid waker, Tid wakee, WakerContext ctx) {
    emit(ts, cpu, waker, event::SchedWakeup{waker, wakee, ctx});
  }
  void sys_enter(Timestamp ts, CpuId cpu, Tid tid, const std::string& n) { emit(ts, cpu, tid, event::SyscallEntry{n}); }
  void sys_exit(Timestamp ts, CpuId cpu, Tid tid, const std::string& n) { emit(ts, cpu, tid, event::SyscallExit{n}); }

  std::vector<TraceEvent> finish() && {
    std::stable_sort(events_.begin(), events_.end(),
                     [](const TraceEvent& a, const TraceEvent& b) { return a.ts < b.ts; });
    return std::move(events_);
  }

 private:
  std::map<Tid, std::string> comms_;
  std::vector<TraceEvent> events_;
};

// Exactly round(p * n) slow spans, placed by a seeded shuffle.
inline std::vector<bool> pick_slow(Rng& rng, int n, double p) {
  const int slow = static_cast<int>(std::llround(p * n));
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  rng.shuffle(idx);
  std::vector<bool> out(n, false);
  for (int i = 0; i < slow; ++i) out[idx[i]] = true;
  return out;
}

// Splits `total` into `parts` positive pieces with random proportions.
inline std::vector<Duration> split(Rng& rng, Duration total, int parts) {
  std::vector<double> w(parts);
  double sum = 0;
  for (auto& x : w) sum += (x = 0.5 + rng.unit());
  std::vector<Duration> out(parts);
  Duration used = 0;
  for (int i = 0; i + 1 < parts; ++i) used += out[i] = static_cast<Duration>(total * (w[i] / sum));
  out[parts - 1] = total - used;
  return out;
}

inline std::string span_name(int i) { return "s" + std::to_string(i); }

// Busy userspace stretch with a few page faults.
inline void user_time(Emitter& em, Rng& rng, Timestamp& t, CpuId cpu, Tid tid, Duration d) {
  const int faults = static_cast<int>(rng.below(3));
  Duration step = d / (faults + 1);
  for (int i = 0; i < faults; ++i) em.emit(t + step * (i + 1), cpu, tid, event::PageFault{});
  t += d;
}

// Worker blocked in accept4 until a NET_RX softirq on `cpu` wakes it; the
// thread `current` is interrupted and then switched out for it.
inline void net_wakeup(Emitter& em, Timestamp& t, CpuId cpu, Tid current, Tid worker) {
  em.emit(t, cpu, current, event::SoftirqEntry{softirq::NET_RX});
  em.wake(t + 2 * kUs, cpu, current, worker, WakerContext::softirq);
  em.emit(t + 3 * kUs, cpu, current, event::SoftirqExit{softirq::NET_RX});
  em.switch_to(t + 4 * kUs, cpu, current, PrevState::runnable, worker);
  t += 5 * kUs;
  em.sys_exit(t, cpu, worker, "accept4");
}

// Apache workers serve requests on cpu0. Slow requests wait inside the lock
// syscall, alternately blocked until a holder on cpus 1-3 releases the lock
// and runnable behind a filler thread that took cpu0.
inline SynthOutput lock_scenario(const ScenarioSpec& s) {
  Rng rng(s.seed);
  Emitter em;
  const Tid base = 10060;
  std::vector<Tid> workers, holders;
  for (int i = 0; i < s.workers; ++i) workers.push_back(base + i);
  for (int i = 0; i < 3; ++i) holders.push_back(base + s.workers + i);
  const Tid filler = base + s.workers + 3;
  for (Tid t : workers) em.name(t, "apache2");
  for (Tid t : holders) em.name(t, "apache2");
  em.name(filler, "apache2");

  Timestamp t = 1000 * kUs;
  for (int i = 0; i < 3; ++i) em.switch_to(t, i + 1, kIdleTid, PrevState::runnable, holders[i]);
  em.switch_to(t, 0, kIdleTid, PrevState::runnable, filler);
  t += 10 * kUs;
  Tid current = filler;
  for (Tid w : workers) {
    em.switch_to(t, 0, current, PrevState::runnable, w);
    em.sys_enter(t + 5 * kUs, 0, w, "accept4");
    em.switch_to(t + 10 * kUs, 0, w, PrevState::blocked, filler);
    t += 20 * kUs;
  }

  const auto slow = pick_slow(rng, s.n_spans, s.slow_fraction);
  SynthOutput out;
  for (int i = 0; i < s.n_spans; ++i) {
    const Tid w = workers[i % workers.size()];
    t += rng.jitter(300 * kUs, 0.5);
    net_wakeup(em, t, 0, filler, w);
    t += 10 * kUs;
    const std::string id = span_name(i);
    em.emit(t, 0, w, event::SpanBegin{id});
    const Timestamp start = t;
    const Duration total = rng.jitter(static_cast<Duration>(slow[i] ? s.slow_us * kUs : s.fast_us * kUs), s.jitter);

    // Non-waiting part: 90% userspace, the rest in short syscalls.
    Duration wait = 0, slices = 0;
    constexpr int kEpisodes = 5;
    if (slow[i]) {
      wait = static_cast<Duration>(std::llround(s.lock_share * static_cast<double>(total)));
      slices = kEpisodes * kUs;
    }
    const Duration busy = total - wait - slices;
    const Duration sys = busy / 10;
    const auto users = split(rng, busy - sys, 4);
    const auto calls = split(rng, sys, 3);

    user_time(em, rng, t, 0, w, users[0]);
    em.sys_enter(t, 0, w, "read");
    em.emit(t + calls[0] / 2, 0, w, event::IoRead{static_cast<std::int64_t>(rng.range(512, 8192))});
    t += calls[0];
    em.sys_exit(t, 0, w, "read");
    user_time(em, rng, t, 0, w, users[1]);

    em.sys_enter(t, 0, w, s.lock_syscall);
    t += calls[1];
    if (slow[i]) {
      const Duration blocked = static_cast<Duration>(std::llround(s.lock_task_share * static_cast<double>(wait)));
      const auto b = split(rng, blocked, kEpisodes);
      const auto q = split(rng, wait - blocked, kEpisodes);
      for (int e = 0; e < kEpisodes; ++e) {
        const int h = static_cast<int>(rng.below(holders.size()));
        em.switch_to(t, 0, w, PrevState::blocked, filler);
        t += b[e];
        em.wake(t, h + 1, holders[h], w, WakerContext::task);
        t += q[e];
        em.switch_to(t, 0, filler, PrevState::runnable, w);
        t += kUs;
      }
    }
    em.sys_exit(t, 0, w, s.lock_syscall);
    user_time(em, rng, t, 0, w, users[2]);

    em.sys_enter(t, 0, w, "writev");
    em.emit(t + calls[2] / 2, 0, w, event::IoWrite{static_cast<std::int64_t>(rng.range(1024, 65536))});
    t += calls[2];
    em.sys_exit(t, 0, w, "writev");
    user_time(em, rng, t, 0, w, users[3]);

    em.emit(start + total, 0, w, event::SpanEnd{id});
    t = start + total;
    em.sys_enter(t + kUs, 0, w, "accept4");
    em.switch_to(t + 2 * kUs, 0, w, PrevState::blocked, filler);
    t += 3 * kUs;

    if (slow[i])
      out.truth.push_back({id, "slow", "lock_contention", {"apache2", s.lock_syscall, "apache2"}});
    else
      out.truth.push_back({id, "fast", "none", {"apache2"}});
  }
  out.events = std::move(em).finish();
  return out;
}

// A timer softirq thread on cpu3 serves periodic hrtimer wakeups. In slow
// periods an irq handler thread, woken just before, holds cpu3 for the time
// the timer thread spends runnable.
inline SynthOutput cpu_scenario(const ScenarioSpec& s) {
  Rng rng(s.seed);
  Emitter em;
  const Tid ktimer = 3267, irq_thread = 212;
  const CpuId cpu = 3;
  em.name(ktimer, "ktimersoftd/3");
  em.name(irq_thread, s.irq_thread);

  Timestamp t = 1000 * kUs;
  em.switch_to(t, cpu, kIdleTid, PrevState::runnable, ktimer);
  em.switch_to(t + 10 * kUs, cpu, ktimer, PrevState::blocked, kIdleTid);
  t += 20 * kUs;

  const auto slow = pick_slow(rng, s.n_spans, s.slow_fraction);
  SynthOutput out;
  const Duration run = static_cast<Duration>(s.fast_us * kUs);
  const Duration held = static_cast<Duration>((s.slow_us - s.fast_us) * kUs);
  for (int i = 0; i < s.n_spans; ++i) {
    t += rng.jitter(20000 * kUs, 0.1);
    const std::string id = span_name(i);
    Tid current = kIdleTid;
    if (slow[i]) {
      const Timestamp irq_at = t - 50 * kUs;
      em.emit(irq_at, cpu, kIdleTid, event::IrqEntry{154});
      em.wake(irq_at + kUs, cpu, kIdleTid, irq_thread, WakerContext::irq);
      em.emit(irq_at + 2 * kUs, cpu, kIdleTid, event::IrqExit{154});
      em.switch_to(irq_at + 3 * kUs, cpu, kIdleTid, PrevState::runnable, irq_thread);
      current = irq_thread;
    }
    em.emit(t, cpu, current, event::HrtimerEntry{});
    em.wake(t, cpu, current, ktimer, WakerContext::hrtimer);
    em.emit(t, cpu, ktimer, event::SpanBegin{id});
    em.emit(t + kUs, cpu, current, event::HrtimerExit{});
    Timestamp on = t + 2 * kUs;
    if (slow[i]) on = t + rng.jitter(held, s.jitter);
    em.switch_to(on, cpu, current, slow[i] ? PrevState::blocked : PrevState::runnable, ktimer);
    t = on;
    user_time(em, rng, t, cpu, ktimer, rng.jitter(run, s.jitter));
    em.emit(t, cpu, ktimer, event::SpanEnd{id});
    em.switch_to(t + kUs, cpu, ktimer, PrevState::blocked, kIdleTid);
    t += 2 * kUs;

    if (slow[i])
      out.truth.push_back({id, "slow", "cpu_contention", {"ktimersoftd/3", "CPU", s.irq_thread}});
    else
      out.truth.push_back({id, "fast", "none", {"ktimersoftd/3"}});
  }
  out.events = std::move(em).finish();
  return out;
}

// An apache2 worker on cpu0 stats files. In slow spans the stat blocks on
// sda while three threads on cpus 1-3 keep their own requests in flight for
// set shares of that wait.
inline SynthOutput disk_scenario(const ScenarioSpec& s) {
  Rng rng(s.seed);
  Emitter em;
  const Tid root = 10060, grep = 9739, kworker = 215, peer = 10147;
  em.name(root, "apache2");
  em.name(grep, "grep");
  em.name(kworker, "kworker/u8:2");
  em.name(peer, "apache2");
  struct Contender {
    Tid tid;
    CpuId cpu;
    double share;
  };
  const double rest = 1.0 - s.grep_share;
  const std::vector<Contender> contenders = {
      {grep, 1, s.grep_share}, {kworker, 2, rest * 0.30 / 0.57}, {peer, 3, rest * 0.20 / 0.57}};

  Timestamp t = 1000 * kUs;
  for (const auto& c : contenders) em.switch_to(t, c.cpu, kIdleTid, PrevState::runnable, c.tid);
  em.switch_to(t, 0, kIdleTid, PrevState::runnable, root);
  em.sys_enter(t + 5 * kUs, 0, root, "accept4");
  em.switch_to(t + 10 * kUs, 0, root, PrevState::blocked, kIdleTid);
  t += 20 * kUs;

  const auto slow = pick_slow(rng, s.n_spans, s.slow_fraction);
  SynthOutput out;
  for (int i = 0; i < s.n_spans; ++i) {
    t += rng.jitter(500 * kUs, 0.5);
    net_wakeup(em, t, 0, kIdleTid, root);
    t += 10 * kUs;
    const std::string id = span_name(i);
    em.emit(t, 0, root, event::SpanBegin{id});
    const Timestamp start = t;
    const Duration total = rng.jitter(static_cast<Duration>(slow[i] ? s.slow_us * kUs : s.fast_us * kUs), s.jitter);
    const Duration stat_busy = total / 20;
    Duration blocked = 0;
    if (slow[i]) blocked = total * 85 / 100;
    // The wakeup adds 1 us of runnable time to slow spans.
    const auto users = split(rng, total - stat_busy - blocked - (slow[i] ? 1000 : 0), 2);

    user_time(em, rng, t, 0, root, users[0]);
    em.sys_enter(t, 0, root, s.disk_syscall);
    t += stat_busy / 2;
    if (slow[i]) {
      em.emit(t, 0, root, event::BlockRqIssue{"sda"});
      em.switch_to(t, 0, root, PrevState::blocked, kIdleTid);
      const Timestamp b0 = t;
      for (const auto& c : contenders) {
        const Duration len = static_cast<Duration>(std::llround(c.share * static_cast<double>(blocked)));
        const Timestamp from = b0 + static_cast<Duration>(rng.below(static_cast<std::uint64_t>(blocked - len) + 1));
        em.emit(from, c.cpu, c.tid, event::BlockRqIssue{"sda"});
        em.emit(from + len, c.cpu, c.tid, event::BlockRqComplete{"sda"});
      }
      t += blocked;
      em.emit(t, 0, kIdleTid, event::SoftirqEntry{softirq::BLOCK});
      em.emit(t, 0, root, event::BlockRqComplete{"sda"});
      em.wake(t, 0, kIdleTid, root, WakerContext::softirq);
      em.emit(t + 500, 0, kIdleTid, event::SoftirqExit{softirq::BLOCK});
      em.switch_to(t + 1000, 0, kIdleTid, PrevState::runnable, root);
      t += 1000;
    }
    em.emit(t, 0, root, event::IoRead{4096});
    t += stat_busy - stat_busy / 2;
    em.sys_exit(t, 0, root, s.disk_syscall);
    user_time(em, rng, t, 0, root, users[1]);
    em.emit(start + total, 0, root, event::SpanEnd{id});
    t = std::max(t, start + total);
    em.sys_enter(t + kUs, 0, root, "accept4");
    em.switch_to(t + 2 * kUs, 0, root, PrevState::blocked, kIdleTid);
    t += 3 * kUs;

    if (slow[i])
      out.truth.push_back({id, "slow", "disk_contention", {"apache2", s.disk_syscall, "DISK", "grep"}});
    else
      out.truth.push_back({id, "fast", "none", {"apache2"}});
  }
  out.events = std::move(em).finish();
  return out;
}

// Random serial scheduler: each step applies one feasible action (switch,
// block, wake from a matching context, syscall, interrupt, counters, async
// I/O, span marker), so every trace satisfies the state model.
class MixedSimulator {
 public:
  explicit MixedSimulator(const ScenarioSpec& s) : s_(s), rng_(s.seed) {
    static const std::vector<std::string> comms = {"worker", "worker", "db", "logger", "db", "cron", "kworker/0:1"};
    for (int i = 0; i < s.threads; ++i) {
      Tid tid = 1000 + i;
      em_.name(tid, comms[i % comms.size()]);
      threads_[tid] = Thread{};
    }
    cpus_.assign(s.cpus, kIdleTid);
  }

  SynthOutput run() {
    while (count_ < s_.n_events) step();
    // Close every open span so the whole budget is analysable.
    t_ += 1000;
    for (auto& [tid, th] : threads_)
      if (th.span) {
        em_.emit(t_, th.last_cpu, tid, event::SpanEnd{*th.span});
        ++count_;
      }
    SynthOutput out;
    out.events = std::move(em_).finish();
    for (int i = 0; i < spans_; ++i) out.truth.push_back({"m" + std::to_string(i), "mixed", "none", {}});
    return out;
  }

 private:
  enum class Run { unknown, running, runnable, blocked };
  enum class Wait { task, futex, timer, disk, net, sleep };

  struct Thread {
    Run run = Run::unknown;
    Wait wait = Wait::task;
    CpuId cpu = -1;
    CpuId last_cpu = 0;
    std::optional<std::string> syscall;
    std::optional<std::string> span;
    Timestamp span_start = 0;
    std::optional<std::string> disk_dev;  // request the blocked thread waits for
  };

  void emit(CpuId cpu, Tid tid, Payload p) {
    em_.emit(t_, cpu, tid, std::move(p));
    ++count_;
  }

  void tick() {
    if (!rng_.chance(0.1)) t_ += rng_.range(1, 2000);
  }

  std::vector<Tid> with(Run r) const {
    std::vector<Tid> out;
    for (const auto& [tid, th] : threads_)
      if (th.run == r) out.push_back(tid);
    return out;
  }

  std::vector<Tid> blocked_on(std::initializer_list<Wait> ws) const {
    std::vector<Tid> out;
    for (const auto& [tid, th] : threads_)
      if (th.run == Run::blocked && std::find(ws.begin(), ws.end(), th.wait) != ws.end()) out.push_back(tid);
    return out;
  }

  // Thread to switch in: runnable or never seen; idle when none.
  Tid next_thread() {
    auto ready = with(Run::runnable);
    auto fresh = with(Run::unknown);
    ready.insert(ready.end(), fresh.begin(), fresh.end());
    if (ready.empty()) return kIdleTid;
    return rng_.pick(ready);
  }

  void switch_out(CpuId c, PrevState st) {
    const Tid prev = cpus_[c];
    const Tid next = next_thread();
    if (prev == next) return;
    emit(c, prev, event::SchedSwitch{prev, st, next});
    if (prev != kIdleTid) {
      auto& p = threads_[prev];
      p.run = st == PrevState::runnable ? Run::runnable : Run::blocked;
      p.cpu = -1;
    }
    if (next != kIdleTid) {
      auto& n = threads_[next];
      n.run = Run::running;
      n.cpu = c;
      n.last_cpu = c;
    }
    cpus_[c] = next;
  }

  void wake(CpuId c, Tid waker, Tid wakee, WakerContext ctx) {
    emit(c, waker, event::SchedWakeup{waker, wakee, ctx});
    threads_[wakee].run = Run::runnable;
  }

  void step() {
    tick();
    const CpuId c = static_cast<CpuId>(rng_.below(cpus_.size()));
    const Tid cur = cpus_[c];
    const auto roll = rng_.below(100);
    if (cur == kIdleTid) {
      if (roll < 60) switch_out(c, PrevState::runnable);
      else interrupt(c);
      return;
    }
    Thread& th = threads_[cur];
    if (roll < 12) {
      if (th.syscall) {
        emit(c, cur, event::SyscallExit{*th.syscall});
        th.syscall.reset();
      } else {
        static const std::vector<std::string> names = {"read", "write", "futex", "fcntl", "poll", "newfstat"};
        th.syscall = rng_.pick(names);
        emit(c, cur, event::SyscallEntry{*th.syscall});
      }
    } else if (roll < 20) {
      switch (rng_.below(3)) {
        case 0: emit(c, cur, event::PageFault{}); break;
        case 1: emit(c, cur, event::IoRead{rng_.range(1, 4096)}); break;
        default: emit(c, cur, event::IoWrite{rng_.range(1, 4096)}); break;
      }
    } else if (roll < 25) {
      if (th.span) {
        // No zero-length spans.
        if (t_ > th.span_start) {
          emit(c, cur, event::SpanEnd{*th.span});
          th.span.reset();
        }
      } else if (spans_ < s_.n_spans && rng_.chance(span_rate())) {
        th.span = "m" + std::to_string(spans_++);
        th.span_start = t_;
        emit(c, cur, event::SpanBegin{*th.span});
      }
    } else if (roll < 29) {
      const std::string dev = rng_.chance(0.5) ? "sda" : "sdb";
      emit(c, cur, event::BlockRqIssue{dev});
      async_.push_back({cur, dev});
    } else if (roll < 42) {
      switch_out(c, PrevState::runnable);
    } else if (roll < 60) {
      block(c, cur);
    } else if (roll < 75) {
      auto ws = blocked_on({Wait::task, Wait::futex, Wait::sleep});
      if (!ws.empty()) wake(c, cur, rng_.pick(ws), WakerContext::task);
    } else {
      interrupt(c);
    }
  }

  double span_rate() const {
    return std::min(1.0, 40.0 * s_.n_spans / static_cast<double>(s_.n_events));
  }

  void block(CpuId c, Tid tid) {
    Thread& th = threads_[tid];
    static const std::vector<Wait> kinds = {Wait::task, Wait::futex, Wait::timer, Wait::disk, Wait::net, Wait::sleep};
    th.wait = rng_.pick(kinds);
    if (th.wait == Wait::futex && th.syscall != std::optional<std::string>("futex")) th.wait = Wait::task;
    if (th.wait == Wait::disk) {
      th.disk_dev = rng_.chance(0.5) ? "sda" : "sdb";
      emit(c, tid, event::BlockRqIssue{*th.disk_dev});
    }
    switch_out(c, PrevState::blocked);
  }

  void interrupt(CpuId c) {
    const Tid cur = cpus_[c];
    auto inner = [&] { t_ += rng_.range(0, 500); };
    switch (rng_.below(4)) {
      case 0: {
        emit(c, cur, event::HrtimerEntry{});
        inner();
        auto ws = blocked_on({Wait::timer});
        if (!ws.empty()) wake(c, cur, rng_.pick(ws), WakerContext::hrtimer);
        inner();
        emit(c, cur, event::HrtimerExit{});
        break;
      }
      case 1: {
        const std::int64_t vec = rng_.chance(0.5) ? softirq::NET_RX : softirq::TIMER;
        emit(c, cur, event::SoftirqEntry{vec});
        inner();
        auto ws = blocked_on({vec == softirq::NET_RX ? Wait::net : Wait::timer});
        if (!ws.empty()) wake(c, cur, rng_.pick(ws), WakerContext::softirq);
        inner();
        emit(c, cur, event::SoftirqExit{vec});
        break;
      }
      case 2: {
        emit(c, cur, event::SoftirqEntry{softirq::BLOCK});
        inner();
        auto ws = blocked_on({Wait::disk});
        if (!ws.empty() && (async_.empty() || rng_.chance(0.5))) {
          const Tid w = rng_.pick(ws);
          emit(c, w, event::BlockRqComplete{*threads_[w].disk_dev});
          threads_[w].disk_dev.reset();
          inner();
          wake(c, cur, w, WakerContext::softirq);
        } else if (!async_.empty()) {
          const std::size_t k = rng_.below(async_.size());
          emit(c, async_[k].first, event::BlockRqComplete{async_[k].second});
          async_.erase(async_.begin() + static_cast<std::ptrdiff_t>(k));
        }
        inner();
        emit(c, cur, event::SoftirqExit{softirq::BLOCK});
        break;
      }
      default: {
        const std::int64_t irq = 30 + static_cast<std::int64_t>(rng_.below(3));
        emit(c, cur, event::IrqEntry{irq});
        inner();
        auto ws = blocked_on({Wait::sleep});
        if (!ws.empty() && rng_.chance(0.3)) wake(c, cur, rng_.pick(ws), WakerContext::irq);
        inner();
        emit(c, cur, event::IrqExit{irq});
        break;
      }
    }
  }

  ScenarioSpec s_;
  Rng rng_;
  Emitter em_;
  Timestamp t_ = 1000;
  std::size_t count_ = 0;
  int spans_ = 0;
  std::map<Tid, Thread> threads_;
  std::vector<Tid> cpus_;
  std::vector<std::pair<Tid, std::string>> async_;
};

}  // namespace synth

inline SynthOutput generate(const ScenarioSpec& spec) {
  validate(spec);
  switch (spec.scenario) {
    case Scenario::lock_contention: return synth::lock_scenario(spec);
    case Scenario::cpu_contention: return synth::cpu_scenario(spec);
    case Scenario::disk_contention: return synth::disk_scenario(spec);
    case Scenario::mixed: return synth::MixedSimulator(spec).run();
  }
  throw Error(Errc::InvalidParameter, "unknown scenario");
}

}  // namespace offcpu
