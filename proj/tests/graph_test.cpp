#include <gtest/gtest.h>

#include <algorithm>
#include <regex>

#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace offcpu;
using namespace fx;

namespace {

std::vector<TraceEvent> sorted(std::vector<TraceEvent> evs) {
  std::stable_sort(evs.begin(), evs.end(), [](const auto& a, const auto& b) { return a.ts < b.ts; });
  return evs;
}

// Two threads waiting on the same disk over overlapping windows, so each
// one's fan-out reaches the other.
std::vector<TraceEvent> disk_pair() {
  return sorted({
      ev(0, 0, 1, event::PageFault{}),
      ev(0, 1, 2, event::PageFault{}),
      ev(5, 0, 1, event::BlockRqIssue{"sda"}),
      ev(8, 1, 2, event::BlockRqIssue{"sda"}),
      sw(10, 0, 1, PrevState::blocked, 0),
      sw(20, 1, 2, PrevState::blocked, 0),
      ev(38, 1, 0, event::SoftirqEntry{softirq::BLOCK}),
      ev(39, 1, 2, event::BlockRqComplete{"sda"}),
      wake(39, 1, 0, 2, WakerContext::softirq),
      ev(40, 1, 0, event::SoftirqExit{softirq::BLOCK}),
      sw(41, 1, 0, PrevState::runnable, 2),
      ev(44, 0, 0, event::SoftirqEntry{softirq::BLOCK}),
      ev(45, 0, 1, event::BlockRqComplete{"sda"}),
      wake(45, 0, 0, 1, WakerContext::softirq),
      ev(46, 0, 0, event::SoftirqExit{softirq::BLOCK}),
      sw(50, 0, 0, PrevState::runnable, 1),
      ev(100, 0, 1, event::PageFault{}),
      ev(100, 1, 2, event::PageFault{}),
  });
}

// Thread i (1..4) blocks over [10i, 100-10i) and is woken by thread i+1,
// giving a wait chain four deep.
std::vector<TraceEvent> wait_chain() {
  std::vector<TraceEvent> evs;
  for (Tid i = 1; i <= 5; ++i) {
    const CpuId c = static_cast<CpuId>(i - 1);
    evs.push_back(ev(0, c, i, event::PageFault{}));
    if (i <= 4) {
      evs.push_back(sw(10 * i, c, i, PrevState::blocked, 0));
      evs.push_back(wake(100 - 10 * i, static_cast<CpuId>(i), i + 1, i));
      evs.push_back(sw(100 - 10 * i, c, 0, PrevState::runnable, i));
    }
    evs.push_back(ev(200, c, i, event::PageFault{}));
  }
  return sorted(std::move(evs));
}

DepGraph random_graph(Rng& rng, const std::string& root, int edges) {
  std::vector<DepNode> pool = {DepNode::thread(1, "a"), DepNode::thread(2, "b"), DepNode::syscall(1, "read"),
                               DepNode::resource(kCpuResource), DepNode::resource(kDiskResource),
                               DepNode::thread(3, "c")};
  DepNode r = DepNode::thread(9, root);
  DepGraph g(r);
  pool.push_back(r);
  for (int i = 0; i < edges; ++i) {
    const auto& a = rng.pick(pool);
    const auto& b = rng.pick(pool);
    add_to_graph(g, DepEdge{a.id, b.id, rng.range(1, 1000), rng.range(1, 3), {}}, a, b);
  }
  g.finalize_totals(5000);
  return g;
}

const GroundTruthSpan& first_with(const SynthOutput& s, const std::string& label) {
  for (const auto& t : s.truth)
    if (t.label == label) return t;
  throw std::runtime_error("no " + label + " span");
}

}  // namespace

TEST(DepGraphBuild, AllRunningGivesTheRootAlone) {
  auto db = build_state_db({begin(0, 5, "r"), ev(50, 0, 5, event::PageFault{}), end(100, 5, "r")});
  auto g = build_depgraph(5, db, 0, 100);
  EXPECT_EQ(g.nodes().size(), 1u);
  EXPECT_TRUE(g.edges().empty());
  EXPECT_EQ(g.root().total, 100);
  EXPECT_EQ(g.root().label, "t5-5");
}

TEST(DepGraphBuild, EmptyWindowIsRejected) {
  auto db = build_state_db(fcntl_fixture());
  EXPECT_THROW(build_depgraph(1, db, 50, 50), Error);
  EXPECT_THROW(build_depgraph(1, db, 60, 50), Error);
}

TEST(DepGraphBuild, FcntlWait) {
  auto db = build_state_db(fcntl_fixture());
  auto g = build_depgraph(1, db, 0, 100);
  const std::string a = "thread:1", sc = "syscall:1:fcntl", b = "thread:2", cpu = "resource:CPU";
  ASSERT_NE(g.edge(a, sc), nullptr);
  EXPECT_EQ(g.edge(a, sc)->weight, 50);
  EXPECT_EQ(g.edge(a, sc)->count, 2);
  EXPECT_EQ(g.edge(sc, b)->weight, 40);
  EXPECT_EQ(g.edge(sc, cpu)->weight, 10);
  EXPECT_EQ(g.edge(sc, cpu)->resources, std::set<std::string>{"cpu0"});
  EXPECT_EQ(g.edge(cpu, b)->weight, 10);
  EXPECT_EQ(g.edges().size(), 4u);
  EXPECT_EQ(g.node(sc)->total, 50);
  EXPECT_EQ(g.node(b)->total, 50);
  EXPECT_EQ(g.root().total, 100);
  EXPECT_FALSE(g.meta().cycle_broken);
}

TEST(DepGraphBuild, DiskFanOutAndCycleGuard) {
  auto db = build_state_db(disk_pair());
  auto g = build_depgraph(1, db, 0, 100);
  const std::string disk = "resource:DISK";
  EXPECT_EQ(g.edge("thread:1", disk)->weight, 35);
  EXPECT_EQ(g.edge("thread:1", disk)->resources, std::set<std::string>{"sda"});
  // t2's request overlaps t1's wait over [10, 39).
  EXPECT_EQ(g.edge(disk, "thread:2")->weight, 29);
  // Inside t2's own wait t1 is the other disk user. The edge is kept but t1 is
  // already on the stack over a wider window, so there is no second walk.
  EXPECT_TRUE(g.meta().cycle_broken);
  EXPECT_EQ(g.edge(disk, "thread:1")->weight, 19);
  EXPECT_EQ(g.edge("thread:1", disk)->count, 1);
  EXPECT_EQ(g.edge("thread:2", disk)->weight, 19);
  EXPECT_EQ(g.edge("thread:1", "resource:CPU")->weight, 5);
  oracle::Attribution att(db);
  EXPECT_EQ(oracle::edges_of(g), att.run(1, 0, 100));
}

TEST(DepGraphBuild, DepthLimit) {
  auto db = build_state_db(wait_chain());
  auto deep = build_depgraph(1, db, 0, 200);
  EXPECT_FALSE(deep.meta().depth_limited);
  for (Tid t = 2; t <= 5; ++t) EXPECT_NE(deep.node("thread:" + std::to_string(t)), nullptr) << t;
  EXPECT_EQ(deep.edge("thread:4", "thread:5")->weight, 20);

  GraphOptions shallow;
  shallow.max_depth = 1;
  auto g = build_depgraph(1, db, 0, 200, shallow);
  EXPECT_TRUE(g.meta().depth_limited);
  EXPECT_NE(g.node("thread:3"), nullptr);
  EXPECT_EQ(g.node("thread:4"), nullptr);
  oracle::Attribution att(db, 1);
  EXPECT_EQ(oracle::edges_of(g), att.run(1, 0, 200));
}

TEST(DepGraphBuild, LockSlowSpanShowsTheSyscallShare) {
  auto s = scenario_trace(Scenario::lock_contention, 7, 40);
  auto db = build_state_db(s.events);
  auto spans = extract_spans(s.events);
  const auto* span = spans.find(first_with(s, "slow").span_id);
  ASSERT_NE(span, nullptr);
  auto g = build_depgraph(*span, db);
  const std::string dot = to_dot(g);
  std::smatch m;
  const std::regex root_edge("\"thread:[0-9]+\" -> \"syscall:[0-9]+:fcntl\" \\[label=\"[0-9]+ \xC2\xB5s\\\\n([0-9]+)%\"\\]");
  ASSERT_TRUE(std::regex_search(dot, m, root_edge)) << dot;
  EXPECT_NEAR(std::stoi(m[1]), 91, 3);
}

TEST(DepGraphBuild, MatchesBruteForceOnSimulatedTraces) {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    auto s = mixed(seed, 4000, 8, 2 + seed % 3, 6 + seed % 5);
    auto db = build_state_db(s.events);
    oracle::Attribution att(db);
    for (const auto& span : extract_spans(s.events).spans) {
      auto g = build_depgraph(span, db);
      ASSERT_EQ(oracle::edges_of(g), att.run(span.root_tid, span.t_start, span.t_end))
          << "seed " << seed << " span " << span.span_id;
    }
  }
  for (auto sc : {Scenario::lock_contention, Scenario::cpu_contention, Scenario::disk_contention}) {
    auto s = scenario_trace(sc, 5, 12);
    auto db = build_state_db(s.events);
    oracle::Attribution att(db);
    for (const auto& span : extract_spans(s.events).spans)
      ASSERT_EQ(oracle::edges_of(build_depgraph(span, db)), att.run(span.root_tid, span.t_start, span.t_end));
  }
}

TEST(DepGraphBuild, WaitingTimeIsConserved) {
  for (std::uint64_t seed = 30; seed < 36; ++seed) {
    auto s = mixed(seed, 4000);
    auto db = build_state_db(s.events);
    for (const auto& span : extract_spans(s.events).spans) {
      auto g = build_depgraph(span, db);
      Duration out = 0;
      for (const auto* e : g.out_edges(g.root_id())) out += e->weight;
      EXPECT_LE(out, span.duration());
      for (const auto& [id, n] : g.nodes()) {
        if (n.kind != NodeKind::syscall) continue;
        Duration o = 0;
        for (const auto* e : g.out_edges(id)) o += e->weight;
        EXPECT_EQ(o, n.total) << id;
      }
    }
  }
}

TEST(AddToGraph, AccumulatesLikeAMap) {
  Rng rng(4);
  std::vector<DepNode> pool = {DepNode::thread(1, "a"), DepNode::thread(2, "b"), DepNode::syscall(1, "read"),
                               DepNode::resource(kCpuResource), DepNode::resource(kDiskResource)};
  DepGraph g(pool[0]);
  oracle::Attribution::Edges expect;
  for (int i = 0; i < 50; ++i) {
    const auto& a = rng.pick(pool);
    const auto& b = rng.pick(pool);
    const Duration w = rng.range(1, 500);
    add_to_graph(g, a, b, w);
    auto& x = expect[{a.id, b.id}];
    x.weight += w;
    x.count += 1;
  }
  EXPECT_EQ(oracle::edges_of(g), expect);
}

TEST(AddToGraph, ZeroWeightIsIgnored) {
  DepGraph g(DepNode::thread(1, "a"));
  add_to_graph(g, DepNode::thread(1, "a"), DepNode::thread(2, "b"), 0);
  EXPECT_TRUE(g.edges().empty());
  EXPECT_EQ(g.nodes().size(), 1u);
}

TEST(Merge, IdentityCommutativityAssociativity) {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    auto a = random_graph(rng, "r", 10), b = random_graph(rng, "r", 10), c = random_graph(rng, "r", 10);
    EXPECT_EQ(merge_graphs(a, DepGraph{}), a);
    EXPECT_EQ(merge_graphs(DepGraph{}, a), a);
    auto ab = merge_graphs(a, b), ba = merge_graphs(b, a);
    EXPECT_EQ(ab.nodes(), ba.nodes());
    EXPECT_EQ(ab.edges(), ba.edges());
    auto l = merge_graphs(merge_graphs(a, b), c), r = merge_graphs(a, merge_graphs(b, c));
    EXPECT_EQ(l.nodes(), r.nodes());
    EXPECT_EQ(l.edges(), r.edges());
    // Edge weights add.
    for (const auto& [k, e] : ab.edges()) {
      Duration w = 0;
      if (auto* x = a.edge(k.first, k.second)) w += x->weight;
      if (auto* x = b.edge(k.first, k.second)) w += x->weight;
      EXPECT_EQ(e.weight, w);
    }
  }
}

TEST(Merge, DifferentRoots) {
  Rng rng(3);
  auto a = random_graph(rng, "r", 5);
  DepGraph b(DepNode::thread(77, "other"));
  add_to_graph(b, DepNode::thread(77, "other"), DepNode::resource(kCpuResource), 40);
  b.finalize_totals(100);
  try {
    merge_graphs(a, b);
    FAIL() << "expected RootConflict";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::RootConflict);
  }
  MergeOptions opts;
  opts.roots = MergeOptions::Roots::super_root;
  auto m = merge_graphs(a, b, opts);
  EXPECT_EQ(m.root_id(), "root:all");
  EXPECT_EQ(m.edge("root:all", a.root_id())->weight, 5000);
  EXPECT_EQ(m.edge("root:all", "thread:77")->weight, 100);
  EXPECT_EQ(m.root().total, 5100);
  // A third graph joins the existing super root instead of nesting it.
  DepGraph c(DepNode::thread(88, "third"));
  c.finalize_totals(10);
  auto m3 = merge_graphs(m, c, opts);
  EXPECT_EQ(m3.out_edges("root:all").size(), 3u);
  EXPECT_EQ(m3.root().total, 5110);
}

TEST(Export, DotIsDeterministicAndBounded) {
  auto s = mixed(8, 5000);
  auto db1 = build_state_db(s.events);
  auto db2 = build_state_db(s.events);
  const std::regex pct("\\\\n([0-9]+)%");
  for (const auto& span : extract_spans(s.events).spans) {
    auto g = build_depgraph(span, db1);
    const std::string dot = to_dot(g);
    EXPECT_EQ(dot, to_dot(build_depgraph(span, db2)));
    EXPECT_EQ(dot.rfind("digraph depgraph {", 0), 0u);
    for (auto it = std::sregex_iterator(dot.begin(), dot.end(), pct); it != std::sregex_iterator(); ++it)
      EXPECT_LE(std::stoi((*it)[1]), 100);
  }
}

TEST(Export, PercentagesLeavingTheRootStayWithinTheSpan) {
  auto s = scenario_trace(Scenario::disk_contention, 2, 20);
  auto db = build_state_db(s.events);
  for (const auto& span : extract_spans(s.events).spans) {
    auto g = build_depgraph(span, db);
    std::int64_t sum = 0;
    for (const auto* e : g.out_edges(g.root_id())) sum += detail::percent_of(e->weight, g.root().total);
    EXPECT_LE(sum, 100);
  }
}

TEST(Export, DotOptions) {
  auto db = build_state_db(fcntl_fixture());
  auto g = build_depgraph(1, db, 0, 100);
  const auto dot = to_dot(g);
  EXPECT_NE(dot.find("\"thread:1\" -> \"syscall:1:fcntl\" [label=\"0 \xC2\xB5s\\n50%\"]"), std::string::npos) << dot;
  EXPECT_NE(dot.find("style=bold"), std::string::npos);
  EXPECT_NE(dot.find("shape=ellipse"), std::string::npos);
  DotOptions plain;
  plain.percentages = false;
  EXPECT_EQ(to_dot(g, plain).find('%'), std::string::npos);
  DotOptions filtered;
  filtered.min_edge_us = 1;
  const auto only_root = to_dot(g, filtered);
  EXPECT_EQ(only_root.find("->"), std::string::npos);
  EXPECT_NE(only_root.find("\"thread:1\""), std::string::npos);
  EXPECT_EQ(only_root.find("\"thread:2\""), std::string::npos);
}

TEST(Export, JsonRoundTrip) {
  for (std::uint64_t seed = 40; seed < 44; ++seed) {
    auto s = mixed(seed, 3000);
    auto db = build_state_db(s.events);
    for (const auto& span : extract_spans(s.events).spans) {
      auto g = build_depgraph(span, db);
      auto j = graph_to_json(g);
      EXPECT_EQ(graph_from_json(nlohmann::json::parse(j.dump())), g);
    }
  }
  auto db = build_state_db(disk_pair());
  auto g = build_depgraph(1, db, 0, 100);
  EXPECT_EQ(graph_from_json(graph_to_json(g)), g);
  EXPECT_TRUE(graph_to_json(g)["cycle_broken"].get<bool>());
}

TEST(Export, JsonRejectsDamage) {
  auto expect_malformed = [](const std::string& text) {
    try {
      graph_from_json(nlohmann::json::parse(text));
      ADD_FAILURE() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::MalformedRecord) << text;
    }
  };
  expect_malformed("[]");
  expect_malformed(R"({"root":"thread:1"})");
  expect_malformed(R"({"root":"thread:1","nodes":[{"id":"thread:1","kind":"planet","label":"x","total_ns":1}],"edges":[]})");
  expect_malformed(R"({"root":"thread:9","nodes":[],"edges":[]})");
}
