#include <gtest/gtest.h>

#include <sys/wait.h>

#include <sstream>

#include "offcpu/cli/app.hpp"
#include "support/fixtures.hpp"

using namespace offcpu;
using namespace fx;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "offcpu");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
 protected:
  TempDir dir;
  std::string f(const std::string& name) const { return dir.file(name); }

  void synth(const std::string& scenario, int spans, const std::string& seed = "7") {
    auto r = run({"synth", "--scenario", scenario, "--seed", seed, "--spans", std::to_string(spans), "-o",
                  f("trace.jsonl"), "--truth", f("truth.json")});
    ASSERT_EQ(r.code, 0) << r.err;
  }
};

}  // namespace

TEST_F(Cli, SynthWritesTraceAndTruth) {
  synth("lock", 20);
  auto events = read_trace_file(f("trace.jsonl"));
  EXPECT_EQ(extract_spans(events).spans.size(), 20u);
  auto truth = ground_truth_from_json(nlohmann::json::parse(slurp(f("truth.json"))));
  EXPECT_EQ(truth.size(), 20u);
  EXPECT_EQ(slurp(f("trace.jsonl")), write_trace(scenario_trace(Scenario::lock_contention, 7, 20).events));
}

TEST_F(Cli, SameArgumentsSameBytes) {
  synth("disk", 20);
  const std::string trace = slurp(f("trace.jsonl"));
  ASSERT_EQ(run({"graph", "-t", f("trace.jsonl"), "--index", "3", "-o", f("a.dot"), "--json", f("a.json")}).code, 0);
  ASSERT_EQ(run({"cluster", "-t", f("trace.jsonl"), "-k", "2", "-o", f("r1.json")}).code, 0);
  synth("disk", 20);
  EXPECT_EQ(slurp(f("trace.jsonl")), trace);
  ASSERT_EQ(run({"graph", "-t", f("trace.jsonl"), "--index", "3", "-o", f("b.dot"), "--json", f("b.json")}).code, 0);
  ASSERT_EQ(run({"cluster", "-t", f("trace.jsonl"), "-k", "2", "-o", f("r2.json")}).code, 0);
  EXPECT_EQ(slurp(f("a.dot")), slurp(f("b.dot")));
  EXPECT_EQ(slurp(f("a.json")), slurp(f("b.json")));
  EXPECT_EQ(slurp(f("r1.json")), slurp(f("r2.json")));
}

TEST_F(Cli, GraphBySpanId) {
  synth("lock", 10);
  auto r = run({"graph", "-t", f("trace.jsonl"), "--span", "s0", "-o", f("g.dot"), "--json", f("g.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("span s0"), std::string::npos);
  const std::string dot = slurp(f("g.dot"));
  EXPECT_EQ(dot.rfind("digraph depgraph {", 0), 0u);
  auto g = graph_from_json(nlohmann::json::parse(slurp(f("g.json"))));
  EXPECT_EQ(to_dot(g), dot);
  ASSERT_EQ(run({"graph", "-t", f("trace.jsonl"), "--span", "s0", "-o", f("p.dot"), "--no-percentages"}).code, 0);
  EXPECT_EQ(slurp(f("p.dot")).find('%'), std::string::npos);
}

TEST_F(Cli, GzipInput) {
  synth("cpu", 6);
  {
    std::ofstream out(f("trace.jsonl.gz"), std::ios::binary);
    out << gzip(slurp(f("trace.jsonl")));
  }
  ASSERT_EQ(run({"graph", "-t", f("trace.jsonl"), "-o", f("a.dot")}).code, 0);
  ASSERT_EQ(run({"graph", "-t", f("trace.jsonl.gz"), "-o", f("b.dot")}).code, 0);
  EXPECT_EQ(slurp(f("a.dot")), slurp(f("b.dot")));
}

TEST_F(Cli, ClusterThenCompare) {
  synth("lock", 40);
  auto c = run({"cluster", "-t", f("trace.jsonl"), "-k", "2", "--seed", "3", "-o", f("report.json")});
  ASSERT_EQ(c.code, 0) << c.err;
  EXPECT_NE(c.out.find("cluster 0:"), std::string::npos);
  auto report = report_from_json(nlohmann::json::parse(slurp(f("report.json"))));
  EXPECT_EQ(report.spans.size(), 40u);
  auto r = run({"compare", "-t", f("trace.jsonl"), "--report", f("report.json"), "--left", "0", "--right", "1",
                "--stat", "duration", "-o", f("cmp.dot"), "--json", f("cmp.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(f("cmp.dot")).rfind("digraph comparison {", 0), 0u);
  auto j = nlohmann::json::parse(slurp(f("cmp.json")));
  EXPECT_EQ(j["stat"], "duration");
  EXPECT_FALSE(j["edges"].empty());
}

TEST_F(Cli, InspectPrintsSlices) {
  {
    std::ofstream out(f("t.jsonl"));
    out << write_trace(fcntl_fixture());
  }
  auto r = run({"inspect", "-t", f("t.jsonl"), "--key", "thread/1/state", "--snapshot", f("db.snap")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("thread/1/state [10, 50) blocked(task:2)"), std::string::npos) << r.out;
  std::istringstream snap(slurp(f("db.snap")));
  EXPECT_EQ(read_snapshot(snap).table(), build_state_db(fcntl_fixture()).table());
  auto w = run({"inspect", "-t", f("t.jsonl"), "--key", "thread/1/state", "--from", "40", "--to", "55"});
  EXPECT_NE(w.out.find("[40, 50) blocked(task:2)"), std::string::npos) << w.out;
  EXPECT_NE(w.out.find("[50, 55) runnable"), std::string::npos) << w.out;
}

TEST_F(Cli, UsageErrorsExitTwo) {
  synth("lock", 4);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"graph"}).code, 2);
  EXPECT_EQ(run({"synth", "--scenario", "network", "-o", f("x"), "--truth", f("y")}).code, 2);
  EXPECT_EQ(run({"synth", "--slow-fraction", "2", "-o", f("x"), "--truth", f("y")}).code, 2);
  EXPECT_EQ(run({"cluster", "-t", f("trace.jsonl"), "-k", "1", "-o", f("r.json")}).code, 2);
  EXPECT_EQ(run({"cluster", "-t", f("trace.jsonl"), "-k", "9", "-o", f("r.json")}).code, 2);
  EXPECT_EQ(run({"graph", "-t", f("trace.jsonl"), "--span", "s0", "--index", "1", "-o", f("g.dot")}).code, 2);
  EXPECT_EQ(run({"inspect", "-t", f("trace.jsonl"), "--key", "thread/x/state"}).code, 2);
  {
    std::ofstream out(f("bad.jsonl"));
    out << "{\"ts\": 1}\n";
  }
  auto r = run({"graph", "-t", f("bad.jsonl"), "-o", f("g.dot")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("error:"), std::string::npos);
  EXPECT_FALSE(std::filesystem::exists(f("g.dot")));
}

TEST_F(Cli, MissingThingsExitThree) {
  synth("lock", 4);
  EXPECT_EQ(run({"graph", "-t", f("nope.jsonl"), "-o", f("g.dot")}).code, 3);
  EXPECT_EQ(run({"graph", "-t", f("trace.jsonl"), "--span", "s99", "-o", f("g.dot")}).code, 3);
  EXPECT_EQ(run({"graph", "-t", f("trace.jsonl"), "--index", "4", "-o", f("g.dot")}).code, 3);
  EXPECT_EQ(run({"inspect", "-t", f("trace.jsonl"), "--key", "thread/424242/state"}).code, 3);
  ASSERT_EQ(run({"cluster", "-t", f("trace.jsonl"), "-k", "2", "-o", f("r.json")}).code, 0);
  EXPECT_EQ(run({"compare", "-t", f("trace.jsonl"), "--report", f("r.json"), "--left", "0", "--right", "5"}).code, 3);
  EXPECT_EQ(run({"compare", "-t", f("trace.jsonl"), "--report", f("missing.json")}).code, 3);
}

TEST_F(Cli, SpanSelection) {
  synth("mixed", 10);
  auto all = run({"inspect", "-t", f("trace.jsonl"), "--spans"});
  ASSERT_EQ(all.code, 0);
  auto events = read_trace_file(f("trace.jsonl"));
  const Tid tid = extract_spans(events).spans.at(0).root_tid;
  auto r = run({"cluster", "-t", f("trace.jsonl"), "-k", "2", "--root-tid", std::to_string(tid), "-o", f("r.json")});
  if (r.code == 0) {
    for (const auto& s : report_from_json(nlohmann::json::parse(slurp(f("r.json")))).spans) EXPECT_EQ(s.root_tid, tid);
  } else {
    EXPECT_EQ(r.code, 2);  // fewer spans than clusters
  }
}

TEST_F(Cli, BinaryExitStatus) {
  auto status = [](const std::string& args) {
    int rc = std::system((std::string(OFFCPU_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  };
  EXPECT_EQ(status("--help"), 0);
  EXPECT_EQ(status("synth --scenario cpu --spans 5 -o " + f("t.jsonl") + " --truth " + f("g.json")), 0);
  EXPECT_EQ(status("graph -t " + f("t.jsonl") + " -o " + f("g.dot")), 0);
  EXPECT_EQ(status("graph -t " + f("missing.jsonl")), 3);
  EXPECT_EQ(status("graph --bogus"), 2);
}
