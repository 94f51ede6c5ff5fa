#include <gtest/gtest.h>

#include <sstream>

#include "support/fixtures.hpp"

using namespace offcpu;
using namespace fx;

namespace {

Errc code_of(const std::string& text) {
  try {
    parse_trace(text);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error for: " << text;
  return Errc::InvalidParameter;
}

std::size_t line_of(const std::string& text) {
  try {
    parse_trace(text);
  } catch (const Error& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST(ReadTrace, EmptyInputGivesNoEvents) {
  EXPECT_TRUE(parse_trace("").empty());
  EXPECT_TRUE(parse_trace("\n\n  \n").empty());
}

TEST(ReadTrace, SingleSwitchLine) {
  auto evs = parse_trace(
      R"({"ts":5,"cpu":1,"tid":7,"comm":"bash","kind":"sched_switch","prev_tid":7,"prev_state":"blocked","next_tid":9})");
  ASSERT_EQ(evs.size(), 1u);
  EXPECT_EQ(evs[0].ts, 5);
  EXPECT_EQ(evs[0].cpu, 1);
  EXPECT_EQ(evs[0].tid, 7);
  EXPECT_EQ(evs[0].comm, "bash");
  ASSERT_EQ(evs[0].kind(), EventKind::sched_switch);
  EXPECT_EQ(*evs[0].as<event::SchedSwitch>(), (event::SchedSwitch{7, PrevState::blocked, 9}));
}

TEST(ReadTrace, OutOfOrderTimestampReportsItsLine) {
  std::string text;
  for (Timestamp ts : {0, 10, 20, 15, 30, 40})
    text += R"({"ts":)" + std::to_string(ts) + R"(,"cpu":0,"tid":1,"comm":"a","kind":"page_fault"})" + "\n";
  EXPECT_EQ(code_of(text), Errc::NonMonotonicTimestamp);
  EXPECT_EQ(line_of(text), 4u);
}

TEST(ReadTrace, EqualTimestampsAreAllowed) {
  auto evs = parse_trace(
      R"({"ts":3,"cpu":0,"tid":1,"comm":"a","kind":"page_fault"})"
      "\n"
      R"({"ts":3,"cpu":0,"tid":1,"comm":"a","kind":"page_fault"})");
  EXPECT_EQ(evs.size(), 2u);
}

TEST(ReadTrace, MalformedRecords) {
  EXPECT_EQ(code_of("not json"), Errc::MalformedRecord);
  EXPECT_EQ(code_of("[1,2]"), Errc::MalformedRecord);
  EXPECT_EQ(code_of(R"({"cpu":0,"tid":1,"comm":"a","kind":"page_fault"})"), Errc::MalformedRecord);
  EXPECT_EQ(code_of(R"({"ts":"1","cpu":0,"tid":1,"comm":"a","kind":"page_fault"})"), Errc::MalformedRecord);
  EXPECT_EQ(code_of(R"({"ts":1,"cpu":-1,"tid":1,"comm":"a","kind":"page_fault"})"), Errc::MalformedRecord);
  EXPECT_EQ(code_of(R"({"ts":1,"cpu":0,"tid":1,"comm":"a","kind":"io_read"})"), Errc::MalformedRecord);
  EXPECT_EQ(code_of(R"({"ts":1,"cpu":0,"tid":1,"comm":"a","kind":"sched_switch","prev_tid":1,"prev_state":"zombie","next_tid":2})"),
            Errc::MalformedRecord);
  EXPECT_EQ(code_of(R"({"ts":1,"cpu":0,"tid":1,"comm":"a","kind":"sched_switch","prev_tid":1,"prev_state":"blocked","next_tid":1})"),
            Errc::MalformedRecord);
  EXPECT_EQ(code_of(R"({"ts":1,"cpu":0,"tid":1,"comm":"a","kind":"sched_wakeup","waker_tid":1,"wakee_tid":2,"waker_context":"bh"})"),
            Errc::MalformedRecord);
}

TEST(ReadTrace, UnknownKind) {
  EXPECT_EQ(code_of(R"({"ts":1,"cpu":0,"tid":1,"comm":"a","kind":"sched_migrate"})"), Errc::UnknownEventKind);
}

TEST(ReadTrace, ExtraKeysAreIgnored) {
  auto evs = parse_trace(R"({"ts":1,"cpu":0,"tid":1,"comm":"a","kind":"io_write","bytes":12,"extra":[1,2]})");
  ASSERT_EQ(evs.size(), 1u);
  EXPECT_EQ(evs[0].as<event::IoWrite>()->bytes, 12);
}

TEST(ReadTrace, NestingIsCheckedAtReadTime) {
  auto rec = [](const std::string& kind, const std::string& extra) {
    return R"({"ts":1,"cpu":0,"tid":1,"comm":"a","kind":")" + kind + "\"" + extra + "}\n";
  };
  EXPECT_EQ(code_of(rec("syscall_exit", R"(,"name":"read")")), Errc::NestingViolation);
  EXPECT_EQ(code_of(rec("syscall_entry", R"(,"name":"read")") + rec("syscall_exit", R"(,"name":"write")")),
            Errc::NestingViolation);
  EXPECT_EQ(code_of(rec("syscall_entry", R"(,"name":"read")") + rec("syscall_entry", R"(,"name":"read")")),
            Errc::NestingViolation);
  EXPECT_EQ(code_of(rec("irq_exit", R"(,"irq":3)")), Errc::NestingViolation);
  EXPECT_EQ(code_of(rec("irq_entry", R"(,"irq":3)") + rec("softirq_exit", R"(,"vec":3)")), Errc::NestingViolation);
  EXPECT_EQ(code_of(rec("hrtimer_expire_exit", "")), Errc::NestingViolation);
  EXPECT_EQ(code_of(rec("block_rq_complete", R"(,"dev":"sda")")), Errc::NestingViolation);
  // Switched off, the same input reads fine.
  EXPECT_EQ(parse_trace(rec("syscall_exit", R"(,"name":"read")"), ReadOptions{false}).size(), 1u);
}

TEST(ReadTrace, GzipIsDetectedByMagic) {
  const std::string plain = write_trace(fcntl_fixture());
  EXPECT_EQ(parse_trace(gzip(plain)), parse_trace(plain));
}

TEST(ReadTrace, StreamAndFileReaders) {
  const std::string plain = write_trace(fcntl_fixture());
  std::istringstream in(plain);
  EXPECT_EQ(read_trace(in), fcntl_fixture());
  TempDir dir;
  std::ofstream(dir.file("t.jsonl")) << plain;
  EXPECT_EQ(read_trace_file(dir.file("t.jsonl")), fcntl_fixture());
  EXPECT_THROW(read_trace_file(dir.file("missing.jsonl")), Error);
}

TEST(ReadTrace, ErrorMessageCarriesCodeAndLine) {
  try {
    parse_trace("\n{bad");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(std::string(e.what()).rfind("MalformedRecord at line 2", 0), 0u) << e.what();
  }
}

TEST(WriteTrace, RoundTripIsByteIdentical) {
  for (auto s : {Scenario::lock_contention, Scenario::cpu_contention, Scenario::disk_contention}) {
    const std::string text = write_trace(scenario_trace(s, 3, 20).events);
    EXPECT_EQ(write_trace(parse_trace(text)), text);
  }
  const std::string text = write_trace(mixed(5, 3000).events);
  EXPECT_EQ(write_trace(parse_trace(text)), text);
}

TEST(WriteTrace, RoundTripModuloWhitespaceAndKeyOrder) {
  const std::string loose =
      R"({ "kind" : "sched_wakeup", "ts": 4, "cpu": 2, "tid": 3, "comm": "x", "wakee_tid": 5, "waker_tid": 3, "waker_context": "softirq" })";
  const auto evs = parse_trace(loose);
  const auto back = nlohmann::json::parse(write_trace(evs));
  EXPECT_EQ(back, nlohmann::json::parse(loose));
}

TEST(Spans, SinglePair) {
  auto set = extract_spans({begin(0, 5, "r"), end(100, 5, "r")});
  ASSERT_EQ(set.spans.size(), 1u);
  EXPECT_EQ(set.spans[0].root_tid, 5);
  EXPECT_EQ(set.spans[0].t_start, 0);
  EXPECT_EQ(set.spans[0].t_end, 100);
  EXPECT_EQ(set.spans[0].duration(), 100);
  EXPECT_TRUE(set.open.empty());
}

TEST(Spans, InterleavedIdsPairByIdentifier) {
  auto set = extract_spans({begin(0, 5, "a"), begin(10, 6, "b", 1), end(30, 5, "a"), end(50, 6, "b", 1)});
  ASSERT_EQ(set.spans.size(), 2u);
  EXPECT_EQ(set.find("a")->t_end, 30);
  EXPECT_EQ(set.find("b")->t_start, 10);
  EXPECT_EQ(set.find("b")->t_end, 50);
  EXPECT_EQ(set.find("b")->root_tid, 6);
  EXPECT_EQ(set.find("zz"), nullptr);
}

TEST(Spans, EndWithoutBegin) {
  try {
    extract_spans({end(5, 1, "x")});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::UnmatchedEnd);
  }
}

TEST(Spans, DuplicateBeginOverlaps) {
  try {
    extract_spans({begin(0, 1, "x"), begin(5, 1, "x")});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::OverlappingSpan);
  }
}

TEST(Spans, UnmatchedBeginsAreReportedOpen) {
  auto set = extract_spans({begin(0, 1, "x"), begin(3, 2, "y"), end(9, 2, "y")});
  ASSERT_EQ(set.open.size(), 1u);
  EXPECT_EQ(set.open[0].span_id, "x");
  EXPECT_EQ(set.spans.size(), 1u);
}

TEST(Spans, ZeroLengthSpansAreDropped) {
  EXPECT_TRUE(extract_spans({begin(4, 1, "x"), end(4, 1, "x")}).spans.empty());
}

TEST(Spans, PredicateDelimitersPairPerThread) {
  DelimiterSpec d;
  d.begin = EventMatcher::parse("syscall_exit:accept4");
  d.end = EventMatcher::parse("syscall_entry:accept4");
  std::vector<TraceEvent> evs = {
      leave(10, 0, 7, "accept4"), leave(12, 1, 8, "accept4"), enter(15, 0, 7, "read"),
      leave(16, 0, 7, "read"),    enter(40, 1, 8, "accept4"), enter(50, 0, 7, "accept4"),
  };
  auto set = extract_spans(evs, d);
  ASSERT_EQ(set.spans.size(), 2u);
  EXPECT_EQ(set.spans[0].span_id, "7:1");
  EXPECT_EQ(set.spans[0].t_end, 50);
  EXPECT_EQ(set.spans[1].span_id, "8:1");
  EXPECT_EQ(set.spans[1].t_end, 40);

  d.root_comm = "t8";
  auto only8 = extract_spans(evs, d);
  ASSERT_EQ(only8.spans.size(), 1u);
  EXPECT_EQ(only8.spans[0].root_tid, 8);
}

TEST(Spans, MatcherRejectsUnknownKind) {
  EXPECT_THROW(EventMatcher::parse("bogus:x"), Error);
  auto m = EventMatcher::parse("span_begin");
  EXPECT_FALSE(m.name.has_value());
}

TEST(Spans, ConcatenationOfDisjointTracesIsUnion) {
  auto a = scenario_trace(Scenario::lock_contention, 1, 10).events;
  auto b = scenario_trace(Scenario::disk_contention, 2, 10).events;
  // Shift b after a and rename its spans so the two traces are disjoint.
  const Timestamp shift = a.back().ts + 1;
  for (auto& e : b) {
    e.ts += shift;
    if (auto* p = std::get_if<event::SpanBegin>(&e.payload)) p->span_id = "b" + p->span_id;
    if (auto* p = std::get_if<event::SpanEnd>(&e.payload)) p->span_id = "b" + p->span_id;
  }
  auto joined = a;
  joined.insert(joined.end(), b.begin(), b.end());
  auto whole = extract_spans(joined).spans;
  auto parts = extract_spans(a).spans;
  auto pb = extract_spans(b).spans;
  parts.insert(parts.end(), pb.begin(), pb.end());
  EXPECT_EQ(whole, parts);
}
