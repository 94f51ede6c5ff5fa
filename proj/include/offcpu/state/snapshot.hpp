#pragma once

#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "offcpu/error.hpp"
#include "offcpu/state/database.hpp"

namespace offcpu {

// Snapshot layout (UTF-8, one JSON document per line):
//   {"format":"offcpu-statedb","version":1,"trace_begin":..,"trace_end":..,
//    "events":..,"keys":N}
//   {"key":"thread/12/state","values":[[start,end,value],...]}   x N, key order
// Values are integers, strings, or thread-state tokens such as
// "blocked(task:42)", decided by the key's attribute.
constexpr int kSnapshotVersion = 1;

namespace detail {

inline nlohmann::ordered_json encode_value(const Value& v) {
  return std::visit(
      [](const auto& x) -> nlohmann::ordered_json {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, ThreadState>) return x.str();
        else return x;
      },
      v);
}

inline Value decode_value(Attr attr, const nlohmann::json& j, std::size_t line) {
  auto bad = [&] { return Error(Errc::SnapshotFormat, "bad value for " + std::string(to_string(attr)), line); };
  switch (attr) {
    case Attr::state: {
      if (!j.is_string()) throw bad();
      auto st = ThreadState::parse(j.get<std::string>());
      if (!st) throw bad();
      return *st;
    }
    case Attr::syscall:
    case Attr::comm:
      if (!j.is_string()) throw bad();
      return j.get<std::string>();
    default:
      if (!j.is_number_integer()) throw bad();
      return j.get<std::int64_t>();
  }
}

}  // namespace detail

inline void write_snapshot(std::ostream& out, const StateDatabase& db) {
  nlohmann::ordered_json header;
  header["format"] = "offcpu-statedb";
  header["version"] = kSnapshotVersion;
  header["trace_begin"] = db.trace_begin();
  header["trace_end"] = db.trace_end();
  header["events"] = db.stats().events_consumed;
  header["keys"] = db.table().size();
  out << header.dump() << '\n';
  for (const auto& [key, series] : db.table()) {
    nlohmann::ordered_json rec;
    rec["key"] = key.path();
    auto& values = rec["values"] = nlohmann::ordered_json::array();
    for (const auto& v : series)
      values.push_back(nlohmann::ordered_json::array({v.start, v.end, detail::encode_value(v.value)}));
    out << rec.dump() << '\n';
  }
}

inline std::string write_snapshot(const StateDatabase& db) {
  std::ostringstream out;
  write_snapshot(out, db);
  return out.str();
}

inline StateDatabase read_snapshot(std::istream& in) {
  using nlohmann::json;
  std::string text;
  std::size_t line = 1;
  if (!std::getline(in, text)) throw Error(Errc::SnapshotFormat, "empty snapshot");
  json header = json::parse(text, nullptr, false);
  if (header.is_discarded() || !header.is_object() || header.value("format", "") != "offcpu-statedb")
    throw Error(Errc::SnapshotFormat, "missing snapshot header", line);
  if (header.value("version", 0) != kSnapshotVersion)
    throw Error(Errc::SnapshotFormat, "unsupported snapshot version", line);
  StateDatabase::Stats stats;
  stats.events_consumed = header.value("events", std::size_t{0});
  const auto keys = header.value("keys", std::size_t{0});
  StateDatabase::Table table;
  while (std::getline(in, text)) {
    ++line;
    if (text.empty()) continue;
    json rec = json::parse(text, nullptr, false);
    if (rec.is_discarded() || !rec.is_object() || !rec.contains("key") || !rec.contains("values"))
      throw Error(Errc::SnapshotFormat, "malformed key record", line);
    StateKey key;
    try {
      key = StateKey::parse(rec["key"].get<std::string>());
    } catch (const Error& e) {
      throw Error(Errc::SnapshotFormat, e.what(), line);
    }
    StateDatabase::Series series;
    for (const auto& v : rec["values"]) {
      if (!v.is_array() || v.size() != 3 || !v[0].is_number_integer() || !v[1].is_number_integer())
        throw Error(Errc::SnapshotFormat, "malformed interval", line);
      StateValue sv{v[0].get<Timestamp>(), v[1].get<Timestamp>(), detail::decode_value(key.attr, v[2], line)};
      if (sv.start >= sv.end || (!series.empty() && sv.start < series.back().end))
        throw Error(Errc::SnapshotFormat, "intervals must be non-empty, sorted and disjoint", line);
      series.push_back(std::move(sv));
    }
    if (!table.emplace(std::move(key), std::move(series)).second)
      throw Error(Errc::SnapshotFormat, "duplicate key", line);
  }
  if (table.size() != keys) throw Error(Errc::SnapshotFormat, "key count mismatch");
  return StateDatabase(std::move(table), header.value("trace_begin", Timestamp{0}),
                       header.value("trace_end", Timestamp{0}), stats);
}

}  // namespace offcpu
