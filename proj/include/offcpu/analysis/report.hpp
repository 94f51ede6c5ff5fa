#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "offcpu/analysis/features.hpp"
#include "offcpu/analysis/kmeans.hpp"
#include "offcpu/error.hpp"
#include "offcpu/trace/spans.hpp"

namespace offcpu {

struct ClusterReport {
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<ExecutionSpan> spans;
  std::vector<int> clusters;  // per span
  std::vector<FeatureVector> vectors;
  std::vector<Point> centroids;

  std::vector<ExecutionSpan> members(int cluster) const {
    std::vector<ExecutionSpan> out;
    for (std::size_t i = 0; i < spans.size(); ++i)
      if (clusters[i] == cluster) out.push_back(spans[i]);
    return out;
  }
};

inline ClusterReport cluster_spans(const std::vector<ExecutionSpan>& spans, const StateDatabase& db, int k,
                                   std::uint64_t seed) {
  ClusterReport r;
  r.k = k;
  r.seed = seed;
  r.spans = spans;
  r.vectors = extract_features(spans, db);
  std::vector<Point> pts;
  pts.reserve(r.vectors.size());
  for (const auto& v : r.vectors) pts.emplace_back(v.begin(), v.end());
  Clustering c = kmeans(pts, k, seed);
  r.clusters = c.assignments;
  r.centroids = c.centroids;
  return r;
}

inline nlohmann::ordered_json report_to_json(const ClusterReport& r) {
  nlohmann::ordered_json j;
  j["k"] = r.k;
  j["seed"] = r.seed;
  auto& names = j["features"] = nlohmann::ordered_json::array();
  for (auto n : kFeatureNames) names.push_back(std::string(n));
  auto& spans = j["spans"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < r.spans.size(); ++i) {
    nlohmann::ordered_json o;
    o["span_id"] = r.spans[i].span_id;
    o["root_tid"] = r.spans[i].root_tid;
    o["t_start"] = r.spans[i].t_start;
    o["t_end"] = r.spans[i].t_end;
    o["cluster"] = r.clusters[i];
    o["vector"] = r.vectors[i];
    spans.push_back(std::move(o));
  }
  j["centroids"] = r.centroids;
  return j;
}

inline ClusterReport report_from_json(const nlohmann::json& j) {
  ClusterReport r;
  try {
    r.k = j.at("k").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& o : j.at("spans")) {
      ExecutionSpan s;
      s.span_id = o.at("span_id").get<std::string>();
      s.root_tid = o.at("root_tid").get<Tid>();
      s.t_start = o.at("t_start").get<Timestamp>();
      s.t_end = o.at("t_end").get<Timestamp>();
      r.spans.push_back(std::move(s));
      r.clusters.push_back(o.at("cluster").get<int>());
      r.vectors.push_back(o.at("vector").get<FeatureVector>());
    }
    r.centroids = j.at("centroids").get<std::vector<Point>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedRecord, std::string("cluster report: ") + e.what());
  }
  return r;
}

}  // namespace offcpu
