#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "offcpu/error.hpp"
#include "offcpu/rng.hpp"

namespace offcpu {

using Point = std::vector<double>;

struct KMeansOptions {
  int max_iterations = 100;
  // Clusters are renumbered by ascending centroid along this dimension;
  // -1 means the last one (total time for span features).
  int order_dim = -1;
};

struct Clustering {
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<int> assignments;        // per input point
  std::vector<Point> centroids;        // normalized space
  std::vector<double> objective;       // after each assignment step
  int iterations = 0;
  bool converged = false;
};

// Per-dimension min-max scaling to [0, 1]; a constant dimension maps to 0.
inline std::vector<Point> normalize(const std::vector<Point>& pts) {
  if (pts.empty()) return {};
  const std::size_t d = pts.front().size();
  std::vector<double> lo(d, std::numeric_limits<double>::infinity());
  std::vector<double> hi(d, -std::numeric_limits<double>::infinity());
  for (const auto& p : pts)
    for (std::size_t j = 0; j < d; ++j) {
      lo[j] = std::min(lo[j], p[j]);
      hi[j] = std::max(hi[j], p[j]);
    }
  std::vector<Point> out(pts.size(), Point(d, 0.0));
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = 0; j < d; ++j)
      out[i][j] = hi[j] > lo[j] ? (pts[i][j] - lo[j]) / (hi[j] - lo[j]) : 0.0;
  return out;
}

inline double sq_dist(const Point& a, const Point& b) {
  double s = 0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return s;
}

// Ties go to the lowest cluster index.
inline int nearest(const Point& p, const std::vector<Point>& centroids) {
  int best = 0;
  double best_d = sq_dist(p, centroids[0]);
  for (std::size_t c = 1; c < centroids.size(); ++c) {
    double d = sq_dist(p, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

// Seeded first centre, then repeatedly the point farthest from every chosen
// centre (lowest index on ties).
inline std::vector<Point> farthest_point_init(const std::vector<Point>& pts, int k, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Point> centres;
  centres.push_back(pts[rng.below(pts.size())]);
  std::vector<double> dist(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) dist[i] = sq_dist(pts[i], centres[0]);
  while (static_cast<int>(centres.size()) < k) {
    std::size_t far = 0;
    for (std::size_t i = 1; i < pts.size(); ++i)
      if (dist[i] > dist[far]) far = i;
    centres.push_back(pts[far]);
    for (std::size_t i = 0; i < pts.size(); ++i) dist[i] = std::min(dist[i], sq_dist(pts[i], centres.back()));
  }
  return centres;
}

namespace detail {

inline double objective(const std::vector<Point>& pts, const std::vector<int>& a,
                        const std::vector<Point>& centroids) {
  double s = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) s += sq_dist(pts[i], centroids[a[i]]);
  return s;
}

// Gives each empty cluster the point farthest from its own centroid, taken
// from a cluster that can spare one.
inline void repair_empty(const std::vector<Point>& pts, std::vector<int>& a, std::vector<Point>& centroids) {
  const int k = static_cast<int>(centroids.size());
  std::vector<int> size(k, 0);
  for (int c : a) ++size[c];
  for (int c = 0; c < k; ++c) {
    if (size[c] > 0) continue;
    std::size_t best = pts.size();
    double best_d = -1;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (size[a[i]] < 2) continue;
      double d = sq_dist(pts[i], centroids[a[i]]);
      if (d > best_d) {
        best_d = d;
        best = i;
      }
    }
    if (best == pts.size()) throw Error(Errc::EmptyCluster, "cannot fill empty cluster " + std::to_string(c));
    --size[a[best]];
    a[best] = c;
    ++size[c];
    centroids[c] = pts[best];
  }
}

inline std::vector<Point> means(const std::vector<Point>& pts, const std::vector<int>& a, int k) {
  const std::size_t d = pts.front().size();
  std::vector<Point> out(k, Point(d, 0.0));
  std::vector<int> n(k, 0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    ++n[a[i]];
    for (std::size_t j = 0; j < d; ++j) out[a[i]][j] += pts[i][j];
  }
  for (int c = 0; c < k; ++c)
    for (auto& x : out[c]) x /= n[c];
  return out;
}

}  // namespace detail

// Lloyd iterations from the given centres on already normalized points.
inline Clustering lloyd(const std::vector<Point>& pts, std::vector<Point> centroids, int max_iterations = 100) {
  Clustering r;
  r.k = static_cast<int>(centroids.size());
  auto assign = [&](const std::vector<Point>& cs) {
    std::vector<int> a(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) a[i] = nearest(pts[i], cs);
    return a;
  };
  r.assignments = assign(centroids);
  detail::repair_empty(pts, r.assignments, centroids);
  r.objective.push_back(detail::objective(pts, r.assignments, centroids));
  for (r.iterations = 1; r.iterations <= max_iterations; ++r.iterations) {
    centroids = detail::means(pts, r.assignments, r.k);
    auto next = assign(centroids);
    detail::repair_empty(pts, next, centroids);
    r.objective.push_back(detail::objective(pts, next, centroids));
    if (next == r.assignments) {
      r.converged = true;
      break;
    }
    r.assignments = std::move(next);
  }
  r.iterations = std::min(r.iterations, max_iterations);
  r.centroids = std::move(centroids);
  return r;
}

inline Clustering kmeans(const std::vector<Point>& vectors, int k, std::uint64_t seed,
                         const KMeansOptions& opts = {}) {
  if (k < 2) throw Error(Errc::InvalidParameter, "k must be at least 2");
  if (static_cast<int>(vectors.size()) < k)
    throw Error(Errc::TooFewSpans, std::to_string(vectors.size()) + " spans for k=" + std::to_string(k));
  const auto pts = normalize(vectors);
  Clustering r = lloyd(pts, farthest_point_init(pts, k, seed), opts.max_iterations);
  r.seed = seed;

  const std::size_t dim = opts.order_dim < 0 ? pts.front().size() - 1 : static_cast<std::size_t>(opts.order_dim);
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return r.centroids[a][dim] < r.centroids[b][dim]; });
  std::vector<int> relabel(k);
  std::vector<Point> sorted(k);
  for (int i = 0; i < k; ++i) {
    relabel[order[i]] = i;
    sorted[i] = r.centroids[order[i]];
  }
  for (int& a : r.assignments) a = relabel[a];
  r.centroids = std::move(sorted);
  return r;
}

}  // namespace offcpu
