#pragma once
// Point-cloud geometry: normalization, farthest point sampling, k-nearest
// grouping, resolution resampling. A cloud is [N,D] with xyz in the first
// three columns; any further columns (colors here) ride along untouched.
// All neighborhood math runs on xyz only.
//
// Everything is deterministic given its inputs: ties break toward the lowest
// point index, and the only randomness (sampling starts, upsample picks) comes
// through an explicit Rng.

#include <algorithm>
#include <vector>

#include "pointlm/common.hpp"
#include "pointlm/rng.hpp"

namespace pointlm {

template <typename S>
void check_cloud(const Mat<S>& cloud, const char* who) {
  if (cloud.rows() < 1 || cloud.cols() < 3)
    throw shape_error(std::string(who) + ": cloud must be [N>=1, D>=3], got " +
                      shape_str(cloud.rows(), cloud.cols()));
  if (!cloud.allFinite())
    throw numeric_error(std::string(who) + ": cloud contains non-finite values");
}

// Center xyz on the centroid and scale into the unit sphere (max distance from
// the origin becomes 1). A degenerate cloud (all points coincident) maps to
// all-zero xyz. Extra columns pass through.
template <typename S>
Mat<S> normalize_cloud(const Mat<S>& cloud) {
  check_cloud(cloud, "normalize_cloud");
  Mat<S> out = cloud;
  Eigen::Matrix<S, 1, 3> centroid = out.leftCols(3).colwise().mean();
  out.leftCols(3).rowwise() -= centroid;
  const S max_norm = out.leftCols(3).rowwise().norm().maxCoeff();
  if (max_norm > S(0)) out.leftCols(3) /= max_norm;
  return out;
}

template <typename S>
S sq_dist_xyz(const Mat<S>& cloud, Eigen::Index a, Eigen::Index b) {
  return (cloud.row(a).head(3) - cloud.row(b).head(3)).squaredNorm();
}

// Greedy farthest point sampling over xyz. The first pick is start_index;
// each subsequent pick maximizes the distance to the already-selected set,
// lowest index winning ties. Asking for more samples than points repeats the
// selection order cyclically.
template <typename S>
std::vector<int> farthest_point_sample(const Mat<S>& cloud, int n_samples,
                                       int start_index = 0) {
  check_cloud(cloud, "farthest_point_sample");
  const int n = int(cloud.rows());
  require(n_samples >= 1, "farthest_point_sample: n_samples must be >= 1");
  require(start_index >= 0 && start_index < n,
          "farthest_point_sample: start index " + std::to_string(start_index) +
              " out of range for " + std::to_string(n) + " points");

  const int distinct = std::min(n_samples, n);
  std::vector<int> selected;
  selected.reserve(std::size_t(n_samples));
  selected.push_back(start_index);
  std::vector<char> taken(std::size_t(n), 0);
  taken[std::size_t(start_index)] = 1;

  // min_d[i]: squared distance from point i to the nearest selected point.
  std::vector<S> min_d(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    min_d[std::size_t(i)] = sq_dist_xyz(cloud, i, start_index);

  while (int(selected.size()) < distinct) {
    // Farthest not-yet-selected point; strict > keeps the lowest index on
    // ties (duplicate points at distance zero included).
    int best = -1;
    S best_d = S(0);
    for (int i = 0; i < n; ++i) {
      if (taken[std::size_t(i)]) continue;
      if (best < 0 || min_d[std::size_t(i)] > best_d) {
        best = i;
        best_d = min_d[std::size_t(i)];
      }
    }
    selected.push_back(best);
    taken[std::size_t(best)] = 1;
    for (int i = 0; i < n; ++i) {
      const S d = sq_dist_xyz(cloud, i, best);
      if (d < min_d[std::size_t(i)]) min_d[std::size_t(i)] = d;
    }
  }
  for (int i = distinct; i < n_samples; ++i)
    selected.push_back(selected[std::size_t(i % distinct)]);
  return selected;
}

template <typename S>
std::vector<int> farthest_point_sample(const Mat<S>& cloud, int n_samples,
                                       Rng& rng) {
  check_cloud(cloud, "farthest_point_sample");
  const int start = int(rng.uniform_index(std::uint64_t(cloud.rows())));
  return farthest_point_sample(cloud, n_samples, start);
}

// One group per center: the center itself first, then its nearest neighbors
// in ascending xyz distance (ties toward lower index). Fewer points than k
// pads with repeats of the center.
struct GroupSet {
  std::vector<int> centers;
  std::vector<std::vector<int>> members;  // centers.size() x k point indices
};

template <typename S>
GroupSet knn_group(const Mat<S>& cloud, const std::vector<int>& centers,
                   int k) {
  check_cloud(cloud, "knn_group");
  const int n = int(cloud.rows());
  require(k >= 1, "knn_group: k must be >= 1");
  require(!centers.empty(), "knn_group: no centers given");

  GroupSet gs;
  gs.centers = centers;
  gs.members.reserve(centers.size());
  std::vector<std::pair<S, int>> order;
  for (int c : centers) {
    require(c >= 0 && c < n, "knn_group: center index " + std::to_string(c) +
                                 " out of range for " + std::to_string(n) +
                                 " points");
    order.clear();
    for (int i = 0; i < n; ++i) {
      if (i == c) continue;
      order.emplace_back(sq_dist_xyz(cloud, c, i), i);
    }
    std::sort(order.begin(), order.end());  // (distance, index) ascending

    std::vector<int> group;
    group.reserve(std::size_t(k));
    group.push_back(c);
    for (const auto& [d, i] : order) {
      if (int(group.size()) >= k) break;
      (void)d;
      group.push_back(i);
    }
    while (int(group.size()) < k) group.push_back(c);
    gs.members.push_back(std::move(group));
  }
  return gs;
}

// Neighborhood tensors for the tokenizer: raw neighbor rows stacked as
// [n_groups*k, D] and their xyz offsets from the group center as
// [n_groups*k, 3].
template <typename S>
struct GroupedFeatures {
  Mat<S> features;  // [n_groups*k, D]
  Mat<S> rel_xyz;   // [n_groups*k, 3]
  int n_groups = 0;
  int k = 0;
};

template <typename S>
GroupedFeatures<S> gather_groups(const Mat<S>& cloud, const GroupSet& gs,
                                 int k) {
  GroupedFeatures<S> gf;
  gf.n_groups = int(gs.centers.size());
  gf.k = k;
  gf.features.resize(Eigen::Index(gf.n_groups) * k, cloud.cols());
  gf.rel_xyz.resize(Eigen::Index(gf.n_groups) * k, 3);
  for (int g = 0; g < gf.n_groups; ++g) {
    require(int(gs.members[std::size_t(g)].size()) == k,
            "gather_groups: group size disagrees with k");
    const int c = gs.centers[std::size_t(g)];
    for (int j = 0; j < k; ++j) {
      const int p = gs.members[std::size_t(g)][std::size_t(j)];
      const Eigen::Index row = Eigen::Index(g) * k + j;
      gf.features.row(row) = cloud.row(p);
      gf.rel_xyz.row(row) = cloud.row(p).head(3) - cloud.row(c).head(3);
    }
  }
  return gf;
}

// Change the resolution of a cloud. Same size: identity. Downsampling keeps a
// farthest-point subset, in original point order. Upsampling keeps all
// originals and appends uniformly drawn duplicates.
template <typename S>
Mat<S> resample_cloud(const Mat<S>& cloud, int target, Rng& rng) {
  check_cloud(cloud, "resample_cloud");
  require(target >= 1, "resample_cloud: target size must be >= 1");
  const int n = int(cloud.rows());
  if (target == n) return cloud;

  Mat<S> out(target, cloud.cols());
  if (target < n) {
    std::vector<int> keep = farthest_point_sample(cloud, target, 0);
    std::sort(keep.begin(), keep.end());
    for (int i = 0; i < target; ++i) out.row(i) = cloud.row(keep[std::size_t(i)]);
  } else {
    out.topRows(n) = cloud;
    for (int i = n; i < target; ++i)
      out.row(i) = cloud.row(Eigen::Index(rng.uniform_index(std::uint64_t(n))));
  }
  return out;
}

}  // namespace pointlm
