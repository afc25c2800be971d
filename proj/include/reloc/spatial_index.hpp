#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "reloc/error.hpp"
#include "reloc/pointmap.hpp"

namespace reloc {

struct IndexedPoint {
  Eigen::Vector3d p;
  std::int32_t id = 0;
};

struct NearestHit {
  std::int32_t id = -1;
  double squared_distance = std::numeric_limits<double>::infinity();
};

/// Exact 3-d nearest-neighbour index (k-d tree, median split). Query results
/// are identical to a linear scan, including the tie rule: equal distances
/// resolve to the smaller id. Build is single-writer; queries are const and
/// safe to run in parallel.
class SpatialIndex {
 public:
  static SpatialIndex build(std::vector<IndexedPoint> points) {
    require(!points.empty(), ErrorCode::empty_input, "spatial index over zero points");
    SpatialIndex idx;
    idx.points_ = std::move(points);
    idx.nodes_.reserve(idx.points_.size());
    idx.root_ = idx.build_node(0, static_cast<std::int32_t>(idx.points_.size()));
    return idx;
  }

  NearestHit nearest(const Eigen::Vector3d& q) const {
    NearestHit best;
    search(root_, q, best);
    return best;
  }

  std::size_t size() const { return points_.size(); }

 private:
  struct Node {
    std::int32_t begin = 0, end = 0;  // leaf range when left < 0
    std::int32_t left = -1, right = -1;
    int axis = 0;
    double split = 0;
  };

  static constexpr std::int32_t kLeafSize = 16;

  std::int32_t build_node(std::int32_t begin, std::int32_t end) {
    Node node;
    node.begin = begin;
    node.end = end;
    const std::int32_t id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(node);
    if (end - begin <= kLeafSize) return id;

    Eigen::Vector3d lo = points_[begin].p, hi = points_[begin].p;
    for (std::int32_t i = begin + 1; i < end; ++i) {
      lo = lo.cwiseMin(points_[i].p);
      hi = hi.cwiseMax(points_[i].p);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    const std::int32_t mid = begin + (end - begin) / 2;
    std::nth_element(points_.begin() + begin, points_.begin() + mid, points_.begin() + end,
                     [axis](const IndexedPoint& a, const IndexedPoint& b) {
                       if (a.p[axis] != b.p[axis]) return a.p[axis] < b.p[axis];
                       return a.id < b.id;
                     });
    const double split = points_[mid].p[axis];
    const std::int32_t left = build_node(begin, mid);
    const std::int32_t right = build_node(mid, end);
    nodes_[id].axis = axis;
    nodes_[id].split = split;
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  void search(std::int32_t node_id, const Eigen::Vector3d& q, NearestHit& best) const {
    const Node& node = nodes_[node_id];
    if (node.left < 0) {
      for (std::int32_t i = node.begin; i < node.end; ++i) {
        const Eigen::Vector3d d = points_[i].p - q;
        const double d2 = d.x() * d.x() + d.y() * d.y() + d.z() * d.z();
        if (d2 < best.squared_distance ||
            (d2 == best.squared_distance && points_[i].id < best.id)) {
          best.squared_distance = d2;
          best.id = points_[i].id;
        }
      }
      return;
    }
    const double diff = q[node.axis] - node.split;
    const std::int32_t near = diff < 0 ? node.left : node.right;
    const std::int32_t far = diff < 0 ? node.right : node.left;
    search(near, q, best);
    // Equal plane distance can still hide an equal-distance, smaller-id point.
    if (diff * diff <= best.squared_distance) search(far, q, best);
  }

  std::vector<IndexedPoint> points_;
  std::vector<Node> nodes_;
  std::int32_t root_ = 0;
};

/// Matching knobs shared by the index and the matchers. stride > 1 restricts
/// matching to a regular pixel lattice; min_confidence gates valid pixels.
struct MatchConfig {
  double min_confidence = 0.0;
  int stride = 1;
};

inline bool matchable(const PointMap& pm, const Pixel& px, const MatchConfig& cfg) {
  if (!pm.is_valid(px)) return false;
  if (cfg.stride > 1 && (px.x % cfg.stride != 0 || px.y % cfg.stride != 0)) return false;
  return pm.confidence[pm.index(px)] >= cfg.min_confidence;
}

/// Index over the matchable pixels of a point map; ids are row-major pixel
/// indices so the nearest-neighbour tie rule is the spec'd one.
inline SpatialIndex build_spatial_index(const PointMap& pm, const MatchConfig& cfg = {}) {
  std::vector<IndexedPoint> pts;
  pts.reserve(pm.valid.size());
  for (int y = 0; y < pm.height; ++y) {
    for (int x = 0; x < pm.width; ++x) {
      const Pixel px{x, y};
      if (matchable(pm, px, cfg)) pts.push_back({pm.point(px), pm.index(px)});
    }
  }
  require(!pts.empty(), ErrorCode::empty_input, "point map has no matchable pixels");
  return SpatialIndex::build(std::move(pts));
}

}  // namespace reloc
