#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "reloc/error.hpp"
#include "reloc/geometry.hpp"
#include "reloc/pointmap.hpp"

namespace reloc {

enum class DepthSpace : std::uint8_t { metric = 0, canonical = 1 };

/// Per-pixel depth. Values are double in memory (float32 on disk); focal_used
/// records the focal length the values correspond to (f, or f^c for
/// canonical-space predictions).
struct DepthMap {
  int width = 0, height = 0;
  std::vector<double> depth;
  std::vector<std::uint8_t> valid;
  DepthSpace space = DepthSpace::metric;
  double focal_used = 0;

  static DepthMap empty(int width, int height) {
    DepthMap d;
    d.width = width;
    d.height = height;
    d.depth.assign(static_cast<std::size_t>(width) * height, 0.0);
    d.valid.assign(static_cast<std::size_t>(width) * height, 0);
    return d;
  }

  std::int32_t index(const Pixel& p) const { return p.y * width + p.x; }
  bool is_valid(const Pixel& p) const { return valid[index(p)] != 0; }
  double at(const Pixel& p) const { return depth[index(p)]; }
};

inline void validate(const DepthMap& dm) {
  const auto n = static_cast<std::size_t>(dm.width) * dm.height;
  require(dm.width > 0 && dm.height > 0, ErrorCode::invalid_input, "depth map has no pixels");
  require(dm.depth.size() == n && dm.valid.size() == n, ErrorCode::invalid_input,
          "depth map channel sizes disagree");
  for (std::size_t i = 0; i < n; ++i) {
    if (dm.valid[i]) {
      require(std::isfinite(dm.depth[i]) && dm.depth[i] > 0, ErrorCode::invalid_input,
              "valid depth must be finite and positive");
    }
  }
}

/// w_r = f^c / f, the image rescale into canonical camera space.
inline double rescale_ratio(double f, double fc) {
  require(f > 0 && fc > 0, ErrorCode::invalid_input, "focal lengths must be positive");
  return fc / f;
}

/// Canonical depth back to metric: d = (f / f^c) * d_c. A map already in
/// metric space is returned unchanged.
inline DepthMap restore_metric_depth(const DepthMap& dm, double f, double fc) {
  require(f > 0 && fc > 0, ErrorCode::invalid_input, "focal lengths must be positive");
  DepthMap out = dm;
  if (dm.space == DepthSpace::metric) return out;
  const double wd = f / fc;
  const auto n = out.depth.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (out.valid[i]) out.depth[i] *= wd;
  }
  out.space = DepthSpace::metric;
  out.focal_used = f;
  return out;
}

/// Inverse of restore_metric_depth, used to stage canonical-space inputs.
inline DepthMap make_canonical(const DepthMap& dm, double f, double fc) {
  require(f > 0 && fc > 0, ErrorCode::invalid_input, "focal lengths must be positive");
  DepthMap out = dm;
  if (dm.space == DepthSpace::canonical) return out;
  const double wr = fc / f;
  const auto n = out.depth.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (out.valid[i]) out.depth[i] *= wr;
  }
  out.space = DepthSpace::canonical;
  out.focal_used = fc;
  return out;
}

/// 3D point pair: p1 in the reference camera frame, p2 in the query camera
/// frame, from depth back-projection of one correspondence.
struct BackprojectedPair {
  Eigen::Vector3d p1;
  Eigen::Vector3d p2;
  std::int32_t pair_index = 0;  // position in the source correspondence list
};

struct BackprojectResult {
  std::vector<BackprojectedPair> pairs;
  int skipped = 0;  // correspondences lacking valid depth at either end
};

inline BackprojectResult backproject_matches(const CorrespondenceMap& map, const DepthMap& d1,
                                             const DepthMap& d2, const CameraIntrinsics& k1,
                                             const CameraIntrinsics& k2) {
  require(d1.space == DepthSpace::metric && d2.space == DepthSpace::metric,
          ErrorCode::invalid_input, "depth maps must be metric before back-projection");
  BackprojectResult out;
  for (std::size_t i = 0; i < map.pairs.size(); ++i) {
    const auto& c = map.pairs[i];
    if (!d1.is_valid(c.ref) || !d2.is_valid(c.query)) {
      ++out.skipped;
      continue;
    }
    out.pairs.push_back({backproject(k1, {double(c.ref.x), double(c.ref.y)}, d1.at(c.ref)),
                         backproject(k2, {double(c.query.x), double(c.query.y)}, d2.at(c.query)),
                         static_cast<std::int32_t>(i)});
  }
  require(!out.pairs.empty(), ErrorCode::no_depth_overlap,
          "no correspondence has valid depth at both ends");
  return out;
}

/// Per-pair scale factor s = ||p1 - R p2|| / ||t_bar||. With unit t_bar this
/// is the implied baseline length; r must map query-frame points into the
/// reference frame for the value to equal ||t||.
inline double scale_candidate(const Eigen::Vector3d& p1, const Eigen::Vector3d& p2,
                              const Rotation& r, const UnitTranslation& /*dir*/) {
  return (p1 - r * p2).norm();
}

struct ScaleEstimate {
  double scale = 0;
  int inlier_count = 0;
  int candidates_total = 0;
};

/// Consensus voting over per-pair scale candidates. The vote is exhaustive
/// and deterministic, so no sampling configuration applies.
struct ScaleVoteConfig {
  double rel_tol = 0.1;    // agreement window, relative
  double epsilon = 1e-6;   // candidates at or below this are degenerate
};

/// Every candidate votes for the candidates within rel_tol of it; the one
/// with the largest agreement wins (ties: smaller value) and the final scale
/// is the mean over its agreeing set. Near-zero candidates are excluded
/// before voting. Permutation-invariant in the input order.
inline ScaleEstimate ransac_scale(const std::vector<BackprojectedPair>& pairs,
                                  const Rotation& r, const UnitTranslation& dir,
                                  const ScaleVoteConfig& cfg = {}) {
  require(!pairs.empty(), ErrorCode::invalid_input, "scale voting needs at least one pair");

  std::vector<double> cands;
  cands.reserve(pairs.size());
  for (const auto& p : pairs) {
    const double s = scale_candidate(p.p1, p.p2, r, dir);
    if (s > cfg.epsilon) cands.push_back(s);
  }
  require(!cands.empty(), ErrorCode::scale_failed, "all scale candidates are degenerate");

  std::sort(cands.begin(), cands.end());
  int best_count = 0;
  double best_scale = 0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const double s = cands[i];
    const double window = cfg.rel_tol * std::max(s, cfg.epsilon);
    const auto lo = std::lower_bound(cands.begin(), cands.end(), s - window);
    const auto hi = std::upper_bound(cands.begin(), cands.end(), s + window);
    const int count = static_cast<int>(hi - lo);
    if (count > best_count) {  // ascending scan makes ties pick the smaller s
      best_count = count;
      double sum = 0;
      for (auto it = lo; it != hi; ++it) sum += *it;
      best_scale = sum / count;
    }
  }

  ScaleEstimate out;
  out.scale = best_scale;
  out.inlier_count = best_count;
  out.candidates_total = static_cast<int>(pairs.size());
  return out;
}

/// t = s * t_bar; the result is the relative pose of the query image with
/// respect to the reference image.
inline Pose compose_final_pose(const Rotation& r, const UnitTranslation& dir,
                               const ScaleEstimate& s) {
  require(s.scale > 0, ErrorCode::invalid_input, "scale must be positive");
  return Pose{r, s.scale * dir.vector()};
}

}  // namespace reloc
