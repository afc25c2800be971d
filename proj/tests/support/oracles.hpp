#pragma once

// Test-only oracles, independent of the implementation paths they check.

#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "reloc/essential.hpp"
#include "reloc/geometry.hpp"
#include "reloc/pointmap.hpp"
#include "reloc/rng.hpp"
#include "reloc/synth.hpp"

namespace oracles {

/// Exhaustive nearest-valid-point search with the row-major tie rule.
inline std::int32_t brute_force_nearest(const reloc::PointMap& pm, const Eigen::Vector3d& q) {
  std::int32_t best = -1;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (int y = 0; y < pm.height; ++y) {
    for (int x = 0; x < pm.width; ++x) {
      const reloc::Pixel px{x, y};
      if (!pm.is_valid(px)) continue;
      const Eigen::Vector3d d = pm.point(px) - q;
      const double d2 = d.x() * d.x() + d.y() * d.y() + d.z() * d.z();
      const std::int32_t idx = pm.index(px);
      if (d2 < best_d2 || (d2 == best_d2 && idx < best)) {
        best_d2 = d2;
        best = idx;
      }
    }
  }
  return best;
}

/// Directed brute-force matching, mirroring nn_match's contract.
inline std::vector<std::pair<std::int32_t, std::int32_t>> brute_force_matches(
    const reloc::PointMap& src, const reloc::PointMap& dst) {
  std::vector<std::pair<std::int32_t, std::int32_t>> out;
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      const reloc::Pixel px{x, y};
      if (!src.is_valid(px)) continue;
      out.emplace_back(src.index(px), brute_force_nearest(dst, src.point(px)));
    }
  }
  return out;
}

/// Mutual-consistency intersection over directed match lists.
inline std::set<std::pair<std::int32_t, std::int32_t>> brute_force_reciprocal(
    const std::vector<std::pair<std::int32_t, std::int32_t>>& fwd,
    const std::vector<std::pair<std::int32_t, std::int32_t>>& bwd) {
  std::map<std::int32_t, std::int32_t> back;
  for (const auto& [q, r] : bwd) back[q] = r;
  std::set<std::pair<std::int32_t, std::int32_t>> keep;
  for (const auto& [r, q] : fwd) {
    const auto it = back.find(q);
    if (it != back.end() && it->second == r) keep.insert({r, q});
  }
  return keep;
}

/// Relative rotation angle via quaternions, independent of the trace formula.
inline double quaternion_angle_deg(const reloc::Rotation& a, const reloc::Rotation& b) {
  const Eigen::Quaterniond qa(a.matrix()), qb(b.matrix());
  const double dot = std::min(1.0, std::abs(qa.dot(qb)));
  return reloc::rad_to_deg(2.0 * std::acos(dot));
}

/// Full-precision rotation angle: atan2 of the sine part (off-diagonal skew)
/// against the cosine part. The arccos formula saturates around sqrt(eps)
/// (~1.2e-6 deg) near the identity; this one resolves ~1e-13 deg there.
inline double precise_angle_deg(const reloc::Rotation& a, const reloc::Rotation& b) {
  const Eigen::Matrix3d r = a.matrix() * b.matrix().transpose();
  const Eigen::Vector3d v(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  const double s = 0.5 * v.norm();
  const double c = 0.5 * (r.trace() - 1.0);
  return reloc::rad_to_deg(std::atan2(s, c));
}

/// Angle between direction vectors, precise near zero.
inline double vector_angle_deg(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  return reloc::rad_to_deg(std::atan2(a.cross(b).norm(), a.dot(b)));
}

/// Random proper rotation (uniform axis, uniform angle in [0, max_angle]).
inline reloc::Rotation random_rotation(reloc::Rng& rng, double max_angle_rad = reloc::kPi) {
  return reloc::Rotation::axis_angle(rng.unit_vector(), rng.uniform(0.0, max_angle_rad));
}

/// Continuous-space minimal-problem generator: a random relative pose and n
/// exact correspondences of points in front of both cameras. No pixel grid.
struct TwoViewProblem {
  reloc::Rotation rotation;                 // query w.r.t. reference
  reloc::UnitTranslation direction;
  std::vector<reloc::NormalizedCorrespondence> corrs;
  std::vector<Eigen::Vector3d> points;      // reference-frame positions
};

inline TwoViewProblem random_two_view(reloc::Rng& rng, int n_points,
                                      double max_rotation_rad = 0.5) {
  for (;;) {
    TwoViewProblem p;
    p.rotation = random_rotation(rng, max_rotation_rad);
    p.direction = reloc::UnitTranslation::from_vector(rng.unit_vector());
    p.corrs.reserve(n_points);
    bool ok = true;
    for (int i = 0; i < n_points && ok; ++i) {
      const Eigen::Vector3d x(rng.uniform(-1.5, 1.5), rng.uniform(-1.0, 1.0),
                              rng.uniform(3.0, 9.0));
      const Eigen::Vector3d q = p.rotation * x + p.direction.vector();
      if (q.z() < 0.2) {
        ok = false;
        break;
      }
      p.points.push_back(x);
      p.corrs.push_back({{x.x() / x.z(), x.y() / x.z()}, {q.x() / q.z(), q.y() / q.z()}});
    }
    if (ok) return p;
  }
}

/// Replaces a fraction of correspondences with mismatched endpoints.
inline std::vector<char> inject_outliers(std::vector<reloc::NormalizedCorrespondence>& corrs,
                                         double fraction, reloc::Rng& rng) {
  std::vector<char> labels(corrs.size(), 0);
  const auto k = static_cast<std::uint32_t>(std::llround(fraction * corrs.size()));
  if (k < 2) return labels;
  const auto sel = rng.sample_indices(static_cast<std::uint32_t>(corrs.size()), k);
  for (std::uint32_t i = 0; i < k; ++i) {
    corrs[sel[i]].x2 = corrs[sel[(i + 1) % k]].x2;
    labels[sel[i]] = 1;
  }
  return labels;
}

/// Frobenius distance between essential matrices up to the sign ambiguity,
/// both normalized.
inline double essential_distance(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  const Eigen::Matrix3d an = a / a.norm() * std::sqrt(2.0);
  const Eigen::Matrix3d bn = b / b.norm() * std::sqrt(2.0);
  return std::min((an - bn).norm(), (an + bn).norm());
}

/// Random point map: n valid points at distinct random pixels.
inline reloc::PointMap random_pointmap(reloc::Rng& rng, int width, int height, int n_points,
                                       double extent = 5.0) {
  reloc::PointMap pm = reloc::PointMap::empty(width, height);
  for (int i = 0; i < n_points; ++i) {
    const auto idx = static_cast<std::int32_t>(
        rng.uniform_index(static_cast<std::uint64_t>(width) * height));
    pm.valid[idx] = 1;
    pm.points[3 * idx] = rng.uniform(-extent, extent);
    pm.points[3 * idx + 1] = rng.uniform(-extent, extent);
    pm.points[3 * idx + 2] = rng.uniform(-extent, extent);
  }
  return pm;
}

// ---------------------------------------------------------------------------
// Ghost-twin clutter scene: instance A's reference content is copied under
// instance B's query mask, where B is a quarter-turn-rotated copy of A's
// pixel footprint at the same depth layer. Global 3-d matching then pairs A
// with B's pixels (exact content match), and those wrong pairs are perfectly
// consistent with a pose whose rotation is off by 90 degrees. Matching inside
// the instance masks never sees the ghosts. Background pairs stay clean, but
// there are fewer of them than ghost pairs, so the wrong consensus wins
// whenever instance knowledge is off.
// ---------------------------------------------------------------------------

inline reloc::SyntheticPair ghost_twin_scene(std::uint64_t seed, int instance_points = 60,
                                             int background_points = 30) {
  using namespace reloc;
  Rng rng = Rng::substream(seed, "ghost-twin");

  const int w = 128, h = 96;
  CameraIntrinsics k;
  k.fx = k.fy = 160;
  k.cx = 64;
  k.cy = 48;
  k.width = w;
  k.height = h;

  // Lattice: camera 2 at C = (1, 0, 0), no rotation; layers z = 160 / m.
  const Eigen::Vector3d center(1.0, 0.0, 0.0);
  const Pose gt{Rotation::identity(), -center};
  const int disp_a = 20;             // instance layer: z = 8
  const double za = 160.0 / disp_a;

  SyntheticPair sp;
  sp.k1 = sp.k2 = k;
  sp.gt_pose = gt;
  sp.pm1 = PointMap::empty(w, h);
  sp.pm2 = PointMap::empty(w, h);
  sp.d1 = DepthMap::empty(w, h);
  sp.d2 = DepthMap::empty(w, h);
  sp.d1.space = sp.d2.space = DepthSpace::metric;
  sp.d1.focal_used = sp.d2.focal_used = k.fx;
  sp.mask1 = InstanceMask::background(w, h);
  sp.mask2 = InstanceMask::background(w, h);

  const Pixel ca{40, 48}, cb{88, 48};
  const int radius = 10;

  const auto place = [&](const Pixel& px1, double z, std::uint8_t label) {
    const Eigen::Vector3d x = backproject(k, {double(px1.x), double(px1.y)}, z);
    const int m = static_cast<int>(std::llround(k.fx / z));
    const Pixel px2{px1.x - m, px1.y};
    sp.pm1.set_point(px1, x);
    sp.pm1.valid[sp.pm1.index(px1)] = 1;
    sp.d1.depth[sp.d1.index(px1)] = z;
    sp.d1.valid[sp.d1.index(px1)] = 1;
    sp.mask1.labels[sp.pm1.index(px1)] = label;
    sp.pm2.set_point(px2, x);
    sp.pm2.valid[sp.pm2.index(px2)] = 1;
    sp.d2.depth[sp.d2.index(px2)] = (gt * x).z();
    sp.d2.valid[sp.d2.index(px2)] = 1;
    sp.mask2.labels[sp.pm2.index(px2)] = label;
    sp.gt_pairs.push_back({px1, px2, label});
    return px2;
  };

  // Instance A and its rotated twin B (same layer, 90-degree pixel map).
  std::set<std::pair<int, int>> used;
  std::vector<Pixel> a_px1, b_px2;
  while (static_cast<int>(a_px1.size()) < instance_points) {
    const int dx = static_cast<int>(rng.uniform_index(2 * radius + 1)) - radius;
    const int dy = static_cast<int>(rng.uniform_index(2 * radius + 1)) - radius;
    if (dx * dx + dy * dy > radius * radius) continue;
    if (!used.insert({dx, dy}).second) continue;
    const Pixel pa{ca.x + dx, ca.y + dy};
    place(pa, za, 1);
    a_px1.push_back(pa);
    const Pixel pb{cb.x - dy, cb.y + dx};  // quarter-turned footprint
    b_px2.push_back(place(pb, za, 2));
  }

  // Background, outside both instance footprints.
  int placed = 0;
  while (placed < background_points) {
    const int m = 16 + static_cast<int>(rng.uniform_index(25));  // z in [4, 10]
    const int u = m + static_cast<int>(rng.uniform_index(w - m));
    const int v = static_cast<int>(rng.uniform_index(h));
    const auto inside = [&](const Pixel& c) {
      const int dx = u - c.x, dy = v - c.y;
      return dx * dx + dy * dy <= (radius + 2) * (radius + 2);
    };
    const Pixel px1{u, v};
    if (inside(ca) || inside(cb) || sp.pm1.is_valid(px1)) continue;
    const Pixel px2{u - m, v};
    if (sp.pm2.is_valid(px2)) continue;
    place(px1, 160.0 / m, 0);
    ++placed;
  }

  // The corruption: ghost A content under B's query pixels, and a little
  // jitter on A's true query content so the exact ghost always wins the
  // nearest-neighbour vote.
  for (std::size_t i = 0; i < a_px1.size(); ++i) {
    sp.pm2.set_point(b_px2[i], sp.pm1.point(a_px1[i]));
  }
  for (const auto& c : sp.gt_pairs) {
    if (c.instance != 1) continue;
    Eigen::Vector3d p = sp.pm2.point(c.query);
    for (int a = 0; a < 3; ++a) p[a] += 0.002 * rng.gaussian();
    sp.pm2.set_point(c.query, p);
  }
  return sp;
}

}  // namespace oracles
