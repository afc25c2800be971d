#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "reloc/error.hpp"
#include "reloc/geometry.hpp"
#include "reloc/pointmap.hpp"
#include "reloc/rng.hpp"
#include "reloc/scale.hpp"

namespace reloc {

struct NoiseModel {
  double point_sigma = 0;       // Gaussian, meters, on point-map coordinates
  double depth_sigma_rel = 0;   // relative Gaussian on depth values
  double outlier_fraction = 0;  // fraction of matches rewired uniformly
  int mask_erosion = 0;         // pixels of label erosion per mask
};

struct SceneConfig {
  int width = 128, height = 96;
  double focal = 160;
  int n_instances = 3;
  int points_per_instance = 220;
  int background_points = 600;
  double depth_min = 4, depth_max = 10;
  double baseline_min = 0.6, baseline_max = 1.6;
  double rotation_range_deg = 180;
  NoiseModel noise;
  std::uint64_t seed = 0;
};

inline void validate(const SceneConfig& cfg) {
  require(cfg.width >= 16 && cfg.height >= 16, ErrorCode::invalid_input,
          "resolution too small");
  require(cfg.focal > 0, ErrorCode::invalid_input, "focal must be positive");
  require(cfg.n_instances >= 0 && cfg.n_instances <= 255, ErrorCode::invalid_input,
          "instance count must be in [0, 255]");
  require(cfg.points_per_instance >= 0 && cfg.background_points >= 0,
          ErrorCode::invalid_input, "point counts must be non-negative");
  require(cfg.depth_min > 0 && cfg.depth_min < cfg.depth_max, ErrorCode::invalid_input,
          "depth range must be positive and non-empty");
  require(cfg.baseline_min > 0 && cfg.baseline_min <= cfg.baseline_max,
          ErrorCode::invalid_input, "baseline range must be positive");
  require(cfg.rotation_range_deg >= 0, ErrorCode::invalid_input,
          "rotation range must be non-negative");
  require(cfg.noise.point_sigma >= 0 && cfg.noise.depth_sigma_rel >= 0 &&
              cfg.noise.mask_erosion >= 0,
          ErrorCode::invalid_input, "noise parameters must be non-negative");
  require(cfg.noise.outlier_fraction >= 0 && cfg.noise.outlier_fraction < 1,
          ErrorCode::invalid_input, "outlier fraction must be in [0, 1)");
}

/// One rendered two-view scene with exact ground truth. Both point maps are
/// expressed in the reference camera's frame; gt_pose maps reference-frame
/// coordinates into the query frame.
struct SyntheticPair {
  PointMap pm1, pm2;
  DepthMap d1, d2;
  InstanceMask mask1, mask2;
  CameraIntrinsics k1, k2;
  Pose gt_pose;
  std::vector<Correspondence> gt_pairs;  // instance id in the tag field
  std::vector<char> outlier_labels;      // aligned with gt_pairs
};

struct SyntheticQuery {
  PointMap pm2;
  DepthMap d2;
  InstanceMask mask2;
  CameraIntrinsics k2;
  Pose gt_pose;
  std::vector<Correspondence> gt_pairs;
  std::vector<char> outlier_labels;
};

/// A reference view shared by several query views (the multi-frame scene the
/// dataset layout stores on disk).
struct SyntheticScene {
  PointMap pm1;
  DepthMap d1;
  InstanceMask mask1;
  CameraIntrinsics k1;
  std::vector<SyntheticQuery> queries;

  SyntheticPair pair(std::size_t i) const {
    const auto& q = queries.at(i);
    return {pm1, q.pm2, d1, q.d2, mask1, q.mask2, k1, q.k2, q.gt_pose, q.gt_pairs,
            q.outlier_labels};
  }
};

namespace synth_detail {

// Integer pixel pairs only form exact two-view correspondences on a lattice
// of relative poses: quarter-turn rotations about the optical axis, in-plane
// camera translations along small-integer pixel directions, and depth layers
// z_k = (baseline_unit * f) / k. Continuous ranges in the config bound what
// the lattice sampler draws. Rounding projections of generic poses would
// leave ~0.5 px residuals, far above the exactness this oracle guarantees.

struct Direction {
  int a, b;
  double norm;
};

inline const std::array<Direction, 9>& direction_table() {
  static const std::array<Direction, 9> dirs = {{
      {1, 0, 1.0},
      {0, 1, 1.0},
      {1, 1, std::sqrt(2.0)},
      {2, 1, std::sqrt(5.0)},
      {1, 2, std::sqrt(5.0)},
      {3, 1, std::sqrt(10.0)},
      {1, 3, std::sqrt(10.0)},
      {3, 2, std::sqrt(13.0)},
      {2, 3, std::sqrt(13.0)},
  }};
  return dirs;
}

inline Eigen::Matrix3d quarter_turn(int quarter) {
  Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
  switch (quarter & 3) {
    case 0: break;
    case 1: r << 0, -1, 0, 1, 0, 0, 0, 0, 1; break;
    case 2: r << -1, 0, 0, 0, -1, 0, 0, 0, 1; break;
    case 3: r << 0, 1, 0, -1, 0, 0, 0, 0, 1; break;
  }
  return r;
}

/// Image-plane action of the quarter turn about the (integer) principal
/// point: where a pre-rotation pixel lands after the camera rolls.
inline Pixel rotate_pixel(const Pixel& p, int quarter, int icx, int icy) {
  switch (quarter & 3) {
    case 1: return {icx + icy - p.y, icy - icx + p.x};
    case 2: return {2 * icx - p.x, 2 * icy - p.y};
    case 3: return {icx - icy + p.y, icy + icx - p.x};
    default: return p;
  }
}

inline int quarter_angle_deg(int quarter) {
  switch (quarter & 3) {
    case 1:
    case 3: return 90;
    case 2: return 180;
    default: return 0;
  }
}

struct ScenePoint {
  Pixel px1;
  int layer = 0;  // index into the z_k family
  Eigen::Vector3d x;
  std::uint8_t label = 0;
};

struct QueryPose {
  Direction dir{1, 0, 1.0};
  int sign_a = 1, sign_b = 1;
  int g = 1;      // baseline multiple of the scene's beta unit
  int quarter = 0;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();  // query camera center, ref frame
  Pose pose;      // q = R (p - C)
};

inline void add_point_noise(PointMap& pm, double sigma, Rng& rng) {
  if (sigma <= 0) return;
  for (std::size_t i = 0; i < pm.valid.size(); ++i) {
    if (!pm.valid[i]) continue;
    pm.points[3 * i] += sigma * rng.gaussian();
    pm.points[3 * i + 1] += sigma * rng.gaussian();
    pm.points[3 * i + 2] += sigma * rng.gaussian();
  }
}

inline void add_depth_noise(DepthMap& dm, double sigma_rel, Rng& rng) {
  if (sigma_rel <= 0) return;
  for (std::size_t i = 0; i < dm.valid.size(); ++i) {
    if (!dm.valid[i]) continue;
    dm.depth[i] *= std::max(1e-6, 1.0 + sigma_rel * rng.gaussian());
  }
}

inline void erode_mask(InstanceMask& m, int rounds) {
  for (int r = 0; r < rounds; ++r) {
    std::vector<std::uint8_t> out(m.labels.size(), 0);
    for (int y = 0; y < m.height; ++y) {
      for (int x = 0; x < m.width; ++x) {
        const std::uint8_t l = m.labels[y * m.width + x];
        if (l == 0) continue;
        const bool keep = x > 0 && x + 1 < m.width && y > 0 && y + 1 < m.height &&
                          m.labels[y * m.width + x - 1] == l &&
                          m.labels[y * m.width + x + 1] == l &&
                          m.labels[(y - 1) * m.width + x] == l &&
                          m.labels[(y + 1) * m.width + x] == l;
        if (keep) out[y * m.width + x] = l;
      }
    }
    m.labels = std::move(out);
  }
}

/// Rewires round(fraction * n) matches by cyclically shifting the pm2
/// contents under the chosen query pixels: the 3-d values move, the pixels
/// (and their true depths/labels) stay, so the matcher reproduces exactly
/// these pairs at wrong pixel locations. A single chosen pair cannot be
/// rewired in place, so the count is bumped to 2 when possible.
inline void rewire_outliers(SyntheticQuery& q, double fraction, Rng& rng) {
  const auto n = static_cast<std::uint32_t>(q.gt_pairs.size());
  q.outlier_labels.assign(n, 0);
  if (fraction <= 0 || n < 2) return;
  auto kk = static_cast<std::uint32_t>(std::llround(fraction * n));
  if (kk == 1) kk = 2;
  if (kk < 2) return;

  const auto sel = rng.sample_indices(n, kk);
  std::vector<Eigen::Vector3d> contents(kk);
  for (std::uint32_t i = 0; i < kk; ++i)
    contents[i] = q.pm2.point(q.gt_pairs[sel[i]].query);
  for (std::uint32_t i = 0; i < kk; ++i) {
    q.pm2.set_point(q.gt_pairs[sel[i]].query, contents[(i + 1) % kk]);
    q.outlier_labels[sel[i]] = 1;
  }
}

}  // namespace synth_detail

/// Deterministic synthetic scene generator; see synth_detail for the pose
/// lattice it samples from. Throws unrenderable_scene when no covisible
/// configuration exists within the retry budget.
inline SyntheticScene generate_scene(const SceneConfig& cfg, int n_queries) {
  using namespace synth_detail;
  validate(cfg);
  require(n_queries >= 1, ErrorCode::invalid_input, "need at least one query view");

  CameraIntrinsics k;
  k.fx = k.fy = cfg.focal;
  k.width = cfg.width;
  k.height = cfg.height;
  const int icx = cfg.width / 2, icy = cfg.height / 2;
  k.cx = icx;
  k.cy = icy;

  const int total_points =
      cfg.n_instances * cfg.points_per_instance + cfg.background_points;

  for (int attempt = 0; attempt < 64; ++attempt) {
    Rng rng = Rng::substream(cfg.seed, "synth/scene/" + std::to_string(attempt));

    // Anchor query: continuous baseline length, lattice everything else.
    const auto& dirs = direction_table();
    const Direction dir0 = dirs[rng.uniform_index(dirs.size())];
    const double length0 = rng.uniform(cfg.baseline_min, cfg.baseline_max);
    const double beta = length0 / dir0.norm;  // baseline unit, meters per (a,b) step

    // Depth layers z_k = beta * f / k inside the configured range.
    const double bf = beta * cfg.focal;
    const int k_lo = static_cast<int>(std::ceil(bf / cfg.depth_max - 1e-12));
    const int k_hi = static_cast<int>(std::floor(bf / cfg.depth_min + 1e-12));
    if (k_lo < 1 || k_hi - k_lo + 1 < 2) continue;  // not enough depth layers

    std::vector<double> layers(k_hi - k_lo + 1);
    for (int kk = k_lo; kk <= k_hi; ++kk) layers[kk - k_lo] = bf / kk;

    // Sample scene points on the (pixel, layer) lattice: instance blobs are
    // pixel discs over a short band of adjacent layers, background is
    // uniform. Margins keep room for query-side disparity.
    const int mu = std::max(4, cfg.width / 5);
    const int mv = std::max(4, cfg.height / 5);
    std::vector<ScenePoint> points;
    points.reserve(total_points);

    const auto sample_layer = [&](int lo, int hi) {
      return lo + static_cast<int>(rng.uniform_index(hi - lo + 1));
    };

    for (int o = 1; o <= cfg.n_instances; ++o) {
      const int radius =
          3 + static_cast<int>(rng.uniform_index(std::max(2, std::min(cfg.width, cfg.height) / 8)));
      const int ccx = mu + radius +
                      static_cast<int>(rng.uniform_index(std::max(1, cfg.width - 2 * (mu + radius))));
      const int ccy = mv + radius +
                      static_cast<int>(rng.uniform_index(std::max(1, cfg.height - 2 * (mv + radius))));
      const int band = 1 + static_cast<int>(rng.uniform_index(3));
      const int band_lo =
          static_cast<int>(rng.uniform_index(std::max(1, static_cast<int>(layers.size()) - band)));
      for (int i = 0; i < cfg.points_per_instance; ++i) {
        // rejection sample inside the disc
        int dx = 0, dy = 0;
        do {
          dx = static_cast<int>(rng.uniform_index(2 * radius + 1)) - radius;
          dy = static_cast<int>(rng.uniform_index(2 * radius + 1)) - radius;
        } while (dx * dx + dy * dy > radius * radius);
        ScenePoint p;
        p.px1 = {std::clamp(ccx + dx, 0, cfg.width - 1), std::clamp(ccy + dy, 0, cfg.height - 1)};
        p.layer = sample_layer(band_lo,
                               std::min(band_lo + band - 1, static_cast<int>(layers.size()) - 1));
        p.label = static_cast<std::uint8_t>(o);
        points.push_back(p);
      }
    }
    for (int i = 0; i < cfg.background_points; ++i) {
      ScenePoint p;
      p.px1 = {mu + static_cast<int>(rng.uniform_index(cfg.width - 2 * mu)),
               mv + static_cast<int>(rng.uniform_index(cfg.height - 2 * mv))};
      p.layer = sample_layer(0, static_cast<int>(layers.size()) - 1);
      p.label = 0;
      points.push_back(p);
    }
    if (points.empty()) continue;

    for (auto& p : points) {
      p.x = backproject(k, {double(p.px1.x), double(p.px1.y)}, layers[p.layer]);
    }

    // Reference view z-buffer (earlier index wins exact ties).
    const std::size_t npx = static_cast<std::size_t>(cfg.width) * cfg.height;
    std::vector<std::int32_t> owner1(npx, -1);
    {
      std::vector<double> zbuf(npx, std::numeric_limits<double>::infinity());
      for (std::size_t i = 0; i < points.size(); ++i) {
        const auto idx = static_cast<std::size_t>(points[i].px1.y) * cfg.width + points[i].px1.x;
        if (points[i].x.z() < zbuf[idx]) {
          zbuf[idx] = points[i].x.z();
          owner1[idx] = static_cast<std::int32_t>(i);
        }
      }
    }

    // Admitted quarter turns under the rotation bound.
    std::vector<int> quarters{0};
    if (cfg.rotation_range_deg >= 90) {
      quarters.push_back(1);
      quarters.push_back(3);
    }
    if (cfg.rotation_range_deg >= 180) quarters.push_back(2);

    const int min_covisible =
        std::max(5, static_cast<int>(points.size()) / 20);

    std::vector<SyntheticQuery> queries;
    bool scene_ok = true;
    for (int qi = 0; qi < n_queries && scene_ok; ++qi) {
      bool placed = false;
      for (int tries = 0; tries < 48 && !placed; ++tries) {
        QueryPose qp;
        if (qi == 0 && tries == 0) {
          qp.dir = dir0;
          qp.g = 1;
        } else {
          qp.dir = dirs[rng.uniform_index(dirs.size())];
          const double unit = beta * qp.dir.norm;
          const int g_lo = static_cast<int>(std::ceil(cfg.baseline_min / unit - 1e-12));
          const int g_hi = static_cast<int>(std::floor(cfg.baseline_max / unit + 1e-12));
          if (g_lo < 1 || g_hi < g_lo) continue;
          qp.g = g_lo + static_cast<int>(rng.uniform_index(g_hi - g_lo + 1));
        }
        qp.sign_a = qp.dir.a != 0 && rng.uniform_index(2) ? -1 : 1;
        qp.sign_b = qp.dir.b != 0 && rng.uniform_index(2) ? -1 : 1;
        qp.quarter = quarters[rng.uniform_index(quarters.size())];

        const int da = qp.sign_a * qp.dir.a, db = qp.sign_b * qp.dir.b;
        qp.center = beta * qp.g * Eigen::Vector3d(da, db, 0);
        const Rotation r = Rotation::from_matrix(quarter_turn(qp.quarter));
        qp.pose = Pose{r, -(r * qp.center)};

        // Rasterize the query view. Only points that own their reference
        // pixel take part, so every query-map point has its exact twin in
        // the reference map and reciprocal matching cannot pair up
        // half-occluded leftovers.
        std::vector<std::int32_t> owner2(npx, -1);
        std::vector<double> zbuf(npx, std::numeric_limits<double>::infinity());
        std::vector<Pixel> px2(points.size());
        std::vector<char> vis(points.size(), 0);
        for (std::size_t i = 0; i < points.size(); ++i) {
          const auto ref_idx =
              static_cast<std::size_t>(points[i].px1.y) * cfg.width + points[i].px1.x;
          if (owner1[ref_idx] != static_cast<std::int32_t>(i)) continue;
          const int m = qp.g * (k_lo + points[i].layer);
          const Pixel flat{points[i].px1.x - m * da, points[i].px1.y - m * db};
          if (flat.x < 0 || flat.x >= cfg.width || flat.y < 0 || flat.y >= cfg.height) continue;
          const Pixel p2 = rotate_pixel(flat, qp.quarter, icx, icy);
          if (p2.x < 0 || p2.x >= cfg.width || p2.y < 0 || p2.y >= cfg.height) continue;
          px2[i] = p2;
          vis[i] = 1;
          const auto idx = static_cast<std::size_t>(p2.y) * cfg.width + p2.x;
          const double z2 = (qp.pose * points[i].x).z();
          if (z2 < zbuf[idx]) {
            zbuf[idx] = z2;
            owner2[idx] = static_cast<std::int32_t>(i);
          }
        }

        // Covisible = owns its pixel in both views.
        std::vector<Correspondence> pairs;
        for (std::size_t i = 0; i < points.size(); ++i) {
          if (!vis[i]) continue;
          const auto i1 = static_cast<std::size_t>(points[i].px1.y) * cfg.width + points[i].px1.x;
          const auto i2 = static_cast<std::size_t>(px2[i].y) * cfg.width + px2[i].x;
          if (owner1[i1] == static_cast<std::int32_t>(i) &&
              owner2[i2] == static_cast<std::int32_t>(i)) {
            pairs.push_back({points[i].px1, px2[i], points[i].label});
          }
        }
        if (static_cast<int>(pairs.size()) < min_covisible) continue;

        SyntheticQuery q;
        q.k2 = k;
        q.gt_pose = qp.pose;
        q.gt_pairs = std::move(pairs);
        q.pm2 = PointMap::empty(cfg.width, cfg.height);
        q.d2 = DepthMap::empty(cfg.width, cfg.height);
        q.d2.space = DepthSpace::metric;
        q.d2.focal_used = cfg.focal;
        q.mask2 = InstanceMask::background(cfg.width, cfg.height);
        for (std::size_t idx = 0; idx < npx; ++idx) {
          if (owner2[idx] < 0) continue;
          const auto& pt = points[owner2[idx]];
          const Pixel px{static_cast<int>(idx) % cfg.width, static_cast<int>(idx) / cfg.width};
          q.pm2.set_point(px, pt.x);  // reference-frame coordinates
          q.pm2.valid[idx] = 1;
          q.d2.depth[idx] = (qp.pose * pt.x).z();
          q.d2.valid[idx] = 1;
          q.mask2.labels[idx] = pt.label;
        }
        queries.push_back(std::move(q));
        placed = true;
      }
      if (!placed) scene_ok = false;
    }
    if (!scene_ok) continue;

    SyntheticScene scene;
    scene.k1 = k;
    scene.pm1 = PointMap::empty(cfg.width, cfg.height);
    scene.d1 = DepthMap::empty(cfg.width, cfg.height);
    scene.d1.space = DepthSpace::metric;
    scene.d1.focal_used = cfg.focal;
    scene.mask1 = InstanceMask::background(cfg.width, cfg.height);
    for (std::size_t idx = 0; idx < npx; ++idx) {
      if (owner1[idx] < 0) continue;
      const auto& pt = points[owner1[idx]];
      const Pixel px{static_cast<int>(idx) % cfg.width, static_cast<int>(idx) / cfg.width};
      scene.pm1.set_point(px, pt.x);
      scene.pm1.valid[idx] = 1;
      scene.d1.depth[idx] = pt.x.z();
      scene.d1.valid[idx] = 1;
      scene.mask1.labels[idx] = pt.label;
    }
    scene.queries = std::move(queries);

    {
      Rng ref_noise = Rng::substream(cfg.seed, "synth/noise/ref");
      synth_detail::add_point_noise(scene.pm1, cfg.noise.point_sigma, ref_noise);
      synth_detail::add_depth_noise(scene.d1, cfg.noise.depth_sigma_rel, ref_noise);
      synth_detail::erode_mask(scene.mask1, cfg.noise.mask_erosion);
      for (std::size_t j = 0; j < scene.queries.size(); ++j) {
        auto& q = scene.queries[j];
        Rng outlier_rng = Rng::substream(cfg.seed, "synth/outliers/q" + std::to_string(j));
        synth_detail::rewire_outliers(q, cfg.noise.outlier_fraction, outlier_rng);
        Rng q_noise = Rng::substream(cfg.seed, "synth/noise/q" + std::to_string(j));
        synth_detail::add_point_noise(q.pm2, cfg.noise.point_sigma, q_noise);
        synth_detail::add_depth_noise(q.d2, cfg.noise.depth_sigma_rel, q_noise);
        synth_detail::erode_mask(q.mask2, cfg.noise.mask_erosion);
      }
    }
    return scene;
  }
  fail(ErrorCode::unrenderable_scene,
       "no covisible configuration found; check baseline/depth/focal feasibility");
}

inline SyntheticPair generate(const SceneConfig& cfg) {
  return generate_scene(cfg, 1).pair(0);
}

/// Residual maxima a correct pair must keep near zero (noiseless case).
struct PairDiagnostics {
  double max_ref_ray_residual = 0;     // ||pm1 - backproject(d1)||, meters
  double max_query_ray_residual = 0;   // ||gt_pose * pm2 - backproject(d2)||
  double max_point_pair_residual = 0;  // ||pm1[ref] - pm2[query]|| over gt pairs
  double max_depth_pair_residual = 0;  // |d2[query] - (gt_pose * p1).z| over gt pairs
  int covisible = 0;

  bool within(double tol) const {
    return max_ref_ray_residual <= tol && max_query_ray_residual <= tol &&
           max_point_pair_residual <= tol && max_depth_pair_residual <= tol;
  }
};

inline PairDiagnostics verify_pair(const SyntheticPair& sp) {
  PairDiagnostics d;
  d.covisible = static_cast<int>(sp.gt_pairs.size());
  for (int y = 0; y < sp.pm1.height; ++y) {
    for (int x = 0; x < sp.pm1.width; ++x) {
      const Pixel px{x, y};
      if (sp.pm1.is_valid(px) && sp.d1.is_valid(px)) {
        const auto p = backproject(sp.k1, {double(x), double(y)}, sp.d1.at(px));
        d.max_ref_ray_residual =
            std::max(d.max_ref_ray_residual, (sp.pm1.point(px) - p).norm());
      }
      if (sp.pm2.is_valid(px) && sp.d2.is_valid(px)) {
        const auto p = backproject(sp.k2, {double(x), double(y)}, sp.d2.at(px));
        d.max_query_ray_residual =
            std::max(d.max_query_ray_residual, (sp.gt_pose * sp.pm2.point(px) - p).norm());
      }
    }
  }
  for (const auto& c : sp.gt_pairs) {
    d.max_point_pair_residual =
        std::max(d.max_point_pair_residual, (sp.pm1.point(c.ref) - sp.pm2.point(c.query)).norm());
    if (sp.d1.is_valid(c.ref) && sp.d2.is_valid(c.query)) {
      const auto p1 = backproject(sp.k1, {double(c.ref.x), double(c.ref.y)}, sp.d1.at(c.ref));
      d.max_depth_pair_residual = std::max(
          d.max_depth_pair_residual, std::abs(sp.d2.at(c.query) - (sp.gt_pose * p1).z()));
    }
  }
  return d;
}

}  // namespace reloc
