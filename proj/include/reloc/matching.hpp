#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "reloc/error.hpp"
#include "reloc/pointmap.hpp"
#include "reloc/spatial_index.hpp"

namespace reloc {

/// Directed nearest-neighbour matches, src pixel index -> dst pixel index,
/// ordered by src index.
struct DirectedMatches {
  int src_width = 0, src_height = 0;
  int dst_width = 0, dst_height = 0;
  std::vector<std::pair<std::int32_t, std::int32_t>> pairs;
};

/// For every matchable pixel of src, the dst pixel whose 3D point is nearest
/// in Euclidean distance (ties: smallest row-major dst index).
inline DirectedMatches nn_match(const PointMap& src, const SpatialIndex& dst_index,
                                const MatchConfig& cfg = {}) {
  DirectedMatches out;
  out.src_width = src.width;
  out.src_height = src.height;
  out.pairs.reserve(dst_index.size());
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      const Pixel px{x, y};
      if (!matchable(src, px, cfg)) continue;
      const NearestHit hit = dst_index.nearest(src.point(px));
      out.pairs.emplace_back(src.index(px), hit.id);
    }
  }
  return out;
}

/// Keeps exactly the mutually-nearest pairs. The result is injective in both
/// images by construction.
inline CorrespondenceMap reciprocal_filter(const DirectedMatches& fwd,
                                           const DirectedMatches& bwd) {
  std::vector<std::int32_t> back(static_cast<std::size_t>(bwd.src_width) * bwd.src_height, -1);
  for (const auto& [q, r] : bwd.pairs) back[q] = r;

  CorrespondenceMap map;
  for (const auto& [r, q] : fwd.pairs) {
    if (q >= 0 && q < static_cast<std::int32_t>(back.size()) && back[q] == r) {
      map.pairs.push_back({{r % fwd.src_width, r / fwd.src_width},
                           {q % bwd.src_width, q / bwd.src_width},
                           0});
    }
  }
  return map;
}

/// Reciprocal nearest-neighbour matching over the full maps (global area).
/// Returns an empty map when either side has no matchable pixel; the caller
/// checks CorrespondenceMap::insufficient() for the < 5 pair warning.
inline CorrespondenceMap match_global(const PointMap& pm1, const PointMap& pm2,
                                      const MatchConfig& cfg = {}) {
  bool any1 = false, any2 = false;
  for (int y = 0; y < pm1.height && !any1; ++y)
    for (int x = 0; x < pm1.width; ++x)
      if (matchable(pm1, {x, y}, cfg)) { any1 = true; break; }
  for (int y = 0; y < pm2.height && !any2; ++y)
    for (int x = 0; x < pm2.width; ++x)
      if (matchable(pm2, {x, y}, cfg)) { any2 = true; break; }
  if (!any1 || !any2) return {};

  const SpatialIndex idx1 = build_spatial_index(pm1, cfg);
  const SpatialIndex idx2 = build_spatial_index(pm2, cfg);
  return reciprocal_filter(nn_match(pm1, idx2, cfg), nn_match(pm2, idx1, cfg));
}

/// Restricts validity to the pixels labelled o. Geometry is untouched.
inline PointMap mask_pointmap(const PointMap& pm, const InstanceMask& mask, std::uint8_t o) {
  require(pm.width == mask.width && pm.height == mask.height, ErrorCode::invalid_input,
          "mask and point map dimensions disagree");
  require(o != 0, ErrorCode::invalid_input, "instance id 0 is the background");
  require(mask.contains(o), ErrorCode::empty_instance,
          "instance " + std::to_string(o) + " absent from mask");
  PointMap out = pm;
  const auto n = out.valid.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (mask.labels[i] != o) out.valid[i] = 0;
  }
  return out;
}

/// Matching restricted to instance o in both views; pairs carry the id.
inline CorrespondenceMap match_instance(const PointMap& pm1, const PointMap& pm2,
                                        const InstanceMask& mask1, const InstanceMask& mask2,
                                        std::uint8_t o, const MatchConfig& cfg = {}) {
  CorrespondenceMap map =
      match_global(mask_pointmap(pm1, mask1, o), mask_pointmap(pm2, mask2, o), cfg);
  for (auto& c : map.pairs) c.instance = o;
  return map;
}

/// Instance ids (>= 1) present in both masks, ascending.
inline std::vector<std::uint8_t> shared_instance_ids(const InstanceMask& m1,
                                                     const InstanceMask& m2) {
  std::array<bool, 256> in1{}, in2{};
  for (auto l : m1.labels) in1[l] = true;
  for (auto l : m2.labels) in2[l] = true;
  std::vector<std::uint8_t> ids;
  for (int o = 1; o < 256; ++o)
    if (in1[o] && in2[o]) ids.push_back(static_cast<std::uint8_t>(o));
  return ids;
}

/// Piecewise merge: inside any image-1 instance mask only instance-level
/// pairs survive (a covered pixel with no instance pair yields nothing);
/// outside the masks the global pairs are used. Image-2 collisions prefer the
/// instance-tagged pair, then the smaller image-1 row-major index. The result
/// does not depend on the order of per_instance.
inline CorrespondenceMap merge_maps(const CorrespondenceMap& global,
                                    const std::vector<CorrespondenceMap>& per_instance,
                                    const InstanceMask& mask1) {
  std::vector<Correspondence> candidates;
  for (const auto& m : per_instance)
    candidates.insert(candidates.end(), m.pairs.begin(), m.pairs.end());
  const std::size_t n_instance = candidates.size();
  for (const auto& c : global.pairs) {
    if (mask1.label(c.ref) == 0) candidates.push_back(c);
  }

  const auto ref_index = [&mask1](const Correspondence& c) {
    return c.ref.y * mask1.width + c.ref.x;
  };
  // Instance pairs take priority over globals; within a class, smaller
  // image-1 index wins a collision.
  const auto by_ref = [&](const Correspondence& a, const Correspondence& b) {
    return ref_index(a) < ref_index(b);
  };
  std::sort(candidates.begin(), candidates.begin() + n_instance, by_ref);
  std::sort(candidates.begin() + n_instance, candidates.end(), by_ref);

  std::unordered_set<std::int64_t> used_ref, used_query;
  CorrespondenceMap out;
  for (const auto& c : candidates) {
    const std::int64_t rk = (static_cast<std::int64_t>(c.ref.y) << 32) | std::uint32_t(c.ref.x);
    const std::int64_t qk =
        (static_cast<std::int64_t>(c.query.y) << 32) | std::uint32_t(c.query.x);
    if (used_ref.count(rk) || used_query.count(qk)) continue;
    used_ref.insert(rk);
    used_query.insert(qk);
    out.pairs.push_back(c);
  }
  std::sort(out.pairs.begin(), out.pairs.end(), by_ref);
  return out;
}

}  // namespace reloc
