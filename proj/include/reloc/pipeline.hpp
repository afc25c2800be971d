#pragma once

#include <atomic>
#include <future>
#include <optional>
#include <string>
#include <vector>

#include "reloc/error.hpp"
#include "reloc/essential.hpp"
#include "reloc/eval.hpp"
#include "reloc/io.hpp"
#include "reloc/matching.hpp"
#include "reloc/ransac.hpp"
#include "reloc/scale.hpp"
#include "reloc/synth.hpp"

namespace reloc {

enum class FrameStatus {
  ok,
  insufficient_matches,
  estimation_failed,
  cheirality_failed,
  no_depth_overlap,
  scale_failed,
  load_error,
};

inline const char* to_string(FrameStatus s) {
  switch (s) {
    case FrameStatus::ok: return "ok";
    case FrameStatus::insufficient_matches: return "insufficient_matches";
    case FrameStatus::estimation_failed: return "estimation_failed";
    case FrameStatus::cheirality_failed: return "cheirality_failed";
    case FrameStatus::no_depth_overlap: return "no_depth_overlap";
    case FrameStatus::scale_failed: return "scale_failed";
    case FrameStatus::load_error: return "load_error";
  }
  return "unknown";
}

struct PipelineOptions {
  bool use_instances = true;    // off reproduces the matching-only ablation
  bool use_depth_scale = true;  // off emits a unit-norm translation
  CheiralityMethod cheirality = CheiralityMethod::triangulation;
  MatchConfig match;
  RansacConfig ransac;  // seed field is replaced by a per-frame substream
  ScaleVoteConfig scale_vote;
  std::uint64_t seed = 42;
  int jobs = 1;
  bool collect_ransac_log = false;
};

struct FrameResult {
  std::string frame;
  FrameStatus status = FrameStatus::ok;
  Pose pose;  // valid when status == ok
  double confidence = 0;
  // diagnostics
  int pairs = 0;
  int essential_inliers = 0;
  int ransac_iterations = 0;
  int cheirality_support = 0;
  int scale_inliers = 0;
  int depth_skipped = 0;
  std::string detail;  // error message for non-ok statuses
  std::vector<RansacIterationRecord> ransac_log;  // when collect_ransac_log
};

/// One frame of the full dataflow: match (globally and, when enabled, inside
/// shared instance masks, merged), estimate the essential matrix robustly,
/// decompose with a cheirality check, then recover metric scale from depth.
inline FrameResult estimate_pair(const PointMap& pm1, const PointMap& pm2,
                                 const InstanceMask& mask1, const InstanceMask& mask2,
                                 const DepthMap* d1, const DepthMap* d2,
                                 const CameraIntrinsics& k1, const CameraIntrinsics& k2,
                                 const PipelineOptions& opts, const std::string& frame_id,
                                 CorrespondenceMap* matches_out = nullptr) {
  FrameResult res;
  res.frame = frame_id;
  try {
    CorrespondenceMap map = match_global(pm1, pm2, opts.match);
    if (opts.use_instances) {
      std::vector<CorrespondenceMap> per_instance;
      for (const std::uint8_t o : shared_instance_ids(mask1, mask2)) {
        per_instance.push_back(match_instance(pm1, pm2, mask1, mask2, o, opts.match));
      }
      map = merge_maps(map, per_instance, mask1);
    }
    if (matches_out) *matches_out = map;
    res.pairs = static_cast<int>(map.size());
    if (map.insufficient()) {
      res.status = FrameStatus::insufficient_matches;
      res.detail = std::to_string(map.size()) + " correspondences";
      return res;
    }

    const auto corrs = normalize(k1, k2, map);
    RansacConfig rc = opts.ransac;
    rc.seed = Rng::splitmix64(opts.seed ^ Rng::fnv1a64("ransac/" + frame_id));
    const EssentialEstimate est =
        ransac_essential(corrs, rc, opts.collect_ransac_log ? &res.ransac_log : nullptr);
    res.essential_inliers = est.inlier_count;
    res.ransac_iterations = est.iterations;

    std::vector<NormalizedCorrespondence> inlier_corrs;
    CorrespondenceMap inlier_map;
    for (std::size_t i = 0; i < corrs.size(); ++i) {
      if (est.inlier_mask[i]) {
        inlier_corrs.push_back(corrs[i]);
        inlier_map.pairs.push_back(map.pairs[i]);
      }
    }

    // Metric depth is needed both for depth-based cheirality and for scale.
    std::optional<DepthMap> metric1, metric2;
    std::optional<BackprojectResult> backprojected;
    const bool needs_depth =
        opts.use_depth_scale || opts.cheirality == CheiralityMethod::depth;
    if (needs_depth && d1 && d2) {
      metric1 = restore_metric_depth(*d1, k1.fx, d1->focal_used > 0 ? d1->focal_used : k1.fx);
      metric2 = restore_metric_depth(*d2, k2.fx, d2->focal_used > 0 ? d2->focal_used : k2.fx);
      try {
        backprojected = backproject_matches(inlier_map, *metric1, *metric2, k1, k2);
        res.depth_skipped = backprojected->skipped;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::no_depth_overlap) throw;
      }
    }

    const auto candidates = decompose_essential(est.e);
    RelativePoseHypothesis hyp;
    if (opts.cheirality == CheiralityMethod::depth) {
      require(backprojected.has_value(), ErrorCode::no_depth_overlap,
              "depth-based cheirality needs depth for the matched pixels");
      std::vector<NormalizedCorrespondence> sub;
      std::vector<std::pair<Eigen::Vector3d, Eigen::Vector3d>> pts;
      for (const auto& bp : backprojected->pairs) {
        sub.push_back(inlier_corrs[bp.pair_index]);
        pts.emplace_back(bp.p1, bp.p2);
      }
      hyp = select_cheirality_depth(candidates, sub, pts);
    } else {
      hyp = select_cheirality(candidates, inlier_corrs);
    }
    res.cheirality_support = hyp.inlier_count;

    if (!opts.use_depth_scale) {
      res.pose = Pose{hyp.rotation, hyp.direction.vector()};
      res.confidence =
          static_cast<double>(est.inlier_count) / static_cast<double>(map.size());
      return res;
    }

    require(d1 && d2, ErrorCode::scale_failed, "depth maps unavailable");
    require(backprojected.has_value(), ErrorCode::no_depth_overlap,
            "no correspondence has valid depth at both ends");
    // Eq.-style scale factors need the rotation that maps query-frame points
    // into the reference frame, i.e. the inverse of the estimated rotation.
    const ScaleEstimate scale = ransac_scale(backprojected->pairs, hyp.rotation.transposed(),
                                             hyp.direction, opts.scale_vote);
    res.scale_inliers = scale.inlier_count;
    res.pose = compose_final_pose(hyp.rotation, hyp.direction, scale);
    res.confidence = scale.inlier_count * (static_cast<double>(est.inlier_count) /
                                           static_cast<double>(map.size()));
    return res;
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::insufficient_matches:
      case ErrorCode::empty_input:
        res.status = FrameStatus::insufficient_matches;
        break;
      case ErrorCode::estimation_failed: res.status = FrameStatus::estimation_failed; break;
      case ErrorCode::cheirality_failed: res.status = FrameStatus::cheirality_failed; break;
      case ErrorCode::no_depth_overlap: res.status = FrameStatus::no_depth_overlap; break;
      case ErrorCode::scale_failed: res.status = FrameStatus::scale_failed; break;
      default: res.status = FrameStatus::estimation_failed; break;
    }
    res.detail = e.what();
    return res;
  }
}

inline FrameResult estimate_pair(const SyntheticPair& sp, const PipelineOptions& opts,
                                 const std::string& frame_id = "synthetic") {
  return estimate_pair(sp.pm1, sp.pm2, sp.mask1, sp.mask2, &sp.d1, &sp.d2, sp.k1, sp.k2, opts,
                       frame_id);
}

struct SceneEstimate {
  std::string scene_id;
  std::vector<FrameResult> frames;  // ordered by frame id
};

/// Loads a scene from disk and estimates every query frame against the
/// reference. Per-frame failures are recorded, never fatal. Frames run in
/// parallel up to opts.jobs; output order and content are independent of the
/// schedule because each frame owns a named RNG substream.
inline SceneEstimate estimate_scene(const SceneRecord& scene, const PipelineOptions& opts) {
  SceneEstimate out;
  out.scene_id = scene.scene_id;

  PointMap pm1;
  InstanceMask mask1;
  std::optional<DepthMap> d1;
  try {
    pm1 = read_pointmap(scene.reference.points);
    mask1 = std::filesystem::exists(scene.reference.mask)
                ? read_mask(scene.reference.mask)
                : InstanceMask::background(pm1.width, pm1.height);
    if (std::filesystem::exists(scene.reference.depth))
      d1 = read_depthmap(scene.reference.depth);
  } catch (const Error& e) {
    for (const auto& q : scene.queries) {
      FrameResult r;
      r.frame = q.id;
      r.status = FrameStatus::load_error;
      r.detail = e.what();
      out.frames.push_back(std::move(r));
    }
    return out;
  }

  const auto run_one = [&](const FrameFiles& q) -> FrameResult {
    try {
      const PointMap pm2 = read_pointmap(q.points);
      const InstanceMask mask2 = std::filesystem::exists(q.mask)
                                     ? read_mask(q.mask)
                                     : InstanceMask::background(pm2.width, pm2.height);
      std::optional<DepthMap> d2;
      if (std::filesystem::exists(q.depth)) d2 = read_depthmap(q.depth);
      return estimate_pair(pm1, pm2, mask1, mask2, d1 ? &*d1 : nullptr, d2 ? &*d2 : nullptr,
                           scene.reference.intrinsics, q.intrinsics, opts, q.id);
    } catch (const Error& e) {
      FrameResult r;
      r.frame = q.id;
      r.status = FrameStatus::load_error;
      r.detail = e.what();
      return r;
    }
  };

  const int jobs = std::max(1, opts.jobs);
  if (jobs == 1 || scene.queries.size() <= 1) {
    for (const auto& q : scene.queries) out.frames.push_back(run_one(q));
  } else {
    out.frames.resize(scene.queries.size());
    std::vector<std::future<void>> workers;
    std::atomic<std::size_t> next{0};
    for (int w = 0; w < jobs; ++w) {
      workers.push_back(std::async(std::launch::async, [&] {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= scene.queries.size()) return;
          out.frames[i] = run_one(scene.queries[i]);
        }
      }));
    }
    for (auto& w : workers) w.get();
  }
  return out;
}

/// Submission text for one estimated scene: one line per estimated frame,
/// failure frames as `# no-estimate` comments, ordered by frame id.
inline std::string submission_text(const SceneEstimate& est) {
  std::string out;
  for (const auto& f : est.frames) {
    if (f.status == FrameStatus::ok) {
      out += format_submission_line({est.scene_id, f.frame, f.pose, f.confidence});
      out += "\n";
    } else {
      out += "# no-estimate " + est.scene_id + " " + f.frame + " " + to_string(f.status) + "\n";
    }
  }
  return out;
}

/// Ground truth records (relative pose of each query w.r.t. the reference)
/// for scenes that carry poses.txt.
inline std::vector<GroundTruthFrame> ground_truth_frames(const SceneRecord& scene) {
  std::vector<GroundTruthFrame> out;
  require(scene.reference.pose.has_value(), ErrorCode::invalid_input,
          scene.scene_id + ": reference frame has no ground-truth pose");
  const Pose ref_inv = invert(*scene.reference.pose);
  for (const auto& q : scene.queries) {
    if (!q.pose) continue;
    out.push_back({scene.scene_id, q.id, compose(*q.pose, ref_inv), q.intrinsics});
  }
  return out;
}

}  // namespace reloc
