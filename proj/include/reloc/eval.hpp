#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "reloc/error.hpp"
#include "reloc/geometry.hpp"

namespace reloc {

inline double translation_error(const Pose& est, const Pose& gt) {
  return (est.translation - gt.translation).norm();
}

inline double rotation_error_deg(const Pose& est, const Pose& gt) {
  return rotation_angle_deg(est.rotation, gt.rotation);
}

/// Virtual-correspondence lattice: a 3x3x3 grid of AR-content points in front
/// of the query camera, x,y in {-0.3, 0, 0.3} m and z in {1.2, 1.8, 2.4} m.
/// Kept in one place so the convention can be swapped.
inline const std::array<Eigen::Vector3d, 27>& vcre_lattice() {
  static const std::array<Eigen::Vector3d, 27> pts = [] {
    std::array<Eigen::Vector3d, 27> p;
    const double xy[3] = {-0.3, 0.0, 0.3};
    const double zs[3] = {1.2, 1.8, 2.4};
    int i = 0;
    for (double z : zs)
      for (double y : xy)
        for (double x : xy) p[i++] = Eigen::Vector3d(x, y, z);
    return p;
  }();
  return pts;
}

/// Mean reprojection displacement of the virtual lattice between the
/// ground-truth and estimated query frames. Points falling behind either
/// camera contribute the image diagonal as a saturated penalty.
inline double vcre(const Pose& est, const Pose& gt, const CameraIntrinsics& k) {
  const Pose rel = compose(est, invert(gt));  // gt query frame -> est query frame
  const double diag = k.image_diagonal();
  double sum = 0;
  for (const auto& q : vcre_lattice()) {
    const Eigen::Vector3d q_est = rel * q;
    if (q.z() <= 0 || q_est.z() <= 0) {
      sum += diag;
      continue;
    }
    sum += (project(k, q) - project(k, q_est)).norm();
  }
  return sum / static_cast<double>(vcre_lattice().size());
}

struct FramePrediction {
  std::string scene;
  std::string frame;
  Pose pose;                 // query w.r.t. reference
  double confidence = 0;
  bool present = true;       // false = no estimate submitted
};

struct GroundTruthFrame {
  std::string scene;
  std::string frame;
  Pose pose;
  CameraIntrinsics intrinsics;
};

/// Joined prediction/ground-truth record with the three error measures.
struct FrameRecord {
  std::string scene;
  std::string frame;
  bool present = false;
  double confidence = 0;
  double trans_err_m = 0;
  double rot_err_deg = 0;
  double vcre_px = 0;
};

/// Correctness predicate for precision/AUC columns.
struct Criterion {
  enum class Kind { vcre, pose } kind = Kind::vcre;
  double vcre_px = 90;
  double trans_m = 0.25;
  double rot_deg = 5;

  static Criterion vcre_below(double px) { return {Kind::vcre, px, 0, 0}; }
  /// Both bounds must hold simultaneously.
  static Criterion pose_below(double m, double deg) { return {Kind::pose, 0, m, deg}; }

  bool passes(const FrameRecord& r) const {
    if (!r.present) return false;
    if (kind == Kind::vcre) return r.vcre_px < vcre_px;
    return r.trans_err_m < trans_m && r.rot_err_deg < rot_deg;
  }
};

/// Joins predictions with ground truth. Every ground-truth frame gets exactly
/// one record; frames without a submitted estimate become absent records.
/// Duplicate predictions and predictions without ground truth are malformed.
inline std::vector<FrameRecord> evaluate_frames(const std::vector<FramePrediction>& preds,
                                                const std::vector<GroundTruthFrame>& gts) {
  std::map<std::pair<std::string, std::string>, const FramePrediction*> by_key;
  for (const auto& p : preds) {
    const auto key = std::make_pair(p.scene, p.frame);
    require(by_key.emplace(key, &p).second, ErrorCode::malformed_submission,
            "duplicate prediction for " + p.scene + "/" + p.frame);
  }

  std::vector<FrameRecord> records;
  records.reserve(gts.size());
  std::size_t used = 0;
  for (const auto& gt : gts) {
    FrameRecord r;
    r.scene = gt.scene;
    r.frame = gt.frame;
    const auto it = by_key.find({gt.scene, gt.frame});
    if (it != by_key.end() && it->second->present) {
      ++used;
      const auto& p = *it->second;
      r.present = true;
      r.confidence = p.confidence;
      r.trans_err_m = translation_error(p.pose, gt.pose);
      r.rot_err_deg = rotation_error_deg(p.pose, gt.pose);
      r.vcre_px = vcre(p.pose, gt.pose, gt.intrinsics);
    } else if (it != by_key.end()) {
      ++used;  // explicit absent marker
    }
    records.push_back(std::move(r));
  }
  require(used == by_key.size(), ErrorCode::malformed_submission,
          "submission contains frames absent from the ground truth");
  return records;
}

/// Fraction of ALL ground-truth frames whose prediction is present and meets
/// the criterion; absent predictions count as failures.
inline double precision(const std::vector<FrameRecord>& records, const Criterion& crit) {
  require(!records.empty(), ErrorCode::invalid_input, "no frames to evaluate");
  std::size_t hits = 0;
  for (const auto& r : records) hits += crit.passes(r);
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

/// Area under the precision-recall curve, predictions ranked by descending
/// confidence (stable w.r.t. input order on ties). Recall is measured against
/// all ground-truth frames, so absent predictions cap it.
inline double auc(const std::vector<FrameRecord>& records, const Criterion& crit) {
  require(!records.empty(), ErrorCode::invalid_input, "no frames to evaluate");
  std::vector<const FrameRecord*> ranked;
  for (const auto& r : records)
    if (r.present) ranked.push_back(&r);
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const FrameRecord* a, const FrameRecord* b) {
                     return a->confidence > b->confidence;
                   });
  const double n = static_cast<double>(records.size());
  double area = 0;
  int tp = 0;
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    if (crit.passes(*ranked[k])) {
      ++tp;
      area += (static_cast<double>(tp) / static_cast<double>(k + 1)) / n;
    }
  }
  return area;
}

struct SceneSummary {
  std::string scene;
  int frames = 0;
  int with_estimate = 0;
  // medians over frames with an estimate; empty when the scene has none
  std::optional<double> median_trans_m;
  std::optional<double> median_rot_deg;
  std::optional<double> median_vcre_px;
};

struct EvalReport {
  std::vector<SceneSummary> scenes;
  // unweighted means of the per-scene medians (scenes with estimates only)
  std::optional<double> avg_median_trans_m;
  std::optional<double> avg_median_rot_deg;
  std::optional<double> avg_median_vcre_px;
  double coverage = 0;  // frames with an estimate / all ground-truth frames
  int total_frames = 0;
  int frames_with_estimate = 0;
  int scenes_without_estimates = 0;
  double precision_vcre45 = 0, precision_vcre90 = 0, precision_pose = 0;
  double auc_vcre45 = 0, auc_vcre90 = 0, auc_pose = 0;
};

/// Lower-middle median: for even counts the lower of the two central values,
/// so reported medians are always realized errors.
inline double median_lower(std::vector<double> v) {
  const std::size_t k = (v.size() - 1) / 2;
  std::nth_element(v.begin(), v.begin() + k, v.end());
  return v[k];
}

inline EvalReport aggregate(const std::vector<FrameRecord>& records) {
  require(!records.empty(), ErrorCode::invalid_input, "no frames to aggregate");

  std::map<std::string, std::vector<const FrameRecord*>> by_scene;
  for (const auto& r : records) by_scene[r.scene].push_back(&r);

  EvalReport rep;
  rep.total_frames = static_cast<int>(records.size());
  double sum_t = 0, sum_r = 0, sum_v = 0;
  int scenes_with = 0;
  for (const auto& [scene, frames] : by_scene) {
    SceneSummary s;
    s.scene = scene;
    s.frames = static_cast<int>(frames.size());
    std::vector<double> ts, rs, vs;
    for (const auto* f : frames) {
      if (!f->present) continue;
      ts.push_back(f->trans_err_m);
      rs.push_back(f->rot_err_deg);
      vs.push_back(f->vcre_px);
    }
    s.with_estimate = static_cast<int>(ts.size());
    rep.frames_with_estimate += s.with_estimate;
    if (!ts.empty()) {
      s.median_trans_m = median_lower(ts);
      s.median_rot_deg = median_lower(rs);
      s.median_vcre_px = median_lower(vs);
      sum_t += *s.median_trans_m;
      sum_r += *s.median_rot_deg;
      sum_v += *s.median_vcre_px;
      ++scenes_with;
    } else {
      ++rep.scenes_without_estimates;
    }
    rep.scenes.push_back(std::move(s));
  }
  if (scenes_with > 0) {
    rep.avg_median_trans_m = sum_t / scenes_with;
    rep.avg_median_rot_deg = sum_r / scenes_with;
    rep.avg_median_vcre_px = sum_v / scenes_with;
  }
  rep.coverage = static_cast<double>(rep.frames_with_estimate) / rep.total_frames;

  rep.precision_vcre45 = precision(records, Criterion::vcre_below(45));
  rep.precision_vcre90 = precision(records, Criterion::vcre_below(90));
  rep.precision_pose = precision(records, Criterion::pose_below(0.25, 5));
  rep.auc_vcre45 = auc(records, Criterion::vcre_below(45));
  rep.auc_vcre90 = auc(records, Criterion::vcre_below(90));
  rep.auc_pose = auc(records, Criterion::pose_below(0.25, 5));
  return rep;
}

}  // namespace reloc
