#pragma once

#include <string>
#include <vector>

#include "reloc/eval.hpp"
#include "reloc/io.hpp"

namespace reloc {

namespace io {

inline std::string json_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (static_cast<unsigned char>(c) < 0x20) continue;
    out.push_back(c);
  }
  return out;
}

}  // namespace io

/// key = value lines; absent medians render as "absent".
inline std::string report_text(const EvalReport& r) {
  const auto opt = [](const std::optional<double>& v) {
    return v ? io::fmt(*v) : std::string("absent");
  };
  std::string out;
  out += "total_frames = " + std::to_string(r.total_frames) + "\n";
  out += "frames_with_estimate = " + std::to_string(r.frames_with_estimate) + "\n";
  out += "coverage = " + io::fmt(r.coverage) + "\n";
  out += "scenes = " + std::to_string(r.scenes.size()) + "\n";
  out += "scenes_without_estimates = " + std::to_string(r.scenes_without_estimates) + "\n";
  out += "average_median_translation_error_m = " + opt(r.avg_median_trans_m) + "\n";
  out += "average_median_rotation_error_deg = " + opt(r.avg_median_rot_deg) + "\n";
  out += "average_median_reprojection_error_px = " + opt(r.avg_median_vcre_px) + "\n";
  out += "precision_vcre_45px = " + io::fmt(r.precision_vcre45) + "\n";
  out += "precision_vcre_90px = " + io::fmt(r.precision_vcre90) + "\n";
  out += "precision_pose_25cm_5deg = " + io::fmt(r.precision_pose) + "\n";
  out += "auc_vcre_45px = " + io::fmt(r.auc_vcre45) + "\n";
  out += "auc_vcre_90px = " + io::fmt(r.auc_vcre90) + "\n";
  out += "auc_pose_25cm_5deg = " + io::fmt(r.auc_pose) + "\n";
  for (const auto& s : r.scenes) {
    out += "scene." + s.scene + ".frames = " + std::to_string(s.frames) + "\n";
    out += "scene." + s.scene + ".with_estimate = " + std::to_string(s.with_estimate) + "\n";
    out += "scene." + s.scene + ".median_translation_error_m = " + opt(s.median_trans_m) + "\n";
    out += "scene." + s.scene + ".median_rotation_error_deg = " + opt(s.median_rot_deg) + "\n";
    out +=
        "scene." + s.scene + ".median_reprojection_error_px = " + opt(s.median_vcre_px) + "\n";
  }
  return out;
}

inline std::string report_json(const EvalReport& r) {
  const auto opt = [](const std::optional<double>& v) {
    return v ? io::fmt(*v) : std::string("null");
  };
  std::string out = "{\n";
  out += "  \"total_frames\": " + std::to_string(r.total_frames) + ",\n";
  out += "  \"frames_with_estimate\": " + std::to_string(r.frames_with_estimate) + ",\n";
  out += "  \"coverage\": " + io::fmt(r.coverage) + ",\n";
  out += "  \"scenes_without_estimates\": " + std::to_string(r.scenes_without_estimates) +
         ",\n";
  out += "  \"average_median_translation_error_m\": " + opt(r.avg_median_trans_m) + ",\n";
  out += "  \"average_median_rotation_error_deg\": " + opt(r.avg_median_rot_deg) + ",\n";
  out += "  \"average_median_reprojection_error_px\": " + opt(r.avg_median_vcre_px) + ",\n";
  out += "  \"precision\": {\"vcre_45px\": " + io::fmt(r.precision_vcre45) +
         ", \"vcre_90px\": " + io::fmt(r.precision_vcre90) +
         ", \"pose_25cm_5deg\": " + io::fmt(r.precision_pose) + "},\n";
  out += "  \"auc\": {\"vcre_45px\": " + io::fmt(r.auc_vcre45) +
         ", \"vcre_90px\": " + io::fmt(r.auc_vcre90) +
         ", \"pose_25cm_5deg\": " + io::fmt(r.auc_pose) + "},\n";
  out += "  \"scenes\": [";
  for (std::size_t i = 0; i < r.scenes.size(); ++i) {
    const auto& s = r.scenes[i];
    out += i ? ",\n    {" : "\n    {";
    out += "\"scene\": \"" + io::json_escape(s.scene) + "\", ";
    out += "\"frames\": " + std::to_string(s.frames) + ", ";
    out += "\"with_estimate\": " + std::to_string(s.with_estimate) + ", ";
    out += "\"median_translation_error_m\": " + opt(s.median_trans_m) + ", ";
    out += "\"median_rotation_error_deg\": " + opt(s.median_rot_deg) + ", ";
    out += "\"median_reprojection_error_px\": " + opt(s.median_vcre_px) + "}";
  }
  out += "\n  ]\n}\n";
  return out;
}

/// scene,frame,trans_err,rot_err,vcre,confidence; absent frames carry empty
/// error fields.
inline std::string records_csv(const std::vector<FrameRecord>& records) {
  std::string out = "scene,frame,trans_err,rot_err,vcre,confidence\n";
  for (const auto& r : records) {
    out += r.scene + "," + r.frame + ",";
    if (r.present) {
      out += io::fmt(r.trans_err_m) + "," + io::fmt(r.rot_err_deg) + "," + io::fmt(r.vcre_px) +
             "," + io::fmt(r.confidence);
    } else {
      out += ",,,0";
    }
    out += "\n";
  }
  return out;
}

}  // namespace reloc
