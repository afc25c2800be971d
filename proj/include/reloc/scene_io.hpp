#pragma once

#include <cstdio>
#include <filesystem>
#include <string>

#include "reloc/io.hpp"
#include "reloc/synth.hpp"

namespace reloc {

/// Query frame ids are q0000, q0001, ...; the reference frame is "ref".
inline std::string query_frame_id(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "q%04zu", i);
  return buf;
}

/// Writes a synthetic scene in the dataset layout, ground truth included, so
/// the estimation pipeline consumes synthetic and real data identically.
inline std::filesystem::path write_scene(const std::filesystem::path& dir,
                                         const SyntheticScene& scene) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir / "frames", ec);
  require(!ec, ErrorCode::io_error, "cannot create " + (dir / "frames").string());
  fs::create_directories(dir / "masks", ec);
  require(!ec, ErrorCode::io_error, "cannot create " + (dir / "masks").string());

  const auto intr_line = [](const std::string& id, const CameraIntrinsics& k) {
    return id + " " + io::fmt(k.fx) + " " + io::fmt(k.fy) + " " + io::fmt(k.cx) + " " +
           io::fmt(k.cy) + " " + std::to_string(k.width) + " " + std::to_string(k.height) +
           "\n";
  };
  const auto pose_line = [](const std::string& id, const Pose& p) {
    const auto q = p.rotation.to_quaternion();
    std::string out = id;
    for (double v : q) out += " " + io::fmt(v);
    for (int i = 0; i < 3; ++i) out += " " + io::fmt(p.translation(i));
    return out + "\n";
  };

  std::string intrinsics = intr_line("ref", scene.k1);
  // World frame = reference camera frame, so the reference pose is identity
  // and each query's world-to-camera pose equals its relative pose.
  std::string poses = pose_line("ref", Pose::identity());
  write_pointmap(dir / "frames" / "ref_points.fmap", scene.pm1);
  write_depthmap(dir / "frames" / "ref_depth.fmap", scene.d1);
  write_mask(dir / "masks" / "ref.pgm", scene.mask1);

  for (std::size_t i = 0; i < scene.queries.size(); ++i) {
    const auto& q = scene.queries[i];
    const std::string id = query_frame_id(i);
    intrinsics += intr_line(id, q.k2);
    poses += pose_line(id, q.gt_pose);
    write_pointmap(dir / "frames" / (id + "_points.fmap"), q.pm2);
    write_depthmap(dir / "frames" / (id + "_depth.fmap"), q.d2);
    write_mask(dir / "masks" / (id + ".pgm"), q.mask2);
  }
  io::write_file(dir / "intrinsics.txt", intrinsics);
  io::write_file(dir / "poses.txt", poses);
  return dir;
}

}  // namespace reloc
