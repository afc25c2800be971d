#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "reloc/error.hpp"
#include "reloc/geometry.hpp"
#include "reloc/pointmap.hpp"
#include "reloc/scale.hpp"

namespace reloc {

namespace io {

/// Shortest round-trip decimal form, locale-independent.
inline std::string fmt(double v) {
  std::array<char, 32> buf;
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::io_error, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorCode::io_error, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(out.good(), ErrorCode::io_error, "short write to " + path.string());
}

inline void append_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void append_f32(std::string& s, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  append_u32(s, bits);
}

struct Cursor {
  const std::string& bytes;
  std::size_t pos = 0;
  const std::string name;

  std::uint8_t u8() {
    require(pos + 1 <= bytes.size(), ErrorCode::format_error, name + ": truncated file");
    return static_cast<std::uint8_t>(bytes[pos++]);
  }
  std::uint32_t u32() {
    require(pos + 4 <= bytes.size(), ErrorCode::format_error, name + ": truncated file");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
};

}  // namespace io

// ---------------------------------------------------------------------------
// FMAP: little-endian float raster with a validity bitmap.
//   magic "FMAP", version u8 (=1), dtype u8 (0 = f32), channels u8
//   (1 = depth, 3 = point map), flags u8 (bit0 = canonical-space depth),
//   width u32, height u32, focal_used f32, payload (w*h*channels f32,
//   row-major, channels interleaved), validity bitmap (row-major, 1 bit per
//   pixel, LSB first, zero-padded to a byte).
// ---------------------------------------------------------------------------

inline constexpr std::uint8_t kFmapVersion = 1;
inline constexpr std::uint8_t kFmapFlagCanonical = 0x01;

struct RasterFile {
  std::uint8_t channels = 1;
  std::uint8_t flags = 0;
  std::uint32_t width = 0, height = 0;
  float focal_used = 0;
  std::vector<float> payload;
  std::vector<std::uint8_t> valid;  // one byte per pixel, 0/1
};

inline std::string encode_fmap(const RasterFile& r) {
  const std::size_t npx = static_cast<std::size_t>(r.width) * r.height;
  require(r.payload.size() == npx * r.channels && r.valid.size() == npx,
          ErrorCode::invalid_input, "raster buffers disagree with header");
  std::string out;
  out.reserve(20 + 4 * r.payload.size() + (npx + 7) / 8);
  out += "FMAP";
  out.push_back(static_cast<char>(kFmapVersion));
  out.push_back(0);  // dtype f32
  out.push_back(static_cast<char>(r.channels));
  out.push_back(static_cast<char>(r.flags));
  io::append_u32(out, r.width);
  io::append_u32(out, r.height);
  io::append_f32(out, r.focal_used);
  for (float v : r.payload) io::append_f32(out, v);
  for (std::size_t i = 0; i < npx; i += 8) {
    std::uint8_t b = 0;
    for (std::size_t j = 0; j < 8 && i + j < npx; ++j) {
      if (r.valid[i + j]) b |= static_cast<std::uint8_t>(1u << j);
    }
    out.push_back(static_cast<char>(b));
  }
  return out;
}

inline RasterFile decode_fmap(const std::string& bytes, const std::string& name) {
  io::Cursor c{bytes, 0, name};
  require(bytes.size() >= 4 && bytes.compare(0, 4, "FMAP") == 0, ErrorCode::format_error,
          name + ": bad magic");
  c.pos = 4;
  const std::uint8_t version = c.u8();
  require(version == kFmapVersion, ErrorCode::format_error, name + ": unsupported version");
  const std::uint8_t dtype = c.u8();
  require(dtype == 0, ErrorCode::format_error, name + ": unsupported dtype");
  RasterFile r;
  r.channels = c.u8();
  require(r.channels == 1 || r.channels == 3, ErrorCode::format_error,
          name + ": unsupported channel count");
  r.flags = c.u8();
  r.width = c.u32();
  r.height = c.u32();
  require(r.width > 0 && r.height > 0, ErrorCode::format_error, name + ": empty raster");
  r.focal_used = c.f32();

  const std::size_t npx = static_cast<std::size_t>(r.width) * r.height;
  const std::size_t expected = 20 + npx * r.channels * 4 + (npx + 7) / 8;
  require(bytes.size() == expected, ErrorCode::format_error,
          name + ": file length " + std::to_string(bytes.size()) + " != declared " +
              std::to_string(expected));
  r.payload.resize(npx * r.channels);
  for (auto& v : r.payload) v = c.f32();
  r.valid.resize(npx);
  for (std::size_t i = 0; i < npx; i += 8) {
    const std::uint8_t b = c.u8();
    for (std::size_t j = 0; j < 8 && i + j < npx; ++j) r.valid[i + j] = (b >> j) & 1;
  }
  return r;
}

inline void write_pointmap(const std::filesystem::path& path, const PointMap& pm) {
  RasterFile r;
  r.channels = 3;
  r.width = static_cast<std::uint32_t>(pm.width);
  r.height = static_cast<std::uint32_t>(pm.height);
  r.payload.assign(pm.points.begin(), pm.points.end());
  r.valid = pm.valid;
  io::write_file(path, encode_fmap(r));
}

inline PointMap read_pointmap(const std::filesystem::path& path) {
  const RasterFile r = decode_fmap(io::read_file(path), path.string());
  require(r.channels == 3, ErrorCode::format_error, path.string() + ": expected 3 channels");
  PointMap pm = PointMap::empty(static_cast<int>(r.width), static_cast<int>(r.height));
  pm.points.assign(r.payload.begin(), r.payload.end());
  pm.valid = r.valid;
  validate(pm);
  return pm;
}

inline void write_depthmap(const std::filesystem::path& path, const DepthMap& dm) {
  RasterFile r;
  r.channels = 1;
  r.flags = dm.space == DepthSpace::canonical ? kFmapFlagCanonical : 0;
  r.width = static_cast<std::uint32_t>(dm.width);
  r.height = static_cast<std::uint32_t>(dm.height);
  r.focal_used = static_cast<float>(dm.focal_used);
  r.payload.assign(dm.depth.begin(), dm.depth.end());
  r.valid = dm.valid;
  io::write_file(path, encode_fmap(r));
}

inline DepthMap read_depthmap(const std::filesystem::path& path) {
  const RasterFile r = decode_fmap(io::read_file(path), path.string());
  require(r.channels == 1, ErrorCode::format_error, path.string() + ": expected 1 channel");
  DepthMap dm = DepthMap::empty(static_cast<int>(r.width), static_cast<int>(r.height));
  dm.depth.assign(r.payload.begin(), r.payload.end());
  dm.valid = r.valid;
  dm.space = (r.flags & kFmapFlagCanonical) ? DepthSpace::canonical : DepthSpace::metric;
  dm.focal_used = r.focal_used;
  require(dm.space == DepthSpace::metric || dm.focal_used > 0, ErrorCode::format_error,
          path.string() + ": canonical depth must declare its focal length");
  validate(dm);
  return dm;
}

// ---------------------------------------------------------------------------
// Instance masks: binary PGM (P5), maxval 255, label 0 = background.
// ---------------------------------------------------------------------------

inline void write_mask(const std::filesystem::path& path, const InstanceMask& m) {
  std::string out = "P5\n" + std::to_string(m.width) + " " + std::to_string(m.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(m.labels.data()), m.labels.size());
  io::write_file(path, out);
}

inline InstanceMask read_mask(const std::filesystem::path& path) {
  const std::string bytes = io::read_file(path);
  require(bytes.size() >= 2, ErrorCode::format_error, path.string() + ": truncated file");
  require(bytes[0] == 'P' && bytes[1] == '5', ErrorCode::format_error,
          path.string() + ": only binary PGM (P5) masks are supported");
  std::size_t pos = 2;
  // header tokens: width, height, maxval; '#' comments allowed
  const auto next_token = [&]() -> long {
    for (;;) {
      while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    long v = 0;
    const auto start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + (bytes[pos] - '0');
      ++pos;
    }
    require(pos > start, ErrorCode::format_error, path.string() + ": malformed PGM header");
    return v;
  };
  const long w = next_token();
  const long h = next_token();
  const long maxval = next_token();
  require(maxval == 255, ErrorCode::format_error, path.string() + ": maxval must be 255");
  require(w > 0 && h > 0, ErrorCode::format_error, path.string() + ": empty mask");
  ++pos;  // single whitespace after maxval
  require(bytes.size() - pos == static_cast<std::size_t>(w) * h, ErrorCode::format_error,
          path.string() + ": payload size disagrees with header");
  InstanceMask m = InstanceMask::background(static_cast<int>(w), static_cast<int>(h));
  std::memcpy(m.labels.data(), bytes.data() + pos, m.labels.size());
  return m;
}

// ---------------------------------------------------------------------------
// Scene layout:
//   <scene>/intrinsics.txt   lines: frame fx fy cx cy w h (first = reference)
//   <scene>/poses.txt        optional, lines: frame qw qx qy qz tx ty tz
//   <scene>/frames/<frame>_points.fmap, <frame>_depth.fmap
//   <scene>/masks/<frame>.pgm
// ---------------------------------------------------------------------------

struct FrameFiles {
  std::string id;
  CameraIntrinsics intrinsics;
  std::filesystem::path points;
  std::filesystem::path depth;
  std::filesystem::path mask;
  std::optional<Pose> pose;  // world -> camera, from poses.txt
};

struct SceneRecord {
  std::string scene_id;
  FrameFiles reference;
  std::vector<FrameFiles> queries;  // sorted by frame id
};

namespace io {

inline std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

inline double parse_double(const std::string& s, const std::string& where) {
  double v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  require(res.ec == std::errc() && res.ptr == s.data() + s.size(), ErrorCode::format_error,
          where + ": bad number '" + s + "'");
  return v;
}

}  // namespace io

inline SceneRecord read_scene(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  require(fs::is_directory(dir), ErrorCode::io_error, dir.string() + " is not a directory");
  const fs::path intr_path = dir / "intrinsics.txt";
  require(fs::exists(intr_path), ErrorCode::io_error, intr_path.string() + " is missing");

  SceneRecord scene;
  scene.scene_id = dir.filename().string();

  std::map<std::string, Pose> poses;
  if (fs::exists(dir / "poses.txt")) {
    std::istringstream ss(io::read_file(dir / "poses.txt"));
    std::string line;
    int line_no = 0;
    while (std::getline(ss, line)) {
      ++line_no;
      if (line.empty() || line[0] == '#') continue;
      const auto tok = io::split_ws(line);
      if (tok.empty()) continue;
      const std::string where = "poses.txt:" + std::to_string(line_no);
      require(tok.size() == 8, ErrorCode::format_error,
              where + ": expected 8 fields, got " + std::to_string(tok.size()));
      Pose p;
      p.rotation = Rotation::from_quaternion(
          io::parse_double(tok[1], where), io::parse_double(tok[2], where),
          io::parse_double(tok[3], where), io::parse_double(tok[4], where));
      p.translation = {io::parse_double(tok[5], where), io::parse_double(tok[6], where),
                       io::parse_double(tok[7], where)};
      require(poses.emplace(tok[0], p).second, ErrorCode::format_error,
              where + ": duplicate frame '" + tok[0] + "'");
    }
  }

  std::istringstream ss(io::read_file(intr_path));
  std::string line;
  int line_no = 0;
  std::map<std::string, bool> seen;
  bool first = true;
  while (std::getline(ss, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto tok = io::split_ws(line);
    if (tok.empty()) continue;
    const std::string where = "intrinsics.txt:" + std::to_string(line_no);
    require(tok.size() == 7, ErrorCode::format_error,
            where + ": expected 7 fields (frame fx fy cx cy w h), got " +
                std::to_string(tok.size()));
    FrameFiles f;
    f.id = tok[0];
    require(seen.emplace(f.id, true).second, ErrorCode::format_error,
            where + ": duplicate frame '" + f.id + "'");
    f.intrinsics.fx = io::parse_double(tok[1], where);
    f.intrinsics.fy = io::parse_double(tok[2], where);
    f.intrinsics.cx = io::parse_double(tok[3], where);
    f.intrinsics.cy = io::parse_double(tok[4], where);
    f.intrinsics.width = static_cast<int>(io::parse_double(tok[5], where));
    f.intrinsics.height = static_cast<int>(io::parse_double(tok[6], where));
    validate(f.intrinsics);
    f.points = dir / "frames" / (f.id + "_points.fmap");
    f.depth = dir / "frames" / (f.id + "_depth.fmap");
    f.mask = dir / "masks" / (f.id + ".pgm");
    // Point maps are mandatory; depth and masks are degradation modes the
    // pipeline reports per frame.
    require(fs::exists(f.points), ErrorCode::io_error, f.points.string() + " is missing");
    if (const auto it = poses.find(f.id); it != poses.end()) f.pose = it->second;
    if (first) {
      scene.reference = std::move(f);
      first = false;
    } else {
      scene.queries.push_back(std::move(f));
    }
  }
  require(!first, ErrorCode::format_error, intr_path.string() + " declares no frames");
  std::sort(scene.queries.begin(), scene.queries.end(),
            [](const FrameFiles& a, const FrameFiles& b) { return a.id < b.id; });
  return scene;
}

/// Scene directories under root, lexicographic.
inline std::vector<std::filesystem::path> list_scene_dirs(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  require(fs::is_directory(root), ErrorCode::io_error, root.string() + " is not a directory");
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory() && fs::exists(e.path() / "intrinsics.txt")) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

// ---------------------------------------------------------------------------
// Submission: text lines `scene frame qw qx qy qz tx ty tz confidence`,
// '#' comment lines allowed. Frames without an estimate are recorded as
// `# no-estimate <scene> <frame> <status>` comments.
// ---------------------------------------------------------------------------

struct SubmissionEntry {
  std::string scene;
  std::string frame;
  Pose pose;
  double confidence = 0;
};

inline std::string format_submission_line(const SubmissionEntry& e) {
  const auto q = e.pose.rotation.to_quaternion();
  std::string out = e.scene + " " + e.frame;
  for (double v : q) out += " " + io::fmt(v);
  for (int i = 0; i < 3; ++i) out += " " + io::fmt(e.pose.translation(i));
  out += " " + io::fmt(e.confidence);
  return out;
}

inline std::vector<SubmissionEntry> read_submission(const std::filesystem::path& path) {
  std::istringstream ss(io::read_file(path));
  std::vector<SubmissionEntry> out;
  std::map<std::pair<std::string, std::string>, bool> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto tok = io::split_ws(line);
    if (tok.empty()) continue;
    const std::string where = path.filename().string() + ":" + std::to_string(line_no);
    require(tok.size() == 10, ErrorCode::malformed_submission,
            where + ": expected 10 fields, got " + std::to_string(tok.size()));
    SubmissionEntry e;
    e.scene = tok[0];
    e.frame = tok[1];
    require(seen.emplace(std::make_pair(e.scene, e.frame), true).second,
            ErrorCode::malformed_submission, where + ": duplicate frame");
    double q[4];
    for (int i = 0; i < 4; ++i) q[i] = io::parse_double(tok[2 + i], where);
    const double norm = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
    require(std::abs(norm - 1.0) <= 1e-3, ErrorCode::malformed_submission,
            where + ": quaternion norm " + io::fmt(norm) + " too far from 1");
    e.pose.rotation = Rotation::from_quaternion(q[0], q[1], q[2], q[3]);
    e.pose.translation = {io::parse_double(tok[6], where), io::parse_double(tok[7], where),
                          io::parse_double(tok[8], where)};
    e.confidence = io::parse_double(tok[9], where);
    require(e.confidence >= 0, ErrorCode::malformed_submission,
            where + ": negative confidence");
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace reloc
