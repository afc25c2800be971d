#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "reloc/error.hpp"

namespace reloc {

/// Integer pixel location, x = column, y = row.
struct Pixel {
  int x = 0;
  int y = 0;

  friend bool operator==(const Pixel&, const Pixel&) = default;
};

/// Per-pixel 3D coordinates, both views of a pair expressed in the reference
/// camera's frame. Values are stored as double in memory; the on-disk raster
/// format narrows to float32.
struct PointMap {
  int width = 0, height = 0;
  std::vector<double> points;          // 3 per pixel, row-major
  std::vector<std::uint8_t> valid;     // 1 per pixel
  std::vector<double> confidence;      // 1 per pixel, >= 0

  static PointMap empty(int width, int height) {
    PointMap pm;
    pm.width = width;
    pm.height = height;
    pm.points.assign(static_cast<std::size_t>(width) * height * 3, 0.0);
    pm.valid.assign(static_cast<std::size_t>(width) * height, 0);
    pm.confidence.assign(static_cast<std::size_t>(width) * height, 1.0);
    return pm;
  }

  std::int32_t index(const Pixel& p) const { return p.y * width + p.x; }
  Pixel pixel(std::int32_t idx) const { return {idx % width, idx / width}; }

  bool is_valid(const Pixel& p) const { return valid[index(p)] != 0; }

  Eigen::Vector3d point(const Pixel& p) const {
    const auto i = static_cast<std::size_t>(index(p)) * 3;
    return {points[i], points[i + 1], points[i + 2]};
  }

  void set_point(const Pixel& p, const Eigen::Vector3d& v) {
    const auto i = static_cast<std::size_t>(index(p)) * 3;
    points[i] = v.x();
    points[i + 1] = v.y();
    points[i + 2] = v.z();
  }

  std::size_t valid_count() const {
    std::size_t n = 0;
    for (auto v : valid) n += v != 0;
    return n;
  }
};

inline void validate(const PointMap& pm) {
  const auto n = static_cast<std::size_t>(pm.width) * pm.height;
  require(pm.width > 0 && pm.height > 0, ErrorCode::invalid_input, "point map has no pixels");
  require(pm.points.size() == n * 3 && pm.valid.size() == n && pm.confidence.size() == n,
          ErrorCode::invalid_input, "point map channel sizes disagree");
  for (std::size_t i = 0; i < n; ++i) {
    if (!pm.valid[i]) continue;
    require(std::isfinite(pm.points[3 * i]) && std::isfinite(pm.points[3 * i + 1]) &&
                std::isfinite(pm.points[3 * i + 2]),
            ErrorCode::invalid_input, "valid point with non-finite coordinates");
    require(pm.confidence[i] >= 0, ErrorCode::invalid_input, "negative confidence");
  }
}

/// Per-pixel instance labels. 0 is background; labels o >= 1 identify the
/// same physical instance in the reference and query masks of a pair.
struct InstanceMask {
  int width = 0, height = 0;
  std::vector<std::uint8_t> labels;

  static InstanceMask background(int width, int height) {
    InstanceMask m;
    m.width = width;
    m.height = height;
    m.labels.assign(static_cast<std::size_t>(width) * height, 0);
    return m;
  }

  std::uint8_t label(const Pixel& p) const { return labels[p.y * width + p.x]; }

  bool contains(std::uint8_t id) const {
    for (auto l : labels)
      if (l == id) return true;
    return false;
  }
};

/// One reference<->query pixel pair. instance == 0 marks a global match,
/// otherwise the id of the instance mask it was matched inside.
struct Correspondence {
  Pixel ref;
  Pixel query;
  std::uint8_t instance = 0;
};

struct CorrespondenceMap {
  std::vector<Correspondence> pairs;

  std::size_t size() const { return pairs.size(); }
  bool insufficient() const { return pairs.size() < 5; }
};

}  // namespace reloc
