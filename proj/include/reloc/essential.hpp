#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "reloc/error.hpp"
#include "reloc/five_point.hpp"
#include "reloc/geometry.hpp"
#include "reloc/pointmap.hpp"

namespace reloc {

/// Essential matrix, stored projected onto the manifold (singular values
/// (s, s, 0)) and scaled to Frobenius norm sqrt(2).
class EssentialMatrix {
 public:
  /// Projects m to the nearest essential matrix. Throws invalid_essential
  /// when the smallest singular value exceeds rank_tol relative to the
  /// largest (a genuinely rank-3 input).
  static EssentialMatrix from_matrix(const Eigen::Matrix3d& m, double rank_tol = 1e-6) {
    const Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Vector3d s = svd.singularValues();
    require(s(0) > 0, ErrorCode::invalid_essential, "zero matrix");
    require(s(2) <= rank_tol * s(0), ErrorCode::invalid_essential,
            "matrix is not rank 2 within tolerance");
    EssentialMatrix e;
    e.m_ = svd.matrixU() * Eigen::Vector3d(1, 1, 0).asDiagonal() * svd.matrixV().transpose();
    return e;
  }

  const Eigen::Matrix3d& matrix() const { return m_; }

 private:
  Eigen::Matrix3d m_ = Eigen::Matrix3d::Zero();
};

/// First-order epipolar distance squared. A zero denominator (both epipolar
/// line gradients vanish) returns +inf so the pair counts as an outlier.
inline double sampson_error(const Eigen::Matrix3d& e, const NormalizedCorrespondence& c) {
  const Eigen::Vector3d x1(c.x1.x(), c.x1.y(), 1.0);
  const Eigen::Vector3d x2(c.x2.x(), c.x2.y(), 1.0);
  const Eigen::Vector3d ex1 = e * x1;
  const Eigen::Vector3d etx2 = e.transpose() * x2;
  const double num = x2.dot(ex1);
  const double den = ex1.x() * ex1.x() + ex1.y() * ex1.y() + etx2.x() * etx2.x() +
                     etx2.y() * etx2.y();
  if (den == 0) return std::numeric_limits<double>::infinity();
  return num * num / den;
}

inline double sampson_error(const EssentialMatrix& e, const NormalizedCorrespondence& c) {
  return sampson_error(e.matrix(), c);
}

/// Pixel -> normalized coordinates, per camera: x = (px - c) / f per axis.
inline std::vector<NormalizedCorrespondence> normalize(const CameraIntrinsics& k1,
                                                       const CameraIntrinsics& k2,
                                                       const CorrespondenceMap& map) {
  std::vector<NormalizedCorrespondence> out;
  out.reserve(map.pairs.size());
  for (const auto& c : map.pairs) {
    out.push_back({{(c.ref.x - k1.cx) / k1.fx, (c.ref.y - k1.cy) / k1.fy},
                   {(c.query.x - k2.cx) / k2.fx, (c.query.y - k2.cy) / k2.fy}});
  }
  return out;
}

struct PoseCandidate {
  Rotation rotation;
  UnitTranslation direction;
};

/// The standard four-fold ambiguity {U W V^T, U W^T V^T} x {+u3, -u3}, with
/// sign fixes so every rotation has determinant +1.
inline std::array<PoseCandidate, 4> decompose_essential(const EssentialMatrix& e) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(e.matrix(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  Eigen::Matrix3d v = svd.matrixV();
  if (u.determinant() < 0) u = -u;
  if (v.determinant() < 0) v = -v;

  Eigen::Matrix3d w;
  w << 0, -1, 0, 1, 0, 0, 0, 0, 1;

  const Rotation r1 = Rotation::from_matrix(u * w * v.transpose(), 1e-6);
  const Rotation r2 = Rotation::from_matrix(u * w.transpose() * v.transpose(), 1e-6);
  const UnitTranslation tp = UnitTranslation::from_vector(u.col(2));
  const UnitTranslation tn = UnitTranslation::from_vector(-u.col(2));
  return {PoseCandidate{r1, tp}, PoseCandidate{r1, tn}, PoseCandidate{r2, tp},
          PoseCandidate{r2, tn}};
}

inline std::array<PoseCandidate, 4> decompose_essential(const Eigen::Matrix3d& e,
                                                        double rank_tol = 1e-6) {
  return decompose_essential(EssentialMatrix::from_matrix(e, rank_tol));
}

/// Linear (DLT) two-view triangulation under P1 = [I|0], P2 = [R|t].
/// Returns the point in the reference frame, or nothing when the
/// homogeneous solution lies at infinity.
inline std::optional<Eigen::Vector3d> triangulate_dlt(const NormalizedCorrespondence& c,
                                                      const Rotation& r,
                                                      const Eigen::Vector3d& t) {
  Eigen::Matrix<double, 3, 4> p2;
  p2.leftCols<3>() = r.matrix();
  p2.col(3) = t;

  Eigen::Matrix4d a;
  // x1 cross P1 X = 0 rows for P1 = [I|0]
  a.row(0) << -1, 0, c.x1.x(), 0;
  a.row(1) << 0, -1, c.x1.y(), 0;
  a.row(2) = c.x2.x() * p2.row(2) - p2.row(0);
  a.row(3) = c.x2.y() * p2.row(2) - p2.row(1);

  const Eigen::JacobiSVD<Eigen::Matrix4d> svd(a, Eigen::ComputeFullV);
  const Eigen::Vector4d x = svd.matrixV().col(3);
  if (std::abs(x(3)) < 1e-12) return std::nullopt;
  return Eigen::Vector3d(x(0) / x(3), x(1) / x(3), x(2) / x(3));
}

enum class CheiralityMethod {
  triangulation,  // self-contained: triangulate from the candidate itself
  depth,          // use depth-map back-projections of the matches
};

struct RelativePoseHypothesis {
  Rotation rotation;
  UnitTranslation direction;
  std::vector<char> inlier_mask;  // which of the given correspondences passed
  int inlier_count = 0;
};

namespace detail {

inline double mean_sampson(const PoseCandidate& cand,
                           const std::vector<NormalizedCorrespondence>& corrs) {
  const Eigen::Matrix3d e = essential_from_pose(cand.rotation, cand.direction);
  double sum = 0;
  for (const auto& c : corrs) sum += sampson_error(e, c);
  return corrs.empty() ? 0.0 : sum / static_cast<double>(corrs.size());
}

}  // namespace detail

/// Picks the candidate with the most points in front of both cameras
/// (triangulated from the candidate itself); ties go to the lower mean
/// Sampson error. Throws cheirality_failed when no candidate places any
/// point in front of both cameras.
inline RelativePoseHypothesis select_cheirality(
    const std::array<PoseCandidate, 4>& candidates,
    const std::vector<NormalizedCorrespondence>& corrs) {
  require(!corrs.empty(), ErrorCode::invalid_input, "cheirality needs at least one inlier");

  int best = -1;
  int best_count = 0;
  double best_err = std::numeric_limits<double>::infinity();
  std::vector<char> best_mask;

  for (int i = 0; i < 4; ++i) {
    const auto& cand = candidates[i];
    std::vector<char> mask(corrs.size(), 0);
    int count = 0;
    for (std::size_t j = 0; j < corrs.size(); ++j) {
      const auto x = triangulate_dlt(corrs[j], cand.rotation, cand.direction.vector());
      if (!x) continue;
      const double z1 = x->z();
      const double z2 = (cand.rotation * *x + cand.direction.vector()).z();
      if (z1 > 0 && z2 > 0) {
        mask[j] = 1;
        ++count;
      }
    }
    double err = -1;
    if (count > best_count ||
        (count == best_count && count > 0 &&
         (err = detail::mean_sampson(cand, corrs)) < best_err)) {
      best = i;
      best_count = count;
      best_err = err >= 0 ? err : detail::mean_sampson(cand, corrs);
      best_mask = std::move(mask);
    }
  }

  require(best_count > 0, ErrorCode::cheirality_failed,
          "no candidate places any point in front of both cameras");
  return {candidates[best].rotation, candidates[best].direction, std::move(best_mask),
          best_count};
}

/// Depth-knowledge variant: p1 are depth back-projections in the reference
/// frame, p2 in the query frame, aligned with corrs. Each pair rebuilds the
/// query-frame point under every candidate (R p1 + s t_bar with the per-pair
/// baseline s) and votes for the candidate that keeps positive depth and
/// best reproduces the measured p2. The twisted pair shares s with the true
/// candidate, so the vote needs the reconstruction residual, not the depth
/// sign alone.
inline RelativePoseHypothesis select_cheirality_depth(
    const std::array<PoseCandidate, 4>& candidates,
    const std::vector<NormalizedCorrespondence>& corrs,
    const std::vector<std::pair<Eigen::Vector3d, Eigen::Vector3d>>& points) {
  require(!points.empty(), ErrorCode::no_depth_overlap,
          "no depth back-projections available for cheirality");
  require(points.size() == corrs.size(), ErrorCode::invalid_input,
          "points and correspondences disagree");

  std::array<int, 4> votes{};
  std::array<std::vector<char>, 4> masks;
  for (auto& m : masks) m.assign(points.size(), 0);

  for (std::size_t j = 0; j < points.size(); ++j) {
    int best_cand = -1;
    double best_res = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 4; ++i) {
      const auto& cand = candidates[i];
      const Eigen::Vector3d rotated = cand.rotation * points[j].first;
      const double s = (points[j].second - rotated).dot(cand.direction.vector());
      if (s <= 0) continue;
      const Eigen::Vector3d rebuilt = rotated + s * cand.direction.vector();
      if (rebuilt.z() <= 0) continue;
      const double res = (rebuilt - points[j].second).norm();
      if (res < best_res) {
        best_res = res;
        best_cand = i;
      }
    }
    if (best_cand >= 0) {
      ++votes[best_cand];
      masks[best_cand][j] = 1;
    }
  }

  int best = 0;
  for (int i = 1; i < 4; ++i) {
    if (votes[i] > votes[best]) best = i;
  }
  require(votes[best] > 0, ErrorCode::cheirality_failed,
          "no candidate consistent with the depth back-projections");
  return {candidates[best].rotation, candidates[best].direction, std::move(masks[best]),
          votes[best]};
}

}  // namespace reloc
