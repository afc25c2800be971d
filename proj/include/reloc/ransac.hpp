#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "reloc/error.hpp"
#include "reloc/essential.hpp"
#include "reloc/five_point.hpp"
#include "reloc/rng.hpp"

namespace reloc {

struct RansacConfig {
  int max_iterations = 2000;
  /// First-order epipolar distance bound in normalized coordinates
  /// (~0.5-1 px at typical focal lengths). A pair is an inlier when its
  /// Sampson error is below the square of this value.
  double inlier_threshold = 1e-3;
  double confidence = 0.9999;
  std::uint64_t seed = 42;
};

inline void validate(const RansacConfig& cfg) {
  require(cfg.max_iterations >= 1, ErrorCode::invalid_input, "max_iterations must be >= 1");
  require(cfg.inlier_threshold > 0, ErrorCode::invalid_input, "inlier threshold must be > 0");
  require(cfg.confidence > 0 && cfg.confidence < 1, ErrorCode::invalid_input,
          "confidence must be in (0, 1)");
}

struct RansacIterationRecord {
  int iteration = 0;
  int inliers = 0;
  double mean_sampson = 0;
};

struct EssentialEstimate {
  EssentialMatrix e;
  std::vector<char> inlier_mask;
  int inlier_count = 0;
  double mean_inlier_sampson = 0;
  int iterations = 0;
};

namespace detail {

struct ModelScore {
  int count = 0;
  double mean = std::numeric_limits<double>::infinity();
  std::vector<char> mask;
};

inline ModelScore score_model(const Eigen::Matrix3d& e,
                              const std::vector<NormalizedCorrespondence>& corrs,
                              double threshold) {
  ModelScore s;
  s.mask.assign(corrs.size(), 0);
  const double th2 = threshold * threshold;
  double sum = 0;
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    const double err = sampson_error(e, corrs[i]);
    if (err <= th2) {
      s.mask[i] = 1;
      ++s.count;
      sum += err;
    }
  }
  s.mean = s.count ? sum / s.count : std::numeric_limits<double>::infinity();
  return s;
}

inline bool better(const ModelScore& a, const ModelScore& b) {
  if (a.count != b.count) return a.count > b.count;
  return a.mean < b.mean;
}

/// Least-squares essential matrix from all inliers: n x 9 nullspace vector,
/// projected back onto the manifold.
inline std::optional<Eigen::Matrix3d> least_squares_essential(
    const std::vector<NormalizedCorrespondence>& corrs, const std::vector<char>& mask) {
  int n = 0;
  for (char m : mask) n += m != 0;
  if (n < 8) return std::nullopt;
  Eigen::MatrixXd a(n, 9);
  int r = 0;
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    if (!mask[i]) continue;
    const double x = corrs[i].x1.x(), y = corrs[i].x1.y();
    const double u = corrs[i].x2.x(), v = corrs[i].x2.y();
    a.row(r++) << u * x, u * y, u, v * x, v * y, v, x, y, 1.0;
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::Matrix<double, 9, 1> e = svd.matrixV().col(8);
  Eigen::Matrix3d m;
  m << e(0), e(1), e(2), e(3), e(4), e(5), e(6), e(7), e(8);
  return m;
}

}  // namespace detail

/// Robust essential-matrix estimation: 5-point minimal solver inside RANSAC
/// with adaptive termination, then a deterministic least-squares re-fit on
/// the winning inlier set (kept only if it does not lose inliers). Results
/// are a pure function of (corrs, cfg).
inline EssentialEstimate ransac_essential(const std::vector<NormalizedCorrespondence>& corrs,
                                          const RansacConfig& cfg,
                                          std::vector<RansacIterationRecord>* log = nullptr) {
  validate(cfg);
  require(corrs.size() >= 5, ErrorCode::insufficient_matches,
          "essential estimation needs at least 5 correspondences");

  Rng rng = Rng::substream(cfg.seed, "ransac");
  const auto n = static_cast<std::uint32_t>(corrs.size());

  detail::ModelScore best;
  Eigen::Matrix3d best_e = Eigen::Matrix3d::Zero();
  bool have_model = false;
  int needed = cfg.max_iterations;
  int iter = 0;

  for (; iter < std::min(needed, cfg.max_iterations); ++iter) {
    const auto idx = rng.sample_indices(n, 5);
    std::array<NormalizedCorrespondence, 5> sample;
    for (int i = 0; i < 5; ++i) sample[i] = corrs[idx[i]];

    std::vector<Eigen::Matrix3d> cands;
    try {
      cands = five_point_solve(sample);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::degenerate_sample) continue;
      throw;
    }

    for (const auto& raw : cands) {
      EssentialMatrix e;
      try {
        e = EssentialMatrix::from_matrix(raw, 1e-6);
      } catch (const Error&) {
        continue;
      }
      auto score = detail::score_model(e.matrix(), corrs, cfg.inlier_threshold);
      if (log) log->push_back({iter, score.count, score.mean});
      if (!have_model || detail::better(score, best)) {
        best = std::move(score);
        best_e = e.matrix();
        have_model = true;
        const double w = static_cast<double>(best.count) / n;
        const double p_outlier = 1.0 - std::pow(w, 5);
        if (p_outlier <= 0) {
          needed = iter + 1;
        } else if (p_outlier < 1) {
          const double k = std::log(1.0 - cfg.confidence) / std::log(p_outlier);
          needed = k >= static_cast<double>(cfg.max_iterations)
                       ? cfg.max_iterations
                       : std::max(iter + 1, static_cast<int>(std::ceil(k)));
        }
      }
    }
  }

  require(have_model && best.count > 0, ErrorCode::estimation_failed,
          "no model with inliers found");

  // Deterministic polish; adopted only when not worse (monotone best-so-far).
  if (const auto refit = detail::least_squares_essential(corrs, best.mask)) {
    try {
      const EssentialMatrix e = EssentialMatrix::from_matrix(*refit, 0.9);
      auto score = detail::score_model(e.matrix(), corrs, cfg.inlier_threshold);
      if (!detail::better(best, score)) {
        best = std::move(score);
        best_e = e.matrix();
      }
    } catch (const Error&) {
      // keep the minimal-solver model
    }
  }

  EssentialEstimate out;
  out.e = EssentialMatrix::from_matrix(best_e, 0.9);
  out.inlier_mask = std::move(best.mask);
  out.inlier_count = best.count;
  out.mean_inlier_sampson = best.mean;
  out.iterations = iter;
  return out;
}

}  // namespace reloc
