#include <catch2/catch_amalgamated.hpp>

#include "reloc/essential.hpp"
#include "reloc/ransac.hpp"
#include "reloc/rng.hpp"
#include "support/oracles.hpp"

using namespace reloc;

TEST_CASE("normalize applies per-camera focal and principal point") {
  CameraIntrinsics k1{100, 100, 50, 50, 200, 200};
  CameraIntrinsics k2{400, 300, 60, 40, 600, 400};
  CorrespondenceMap map;
  map.pairs = {{{50, 50}, {60, 40}, 0}, {{150, 50}, {460, 40}, 0}};
  const auto n = normalize(k1, k2, map);
  CHECK(n[0].x1.norm() == 0.0);
  CHECK(n[0].x2.norm() == 0.0);
  CHECK(n[1].x1.x() == Catch::Approx(1.0).margin(1e-12));
  CHECK(n[1].x2.x() == Catch::Approx(1.0).margin(1e-12));

  Rng rng(200);
  for (int i = 0; i < 100; ++i) {
    const Pixel p1{static_cast<int>(rng.uniform_index(600)),
                   static_cast<int>(rng.uniform_index(400))};
    CorrespondenceMap m;
    m.pairs = {{p1, p1, 0}};
    const auto got = normalize(k2, k2, m)[0];
    const Eigen::Vector3d via_k = k2.matrix().inverse() * Eigen::Vector3d(p1.x, p1.y, 1.0);
    CHECK((got.x1 - via_k.head<2>()).norm() < 1e-12);
  }
}

TEST_CASE("sampson error") {
  const Eigen::Matrix3d e =
      essential_from_pose(Rotation::identity(), UnitTranslation::from_vector({1, 0, 0}));

  SECTION("zero on exact correspondences") {
    Rng rng(201);
    const auto prob = oracles::random_two_view(rng, 30);
    const Eigen::Matrix3d et = essential_from_pose(prob.rotation, prob.direction);
    for (const auto& c : prob.corrs) CHECK(sampson_error(et, c) < 1e-12);
  }
  SECTION("grows monotonically with perpendicular offset") {
    // pure x-translation: epipolar lines are horizontal; perturb x2 in y
    NormalizedCorrespondence c{{0.1, 0.2}, {0.05, 0.2}};
    double prev = sampson_error(e, c);
    CHECK(prev < 1e-15);
    for (int i = 1; i <= 8; ++i) {
      NormalizedCorrespondence p = c;
      p.x2.y() += 0.01 * i;
      const double err = sampson_error(e, p);
      CHECK(err > prev);
      prev = err;
    }
  }
  SECTION("epipole pair has zero residual") {
    const NormalizedCorrespondence c{{0, 0}, {0, 0}};
    CHECK(sampson_error(skew(Eigen::Vector3d(1, 0, 0)), c) == 0.0);
  }
  SECTION("vanishing denominator yields infinity") {
    // E = skew(e3): both epipolar line gradients vanish at the origin pair
    const Eigen::Matrix3d ez = skew(Eigen::Vector3d(0, 0, 1));
    const NormalizedCorrespondence c{{0, 0}, {0, 0}};
    CHECK(std::isinf(sampson_error(ez, c)));
  }
}

TEST_CASE("essential matrix type") {
  Rng rng(202);
  const auto prob = oracles::random_two_view(rng, 5);
  const Eigen::Matrix3d raw = essential_from_pose(prob.rotation, prob.direction);
  const EssentialMatrix e = EssentialMatrix::from_matrix(7.0 * raw);
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(e.matrix());
  CHECK(svd.singularValues()(0) == Catch::Approx(1).margin(1e-12));
  CHECK(svd.singularValues()(1) == Catch::Approx(1).margin(1e-12));
  CHECK(svd.singularValues()(2) == Catch::Approx(0).margin(1e-12));
  CHECK(e.matrix().norm() == Catch::Approx(std::sqrt(2.0)).margin(1e-12));

  CHECK_THROWS_AS(EssentialMatrix::from_matrix(Eigen::Matrix3d::Identity()), Error);
}

TEST_CASE("decompose essential") {
  SECTION("skew(e1) contains the identity/e1 candidate") {
    const auto cands =
        decompose_essential(EssentialMatrix::from_matrix(skew(Eigen::Vector3d(1, 0, 0))));
    bool found = false;
    for (const auto& c : cands) {
      if (rotation_angle_deg(c.rotation, Rotation::identity()) < 1e-9 &&
          (c.direction.vector() - Eigen::Vector3d(1, 0, 0)).norm() < 1e-9) {
        found = true;
      }
    }
    CHECK(found);
  }
  SECTION("round trip recovers the pose among the four") {
    Rng rng(203);
    for (int i = 0; i < 100; ++i) {
      const Rotation r = oracles::random_rotation(rng, 0.8);
      const UnitTranslation t = UnitTranslation::from_vector(rng.unit_vector());
      const auto cands =
          decompose_essential(EssentialMatrix::from_matrix(essential_from_pose(r, t)));
      double best_rot = 1e9, best_dir = 1e9;
      for (const auto& c : cands) {
        best_rot = std::min(best_rot, oracles::precise_angle_deg(c.rotation, r));
        best_dir = std::min(best_dir, (c.direction.vector() - t.vector()).norm());
      }
      CHECK(best_rot < 1e-6);
      CHECK(best_dir < 1e-6);
    }
  }
  SECTION("every candidate reproduces the essential matrix up to scale") {
    Rng rng(204);
    const Rotation r = oracles::random_rotation(rng, 0.8);
    const UnitTranslation t = UnitTranslation::from_vector(rng.unit_vector());
    const EssentialMatrix e = EssentialMatrix::from_matrix(essential_from_pose(r, t));
    for (const auto& c : decompose_essential(e)) {
      const Eigen::Matrix3d rebuilt = essential_from_pose(c.rotation, c.direction);
      CHECK(oracles::essential_distance(rebuilt, e.matrix()) < 1e-6);
    }
  }
  SECTION("scale invariance") {
    Rng rng(205);
    const Rotation r = oracles::random_rotation(rng, 0.8);
    const UnitTranslation t = UnitTranslation::from_vector(rng.unit_vector());
    const Eigen::Matrix3d raw = essential_from_pose(r, t);
    const auto a = decompose_essential(EssentialMatrix::from_matrix(raw));
    const auto b = decompose_essential(EssentialMatrix::from_matrix(7.0 * raw));
    for (int i = 0; i < 4; ++i) {
      CHECK(rotation_angle_deg(a[i].rotation, b[i].rotation) < 1e-9);
      CHECK((a[i].direction.vector() - b[i].direction.vector()).norm() < 1e-9);
    }
  }
  SECTION("rank-3 input is rejected") {
    Eigen::Matrix3d full = Eigen::Matrix3d::Identity();
    full(0, 0) = 2;
    try {
      decompose_essential(full);
      FAIL("expected invalid_essential");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::invalid_essential);
    }
  }
}

TEST_CASE("cheirality selects the true pose") {
  Rng rng(206);
  for (int i = 0; i < 50; ++i) {
    const auto prob = oracles::random_two_view(rng, 20);
    const auto cands = decompose_essential(
        EssentialMatrix::from_matrix(essential_from_pose(prob.rotation, prob.direction)));
    const auto hyp = select_cheirality(cands, prob.corrs);
    CHECK(oracles::precise_angle_deg(hyp.rotation, prob.rotation) < 1e-6);
    CHECK(oracles::vector_angle_deg(hyp.direction.vector(), prob.direction.vector()) < 1e-6);
    CHECK(hyp.inlier_count == static_cast<int>(prob.corrs.size()));
  }
}

TEST_CASE("cheirality single correspondence") {
  Rng rng(207);
  const auto prob = oracles::random_two_view(rng, 1);
  const auto cands = decompose_essential(
      EssentialMatrix::from_matrix(essential_from_pose(prob.rotation, prob.direction)));
  const auto hyp = select_cheirality(cands, prob.corrs);
  CHECK(hyp.inlier_count == 1);
  // only one of the four candidates triangulates this point in front of both
  int passing = 0;
  for (const auto& c : cands) {
    const auto x = triangulate_dlt(prob.corrs[0], c.rotation, c.direction.vector());
    if (x && x->z() > 0 && (c.rotation * *x + c.direction.vector()).z() > 0) ++passing;
  }
  CHECK(passing == 1);
}

TEST_CASE("cheirality fails when nothing is in front") {
  // Zero-parallax pairs describe points at infinity: no candidate can place
  // a triangulated point in front of both cameras, so selection must raise
  // rather than return a zero-support pose.
  const auto cands =
      decompose_essential(EssentialMatrix::from_matrix(skew(Eigen::Vector3d(1, 0, 0))));
  std::vector<NormalizedCorrespondence> corrs{{{0.3, 0.2}, {0.3, 0.2}},
                                              {{-0.1, 0.4}, {-0.1, 0.4}}};
  try {
    select_cheirality(cands, corrs);
    FAIL("expected cheirality_failed");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::cheirality_failed);
  }
  CHECK_THROWS_AS(select_cheirality(cands, {}), Error);
}

TEST_CASE("ransac on clean correspondences") {
  Rng rng(208);
  const auto prob = oracles::random_two_view(rng, 100);
  RansacConfig cfg;
  const auto est = ransac_essential(prob.corrs, cfg);
  CHECK(est.inlier_count == 100);
  for (char m : est.inlier_mask) CHECK(m == 1);
  const Eigen::Matrix3d truth = essential_from_pose(prob.rotation, prob.direction);
  CHECK(oracles::essential_distance(est.e.matrix(), truth) < 1e-6);
}

TEST_CASE("ransac excludes injected outliers") {
  Rng rng(209);
  const auto prob = oracles::random_two_view(rng, 120);
  auto corrs = prob.corrs;
  Rng orng(210);
  const auto labels = oracles::inject_outliers(corrs, 0.5, orng);
  RansacConfig cfg;
  const auto est = ransac_essential(corrs, cfg);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i]) CHECK(!est.inlier_mask[i]);
  }
  const auto hyp = select_cheirality(decompose_essential(est.e), prob.corrs);
  CHECK(rotation_angle_deg(hyp.rotation, prob.rotation) < 0.5);
}

TEST_CASE("ransac needs five correspondences") {
  Rng rng(211);
  const auto prob = oracles::random_two_view(rng, 4);
  try {
    ransac_essential(prob.corrs, {});
    FAIL("expected insufficient_matches");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::insufficient_matches);
  }
}

TEST_CASE("ransac is deterministic given the seed") {
  Rng rng(212);
  auto corrs = oracles::random_two_view(rng, 80).corrs;
  Rng orng(213);
  oracles::inject_outliers(corrs, 0.3, orng);
  RansacConfig cfg;
  cfg.seed = 999;
  std::vector<RansacIterationRecord> log1, log2;
  const auto a = ransac_essential(corrs, cfg, &log1);
  const auto b = ransac_essential(corrs, cfg, &log2);
  CHECK((a.e.matrix() - b.e.matrix()).norm() == 0.0);
  CHECK(a.inlier_mask == b.inlier_mask);
  REQUIRE(log1.size() == log2.size());
  for (std::size_t i = 0; i < log1.size(); ++i) {
    CHECK(log1[i].iteration == log2[i].iteration);
    CHECK(log1[i].inliers == log2[i].inliers);
    CHECK(log1[i].mean_sampson == log2[i].mean_sampson);
  }
}

TEST_CASE("ransac returned model dominates every logged model") {
  Rng rng(214);
  auto corrs = oracles::random_two_view(rng, 60).corrs;
  Rng orng(215);
  oracles::inject_outliers(corrs, 0.4, orng);
  std::vector<RansacIterationRecord> log;
  const auto est = ransac_essential(corrs, {}, &log);
  for (const auto& rec : log) CHECK(est.inlier_count >= rec.inliers);
}

TEST_CASE("pose estimate is invariant to a consistent intrinsics change") {
  // The same geometry expressed through two different pinhole models yields
  // identical normalized coordinates and so the same selected pose.
  Rng rng(216);
  const auto prob = oracles::random_two_view(rng, 60);
  const CameraIntrinsics ka{500, 500, 320, 240, 640, 480};
  const CameraIntrinsics kb{1000, 1000, 640, 480, 1280, 960};

  const auto run = [&](const CameraIntrinsics& k) {
    std::vector<NormalizedCorrespondence> corrs;
    for (const auto& c : prob.corrs) {
      // render to continuous pixels under k, then normalize again
      const Eigen::Vector2d p1(k.fx * c.x1.x() + k.cx, k.fy * c.x1.y() + k.cy);
      const Eigen::Vector2d p2(k.fx * c.x2.x() + k.cx, k.fy * c.x2.y() + k.cy);
      corrs.push_back({{(p1.x() - k.cx) / k.fx, (p1.y() - k.cy) / k.fy},
                       {(p2.x() - k.cx) / k.fx, (p2.y() - k.cy) / k.fy}});
    }
    RansacConfig cfg;
    const auto est = ransac_essential(corrs, cfg);
    return select_cheirality(decompose_essential(est.e), corrs);
  };
  const auto ha = run(ka);
  const auto hb = run(kb);
  CHECK(oracles::precise_angle_deg(ha.rotation, hb.rotation) < 1e-6);
  CHECK((ha.direction.vector() - hb.direction.vector()).norm() < 1e-6);
}

TEST_CASE("depth-based cheirality agrees with triangulation on clean data") {
  Rng rng(218);
  for (int i = 0; i < 20; ++i) {
    const auto prob = oracles::random_two_view(rng, 30);
    const auto cands = decompose_essential(
        EssentialMatrix::from_matrix(essential_from_pose(prob.rotation, prob.direction)));
    std::vector<std::pair<Eigen::Vector3d, Eigen::Vector3d>> pts;
    for (std::size_t j = 0; j < prob.points.size(); ++j) {
      pts.emplace_back(prob.points[j],
                       prob.rotation * prob.points[j] + prob.direction.vector());
    }
    const auto tri = select_cheirality(cands, prob.corrs);
    const auto dep = select_cheirality_depth(cands, prob.corrs, pts);
    CHECK(oracles::precise_angle_deg(tri.rotation, dep.rotation) < 1e-9);
    CHECK((tri.direction.vector() - dep.direction.vector()).norm() < 1e-9);
    CHECK(dep.inlier_count == static_cast<int>(pts.size()));
  }
}
