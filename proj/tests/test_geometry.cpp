#include <catch2/catch_amalgamated.hpp>

#include "reloc/geometry.hpp"
#include "reloc/rng.hpp"
#include "support/oracles.hpp"

using namespace reloc;

namespace {
double matrix_gap(const Rotation& a, const Rotation& b) {
  return (a.matrix() - b.matrix()).cwiseAbs().maxCoeff();
}
}  // namespace

TEST_CASE("pose composition") {
  CHECK(compose(Pose::identity(), Pose::identity()).translation.norm() == 0.0);

  // (Rz(90), t=(1,0,0)) o (I, t=(0,1,0)) by hand:
  //   p -> Rz(90) p + (Rz(90)(0,1,0) + (1,0,0)) = Rz(90) p + 0
  Pose a{Rotation::axis_angle({0, 0, 1}, deg_to_rad(90)), {1, 0, 0}};
  Pose b{Rotation::identity(), {0, 1, 0}};
  const Pose ab = compose(a, b);
  CHECK(matrix_gap(ab.rotation, a.rotation) < 1e-12);
  CHECK((ab.translation - Eigen::Vector3d(0, 0, 0)).norm() < 1e-12);

  Rng rng(11);
  for (int i = 0; i < 50; ++i) {
    Pose p{oracles::random_rotation(rng), rng.unit_vector() * rng.uniform(0, 3)};
    const Pose id = compose(p, invert(p));
    CHECK(matrix_gap(id.rotation, Rotation::identity()) < 1e-9);
    CHECK(id.translation.norm() < 1e-9);
  }
}

TEST_CASE("pose inversion") {
  CHECK(invert(Pose::identity()).translation.norm() == 0.0);
  const Pose p{Rotation::identity(), {1, 2, 3}};
  CHECK((invert(p).translation - Eigen::Vector3d(-1, -2, -3)).norm() == 0.0);
}

TEST_CASE("pose composition is associative") {
  Rng rng(12);
  for (int i = 0; i < 50; ++i) {
    Pose a{oracles::random_rotation(rng), rng.unit_vector()};
    Pose b{oracles::random_rotation(rng), rng.unit_vector()};
    Pose c{oracles::random_rotation(rng), rng.unit_vector()};
    const Pose left = compose(compose(a, b), c);
    const Pose right = compose(a, compose(b, c));
    CHECK(matrix_gap(left.rotation, right.rotation) < 1e-9);
    CHECK((left.translation - right.translation).norm() < 1e-9);
  }
}

TEST_CASE("backproject") {
  CameraIntrinsics k{100, 100, 50, 50, 100, 100};
  CHECK((backproject(k, {50, 50}, 2.0) - Eigen::Vector3d(0, 0, 2)).norm() == 0.0);
  // explicit K^-1 multiply: (150-50)/100 * 1 = 1
  CHECK((backproject(k, {150, 50}, 1.0) - Eigen::Vector3d(1, 0, 1)).norm() < 1e-15);
  CHECK_THROWS_AS(backproject(k, {50, 50}, 0.0), Error);

  Rng rng(13);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector2d px(rng.uniform(0, k.width), rng.uniform(0, k.height));
    const double d = rng.uniform(0.1, 20);
    const Eigen::Vector3d p = backproject(k, px, d);
    CHECK(p.z() == d);
    CHECK((project(k, p) - px).norm() < 1e-9);
  }
}

TEST_CASE("project") {
  CameraIntrinsics k{100, 100, 50, 50, 100, 100};
  CHECK((project(k, {0, 0, 1}) - Eigen::Vector2d(50, 50)).norm() == 0.0);
  CHECK((project(k, {1, 0, 1}) - Eigen::Vector2d(150, 50)).norm() == 0.0);
  CHECK_THROWS_AS(project(k, {0, 0, -1}), Error);
  CHECK_THROWS_AS(project(k, {0, 0, 0}), Error);
}

TEST_CASE("intrinsics validation") {
  CameraIntrinsics k{100, 100, 50, 50, 100, 100};
  CHECK_NOTHROW(validate(k));
  CHECK(k.matrix()(0, 0) == 100.0);
  CHECK(k.matrix()(2, 2) == 1.0);
  CHECK(k.matrix()(1, 0) == 0.0);
  k.fx = -1;
  CHECK_THROWS_AS(validate(k), Error);
  k.fx = 100;
  k.cx = 100;  // must be < width
  CHECK_THROWS_AS(validate(k), Error);
}

TEST_CASE("rotation type invariants") {
  CHECK_THROWS_AS(Rotation::from_matrix(2 * Eigen::Matrix3d::Identity()), Error);
  Eigen::Matrix3d reflection = Eigen::Matrix3d::Identity();
  reflection(2, 2) = -1;
  CHECK_THROWS_AS(Rotation::from_matrix(reflection), Error);
  const auto q = Rotation::axis_angle({0, 0, 1}, 0.3).to_quaternion();
  const Rotation back = Rotation::from_quaternion(q[0], q[1], q[2], q[3]);
  CHECK(rotation_angle_deg(back, Rotation::axis_angle({0, 0, 1}, 0.3)) < 1e-12);
}

TEST_CASE("rotation angle") {
  CHECK(rotation_angle_deg(Rotation::identity(), Rotation::identity()) == 0.0);
  CHECK(rotation_angle_deg(Rotation::axis_angle({0, 0, 1}, deg_to_rad(30)),
                           Rotation::identity()) == Catch::Approx(30).margin(1e-12));

  Rng rng(14);
  for (int i = 0; i < 200; ++i) {
    const Rotation a = oracles::random_rotation(rng);
    const Rotation b = oracles::random_rotation(rng);
    const double angle = rotation_angle_deg(a, b);
    CHECK(angle >= 0.0);
    CHECK(angle <= 180.0);
    CHECK(angle == Catch::Approx(oracles::quaternion_angle_deg(a, b)).margin(1e-9));
    CHECK(angle == Catch::Approx(rotation_angle_deg(b, a)).margin(1e-9));
  }
}

TEST_CASE("rotation angle triangle inequality") {
  Rng rng(15);
  for (int i = 0; i < 100; ++i) {
    const Rotation a = oracles::random_rotation(rng);
    const Rotation b = oracles::random_rotation(rng);
    const Rotation c = oracles::random_rotation(rng);
    CHECK(rotation_angle_deg(a, c) <=
          rotation_angle_deg(a, b) + rotation_angle_deg(b, c) + 1e-6);
  }
}

TEST_CASE("essential from pose") {
  const Eigen::Matrix3d e =
      essential_from_pose(Rotation::identity(), UnitTranslation::from_vector({1, 0, 0}));
  Eigen::Matrix3d expected;
  expected << 0, 0, 0, 0, 0, -1, 0, 1, 0;
  CHECK((e - expected).norm() == 0.0);

  Rng rng(16);
  for (int i = 0; i < 100; ++i) {
    const Rotation r = oracles::random_rotation(rng);
    const UnitTranslation t = UnitTranslation::from_vector(rng.unit_vector());
    const Eigen::Matrix3d em = essential_from_pose(r, t);

    const Eigen::JacobiSVD<Eigen::Matrix3d> svd(em);
    CHECK(svd.singularValues()(0) == Catch::Approx(1).margin(1e-9));
    CHECK(svd.singularValues()(1) == Catch::Approx(1).margin(1e-9));
    CHECK(svd.singularValues()(2) == Catch::Approx(0).margin(1e-9));
    CHECK(std::abs(em.determinant()) < 1e-9);
    // 2 E E^T E - tr(E E^T) E = 0
    const Eigen::Matrix3d demazure =
        2 * em * em.transpose() * em - (em * em.transpose()).trace() * em;
    CHECK(demazure.norm() < 1e-8);
  }
}

TEST_CASE("essential epipolar constraint on synthetic correspondences") {
  Rng rng(17);
  for (int i = 0; i < 20; ++i) {
    const auto prob = oracles::random_two_view(rng, 20);
    const Eigen::Matrix3d e = essential_from_pose(prob.rotation, prob.direction);
    for (const auto& c : prob.corrs) {
      const Eigen::Vector3d x1(c.x1.x(), c.x1.y(), 1.0);
      const Eigen::Vector3d x2(c.x2.x(), c.x2.y(), 1.0);
      CHECK(std::abs(x2.dot(e * x1)) < 1e-12);
    }
  }
}

TEST_CASE("unit translation normalization") {
  const UnitTranslation t = UnitTranslation::from_vector({3, 4, 0});
  CHECK(t.vector().norm() == Catch::Approx(1).margin(1e-12));
  CHECK_THROWS_AS(UnitTranslation::from_vector({0, 0, 0}), Error);
}
