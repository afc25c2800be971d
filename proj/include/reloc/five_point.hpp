#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "reloc/error.hpp"
#include "reloc/rng.hpp"

namespace reloc {

/// Calibrated image point pair: x1 in the reference view, x2 in the query
/// view, both with K^-1 applied.
struct NormalizedCorrespondence {
  Eigen::Vector2d x1;
  Eigen::Vector2d x2;
};

namespace fivept {

// Monomial layouts for polynomials in (x, y, z).
// Linear:   x y z 1
// Quadratic: xx xy yy xz yz zz x y z 1
// Cubic, ordered so the leading 10 columns are the monomials of (x,y)-degree
// >= 2 and the trailing 10 are of the form x z^k, y z^k, z^k:
//   xxx yyy xxy xyy xxz xx yyz yy xyz xy | xzz xz x yzz yz y zzz zz z 1
using Lin = Eigen::Matrix<double, 4, 1>;
using Quad = Eigen::Matrix<double, 10, 1>;
using Cubic = Eigen::Matrix<double, 20, 1>;

enum QuadMono { Q_XX, Q_XY, Q_YY, Q_XZ, Q_YZ, Q_ZZ, Q_X, Q_Y, Q_Z, Q_1 };
enum CubicMono {
  C_XXX, C_YYY, C_XXY, C_XYY, C_XXZ, C_XX, C_YYZ, C_YY, C_XYZ, C_XY,
  C_XZZ, C_XZ, C_X, C_YZZ, C_YZ, C_Y, C_ZZZ, C_ZZ, C_Z, C_1
};

inline Quad mul_lin(const Lin& a, const Lin& b) {
  Quad q = Quad::Zero();
  q(Q_XX) = a(0) * b(0);
  q(Q_XY) = a(0) * b(1) + a(1) * b(0);
  q(Q_YY) = a(1) * b(1);
  q(Q_XZ) = a(0) * b(2) + a(2) * b(0);
  q(Q_YZ) = a(1) * b(2) + a(2) * b(1);
  q(Q_ZZ) = a(2) * b(2);
  q(Q_X) = a(0) * b(3) + a(3) * b(0);
  q(Q_Y) = a(1) * b(3) + a(3) * b(1);
  q(Q_Z) = a(2) * b(3) + a(3) * b(2);
  q(Q_1) = a(3) * b(3);
  return q;
}

inline Cubic mul_quad_lin(const Quad& q, const Lin& l) {
  // Product monomial of quad row i and linear column j.
  static constexpr int table[10][4] = {
      {C_XXX, C_XXY, C_XXZ, C_XX},  // xx * {x,y,z,1}
      {C_XXY, C_XYY, C_XYZ, C_XY},  // xy
      {C_XYY, C_YYY, C_YYZ, C_YY},  // yy
      {C_XXZ, C_XYZ, C_XZZ, C_XZ},  // xz
      {C_XYZ, C_YYZ, C_YZZ, C_YZ},  // yz
      {C_XZZ, C_YZZ, C_ZZZ, C_ZZ},  // zz
      {C_XX, C_XY, C_XZ, C_X},      // x
      {C_XY, C_YY, C_YZ, C_Y},      // y
      {C_XZ, C_YZ, C_ZZ, C_Z},      // z
      {C_X, C_Y, C_Z, C_1},         // 1
  };
  Cubic c = Cubic::Zero();
  for (int i = 0; i < 10; ++i) {
    if (q(i) == 0) continue;
    for (int j = 0; j < 4; ++j) c(table[i][j]) += q(i) * l(j);
  }
  return c;
}

// Univariate polynomial helpers; coefficient i multiplies z^i.
inline std::vector<double> poly_mul(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> c(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) c[i + j] += a[i] * b[j];
  return c;
}

inline std::vector<double> poly_sub(std::vector<double> a, const std::vector<double>& b) {
  if (a.size() < b.size()) a.resize(b.size(), 0.0);
  for (std::size_t i = 0; i < b.size(); ++i) a[i] -= b[i];
  return a;
}

inline double poly_eval(const std::vector<double>& p, double z) {
  double v = 0;
  for (std::size_t i = p.size(); i-- > 0;) v = v * z + p[i];
  return v;
}

inline std::vector<double> poly_derivative(const std::vector<double>& p) {
  std::vector<double> d;
  for (std::size_t i = 1; i < p.size(); ++i) d.push_back(p[i] * static_cast<double>(i));
  return d;
}

/// Real roots of a polynomial via companion-matrix eigenvalues. Roots whose
/// imaginary part exceeds imag_tol are discarded; near-zero leading
/// coefficients are deflated first.
inline std::vector<double> real_roots(std::vector<double> coeffs, double imag_tol = 1e-8) {
  double maxc = 0;
  for (double c : coeffs) maxc = std::max(maxc, std::abs(c));
  if (maxc == 0) return {};
  while (coeffs.size() > 1 && std::abs(coeffs.back()) < 1e-13 * maxc) coeffs.pop_back();
  const int deg = static_cast<int>(coeffs.size()) - 1;
  if (deg < 1) return {};

  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(deg, deg);
  for (int i = 0; i < deg; ++i) companion(i, deg - 1) = -coeffs[i] / coeffs[deg];
  for (int i = 1; i < deg; ++i) companion(i, i - 1) = 1.0;

  Eigen::EigenSolver<Eigen::MatrixXd> es(companion, /*computeEigenvectors=*/false);
  std::vector<double> roots;
  for (int i = 0; i < deg; ++i) {
    const auto ev = es.eigenvalues()(i);
    if (std::abs(ev.imag()) <= imag_tol) roots.push_back(ev.real());
  }
  return roots;
}

}  // namespace fivept

namespace fivept {

/// Fixed generic rotations of the 4-d null-space basis. Exactly structured
/// inputs (rectified-style scenes) can align with the raw parametrization:
/// the leading 10x10 block of the constraint system turns singular, or a
/// solution escapes to infinity in (x, y, z) and its root is deflated away.
/// A generic basis rotation breaks the alignment without changing the
/// solution set; further mixers back the first one up.
inline const std::array<Eigen::Matrix4d, 3>& basis_mixers() {
  static const std::array<Eigen::Matrix4d, 3> mixers = [] {
    std::array<Eigen::Matrix4d, 3> out;
    for (int k = 0; k < 3; ++k) {
      Eigen::Matrix4d a;
      std::uint64_t s = 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(k + 1);
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
          s = Rng::splitmix64(s);
          a(i, j) = static_cast<double>(s >> 11) * 0x1.0p-53 - 0.5;
        }
      out[k] = Eigen::HouseholderQR<Eigen::Matrix4d>(a).householderQ();
    }
    return out;
  }();
  return mixers;
}

}  // namespace fivept

/// Minimal five-point solver for the essential matrix. The 5x9 epipolar
/// system is reduced to a 4-d null space, the ten cubic constraints
/// (det E = 0 and 2 E E^T E - tr(E E^T) E = 0) are eliminated to a 3x3
/// polynomial system B(z) [x y 1]^T = 0, and det B gives the degree-10
/// polynomial whose real roots (companion-matrix eigenvalues) yield the
/// candidates. Up to 10 raw candidates are returned; the caller projects and
/// filters them. Throws degenerate_sample when the sample does not pin the
/// 4-d null space.
inline std::vector<Eigen::Matrix3d> five_point_solve(
    const std::array<NormalizedCorrespondence, 5>& sample) {
  using namespace fivept;

  Eigen::Matrix<double, 5, 9> q;
  for (int i = 0; i < 5; ++i) {
    const double a = sample[i].x1.x(), b = sample[i].x1.y();
    const double c = sample[i].x2.x(), d = sample[i].x2.y();
    q.row(i) << c * a, c * b, c, d * a, d * b, d, a, b, 1.0;
  }

  const Eigen::JacobiSVD<Eigen::Matrix<double, 5, 9>> svd(q, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv(4) <= 1e-10 * sv(0)) {
    fail(ErrorCode::degenerate_sample, "epipolar system rank below 5");
  }
  // E(x, y, z) = x X + y Y + z Z + W over the null space basis.
  Eigen::Matrix<double, 9, 4> basis = svd.matrixV().rightCols<4>();

  // g expresses the leading degree-3 monomials in terms of the trailing
  // monomials n = (xzz, xz, x, yzz, yz, y, zzz, zz, z, 1).
  Eigen::Matrix<double, 10, 10> g;
  bool reduced = false;
  for (const auto& mix : basis_mixers()) {
    const Eigen::Matrix<double, 9, 4> mixed = basis * mix;
    std::array<Lin, 9> e;
    for (int i = 0; i < 9; ++i) e[i] = mixed.row(i).transpose();
    const auto e_at = [&e](int r, int c) -> const Lin& { return e[3 * r + c]; };

    Eigen::Matrix<double, 10, 20> m;
    int row = 0;
    // det(E) = 0
    Cubic det = mul_quad_lin(mul_lin(e_at(0, 1), e_at(1, 2)) - mul_lin(e_at(0, 2), e_at(1, 1)),
                             e_at(2, 0)) +
                mul_quad_lin(mul_lin(e_at(0, 2), e_at(1, 0)) - mul_lin(e_at(0, 0), e_at(1, 2)),
                             e_at(2, 1)) +
                mul_quad_lin(mul_lin(e_at(0, 0), e_at(1, 1)) - mul_lin(e_at(0, 1), e_at(1, 0)),
                             e_at(2, 2));
    m.row(row++) = det.transpose();

    // L = E E^T - tr(E E^T)/2 I, then the nine entries of L E.
    Quad eet[3][3];
    for (int i = 0; i < 3; ++i)
      for (int j = i; j < 3; ++j) {
        eet[i][j] = mul_lin(e_at(i, 0), e_at(j, 0)) + mul_lin(e_at(i, 1), e_at(j, 1)) +
                    mul_lin(e_at(i, 2), e_at(j, 2));
        if (i != j) eet[j][i] = eet[i][j];
      }
    const Quad half_tr = 0.5 * (eet[0][0] + eet[1][1] + eet[2][2]);
    for (int i = 0; i < 3; ++i) eet[i][i] -= half_tr;

    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        Cubic le = mul_quad_lin(eet[i][0], e_at(0, j)) + mul_quad_lin(eet[i][1], e_at(1, j)) +
                   mul_quad_lin(eet[i][2], e_at(2, j));
        m.row(row++) = le.transpose();
      }

    Eigen::FullPivLU<Eigen::Matrix<double, 10, 10>> lu(m.leftCols<10>());
    lu.setThreshold(1e-10);
    if (!lu.isInvertible()) continue;
    g = lu.solve(m.rightCols<10>());
    basis = mixed;
    reduced = true;
    break;
  }
  if (!reduced) {
    fail(ErrorCode::degenerate_sample, "constraint system is rank deficient");
  }

  // Rows 4..9 of g carry leading monomials xxz, xx, yyz, yy, xyz, xy.
  // z*row(xx) - row(xxz) etc. eliminate them, leaving a1(z) x + a2(z) y + a3(z).
  struct PolyRow {
    std::vector<double> px, py, p1;
  };
  const auto combine = [&g](int row_mono_z, int row_mono) {
    PolyRow r;
    const auto gz = g.row(row_mono_z);  // leading monomial carries the extra z
    const auto gc = g.row(row_mono);
    // x coefficients: n indices 2 (x), 1 (xz), 0 (xzz)
    r.px = {-gz(2), gc(2) - gz(1), gc(1) - gz(0), gc(0)};
    r.py = {-gz(5), gc(5) - gz(4), gc(4) - gz(3), gc(3)};
    r.p1 = {-gz(9), gc(9) - gz(8), gc(8) - gz(7), gc(7) - gz(6), gc(6)};
    return r;
  };
  const PolyRow k = combine(4, 5);  // xxz, xx
  const PolyRow l = combine(6, 7);  // yyz, yy
  const PolyRow n = combine(8, 9);  // xyz, xy

  using fivept::poly_mul;
  using fivept::poly_sub;
  // det B(z), degree 10: kx (ly n1 - l1 ny) - ky (lx n1 - l1 nx) + k1 (lx ny - ly nx)
  const auto t1 = poly_sub(poly_mul(l.py, n.p1), poly_mul(l.p1, n.py));
  const auto t2 = poly_sub(poly_mul(l.px, n.p1), poly_mul(l.p1, n.px));
  const auto t3 = poly_sub(poly_mul(l.px, n.py), poly_mul(l.py, n.px));
  const auto det_full = poly_sub(poly_mul(k.px, t1),
                                 poly_sub(poly_mul(k.py, t2), poly_mul(k.p1, t3)));

  std::vector<Eigen::Matrix3d> out;
  const auto det_deriv = fivept::poly_derivative(det_full);
  for (double z : fivept::real_roots(det_full)) {
    // A few Newton steps sharpen the companion-matrix eigenvalues.
    for (int it = 0; it < 3; ++it) {
      const double f = fivept::poly_eval(det_full, z);
      const double df = fivept::poly_eval(det_deriv, z);
      if (df == 0) break;
      const double step = f / df;
      z -= step;
      if (std::abs(step) < 1e-16 * (1.0 + std::abs(z))) break;
    }
    Eigen::Matrix3d bz;
    bz << fivept::poly_eval(k.px, z), fivept::poly_eval(k.py, z), fivept::poly_eval(k.p1, z),
        fivept::poly_eval(l.px, z), fivept::poly_eval(l.py, z), fivept::poly_eval(l.p1, z),
        fivept::poly_eval(n.px, z), fivept::poly_eval(n.py, z), fivept::poly_eval(n.p1, z);
    const Eigen::JacobiSVD<Eigen::Matrix3d> bsvd(bz, Eigen::ComputeFullV);
    const Eigen::Vector3d v = bsvd.matrixV().col(2);
    if (std::abs(v(2)) < 1e-12) continue;  // solution at infinity
    const double x = v(0) / v(2), y = v(1) / v(2);

    const Eigen::Matrix<double, 9, 1> evec =
        x * basis.col(0) + y * basis.col(1) + z * basis.col(2) + basis.col(3);
    Eigen::Matrix3d cand;
    cand << evec(0), evec(1), evec(2), evec(3), evec(4), evec(5), evec(6), evec(7), evec(8);
    out.push_back(cand);
    if (out.size() == 10) break;
  }
  return out;
}

}  // namespace reloc
