#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "sgr/point_cloud.hpp"

namespace sgr {

/// Symmetric 3x3 matrix stored as its upper triangle.
struct Sym3 {
  double xx = 0, xy = 0, xz = 0, yy = 0, yz = 0, zz = 0;
};

/// Eigenvalues in ascending order with matching orthonormal eigenvectors.
struct Sym3Eigen {
  std::array<double, 3> values{};
  std::array<Vec3, 3> vectors{};
};

namespace sym3_detail {

inline Vec3 unit(const Vec3& v) { return (1.0 / norm(v)) * v; }

// Unit u, v completing w (unit) to a right-handed orthonormal basis.
inline void complement_basis(const Vec3& w, Vec3& u, Vec3& v) {
  if (std::abs(w[0]) > std::abs(w[1])) {
    const double inv = 1.0 / std::sqrt(w[0] * w[0] + w[2] * w[2]);
    u = {-w[2] * inv, 0.0, w[0] * inv};
  } else {
    const double inv = 1.0 / std::sqrt(w[1] * w[1] + w[2] * w[2]);
    u = {0.0, w[2] * inv, -w[1] * inv};
  }
  v = cross(w, u);
}

// Eigenvector for a simple eigenvalue: the largest cross product of two
// rows of (A - lambda I) spans its null space.
inline Vec3 vector_for_simple(const Sym3& a, double lambda) {
  const Vec3 r0{a.xx - lambda, a.xy, a.xz};
  const Vec3 r1{a.xy, a.yy - lambda, a.yz};
  const Vec3 r2{a.xz, a.yz, a.zz - lambda};
  const Vec3 c01 = cross(r0, r1);
  const Vec3 c02 = cross(r0, r2);
  const Vec3 c12 = cross(r1, r2);
  const double d01 = dot(c01, c01);
  const double d02 = dot(c02, c02);
  const double d12 = dot(c12, c12);
  if (d01 >= d02 && d01 >= d12 && d01 > 0) return unit(c01);
  if (d02 >= d12 && d02 > 0) return unit(c02);
  if (d12 > 0) return unit(c12);
  return {1.0, 0.0, 0.0};
}

inline Vec3 mul(const Sym3& a, const Vec3& v) {
  return {a.xx * v[0] + a.xy * v[1] + a.xz * v[2],
          a.xy * v[0] + a.yy * v[1] + a.yz * v[2],
          a.xz * v[0] + a.yz * v[1] + a.zz * v[2]};
}

// Second eigenvector, searched in the plane orthogonal to `first`.
inline Vec3 vector_in_complement(const Sym3& a, const Vec3& first,
                                 double lambda) {
  Vec3 u, v;
  complement_basis(first, u, v);
  const Vec3 au = mul(a, u);
  const Vec3 av = mul(a, v);
  double m00 = dot(u, au) - lambda;
  double m01 = dot(u, av);
  double m11 = dot(v, av) - lambda;
  const double a00 = std::abs(m00), a01 = std::abs(m01), a11 = std::abs(m11);
  if (a00 >= a11) {
    const double mx = std::max(a00, a01);
    if (mx > 0) {
      if (a00 >= a01) {
        m01 /= m00;
        m00 = 1.0 / std::sqrt(1.0 + m01 * m01);
        m01 *= m00;
      } else {
        m00 /= m01;
        m01 = 1.0 / std::sqrt(1.0 + m00 * m00);
        m00 *= m01;
      }
      return unit(m01 * u - m00 * v);
    }
    return u;
  }
  const double mx = std::max(a11, a01);
  if (mx > 0) {
    if (a11 >= a01) {
      m01 /= m11;
      m11 = 1.0 / std::sqrt(1.0 + m01 * m01);
      m01 *= m11;
    } else {
      m11 /= m01;
      m01 = 1.0 / std::sqrt(1.0 + m11 * m11);
      m11 *= m01;
    }
    return unit(m11 * u - m01 * v);
  }
  return u;
}

// Cyclic Jacobi sweeps on V^T A V. The closed form leaves absolute errors
// near eps * |A|; this restores relative accuracy of small eigenvalues.
inline void jacobi_refine(const Sym3& a, std::array<Vec3, 3>& vec,
                          std::array<double, 3>& val) {
  double m[3][3];
  for (int r = 0; r < 3; ++r) {
    const Vec3 av = mul(a, vec[r]);
    for (int c = 0; c < 3; ++c) m[r][c] = dot(vec[c], av);
  }
  for (int r = 0; r < 3; ++r)
    for (int c = r + 1; c < 3; ++c) m[r][c] = m[c][r] = 0.5 * (m[r][c] + m[c][r]);
  for (int sweep = 0; sweep < 8; ++sweep) {
    bool rotated = false;
    for (int p = 0; p < 2; ++p)
      for (int q = p + 1; q < 3; ++q) {
        const double apq = m[p][q];
        if (std::abs(apq) <= 1e-300 ||
            std::abs(apq) <= 1e-18 * std::sqrt(std::abs(m[p][p] * m[q][q])))
          continue;
        rotated = true;
        const double theta = (m[q][q] - m[p][p]) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (int k = 0; k < 3; ++k) {
          const double mkp = m[k][p], mkq = m[k][q];
          m[k][p] = c * mkp - s * mkq;
          m[k][q] = s * mkp + c * mkq;
        }
        for (int k = 0; k < 3; ++k) {
          const double mpk = m[p][k], mqk = m[q][k];
          m[p][k] = c * mpk - s * mqk;
          m[q][k] = s * mpk + c * mqk;
        }
        const Vec3 vp = vec[p], vq = vec[q];
        vec[p] = c * vp - s * vq;
        vec[q] = s * vp + c * vq;
      }
    if (!rotated) break;
  }
  std::array<int, 3> order{0, 1, 2};
  std::sort(order.begin(), order.end(),
            [&](int i, int j) { return m[i][i] < m[j][j]; });
  const auto old = vec;
  for (int i = 0; i < 3; ++i) {
    val[i] = m[order[i]][order[i]];
    vec[i] = unit(old[order[i]]);
  }
  // Keep the basis right-handed.
  if (dot(cross(vec[0], vec[1]), vec[2]) < 0) vec[2] = -1.0 * vec[2];
}

}  // namespace sym3_detail

/// Closed-form eigen-decomposition (trigonometric solution of the
/// characteristic cubic). The matrix is scaled to unit max-norm first.
inline Sym3Eigen eigen_sym3(const Sym3& in) {
  using namespace sym3_detail;
  Sym3Eigen out;
  const double scale = std::max({std::abs(in.xx), std::abs(in.xy),
                                 std::abs(in.xz), std::abs(in.yy),
                                 std::abs(in.yz), std::abs(in.zz)});
  if (scale == 0.0) {
    out.values = {0, 0, 0};
    out.vectors = {Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}};
    return out;
  }
  const double inv = 1.0 / scale;
  Sym3 a{in.xx * inv, in.xy * inv, in.xz * inv,
         in.yy * inv, in.yz * inv, in.zz * inv};

  const double off = a.xy * a.xy + a.xz * a.xz + a.yz * a.yz;
  if (off == 0.0) {
    // Diagonal: sort the axes by value.
    std::array<std::pair<double, int>, 3> d{
        {{a.xx, 0}, {a.yy, 1}, {a.zz, 2}}};
    std::sort(d.begin(), d.end());
    for (int i = 0; i < 3; ++i) {
      out.values[i] = d[i].first * scale;
      Vec3 e{0, 0, 0};
      e[d[i].second] = 1.0;
      out.vectors[i] = e;
    }
    return out;
  }

  const double q = (a.xx + a.yy + a.zz) / 3.0;
  const double b00 = a.xx - q, b11 = a.yy - q, b22 = a.zz - q;
  const double p = std::sqrt((b00 * b00 + b11 * b11 + b22 * b22 + 2.0 * off) / 6.0);
  const double ip = 1.0 / p;
  const double c00 = b00 * ip, c11 = b11 * ip, c22 = b22 * ip;
  const double c01 = a.xy * ip, c02 = a.xz * ip, c12 = a.yz * ip;
  const double det = c00 * (c11 * c22 - c12 * c12) -
                     c01 * (c01 * c22 - c12 * c02) +
                     c02 * (c01 * c12 - c11 * c02);
  const double half = std::clamp(det / 2.0, -1.0, 1.0);
  const double phi = std::acos(half) / 3.0;
  const double two_pi_3 = 2.0 * std::numbers::pi / 3.0;
  const double hi = q + 2.0 * p * std::cos(phi);
  const double lo = q + 2.0 * p * std::cos(phi + two_pi_3);
  const double mid = 3.0 * q - hi - lo;

  Vec3 v_lo, v_mid, v_hi;
  if (hi - mid >= mid - lo) {
    v_hi = vector_for_simple(a, hi);
    v_mid = vector_in_complement(a, v_hi, mid);
    v_lo = unit(cross(v_mid, v_hi));
  } else {
    v_lo = vector_for_simple(a, lo);
    v_mid = vector_in_complement(a, v_lo, mid);
    v_hi = unit(cross(v_lo, v_mid));
  }
  out.vectors = {v_lo, v_mid, v_hi};
  jacobi_refine(a, out.vectors, out.values);
  for (double& v : out.values) v *= scale;
  return out;
}

}  // namespace sgr
