#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "sgr/point_cloud.hpp"

namespace sgr {

/// Gamma function by the Lanczos approximation (g = 7, 9 coefficients),
/// with the reflection formula below 1/2.
inline double lanczos_gamma(double x) {
  static constexpr std::array<double, 9> c{
      0.99999999999980993,     676.5203681218851,
      -1259.1392167224028,     771.32342877765313,
      -176.61502916214059,     12.507343278686905,
      -0.13857109526572012,    9.9843695780195716e-6,
      1.5056327351493116e-7};
  constexpr double g = 7.0;
  if (x < 0.5)
    return std::numbers::pi /
           (std::sin(std::numbers::pi * x) * lanczos_gamma(1.0 - x));
  x -= 1.0;
  double a = c[0];
  for (int i = 1; i < 9; ++i) a += c[i] / (x + double(i));
  const double t = x + g + 0.5;
  return std::sqrt(2.0 * std::numbers::pi) * std::pow(t, x + 0.5) *
         std::exp(-t) * a;
}

/// Moment ratio Gamma(1/l) Gamma(3/l) / Gamma(2/l)^2 of a GGD with shape l.
inline double ggd_ratio(double shape) {
  const double g2 = lanczos_gamma(2.0 / shape);
  return lanczos_gamma(1.0 / shape) * lanczos_gamma(3.0 / shape) / (g2 * g2);
}

struct GgdParams {
  double lambda = 2.0;      // shape
  double epsilon_sq = 1.0;  // second moment
};

/// Shape lookup grid: [0.2, 10] in steps of 0.001 with the matching ratios.
class GgdShapeTable {
 public:
  static constexpr double kMin = 0.2;
  static constexpr double kMax = 10.0;
  static constexpr double kStep = 0.001;
  static constexpr std::size_t kNodes = 9801;

  static const GgdShapeTable& instance() {
    static const GgdShapeTable table;
    return table;
  }

  double shape(std::size_t i) const { return kMin + double(i) * kStep; }
  std::span<const double> ratios() const { return ratios_; }

  /// Grid node whose ratio is nearest to r (ties to the smaller shape).
  double nearest_shape(double r) const {
    // Ratios decrease with shape; search the reversed order.
    auto it = std::lower_bound(ratios_.begin(), ratios_.end(), r,
                               [](double a, double b) { return a > b; });
    std::size_t hi = std::size_t(it - ratios_.begin());
    if (hi == 0) return shape(0);
    if (hi >= kNodes) return shape(kNodes - 1);
    const std::size_t lo = hi - 1;
    return std::abs(ratios_[lo] - r) <= std::abs(ratios_[hi] - r) ? shape(lo)
                                                                  : shape(hi);
  }

 private:
  GgdShapeTable() : ratios_(kNodes) {
    for (std::size_t i = 0; i < kNodes; ++i) ratios_[i] = ggd_ratio(shape(i));
    for (std::size_t i = 1; i < kNodes; ++i)
      if (!(ratios_[i] < ratios_[i - 1]))
        throw Error("ggd: moment-ratio table is not strictly decreasing");
  }
  std::vector<double> ratios_;
};

/// Moment-matching GGD fit.
inline GgdParams ggd_fit(std::span<const double> x) {
  if (x.size() < 8) throw Error("ggd: need at least 8 samples");
  const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
  if (*mn == *mx) throw Error("ggd: degenerate input (all samples equal)");
  double m2 = 0.0, m1 = 0.0;
  for (double v : x) {
    m2 += v * v;
    m1 += std::abs(v);
  }
  m2 /= double(x.size());
  m1 /= double(x.size());
  if (!(m1 > 0.0)) throw Error("ggd: degenerate input (zero mean magnitude)");
  GgdParams p;
  p.epsilon_sq = m2;
  p.lambda = GgdShapeTable::instance().nearest_shape(m2 / (m1 * m1));
  return p;
}

}  // namespace sgr
