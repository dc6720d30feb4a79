#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sgr/forest.hpp"
#include "sgr/random.hpp"

namespace sgr {

namespace eval_detail {

inline void check_pair(std::span<const double> a, std::span<const double> b,
                       std::size_t min_n, const char* what) {
  if (a.size() != b.size())
    throw Error(std::string(what) + ": inputs differ in length");
  if (a.size() < min_n)
    throw Error(std::string(what) + ": need at least " + std::to_string(min_n) +
                " samples");
}

}  // namespace eval_detail

inline double pearson(std::span<const double> a, std::span<const double> b) {
  eval_detail::check_pair(a, b, 2, "pearson");
  const double n = double(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) throw Error("pearson: constant input");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

/// 1-based ranks; tied values share the mean of their positions.
inline std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = (double(i) + double(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

/// Spearman rank-order correlation (Pearson of average ranks).
inline double srocc(std::span<const double> a, std::span<const double> b) {
  eval_detail::check_pair(a, b, 3, "srocc");
  const auto ra = average_ranks(a), rb = average_ranks(b);
  try {
    return pearson(ra, rb);
  } catch (const Error&) {
    throw Error("srocc: constant input (zero rank variance)");
  }
}

/// Kendall tau-b via Knight's O(N log N) algorithm.
inline double krocc(std::span<const double> a, std::span<const double> b) {
  eval_detail::check_pair(a, b, 3, "krocc");
  const std::size_t n = a.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) {
    return a[i] < a[j] || (a[i] == a[j] && b[i] < b[j]);
  });
  auto tie_pairs = [](std::size_t t) { return double(t) * double(t - 1) / 2.0; };

  double ties_a = 0, ties_joint = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && a[idx[j + 1]] == a[idx[i]]) ++j;
    ties_a += tie_pairs(j - i + 1);
    for (std::size_t s = i; s <= j;) {
      std::size_t t = s;
      while (t + 1 <= j && b[idx[t + 1]] == b[idx[s]]) ++t;
      ties_joint += tie_pairs(t - s + 1);
      s = t + 1;
    }
    i = j + 1;
  }

  // Count inversions of b in the a-sorted order with a stable merge sort.
  std::vector<double> vals(n), tmp(n);
  for (std::size_t i = 0; i < n; ++i) vals[i] = b[idx[i]];
  double swaps = 0;
  for (std::size_t width = 1; width < n; width *= 2) {
    for (std::size_t lo = 0; lo < n; lo += 2 * width) {
      const std::size_t mid = std::min(lo + width, n);
      const std::size_t hi = std::min(lo + 2 * width, n);
      std::size_t i = lo, j = mid, k = lo;
      while (i < mid && j < hi) {
        if (vals[j] < vals[i]) {
          swaps += double(mid - i);
          tmp[k++] = vals[j++];
        } else {
          tmp[k++] = vals[i++];
        }
      }
      while (i < mid) tmp[k++] = vals[i++];
      while (j < hi) tmp[k++] = vals[j++];
    }
    std::swap(vals, tmp);
  }
  double ties_b = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && vals[j + 1] == vals[i]) ++j;
    ties_b += tie_pairs(j - i + 1);
    i = j + 1;
  }
  const double total = tie_pairs(n);
  const double denom = std::sqrt((total - ties_a) * (total - ties_b));
  if (denom == 0.0) throw Error("krocc: constant input");
  const double num = total - ties_a - ties_b + ties_joint - 2.0 * swaps;
  return std::clamp(num / denom, -1.0, 1.0);
}

using LogisticBetas = std::array<double, 5>;

/// Five-parameter logistic map
/// g = b1 * (1/2 - 1 / (1 + exp(b2 (x - b3)))) + b4 x + b5.
inline double logistic5(const LogisticBetas& b, double x) {
  return b[0] * (0.5 - 1.0 / (1.0 + std::exp(b[1] * (x - b[2])))) + b[3] * x +
         b[4];
}

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Downhill simplex with standard coefficients (reflect 1, expand 2,
/// contract 1/2, shrink 1/2). Stops when the simplex diameter falls below
/// `tolerance` or after `max_iterations`.
inline NelderMeadResult nelder_mead(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x0, std::size_t max_iterations, double tolerance) {
  const std::size_t d = x0.size();
  std::vector<std::vector<double>> s(d + 1, x0);
  for (std::size_t i = 0; i < d; ++i)
    s[i + 1][i] += x0[i] != 0.0 ? 0.05 * std::abs(x0[i]) : 0.00025;
  std::vector<double> fv(d + 1);
  for (std::size_t i = 0; i <= d; ++i) fv[i] = f(s[i]);

  auto clean = [](double v) {
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };
  for (double& v : fv) v = clean(v);

  NelderMeadResult r;
  std::vector<std::size_t> ord(d + 1);
  std::vector<double> centroid(d), xr(d), xe(d), xc(d);
  for (r.iterations = 0; r.iterations < max_iterations; ++r.iterations) {
    std::iota(ord.begin(), ord.end(), std::size_t{0});
    std::sort(ord.begin(), ord.end(), [&](std::size_t a, std::size_t b) {
      return fv[a] < fv[b] || (fv[a] == fv[b] && a < b);
    });
    double diam = 0.0;
    for (std::size_t i = 1; i <= d; ++i) {
      double dist = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double t = s[ord[i]][j] - s[ord[0]][j];
        dist += t * t;
      }
      diam = std::max(diam, std::sqrt(dist));
    }
    if (diam < tolerance) {
      r.converged = true;
      break;
    }
    const std::size_t worst = ord[d], second = ord[d - 1], best = ord[0];
    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) centroid[j] += s[ord[i]][j] / double(d);

    for (std::size_t j = 0; j < d; ++j)
      xr[j] = centroid[j] + (centroid[j] - s[worst][j]);
    const double fr = clean(f(xr));
    if (fr < fv[best]) {
      for (std::size_t j = 0; j < d; ++j)
        xe[j] = centroid[j] + 2.0 * (xr[j] - centroid[j]);
      const double fe = clean(f(xe));
      if (fe < fr) {
        s[worst] = xe;
        fv[worst] = fe;
      } else {
        s[worst] = xr;
        fv[worst] = fr;
      }
      continue;
    }
    if (fr < fv[second]) {
      s[worst] = xr;
      fv[worst] = fr;
      continue;
    }
    const bool outside = fr < fv[worst];
    for (std::size_t j = 0; j < d; ++j)
      xc[j] = outside ? centroid[j] + 0.5 * (xr[j] - centroid[j])
                      : centroid[j] + 0.5 * (s[worst][j] - centroid[j]);
    const double fc = clean(f(xc));
    if (fc < (outside ? fr : fv[worst])) {
      s[worst] = xc;
      fv[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i <= d; ++i) {
      if (i == best) continue;
      for (std::size_t j = 0; j < d; ++j)
        s[i][j] = s[best][j] + 0.5 * (s[i][j] - s[best][j]);
      fv[i] = clean(f(s[i]));
    }
  }
  const auto bi = std::size_t(std::min_element(fv.begin(), fv.end()) - fv.begin());
  r.x = s[bi];
  r.value = fv[bi];
  return r;
}

struct LogisticFit {
  LogisticBetas betas{};
  double sse = 0.0;
  bool linear = false;     // the affine map (b1 = 0) won
  bool degenerate = false; // constant target; correlation undefined
};

inline constexpr std::size_t kLogisticMaxIterations = 20000;
inline constexpr double kLogisticTolerance = 1e-8;

inline double logistic_sse(const LogisticBetas& b, std::span<const double> x,
                           std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = logistic5(b, x[i]) - y[i];
    s += r * r;
  }
  return s;
}

/// Least-squares fit of the five-parameter logistic by Nelder-Mead from a
/// data-driven start. The affine least-squares line (b1 = b2 = b3 = 0) is
/// always evaluated too and returned when it fits better, so the result is
/// never worse than linear regression.
namespace eval_detail {

// Least-squares (beta1, beta4, beta5) for fixed (beta2, beta3). Drops the
// sigmoid column when it is numerically collinear with the line.
inline LogisticBetas logistic_linear_part(std::span<const double> x,
                                          std::span<const double> y, double b2,
                                          double b3) {
  double m[3][4] = {};
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double row[3] = {0.5 - 1.0 / (1.0 + std::exp(b2 * (x[i] - b3))), x[i], 1.0};
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) m[r][c] += row[r] * row[c];
      m[r][3] += row[r] * y[i];
    }
  }
  auto solve = [](double a[3][4], int lo) -> std::optional<std::array<double, 3>> {
    double w[3][4];
    std::copy(&a[0][0], &a[0][0] + 12, &w[0][0]);
    for (int col = lo; col < 3; ++col) {
      int piv = col;
      for (int r = col + 1; r < 3; ++r)
        if (std::abs(w[r][col]) > std::abs(w[piv][col])) piv = r;
      if (!(std::abs(w[piv][col]) > 1e-12 * std::max(1.0, std::abs(a[col][col]))))
        return std::nullopt;
      std::swap(w[col], w[piv]);
      for (int r = lo; r < 3; ++r) {
        if (r == col) continue;
        const double f = w[r][col] / w[col][col];
        for (int c = col; c < 4; ++c) w[r][c] -= f * w[col][c];
      }
    }
    std::array<double, 3> out{0, 0, 0};
    for (int r = lo; r < 3; ++r) out[r] = w[r][3] / w[r][r];
    return out;
  };
  if (const auto full = solve(m, 0)) return {(*full)[0], b2, b3, (*full)[1], (*full)[2]};
  const auto line = solve(m, 1);
  return {0.0, b2, b3, line ? (*line)[1] : 0.0, line ? (*line)[2] : 0.0};
}

}  // namespace eval_detail

inline LogisticFit logistic_fit(std::span<const double> gamma,
                                std::span<const double> mos) {
  eval_detail::check_pair(gamma, mos, 6, "logistic fit");
  const double n = double(gamma.size());
  const auto [gmin, gmax] = std::minmax_element(gamma.begin(), gamma.end());
  if (*gmin == *gmax) throw Error("logistic fit: constant predictor");
  const auto [mmin, mmax] = std::minmax_element(mos.begin(), mos.end());
  const double mg = std::accumulate(gamma.begin(), gamma.end(), 0.0) / n;
  const double mm = std::accumulate(mos.begin(), mos.end(), 0.0) / n;

  LogisticFit out;
  if (*mmin == *mmax) {
    out.betas = {0, 0, 0, 0, *mmin};
    out.degenerate = true;
    out.linear = true;
    return out;
  }

  double sgg = 0, sgm = 0;
  for (std::size_t i = 0; i < gamma.size(); ++i) {
    sgg += (gamma[i] - mg) * (gamma[i] - mg);
    sgm += (gamma[i] - mg) * (mos[i] - mm);
  }
  const double slope = sgm / sgg;
  const LogisticBetas line{0, 0, 0, slope, mm - slope * mg};
  const double line_sse = logistic_sse(line, gamma, mos);

  const double sd = std::sqrt(sgg / n);
  auto objective = [&](const std::vector<double>& b) {
    return logistic_sse({b[0], b[1], b[2], b[3], b[4]}, gamma, mos);
  };

  // beta1, beta4, beta5 enter linearly: for a given (beta2, beta3) they have
  // a closed-form least-squares solution. The simplex searches the remaining
  // two parameters from a small grid of starts.
  auto profile = [&](double b2, double b3) {
    return eval_detail::logistic_linear_part(gamma, mos, b2, b3);
  };
  auto reduced = [&](const std::vector<double>& p) {
    const LogisticBetas b = profile(p[0], p[1]);
    return logistic_sse(b, gamma, mos);
  };
  std::vector<double> sorted(gamma.begin(), gamma.end());
  std::sort(sorted.begin(), sorted.end());
  const double q1 = sorted[sorted.size() / 4], q3 = sorted[3 * sorted.size() / 4];
  LogisticBetas best = profile(1.0 / sd, mg);
  double best_sse = logistic_sse(best, gamma, mos);
  for (double scale : {0.3, 1.0, 3.0})
    for (double sign : {1.0, -1.0})
      for (double centre : {q1, mg, q3}) {
        const auto r = nelder_mead(reduced, {sign * scale / sd, centre},
                                   kLogisticMaxIterations, kLogisticTolerance);
        if (std::isfinite(r.value) && r.value < best_sse) {
          best_sse = r.value;
          best = profile(r.x[0], r.x[1]);
        }
      }

  // Polish all five jointly, also from the conventional starting point.
  auto nm = nelder_mead(objective, {best[0], best[1], best[2], best[3], best[4]},
                        kLogisticMaxIterations, kLogisticTolerance);
  if (!(nm.value <= best_sse)) {
    nm.x = {best[0], best[1], best[2], best[3], best[4]};
    nm.value = best_sse;
  }
  const auto plain = nelder_mead(objective, {*mmax - *mmin, 1.0 / sd, mg, 0.0, mm},
                                 kLogisticMaxIterations, kLogisticTolerance);
  if (plain.value < nm.value) nm = plain;
  if (std::isfinite(nm.value) && nm.value < line_sse) {
    out.betas = {nm.x[0], nm.x[1], nm.x[2], nm.x[3], nm.x[4]};
    out.sse = nm.value;
  } else {
    out.betas = line;
    out.sse = line_sse;
    out.linear = true;
  }
  return out;
}

/// Pearson correlation between logistically mapped scores and targets;
/// empty when the targets are constant.
inline std::optional<double> plcc_after_fit(std::span<const double> gamma,
                                            std::span<const double> mos,
                                            LogisticFit* fit_out = nullptr) {
  const LogisticFit fit = logistic_fit(gamma, mos);
  if (fit_out) *fit_out = fit;
  if (fit.degenerate) return std::nullopt;
  std::vector<double> mapped(gamma.size());
  for (std::size_t i = 0; i < gamma.size(); ++i)
    mapped[i] = logistic5(fit.betas, gamma[i]);
  return pearson(mapped, mos);
}

struct EvalReport {
  double srocc = 0.0;
  double krocc = 0.0;
  std::optional<double> plcc;
  LogisticBetas betas{};
  std::uint64_t seed = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::vector<double> predictions;  // test fold, in fold order
  std::vector<double> targets;
};

/// Seeded train/test split. With `groups`, whole groups (e.g. all
/// distortions of one reference) go to the same fold.
inline EvalReport evaluate_split(const FeatureMatrix& x,
                                 std::span<const double> mos,
                                 double ratio, std::uint64_t seed,
                                 const ForestParams& params = {},
                                 const std::vector<std::string>* groups = nullptr) {
  const std::size_t n = x.rows;
  if (mos.size() != n) throw Error("evaluate: feature and MOS counts differ");
  if (n < 10) throw Error("evaluate: need at least 10 samples");
  if (!(ratio > 0.0 && ratio <= 1.0))
    throw Error("evaluate: ratio must be in (0, 1]");
  if (groups && groups->size() != n)
    throw Error("evaluate: group labels do not match rows");

  Rng rng(seed);
  const auto target = std::size_t(std::floor(ratio * double(n) + 1e-9));
  std::vector<std::size_t> train, test;
  if (groups == nullptr) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    rng.shuffle(idx);
    train.assign(idx.begin(), idx.begin() + target);
    test.assign(idx.begin() + target, idx.end());
  } else {
    std::vector<std::string> labels;
    std::map<std::string, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < n; ++i) {
      auto& m = members[(*groups)[i]];
      if (m.empty()) labels.push_back((*groups)[i]);
      m.push_back(i);
    }
    rng.shuffle(labels);
    for (const auto& l : labels) {
      auto& dst = train.size() < target ? train : test;
      const auto& m = members[l];
      dst.insert(dst.end(), m.begin(), m.end());
    }
  }
  if (test.size() < 3)
    throw Error("evaluate: test fold has " + std::to_string(test.size()) +
                " samples (< 3)");
  if (train.size() < 4)
    throw Error("evaluate: training fold has fewer than 4 samples");

  FeatureMatrix xt;
  std::vector<double> yt;
  for (std::size_t i : train) {
    xt.push_row(x.row(i));
    yt.push_back(mos[i]);
  }
  const ForestModel model = train_forest(xt, yt, params, seed);

  EvalReport rep;
  rep.seed = seed;
  rep.n_train = train.size();
  rep.n_test = test.size();
  for (std::size_t i : test) {
    rep.predictions.push_back(predict(model, x.row(i)));
    rep.targets.push_back(mos[i]);
  }
  rep.srocc = srocc(rep.predictions, rep.targets);
  rep.krocc = krocc(rep.predictions, rep.targets);
  LogisticFit fit;
  rep.plcc = plcc_after_fit(rep.predictions, rep.targets, &fit);
  rep.betas = fit.betas;
  return rep;
}

}  // namespace sgr
