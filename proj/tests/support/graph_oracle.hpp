#pragma once

// Dense reference implementations of the graph filter.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <complex>
#include <vector>

#include "sgr/graph_resampling.hpp"

namespace sgr::testing {

inline Eigen::MatrixXd dense_shift(const GraphShift& g) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(g.nodes, g.nodes);
  for (std::size_t i = 0; i < g.nodes; ++i)
    for (std::size_t j = 0; j < g.k; ++j)
      a(i, g.neighbors[i * g.k + j]) += g.weights[i * g.k + j];
  return a;
}

inline Eigen::MatrixXd signal_matrix(const std::vector<Vec3>& s) {
  Eigen::MatrixXd x(s.size(), 3);
  for (std::size_t i = 0; i < s.size(); ++i)
    for (int c = 0; c < 3; ++c) x(i, c) = s[i][c];
  return x;
}

inline std::vector<double> row_norms(const Eigen::MatrixXd& y) {
  std::vector<double> r(y.rows());
  for (Eigen::Index i = 0; i < y.rows(); ++i) r[i] = y.row(i).norm();
  return r;
}

/// sum_k h_k A^k X with explicit dense powers.
inline std::vector<double> polynomial_filter_response(
    const GraphShift& g, const std::vector<Vec3>& s, const FilterSpec& f) {
  const Eigen::MatrixXd a = dense_shift(g);
  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(g.nodes, g.nodes);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(g.nodes, g.nodes);
  for (double c : f.coefficients) {
    h += c * power;
    power = power * a;
  }
  return row_norms(h * signal_matrix(s));
}

/// V h(Lambda) V^-1 X from a full (complex) eigendecomposition.
inline std::vector<double> eigen_filter_response(const GraphShift& g,
                                                 const std::vector<Vec3>& s,
                                                 const FilterSpec& f) {
  const Eigen::MatrixXd a = dense_shift(g);
  Eigen::EigenSolver<Eigen::MatrixXd> es(a);
  const Eigen::MatrixXcd v = es.eigenvectors();
  const Eigen::VectorXcd lambda = es.eigenvalues();
  Eigen::VectorXcd hl(lambda.size());
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    std::complex<double> acc = 0, p = 1;
    for (double c : f.coefficients) {
      acc += c * p;
      p *= lambda(i);
    }
    hl(i) = acc;
  }
  const Eigen::MatrixXcd x = signal_matrix(s).cast<std::complex<double>>();
  const Eigen::MatrixXcd y = v * hl.asDiagonal() * v.partialPivLu().solve(x);
  return row_norms(y.real());
}

}  // namespace sgr::testing
