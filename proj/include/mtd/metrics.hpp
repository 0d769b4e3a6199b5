#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <vector>

#include "mtd/tensor.hpp"

namespace mtd {

/// Amari permutation/scale-invariant separation index of a square matrix;
/// 0 means a scaled permutation (perfect separation), upper bound 1.
inline double amari_index(const Matrixd& p) {
  const Index j = p.rows();
  Matrixd a = p.cwiseAbs();
  double sum = 0.0;
  for (Index i = 0; i < j; ++i) {
    sum += a.row(i).sum() / a.row(i).maxCoeff() - 1.0;
    sum += a.col(i).sum() / a.col(i).maxCoeff() - 1.0;
  }
  return sum / (2.0 * static_cast<double>(j) * static_cast<double>(j - 1));
}

/// Absolute column cosines between two matrices with equal row counts.
inline Matrixd congruence_matrix(const Matrixd& est, const Matrixd& truth) {
  Matrixd c(est.cols(), truth.cols());
  for (Index i = 0; i < est.cols(); ++i)
    for (Index j = 0; j < truth.cols(); ++j) {
      double d = est.col(i).norm() * truth.col(j).norm();
      c(i, j) = d > 0 ? std::abs(est.col(i).dot(truth.col(j))) / d : 0.0;
    }
  return c;
}

/// Greedy one-to-one alignment of estimated columns onto true columns by
/// absolute cosine; returns the mean matched congruence.
inline double aligned_congruence(const Matrixd& est, const Matrixd& truth) {
  Matrixd c = congruence_matrix(est, truth);
  std::vector<bool> used_r(static_cast<std::size_t>(c.rows()), false);
  std::vector<bool> used_c(static_cast<std::size_t>(c.cols()), false);
  Index n = std::min(c.rows(), c.cols());
  double total = 0.0;
  for (Index k = 0; k < n; ++k) {
    double best = -1.0;
    Index bi = -1, bj = -1;
    for (Index i = 0; i < c.rows(); ++i) {
      if (used_r[static_cast<std::size_t>(i)]) continue;
      for (Index j = 0; j < c.cols(); ++j) {
        if (used_c[static_cast<std::size_t>(j)]) continue;
        if (c(i, j) > best) best = c(i, j), bi = i, bj = j;
      }
    }
    used_r[static_cast<std::size_t>(bi)] = used_c[static_cast<std::size_t>(bj)] = true;
    total += best;
  }
  return total / static_cast<double>(n);
}

/// Largest principal angle (radians) between the column spaces of a and b.
inline double max_principal_angle(const Matrixd& a, const Matrixd& b) {
  Eigen::HouseholderQR<Matrixd> qa(a), qb(b);
  Matrixd qa_thin = qa.householderQ() * Matrixd::Identity(a.rows(), a.cols());
  Matrixd qb_thin = qb.householderQ() * Matrixd::Identity(b.rows(), b.cols());
  Eigen::JacobiSVD<Matrixd> svd(qa_thin.transpose() * qb_thin);
  double smin = svd.singularValues().minCoeff();
  smin = std::min(1.0, std::max(-1.0, smin));
  return std::acos(smin);
}

/// Pearson correlation of two equally sized vectors.
inline double pearson(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  Eigen::VectorXd xc = x.array() - x.mean();
  Eigen::VectorXd yc = y.array() - y.mean();
  double d = xc.norm() * yc.norm();
  return d > 0 ? xc.dot(yc) / d : 0.0;
}

}  // namespace mtd
