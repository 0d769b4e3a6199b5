#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mtd/errors.hpp"
#include "mtd/tensor.hpp"

namespace mtd {

enum class Constraint {
  Unconstrained,
  Orthogonal,
  Nonnegative,
  Sparse,
  Smooth,
  Independent,
};

inline const char* constraint_name(Constraint c) {
  switch (c) {
    case Constraint::Unconstrained: return "unconstrained";
    case Constraint::Orthogonal: return "orthogonal";
    case Constraint::Nonnegative: return "nonnegative";
    case Constraint::Sparse: return "sparse";
    case Constraint::Smooth: return "smooth";
    case Constraint::Independent: return "independent";
  }
  return "?";
}

inline Constraint constraint_from_name(const std::string& s) {
  if (s == "unconstrained") return Constraint::Unconstrained;
  if (s == "orthogonal") return Constraint::Orthogonal;
  if (s == "nonnegative") return Constraint::Nonnegative;
  if (s == "sparse") return Constraint::Sparse;
  if (s == "smooth") return Constraint::Smooth;
  if (s == "independent") return Constraint::Independent;
  throw InvalidArgumentError("unknown constraint kind: " + s);
}

struct ConstraintSpec {
  Constraint kind = Constraint::Unconstrained;
  double penalty_weight = 0.0;  // lambda for sparse/smooth, ignored otherwise
  int max_iters = 500;
  double tol = 1e-8;
  std::uint64_t seed = 0;

  void validate() const {
    if (penalty_weight < 0) throw InvalidArgumentError("penalty_weight must be >= 0");
    if (max_iters < 1) throw InvalidArgumentError("max_iters must be >= 1");
    if (tol <= 0) throw InvalidArgumentError("tol must be > 0");
  }
};

/// Result of a two-way factorization y ~ a b^T; b columns are the components.
struct FactorPair {
  Matrixd a;  // I x J mixing / basis
  Matrixd b;  // T x J components
  int iterations_run = 0;
  double final_objective = 0.0;
  std::vector<double> objective_trace;  // one entry per recorded sweep
  std::string warning;                  // empty when clean
};

struct SvdFactorization {
  Matrixd a;                // orthonormal columns
  Eigen::VectorXd d;        // nonincreasing, nonnegative
  Matrixd b;                // orthonormal columns
};

namespace detail {

inline void check_rank_range(const Matrixd& y, Index j) {
  if (j < 1 || j > std::min(y.rows(), y.cols()))
    throw InvalidRankError("rank must be in [1, min(rows, cols)]");
}

// Unit-norm b columns (scale absorbed into a), columns sorted by descending
// a-column norm, sign fixed so each b column's largest-|.| entry is positive.
inline void normalize_pair(FactorPair& p, bool unit_norm_b = true) {
  const Index j = p.b.cols();
  if (unit_norm_b) {
    for (Index k = 0; k < j; ++k) {
      double n = p.b.col(k).norm();
      if (n > 0) {
        p.b.col(k) /= n;
        p.a.col(k) *= n;
      }
    }
  }
  std::vector<Index> order(static_cast<std::size_t>(j));
  for (Index k = 0; k < j; ++k) order[static_cast<std::size_t>(k)] = k;
  std::stable_sort(order.begin(), order.end(),
                   [&](Index u, Index v) { return p.a.col(u).norm() > p.a.col(v).norm(); });
  Matrixd a2(p.a.rows(), j), b2(p.b.rows(), j);
  for (Index k = 0; k < j; ++k) {
    a2.col(k) = p.a.col(order[static_cast<std::size_t>(k)]);
    b2.col(k) = p.b.col(order[static_cast<std::size_t>(k)]);
  }
  p.a = a2;
  p.b = b2;
  for (Index k = 0; k < j; ++k) {
    Index imax = 0;
    p.b.col(k).cwiseAbs().maxCoeff(&imax);
    if (p.b(imax, k) < 0) {
      p.b.col(k) = -p.b.col(k);
      p.a.col(k) = -p.a.col(k);
    }
  }
}

// Second-difference operator (rows-2) x rows; annihilates constants and lines.
inline Matrixd second_difference(Index rows) {
  if (rows < 3) return Matrixd::Zero(0, rows);
  Matrixd l = Matrixd::Zero(rows - 2, rows);
  for (Index i = 0; i + 2 < rows; ++i) {
    l(i, i) = 1.0;
    l(i, i + 1) = -2.0;
    l(i, i + 2) = 1.0;
  }
  return l;
}

inline double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

}  // namespace detail

/// Truncated SVD: best rank-j approximation in Frobenius norm.
inline SvdFactorization svd_factor(const Matrixd& y, Index j) {
  detail::check_rank_range(y, j);
  Eigen::JacobiSVD<Matrixd> svd(y, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SvdFactorization r;
  r.a = svd.matrixU().leftCols(j);
  r.d = svd.singularValues().head(j);
  r.b = svd.matrixV().leftCols(j);
  return r;
}

/// Nonnegative factorization by hierarchical ALS column updates.
inline FactorPair nmf_hals(const Matrixd& y, Index j, const ConstraintSpec& spec) {
  spec.validate();
  if (j < 1) throw InvalidRankError("rank must be >= 1");
  if ((y.array() < 0).any()) throw InvalidInputError("nmf_hals requires nonnegative input");

  // SVD-seeded nonnegative start.
  Index j0 = std::min(j, std::min(y.rows(), y.cols()));
  Eigen::JacobiSVD<Matrixd> svd(y, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Matrixd a = Matrixd::Zero(y.rows(), j), b = Matrixd::Zero(y.cols(), j);
  for (Index k = 0; k < j0; ++k) {
    a.col(k) = (svd.matrixU().col(k) * svd.singularValues()(k)).cwiseAbs();
    b.col(k) = svd.matrixV().col(k).cwiseAbs();
  }

  FactorPair p{a, b};
  const double eps = 1e-14;
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < spec.max_iters; ++it) {
    {
      Matrixd w = y * p.b;
      Matrixd g = p.b.transpose() * p.b;
      for (Index k = 0; k < j; ++k) {
        if (g(k, k) <= eps) {
          p.a.col(k).setZero();
          continue;
        }
        p.a.col(k) = (p.a.col(k) + (w.col(k) - p.a * g.col(k)) / g(k, k)).cwiseMax(0.0);
      }
    }
    {
      Matrixd w = y.transpose() * p.a;
      Matrixd g = p.a.transpose() * p.a;
      for (Index k = 0; k < j; ++k) {
        if (g(k, k) <= eps) {
          p.b.col(k).setZero();
          continue;
        }
        p.b.col(k) = (p.b.col(k) + (w.col(k) - p.b * g.col(k)) / g(k, k)).cwiseMax(0.0);
      }
    }
    double obj = (y - p.a * p.b.transpose()).squaredNorm();
    p.objective_trace.push_back(obj);
    p.iterations_run = it + 1;
    if (prev - obj < spec.tol * std::max(prev, 1.0)) {
      prev = obj;
      break;
    }
    prev = obj;
  }
  p.final_objective = p.objective_trace.empty() ? y.squaredNorm() : p.objective_trace.back();
  detail::normalize_pair(p);
  return p;
}

/// FastICA-style deflation with the log-cosh contrast after whitening.
/// b columns are zero-mean, unit-variance estimated sources.
inline FactorPair ica_deflation(const Matrixd& y, Index j, const ConstraintSpec& spec) {
  spec.validate();
  if (j < 1 || j > y.rows()) throw InvalidRankError("component count must be in [1, rows]");
  const Index t = y.cols();
  Matrixd yc = y;
  Eigen::VectorXd row_mean = y.rowwise().mean();
  yc.colwise() -= row_mean;

  Eigen::JacobiSVD<Matrixd> svd(yc, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  double cutoff = static_cast<double>(std::max(y.rows(), y.cols())) *
                  std::numeric_limits<double>::epsilon() * (sv.size() ? sv(0) : 0.0);
  Index rank = 0;
  for (Index k = 0; k < sv.size(); ++k)
    if (sv(k) > std::max(cutoff, 1e-10 * (sv.size() ? sv(0) : 0.0))) ++rank;
  if (rank < j) throw RankDeficientError("requested components exceed numerical rank");

  // Whitened data z: j x t with z z^T / t = I.
  Matrixd z = std::sqrt(static_cast<double>(t)) *
              sv.head(j).cwiseInverse().asDiagonal() *
              (svd.matrixU().leftCols(j).transpose() * yc);

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrixd wmat(j, j);
  FactorPair p;
  p.iterations_run = 0;
  for (Index k = 0; k < j; ++k) {
    Eigen::VectorXd w(j);
    for (Index i = 0; i < j; ++i) w(i) = gauss(rng);
    for (Index c = 0; c < k; ++c) w -= wmat.col(c).dot(w) * wmat.col(c);
    w.normalize();
    for (int it = 0; it < spec.max_iters; ++it) {
      Eigen::VectorXd u = z.transpose() * w;               // t samples
      Eigen::VectorXd gu = u.array().tanh();
      double gprime_mean = (1.0 - gu.array().square()).mean();
      Eigen::VectorXd w_new = z * gu / static_cast<double>(t) - gprime_mean * w;
      for (Index c = 0; c < k; ++c) w_new -= wmat.col(c).dot(w_new) * wmat.col(c);
      double n = w_new.norm();
      if (n < 1e-14) {  // restart from fresh random direction
        for (Index i = 0; i < j; ++i) w_new(i) = gauss(rng);
        for (Index c = 0; c < k; ++c) w_new -= wmat.col(c).dot(w_new) * wmat.col(c);
        n = w_new.norm();
      }
      w_new /= n;
      double align = std::abs(w_new.dot(w));
      w = w_new;
      ++p.iterations_run;
      if (1.0 - align < spec.tol) break;
    }
    wmat.col(k) = w;
  }

  Matrixd sources = (wmat.transpose() * z).transpose();  // t x j, unit variance
  p.b = sources;
  p.a = yc * p.b * (p.b.transpose() * p.b).ldlt().solve(Matrixd::Identity(j, j));
  p.final_objective = (yc - p.a * p.b.transpose()).squaredNorm();
  p.objective_trace.push_back(p.final_objective);

  // Log-cosh expectation for a standard Gaussian; if every extracted
  // component sits at this value the rotation is unidentifiable.
  const double gauss_logcosh = 0.37456720323;
  bool all_gaussian = true;
  for (Index k = 0; k < j; ++k) {
    double m = p.b.col(k).array().cosh().log().mean();
    if (std::abs(m - gauss_logcosh) > 0.02) all_gaussian = false;
  }
  if (all_gaussian) p.warning = "gaussian-sources: independence unidentifiable beyond rotation";

  detail::normalize_pair(p, /*unit_norm_b=*/false);  // keep unit variance
  for (Index k = 0; k < j; ++k) {                    // re-impose exact zero mean
    p.b.col(k).array() -= p.b.col(k).mean();
  }
  return p;
}

/// Sparse component analysis: ALS with L1 soft-thresholding on b.
inline FactorPair sca_factor(const Matrixd& y, Index j, const ConstraintSpec& spec) {
  spec.validate();
  if (j < 1) throw InvalidRankError("rank must be >= 1");
  const double lambda = spec.penalty_weight;

  Index j0 = std::min(j, std::min(y.rows(), y.cols()));
  Eigen::JacobiSVD<Matrixd> svd(y, Eigen::ComputeThinU | Eigen::ComputeThinV);
  FactorPair p;
  p.a = Matrixd::Zero(y.rows(), j);
  p.b = Matrixd::Zero(y.cols(), j);
  p.a.leftCols(j0) = svd.matrixU().leftCols(j0) * svd.singularValues().head(j0).asDiagonal();
  p.b.leftCols(j0) = svd.matrixV().leftCols(j0);

  const double eps = 1e-14;
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < spec.max_iters; ++it) {
    {
      Matrixd g = p.b.transpose() * p.b;
      if (g.fullPivLu().rank() == j) p.a = y * p.b * g.inverse();
    }
    {
      Matrixd w = y.transpose() * p.a;
      Matrixd g = p.a.transpose() * p.a;
      for (Index k = 0; k < j; ++k) {
        if (g(k, k) <= eps) continue;
        Eigen::VectorXd r = p.b.col(k) + (w.col(k) - p.b * g.col(k)) / g(k, k);
        double thr = lambda / (2.0 * g(k, k));
        for (Index i = 0; i < r.size(); ++i)
          p.b(i, k) = detail::soft_threshold(r(i), thr);
      }
    }
    double obj = (y - p.a * p.b.transpose()).squaredNorm() + lambda * p.b.cwiseAbs().sum();
    p.objective_trace.push_back(obj);
    p.iterations_run = it + 1;
    if (prev - obj < spec.tol * std::max(prev, 1.0)) {
      prev = obj;
      break;
    }
    prev = obj;
  }
  p.final_objective = p.objective_trace.back();
  return p;  // no unit-norm renormalization: it would alter the L1 term
}

/// Smooth component analysis: ALS with a squared second-difference penalty
/// on b, solved exactly per sweep through the eigenbasis of a^T a.
inline FactorPair smoca_factor(const Matrixd& y, Index j, const ConstraintSpec& spec) {
  spec.validate();
  if (j < 1) throw InvalidRankError("rank must be >= 1");
  const double lambda = spec.penalty_weight;
  const Index t = y.cols();
  Matrixd l = detail::second_difference(t);
  Matrixd ltl = l.transpose() * l;

  Index j0 = std::min(j, std::min(y.rows(), y.cols()));
  Eigen::JacobiSVD<Matrixd> svd(y, Eigen::ComputeThinU | Eigen::ComputeThinV);
  FactorPair p;
  p.a = Matrixd::Zero(y.rows(), j);
  p.b = Matrixd::Zero(y.cols(), j);
  p.a.leftCols(j0) = svd.matrixU().leftCols(j0) * svd.singularValues().head(j0).asDiagonal();
  p.b.leftCols(j0) = svd.matrixV().leftCols(j0);

  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < spec.max_iters; ++it) {
    {
      Matrixd g = p.b.transpose() * p.b;
      if (g.fullPivLu().rank() == j) p.a = y * p.b * g.inverse();
    }
    {
      Matrixd g = p.a.transpose() * p.a;
      Eigen::SelfAdjointEigenSolver<Matrixd> eig(g);
      Matrixd rhs = y.transpose() * p.a * eig.eigenvectors();
      Matrixd btilde(t, j);
      for (Index k = 0; k < j; ++k) {
        Matrixd sys = lambda * ltl;
        sys.diagonal().array() += eig.eigenvalues()(k);
        btilde.col(k) = sys.ldlt().solve(rhs.col(k));
      }
      p.b = btilde * eig.eigenvectors().transpose();
    }
    double obj = (y - p.a * p.b.transpose()).squaredNorm() + lambda * (l * p.b).squaredNorm();
    p.objective_trace.push_back(obj);
    p.iterations_run = it + 1;
    if (prev - obj < spec.tol * std::max(prev, 1.0)) {
      prev = obj;
      break;
    }
    prev = obj;
  }
  p.final_objective = p.objective_trace.back();
  detail::normalize_pair(p);
  return p;
}

/// Dispatch over constraint kinds; unconstrained/orthogonal use truncated SVD.
inline FactorPair bss_factor(const Matrixd& y, Index j, const ConstraintSpec& spec) {
  switch (spec.kind) {
    case Constraint::Unconstrained:
    case Constraint::Orthogonal: {
      auto f = svd_factor(y, j);
      FactorPair p;
      p.a = f.a * f.d.asDiagonal();
      p.b = f.b;
      p.iterations_run = 1;
      double total = y.squaredNorm();
      p.final_objective = std::max(0.0, total - f.d.squaredNorm());
      p.objective_trace.push_back(p.final_objective);
      detail::normalize_pair(p);
      return p;
    }
    case Constraint::Nonnegative:
      return nmf_hals(y, j, spec);
    case Constraint::Sparse:
      return sca_factor(y, j, spec);
    case Constraint::Smooth:
      return smoca_factor(y, j, spec);
    case Constraint::Independent:
      return ica_deflation(y, j, spec);
  }
  throw InvalidArgumentError("unknown constraint kind");
}

/// Simultaneous factorizations of several matrices; with share_b the common
/// component matrix is fit on row-concatenated data and each a_n by least
/// squares against it.
inline std::vector<FactorPair> group_factorize(const std::vector<Matrixd>& ys, Index j,
                                               const ConstraintSpec& spec, bool share_b) {
  if (ys.empty()) throw InvalidInputError("group_factorize: empty input list");
  std::vector<FactorPair> out;
  if (!share_b) {
    for (const auto& y : ys) out.push_back(bss_factor(y, j, spec));
    return out;
  }
  Index cols = ys.front().cols();
  Index total_rows = 0;
  for (const auto& y : ys) {
    if (y.cols() != cols) throw ShapeError("group_factorize: column counts differ");
    total_rows += y.rows();
  }
  Matrixd stacked(total_rows, cols);
  Index at = 0;
  for (const auto& y : ys) {
    stacked.middleRows(at, y.rows()) = y;
    at += y.rows();
  }
  FactorPair shared = bss_factor(stacked, j, spec);
  Matrixd gram = shared.b.transpose() * shared.b;
  Matrixd solve_rhs = pseudo_inverse<double>(gram);
  for (const auto& y : ys) {
    FactorPair p;
    p.b = shared.b;
    p.a = y * shared.b * solve_rhs;
    p.iterations_run = shared.iterations_run;
    p.final_objective = (y - p.a * p.b.transpose()).squaredNorm();
    p.objective_trace.push_back(p.final_objective);
    p.warning = shared.warning;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace mtd
