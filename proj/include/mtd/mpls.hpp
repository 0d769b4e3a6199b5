#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <string>
#include <vector>

#include "mtd/tucker.hpp"

namespace mtd {

/// Two-block PLS regression model from successive covariance-maximizing
/// direction vectors with X-side deflation.
struct PLSModel {
  Matrixd directions;   // W, N x J, unit columns (in deflated coordinates)
  Matrixd scores;       // A, I x J, mutually orthogonal columns
  Matrixd x_loadings;   // B, N x J
  Matrixd y_loadings;   // C, M x J, unit columns
  Eigen::VectorXd scaling;  // D diagonal
  Eigen::RowVectorXd x_mean, y_mean;
  Index components = 0;
  std::string warning;
};

inline PLSModel pls_fit(const Matrixd& x, const Matrixd& y, Index j) {
  if (x.rows() != y.rows()) throw ShapeError("pls_fit: row counts differ");
  if (j < 1 || j > x.cols()) throw InvalidRankError("component count out of range");
  PLSModel m;
  m.x_mean = x.colwise().mean();
  m.y_mean = y.colwise().mean();
  Matrixd xd = x.rowwise() - m.x_mean;
  Matrixd yc = y.rowwise() - m.y_mean;
  const double xscale = xd.norm();

  m.directions = Matrixd::Zero(x.cols(), j);
  m.scores = Matrixd::Zero(x.rows(), j);
  m.x_loadings = Matrixd::Zero(x.cols(), j);
  m.y_loadings = Matrixd::Zero(y.cols(), j);
  m.scaling = Eigen::VectorXd::Zero(j);

  for (Index c = 0; c < j; ++c) {
    Matrixd cov = xd.transpose() * yc;
    if (cov.norm() <= 1e-12 * std::max(1.0, xscale)) break;
    Eigen::JacobiSVD<Matrixd> svd(cov, Eigen::ComputeThinU);
    Eigen::VectorXd w = svd.matrixU().col(0);
    Eigen::VectorXd t = xd * w;
    double tt = t.squaredNorm();
    if (tt <= 1e-24 * std::max(1.0, xscale * xscale)) break;
    Eigen::VectorXd p = xd.transpose() * t / tt;
    Eigen::VectorXd q = yc.transpose() * t / tt;
    double d = q.norm();
    m.directions.col(c) = w;
    m.scores.col(c) = t;
    m.x_loadings.col(c) = p;
    m.y_loadings.col(c) = d > 0 ? (q / d).eval() : q;
    m.scaling(c) = d;
    m.components = c + 1;
    xd -= t * p.transpose();
  }
  if (m.components < j) {
    m.warning = "reduced components: rank exhausted at " + std::to_string(m.components);
    m.directions.conservativeResize(Eigen::NoChange, m.components);
    m.scores.conservativeResize(Eigen::NoChange, m.components);
    m.x_loadings.conservativeResize(Eigen::NoChange, m.components);
    m.y_loadings.conservativeResize(Eigen::NoChange, m.components);
    m.scaling.conservativeResize(m.components);
  }
  return m;
}

inline Matrixd pls_predict(const PLSModel& m, const Matrixd& x_new) {
  if (x_new.cols() != m.x_mean.cols()) throw ShapeError("pls_predict: column count mismatch");
  if (m.components == 0) return Matrixd::Zero(x_new.rows(), m.y_mean.cols()).rowwise() + m.y_mean;
  Matrixd xc = x_new.rowwise() - m.x_mean;
  // Directions in original coordinates: R = W (B^T W)^{-1}.
  Matrixd btw = m.x_loadings.transpose() * m.directions;
  Matrixd r = m.directions * btw.inverse();
  Matrixd scores = xc * r;
  Matrixd yhat = scores * m.scaling.asDiagonal() * m.y_loadings.transpose();
  return yhat.rowwise() + m.y_mean;
}

/// Coupled Tucker models with shared leading factors, plus a least-squares
/// map from per-sample x latent coordinates to y latent coordinates.
struct TensorPLSModel {
  TuckerModel x_model, y_model;
  std::vector<Index> shared_modes;
  Matrixd linkage;  // P_x x P_y
  Tensord x_mean, y_mean;  // mean over mode 0, stored with leading dim 1
  std::vector<double> x_fit_trace, y_fit_trace;
  // Relative residual of the stacked pair [x; y]; this is the quantity the
  // shared-factor updates descend, so only this trace is monotone in general.
  std::vector<double> combined_fit_trace;
};

namespace detail {

inline Tensord mean_over_mode0(const Tensord& t) {
  Dims dims = t.dims();
  Index n0 = dims[0];
  dims[0] = 1;
  Tensord out(dims);
  Index per = t.size() / n0;
  for (Index i = 0; i < n0; ++i) out.data() += t.data().segment(i * per, per);
  out.data() /= static_cast<double>(n0);
  return out;
}

inline Tensord center_mode0(const Tensord& t, const Tensord& mean) {
  Tensord out = t;
  Index per = mean.size();
  for (Index i = 0; i < t.dim(0); ++i) out.data().segment(i * per, per) -= mean.data();
  return out;
}

// Per-sample latent coordinates: rows of the mode-0 unfolding after
// projecting every non-sample mode onto its factor.
inline Matrixd latent_rows(const Tensord& t, const std::vector<Matrixd>& factors) {
  Tensord w = t;
  for (Index n = 1; n < t.order(); ++n)
    w = mode_product<double>(w, factors[static_cast<std::size_t>(n)].transpose().eval(), n);
  return unfold(w, 0);
}

}  // namespace detail

inline TensorPLSModel tensor_pls_fit(const Tensord& x, const Tensord& y, const Dims& ranks_x,
                                     const Dims& ranks_y, const std::vector<Index>& shared_modes,
                                     int max_iters = 50, double tol = 1e-8) {
  detail::check_ranks(x, ranks_x);
  detail::check_ranks(y, ranks_y);
  if (shared_modes.empty()) throw InvalidArgumentError("shared_modes must be nonempty");
  bool has0 = false;
  for (Index n : shared_modes) {
    if (n < 0 || n >= x.order() || n >= y.order())
      throw InvalidModeError("shared mode out of range");
    if (x.dim(n) != y.dim(n)) throw ShapeError("shared-mode dims differ");
    if (ranks_x[static_cast<std::size_t>(n)] != ranks_y[static_cast<std::size_t>(n)])
      throw InvalidRankError("shared-mode ranks differ");
    if (n == 0) has0 = true;
  }
  if (!has0) throw InvalidArgumentError("shared_modes must include mode 0");

  TensorPLSModel m;
  m.shared_modes = shared_modes;
  m.x_mean = detail::mean_over_mode0(x);
  m.y_mean = detail::mean_over_mode0(y);
  Tensord xc = detail::center_mode0(x, m.x_mean);
  Tensord yc = detail::center_mode0(y, m.y_mean);
  const double xn = frobenius_norm(xc), yn = frobenius_norm(yc);

  m.x_model = hosvd(xc, ranks_x);
  m.y_model = hosvd(yc, ranks_y);
  auto is_shared = [&](Index n) {
    return std::find(shared_modes.begin(), shared_modes.end(), n) != shared_modes.end();
  };

  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iters; ++it) {
    for (Index n : shared_modes) {
      Matrixd ux = unfold(detail::project_all_but(xc, m.x_model.factors, n), n);
      Matrixd uy = unfold(detail::project_all_but(yc, m.y_model.factors, n), n);
      Matrixd both(ux.rows(), ux.cols() + uy.cols());
      both << ux, uy;
      Matrixd u = detail::leading_left_singular(both, ranks_x[static_cast<std::size_t>(n)]);
      m.x_model.factors[static_cast<std::size_t>(n)] = u;
      m.y_model.factors[static_cast<std::size_t>(n)] = u;
    }
    for (Index n = 0; n < x.order(); ++n)
      if (!is_shared(n))
        m.x_model.factors[static_cast<std::size_t>(n)] = detail::leading_left_singular(
            unfold(detail::project_all_but(xc, m.x_model.factors, n), n),
            ranks_x[static_cast<std::size_t>(n)]);
    for (Index n = 0; n < y.order(); ++n)
      if (!is_shared(n))
        m.y_model.factors[static_cast<std::size_t>(n)] = detail::leading_left_singular(
            unfold(detail::project_all_but(yc, m.y_model.factors, n), n),
            ranks_y[static_cast<std::size_t>(n)]);

    m.x_model.core = detail::project_all_but(xc, m.x_model.factors, -1);
    m.y_model.core = detail::project_all_but(yc, m.y_model.factors, -1);
    double fx = xn > 0 ? std::sqrt(std::max(0.0, xn * xn - m.x_model.core.data().squaredNorm())) / xn
                       : 0.0;
    double fy = yn > 0 ? std::sqrt(std::max(0.0, yn * yn - m.y_model.core.data().squaredNorm())) / yn
                       : 0.0;
    m.x_fit_trace.push_back(fx);
    m.y_fit_trace.push_back(fy);
    m.x_model.fit_error = fx;
    m.y_model.fit_error = fy;
    double denom = xn * xn + yn * yn;
    double combined =
        denom > 0 ? std::sqrt((fx * fx * xn * xn + fy * fy * yn * yn) / denom) : 0.0;
    m.combined_fit_trace.push_back(combined);
    if (prev - combined < tol * std::max(prev, 1e-30)) break;
    prev = combined;
  }

  Matrixd fx_rows = detail::latent_rows(xc, m.x_model.factors);
  Matrixd fy_rows = detail::latent_rows(yc, m.y_model.factors);
  m.linkage = pseudo_inverse<double>(fx_rows) * fy_rows;
  return m;
}

inline Tensord tensor_pls_predict(const TensorPLSModel& m, const Tensord& x_new) {
  const Tensord& xm = m.x_mean;
  if (x_new.order() != xm.order()) throw ShapeError("tensor_pls_predict: order mismatch");
  for (Index n = 1; n < x_new.order(); ++n)
    if (x_new.dim(n) != xm.dim(n)) throw ShapeError("tensor_pls_predict: dim mismatch");

  Tensord xc = detail::center_mode0(x_new, xm);
  Matrixd fx_rows = detail::latent_rows(xc, m.x_model.factors);
  Matrixd fy_rows = fx_rows * m.linkage;

  Dims ydims;
  ydims.push_back(x_new.dim(0));
  for (std::size_t n = 1; n < m.y_model.factors.size(); ++n)
    ydims.push_back(m.y_model.factors[n].cols());
  Tensord glat = fold<double>(fy_rows, 0, ydims);
  Tensord yc = glat;
  for (Index n = 1; n < glat.order(); ++n)
    yc = mode_product<double>(yc, m.y_model.factors[static_cast<std::size_t>(n)], n);

  Tensord out = yc;
  Index per = m.y_mean.size();
  for (Index i = 0; i < out.dim(0); ++i) out.data().segment(i * per, per) += m.y_mean.data();
  return out;
}

}  // namespace mtd
