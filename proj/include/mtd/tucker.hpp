#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "mtd/factor2d.hpp"
#include "mtd/io.hpp"
#include "mtd/tensor.hpp"

namespace mtd {

/// Tucker-N model: core tensor and one factor matrix per mode.
struct TuckerModel {
  Tensord core;
  std::vector<Matrixd> factors;          // factors[n]: I_n x J_n
  double fit_error = 0.0;                // relative Frobenius
  std::vector<double> fit_trace;         // per-sweep fit errors (iterative fits)
};

/// CP model: unit-norm factor columns with explicit weights.
struct CPModel {
  Eigen::VectorXd weights;               // sorted descending by magnitude
  std::vector<Matrixd> factors;          // all share column count R
  double fit_error = 0.0;
  std::vector<double> fit_trace;
  std::string warning;
};

inline Tensord tucker_reconstruct(const TuckerModel& m) {
  std::vector<std::pair<Matrixd, Index>> fs;
  for (std::size_t n = 0; n < m.factors.size(); ++n)
    fs.emplace_back(m.factors[n], static_cast<Index>(n));
  return multi_mode_product(m.core, fs);
}

inline double fit_error(const Tensord& t, const TuckerModel& m) {
  Tensord r = tucker_reconstruct(m);
  if (r.dims() != t.dims()) throw ShapeError("fit_error: model does not match tensor dims");
  double denom = frobenius_norm(t);
  double err = (t.data() - r.data()).norm();
  return denom > 0 ? err / denom : err;
}

namespace detail {

inline void check_ranks(const Tensord& t, const Dims& ranks) {
  if (ranks.size() != static_cast<std::size_t>(t.order()))
    throw InvalidRankError("one rank per mode required");
  for (std::size_t n = 0; n < ranks.size(); ++n)
    if (ranks[n] < 1 || ranks[n] > t.dim(static_cast<Index>(n)))
      throw InvalidRankError("rank out of range in mode " + std::to_string(n));
}

// Tensor times the transposes of every factor except `skip` (-1 for none).
inline Tensord project_all_but(const Tensord& t, const std::vector<Matrixd>& factors,
                               Index skip) {
  Tensord w = t;
  for (Index n = 0; n < t.order(); ++n) {
    if (n == skip) continue;
    w = mode_product<double>(w, factors[static_cast<std::size_t>(n)].transpose(), n);
  }
  return w;
}

inline Matrixd leading_left_singular(const Matrixd& m, Index j) {
  if (j <= std::min(m.rows(), m.cols())) {
    Eigen::JacobiSVD<Matrixd> svd(m, Eigen::ComputeThinU);
    return svd.matrixU().leftCols(j);
  }
  // more vectors than the thin factorization holds: orthonormal completion
  Eigen::JacobiSVD<Matrixd> svd(m, Eigen::ComputeFullU);
  return svd.matrixU().leftCols(j);
}

}  // namespace detail

/// Truncated higher-order SVD: per-mode leading left singular vectors, core
/// by transpose projection.
inline TuckerModel hosvd(const Tensord& t, const Dims& ranks) {
  detail::check_ranks(t, ranks);
  TuckerModel m;
  for (Index n = 0; n < t.order(); ++n)
    m.factors.push_back(detail::leading_left_singular(unfold(t, n), ranks[static_cast<std::size_t>(n)]));
  m.core = detail::project_all_but(t, m.factors, -1);
  double tn = frobenius_norm(t);
  double err2 = std::max(0.0, tn * tn - m.core.data().squaredNorm());
  m.fit_error = tn > 0 ? std::sqrt(err2) / tn : 0.0;
  return m;
}

/// Higher-order orthogonal iteration starting from HOSVD.
inline TuckerModel hooi(const Tensord& t, const Dims& ranks, int max_iters = 200,
                        double tol = 1e-8) {
  TuckerModel m = hosvd(t, ranks);
  double tn = frobenius_norm(t);
  m.fit_trace.push_back(m.fit_error);
  for (int it = 0; it < max_iters; ++it) {
    for (Index n = 0; n < t.order(); ++n) {
      Tensord w = detail::project_all_but(t, m.factors, n);
      m.factors[static_cast<std::size_t>(n)] =
          detail::leading_left_singular(unfold(w, n), ranks[static_cast<std::size_t>(n)]);
    }
    m.core = detail::project_all_but(t, m.factors, -1);
    double err2 = std::max(0.0, tn * tn - m.core.data().squaredNorm());
    double fit = tn > 0 ? std::sqrt(err2) / tn : 0.0;
    double prev = m.fit_trace.back();
    m.fit_trace.push_back(fit);
    m.fit_error = fit;
    if (prev - fit < tol * std::max(prev, 1e-30)) break;
  }
  return m;
}

/// Core recovery by factor pseudo-inverses.
inline Tensord core_project(const Tensord& t, const std::vector<Matrixd>& factors) {
  if (factors.size() != static_cast<std::size_t>(t.order()))
    throw ShapeError("core_project: one factor per mode required");
  Tensord g = t;
  for (Index n = 0; n < t.order(); ++n) {
    const Matrixd& u = factors[static_cast<std::size_t>(n)];
    if (u.rows() != t.dim(n)) throw ShapeError("core_project: factor rows mismatch");
    g = mode_product<double>(g, pseudo_inverse<double>(u), n);
  }
  return g;
}

/// Tucker-1: single-mode compression by truncated SVD of the unfolding.
inline std::pair<Tensord, Matrixd> tucker1(const Tensord& t, Index mode, Index j) {
  if (mode < 0 || mode >= t.order()) throw InvalidModeError("tucker1 mode out of range");
  if (j < 1 || j > t.dim(mode)) throw InvalidRankError("tucker1 rank out of range");
  Matrixd u = detail::leading_left_singular(unfold(t, mode), j);
  Tensord core = mode_product<double>(t, u.transpose(), mode);
  return {std::move(core), std::move(u)};
}

inline Tensord cp_reconstruct(const CPModel& m) {
  const Index r = m.weights.size();
  Dims dims;
  for (const auto& f : m.factors) dims.push_back(f.rows());
  Tensord t(dims);
  for (Index k = 0; k < r; ++k) {
    std::vector<Eigen::VectorXd> vs;
    for (const auto& f : m.factors) vs.push_back(f.col(k));
    Tensord rk = outer_product<double>(vs);
    t.data() += m.weights(k) * rk.data();
  }
  return t;
}

/// CP by alternating least squares over Khatri-Rao structured normal
/// equations; seed-controlled random restarts keeping the best fit.
inline CPModel cp_als(const Tensord& t, Index r, int max_iters = 200, double tol = 1e-8,
                      std::uint64_t seed = 0, int restarts = 3) {
  if (r < 1) throw InvalidRankError("cp rank must be >= 1");
  const Index order = t.order();
  const double tn = frobenius_norm(t);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  CPModel best;
  best.fit_error = std::numeric_limits<double>::infinity();
  for (int rs = 0; rs < restarts; ++rs) {
    CPModel m;
    m.weights = Eigen::VectorXd::Ones(r);
    for (Index n = 0; n < order; ++n) {
      Matrixd f(t.dim(n), r);
      for (Index i = 0; i < f.size(); ++i) f.data()[i] = gauss(rng);
      for (Index k = 0; k < r; ++k) f.col(k).normalize();
      m.factors.push_back(std::move(f));
    }
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iters; ++it) {
      for (Index n = 0; n < order; ++n) {
        Matrixd kr;  // chain with earlier modes varying fastest
        Matrixd v = Matrixd::Ones(r, r);
        for (Index mmode = order - 1; mmode >= 0; --mmode) {
          if (mmode == n) continue;
          const Matrixd& f = m.factors[static_cast<std::size_t>(mmode)];
          kr = kr.size() == 0 ? f : khatri_rao<double>(kr, f);
          v = v.cwiseProduct(f.transpose() * f);
        }
        Matrixd mttkrp = unfold(t, n) * kr;
        Eigen::SelfAdjointEigenSolver<Matrixd> eig(v);
        if (eig.eigenvalues().minCoeff() <
            1e-12 * std::max(1.0, eig.eigenvalues().maxCoeff())) {
          v.diagonal().array() += 1e-10 * std::max(1.0, v.diagonal().maxCoeff());
          m.warning = "rank-deficient normal equations: regularized solve";
        }
        Matrixd un = v.ldlt().solve(mttkrp.transpose()).transpose();
        for (Index k = 0; k < r; ++k) {
          double nrm = un.col(k).norm();
          m.weights(k) = nrm;
          if (nrm > 0) un.col(k) /= nrm;
        }
        m.factors[static_cast<std::size_t>(n)] = un;
      }
      double err = (t.data() - cp_reconstruct(m).data()).norm();
      double fit = tn > 0 ? err / tn : err;
      m.fit_trace.push_back(fit);
      m.fit_error = fit;
      if (prev - fit < tol * std::max(prev, 1e-30)) break;
      prev = fit;
    }
    if (m.fit_error < best.fit_error) best = m;
  }

  // Sort by weight magnitude, fix column signs into the weights.
  std::vector<Index> order_idx(static_cast<std::size_t>(r));
  for (Index k = 0; k < r; ++k) order_idx[static_cast<std::size_t>(k)] = k;
  std::stable_sort(order_idx.begin(), order_idx.end(), [&](Index u, Index v) {
    return std::abs(best.weights(u)) > std::abs(best.weights(v));
  });
  CPModel out = best;
  for (Index k = 0; k < r; ++k) out.weights(k) = best.weights(order_idx[static_cast<std::size_t>(k)]);
  for (std::size_t n = 0; n < out.factors.size(); ++n)
    for (Index k = 0; k < r; ++k)
      out.factors[n].col(k) = best.factors[n].col(order_idx[static_cast<std::size_t>(k)]);
  for (std::size_t n = 0; n < out.factors.size(); ++n) {
    for (Index k = 0; k < r; ++k) {
      Index imax = 0;
      out.factors[n].col(k).cwiseAbs().maxCoeff(&imax);
      if (out.factors[n](imax, k) < 0) {
        out.factors[n].col(k) = -out.factors[n].col(k);
        out.weights(k) = -out.weights(k);
      }
    }
  }

  // Collinearity watchdog for degenerate (swamp) solutions.
  if (r > 1) {
    Matrixd c = Matrixd::Ones(r, r);
    for (const auto& f : out.factors) c = c.cwiseProduct((f.transpose() * f).cwiseAbs());
    double worst = 0.0;
    for (Index i = 0; i < r; ++i)
      for (Index j2 = i + 1; j2 < r; ++j2) worst = std::max(worst, c(i, j2));
    if (worst > 0.999 && out.warning.empty())
      out.warning = "degenerate: factor congruence above 0.999";
  }
  return out;
}

/// Expand a CP model into a Tucker model with a super-diagonal core.
inline TuckerModel cp_to_tucker(const CPModel& m) {
  const Index r = m.weights.size();
  const Index order = static_cast<Index>(m.factors.size());
  TuckerModel out;
  out.core = Tensord(Dims(static_cast<std::size_t>(order), r));
  for (Index k = 0; k < r; ++k) {
    Dims idx(static_cast<std::size_t>(order), k);
    out.core(idx) = m.weights(k);
  }
  out.factors = m.factors;
  out.fit_error = m.fit_error;
  return out;
}

/// Penalized Tucker: block-coordinate descent with per-mode constraint
/// updates and pseudo-inverse core recovery. Independence constraints are
/// handled by the two-stage multiway BSS refinement, not here.
inline TuckerModel penalized_tucker(const Tensord& t, const Dims& ranks,
                                    const std::vector<ConstraintSpec>& specs,
                                    const std::vector<double>& alphas, int max_iters = 200,
                                    double tol = 1e-8) {
  detail::check_ranks(t, ranks);
  if (specs.size() != static_cast<std::size_t>(t.order()) || alphas.size() != specs.size())
    throw InvalidArgumentError("penalized_tucker: one spec and alpha per mode");
  for (double a : alphas)
    if (a < 0) throw InvalidArgumentError("penalty weights must be >= 0");
  for (const auto& s : specs)
    if (s.kind == Constraint::Independent)
      throw UnsupportedError("independence constraints: use mwbss_refine");

  TuckerModel m = hosvd(t, ranks);
  for (Index n = 0; n < t.order(); ++n)
    if (specs[static_cast<std::size_t>(n)].kind == Constraint::Nonnegative)
      m.factors[static_cast<std::size_t>(n)] =
          m.factors[static_cast<std::size_t>(n)].cwiseAbs();
  m.core = core_project(t, m.factors);

  auto penalty = [&](Index n) {
    const Matrixd& u = m.factors[static_cast<std::size_t>(n)];
    double a = alphas[static_cast<std::size_t>(n)];
    switch (specs[static_cast<std::size_t>(n)].kind) {
      case Constraint::Sparse: return a * u.cwiseAbs().sum();
      case Constraint::Smooth: return a * (detail::second_difference(u.rows()) * u).squaredNorm();
      default: return 0.0;
    }
  };
  auto objective = [&]() {
    double f = (t.data() - tucker_reconstruct(m).data()).squaredNorm();
    for (Index n = 0; n < t.order(); ++n) f += penalty(n);
    return f;
  };

  const double tn = frobenius_norm(t);
  std::vector<double> obj_trace{objective()};
  for (int it = 0; it < max_iters; ++it) {
    for (Index n = 0; n < t.order(); ++n) {
      auto un = static_cast<std::size_t>(n);
      // expand the core through every other mode's factor: J_n x prod(I_other)
      Tensord expanded = m.core;
      for (Index m2 = 0; m2 < t.order(); ++m2)
        if (m2 != n)
          expanded = mode_product<double>(expanded, m.factors[static_cast<std::size_t>(m2)], m2);
      Matrixd big = unfold(expanded, n);
      Matrixd yn = unfold(t, n);
      Matrixd gram = big * big.transpose();
      Matrixd cross = yn * big.transpose();  // I_n x J_n
      double a = alphas[un];
      switch (specs[un].kind) {
        case Constraint::Unconstrained:
          m.factors[un] = cross * pseudo_inverse<double>(gram);
          break;
        case Constraint::Orthogonal: {
          Eigen::JacobiSVD<Matrixd> svd(cross, Eigen::ComputeThinU | Eigen::ComputeThinV);
          m.factors[un] = svd.matrixU() * svd.matrixV().transpose();
          break;
        }
        case Constraint::Nonnegative: {
          Matrixd& u = m.factors[un];
          for (int pass = 0; pass < 3; ++pass)
            for (Index k = 0; k < u.cols(); ++k) {
              if (gram(k, k) <= 1e-14) { u.col(k).setZero(); continue; }
              u.col(k) = (u.col(k) + (cross.col(k) - u * gram.col(k)) / gram(k, k)).cwiseMax(0.0);
            }
          break;
        }
        case Constraint::Sparse: {
          Matrixd& u = m.factors[un];
          for (int pass = 0; pass < 3; ++pass)
            for (Index k = 0; k < u.cols(); ++k) {
              if (gram(k, k) <= 1e-14) continue;
              Eigen::VectorXd rcol = u.col(k) + (cross.col(k) - u * gram.col(k)) / gram(k, k);
              double thr = a / (2.0 * gram(k, k));
              for (Index i = 0; i < rcol.size(); ++i)
                u(i, k) = detail::soft_threshold(rcol(i), thr);
            }
          break;
        }
        case Constraint::Smooth: {
          Matrixd l = detail::second_difference(t.dim(n));
          Matrixd ltl = l.transpose() * l;
          Eigen::SelfAdjointEigenSolver<Matrixd> eig(gram);
          Matrixd rhs = cross * eig.eigenvectors();
          Matrixd ut(t.dim(n), ranks[un]);
          for (Index k = 0; k < ranks[un]; ++k) {
            Matrixd sys = a * ltl;
            sys.diagonal().array() += std::max(eig.eigenvalues()(k), 1e-14);
            ut.col(k) = sys.ldlt().solve(rhs.col(k));
          }
          m.factors[un] = ut * eig.eigenvectors().transpose();
          break;
        }
        case Constraint::Independent:
          break;  // rejected above
      }
    }
    m.core = core_project(t, m.factors);
    double obj = objective();
    double prev = obj_trace.back();
    obj_trace.push_back(obj);
    double fit = (t.data() - tucker_reconstruct(m).data()).norm();
    m.fit_error = tn > 0 ? fit / tn : fit;
    m.fit_trace.push_back(obj);  // trace carries the penalized objective
    if (prev - obj < tol * std::max(prev, 1e-30)) break;
  }
  return m;
}

/// One block of the averaged block-oriented decomposition.
struct BodBlock {
  Tensord core;
  Matrixd factor;
  Index mode;
};

struct BodResult {
  std::vector<BodBlock> blocks;
  double residual = 0.0;                 // relative Frobenius
  std::vector<double> residual_trace;
};

/// Fit t as the average of one Tucker-1 term per listed mode by block
/// coordinate updates (truncated SVD of each block's residual).
inline BodResult bod_decompose(const Tensord& t, const Dims& ranks, int max_iters = 100,
                               double tol = 1e-8, std::vector<Index> modes = {}) {
  if (modes.empty())
    for (Index n = 0; n < t.order(); ++n) modes.push_back(n);
  if (ranks.size() != modes.size())
    throw InvalidRankError("bod_decompose: one rank per block");
  for (std::size_t k = 0; k < modes.size(); ++k)
    if (ranks[k] < 1 || ranks[k] > t.dim(modes[k]))
      throw InvalidRankError("bod_decompose: rank out of range");
  const double nb = static_cast<double>(modes.size());
  const double tn = frobenius_norm(t);

  BodResult r;
  std::vector<Tensord> recon;
  for (std::size_t k = 0; k < modes.size(); ++k) {
    BodBlock blk;
    blk.mode = modes[k];
    Dims cd = t.dims();
    cd[static_cast<std::size_t>(blk.mode)] = ranks[k];
    blk.core = Tensord(cd);
    blk.factor = Matrixd::Zero(t.dim(blk.mode), ranks[k]);
    r.blocks.push_back(std::move(blk));
    recon.push_back(Tensord(t.dims()));
  }

  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iters; ++it) {
    for (std::size_t k = 0; k < r.blocks.size(); ++k) {
      Tensord resid = t;
      for (std::size_t m2 = 0; m2 < r.blocks.size(); ++m2)
        if (m2 != k) resid.data() -= recon[m2].data() / nb;
      auto [core, factor] = tucker1(resid, r.blocks[k].mode, ranks[k]);
      core.data() *= nb;  // the model carries an explicit 1/N weight
      r.blocks[k].core = std::move(core);
      r.blocks[k].factor = std::move(factor);
      recon[k] = mode_product<double>(r.blocks[k].core, r.blocks[k].factor, r.blocks[k].mode);
    }
    Tensord approx(t.dims());
    for (const auto& rc : recon) approx.data() += rc.data() / nb;
    double res = (t.data() - approx.data()).norm();
    double rel = tn > 0 ? res / tn : res;
    r.residual_trace.push_back(rel);
    r.residual = rel;
    if (prev - rel < tol * std::max(prev, 1e-30)) break;
    prev = rel;
  }
  return r;
}

// ---- model directory serialization (TNSR files + key=value manifest) ----

inline void save_tucker_model(const std::filesystem::path& dir, const TuckerModel& m,
                              const std::string& algorithm, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  write_tensor(dir / "core.tnsr", m.core);
  std::string ranks;
  for (std::size_t n = 0; n < m.factors.size(); ++n) {
    write_matrix(dir / ("factor_" + std::to_string(n) + ".tnsr"), m.factors[n]);
    if (n) ranks += ",";
    ranks += std::to_string(m.factors[n].cols());
  }
  write_manifest(dir / "manifest.txt",
                 {{"order", std::to_string(m.factors.size())},
                  {"ranks", ranks},
                  {"fit_error", format_double(m.fit_error)},
                  {"algorithm", algorithm},
                  {"seed", std::to_string(seed)}});
}

inline TuckerModel load_tucker_model(const std::filesystem::path& dir) {
  auto mf = read_manifest(dir / "manifest.txt");
  TuckerModel m;
  m.core = read_tensor(dir / "core.tnsr");
  std::size_t order = std::stoul(mf.at("order"));
  for (std::size_t n = 0; n < order; ++n)
    m.factors.push_back(read_matrix(dir / ("factor_" + std::to_string(n) + ".tnsr")));
  m.fit_error = std::stod(mf.at("fit_error"));
  return m;
}

}  // namespace mtd
