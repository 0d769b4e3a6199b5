#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "mtd/mbss.hpp"
#include "mtd/metrics.hpp"
#include "mtd/tucker.hpp"

namespace mtd {

/// Joint decomposition of S subjects with per-mode common/individual split.
struct LinkedModel {
  std::vector<TuckerModel> subject_models;
  Dims common_counts;                  // achieved R_n per mode
  std::vector<Matrixd> common_bases;   // I_n x R_n, unit columns
  // alignment[s][n]: permutation mapping original column order of subject
  // s's mode-n factor onto the stored [common | individual] order.
  std::vector<std::vector<std::vector<Index>>> alignment;
  std::vector<double> fit_errors;
  // Per-mode diagnostic: max cross-subject |corr| among individual columns.
  std::vector<double> individual_max_corr;
};

/// One identified cluster of matching columns across subjects.
struct CommonCluster {
  std::vector<Index> member;  // one column index per subject
  double mean_corr = 0.0;
};

struct CommonComponents {
  std::vector<CommonCluster> clusters;  // ordered by mean correlation desc
  Matrixd basis;                        // sign-aligned renormalized mean
};

/// Greedy clustering of per-subject factor columns by absolute Pearson
/// correlation. A cluster qualifies only if it takes exactly one column
/// from every subject with all pairwise |corr| >= threshold.
inline CommonComponents identify_common(const std::vector<Matrixd>& factors,
                                        double threshold = 0.9) {
  if (factors.empty()) throw InvalidInputError("identify_common: no factor matrices");
  if (threshold <= 0.0 || threshold > 1.0)
    throw InvalidArgumentError("threshold must be in (0, 1]");
  const std::size_t s = factors.size();
  const Index rows = factors[0].rows();
  for (const auto& f : factors)
    if (f.rows() != rows) throw ShapeError("identify_common: row counts differ");

  struct Candidate {
    std::vector<Index> member;
    double mean_corr;
    Index seed;
  };
  std::vector<Candidate> cands;
  for (Index j0 = 0; j0 < factors[0].cols(); ++j0) {
    Candidate c;
    c.member.assign(s, 0);
    c.member[0] = j0;
    bool ok = true;
    for (std::size_t sub = 1; sub < s; ++sub) {
      double best = -1.0;
      Index bj = -1;
      for (Index j = 0; j < factors[sub].cols(); ++j) {
        double corr = std::abs(pearson(factors[0].col(j0), factors[sub].col(j)));
        if (corr > best) best = corr, bj = j;
      }
      if (bj < 0) ok = false;
      c.member[sub] = bj;
    }
    if (!ok) continue;
    double total = 0.0;
    int pairs = 0;
    for (std::size_t a = 0; a < s && ok; ++a)
      for (std::size_t b2 = a + 1; b2 < s; ++b2) {
        double corr =
            std::abs(pearson(factors[a].col(c.member[a]), factors[b2].col(c.member[b2])));
        if (corr < threshold) {
          ok = false;
          break;
        }
        total += corr;
        ++pairs;
      }
    if (!ok) continue;
    c.mean_corr = pairs > 0 ? total / pairs : 1.0;
    c.seed = j0;
    cands.push_back(std::move(c));
  }
  std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.mean_corr != b.mean_corr) return a.mean_corr > b.mean_corr;
    return a.seed < b.seed;
  });

  CommonComponents out;
  std::vector<std::vector<bool>> used(s);
  for (std::size_t sub = 0; sub < s; ++sub)
    used[sub].assign(static_cast<std::size_t>(factors[sub].cols()), false);
  std::vector<Eigen::VectorXd> basis_cols;
  for (const auto& c : cands) {
    bool free_cols = true;
    for (std::size_t sub = 0; sub < s; ++sub)
      if (used[sub][static_cast<std::size_t>(c.member[sub])]) free_cols = false;
    if (!free_cols) continue;
    for (std::size_t sub = 0; sub < s; ++sub)
      used[sub][static_cast<std::size_t>(c.member[sub])] = true;
    // sign-aligned mean, renormalized
    Eigen::VectorXd ref = factors[0].col(c.member[0]);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(rows);
    for (std::size_t sub = 0; sub < s; ++sub) {
      Eigen::VectorXd col = factors[sub].col(c.member[sub]);
      if (pearson(ref, col) < 0) col = -col;
      acc += col;
    }
    acc /= static_cast<double>(s);
    double n = acc.norm();
    if (n > 0) acc /= n;
    basis_cols.push_back(std::move(acc));
    out.clusters.push_back({c.member, c.mean_corr});
  }
  out.basis = Matrixd(rows, static_cast<Index>(basis_cols.size()));
  for (std::size_t k = 0; k < basis_cols.size(); ++k)
    out.basis.col(static_cast<Index>(k)) = basis_cols[k];
  return out;
}

/// Linked multiway BSS across S subjects. Modes with R_n = J_n share one
/// factor estimated from the concatenated unfoldings; modes with
/// 0 < R_n < J_n estimate per-subject factors and partition them through
/// identify_common; R_n = 0 modes are fully individual.
inline LinkedModel linked_decompose(const std::vector<Tensord>& xs, const Dims& ranks,
                                    const Dims& common_counts,
                                    const std::vector<ConstraintSpec>& specs,
                                    double threshold = 0.9) {
  if (xs.empty()) throw InvalidInputError("linked_decompose: no subjects");
  const Index order = xs.front().order();
  for (const auto& x : xs)
    if (x.dims() != xs.front().dims()) throw ShapeError("subjects must share dims");
  detail::check_ranks(xs.front(), ranks);
  if (common_counts.size() != ranks.size() || specs.size() != ranks.size())
    throw InvalidArgumentError("one rank, common count, and spec per mode");
  for (std::size_t n = 0; n < ranks.size(); ++n)
    if (common_counts[n] < 0 || common_counts[n] > ranks[n])
      throw InvalidRankError("common count must be in [0, rank]");

  const std::size_t s = xs.size();
  LinkedModel lm;
  lm.subject_models.resize(s);
  lm.alignment.assign(s, std::vector<std::vector<Index>>(static_cast<std::size_t>(order)));
  lm.common_counts.assign(static_cast<std::size_t>(order), 0);
  lm.common_bases.resize(static_cast<std::size_t>(order));
  lm.individual_max_corr.assign(static_cast<std::size_t>(order), 0.0);
  for (auto& m : lm.subject_models) m.factors.resize(static_cast<std::size_t>(order));

  for (Index n = 0; n < order; ++n) {
    auto un = static_cast<std::size_t>(n);
    std::vector<Index> identity_perm(static_cast<std::size_t>(ranks[un]));
    for (Index j = 0; j < ranks[un]; ++j) identity_perm[static_cast<std::size_t>(j)] = j;

    if (common_counts[un] == ranks[un] && s > 1) {
      // Shared mode: factor once from all subjects' unfoldings side by side.
      std::vector<Matrixd> unf;
      Index cols = 0;
      for (const auto& x : xs) {
        unf.push_back(unfold(x, n));
        cols += unf.back().cols();
      }
      Matrixd all(unf[0].rows(), cols);
      Index at = 0;
      for (const auto& u : unf) {
        all.middleCols(at, u.cols()) = u;
        at += u.cols();
      }
      Tensord wrapped = fold<double>(all, 0, Dims{all.rows(), all.cols()});
      FactorPair p = detail::mode_factor(wrapped, 0, ranks[un], specs[un]);
      for (std::size_t sub = 0; sub < s; ++sub) {
        lm.subject_models[sub].factors[un] = p.b;
        lm.alignment[sub][un] = identity_perm;
      }
      lm.common_counts[un] = ranks[un];
      lm.common_bases[un] = p.b;
      for (Index k = 0; k < lm.common_bases[un].cols(); ++k) {
        double nn = lm.common_bases[un].col(k).norm();
        if (nn > 0) lm.common_bases[un].col(k) /= nn;
      }
      continue;
    }

    // Per-subject estimation.
    std::vector<Matrixd> subject_factors;
    for (const auto& x : xs)
      subject_factors.push_back(detail::mode_factor(x, n, ranks[un], specs[un]).b);

    if (common_counts[un] == 0 || s == 1) {
      for (std::size_t sub = 0; sub < s; ++sub) {
        lm.subject_models[sub].factors[un] = subject_factors[sub];
        lm.alignment[sub][un] = identity_perm;
      }
      lm.common_bases[un] = Matrixd(subject_factors[0].rows(), 0);
    } else {
      CommonComponents cc = identify_common(subject_factors, threshold);
      Index r = std::min<Index>(common_counts[un], static_cast<Index>(cc.clusters.size()));
      lm.common_counts[un] = r;
      lm.common_bases[un] = cc.basis.leftCols(r);
      for (std::size_t sub = 0; sub < s; ++sub) {
        std::vector<Index> perm;
        std::vector<bool> taken(static_cast<std::size_t>(ranks[un]), false);
        for (Index c = 0; c < r; ++c) {
          Index col = cc.clusters[static_cast<std::size_t>(c)].member[sub];
          perm.push_back(col);
          taken[static_cast<std::size_t>(col)] = true;
        }
        for (Index j = 0; j < ranks[un]; ++j)
          if (!taken[static_cast<std::size_t>(j)]) perm.push_back(j);
        Matrixd reordered(subject_factors[sub].rows(), ranks[un]);
        for (Index j = 0; j < ranks[un]; ++j) {
          Eigen::VectorXd col = subject_factors[sub].col(perm[static_cast<std::size_t>(j)]);
          if (j < r && pearson(lm.common_bases[un].col(j), col) < 0) col = -col;
          reordered.col(j) = col;
        }
        lm.subject_models[sub].factors[un] = reordered;
        lm.alignment[sub][un] = perm;
      }
      // Diagnostic: how correlated the individual components still are.
      double worst = 0.0;
      for (std::size_t a = 0; a < s; ++a)
        for (std::size_t b2 = a + 1; b2 < s; ++b2)
          for (Index i = r; i < ranks[un]; ++i)
            for (Index j = r; j < ranks[un]; ++j)
              worst = std::max(worst,
                               std::abs(pearson(lm.subject_models[a].factors[un].col(i),
                                                lm.subject_models[b2].factors[un].col(j))));
      lm.individual_max_corr[un] = worst;
      continue;
    }
  }

  for (std::size_t sub = 0; sub < s; ++sub) {
    auto& m = lm.subject_models[sub];
    m.core = core_project(xs[sub], m.factors);
    m.fit_error = fit_error(xs[sub], m);
    lm.fit_errors.push_back(m.fit_error);
  }
  return lm;
}

/// Averaged block-tensor model: fit the elementwise mean of the subjects'
/// tensors as a sum of S Tucker terms by block-coordinate ALS.
struct BtdAverageResult {
  std::vector<TuckerModel> blocks;
  double residual = 0.0;
  std::vector<double> residual_trace;
};

inline BtdAverageResult btd_average(const std::vector<Tensord>& xs, const Dims& ranks,
                                    int max_iters = 50, double tol = 1e-8) {
  if (xs.empty()) throw InvalidInputError("btd_average: no subjects");
  for (const auto& x : xs)
    if (x.dims() != xs.front().dims()) throw ShapeError("subjects must share dims");
  Tensord xbar = xs.front();
  for (std::size_t i = 1; i < xs.size(); ++i) xbar.data() += xs[i].data();
  xbar.data() /= static_cast<double>(xs.size());
  detail::check_ranks(xbar, ranks);

  const std::size_t s = xs.size();
  const double tn = frobenius_norm(xbar);
  BtdAverageResult r;
  r.blocks.resize(s);
  std::vector<Tensord> recon(s, Tensord(xbar.dims()));
  std::vector<bool> initialized(s, false);

  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iters; ++it) {
    for (std::size_t k = 0; k < s; ++k) {
      Tensord resid = xbar;
      for (std::size_t m2 = 0; m2 < s; ++m2)
        if (m2 != k) resid.data() -= recon[m2].data();
      if (!initialized[k]) {
        r.blocks[k] = hooi(resid, ranks, 50, 1e-10);
        initialized[k] = true;
      } else {
        // warm-started orthogonal iteration sweeps on this block's residual
        TuckerModel& m = r.blocks[k];
        for (int sweep = 0; sweep < 5; ++sweep)
          for (Index n = 0; n < resid.order(); ++n) {
            Tensord w = detail::project_all_but(resid, m.factors, n);
            m.factors[static_cast<std::size_t>(n)] =
                detail::leading_left_singular(unfold(w, n), ranks[static_cast<std::size_t>(n)]);
          }
        m.core = detail::project_all_but(resid, m.factors, -1);
      }
      recon[k] = tucker_reconstruct(r.blocks[k]);
    }
    Tensord approx(xbar.dims());
    for (const auto& rc : recon) approx.data() += rc.data();
    double rel = tn > 0 ? (xbar.data() - approx.data()).norm() / tn
                        : (xbar.data() - approx.data()).norm();
    r.residual_trace.push_back(rel);
    r.residual = rel;
    if (prev - rel < tol * std::max(prev, 1e-30)) break;
    prev = rel;
  }
  return r;
}

}  // namespace mtd
