#pragma once

#include <string>
#include <vector>

#include "mtd/factor2d.hpp"
#include "mtd/tucker.hpp"

namespace mtd {

/// Multiway BSS output: a Tucker model whose factors came from per-mode
/// constrained factorizations, plus per-mode engine diagnostics.
struct MwbssResult {
  TuckerModel model;
  std::vector<ConstraintSpec> per_mode_constraint;
  std::vector<FactorPair> diagnostics;
};

namespace detail {

// Constrained factorization of one mode. The engine sees unfold(t,n)^T so
// that components live along the mode dimension (b = U^(n)). Large sample
// dimensions are compressed to 4*rank rows by truncated SVD first; skipped
// for nonnegative engines, whose input must stay entrywise nonnegative.
inline FactorPair mode_factor(const Tensord& t, Index mode, Index rank,
                              const ConstraintSpec& spec) {
  Matrixd y = unfold(t, mode).transpose();
  const Index reduced = 4 * rank;
  if (spec.kind != Constraint::Nonnegative && y.rows() > reduced) {
    Eigen::JacobiSVD<Matrixd> svd(y, Eigen::ComputeThinU);
    Index keep = std::min(reduced, svd.singularValues().size());
    y = (svd.matrixU().leftCols(keep).transpose() * y).eval();
  }
  try {
    return bss_factor(y, rank, spec);
  } catch (Error& e) {
    throw Error(e.code(), "mode " + std::to_string(mode) + ": " + e.what());
  }
}

}  // namespace detail

/// Unfolding approach: constrained factorization per mode, core by
/// pseudo-inverse projection. No cross-mode monotonicity is claimed.
inline MwbssResult mwbss_unfold(const Tensord& t, const Dims& ranks,
                                const std::vector<ConstraintSpec>& specs) {
  detail::check_ranks(t, ranks);
  if (specs.size() != static_cast<std::size_t>(t.order()))
    throw InvalidArgumentError("one constraint spec per mode required");
  MwbssResult r;
  r.per_mode_constraint = specs;
  for (Index n = 0; n < t.order(); ++n) {
    auto un = static_cast<std::size_t>(n);
    FactorPair p = detail::mode_factor(t, n, ranks[un], specs[un]);
    r.model.factors.push_back(p.b);
    r.diagnostics.push_back(std::move(p));
  }
  r.model.core = core_project(t, r.model.factors);
  r.model.fit_error = fit_error(t, r.model);
  return r;
}

/// Two-stage refinement: unconstrained Tucker (HOOI) first, then a square
/// constrained factorization of each factor matrix, with the core rotated
/// by the estimated mixing transposes.
inline MwbssResult mwbss_refine(const Tensord& t, const Dims& ranks,
                                const std::vector<ConstraintSpec>& specs, int max_iters = 200,
                                double tol = 1e-8) {
  detail::check_ranks(t, ranks);
  if (specs.size() != static_cast<std::size_t>(t.order()))
    throw InvalidArgumentError("one constraint spec per mode required");
  TuckerModel stage1 = hooi(t, ranks, max_iters, tol);
  MwbssResult r;
  r.per_mode_constraint = specs;
  r.model.core = stage1.core;
  for (Index n = 0; n < t.order(); ++n) {
    auto un = static_cast<std::size_t>(n);
    const Matrixd& u = stage1.factors[un];
    FactorPair p;
    try {
      // U^(n) ~ b a^T with b the refined factor, a the square mixing.
      p = bss_factor(u.transpose(), ranks[un], specs[un]);
    } catch (RankDeficientError& e) {
      p.b = u;
      p.a = Matrixd::Identity(ranks[un], ranks[un]);
      p.final_objective = 0.0;
      p.warning = std::string("stage-2 rank deficiency, identity refinement: ") + e.what();
    }
    r.model.factors.push_back(p.b);
    r.model.core = mode_product<double>(r.model.core, p.a.transpose(), n);
    r.diagnostics.push_back(std::move(p));
  }
  r.model.fit_trace = stage1.fit_trace;
  r.model.fit_error = fit_error(t, r.model);
  return r;
}

/// Plain-text diagnostics report: per-mode constraint, iterations, and
/// objective traces.
inline std::string mwbss_report(const MwbssResult& r) {
  std::string out;
  out += "fit_error=" + format_double(r.model.fit_error) + "\n";
  for (std::size_t n = 0; n < r.diagnostics.size(); ++n) {
    const auto& d = r.diagnostics[n];
    out += "mode=" + std::to_string(n);
    out += " constraint=" + std::string(constraint_name(r.per_mode_constraint[n].kind));
    out += " iterations=" + std::to_string(d.iterations_run);
    out += " objective=" + format_double(d.final_objective);
    if (!d.warning.empty()) out += " warning=" + d.warning;
    out += "\ntrace=";
    for (std::size_t i = 0; i < d.objective_trace.size(); ++i) {
      if (i) out += ",";
      out += format_double(d.objective_trace[i]);
    }
    out += "\n";
  }
  return out;
}

}  // namespace mtd
