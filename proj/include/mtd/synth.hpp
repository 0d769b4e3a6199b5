#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "mtd/features.hpp"
#include "mtd/tucker.hpp"

namespace mtd::synth {

inline Matrixd random_gaussian(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrixd m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = gauss(rng);
  return m;
}

inline Matrixd random_orthonormal(Index rows, Index cols, std::mt19937_64& rng) {
  Matrixd g = random_gaussian(rows, cols, rng);
  Eigen::HouseholderQR<Matrixd> qr(g);
  Matrixd q = qr.householderQ() * Matrixd::Identity(rows, cols);
  return q;
}

inline Tensord random_tensor(const Dims& dims, std::mt19937_64& rng) {
  Tensord t(dims);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = gauss(rng);
  return t;
}

struct TuckerTruth {
  Tensord tensor;
  TuckerModel truth;
};

/// Random Tucker tensor with orthonormal factors plus Gaussian noise.
inline TuckerTruth random_tucker(const Dims& dims, const Dims& ranks, double noise_sigma,
                                 std::uint64_t seed, bool nonnegative = false) {
  std::mt19937_64 rng(seed);
  TuckerTruth out;
  out.truth.core = random_tensor(ranks, rng);
  for (std::size_t n = 0; n < dims.size(); ++n) {
    Matrixd u = random_orthonormal(dims[n], ranks[n], rng);
    out.truth.factors.push_back(nonnegative ? u.cwiseAbs().eval() : u);
  }
  if (nonnegative) out.truth.core.data() = out.truth.core.data().cwiseAbs();
  out.tensor = tucker_reconstruct(out.truth);
  if (noise_sigma > 0) {
    std::normal_distribution<double> gauss(0.0, noise_sigma);
    for (Index i = 0; i < out.tensor.size(); ++i) {
      double e = gauss(rng);
      out.tensor.data()[i] += nonnegative ? std::abs(e) : e;
    }
  }
  return out;
}

struct CPTruth {
  Tensord tensor;
  CPModel truth;
};

/// Random CP tensor with factor collinearity bounded below the given cap.
inline CPTruth random_cp(const Dims& dims, Index r, double noise_sigma, std::uint64_t seed,
                         double max_collinearity = 0.5) {
  std::mt19937_64 rng(seed);
  CPTruth out;
  out.truth.weights = Eigen::VectorXd::LinSpaced(r, 1.0, static_cast<double>(r)).reverse();
  for (std::size_t n = 0; n < dims.size(); ++n) {
    Matrixd f;
    for (int attempt = 0; attempt < 200; ++attempt) {
      f = random_gaussian(dims[n], r, rng);
      for (Index k = 0; k < r; ++k) f.col(k).normalize();
      double worst = 0.0;
      for (Index i = 0; i < r; ++i)
        for (Index j = i + 1; j < r; ++j)
          worst = std::max(worst, std::abs(f.col(i).dot(f.col(j))));
      if (worst < max_collinearity) break;
    }
    out.truth.factors.push_back(f);
  }
  out.tensor = cp_reconstruct(out.truth);
  if (noise_sigma > 0) {
    std::normal_distribution<double> gauss(0.0, noise_sigma);
    for (Index i = 0; i < out.tensor.size(); ++i) out.tensor.data()[i] += gauss(rng);
  }
  return out;
}

struct IcaTruth {
  Matrixd observed;  // I x T mixtures
  Matrixd mixing;    // I x J
  Matrixd sources;   // T x J, zero mean unit variance, mutually independent
};

/// Linear mixtures of independent non-Gaussian sources (uniform noise,
/// sine, sawtooth, bimodal), standardized to zero mean unit variance.
inline IcaTruth ica_mixtures(Index n_sources, Index samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  IcaTruth out;
  out.sources = Matrixd(samples, n_sources);
  for (Index j = 0; j < n_sources; ++j) {
    double phase = unif(rng) * std::numbers::pi;
    double freq = 0.01 + 0.05 * std::abs(unif(rng));
    for (Index t = 0; t < samples; ++t) {
      double v = 0.0;
      switch (j % 4) {
        case 0: v = unif(rng); break;
        case 1: v = std::sin(freq * static_cast<double>(t) + phase); break;
        case 2: {
          double x = freq * static_cast<double>(t) + phase;
          v = 2.0 * (x / (2 * std::numbers::pi) - std::floor(x / (2 * std::numbers::pi) + 0.5));
          break;
        }
        default: v = (unif(rng) > 0 ? 1.0 : -1.0) + 0.3 * unif(rng); break;
      }
      out.sources(t, j) = v;
    }
    out.sources.col(j).array() -= out.sources.col(j).mean();
    double sd = out.sources.col(j).norm() / std::sqrt(static_cast<double>(samples));
    if (sd > 0) out.sources.col(j) /= sd;
  }
  // well-conditioned random mixing
  for (int attempt = 0; attempt < 100; ++attempt) {
    out.mixing = random_gaussian(n_sources, n_sources, rng);
    Eigen::JacobiSVD<Matrixd> svd(out.mixing);
    if (svd.singularValues()(n_sources - 1) > 0.2 * svd.singularValues()(0)) break;
  }
  out.observed = out.mixing * out.sources.transpose();
  return out;
}

struct ClassCorpus {
  LabeledTensorSet train, test;
  std::vector<Matrixd> bases;
};

/// Labeled corpus: shared orthonormal bases, class-specific core centroids,
/// Gaussian core jitter and entrywise observation noise.
inline ClassCorpus class_corpus(const Dims& dims, const Dims& ranks, int n_classes,
                                int train_per_class, int test_per_class, double noise_sigma,
                                std::uint64_t seed, double class_separation = 4.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  ClassCorpus out;
  for (std::size_t n = 0; n < dims.size(); ++n)
    out.bases.push_back(random_orthonormal(dims[n], ranks[n], rng));
  std::vector<Tensord> centroids;
  for (int c = 0; c < n_classes; ++c) {
    Tensord g = random_tensor(ranks, rng);
    g.data() *= class_separation;
    centroids.push_back(std::move(g));
  }
  auto make_sample = [&](int c) {
    Tensord core = centroids[static_cast<std::size_t>(c)];
    for (Index i = 0; i < core.size(); ++i) core.data()[i] += gauss(rng);
    std::vector<std::pair<Matrixd, Index>> fs;
    for (std::size_t n = 0; n < out.bases.size(); ++n)
      fs.emplace_back(out.bases[n], static_cast<Index>(n));
    Tensord x = multi_mode_product(core, fs);
    for (Index i = 0; i < x.size(); ++i) x.data()[i] += noise_sigma * gauss(rng);
    return x;
  };
  for (int c = 0; c < n_classes; ++c)
    for (int i = 0; i < train_per_class; ++i) {
      out.train.samples.push_back(make_sample(c));
      out.train.labels.push_back(c);
    }
  for (int c = 0; c < n_classes; ++c)
    for (int i = 0; i < test_per_class; ++i) {
      out.test.samples.push_back(make_sample(c));
      out.test.labels.push_back(c);
    }
  return out;
}

struct LinkedTruth {
  std::vector<Tensord> subjects;
  std::vector<Eigen::VectorXd> common_mode0;  // planted common mode-0 columns
};

/// S subjects sharing `n_common` mode-0 components; all other components
/// and cores are drawn per subject.
inline LinkedTruth linked_subjects(int s, const Dims& dims, const Dims& ranks, Index n_common,
                                   double noise_sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  LinkedTruth out;
  Matrixd common = random_orthonormal(dims[0], n_common, rng);
  for (Index k = 0; k < n_common; ++k) out.common_mode0.push_back(common.col(k));
  for (int sub = 0; sub < s; ++sub) {
    TuckerModel m;
    // mode-0 factor: shared block, then subject-specific orthogonal complement
    Matrixd u0 = random_orthonormal(dims[0], ranks[0], rng);
    u0.leftCols(n_common) = common;
    // re-orthogonalize the individual block against the common block
    for (Index j = n_common; j < ranks[0]; ++j) {
      for (Index i = 0; i < j; ++i) u0.col(j) -= u0.col(i).dot(u0.col(j)) * u0.col(i);
      u0.col(j).normalize();
    }
    m.factors.push_back(u0);
    for (std::size_t n = 1; n < dims.size(); ++n)
      m.factors.push_back(random_orthonormal(dims[n], ranks[n], rng));
    m.core = random_tensor(ranks, rng);
    // give every mode-0 component an orthogonal coefficient profile with a
    // distinct scale so the planted columns are the mode-0 singular vectors,
    // ordered common-first, and hence identifiable across subjects
    Matrixd g0 = unfold(m.core, 0);
    Eigen::HouseholderQR<Matrixd> cqr(g0.transpose());
    Matrixd q = cqr.householderQ() * Matrixd::Identity(g0.cols(), g0.rows());
    for (Index k = 0; k < ranks[0]; ++k)
      g0.row(k) = (10.0 - 1.5 * static_cast<double>(k)) * q.col(k).transpose();
    m.core = fold<double>(g0, 0, m.core.dims());
    Tensord x = tucker_reconstruct(m);
    for (Index i = 0; i < x.size(); ++i) x.data()[i] += noise_sigma * gauss(rng);
    out.subjects.push_back(std::move(x));
  }
  return out;
}

struct CoupledPair {
  Tensord x, y;
  Matrixd shared_mode0;  // planted shared mode-0 factor
};

/// Coupled tensor pair: mode-0 factor shared, y's per-sample latent rows a
/// fixed linear image of x's, so y is exactly predictable from x when
/// noise_sigma is zero.
inline CoupledPair coupled_pls_pair(const Dims& dims_x, const Dims& dims_y, const Dims& ranks_x,
                                    const Dims& ranks_y, double noise_sigma,
                                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  CoupledPair out;
  out.shared_mode0 = random_orthonormal(dims_x[0], ranks_x[0], rng);

  TuckerModel mx;
  mx.core = random_tensor(ranks_x, rng);
  mx.factors.push_back(out.shared_mode0);
  for (std::size_t n = 1; n < dims_x.size(); ++n)
    mx.factors.push_back(random_orthonormal(dims_x[n], ranks_x[n], rng));
  out.x = tucker_reconstruct(mx);

  Tensord lifted = mode_product<double>(mx.core, out.shared_mode0, 0);
  Matrixd lx = unfold(lifted, 0);  // per-sample x latents, I_1 x P_x
  Index py = 1;
  for (std::size_t n = 1; n < ranks_y.size(); ++n) py *= ranks_y[n];
  Matrixd link = random_gaussian(lx.cols(), py, rng) / std::sqrt(static_cast<double>(lx.cols()));
  Matrixd fy = lx * link;

  Dims lat_dims;
  lat_dims.push_back(dims_y[0]);
  for (std::size_t n = 1; n < ranks_y.size(); ++n) lat_dims.push_back(ranks_y[n]);
  Tensord ylat = fold<double>(fy, 0, lat_dims);
  Tensord y = ylat;
  for (std::size_t n = 1; n < dims_y.size(); ++n)
    y = mode_product<double>(y, random_orthonormal(dims_y[n], ranks_y[n], rng),
                             static_cast<Index>(n));
  out.y = std::move(y);

  if (noise_sigma > 0) {
    for (Index i = 0; i < out.x.size(); ++i) out.x.data()[i] += noise_sigma * gauss(rng);
    for (Index i = 0; i < out.y.size(); ++i) out.y.data()[i] += noise_sigma * gauss(rng);
  }
  return out;
}

}  // namespace mtd::synth
