#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "mtd/tucker.hpp"

namespace mtd {

/// K equally shaped samples with class labels.
struct LabeledTensorSet {
  std::vector<Tensord> samples;
  std::vector<int> labels;

  void validate() const {
    if (samples.empty()) throw InvalidInputError("empty sample set");
    if (labels.size() != samples.size())
      throw InvalidInputError("labels length must equal sample count");
    for (const auto& s : samples)
      if (s.dims() != samples.front().dims())
        throw ShapeError("all samples must share dims");
  }
};

/// Learned per-mode bases plus one core feature tensor per sample.
struct FeatureSet {
  std::vector<Matrixd> bases;     // bases[n]: I_n x J_n
  std::vector<Tensord> features;  // J_1 x .. x J_N per sample
  std::vector<int> labels;
  double fit_error = 0.0;
  std::string warning;
};

namespace detail {

inline Tensord stack_last(const std::vector<Tensord>& samples) {
  Dims dims = samples.front().dims();
  dims.push_back(static_cast<Index>(samples.size()));
  Tensord out(dims);
  const Index per = samples.front().size();
  // Interleave: sample index is the last (fastest-varying) index.
  for (std::size_t k = 0; k < samples.size(); ++k)
    for (Index i = 0; i < per; ++i)
      out.data()[i * static_cast<Index>(samples.size()) + static_cast<Index>(k)] =
          samples[k].data()[i];
  return out;
}

inline Tensord slice_last(const Tensord& t, Index k) {
  Dims dims(t.dims().begin(), t.dims().end() - 1);
  Tensord out(dims);
  Index last = t.dims().back();
  for (Index i = 0; i < out.size(); ++i) out.data()[i] = t.data()[i * last + k];
  return out;
}

inline bool is_orthonormal(const Matrixd& u, double tol = 1e-8) {
  return (u.transpose() * u - Matrixd::Identity(u.cols(), u.cols())).cwiseAbs().maxCoeff() <=
         tol;
}

}  // namespace detail

/// Learn shared bases from the (N+1)-order concatenation of all samples,
/// with the sample-mode factor pinned to the identity so each sample's
/// feature is an exact core slice.
inline FeatureSet extract_train(const LabeledTensorSet& set, const Dims& ranks,
                                int max_iters = 100, double tol = 1e-8) {
  set.validate();
  const Index k = static_cast<Index>(set.samples.size());
  if (k < 2) throw InvalidInputError("need at least two training samples");
  const Index order = set.samples.front().order();
  if (ranks.size() != static_cast<std::size_t>(order))
    throw InvalidRankError("one rank per sample mode required");
  for (Index n = 0; n < order; ++n)
    if (ranks[static_cast<std::size_t>(n)] < 1 ||
        ranks[static_cast<std::size_t>(n)] > set.samples.front().dim(n))
      throw InvalidRankError("rank out of range in mode " + std::to_string(n));

  Tensord concat = detail::stack_last(set.samples);
  const double tn = frobenius_norm(concat);

  FeatureSet fs;
  fs.labels = set.labels;
  for (Index n = 0; n < order; ++n)
    fs.bases.push_back(
        detail::leading_left_singular(unfold(concat, n), ranks[static_cast<std::size_t>(n)]));

  auto partial_project = [&](Index skip) {
    Tensord w = concat;
    for (Index n = 0; n < order; ++n) {
      if (n == skip) continue;
      w = mode_product<double>(w, fs.bases[static_cast<std::size_t>(n)].transpose(), n);
    }
    return w;
  };

  double prev = std::numeric_limits<double>::infinity();
  Tensord core = partial_project(-1);
  for (int it = 0; it < max_iters; ++it) {
    for (Index n = 0; n < order; ++n)
      fs.bases[static_cast<std::size_t>(n)] = detail::leading_left_singular(
          unfold(partial_project(n), n), ranks[static_cast<std::size_t>(n)]);
    core = partial_project(-1);
    double err2 = std::max(0.0, tn * tn - core.data().squaredNorm());
    double fit = tn > 0 ? std::sqrt(err2) / tn : 0.0;
    if (prev - fit < tol * std::max(prev, 1e-30)) {
      fs.fit_error = fit;
      break;
    }
    prev = fit;
    fs.fit_error = fit;
  }
  for (Index s = 0; s < k; ++s) fs.features.push_back(detail::slice_last(core, s));
  return fs;
}

/// Project a test sample onto learned bases: transpose filter when the bases
/// are orthonormal, pseudo-inverse projection otherwise.
inline Tensord project_test(const Tensord& x, const std::vector<Matrixd>& bases) {
  if (bases.size() != static_cast<std::size_t>(x.order()))
    throw ShapeError("project_test: one basis per mode required");
  bool ortho = true;
  for (std::size_t n = 0; n < bases.size(); ++n) {
    if (bases[n].rows() != x.dim(static_cast<Index>(n)))
      throw ShapeError("project_test: basis rows mismatch in mode " + std::to_string(n));
    if (!detail::is_orthonormal(bases[n])) ortho = false;
  }
  if (!ortho) return core_project(x, bases);
  Tensord g = x;
  for (Index n = 0; n < x.order(); ++n)
    g = mode_product<double>(g, bases[static_cast<std::size_t>(n)].transpose().eval(), n);
  return g;
}

/// K-nearest-neighbour vote on vectorized features; ties broken by smaller
/// mean distance, then by lowest class id.
inline std::vector<int> classify_knn(const FeatureSet& train,
                                     const std::vector<Tensord>& test_features, Index k) {
  if (train.features.empty()) throw InvalidInputError("empty training set");
  if (k < 1 || k > static_cast<Index>(train.features.size()))
    throw InvalidArgumentError("neighbor count out of range");
  std::vector<int> out;
  for (const auto& f : test_features) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t i = 0; i < train.features.size(); ++i)
      d.emplace_back((f.data() - train.features[i].data()).norm(), i);
    std::stable_sort(d.begin(), d.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::map<int, std::pair<int, double>> votes;  // class -> (count, distance sum)
    for (Index i = 0; i < k; ++i) {
      auto& v = votes[train.labels[d[static_cast<std::size_t>(i)].second]];
      v.first += 1;
      v.second += d[static_cast<std::size_t>(i)].first;
    }
    int best_class = -1;
    int best_count = -1;
    double best_mean = 0.0;
    for (const auto& [cls, v] : votes) {  // map iterates class ids ascending
      double mean = v.second / v.first;
      if (v.first > best_count ||
          (v.first == best_count && mean < best_mean - 1e-15)) {
        best_class = cls;
        best_count = v.first;
        best_mean = mean;
      }
    }
    out.push_back(best_class);
  }
  return out;
}

/// Nearest class centroid with per-dimension whitening; zero-variance
/// dimensions are dropped (flagged through the returned warning).
inline std::vector<int> classify_centroid(const FeatureSet& train,
                                          const std::vector<Tensord>& test_features,
                                          std::string* warning = nullptr) {
  if (train.features.empty()) throw InvalidInputError("empty training set");
  const Index p = train.features.front().size();
  const auto kn = train.features.size();

  std::map<int, std::pair<Eigen::VectorXd, int>> sums;
  for (std::size_t i = 0; i < train.features.size(); ++i) {
    auto it = sums.find(train.labels[i]);
    if (it == sums.end())
      sums.emplace(train.labels[i], std::make_pair(train.features[i].data().eval(), 1));
    else {
      it->second.first += train.features[i].data();
      it->second.second += 1;
    }
  }
  std::vector<std::pair<int, Eigen::VectorXd>> centroids;
  for (auto& [cls, sp] : sums) centroids.emplace_back(cls, sp.first / sp.second);

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(p), var = Eigen::VectorXd::Zero(p);
  for (const auto& f : train.features) mean += f.data();
  mean /= static_cast<double>(kn);
  for (const auto& f : train.features) var += (f.data() - mean).cwiseAbs2();
  var /= static_cast<double>(kn);
  Eigen::VectorXd scale(p);
  bool dropped = false;
  for (Index i = 0; i < p; ++i) {
    if (var(i) > 1e-24) {
      scale(i) = 1.0 / std::sqrt(var(i));
    } else {
      scale(i) = 0.0;  // dropped dimension
      dropped = true;
    }
  }
  if (dropped && warning) *warning = "zero-variance feature dimensions dropped";

  std::vector<int> out;
  for (const auto& f : test_features) {
    int best_class = -1;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [cls, c] : centroids) {  // ascending class ids: ties -> lowest id
      double d = ((f.data() - c).cwiseProduct(scale)).squaredNorm();
      if (d < best - 1e-15 || best_class < 0) {
        best = d;
        best_class = cls;
      }
    }
    out.push_back(best_class);
  }
  return out;
}

}  // namespace mtd
