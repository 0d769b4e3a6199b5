#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "mtd/features.hpp"
#include "mtd/synth.hpp"
#include "test_util.hpp"

using namespace mtd;

namespace {

double silhouette(const std::vector<Tensord>& feats, const std::vector<int>& labels) {
  double total = 0.0;
  for (std::size_t i = 0; i < feats.size(); ++i) {
    std::map<int, std::pair<double, int>> acc;  // class -> (distance sum, count)
    for (std::size_t k = 0; k < feats.size(); ++k) {
      if (k == i) continue;
      acc[labels[k]].first += (feats[i].data() - feats[k].data()).norm();
      acc[labels[k]].second += 1;
    }
    double a = acc[labels[i]].first / acc[labels[i]].second;
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [cls, da] : acc)
      if (cls != labels[i]) b = std::min(b, da.first / da.second);
    total += (b - a) / std::max(a, b);
  }
  return total / static_cast<double>(feats.size());
}

}  // namespace

TEST_CASE("labeled set validation") {
  LabeledTensorSet s;
  CHECK_THROWS_AS(s.validate(), InvalidInputError);
  s.samples.push_back(testutil::random_tensor({3, 3}, 1));
  CHECK_THROWS_AS(s.validate(), InvalidInputError);  // no labels
  s.labels.push_back(0);
  CHECK_NOTHROW(s.validate());
  s.samples.push_back(testutil::random_tensor({3, 4}, 2));
  s.labels.push_back(1);
  CHECK_THROWS_AS(s.validate(), ShapeError);
}

TEST_CASE("stack_last puts the sample index last and fastest") {
  std::vector<Tensord> samples{testutil::random_tensor({2, 3}, 5),
                               testutil::random_tensor({2, 3}, 6)};
  Tensord c = detail::stack_last(samples);
  REQUIRE(c.dims() == Dims{2, 3, 2});
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j < 3; ++j)
      for (Index k = 0; k < 2; ++k)
        CHECK(c({i, j, k}) == samples[static_cast<std::size_t>(k)]({i, j}));
  // slices invert the stacking exactly
  for (Index k = 0; k < 2; ++k) {
    Tensord s = detail::slice_last(c, k);
    CHECK((s.data() - samples[static_cast<std::size_t>(k)].data()).norm() == 0.0);
  }
}

TEST_CASE("extract_train features reproduce the generating cores for exact data") {
  auto corpus = synth::class_corpus({10, 9, 6}, {2, 2, 2}, 3, 8, 0, 0.0, 12);
  FeatureSet fs = extract_train(corpus.train, {2, 2, 2});
  CHECK(fs.fit_error < 1e-8);
  REQUIRE(fs.features.size() == corpus.train.samples.size());
  // each feature reconstructs its own sample through the learned bases
  for (std::size_t i = 0; i < fs.features.size(); ++i) {
    TuckerModel m;
    m.core = fs.features[i];
    m.factors = fs.bases;
    Tensord rec = tucker_reconstruct(m);
    double rel = (rec.data() - corpus.train.samples[i].data()).norm() /
                 corpus.train.samples[i].data().norm();
    CHECK(rel < 1e-8);
  }
}

TEST_CASE("extract_train validation") {
  auto corpus = synth::class_corpus({4, 4}, {2, 2}, 2, 2, 0, 0.0, 1);
  CHECK_THROWS_AS(extract_train(corpus.train, {2}), InvalidRankError);
  CHECK_THROWS_AS(extract_train(corpus.train, {5, 2}), InvalidRankError);
  LabeledTensorSet one;
  one.samples.push_back(corpus.train.samples[0]);
  one.labels.push_back(0);
  CHECK_THROWS_AS(extract_train(one, {2, 2}), InvalidInputError);
}

TEST_CASE("order-2 samples agree with the Tucker-2 path of the concatenation") {
  auto corpus = synth::class_corpus({8, 7}, {2, 2}, 2, 10, 0, 0.05, 3);
  FeatureSet fs = extract_train(corpus.train, {2, 2});

  // direct Tucker-2 on the order-3 stack; the effective sample-mode rank is
  // capped by the core size, so request min(K, J1*J2)
  Tensord concat = detail::stack_last(corpus.train.samples);
  Index k = std::min<Index>(static_cast<Index>(corpus.train.samples.size()), 4);
  TuckerModel t2 = hooi(concat, {2, 2, k}, 100, 1e-12);
  CHECK(std::abs(fs.fit_error - t2.fit_error) < 1e-8);
}

TEST_CASE("class-separated corpus yields separated features") {
  auto corpus = synth::class_corpus({10, 10, 6}, {2, 2, 2}, 3, 10, 0, 0.1, 9);
  FeatureSet fs = extract_train(corpus.train, {2, 2, 2});
  CHECK(silhouette(fs.features, fs.labels) > 0.5);
}

TEST_CASE("project_test transpose and pseudo-inverse paths agree for orthonormal bases") {
  std::mt19937_64 rng(30);
  Tensord x = synth::random_tensor({6, 5, 4}, rng);
  std::vector<Matrixd> bases{synth::random_orthonormal(6, 2, rng),
                             synth::random_orthonormal(5, 2, rng),
                             synth::random_orthonormal(4, 2, rng)};
  Tensord a = project_test(x, bases);
  Tensord b = core_project(x, bases);
  CHECK((a.data() - b.data()).norm() < 1e-10);
  // non-orthonormal bases take the pseudo-inverse route
  std::vector<Matrixd> skew = bases;
  skew[0] *= 2.0;
  Tensord c = project_test(x, skew);
  Tensord d = core_project(x, skew);
  CHECK((c.data() - d.data()).norm() < 1e-10);
  CHECK_THROWS_AS(project_test(x, {bases[0], bases[1]}), ShapeError);
}

TEST_CASE("knn classifies the held-out split of a separated corpus") {
  auto corpus = synth::class_corpus({12, 12, 6}, {2, 2, 2}, 3, 15, 6, 0.1, 21);
  FeatureSet fs = extract_train(corpus.train, {2, 2, 2});
  std::vector<Tensord> test_feats;
  for (const auto& x : corpus.test.samples) test_feats.push_back(project_test(x, fs.bases));
  std::vector<int> pred = classify_knn(fs, test_feats, 3);
  int correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == corpus.test.labels[i];
  CHECK(static_cast<double>(correct) / pred.size() >= 0.95);
}

TEST_CASE("knn parameter validation and deterministic ties") {
  FeatureSet fs;
  Tensord f0({2});
  f0.data() << 0.0, 0.0;
  Tensord f1({2});
  f1.data() << 1.0, 0.0;
  fs.features = {f0, f1};
  fs.labels = {1, 0};
  Tensord q({2});
  q.data() << 0.5, 0.0;  // exactly between both neighbours
  CHECK_THROWS_AS(classify_knn(fs, {q}, 0), InvalidArgumentError);
  CHECK_THROWS_AS(classify_knn(fs, {q}, 3), InvalidArgumentError);
  // k=2: one vote each, equal mean distance -> lowest class id wins
  CHECK(classify_knn(fs, {q}, 2)[0] == 0);
}

TEST_CASE("centroid classifier handles the corpus and flags dropped dims") {
  auto corpus = synth::class_corpus({12, 12, 6}, {2, 2, 2}, 3, 15, 6, 0.1, 22);
  FeatureSet fs = extract_train(corpus.train, {2, 2, 2});
  std::vector<Tensord> test_feats;
  for (const auto& x : corpus.test.samples) test_feats.push_back(project_test(x, fs.bases));
  std::string warning;
  std::vector<int> pred = classify_centroid(fs, test_feats, &warning);
  int correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == corpus.test.labels[i];
  CHECK(static_cast<double>(correct) / pred.size() >= 0.9);
  CHECK(warning.empty());

  // constant dimension across training features -> dropped with a warning
  FeatureSet degenerate;
  Tensord g0({2}), g1({2});
  g0.data() << 1.0, 5.0;
  g1.data() << -1.0, 5.0;
  degenerate.features = {g0, g1};
  degenerate.labels = {0, 1};
  std::string w2;
  Tensord q({2});
  q.data() << 0.9, 123.0;  // the constant dim must not dominate
  CHECK(classify_centroid(degenerate, {q}, &w2)[0] == 0);
  CHECK(!w2.empty());
}
