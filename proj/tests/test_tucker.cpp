#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <random>

#include "mtd/metrics.hpp"
#include "mtd/synth.hpp"
#include "mtd/tucker.hpp"
#include "test_util.hpp"

using namespace mtd;

TEST_CASE("tucker_reconstruct of a 1x1x1 core is a scaled outer product") {
  TuckerModel m;
  m.core = Tensord({1, 1, 1});
  m.core({0, 0, 0}) = 2.5;
  Eigen::VectorXd a(2), b(3), c(2);
  a << 1, 2;
  b << 3, 4, 5;
  c << 6, 7;
  m.factors = {a, b, c};
  Tensord r = tucker_reconstruct(m);
  Tensord o = outer_product<double>({a, b, c});
  CHECK((r.data() - 2.5 * o.data()).norm() < 1e-12);
}

TEST_CASE("reconstruction satisfies the matricized identity with a Kronecker chain") {
  Tensord g = testutil::random_tensor({2, 3, 2}, 4);
  std::vector<Matrixd> us{testutil::random_matrix(4, 2, 5), testutil::random_matrix(5, 3, 6),
                          testutil::random_matrix(3, 2, 7)};
  TuckerModel m;
  m.core = g;
  m.factors = us;
  Tensord full = tucker_reconstruct(m);
  for (Index n = 0; n < 3; ++n) {
    Matrixd chain;  // earlier modes vary fastest in unfolding columns
    for (Index k = 2; k >= 0; --k) {
      if (k == n) continue;
      chain = chain.size() == 0 ? us[static_cast<std::size_t>(k)]
                                : kronecker<double>(chain, us[static_cast<std::size_t>(k)]);
    }
    Matrixd lhs = unfold(full, n);
    Matrixd rhs = us[static_cast<std::size_t>(n)] * unfold(g, n) * chain.transpose();
    CHECK((lhs - rhs).norm() < 1e-10);
  }
}

TEST_CASE("hosvd rank-1 tensor core magnitude is the norm product") {
  Eigen::VectorXd a(4), b(3), c(5);
  a << 1, -2, 0.5, 3;
  b << 2, 1, -1;
  c << 0.3, 1, 2, -0.5, 1;
  Tensord t = outer_product<double>({a, b, c});
  TuckerModel m = hosvd(t, {1, 1, 1});
  CHECK(std::abs(std::abs(m.core({0, 0, 0})) - a.norm() * b.norm() * c.norm()) < 1e-10);
  CHECK(m.fit_error < 1e-12);
}

TEST_CASE("hosvd full-rank reconstruction is exact") {
  Tensord t = testutil::random_tensor({4, 3, 5}, 8);
  TuckerModel m = hosvd(t, {4, 3, 5});
  CHECK(fit_error(t, m) < 1e-10);
}

TEST_CASE("hosvd factors are orthonormal") {
  Tensord t = testutil::random_tensor({6, 5, 4}, 2);
  TuckerModel m = hosvd(t, {3, 3, 2});
  for (const auto& u : m.factors)
    CHECK((u.transpose() * u - Matrixd::Identity(u.cols(), u.cols())).norm() < 1e-10);
}

TEST_CASE("hosvd rank validation") {
  Tensord t = testutil::random_tensor({3, 3, 3}, 1);
  CHECK_THROWS_AS(hosvd(t, {3, 3}), InvalidRankError);
  CHECK_THROWS_AS(hosvd(t, {3, 4, 3}), InvalidRankError);
  CHECK_THROWS_AS(hosvd(t, {0, 3, 3}), InvalidRankError);
}

TEST_CASE("hooi fit trace is monotone and never worse than hosvd") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Tensord t = testutil::random_tensor({6, 5, 4}, 100 + seed);
    TuckerModel h = hosvd(t, {3, 3, 2});
    TuckerModel o = hooi(t, {3, 3, 2});
    CHECK(o.fit_error <= h.fit_error + 1e-12);
    for (std::size_t i = 1; i < o.fit_trace.size(); ++i)
      CHECK(o.fit_trace[i] <= o.fit_trace[i - 1] + 1e-12);
  }
}

TEST_CASE("hooi recovers an exact low-rank tensor") {
  auto g = synth::random_tucker({8, 7, 6}, {3, 2, 2}, 0.0, 5);
  TuckerModel m = hooi(g.tensor, {3, 2, 2});
  CHECK(m.fit_error < 1e-10);
}

TEST_CASE("core_project recovers the generating core") {
  std::mt19937_64 rng(6);
  Tensord g0 = synth::random_tensor({2, 3, 2}, rng);
  std::vector<Matrixd> us{synth::random_gaussian(5, 2, rng), synth::random_gaussian(6, 3, rng),
                          synth::random_gaussian(4, 2, rng)};
  TuckerModel m;
  m.core = g0;
  m.factors = us;
  Tensord t = tucker_reconstruct(m);
  Tensord g = core_project(t, us);
  CHECK((g.data() - g0.data()).norm() < 1e-8);
}

TEST_CASE("core_project shape validation") {
  Tensord t = testutil::random_tensor({3, 3, 3}, 2);
  CHECK_THROWS_AS(core_project(t, {Matrixd::Ones(3, 2)}), ShapeError);
  std::vector<Matrixd> bad{Matrixd::Ones(4, 2), Matrixd::Ones(3, 2), Matrixd::Ones(3, 2)};
  CHECK_THROWS_AS(core_project(t, bad), ShapeError);
}

TEST_CASE("tucker1 error matches the discarded singular values") {
  Tensord t = testutil::random_tensor({5, 4, 3}, 9);
  for (Index mode = 0; mode < 3; ++mode) {
    Index j = 2;
    auto [core, u] = tucker1(t, mode, j);
    Tensord rec = mode_product<double>(core, u, mode);
    double err2 = (t.data() - rec.data()).squaredNorm();
    Eigen::JacobiSVD<Matrixd> svd(unfold(t, mode));
    double tail = svd.singularValues().tail(t.dim(mode) - j).squaredNorm();
    CHECK(std::abs(err2 - tail) < 1e-9);
  }
  CHECK_THROWS_AS(tucker1(t, 3, 1), InvalidModeError);
  CHECK_THROWS_AS(tucker1(t, 0, 6), InvalidRankError);
}

TEST_CASE("cp_reconstruct equals the Tucker expansion of the same model") {
  std::mt19937_64 rng(4);
  CPModel m;
  m.weights = Eigen::VectorXd(2);
  m.weights << 2.0, -1.5;
  m.factors = {synth::random_gaussian(4, 2, rng), synth::random_gaussian(3, 2, rng),
               synth::random_gaussian(5, 2, rng)};
  Tensord a = cp_reconstruct(m);
  Tensord b = tucker_reconstruct(cp_to_tucker(m));
  CHECK((a.data() - b.data()).norm() < 1e-12);
}

TEST_CASE("cp_als recovers well-separated rank-2 factors") {
  auto g = synth::random_cp({8, 7, 6}, 2, 0.0, 21);
  CPModel m = cp_als(g.tensor, 2, 300, 1e-10, 21);
  CHECK(m.fit_error < 1e-6);
  for (std::size_t n = 0; n < 3; ++n)
    CHECK(aligned_congruence(m.factors[n], g.truth.factors[n]) > 0.99);
}

TEST_CASE("cp_als fit trace is monotone nonincreasing") {
  Tensord t = testutil::random_tensor({5, 4, 3}, 33);
  CPModel m = cp_als(t, 3, 100, 1e-10, 33, /*restarts=*/1);
  for (std::size_t i = 1; i < m.fit_trace.size(); ++i)
    CHECK(m.fit_trace[i] <= m.fit_trace[i - 1] + 1e-9);
}

TEST_CASE("cp_als weights are sorted by magnitude, columns unit-norm") {
  auto g = synth::random_cp({6, 5, 4}, 3, 1e-4, 2);
  CPModel m = cp_als(g.tensor, 3, 200, 1e-10, 2);
  for (Index k = 1; k < 3; ++k)
    CHECK(std::abs(m.weights(k)) <= std::abs(m.weights(k - 1)) + 1e-12);
  for (const auto& f : m.factors)
    for (Index k = 0; k < f.cols(); ++k) CHECK(f.col(k).norm() == doctest::Approx(1.0));
}

TEST_CASE("penalized_tucker keeps nonnegative modes nonnegative with small fit error") {
  auto g = synth::random_tucker({8, 8, 8}, {2, 2, 2}, 0.0, 3, /*nonnegative=*/true);
  std::vector<ConstraintSpec> specs(3);
  for (auto& s : specs) s.kind = Constraint::Nonnegative;
  TuckerModel m = penalized_tucker(g.tensor, {2, 2, 2}, specs, {0, 0, 0}, 300, 1e-10);
  for (const auto& u : m.factors) CHECK((u.array() >= 0).all());
  CHECK(m.fit_error < 5e-2);
}

TEST_CASE("penalized_tucker objective trace nonincreasing with a sparse mode") {
  Tensord t = testutil::random_tensor({6, 6, 6}, 55);
  std::vector<ConstraintSpec> specs(3);
  specs[1].kind = Constraint::Sparse;
  TuckerModel m = penalized_tucker(t, {2, 2, 2}, specs, {0.0, 0.1, 0.0}, 60, 1e-12);
  for (std::size_t i = 1; i < m.fit_trace.size(); ++i)
    CHECK(m.fit_trace[i] <= m.fit_trace[i - 1] + 1e-8);
}

TEST_CASE("penalized_tucker rejects independence constraints") {
  Tensord t = testutil::random_tensor({4, 4, 4}, 1);
  std::vector<ConstraintSpec> specs(3);
  specs[0].kind = Constraint::Independent;
  CHECK_THROWS_AS(penalized_tucker(t, {2, 2, 2}, specs, {0, 0, 0}), UnsupportedError);
}

TEST_CASE("penalized_tucker orthogonal everywhere tracks hooi quality") {
  Tensord t = testutil::random_tensor({6, 5, 4}, 71);
  std::vector<ConstraintSpec> specs(3);
  for (auto& s : specs) s.kind = Constraint::Orthogonal;
  TuckerModel m = penalized_tucker(t, {3, 2, 2}, specs, {0, 0, 0}, 100, 1e-10);
  TuckerModel h = hooi(t, {3, 2, 2});
  CHECK(m.fit_error <= h.fit_error + 1e-6);
}

TEST_CASE("bod_decompose reproduces an exact average of Tucker-1 terms") {
  std::mt19937_64 rng(8);
  Dims dims{5, 5, 5};
  Tensord t(dims);
  Dims ranks{2, 2, 2};
  for (Index n = 0; n < 3; ++n) {
    Dims cd = dims;
    cd[static_cast<std::size_t>(n)] = ranks[static_cast<std::size_t>(n)];
    Tensord core = synth::random_tensor(cd, rng);
    Matrixd u = synth::random_orthonormal(dims[static_cast<std::size_t>(n)],
                                          ranks[static_cast<std::size_t>(n)], rng);
    t.data() += mode_product<double>(core, u, n).data() / 3.0;
  }
  BodResult r = bod_decompose(t, ranks, 2000, 1e-15);
  CHECK(r.residual < 1e-3);
}

TEST_CASE("bod_decompose residual trace is monotone") {
  Tensord t = testutil::random_tensor({4, 4, 4}, 3);
  BodResult r = bod_decompose(t, {2, 2, 2});
  for (std::size_t i = 1; i < r.residual_trace.size(); ++i)
    CHECK(r.residual_trace[i] <= r.residual_trace[i - 1] + 1e-10);
}

TEST_CASE("bod_decompose single listed mode reduces to tucker1") {
  Tensord t = testutil::random_tensor({5, 4, 3}, 12);
  BodResult r = bod_decompose(t, {2}, 50, 1e-10, {1});
  auto [core, u] = tucker1(t, 1, 2);
  Tensord rec = mode_product<double>(core, u, 1);
  double rel = (t.data() - rec.data()).norm() / frobenius_norm(t);
  CHECK(r.residual == doctest::Approx(rel).epsilon(1e-8));
}

TEST_CASE("tucker model save/load round-trips bit-exactly") {
  auto g = synth::random_tucker({5, 4, 3}, {2, 2, 2}, 0.01, 77);
  TuckerModel m = hooi(g.tensor, {2, 2, 2});
  auto dir = std::filesystem::temp_directory_path() / "mtd_test_model";
  save_tucker_model(dir, m, "hooi", 77);
  TuckerModel l = load_tucker_model(dir);
  CHECK((l.core.data() - m.core.data()).norm() == 0.0);
  for (std::size_t n = 0; n < 3; ++n) CHECK((l.factors[n] - m.factors[n]).norm() == 0.0);
  CHECK(l.fit_error == m.fit_error);
  std::filesystem::remove_all(dir);
}
