#pragma once

#include <random>

#include "mtd/tensor.hpp"

namespace testutil {

inline mtd::Tensord random_tensor(const mtd::Dims& dims, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  mtd::Tensord t(dims);
  for (mtd::Index i = 0; i < t.size(); ++i) t.data()[i] = gauss(rng);
  return t;
}

inline mtd::Matrixd random_matrix(mtd::Index rows, mtd::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  mtd::Matrixd m(rows, cols);
  for (mtd::Index i = 0; i < m.size(); ++i) m.data()[i] = gauss(rng);
  return m;
}

// Naive mode-n product by explicit summation; the oracle for mode_product.
inline mtd::Tensord mode_product_naive(const mtd::Tensord& t, const mtd::Matrixd& u,
                                       mtd::Index mode) {
  mtd::Dims nd = t.dims();
  nd[static_cast<std::size_t>(mode)] = u.rows();
  mtd::Tensord out(nd);
  mtd::Dims idx(nd.size(), 0);
  do {
    double s = 0.0;
    mtd::Dims src = idx;
    for (mtd::Index k = 0; k < u.cols(); ++k) {
      src[static_cast<std::size_t>(mode)] = k;
      s += u(idx[static_cast<std::size_t>(mode)], k) * t(src);
    }
    out(idx) = s;
  } while (mtd::detail::advance(idx, nd));
  return out;
}

}  // namespace testutil
