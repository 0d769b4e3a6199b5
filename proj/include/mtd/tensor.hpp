#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "mtd/errors.hpp"

namespace mtd {

using Index = Eigen::Index;
using Dims = std::vector<Index>;

/// Dense order-N array, generalized row-major (last index varies fastest).
template <class Scalar>
class Tensor {
 public:
  using Vec = Eigen::Vector<Scalar, Eigen::Dynamic>;

  Tensor() = default;

  explicit Tensor(Dims dims) : dims_(std::move(dims)) {
    check_dims();
    data_ = Vec::Zero(size_from_dims());
  }

  Tensor(Dims dims, Vec data) : dims_(std::move(dims)), data_(std::move(data)) {
    check_dims();
    if (data_.size() != size_from_dims())
      throw ShapeError("tensor data length does not match dims product");
  }

  Index order() const { return static_cast<Index>(dims_.size()); }
  const Dims& dims() const { return dims_; }
  Index dim(Index n) const { return dims_[static_cast<std::size_t>(n)]; }
  Index size() const { return data_.size(); }

  const Vec& data() const { return data_; }
  Vec& data() { return data_; }

  Index linear_index(const Dims& idx) const {
    Index lin = 0;
    for (std::size_t n = 0; n < dims_.size(); ++n) lin = lin * dims_[n] + idx[n];
    return lin;
  }

  Scalar operator()(const Dims& idx) const { return data_[linear_index(idx)]; }
  Scalar& operator()(const Dims& idx) { return data_[linear_index(idx)]; }

 private:
  Index size_from_dims() const {
    Index s = 1;
    for (Index d : dims_) s *= d;
    return s;
  }
  void check_dims() const {
    if (dims_.empty()) throw ShapeError("tensor order must be >= 1");
    for (Index d : dims_)
      if (d < 1) throw ShapeError("every tensor dim must be >= 1");
  }

  Dims dims_;
  Vec data_;
};

using Tensord = Tensor<double>;
using Matrixd = Eigen::MatrixXd;

namespace detail {

// Odometer over a multi-index, last position fastest (storage order).
inline bool advance(Dims& idx, const Dims& dims) {
  for (Index n = static_cast<Index>(dims.size()) - 1; n >= 0; --n) {
    auto u = static_cast<std::size_t>(n);
    if (++idx[u] < dims[u]) return true;
    idx[u] = 0;
  }
  return false;
}

// Column strides of the mode-n unfolding: earlier modes vary fastest.
inline Dims unfold_col_strides(const Dims& dims, Index mode) {
  Dims strides(dims.size(), 0);
  Index acc = 1;
  for (std::size_t k = 0; k < dims.size(); ++k) {
    if (static_cast<Index>(k) == mode) continue;
    strides[k] = acc;
    acc *= dims[k];
  }
  return strides;
}

}  // namespace detail

/// Mode-n unfolding: rows indexed by mode `mode`, columns by the remaining
/// indices with earlier modes varying fastest.
template <class Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> unfold(const Tensor<Scalar>& t,
                                                             Index mode) {
  if (mode < 0 || mode >= t.order()) throw InvalidModeError("unfold mode out of range");
  const Dims& dims = t.dims();
  Index cols = t.size() / t.dim(mode);
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> m(t.dim(mode), cols);
  Dims strides = detail::unfold_col_strides(dims, mode);
  Dims idx(dims.size(), 0);
  Index lin = 0;
  do {
    Index col = 0;
    for (std::size_t k = 0; k < dims.size(); ++k) col += idx[k] * strides[k];
    m(idx[static_cast<std::size_t>(mode)], col) = t.data()[lin++];
  } while (detail::advance(idx, dims));
  return m;
}

/// Inverse of unfold for the given mode and target dims.
template <class Scalar>
Tensor<Scalar> fold(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& m,
                    Index mode, const Dims& dims) {
  if (mode < 0 || mode >= static_cast<Index>(dims.size()))
    throw InvalidModeError("fold mode out of range");
  Index expected_cols = 1;
  for (std::size_t k = 0; k < dims.size(); ++k)
    if (static_cast<Index>(k) != mode) expected_cols *= dims[k];
  if (m.rows() != dims[static_cast<std::size_t>(mode)] || m.cols() != expected_cols)
    throw ShapeError("fold: matrix shape does not match target dims");
  Tensor<Scalar> t(dims);
  Dims strides = detail::unfold_col_strides(dims, mode);
  Dims idx(dims.size(), 0);
  Index lin = 0;
  do {
    Index col = 0;
    for (std::size_t k = 0; k < dims.size(); ++k) col += idx[k] * strides[k];
    t.data()[lin++] = m(idx[static_cast<std::size_t>(mode)], col);
  } while (detail::advance(idx, dims));
  return t;
}

/// Mode-n product t x_mode u; replaces dim[mode] by u.rows().
template <class Scalar>
Tensor<Scalar> mode_product(const Tensor<Scalar>& t,
                            const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& u,
                            Index mode) {
  if (mode < 0 || mode >= t.order()) throw InvalidModeError("mode_product mode out of range");
  if (u.cols() != t.dim(mode))
    throw ShapeError("mode_product: matrix cols must equal tensor dim in that mode");
  Dims new_dims = t.dims();
  new_dims[static_cast<std::size_t>(mode)] = u.rows();
  return fold<Scalar>(u * unfold(t, mode), mode, new_dims);
}

/// Sequential mode products, at most one factor per mode.
template <class Scalar>
Tensor<Scalar> multi_mode_product(
    const Tensor<Scalar>& t,
    const std::vector<std::pair<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>, Index>>&
        factors) {
  std::vector<bool> seen(static_cast<std::size_t>(t.order()), false);
  for (const auto& [u, mode] : factors) {
    if (mode < 0 || mode >= t.order())
      throw InvalidModeError("multi_mode_product mode out of range");
    if (seen[static_cast<std::size_t>(mode)])
      throw InvalidArgumentError("multi_mode_product: duplicate mode");
    seen[static_cast<std::size_t>(mode)] = true;
  }
  Tensor<Scalar> out = t;
  for (const auto& [u, mode] : factors) out = mode_product(out, u, mode);
  return out;
}

/// Outer product of >= 2 vectors; entry (i_1..i_N) = prod v_n[i_n].
template <class Scalar>
Tensor<Scalar> outer_product(const std::vector<Eigen::Vector<Scalar, Eigen::Dynamic>>& vs) {
  if (vs.size() < 2) throw InvalidArgumentError("outer_product needs at least two vectors");
  Dims dims;
  for (const auto& v : vs) {
    if (v.size() == 0) throw InvalidArgumentError("outer_product: empty vector");
    dims.push_back(v.size());
  }
  Tensor<Scalar> t(dims);
  Dims idx(dims.size(), 0);
  Index lin = 0;
  do {
    Scalar p = 1;
    for (std::size_t n = 0; n < vs.size(); ++n) p *= vs[n][idx[n]];
    t.data()[lin++] = p;
  } while (detail::advance(idx, dims));
  return t;
}

template <class Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> kronecker(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& a,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& b) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> k(a.rows() * b.rows(),
                                                          a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return k;
}

/// Columnwise Khatri-Rao product; columns are kron(a_j, b_j).
template <class Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> khatri_rao(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& a,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& b) {
  if (a.cols() != b.cols()) throw ShapeError("khatri_rao: column counts differ");
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> k(a.rows() * b.rows(), a.cols());
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i)
      k.col(j).segment(i * b.rows(), b.rows()) = a(i, j) * b.col(j);
  return k;
}

template <class Scalar>
Scalar frobenius_norm(const Tensor<Scalar>& t) {
  return t.data().norm();
}

/// Moore-Penrose pseudo-inverse via SVD; singular values below tol are
/// treated as zero. tol < 0 selects max(rows,cols)*eps*sigma_max.
template <class Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> pseudo_inverse(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& m, Scalar tol = Scalar(-1)) {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (tol < Scalar(0)) {
    Scalar smax = sv.size() > 0 ? sv(0) : Scalar(0);
    tol = static_cast<Scalar>(std::max(m.rows(), m.cols())) *
          std::numeric_limits<Scalar>::epsilon() * smax;
  }
  Eigen::Vector<Scalar, Eigen::Dynamic> inv = sv;
  for (Index i = 0; i < inv.size(); ++i) inv(i) = sv(i) > tol ? Scalar(1) / sv(i) : Scalar(0);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

}  // namespace mtd
