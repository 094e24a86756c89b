#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace tensorart {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Dense N-order real tensor.
///
/// Entries are stored in one flat column-major array: mode 1 varies fastest,
/// so the flat index of (i_1,...,i_N) (zero-based) is
/// i_1 + i_2*I_1 + i_3*I_1*I_2 + ...  Vectorization is therefore a view of
/// the storage and costs nothing. Indices are zero-based throughout the
/// library; one-based indexing only appears at the file-format boundary.
/// An order-0 tensor (empty dims) holds a single scalar.
class Tensor {
 public:
  Tensor() : data_(Vector::Zero(1)) {}

  explicit Tensor(std::vector<Index> dims)
      : dims_(std::move(dims)), data_(Vector::Zero(check_dims(dims_))) {}

  Tensor(std::vector<Index> dims, Vector data) : dims_(std::move(dims)), data_(std::move(data)) {
    if (data_.size() != check_dims(dims_))
      throw std::domain_error("Tensor: data length does not match product of dims");
  }

  Index order() const { return static_cast<Index>(dims_.size()); }
  const std::vector<Index>& dims() const { return dims_; }
  Index dim(Index n) const { return dims_[static_cast<std::size_t>(n)]; }
  Index size() const { return data_.size(); }

  const Vector& flat() const { return data_; }
  Vector& flat() { return data_; }

  double operator[](Index k) const { return data_[k]; }
  double& operator[](Index k) { return data_[k]; }

  double operator()(const std::vector<Index>& idx) const { return data_[flat_index(idx)]; }
  double& operator()(const std::vector<Index>& idx) { return data_[flat_index(idx)]; }

  template <typename... Is>
  double operator()(Is... is) const {
    return data_[flat_index(std::vector<Index>{static_cast<Index>(is)...})];
  }
  template <typename... Is>
  double& operator()(Is... is) {
    return data_[flat_index(std::vector<Index>{static_cast<Index>(is)...})];
  }

  /// Flat position of a zero-based multi-index.
  Index flat_index(const std::vector<Index>& idx) const {
    if (static_cast<Index>(idx.size()) != order())
      throw std::domain_error("Tensor: index arity does not match order");
    Index k = 0, stride = 1;
    for (std::size_t j = 0; j < dims_.size(); ++j) {
      if (idx[j] < 0 || idx[j] >= dims_[j]) throw std::domain_error("Tensor: index out of range");
      k += idx[j] * stride;
      stride *= dims_[j];
    }
    return k;
  }

  /// Inverse of flat_index.
  std::vector<Index> multi_index(Index k) const {
    std::vector<Index> idx(dims_.size());
    for (std::size_t j = 0; j < dims_.size(); ++j) {
      idx[j] = k % dims_[j];
      k /= dims_[j];
    }
    return idx;
  }

  Tensor& operator+=(const Tensor& o) {
    require_same_dims(o);
    data_ += o.data_;
    return *this;
  }
  Tensor& operator-=(const Tensor& o) {
    require_same_dims(o);
    data_ -= o.data_;
    return *this;
  }
  Tensor& operator*=(double c) {
    data_ *= c;
    return *this;
  }

  friend Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
  friend Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
  friend Tensor operator*(double c, Tensor a) { return a *= c; }

  bool same_dims(const Tensor& o) const { return dims_ == o.dims_; }

 private:
  static Index check_dims(const std::vector<Index>& dims) {
    Index n = 1;
    for (Index d : dims) {
      if (d <= 0) throw std::domain_error("Tensor: dims must be positive");
      n *= d;
    }
    return n;
  }

  void require_same_dims(const Tensor& o) const {
    if (!same_dims(o)) throw std::domain_error("Tensor: dimension mismatch");
  }

  std::vector<Index> dims_;
  Vector data_;
};

/// Ordered row/column mode sets for a general matricization.
/// rows and cols must partition {0,...,N-1}, both nonempty.
struct ModePartition {
  std::vector<Index> rows;
  std::vector<Index> cols;

  void validate(Index order) const {
    if (rows.empty() || cols.empty())
      throw std::domain_error("ModePartition: both mode sets must be nonempty");
    std::vector<char> seen(static_cast<std::size_t>(order), 0);
    auto mark = [&](const std::vector<Index>& s) {
      for (Index m : s) {
        if (m < 0 || m >= order) throw std::domain_error("ModePartition: mode out of range");
        if (seen[static_cast<std::size_t>(m)]++)
          throw std::domain_error("ModePartition: overlapping mode sets");
      }
    };
    mark(rows);
    mark(cols);
    for (char c : seen)
      if (!c) throw std::domain_error("ModePartition: incomplete partition");
  }
};

inline Index product_of(const std::vector<Index>& dims) {
  return std::accumulate(dims.begin(), dims.end(), Index{1}, std::multiplies<>());
}

/// vec(X): the flat storage in lexicographic (mode-1 fastest) order.
inline Vector vectorize(const Tensor& x) { return x.flat(); }

/// Rebuild a tensor of the given dims from its vectorization.
inline Tensor devectorize(const Vector& v, std::vector<Index> dims) {
  return Tensor(std::move(dims), v);
}

/// General matricization over an ordered mode partition.
///
/// Element (i_1,...,i_N) lands at row 1+sum_l (i_{r_l}-1) prod_{l'<l} I_{r_l'}
/// and the analogous column index over the col modes (one-based formulas,
/// implemented zero-based).
inline Matrix matricize(const Tensor& x, const ModePartition& part) {
  part.validate(x.order());
  const auto& dims = x.dims();
  std::vector<Index> row_stride(part.rows.size()), col_stride(part.cols.size());
  Index nrow = 1, ncol = 1;
  for (std::size_t l = 0; l < part.rows.size(); ++l) {
    row_stride[l] = nrow;
    nrow *= dims[static_cast<std::size_t>(part.rows[l])];
  }
  for (std::size_t m = 0; m < part.cols.size(); ++m) {
    col_stride[m] = ncol;
    ncol *= dims[static_cast<std::size_t>(part.cols[m])];
  }
  Matrix out(nrow, ncol);
  const Index n = x.size();
  for (Index k = 0; k < n; ++k) {
    const auto idx = x.multi_index(k);
    Index r = 0, c = 0;
    for (std::size_t l = 0; l < part.rows.size(); ++l)
      r += idx[static_cast<std::size_t>(part.rows[l])] * row_stride[l];
    for (std::size_t m = 0; m < part.cols.size(); ++m)
      c += idx[static_cast<std::size_t>(part.cols[m])] * col_stride[m];
    out(r, c) = x[k];
  }
  return out;
}

/// Mode-n unfolding X_(n): rows indexed by mode n (zero-based), columns by
/// the remaining modes in ascending order.
inline Matrix mode_matricize(const Tensor& x, Index n) {
  if (n < 0 || n >= x.order()) throw std::domain_error("mode_matricize: invalid mode index");
  ModePartition part;
  part.rows = {n};
  for (Index m = 0; m < x.order(); ++m)
    if (m != n) part.cols.push_back(m);
  return matricize(x, part);
}

/// Contracted product summing the trailing n_contract modes of x against the
/// leading n_contract modes of y. Output dims are x's leading modes followed
/// by y's trailing modes; a fully contracted pair yields an order-0 tensor
/// holding the inner product.
inline Tensor contracted_product(const Tensor& x, const Tensor& y, Index n_contract) {
  if (n_contract < 0 || n_contract > x.order() || n_contract > y.order())
    throw std::domain_error("contracted_product: invalid contraction count");
  const auto& xd = x.dims();
  const auto& yd = y.dims();
  const std::size_t nc = static_cast<std::size_t>(n_contract);
  const std::size_t lead = xd.size() - nc;
  for (std::size_t j = 0; j < nc; ++j)
    if (xd[lead + j] != yd[j])
      throw std::domain_error("contracted_product: contracted dimensions do not match");

  std::vector<Index> out_dims(xd.begin(), xd.begin() + static_cast<std::ptrdiff_t>(lead));
  out_dims.insert(out_dims.end(), yd.begin() + static_cast<std::ptrdiff_t>(nc), yd.end());

  Index nlead = 1, nshare = 1;
  for (std::size_t j = 0; j < lead; ++j) nlead *= xd[j];
  for (std::size_t j = 0; j < nc; ++j) nshare *= yd[j];
  const Index ntrail = y.size() / nshare;

  // Column-major storage makes both operands plain matrix views.
  Eigen::Map<const Matrix> xm(x.flat().data(), nlead, nshare);
  Eigen::Map<const Matrix> ym(y.flat().data(), nshare, ntrail);
  Matrix zm = xm * ym;
  return Tensor(std::move(out_dims), Eigen::Map<Vector>(zm.data(), zm.size()));
}

/// Mode-n product with a vector; the contracted mode is removed.
inline Tensor mode_product(const Tensor& x, const Vector& v, Index n) {
  if (n < 0 || n >= x.order()) throw std::domain_error("mode_product: invalid mode index");
  if (v.size() != x.dim(n)) throw std::domain_error("mode_product: vector length mismatch");
  const auto& dims = x.dims();
  Index pre = 1, post = 1;
  for (Index m = 0; m < n; ++m) pre *= dims[static_cast<std::size_t>(m)];
  for (Index m = n + 1; m < x.order(); ++m) post *= dims[static_cast<std::size_t>(m)];
  const Index in = x.dim(n);

  std::vector<Index> out_dims;
  for (Index m = 0; m < x.order(); ++m)
    if (m != n) out_dims.push_back(dims[static_cast<std::size_t>(m)]);

  Tensor out(out_dims.empty() ? std::vector<Index>{} : out_dims);
  Eigen::Map<Vector> oflat(out.flat().data(), out.size());
  const double* src = x.flat().data();
  for (Index q = 0; q < post; ++q) {
    Eigen::Map<const Matrix> slab(src + q * pre * in, pre, in);
    oflat.segment(q * pre, pre) = slab * v;
  }
  return out;
}

/// Mode-n multiplication by a matrix (tensor-times-matrix): mode n of size
/// I_n is replaced by a.rows(), summing a(k, i_n) x(..., i_n, ...).
inline Tensor mode_multiply(const Tensor& x, const Matrix& a, Index n) {
  if (n < 0 || n >= x.order()) throw std::domain_error("mode_multiply: invalid mode index");
  if (a.cols() != x.dim(n)) throw std::domain_error("mode_multiply: matrix column mismatch");
  const auto& dims = x.dims();
  Index pre = 1, post = 1;
  for (Index m = 0; m < n; ++m) pre *= dims[static_cast<std::size_t>(m)];
  for (Index m = n + 1; m < x.order(); ++m) post *= dims[static_cast<std::size_t>(m)];
  const Index in = x.dim(n);
  const Index on = a.rows();

  std::vector<Index> out_dims = dims;
  out_dims[static_cast<std::size_t>(n)] = on;
  Tensor out(out_dims);
  const double* src = x.flat().data();
  double* dst = out.flat().data();
  for (Index q = 0; q < post; ++q) {
    Eigen::Map<const Matrix> sslab(src + q * pre * in, pre, in);
    Eigen::Map<Matrix> dslab(dst + q * pre * on, pre, on);
    dslab = sslab * a.transpose();
  }
  return out;
}

/// Outer product: dims concatenate, entries multiply.
inline Tensor outer_product(const Tensor& x, const Tensor& y) {
  std::vector<Index> out_dims = x.dims();
  out_dims.insert(out_dims.end(), y.dims().begin(), y.dims().end());
  Tensor out(out_dims);
  Eigen::Map<Matrix>(out.flat().data(), x.size(), y.size()) = x.flat() * y.flat().transpose();
  return out;
}

/// Identity tensor of the contracted-product algebra on dims x dims:
/// entry 1 iff the leading multi-index equals the trailing one.
inline Tensor identity_tensor(const std::vector<Index>& dims) {
  const Index n = product_of(dims);
  std::vector<Index> sq = dims;
  sq.insert(sq.end(), dims.begin(), dims.end());
  Matrix eye = Matrix::Identity(n, n);
  return Tensor(std::move(sq), Eigen::Map<Vector>(eye.data(), eye.size()));
}

/// Square matricization of an order-2N tensor with dims (I_1..I_N,I_1..I_N):
/// rows from the first N modes, columns from the last N.
inline Matrix square_matricize(const Tensor& a) {
  const Index n2 = a.order();
  if (n2 == 0 || n2 % 2 != 0)
    throw std::domain_error("square_matricize: tensor order must be even");
  const Index n = n2 / 2;
  for (Index j = 0; j < n; ++j)
    if (a.dim(j) != a.dim(j + n))
      throw std::domain_error("square_matricize: leading and trailing dims differ");
  ModePartition part;
  for (Index j = 0; j < n; ++j) part.rows.push_back(j);
  for (Index j = n; j < n2; ++j) part.cols.push_back(j);
  return matricize(a, part);
}

namespace detail {

inline double spectral_radius_dense(const Matrix& m) {
  Eigen::EigenSolver<Matrix> es(m, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

// Power iteration fallback for matrices too large for the dense solver.
inline double spectral_radius_power(const Matrix& m, double tol = 1e-10, int max_iter = 10000) {
  const Index n = m.rows();
  Vector v = Vector::Ones(n) / std::sqrt(static_cast<double>(n));
  double rho = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Vector w = m * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    w /= norm;
    const double next = std::abs(w.dot(m * w));
    if (std::abs(next - rho) < tol * std::max(1.0, next)) return next;
    rho = next;
    v = w;
  }
  return rho;
}

}  // namespace detail

/// Largest eigenvalue modulus of the square matricization of an order-2N
/// coefficient tensor. Dense eigensolver up to 512x512, power iteration
/// (1e-10 tolerance, 10000 iteration cap) beyond.
inline double spectral_radius(const Tensor& a) {
  Matrix m = square_matricize(a);
  if (m.rows() <= 512) return detail::spectral_radius_dense(m);
  return detail::spectral_radius_power(m);
}

namespace detail {

/// Kronecker product helper shared across modules.
inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline Vector kron_vec(const Vector& a, const Vector& b) {
  Vector out(a.size() * b.size());
  for (Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a[i] * b;
  return out;
}

}  // namespace detail

}  // namespace tensorart
