#pragma once

#include <array>
#include <stdexcept>
#include <vector>

#include "tensorart/tensor.hpp"

namespace tensorart {

/// Rank-R sum of outer products of per-mode marginal vectors.
///
/// marginals[r][j] is the j-th marginal of component r, length I_j. Marginals
/// are stored unnormalized: the reconstructed tensor is the identified
/// object, the marginals themselves carry no interpretation and no canonical
/// scaling is imposed.
struct ParafacCoefficient {
  std::vector<std::vector<Vector>> marginals;

  Index rank() const { return static_cast<Index>(marginals.size()); }
  Index order() const { return marginals.empty() ? 0 : static_cast<Index>(marginals[0].size()); }

  std::vector<Index> dims() const {
    std::vector<Index> d;
    for (const auto& m : marginals.at(0)) d.push_back(m.size());
    return d;
  }

  void validate() const {
    if (marginals.empty()) throw std::domain_error("ParafacCoefficient: rank must be positive");
    const std::size_t j = marginals[0].size();
    if (j == 0) throw std::domain_error("ParafacCoefficient: order must be positive");
    for (const auto& group : marginals) {
      if (group.size() != j)
        throw std::domain_error("ParafacCoefficient: components disagree on order");
      for (std::size_t m = 0; m < j; ++m)
        if (group[m].size() != marginals[0][m].size())
          throw std::domain_error("ParafacCoefficient: components disagree on mode lengths");
    }
  }
};

/// vec of the rank-1 tensor beta_1 o ... o beta_J, i.e. beta_J (x) ... (x) beta_1.
inline Vector rank_one_vec(const std::vector<Vector>& betas) {
  Vector acc = betas.at(0);
  for (std::size_t j = 1; j < betas.size(); ++j) acc = detail::kron_vec(betas[j], acc);
  return acc;
}

/// Sum of R rank-1 tensors built from the marginals.
inline Tensor reconstruct(const ParafacCoefficient& c) {
  c.validate();
  const auto dims = c.dims();
  Vector flat = Vector::Zero(product_of(dims));
  for (const auto& group : c.marginals) flat += rank_one_vec(group);
  return Tensor(dims, std::move(flat));
}

/// B_(J) = sum_r beta_J^(r) vec(beta_1^(r) o ... o beta_{J-1}^(r))', the
/// mode-J unfolding of the reconstruction computed without forming it:
/// satisfies vec(B x_J x) = B_(J)' x.
inline Matrix mode_last_matricization(const ParafacCoefficient& c) {
  c.validate();
  const auto dims = c.dims();
  const Index last = static_cast<Index>(dims.size()) - 1;
  Index lead = 1;
  for (Index j = 0; j < last; ++j) lead *= dims[static_cast<std::size_t>(j)];
  Matrix out = Matrix::Zero(dims[static_cast<std::size_t>(last)], lead);
  for (const auto& group : c.marginals) {
    std::vector<Vector> head(group.begin(), group.end() - 1);
    out += group.back() * rank_one_vec(head).transpose();
  }
  return out;
}

/// The four design matrices of the J=4 estimation path: b_j is the linear
/// map with vec(B_r x_4 x) = b_j beta_j^(r), component r held at the other
/// three marginals. b_j has I_1 I_2 I_3 rows and I_j columns.
inline std::array<Matrix, 4> design_matrices(const ParafacCoefficient& c, Index r,
                                             const Vector& x) {
  c.validate();
  if (c.order() != 4) throw std::domain_error("design_matrices: defined for 4-order coefficients");
  if (r < 0 || r >= c.rank()) throw std::domain_error("design_matrices: component out of range");
  const auto& g = c.marginals[static_cast<std::size_t>(r)];
  const Index i1 = g[0].size(), i2 = g[1].size(), i3 = g[2].size();
  if (x.size() != g[3].size()) throw std::domain_error("design_matrices: x length mismatch");

  const double score = g[3].dot(x);
  const Matrix id1 = Matrix::Identity(i1, i1);
  const Matrix id2 = Matrix::Identity(i2, i2);
  const Matrix id3 = Matrix::Identity(i3, i3);

  std::array<Matrix, 4> b;
  b[0] = score * detail::kron(g[2], detail::kron(g[1], id1));
  b[1] = score * detail::kron(g[2], detail::kron(id2, g[0]));
  b[2] = score * detail::kron(id3, detail::kron(g[1], g[0]));
  b[3] = rank_one_vec({g[0], g[1], g[2]}) * x.transpose();
  return b;
}

enum class CoefficientForm { unrestricted, mode_last_parafac, contracted_parafac };

/// Free-parameter counts of the three coefficient parametrizations for a
/// square coefficient acting on a response of the given dims.
inline long long parameter_count(const std::vector<Index>& dims, Index rank,
                                 CoefficientForm form) {
  if (dims.empty()) throw std::domain_error("parameter_count: dims must be nonempty");
  long long prod = 1, sum = 0;
  for (Index d : dims) {
    prod *= d;
    sum += d;
  }
  switch (form) {
    case CoefficientForm::unrestricted:
      return prod * prod;
    case CoefficientForm::mode_last_parafac:
      return static_cast<long long>(rank) * (sum + prod);
    case CoefficientForm::contracted_parafac:
      return 2LL * static_cast<long long>(rank) * sum;
  }
  throw std::domain_error("parameter_count: unknown form");
}

}  // namespace tensorart
