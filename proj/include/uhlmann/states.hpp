#pragma once

// Density matrix construction and validation, purification, seeded random
// instance generation, classical embeddings, tensor powers and permutation
// symmetrization.

#include "uhlmann/matrix.hpp"

#include <algorithm>
#include <cstdint>
#include <random>

namespace uhlmann {

inline constexpr double kStateEigTol = 1e-10;
inline constexpr double kStateTraceTol = 1e-10;
inline constexpr int kSymmetrizeMaxCopies = 4;

/// PSD unit-trace Hermitian matrix with declared tensor factor dimensions.
struct DensityMatrix {
  Matrix mat;
  std::vector<int> factor_dims;

  int dim() const { return static_cast<int>(mat.rows()); }
};

struct StateDiagnostics {
  double hermiticity_residual = 0.0;
  double min_eigenvalue = 0.0;
  double trace_deviation = 0.0;

  bool pass() const {
    return hermiticity_residual <= kHermiticityTol &&
           min_eigenvalue >= -kStateEigTol &&
           trace_deviation <= kStateTraceTol;
  }
};

/// Reports Hermiticity residual, minimum eigenvalue and trace deviation.
/// Diagnostic only; never throws.
inline StateDiagnostics validate(const DensityMatrix& rho) {
  StateDiagnostics d;
  d.hermiticity_residual = hermiticity_residual(rho.mat);
  d.trace_deviation = std::abs(rho.mat.trace().real() - 1.0) +
                      std::abs(rho.mat.trace().imag());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(hermitize(rho.mat));
  d.min_eigenvalue = solver.eigenvalues()(0);
  return d;
}

inline DensityMatrix make_density(Matrix m, std::vector<int> factor_dims) {
  DensityMatrix rho{std::move(m), std::move(factor_dims)};
  if (product_of(rho.factor_dims) != rho.dim()) {
    throw std::invalid_argument("make_density: factor dims do not match matrix");
  }
  return rho;
}

/// Reduced state over the listed kept factors.
inline DensityMatrix reduce(const DensityMatrix& rho, const std::vector<int>& keep) {
  std::vector<int> kept_dims;
  for (int j : keep) kept_dims.push_back(rho.factor_dims[j]);
  return {partial_trace(rho.mat, rho.factor_dims, keep), kept_dims};
}

/// For a bipartite state with factors grouped as [A..., B...] where the first
/// a_factors belong to A, the A marginal.
inline DensityMatrix marginal_A(const DensityMatrix& rho, int a_factors = 1) {
  std::vector<int> keep(a_factors);
  for (int i = 0; i < a_factors; ++i) keep[i] = i;
  return reduce(rho, keep);
}

inline DensityMatrix marginal_B(const DensityMatrix& rho, int a_factors = 1) {
  std::vector<int> keep;
  for (int i = a_factors; i < static_cast<int>(rho.factor_dims.size()); ++i) {
    keep.push_back(i);
  }
  return reduce(rho, keep);
}

namespace detail {

// Deterministic standard normals from raw mt19937_64 output; the standard
// library distributions are implementation-defined, which would break
// cross-platform reproducibility of seeded instances.
inline double uniform01(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

inline std::pair<double, double> gaussian_pair(std::mt19937_64& rng) {
  const double u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  const double r = std::sqrt(-2.0 * std::log(u1));
  return {r * std::cos(2.0 * M_PI * u2), r * std::sin(2.0 * M_PI * u2)};
}

inline Complex gaussian_complex(std::mt19937_64& rng) {
  auto [x, y] = gaussian_pair(rng);
  return Complex(x, y) / std::sqrt(2.0);
}

}  // namespace detail

/// Ginibre construction: rho = G G^dag / tr(G G^dag) with G a dim x rank
/// complex Gaussian factor. Deterministic per seed.
inline DensityMatrix random_density(int dim, int rank, uint64_t seed) {
  if (rank > dim || rank < 1) {
    throw std::invalid_argument("random_density: rank must be in [1, dim]");
  }
  std::mt19937_64 rng(seed);
  Matrix g = Matrix::Zero(dim, rank);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < rank; ++j) {
      g(i, j) = detail::gaussian_complex(rng);
    }
  }
  Matrix m = g * g.adjoint();
  m /= m.trace().real();
  return {hermitize(m), {dim}};
}

/// Haar-ish random unitary via QR of a Ginibre matrix with phase fixing.
inline Matrix random_unitary(int dim, uint64_t seed) {
  std::mt19937_64 rng(seed);
  Matrix g(dim, dim);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) g(i, j) = detail::gaussian_complex(rng);
  }
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < dim; ++j) {
    const Complex d = r(j, j);
    const Complex phase = (std::abs(d) > 0) ? d / std::abs(d) : Complex(1, 0);
    q.col(j) *= phase;
  }
  return q;
}

/// Purification on A x B with d_B equal to the numerical rank of rho_A,
/// built in the eigenbasis of rho_A.
inline DensityMatrix purify(const DensityMatrix& rho_A) {
  const auto sd = eigh(rho_A.mat);
  const int d = sd.dim();
  const double cutoff = 1e-12 * std::max(1.0, sd.max_eigenvalue());
  std::vector<int> kept;
  for (int i = d - 1; i >= 0; --i) {
    if (sd.eigenvalues(i) > cutoff) kept.push_back(i);
  }
  const int rank = static_cast<int>(kept.size());
  Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(d * rank);
  for (int b = 0; b < rank; ++b) {
    const int i = kept[b];
    const double amp = std::sqrt(std::max(sd.eigenvalues(i), 0.0));
    for (int a = 0; a < d; ++a) {
      psi(a * rank + b) += amp * sd.eigenvectors(a, i);
    }
  }
  Matrix m = psi * psi.adjoint();
  m /= m.trace().real();
  return {m, {d, rank}};
}

/// Nonnegative vector summing to one.
struct ClassicalDistribution {
  RealVector probs;

  int size() const { return static_cast<int>(probs.size()); }
};

inline ClassicalDistribution make_distribution(std::vector<double> p) {
  RealVector v = Eigen::Map<RealVector>(p.data(), static_cast<long>(p.size()));
  const double s = v.sum();
  for (double x : p) {
    if (x < 0) throw std::invalid_argument("distribution entries must be >= 0");
  }
  if (std::abs(s - 1.0) > 1e-12) {
    throw std::invalid_argument("distribution must sum to 1");
  }
  return {v};
}

/// Diagonal embedding of a distribution into the computational basis.
inline DensityMatrix classical_embed(const ClassicalDistribution& p,
                                     std::vector<int> factor_dims) {
  if (product_of(factor_dims) != p.size()) {
    throw std::invalid_argument("classical_embed: shape mismatch");
  }
  Matrix m = Matrix::Zero(p.size(), p.size());
  for (int i = 0; i < p.size(); ++i) m(i, i) = p.probs(i);
  return {m, std::move(factor_dims)};
}

/// The classical optimal extension qbar(a,b) = p(a,b) q(a) / p(a) when
/// p(a) > 0 and p(b) q(a) otherwise. Its A marginal is exactly q.
inline ClassicalDistribution classical_optimal_extension(
    const ClassicalDistribution& p_ab, const ClassicalDistribution& q_a) {
  const int na = q_a.size();
  if (p_ab.size() % na != 0) {
    throw std::invalid_argument("classical_optimal_extension: shape mismatch");
  }
  const int nb = p_ab.size() / na;
  RealVector p_a = RealVector::Zero(na);
  RealVector p_b = RealVector::Zero(nb);
  for (int a = 0; a < na; ++a) {
    for (int b = 0; b < nb; ++b) {
      p_a(a) += p_ab.probs(a * nb + b);
      p_b(b) += p_ab.probs(a * nb + b);
    }
  }
  RealVector out(na * nb);
  for (int a = 0; a < na; ++a) {
    for (int b = 0; b < nb; ++b) {
      out(a * nb + b) = (p_a(a) > 0)
                            ? p_ab.probs(a * nb + b) * q_a.probs(a) / p_a(a)
                            : p_b(b) * q_a.probs(a);
    }
  }
  return {out};
}

/// n-fold Kronecker power with the factor bookkeeping grouped per input
/// factor: copies of factor 0 come first, then copies of factor 1, and so on.
/// For a bipartite input [dA, dB] the output ordering is A_1..A_n B_1..B_n.
inline DensityMatrix tensor_power(const DensityMatrix& rho, int n,
                                  int dimension_cap = kDimensionCap) {
  if (n < 1) throw std::invalid_argument("tensor_power: n must be >= 1");
  Matrix out = rho.mat;
  for (int i = 1; i < n; ++i) out = tensor_product(out, rho.mat, dimension_cap);

  const int k = static_cast<int>(rho.factor_dims.size());
  // Interleaved dims: copy 1 factors, copy 2 factors, ...
  std::vector<int> interleaved;
  for (int c = 0; c < n; ++c) {
    for (int j = 0; j < k; ++j) interleaved.push_back(rho.factor_dims[j]);
  }
  // Grouped ordering: for each input factor j, its n copies in copy order.
  std::vector<int> order;
  for (int j = 0; j < k; ++j) {
    for (int c = 0; c < n; ++c) order.push_back(c * k + j);
  }
  Matrix grouped = (k > 1) ? reorder_factors(out, interleaved, order) : out;
  std::vector<int> new_dims;
  for (int j = 0; j < k; ++j) {
    for (int c = 0; c < n; ++c) new_dims.push_back(rho.factor_dims[j]);
  }
  return {grouped, new_dims};
}

/// Average over all simultaneous copy permutations. Accepts states on n
/// copies of a single system (factor_dims = [d]*n) or on n copies of a
/// bipartite system in grouped order (factor_dims = [dA]*n + [dB]*n), in
/// which case A factors and B factors are permuted together.
inline DensityMatrix symmetrize(const DensityMatrix& rho_n, int n) {
  if (n > kSymmetrizeMaxCopies) {
    throw std::length_error("symmetrize: n > 4 not supported (n! blowup)");
  }
  const int k = static_cast<int>(rho_n.factor_dims.size());
  bool bipartite;
  if (k == n) bipartite = false;
  else if (k == 2 * n) bipartite = true;
  else throw std::invalid_argument("symmetrize: factor dims inconsistent with n copies");

  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  Matrix acc = Matrix::Zero(rho_n.dim(), rho_n.dim());
  int count = 0;
  do {
    std::vector<int> order;
    for (int i = 0; i < n; ++i) order.push_back(perm[i]);
    if (bipartite) {
      for (int i = 0; i < n; ++i) order.push_back(n + perm[i]);
    }
    acc += reorder_factors(rho_n.mat, rho_n.factor_dims, order);
    ++count;
  } while (std::next_permutation(perm.begin(), perm.end()));
  acc /= static_cast<double>(count);
  return {hermitize(acc), rho_n.factor_dims};
}

}  // namespace uhlmann
