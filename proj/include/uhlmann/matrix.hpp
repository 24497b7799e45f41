#pragma once

// Dense complex Hermitian linear algebra: eigendecompositions with
// eigenvalue clustering, spectral matrix functions, tensor products,
// partial traces and norms. Everything else in the library builds on
// the operations in this header.

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace uhlmann {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using RealVector = Eigen::VectorXd;

inline constexpr double kHermiticityTol = 1e-12;
inline constexpr double kClusterTolScale = 1e-8;
inline constexpr double kSupportCutoffScale = 1e-10;
inline constexpr int kDimensionCap = 4096;

inline const double kLn2 = std::log(2.0);

inline double log2_safe(double x) { return std::log(x) / kLn2; }

/// Largest absolute entry of a matrix; cheap proxy norm used in tolerances.
inline double max_abs_entry(const Matrix& m) {
  return m.cwiseAbs().maxCoeff();
}

inline double hermiticity_residual(const Matrix& m) {
  return max_abs_entry(m - m.adjoint());
}

inline Matrix hermitize(const Matrix& m) { return 0.5 * (m + m.adjoint()); }

inline bool is_hermitian(const Matrix& m, double tol = kHermiticityTol) {
  return hermiticity_residual(m) <= tol * std::max(1.0, max_abs_entry(m));
}

/// Eigendecomposition of a Hermitian matrix together with a partition of the
/// eigenvalues into clusters of numerically-coinciding values. The clusters
/// define the distinct-eigenvalue structure used by pinching maps.
struct SpectralDecomposition {
  RealVector eigenvalues;       // ascending
  Matrix eigenvectors;          // unitary, columns match eigenvalues
  std::vector<int> cluster_index;  // eigenvalue position -> cluster id
  int cluster_count = 0;

  int dim() const { return static_cast<int>(eigenvalues.size()); }

  Matrix reconstruct() const {
    return eigenvectors * eigenvalues.asDiagonal() * eigenvectors.adjoint();
  }

  /// Projector onto the eigenspace of cluster k.
  Matrix cluster_projector(int k) const {
    Matrix p = Matrix::Zero(dim(), dim());
    for (int i = 0; i < dim(); ++i) {
      if (cluster_index[i] == k) {
        p += eigenvectors.col(i) * eigenvectors.col(i).adjoint();
      }
    }
    return p;
  }

  double max_eigenvalue() const { return eigenvalues(dim() - 1); }
  double min_eigenvalue() const { return eigenvalues(0); }
  double operator_norm() const {
    return std::max(std::abs(eigenvalues(0)), std::abs(eigenvalues(dim() - 1)));
  }
};

/// Hermitian eigendecomposition. Rejects inputs whose Hermiticity residual
/// exceeds the tolerance, and clusters eigenvalues whose gaps fall below
/// cluster_tol_scale * max(1, operator norm).
inline SpectralDecomposition eigh(const Matrix& m,
                                  double cluster_tol_scale = kClusterTolScale,
                                  double hermiticity_tol = kHermiticityTol) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument("eigh: matrix is not square");
  }
  const double res = hermiticity_residual(m);
  if (res > hermiticity_tol * std::max(1.0, max_abs_entry(m))) {
    std::ostringstream oss;
    oss << "eigh: input is not Hermitian, symmetry residual " << res;
    throw std::invalid_argument(oss.str());
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(hermitize(m));
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("eigh: eigensolver failed to converge");
  }
  SpectralDecomposition sd;
  sd.eigenvalues = solver.eigenvalues();
  sd.eigenvectors = solver.eigenvectors();
  const int n = sd.dim();
  sd.cluster_index.assign(n, 0);
  const double tol = cluster_tol_scale * std::max(1.0, sd.operator_norm());
  int cluster = 0;
  for (int i = 1; i < n; ++i) {
    if (sd.eigenvalues(i) - sd.eigenvalues(i - 1) > tol) ++cluster;
    sd.cluster_index[i] = cluster;
  }
  sd.cluster_count = cluster + 1;
  return sd;
}

/// Default support cutoff for pseudo-inverses and logarithms:
/// kSupportCutoffScale times the largest eigenvalue.
inline double default_support_cutoff(const SpectralDecomposition& sd) {
  return kSupportCutoffScale * std::max(sd.max_eigenvalue(), 0.0);
}

/// U diag(f(lambda)) U^dag. Eigenvalues at or below support_cutoff map to
/// zero without calling f, which realizes support-restricted functions such
/// as pseudo-inverses and negative powers. f must be finite on the retained
/// eigenvalues.
inline Matrix apply_spectral_function(const SpectralDecomposition& sd,
                                      const std::function<double(double)>& f,
                                      double support_cutoff = 0.0) {
  const int n = sd.dim();
  RealVector vals(n);
  for (int i = 0; i < n; ++i) {
    const double lambda = sd.eigenvalues(i);
    if (support_cutoff > 0.0 && lambda <= support_cutoff) {
      vals(i) = 0.0;
      continue;
    }
    const double y = f(lambda);
    if (!std::isfinite(y)) {
      std::ostringstream oss;
      oss << "apply_spectral_function: f undefined on eigenvalue " << lambda;
      throw std::domain_error(oss.str());
    }
    vals(i) = y;
  }
  return sd.eigenvectors * vals.asDiagonal() * sd.eigenvectors.adjoint();
}

inline Matrix apply_spectral_function(const Matrix& m,
                                      const std::function<double(double)>& f,
                                      double support_cutoff = 0.0) {
  return apply_spectral_function(eigh(m), f, support_cutoff);
}

/// Real matrix power on the support. Negative exponents act as pseudo-powers:
/// eigenvalues below the cutoff are sent to zero.
inline Matrix matrix_power(const SpectralDecomposition& sd, double p,
                           double support_cutoff) {
  return apply_spectral_function(
      sd, [p](double x) { return std::pow(x, p); }, support_cutoff);
}

inline Matrix matrix_power(const Matrix& m, double p, double support_cutoff) {
  return matrix_power(eigh(m), p, support_cutoff);
}

/// Complex matrix power lambda^z = exp(z log lambda) on the support.
/// Used by the beta0 rotation factors sigma^{(1 +- it)/2}.
inline Matrix matrix_complex_power(const SpectralDecomposition& sd, Complex z,
                                   double support_cutoff) {
  const int n = sd.dim();
  Eigen::VectorXcd vals(n);
  for (int i = 0; i < n; ++i) {
    const double lambda = sd.eigenvalues(i);
    vals(i) = (lambda > support_cutoff) ? std::exp(z * std::log(lambda))
                                        : Complex(0.0, 0.0);
  }
  return sd.eigenvectors * vals.asDiagonal() * sd.eigenvectors.adjoint();
}

inline Matrix matrix_exp(const Matrix& m) {
  return apply_spectral_function(m, [](double x) { return std::exp(x); });
}

/// Support-restricted natural log: eigenvalues <= cutoff map to zero. Only
/// meaningful in traces against states supported inside the support.
inline Matrix matrix_log(const SpectralDecomposition& sd, double support_cutoff) {
  return apply_spectral_function(
      sd, [](double x) { return std::log(x); }, support_cutoff);
}

inline Matrix matrix_log(const Matrix& m, double support_cutoff) {
  return matrix_log(eigh(m), support_cutoff);
}

/// Kronecker product with a dimension cap guarding against runaway tensor
/// powers.
inline Matrix tensor_product(const Matrix& a, const Matrix& b,
                             int dimension_cap = kDimensionCap) {
  const long dim = a.rows() * b.rows();
  if (dim > dimension_cap) {
    std::ostringstream oss;
    oss << "tensor_product: resulting dimension " << dim
        << " exceeds cap " << dimension_cap;
    throw std::length_error(oss.str());
  }
  return Eigen::kroneckerProduct(a, b);
}

inline int product_of(const std::vector<int>& dims) {
  return std::accumulate(dims.begin(), dims.end(), 1, std::multiplies<int>());
}

namespace detail {

// Composite index <-> digit decomposition. Factor 0 is the most significant
// digit, matching the Kronecker product convention.
inline std::vector<int> factor_strides(const std::vector<int>& dims) {
  std::vector<int> strides(dims.size());
  int s = 1;
  for (int j = static_cast<int>(dims.size()) - 1; j >= 0; --j) {
    strides[j] = s;
    s *= dims[j];
  }
  return strides;
}

}  // namespace detail

/// Partial trace over the factors NOT listed in keep. `dims` lists the tensor
/// factor dimensions (factor 0 most significant); `keep` lists the factor
/// indices retained, in increasing order.
inline Matrix partial_trace(const Matrix& m, const std::vector<int>& dims,
                            const std::vector<int>& keep) {
  const int total = product_of(dims);
  if (m.rows() != total || m.cols() != total) {
    std::ostringstream oss;
    oss << "partial_trace: dims product " << total
        << " does not match matrix dimension " << m.rows();
    throw std::invalid_argument(oss.str());
  }
  const int k = static_cast<int>(dims.size());
  std::vector<bool> kept(k, false);
  for (int j : keep) {
    if (j < 0 || j >= k) throw std::invalid_argument("partial_trace: bad keep index");
    kept[j] = true;
  }
  const auto strides = detail::factor_strides(dims);

  int out_dim = 1, trace_dim = 1;
  for (int j = 0; j < k; ++j) (kept[j] ? out_dim : trace_dim) *= dims[j];

  // Precompute for every composite index its kept part and traced part.
  std::vector<int> kept_part(total), traced_part(total);
  for (int idx = 0; idx < total; ++idx) {
    int rem = idx, kp = 0, tp = 0;
    for (int j = 0; j < k; ++j) {
      const int digit = rem / strides[j];
      rem %= strides[j];
      if (kept[j]) kp = kp * dims[j] + digit;
      else tp = tp * dims[j] + digit;
    }
    kept_part[idx] = kp;
    traced_part[idx] = tp;
  }

  Matrix out = Matrix::Zero(out_dim, out_dim);
  // Group indices by traced part so the inner accumulation touches only
  // matching pairs.
  std::vector<std::vector<int>> by_trace(trace_dim);
  for (int idx = 0; idx < total; ++idx) by_trace[traced_part[idx]].push_back(idx);
  for (const auto& group : by_trace) {
    for (int i : group) {
      for (int j : group) {
        out(kept_part[i], kept_part[j]) += m(i, j);
      }
    }
  }
  return out;
}

/// Conjugates M by the unitary that reorders tensor factors. new_order[p]
/// names the old factor that sits at position p afterwards.
inline Matrix reorder_factors(const Matrix& m, const std::vector<int>& dims,
                              const std::vector<int>& new_order) {
  const int total = product_of(dims);
  if (m.rows() != total) throw std::invalid_argument("reorder_factors: dim mismatch");
  const int k = static_cast<int>(dims.size());
  if (static_cast<int>(new_order.size()) != k) {
    throw std::invalid_argument("reorder_factors: order length mismatch");
  }
  const auto strides = detail::factor_strides(dims);
  std::vector<int> new_dims(k);
  for (int p = 0; p < k; ++p) new_dims[p] = dims[new_order[p]];
  const auto new_strides = detail::factor_strides(new_dims);

  std::vector<int> map(total);
  for (int idx = 0; idx < total; ++idx) {
    int rem = idx;
    std::vector<int> digit(k);
    for (int j = 0; j < k; ++j) {
      digit[j] = rem / strides[j];
      rem %= strides[j];
    }
    int out = 0;
    for (int p = 0; p < k; ++p) out += digit[new_order[p]] * new_strides[p];
    map[idx] = out;
  }
  Matrix out(total, total);
  for (int i = 0; i < total; ++i) {
    for (int j = 0; j < total; ++j) out(map[i], map[j]) = m(i, j);
  }
  return out;
}

struct MatrixNorms {
  double trace_norm = 0.0;
  double operator_norm = 0.0;
  double hilbert_schmidt = 0.0;
  double max_entry = 0.0;
};

/// Trace norm, operator norm, Hilbert-Schmidt norm and max entry via a
/// singular value decomposition.
inline MatrixNorms norms(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  MatrixNorms out;
  out.trace_norm = svd.singularValues().sum();
  out.operator_norm = svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0;
  out.hilbert_schmidt = m.norm();
  out.max_entry = m.size() > 0 ? max_abs_entry(m) : 0.0;
  return out;
}

inline double trace_norm(const Matrix& m) { return norms(m).trace_norm; }

inline double operator_norm(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0;
}

inline Matrix commutator(const Matrix& x, const Matrix& y) {
  return x * y - y * x;
}

inline double commutator_norm(const Matrix& x, const Matrix& y) {
  return max_abs_entry(commutator(x, y));
}

inline double real_trace(const Matrix& m) { return m.trace().real(); }

inline double real_inner(const Matrix& a, const Matrix& b) {
  // tr[a^dag b], real part; Frobenius inner product for Hermitian a, b.
  return (a.adjoint() * b).trace().real();
}

/// Orthonormal basis of d x d Hermitian matrices (d^2 elements) under the
/// Frobenius inner product: diagonal units, symmetric and antisymmetric
/// off-diagonal combinations.
inline std::vector<Matrix> hermitian_basis(int d) {
  std::vector<Matrix> basis;
  basis.reserve(static_cast<size_t>(d) * d);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (int i = 0; i < d; ++i) {
    Matrix e = Matrix::Zero(d, d);
    e(i, i) = 1.0;
    basis.push_back(e);
  }
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      Matrix s = Matrix::Zero(d, d);
      s(i, j) = inv_sqrt2;
      s(j, i) = inv_sqrt2;
      basis.push_back(s);
      Matrix a = Matrix::Zero(d, d);
      a(i, j) = Complex(0.0, inv_sqrt2);
      a(j, i) = Complex(0.0, -inv_sqrt2);
      basis.push_back(a);
    }
  }
  return basis;
}

/// Projector onto the support of a PSD matrix (eigenvalues above the cutoff).
inline Matrix support_projector(const SpectralDecomposition& sd, double cutoff) {
  return apply_spectral_function(
      sd, [](double) { return 1.0; }, cutoff);
}

}  // namespace uhlmann
