#pragma once

// Pinching maps onto the eigenspace clusters of a reference Hermitian matrix,
// and the pinched-pipeline construction (rho', rho_bar, map E, sigma_bar)
// behind the regularized Uhlmann theorem at finite level n.

#include "uhlmann/divergences.hpp"

#include <array>

namespace uhlmann {

// Tensor-power spectra split analytically-equal eigenvalue products at
// floating-point level; the cluster tolerance is widened at level n >= 2.
inline constexpr double kPipelineClusterTolScale = 1e-7;
inline constexpr int kPipelineMaxDim = 4096;

struct PinchingMap {
  SpectralDecomposition source;
  std::vector<Matrix> projectors;  // one per eigenvalue cluster

  int spec_size() const { return static_cast<int>(projectors.size()); }
};

inline PinchingMap make_pinching(const Matrix& h,
                                 double cluster_tol_scale = kClusterTolScale) {
  PinchingMap map;
  map.source = eigh(h, cluster_tol_scale);
  map.projectors.reserve(map.source.cluster_count);
  for (int k = 0; k < map.source.cluster_count; ++k) {
    map.projectors.push_back(map.source.cluster_projector(k));
  }
  return map;
}

inline Matrix pinch(const PinchingMap& map, const Matrix& x) {
  if (x.rows() != map.source.dim()) {
    throw std::invalid_argument("pinch: dimension mismatch");
  }
  Matrix out = Matrix::Zero(x.rows(), x.cols());
  for (const Matrix& p : map.projectors) out += p * x * p;
  return out;
}

inline Matrix pinch(const Matrix& h, const Matrix& x,
                    double cluster_tol_scale = kClusterTolScale) {
  return pinch(make_pinching(h, cluster_tol_scale), x);
}

/// Minimum eigenvalue of |spec(H)| P_H(X) - X; the pinching inequality says
/// this slack is nonnegative for PSD X.
inline double pinching_inequality_check(const Matrix& h, const Matrix& x) {
  const auto map = make_pinching(h);
  const Matrix slack = static_cast<double>(map.spec_size()) * pinch(map, x) - x;
  return eigh(hermitize(slack)).min_eigenvalue();
}

/// The level-n states of the pinching construction:
///   rho'  = P_{sigma_A^n x 1}(rho_AB^n)
///   rho_bar = P_{rho'_{A^n} x 1}(rho')
///   sigma_bar = E(sigma_A^n),  E(X) = rho_bar^{1/2} rho_bar_A^{-1/2} X
///                                      rho_bar_A^{-1/2} rho_bar^{1/2}
/// together with the residuals of the six commutation facts the construction
/// relies on. All matrices carry the grouped factor layout [A^n, B^n].
struct PinchedPipeline {
  int level = 1;
  DensityMatrix rho_prime;
  DensityMatrix rho_bar;
  DensityMatrix sigma_bar;
  std::array<double, 6> fact_residuals{};  // (i)..(vi) as max-entry norms
  double marginal_residual = 0.0;          // ||tr_B sigma_bar - sigma_A^n||_max
  int spec_sigma = 0;                      // |spec(sigma_A^n)|
  int spec_rho_prime_A = 0;                // |spec(rho'_{A^n})|

  double max_fact_residual() const {
    return *std::max_element(fact_residuals.begin(), fact_residuals.end());
  }
};

inline PinchedPipeline build_pipeline(const DensityMatrix& rho_AB,
                                      const DensityMatrix& sigma_A, int n) {
  if (rho_AB.factor_dims.size() != 2) {
    throw std::invalid_argument("build_pipeline: rho_AB must be bipartite");
  }
  const int dA1 = rho_AB.factor_dims[0];
  const int dB1 = rho_AB.factor_dims[1];
  if (sigma_A.dim() != dA1) {
    throw std::invalid_argument("build_pipeline: sigma_A dimension mismatch");
  }
  double total = std::pow(static_cast<double>(dA1 * dB1), n);
  if (total > kPipelineMaxDim) {
    throw std::length_error("build_pipeline: level exceeds the dimension cap");
  }
  const int dA = static_cast<int>(std::round(std::pow(dA1, n)));
  const int dB = static_cast<int>(std::round(std::pow(dB1, n)));
  const double tol_scale = (n >= 2) ? kPipelineClusterTolScale : kClusterTolScale;

  const Matrix rho_n = tensor_power(rho_AB, n).mat;
  const Matrix sigma_n = tensor_power(sigma_A, n).mat;
  const Matrix id_b = Matrix::Identity(dB, dB);

  const Matrix h1 = tensor_product(sigma_n, id_b);
  const Matrix rho_prime = pinch(h1, rho_n, tol_scale);
  const Matrix rho_prime_A = partial_trace(rho_prime, {dA, dB}, {0});

  const Matrix h2 = tensor_product(hermitize(rho_prime_A), id_b);
  const Matrix rho_bar = pinch(h2, rho_prime, tol_scale);
  const Matrix rho_bar_A = partial_trace(rho_bar, {dA, dB}, {0});

  const auto sd_bar_A = eigh(hermitize(rho_bar_A), tol_scale);
  const Matrix inv_sqrt_A =
      matrix_power(sd_bar_A, -0.5, default_support_cutoff(sd_bar_A));
  const Matrix sqrt_rho_bar = apply_spectral_function(
      hermitize(rho_bar), [](double x) { return std::sqrt(std::max(x, 0.0)); });

  const Matrix mid = tensor_product(inv_sqrt_A * sigma_n * inv_sqrt_A, id_b);
  const Matrix sigma_bar = hermitize(sqrt_rho_bar * mid * sqrt_rho_bar);

  PinchedPipeline out;
  out.level = n;
  out.rho_prime = {rho_prime, {dA, dB}};
  out.rho_bar = {hermitize(rho_bar), {dA, dB}};
  out.sigma_bar = {sigma_bar, {dA, dB}};

  const Matrix rho_bar_A_ext = tensor_product(hermitize(rho_bar_A), id_b);
  const Matrix sigma_n_ext = tensor_product(sigma_n, id_b);
  out.fact_residuals[0] = max_abs_entry(rho_bar_A - rho_prime_A);
  out.fact_residuals[1] = commutator_norm(rho_bar, rho_bar_A_ext);
  out.fact_residuals[2] = commutator_norm(rho_bar, sigma_n_ext);
  out.fact_residuals[3] = commutator_norm(rho_bar_A, sigma_n);
  out.fact_residuals[4] = commutator_norm(sigma_n_ext, sigma_bar);
  out.fact_residuals[5] = commutator_norm(rho_bar_A_ext, sigma_bar);
  out.marginal_residual =
      max_abs_entry(partial_trace(sigma_bar, {dA, dB}, {0}) - sigma_n);
  out.spec_sigma = make_pinching(h1, tol_scale).spec_size();
  out.spec_rho_prime_A = eigh(hermitize(rho_prime_A), tol_scale).cluster_count;
  return out;
}

/// Number of distinct eigenvalues of a permutation-invariant state under the
/// clustering tolerance. Rejects inputs that are not fixed points of
/// symmetrize. For n copies of a d-dimensional system the count is bounded
/// by (n+1)^{d^2}.
inline int permutation_invariant_spec_bound(const DensityMatrix& sigma_n, int n) {
  const auto sym = symmetrize(sigma_n, n);
  const double dev = max_abs_entry(sym.mat - sigma_n.mat);
  if (dev > 1e-10) {
    std::ostringstream oss;
    oss << "permutation_invariant_spec_bound: input is not permutation-"
           "invariant (residual "
        << dev << ")";
    throw std::invalid_argument(oss.str());
  }
  const double tol_scale = (n >= 2) ? kPipelineClusterTolScale : kClusterTolScale;
  return eigh(sigma_n.mat, tol_scale).cluster_count;
}

}  // namespace uhlmann
