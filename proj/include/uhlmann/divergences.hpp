#pragma once

// Closed-form (unmeasured) divergences: sandwiched Renyi D_alpha, relative
// entropy, min- and max-relative entropy and fidelity, with extended-real
// (+inf) support handling. All values are reported in bits (base-2 logs).

#include "uhlmann/states.hpp"

namespace uhlmann {

inline constexpr double kSupportProjTol = 1e-8;

/// Order parameter alpha in [1/2, inf] with tagged special cases: 1/2 (min),
/// 1 (relative), inf (max). Renyi(alpha) covers the remaining range and
/// routes through the sandwiched formula.
struct DivergenceOrder {
  enum class Kind { Min, Renyi, Relative, Max };
  Kind kind = Kind::Relative;
  double alpha = 1.0;

  static DivergenceOrder min() { return {Kind::Min, 0.5}; }
  static DivergenceOrder relative() { return {Kind::Relative, 1.0}; }
  static DivergenceOrder max() {
    return {Kind::Max, std::numeric_limits<double>::infinity()};
  }
  static DivergenceOrder renyi(double a) {
    if (!(a >= 0.5) || a == 0.5 || a == 1.0 || std::isinf(a)) {
      throw std::invalid_argument(
          "DivergenceOrder::renyi: alpha must lie in (1/2,1) or (1,inf)");
    }
    return {Kind::Renyi, a};
  }
  /// Maps 0.5 -> Min, 1 -> Relative, inf -> Max, otherwise Renyi(alpha).
  static DivergenceOrder from_alpha(double a) {
    if (a == 0.5) return min();
    if (a == 1.0) return relative();
    if (std::isinf(a)) return max();
    return renyi(a);
  }

  std::string label() const {
    switch (kind) {
      case Kind::Min: return "0.5";
      case Kind::Relative: return "1";
      case Kind::Max: return "inf";
      default: {
        std::ostringstream oss;
        oss << alpha;
        return oss.str();
      }
    }
  }
};

struct DivergenceValue {
  double value = 0.0;  // bits; +inf on support violation for alpha >= 1
  bool support_violation = false;

  bool is_infinite() const { return std::isinf(value); }
};

inline DivergenceValue infinite_divergence() {
  return {std::numeric_limits<double>::infinity(), true};
}

/// True iff every eigenvector of rho above the cutoff lies in the support of
/// sigma within projection residual kSupportProjTol.
inline bool support_condition(const DensityMatrix& rho,
                              const DensityMatrix& sigma) {
  const auto sd_rho = eigh(rho.mat);
  const auto sd_sigma = eigh(sigma.mat);
  const Matrix proj = support_projector(sd_sigma, default_support_cutoff(sd_sigma));
  const Matrix complement =
      Matrix::Identity(sigma.dim(), sigma.dim()) - proj;
  const double rho_cutoff = default_support_cutoff(sd_rho);
  for (int i = 0; i < sd_rho.dim(); ++i) {
    if (sd_rho.eigenvalues(i) <= rho_cutoff) continue;
    const double residual = (complement * sd_rho.eigenvectors.col(i)).norm();
    if (residual > kSupportProjTol) return false;
  }
  return true;
}

/// Uhlmann fidelity F = ||sqrt(rho) sqrt(sigma)||_1^2, clamped to [0, 1].
inline double fidelity(const DensityMatrix& rho, const DensityMatrix& sigma) {
  if (rho.dim() != sigma.dim()) {
    throw std::invalid_argument("fidelity: dimension mismatch");
  }
  // clamped square root: projection residues can leave -1e-11 eigenvalues
  const Matrix sqrt_sigma = apply_spectral_function(
      sigma.mat, [](double x) { return std::sqrt(std::max(x, 0.0)); });
  const Matrix m = hermitize(sqrt_sigma * rho.mat * sqrt_sigma);
  const auto sd = eigh(m);
  double root_sum = 0.0;
  for (int i = 0; i < sd.dim(); ++i) {
    root_sum += std::sqrt(std::max(sd.eigenvalues(i), 0.0));
  }
  return std::clamp(root_sum * root_sum, 0.0, 1.0);
}

struct QAlphaResult {
  double q = 0.0;
  bool support_violation = false;
};

/// Q_alpha = tr[(sigma^{(1-alpha)/2alpha} rho sigma^{(1-alpha)/2alpha})^alpha]
/// with the sigma powers taken on its support. For alpha > 1 a support
/// violation is flagged (the divergence is then +inf by definition).
inline QAlphaResult q_alpha(const DensityMatrix& rho,
                            const DensityMatrix& sigma, double alpha) {
  if (rho.dim() != sigma.dim()) {
    throw std::invalid_argument("q_alpha: dimension mismatch");
  }
  if (!(alpha >= 0.5) || alpha == 1.0 || std::isinf(alpha)) {
    throw std::invalid_argument("q_alpha: alpha must lie in [1/2,1) or (1,inf)");
  }
  const double p = (1.0 - alpha) / (2.0 * alpha);
  const auto sd_sigma = eigh(sigma.mat);
  const Matrix s = matrix_power(sd_sigma, p, default_support_cutoff(sd_sigma));
  const Matrix m = hermitize(s * rho.mat * s);
  const auto sd_m = eigh(m);
  double q = 0.0;
  for (int i = 0; i < sd_m.dim(); ++i) {
    const double mu = sd_m.eigenvalues(i);
    if (mu > 0.0) q += std::pow(mu, alpha);
  }
  QAlphaResult out;
  out.q = q;
  out.support_violation = (alpha > 1.0) && !support_condition(rho, sigma);
  return out;
}

/// Relative entropy tr[rho (log rho - log sigma)] in bits, +inf outside
/// the support condition. Contributions 0*log 0 are taken as 0.
inline DivergenceValue relative_entropy(const DensityMatrix& rho,
                                        const DensityMatrix& sigma) {
  if (!support_condition(rho, sigma)) return infinite_divergence();
  const auto sd_rho = eigh(rho.mat);
  const auto sd_sigma = eigh(sigma.mat);
  const double cut_rho = default_support_cutoff(sd_rho);
  double h = 0.0;
  for (int i = 0; i < sd_rho.dim(); ++i) {
    const double lambda = sd_rho.eigenvalues(i);
    if (lambda > cut_rho) h += lambda * std::log(lambda);
  }
  const Matrix log_sigma =
      matrix_log(sd_sigma, default_support_cutoff(sd_sigma));
  const double cross = (rho.mat * log_sigma).trace().real();
  return {(h - cross) / kLn2, false};
}

/// Max-relative entropy log2 || sigma^{-1/2} rho sigma^{-1/2} ||_op on the
/// support, +inf on support violation.
inline DivergenceValue max_relative_entropy(const DensityMatrix& rho,
                                            const DensityMatrix& sigma) {
  if (!support_condition(rho, sigma)) return infinite_divergence();
  const auto sd_sigma = eigh(sigma.mat);
  const Matrix inv_sqrt =
      matrix_power(sd_sigma, -0.5, default_support_cutoff(sd_sigma));
  const auto sd = eigh(hermitize(inv_sqrt * rho.mat * inv_sqrt));
  const double top = std::max(sd.max_eigenvalue(), 0.0);
  if (top <= 0.0) return {-std::numeric_limits<double>::infinity(), false};
  return {log2_safe(top), false};
}

inline DivergenceValue min_relative_entropy(const DensityMatrix& rho,
                                            const DensityMatrix& sigma) {
  const double f = fidelity(rho, sigma);
  if (f <= 0.0) {
    return {std::numeric_limits<double>::infinity(),
            !support_condition(rho, sigma)};
  }
  return {-log2_safe(f), !support_condition(rho, sigma)};
}

/// Dispatch over the order tag. alpha = 1 and alpha = inf are explicit code
/// paths rather than limits of the Renyi formula.
inline DivergenceValue divergence(const DensityMatrix& rho,
                                  const DensityMatrix& sigma,
                                  const DivergenceOrder& order) {
  if (rho.dim() != sigma.dim()) {
    throw std::invalid_argument("divergence: dimension mismatch");
  }
  switch (order.kind) {
    case DivergenceOrder::Kind::Min:
      return min_relative_entropy(rho, sigma);
    case DivergenceOrder::Kind::Relative:
      return relative_entropy(rho, sigma);
    case DivergenceOrder::Kind::Max:
      return max_relative_entropy(rho, sigma);
    case DivergenceOrder::Kind::Renyi: {
      const auto qa = q_alpha(rho, sigma, order.alpha);
      if (qa.support_violation) return infinite_divergence();
      return {log2_safe(qa.q) / (order.alpha - 1.0), false};
    }
  }
  throw std::logic_error("divergence: unreachable");
}

inline DivergenceValue divergence_alpha(const DensityMatrix& rho,
                                        const DensityMatrix& sigma,
                                        double alpha) {
  return divergence(rho, sigma, DivergenceOrder::from_alpha(alpha));
}

}  // namespace uhlmann
