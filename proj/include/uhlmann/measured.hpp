#pragma once

// Measured Renyi and measured relative entropies via their variational
// formulas, solved by first-order optimization over a positive witness
// tau = exp(G). The exp parameterization keeps the witness strictly positive
// definite without constraints.

#include "uhlmann/divergences.hpp"

namespace uhlmann {

inline constexpr double kGeneratorNormCap = 60.0;
inline constexpr double kWitnessRegularization = 1e-9;

struct WitnessSolveOptions {
  int budget = 5000;
  double gradient_tol = 1e-7;
  double armijo_c = 1e-4;
  double shrink = 0.5;
  Matrix warm_start;  // optional initial generator
};

struct VariationalResult {
  double value = 0.0;      // divergence in bits
  double q_value = 0.0;    // optimized Q (Renyi orders; exp of value for alpha=1)
  Matrix generator;        // witness tau = exp(generator)
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  double perturbation = 0.0;  // full-rank regularization applied to the inputs
};

namespace detail {

// Divided-difference kernel for exp on the eigenbasis of the generator:
// the adjoint of the Frechet derivative of G -> exp(scale * G).
inline Matrix exp_transform(const SpectralDecomposition& sd, double scale,
                            const Matrix& x) {
  const int n = sd.dim();
  Matrix xt = sd.eigenvectors.adjoint() * x * sd.eigenvectors;
  for (int i = 0; i < n; ++i) {
    const double a = scale * sd.eigenvalues(i);
    for (int j = 0; j < n; ++j) {
      const double b = scale * sd.eigenvalues(j);
      const double mid = std::exp(0.5 * (a + b));
      const double half = 0.5 * (a - b);
      const double sinhc =
          (std::abs(half) < 1e-8) ? 1.0 + half * half / 6.0 : std::sinh(half) / half;
      xt(i, j) *= mid * sinhc;
    }
  }
  return sd.eigenvectors * xt * sd.eigenvectors.adjoint();
}

inline Matrix clamp_generator(const Matrix& g, double cap = kGeneratorNormCap) {
  const auto sd = eigh(hermitize(g));
  if (sd.operator_norm() <= cap) return hermitize(g);
  return apply_spectral_function(
      sd, [cap](double x) { return std::clamp(x, -cap, cap); });
}

inline Matrix exp_of(const SpectralDecomposition& sd, double scale) {
  RealVector vals(sd.dim());
  for (int i = 0; i < sd.dim(); ++i) vals(i) = std::exp(scale * sd.eigenvalues(i));
  return sd.eigenvectors * vals.asDiagonal() * sd.eigenvectors.adjoint();
}

// Mixes in a little identity when an input is numerically rank deficient;
// the variational optima are only attained on full-rank pairs.
inline std::pair<DensityMatrix, double> regularize_full_rank(
    const DensityMatrix& rho) {
  const auto sd = eigh(rho.mat);
  if (sd.min_eigenvalue() > 1e-12 * std::max(1.0, sd.max_eigenvalue())) {
    return {rho, 0.0};
  }
  const int d = rho.dim();
  Matrix m = (1.0 - kWitnessRegularization) * rho.mat +
             kWitnessRegularization / d * Matrix::Identity(d, d);
  return {DensityMatrix{m, rho.factor_dims}, kWitnessRegularization};
}

inline Matrix geometric_start(const DensityMatrix& rho, const DensityMatrix& sigma) {
  const auto sd_r = eigh(rho.mat);
  const auto sd_s = eigh(sigma.mat);
  const Matrix g = 0.5 * (matrix_log(sd_r, default_support_cutoff(sd_r)) +
                          matrix_log(sd_s, default_support_cutoff(sd_s)));
  return clamp_generator(g);
}

struct WitnessObjective {
  // Returns the value to MINIMIZE and its gradient.
  std::function<double(const SpectralDecomposition&)> value;
  std::function<Matrix(const SpectralDecomposition&)> gradient;
};

struct WitnessSolution {
  Matrix generator;
  SpectralDecomposition generator_eigh;
  double minimized = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Gradient descent with Armijo backtracking on the generator, restarting once
// from the identity witness on stall.
inline WitnessSolution solve_witness(const WitnessObjective& obj, Matrix g0,
                                     const WitnessSolveOptions& opt) {
  WitnessSolution sol;
  Matrix g = clamp_generator(g0);
  auto sd = eigh(g);
  double f = obj.value(sd);
  double step = 1.0;
  bool restarted = false;
  int iter = 0;
  while (iter < opt.budget) {
    ++iter;
    const Matrix grad = obj.gradient(sd);
    const double gnorm = grad.norm();
    // objective values scale with the witness; the tolerance is relative
    if (gnorm < opt.gradient_tol * std::max(1.0, std::abs(f))) {
      sol.converged = true;
      sol.gradient_norm = gnorm;
      break;
    }
    sol.gradient_norm = gnorm;
    double t = std::min(step * 2.0, 1e6);
    bool accepted = false;
    while (t > 1e-16) {
      const Matrix cand = clamp_generator(g - t * grad);
      const auto sd_cand = eigh(cand);
      const double f_cand = obj.value(sd_cand);
      if (f_cand <= f - opt.armijo_c * t * gnorm * gnorm) {
        g = cand;
        sd = sd_cand;
        f = f_cand;
        step = t;
        accepted = true;
        break;
      }
      t *= opt.shrink;
    }
    if (!accepted) {
      if (!restarted) {
        restarted = true;
        g = Matrix::Zero(g.rows(), g.cols());
        sd = eigh(g);
        f = obj.value(sd);
        step = 1.0;
        continue;
      }
      break;  // stalled twice: report the best point found
    }
  }
  sol.generator = g;
  sol.generator_eigh = sd;
  sol.minimized = f;
  sol.iterations = iter;
  if (!sol.converged) {
    sol.gradient_norm = obj.gradient(sd).norm();
    sol.converged =
        sol.gradient_norm < opt.gradient_tol * std::max(1.0, std::abs(f));
  }
  return sol;
}

}  // namespace detail

/// Measured Renyi divergence D_{alpha,M} through the variational formula
/// inf/sup over tau > 0 of alpha tr[rho tau^{(alpha-1)/alpha}]
/// + (1-alpha) tr[sigma tau]. Minimization for alpha < 1, maximization for
/// alpha > 1. On budget exhaustion the value is still a one-sided bound.
inline VariationalResult measured_renyi(const DensityMatrix& rho_in,
                                        const DensityMatrix& sigma_in,
                                        double alpha,
                                        const WitnessSolveOptions& opt = {}) {
  if (!(alpha >= 0.5) || alpha == 1.0 || std::isinf(alpha)) {
    throw std::invalid_argument("measured_renyi: alpha must lie in [1/2,1) or (1,inf)");
  }
  if (rho_in.dim() != sigma_in.dim()) {
    throw std::invalid_argument("measured_renyi: dimension mismatch");
  }
  auto [rho, pr] = detail::regularize_full_rank(rho_in);
  auto [sigma, ps] = detail::regularize_full_rank(sigma_in);
  const double c = (alpha - 1.0) / alpha;
  const double sign = (alpha < 1.0) ? 1.0 : -1.0;  // minimize sign * objective

  detail::WitnessObjective obj;
  obj.value = [&, c, alpha](const SpectralDecomposition& sd) {
    const double t1 = (rho.mat * detail::exp_of(sd, c)).trace().real();
    const double t2 = (sigma.mat * detail::exp_of(sd, 1.0)).trace().real();
    return sign * (alpha * t1 + (1.0 - alpha) * t2);
  };
  obj.gradient = [&, c, alpha](const SpectralDecomposition& sd) {
    const Matrix gr = (alpha - 1.0) * (detail::exp_transform(sd, c, rho.mat) -
                                       detail::exp_transform(sd, 1.0, sigma.mat));
    return Matrix(sign * hermitize(gr));
  };

  Matrix g0 = (opt.warm_start.size() > 0) ? opt.warm_start
                                          : detail::geometric_start(rho, sigma);
  const auto sol = detail::solve_witness(obj, g0, opt);

  VariationalResult out;
  out.q_value = sign * sol.minimized;
  out.value = log2_safe(out.q_value) / (alpha - 1.0);
  out.generator = sol.generator;
  out.gradient_norm = sol.gradient_norm;
  out.iterations = sol.iterations;
  out.converged = sol.converged;
  out.perturbation = std::max(pr, ps);
  return out;
}

/// Measured relative entropy through the affine variational form
/// sup over tau > 0 of tr[rho log tau] + 1 - tr[sigma tau]; the reported
/// value uses the log form, which agrees at the optimum and is a lower bound
/// on D_M at any witness.
inline VariationalResult measured_relative(const DensityMatrix& rho_in,
                                           const DensityMatrix& sigma_in,
                                           const WitnessSolveOptions& opt = {}) {
  if (rho_in.dim() != sigma_in.dim()) {
    throw std::invalid_argument("measured_relative: dimension mismatch");
  }
  auto [rho, pr] = detail::regularize_full_rank(rho_in);
  auto [sigma, ps] = detail::regularize_full_rank(sigma_in);

  detail::WitnessObjective obj;
  obj.value = [&](const SpectralDecomposition& sd) {
    double t1 = 0.0;
    const Matrix rt = sd.eigenvectors.adjoint() * rho.mat * sd.eigenvectors;
    for (int i = 0; i < sd.dim(); ++i) t1 += rt(i, i).real() * sd.eigenvalues(i);
    const double t2 = (sigma.mat * detail::exp_of(sd, 1.0)).trace().real();
    return -(t1 + 1.0 - t2);
  };
  obj.gradient = [&](const SpectralDecomposition& sd) {
    return Matrix(-hermitize(rho.mat - detail::exp_transform(sd, 1.0, sigma.mat)));
  };

  Matrix g0 = (opt.warm_start.size() > 0) ? opt.warm_start
                                          : detail::geometric_start(rho, sigma);
  const auto sol = detail::solve_witness(obj, g0, opt);

  const double t1 = (rho.mat * sol.generator).trace().real();
  const double t2 =
      (sigma.mat * detail::exp_of(sol.generator_eigh, 1.0)).trace().real();
  VariationalResult out;
  out.value = (t1 - std::log(t2)) / kLn2;  // log form
  out.q_value = -sol.minimized;            // affine form, in nats
  out.generator = sol.generator;
  out.gradient_norm = sol.gradient_norm;
  out.iterations = sol.iterations;
  out.converged = sol.converged;
  out.perturbation = std::max(pr, ps);
  return out;
}

/// Max over an orthonormal Hermitian direction basis of the relative error
/// between the analytic directional derivative of the variational objective
/// and a central finite difference with step h.
inline double witness_gradient_check(const DensityMatrix& rho,
                                     const DensityMatrix& sigma, double alpha,
                                     const Matrix& g, double h) {
  if (h < 1e-7 || h > 1e-3) {
    throw std::invalid_argument("witness_gradient_check: h must lie in [1e-7, 1e-3]");
  }
  std::function<double(const Matrix&)> value;
  std::function<Matrix(const Matrix&)> gradient;
  if (alpha == 1.0) {
    value = [&](const Matrix& gen) {
      const auto sd = eigh(hermitize(gen));
      const double t1 = (rho.mat * gen).trace().real();
      const double t2 = (sigma.mat * detail::exp_of(sd, 1.0)).trace().real();
      return t1 + 1.0 - t2;
    };
    gradient = [&](const Matrix& gen) {
      const auto sd = eigh(hermitize(gen));
      return Matrix(hermitize(rho.mat - detail::exp_transform(sd, 1.0, sigma.mat)));
    };
  } else {
    const double c = (alpha - 1.0) / alpha;
    value = [&, c](const Matrix& gen) {
      const auto sd = eigh(hermitize(gen));
      const double t1 = (rho.mat * detail::exp_of(sd, c)).trace().real();
      const double t2 = (sigma.mat * detail::exp_of(sd, 1.0)).trace().real();
      return alpha * t1 + (1.0 - alpha) * t2;
    };
    gradient = [&, c](const Matrix& gen) {
      const auto sd = eigh(hermitize(gen));
      return Matrix(hermitize((alpha - 1.0) *
                              (detail::exp_transform(sd, c, rho.mat) -
                               detail::exp_transform(sd, 1.0, sigma.mat))));
    };
  }
  const Matrix grad = gradient(g);
  double worst = 0.0;
  for (const Matrix& dir : hermitian_basis(static_cast<int>(g.rows()))) {
    const double fd = (value(g + h * dir) - value(g - h * dir)) / (2.0 * h);
    const double an = real_inner(grad, dir);
    worst = std::max(worst, std::abs(an - fd) / (1.0 + std::abs(fd)));
  }
  return worst;
}

/// Dispatch over the order tag. The measured min- and max-relative entropies
/// coincide with their unmeasured counterparts and route to the closed forms.
inline VariationalResult measured_divergence(const DensityMatrix& rho,
                                             const DensityMatrix& sigma,
                                             const DivergenceOrder& order,
                                             const WitnessSolveOptions& opt = {}) {
  switch (order.kind) {
    case DivergenceOrder::Kind::Min: {
      VariationalResult out;
      out.value = min_relative_entropy(rho, sigma).value;
      out.generator = Matrix::Zero(rho.dim(), rho.dim());
      out.converged = true;
      return out;
    }
    case DivergenceOrder::Kind::Max: {
      VariationalResult out;
      out.value = max_relative_entropy(rho, sigma).value;
      out.generator = Matrix::Zero(rho.dim(), rho.dim());
      out.converged = true;
      return out;
    }
    case DivergenceOrder::Kind::Relative:
      return measured_relative(rho, sigma, opt);
    case DivergenceOrder::Kind::Renyi:
      return measured_renyi(rho, sigma, order.alpha, opt);
  }
  throw std::logic_error("measured_divergence: unreachable");
}

}  // namespace uhlmann
