#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "uhlmann/extension.hpp"

using namespace uhlmann;
using Catch::Matchers::WithinAbs;

namespace {

DensityMatrix random_bipartite(uint64_t seed) {
  return make_density(random_density(4, 4, seed).mat, {2, 2});
}

DensityMatrix appendix_c_rho() {
  Eigen::VectorXcd phi = Eigen::VectorXcd::Zero(4);
  phi(0) = std::sqrt(0.25);
  phi(3) = std::sqrt(0.75);
  return {Matrix(phi * phi.adjoint()), {2, 2}};
}

DensityMatrix maximally_mixed_qubit() {
  return {0.5 * Matrix::Identity(2, 2), {2}};
}

struct ClassicalInstance {
  DensityMatrix rho_AB;
  DensityMatrix sigma_A;
  std::vector<double> p, q;
};

ClassicalInstance classical_instance() {
  ClassicalInstance inst;
  inst.p = {0.1, 0.25, 0.4, 0.25};
  inst.q = {0.35, 0.65};
  inst.rho_AB = classical_embed(make_distribution(inst.p), {2, 2});
  inst.sigma_A = classical_embed(make_distribution(inst.q), {2});
  return inst;
}

}  // namespace

TEST_CASE("Dykstra projection onto the extension set", "[extension]") {
  const auto sigma_A = random_density(2, 2, 3);
  ExtensionGeometry geo{sigma_A.mat, 2, 2};
  SECTION("points already in the set are fixed") {
    const Matrix in_set =
        tensor_product(sigma_A.mat, random_density(2, 2, 4).mat);
    const auto res = project_extension_set(in_set, geo);
    CHECK(max_abs_entry(res.point - in_set) <= 1e-10);
    CHECK(res.residual <= 1e-10);
  }
  SECTION("wrong marginal is corrected") {
    const Matrix off = tensor_product(random_density(2, 2, 5).mat,
                                      random_density(2, 2, 6).mat);
    const auto res = project_extension_set(off, geo);
    CHECK(res.converged);
    CHECK(res.residual <= 1e-9);
    CHECK(max_abs_entry(partial_trace(res.point, {2, 2}, {0}) - sigma_A.mat) <=
          1e-10);
  }
  SECTION("indefinite input lands on a PSD extension") {
    Matrix x = hermitize(Matrix(random_density(4, 4, 7).mat -
                                0.6 * Matrix::Identity(4, 4)));
    const auto res = project_extension_set(x, geo);
    CHECK(res.residual <= 1e-9);
    CHECK(eigh(res.point).min_eigenvalue() >= -1e-10);
  }
}

TEST_CASE("beta0 quadrature normalization", "[extension]") {
  const auto quad = make_beta0_quadrature();
  CHECK(std::abs(beta0_normalization(quad) - 1.0) <= 1e-10);
  // doubling the nodes does not move the integral
  const auto fine = make_beta0_quadrature(12.0, 80);
  CHECK(std::abs(beta0_normalization(fine) - 1.0) <= 1e-10);
}

TEST_CASE("explicit beta0 extension", "[extension]") {
  SECTION("rho_A equal to sigma_A reproduces rho_AB") {
    const auto rho = random_bipartite(11);
    const auto rho_a = reduce(rho, {0});
    const auto ext = explicit_beta_extension(rho, rho_a);
    CHECK(max_abs_entry(ext.sigma.mat - rho.mat) <= 1e-9);
    CHECK(ext.marginal_residual <= 1e-9);
  }
  SECTION("classical instance gives the classical optimal extension") {
    const auto inst = classical_instance();
    const auto ext = explicit_beta_extension(inst.rho_AB, inst.sigma_A);
    const auto qbar = classical_optimal_extension(make_distribution(inst.p),
                                                  make_distribution(inst.q));
    const auto expected = classical_embed(qbar, {2, 2});
    CHECK(max_abs_entry(ext.sigma.mat - expected.mat) <= 1e-8);
  }
  SECTION("random instance: feasible and within the relative-entropy bound") {
    for (uint64_t seed : {21u, 22u}) {
      const auto rho = random_bipartite(seed);
      const auto sigma_a = random_density(2, 2, 100 + seed);
      const auto ext = explicit_beta_extension(rho, sigma_a);
      CHECK(ext.marginal_residual <= 1e-7);
      CHECK(eigh(ext.sigma.mat).min_eigenvalue() >= -1e-8);
      const double bound = relative_entropy(reduce(rho, {0}), sigma_a).value;
      const double measured = measured_relative(rho, ext.sigma).value;
      CHECK(measured <= bound + 1e-5);
    }
  }
  SECTION("level-2 extension is feasible") {
    const auto rho = random_bipartite(31);
    const auto sigma_a = random_density(2, 2, 131);
    const auto ext = explicit_beta_extension(rho, sigma_a, 2);
    CHECK(ext.marginal_residual <= 1e-7);
    CHECK(ext.sigma.factor_dims == std::vector<int>({4, 4}));
  }
}

TEST_CASE("support function", "[extension]") {
  const auto sigma_a = random_density(2, 2, 41);
  SECTION("identity witness gives the unit trace") {
    const auto res = support_function(Matrix::Identity(4, 4), sigma_a, 2, 2);
    CHECK_THAT(res.value, WithinAbs(1.0, 1e-9));
  }
  SECTION("A-local witness is pinned by the marginal constraint") {
    Matrix x(2, 2);
    x << 0.3, Complex(0.1, -0.2), Complex(0.1, 0.2), -0.7;
    const Matrix tau = tensor_product(x, Matrix::Identity(2, 2));
    const auto res = support_function(tau, sigma_a, 2, 2);
    const double expected = (sigma_a.mat * x).trace().real();
    CHECK_THAT(res.value, WithinAbs(expected, 1e-8));
  }
  SECTION("random witness matches the brute-force parameterization") {
    const Matrix tau = hermitize(random_density(4, 4, 42).mat * 4.0);
    const auto res = support_function(tau, sigma_a, 2, 2);
    const double brute =
        oracles::support_function_brute_force(tau, sigma_a.mat, 43);
    CHECK_THAT(res.value, WithinAbs(brute, 1e-5));
    CHECK(res.value <= res.dual_upper_bound + 1e-9);
  }
}

TEST_CASE("support function multiplicativity at n = 2", "[extension]") {
  const auto sigma_a = random_density(2, 2, 51);
  SECTION("identity witness has zero gap") {
    const double gap =
        support_multiplicativity_gap(Matrix::Identity(4, 4), sigma_a, 2, 2);
    CHECK_THAT(gap, WithinAbs(0.0, 1e-8));
  }
  SECTION("product-feasible witness achieving the max at a power point") {
    // tau = sigma_A x I/2: the maximizer is any feasible point, gap 0.
    const Matrix tau = tensor_product(sigma_a.mat, Matrix::Identity(2, 2));
    const double gap = support_multiplicativity_gap(tau, sigma_a, 2, 2);
    CHECK_THAT(gap, WithinAbs(0.0, 1e-6));
  }
  SECTION("random witness gap is nonnegative and modest") {
    const Matrix tau = hermitize(random_density(4, 4, 52).mat * 4.0);
    const double gap = support_multiplicativity_gap(tau, sigma_a, 2, 2);
    CHECK(gap >= -1e-6);
    CHECK(gap <= 0.5);
  }
}

TEST_CASE("minimize over extensions: Uhlmann equalities", "[extension]") {
  for (uint64_t seed : {61u, 62u, 63u}) {
    const auto rho = random_bipartite(seed);
    const auto sigma_a = random_density(2, 2, 200 + seed);
    const auto rho_a = reduce(rho, {0});
    SECTION("alpha = 1/2 at seed " + std::to_string(seed)) {
      ExtensionProblem prob{rho, sigma_a, 1, DivergenceOrder::min(), false};
      const auto rep = minimize_over_extensions(prob);
      const double closed = min_relative_entropy(rho_a, sigma_a).value;
      CHECK_THAT(rep.value.value, WithinAbs(closed, 1e-5));
      CHECK(rep.feasibility_residual <= 1e-7);
      CHECK(validate(rep.optimizer).pass());
      CHECK(rep.lower_bound <= rep.value.value + 1e-9);
      CHECK(rep.value.value <= rep.upper_bound + 1e-9);
    }
    SECTION("alpha = inf at seed " + std::to_string(seed)) {
      ExtensionProblem prob{rho, sigma_a, 1, DivergenceOrder::max(), false};
      const auto rep = minimize_over_extensions(prob);
      const double closed = max_relative_entropy(rho_a, sigma_a).value;
      CHECK_THAT(rep.value.value, WithinAbs(closed, 1e-5));
      CHECK(rep.feasibility_residual <= 1e-7);
    }
  }
}

TEST_CASE("minimize over extensions: classical instances are tight",
          "[extension]") {
  const auto inst = classical_instance();
  const auto rho_a = reduce(inst.rho_AB, {0});
  for (double a : {0.5, 0.75, 1.0, 2.0}) {
    ExtensionProblem prob{inst.rho_AB, inst.sigma_A, 1,
                          DivergenceOrder::from_alpha(a), false};
    const auto rep = minimize_over_extensions(prob);
    const double target = divergence_alpha(rho_a, inst.sigma_A, a).value;
    CHECK_THAT(rep.value.value, WithinAbs(target, 1e-6));
  }
}

TEST_CASE("strict gap at alpha = 2 on a generic instance", "[extension]") {
  const auto rho = random_bipartite(71);
  const auto sigma_a = random_density(2, 2, 271);
  ExtensionProblem prob{rho, sigma_a, 1, DivergenceOrder::renyi(2.0), false};
  const auto rep = minimize_over_extensions(prob);
  const double dpi = divergence_alpha(reduce(rho, {0}), sigma_a, 2.0).value;
  CHECK(rep.value.value >= dpi - 1e-7);  // DPI sandwich
  CHECK(rep.value.value <= rep.upper_bound + 1e-9);
}

TEST_CASE("measured minimization satisfies the sandwich", "[extension]") {
  const auto rho = random_bipartite(81);
  const auto sigma_a = random_density(2, 2, 281);
  const auto rho_a = reduce(rho, {0});
  for (double a : {0.75, 1.0, 2.0}) {
    ExtensionProblem prob{rho, sigma_a, 1, DivergenceOrder::from_alpha(a), true};
    const auto rep = minimize_over_extensions(prob);
    const double lower =
        measured_divergence(rho_a, sigma_a, DivergenceOrder::from_alpha(a)).value;
    const double upper = divergence_alpha(rho_a, sigma_a, a).value;
    CHECK(rep.value.value >= lower - 1e-4);
    CHECK(rep.value.value <= upper + 1e-4);
    CHECK(rep.feasibility_residual <= 1e-7);
  }
}

TEST_CASE("restricted pure minimum", "[extension]") {
  const auto rho = appendix_c_rho();
  const auto sigma_a = maximally_mixed_qubit();
  SECTION("max order diverges on the Appendix-C instance") {
    const auto v = restricted_pure_minimum(rho, sigma_a, DivergenceOrder::max());
    CHECK(v.is_infinite());
    CHECK(v.value > 30.0);
  }
  SECTION("min order matches the fidelity closed form") {
    const auto v = restricted_pure_minimum(rho, sigma_a, DivergenceOrder::min());
    // -log2((2 + sqrt 3)/4)
    CHECK_THAT(v.value, WithinAbs(0.1000313730470083, 1e-9));
    // cross-check by a seeded purification sweep with local refinement
    std::mt19937_64 rng(4242);
    const auto sd = eigh(rho.mat);
    const Eigen::VectorXcd phi = sd.eigenvectors.col(3);
    auto overlap2 = [&](const Matrix& v_b) {
      Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(4);
      for (int i = 0; i < 2; ++i) {
        for (int b = 0; b < 2; ++b) {
          psi(i * 2 + b) += std::sqrt(0.5) * v_b(b, i);
        }
      }
      return std::norm((phi.adjoint() * psi)(0));
    };
    Matrix best_v = Matrix::Identity(2, 2);
    double best = overlap2(best_v);
    for (int trial = 0; trial < 500; ++trial) {
      const Matrix v_b = random_unitary(2, rng());
      const double o = overlap2(v_b);
      if (o > best) {
        best = o;
        best_v = v_b;
      }
    }
    double radius = 0.3;
    int since = 0;
    while (radius > 1e-8) {
      Matrix h(2, 2);
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) h(i, j) = detail::gaussian_complex(rng);
      const auto sdh = eigh(hermitize(h));
      Eigen::VectorXcd phase(2);
      for (int i = 0; i < 2; ++i) {
        phase(i) = std::exp(Complex(0, radius * sdh.eigenvalues(i)));
      }
      const Matrix step =
          sdh.eigenvectors * phase.asDiagonal() * sdh.eigenvectors.adjoint();
      const Matrix cand = step * best_v;
      const double o = overlap2(cand);
      if (o > best + 1e-16) {
        best = o;
        best_v = cand;
        since = 0;
      } else if (++since > 60) {
        radius *= 0.5;
        since = 0;
      }
    }
    CHECK_THAT(-std::log2(best), WithinAbs(v.value, 1e-5));
  }
  SECTION("a purification of sigma_A itself has zero max-distance") {
    const auto psi = purify(sigma_a);
    const auto v = restricted_pure_minimum(psi, sigma_a, DivergenceOrder::max());
    CHECK_THAT(v.value, WithinAbs(0.0, 1e-9));
  }
  SECTION("mixed input is rejected") {
    const auto mixed = random_bipartite(91);
    CHECK_THROWS_AS(restricted_pure_minimum(mixed, sigma_a, DivergenceOrder::max()),
                    std::invalid_argument);
  }
}

TEST_CASE("regularized curve", "[extension]") {
  SECTION("classical instances are flat") {
    const auto inst = classical_instance();
    const auto rho_a = reduce(inst.rho_AB, {0});
    for (double a : {0.75, 2.0}) {
      ExtensionProblem prob{inst.rho_AB, inst.sigma_A, 1,
                            DivergenceOrder::from_alpha(a), false};
      const auto curve = regularized_curve(prob, 2);
      const double target = divergence_alpha(rho_a, inst.sigma_A, a).value;
      for (const auto& [n, v] : curve) {
        CHECK_THAT(v, WithinAbs(target, 1e-6));
      }
    }
  }
  SECTION("min and max orders are flat") {
    const auto rho = random_bipartite(95);
    const auto sigma_a = random_density(2, 2, 295);
    const auto rho_a = reduce(rho, {0});
    for (double a : {0.5, std::numeric_limits<double>::infinity()}) {
      ExtensionProblem prob{rho, sigma_a, 1, DivergenceOrder::from_alpha(a), false};
      const auto curve = regularized_curve(prob, 2);
      CHECK_THAT(curve[0].second, WithinAbs(curve[1].second, 1e-5));
      const double target = divergence_alpha(rho_a, sigma_a, a).value;
      CHECK_THAT(curve[0].second, WithinAbs(target, 1e-5));
    }
  }
  SECTION("per-copy values never increase") {
    const auto rho = random_bipartite(96);
    const auto sigma_a = random_density(2, 2, 296);
    ExtensionProblem prob{rho, sigma_a, 1, DivergenceOrder::renyi(2.0), false};
    const auto curve = regularized_curve(prob, 2);
    CHECK(curve[1].second <= curve[0].second + 1e-6);
    const double dpi = divergence_alpha(reduce(rho, {0}), sigma_a, 2.0).value;
    CHECK(curve[1].second >= dpi - 1e-6);
  }
}

TEST_CASE("symmetrization never hurts the relative objective", "[extension]") {
  const auto rho = random_bipartite(97);
  const auto sigma_a = random_density(2, 2, 297);
  const auto rho2 = tensor_power(rho, 2);
  ExtensionGeometry geo{tensor_power(sigma_a, 2).mat, 4, 4};
  // any feasible level-2 point
  Matrix sigma2 =
      project_extension_set(random_density(16, 16, 298).mat, geo).point;
  DensityMatrix sym_in{sigma2, {2, 2, 2, 2}};
  const auto sym = symmetrize(sym_in, 2);
  const DensityMatrix s2{sigma2, {4, 4}};
  const DensityMatrix s2_sym{sym.mat, {4, 4}};
  const DensityMatrix rho2_flat{rho2.mat, {4, 4}};
  const double before = relative_entropy(rho2_flat, s2).value;
  const double after = relative_entropy(rho2_flat, s2_sym).value;
  CHECK(after <= before + 1e-7);
}

TEST_CASE("pinched candidate is feasible and bounds the value chain",
          "[extension]") {
  const auto rho = random_bipartite(98);
  const auto sigma_a = random_density(2, 2, 299);
  const auto rho_a = reduce(rho, {0});
  for (int n : {1, 2}) {
    const auto pipe = build_pipeline(rho, sigma_a, n);
    const int d = static_cast<int>(std::round(std::pow(2, n)));
    ExtensionGeometry geo{tensor_power(sigma_a, n).mat, d, d};
    CHECK(extension_residual(pipe.sigma_bar.mat, geo) <= 1e-7);
    const auto rho_n = tensor_power(rho, n);
    const DensityMatrix rho_n2{rho_n.mat, {d, d}};
    for (double a : {0.75, 1.0}) {
      const double chain =
          divergence_alpha(rho_n2, pipe.sigma_bar, a).value / n;
      const double base = divergence_alpha(rho_a, sigma_a, a).value;
      // value chain with the poly(n) slack reported by the theorem
      CHECK(chain <= base + 2.5);
    }
  }
}

TEST_CASE("Danskin outer gradient matches finite differences", "[extension]") {
  const auto rho = random_bipartite(99);
  const auto sigma_a = random_density(2, 2, 300);
  ExtensionGeometry geo{sigma_a.mat, 2, 2};
  // a comfortably interior point: the witness solve is ill-conditioned at
  // the boundary and the check is about the Danskin direction, not that
  const Matrix sigma =
      detail::interiorize(project_extension_set(
                              random_density(4, 4, 301).mat, geo).point,
                          geo, 0.05);
  const double alpha = 2.0;
  auto g = [&](const Matrix& s) {
    return measured_renyi(rho, {s, {2, 2}}, alpha).value;
  };
  const auto res = measured_renyi(rho, {sigma, {2, 2}}, alpha);
  const Matrix tau = matrix_exp(res.generator);
  const Matrix analytic = -tau / (res.q_value * kLn2);
  const double h = 1e-5;
  double worst = 0.0;
  int checked = 0;
  for (const Matrix& dir : hermitian_basis(4)) {
    if (checked++ >= 6) break;  // a few directions suffice
    const double fd = (g(sigma + h * dir) - g(sigma - h * dir)) / (2.0 * h);
    const double an = real_inner(analytic, dir);
    worst = std::max(worst, std::abs(an - fd) / (1.0 + std::abs(fd)));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("finite-difference and Daleckii-Krein gradients agree", "[extension]") {
  const auto rho = random_bipartite(110);
  const auto sigma = detail::interiorize(
      project_extension_set(random_density(4, 4, 111).mat,
                            ExtensionGeometry{random_density(2, 2, 112).mat, 2, 2})
          .point,
      ExtensionGeometry{random_density(2, 2, 112).mat, 2, 2}, 1e-3);
  SECTION("relative entropy gradient") {
    auto f = [&](const Matrix& s) {
      return relative_entropy(rho, {s, {2, 2}}).value;
    };
    const Matrix fd = detail::divergence_gradient_fd(f, sigma);
    const Matrix dk = detail::relative_gradient_dk(rho.mat, sigma);
    CHECK(max_abs_entry(fd - dk) <= 1e-5 * std::max(1.0, max_abs_entry(dk)));
  }
  SECTION("Renyi gradient at alpha = 2") {
    auto f = [&](const Matrix& s) {
      return divergence_alpha(rho, {s, {2, 2}}, 2.0).value;
    };
    const Matrix fd = detail::divergence_gradient_fd(f, sigma);
    const Matrix dk = detail::renyi_gradient_dk(rho.mat, sigma, 2.0);
    CHECK(max_abs_entry(fd - dk) <= 1e-5 * std::max(1.0, max_abs_entry(dk)));
  }
  SECTION("Renyi gradient at alpha = 0.75") {
    auto f = [&](const Matrix& s) {
      return divergence_alpha(rho, {s, {2, 2}}, 0.75).value;
    };
    const Matrix fd = detail::divergence_gradient_fd(f, sigma);
    const Matrix dk = detail::renyi_gradient_dk(rho.mat, sigma, 0.75);
    CHECK(max_abs_entry(fd - dk) <= 1e-5 * std::max(1.0, max_abs_entry(dk)));
  }
}
