#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "uhlmann/divergences.hpp"

using namespace uhlmann;
using Catch::Matchers::WithinAbs;

namespace {

DensityMatrix diag_state(std::vector<double> p) {
  const int n = static_cast<int>(p.size());
  return classical_embed(make_distribution(std::move(p)), {n});
}

DensityMatrix ket0() {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = 1.0;
  return {m, {2}};
}

DensityMatrix ket1() {
  Matrix m = Matrix::Zero(2, 2);
  m(1, 1) = 1.0;
  return {m, {2}};
}

const std::vector<double> kAlphaGrid = {0.5, 0.7, 0.9, 1.0, 1.5, 2.0, 5.0,
                                        std::numeric_limits<double>::infinity()};

}  // namespace

TEST_CASE("q_alpha", "[divergences]") {
  SECTION("identical full-rank states give Q = 1") {
    const auto rho = random_density(3, 3, 5);
    for (double a : {0.5, 0.8, 2.0, 4.0}) {
      CHECK_THAT(q_alpha(rho, rho, a).q, WithinAbs(1.0, 1e-12));
    }
  }
  SECTION("classical alpha = 1/2") {
    const auto rho = diag_state({0.25, 0.75});
    const auto sigma = diag_state({0.5, 0.5});
    // sqrt(1/8) + sqrt(3/8)
    CHECK_THAT(q_alpha(rho, sigma, 0.5).q, WithinAbs(0.9659258262890682, 1e-12));
  }
  SECTION("pure state against the maximally mixed state at alpha = 2") {
    const auto r = q_alpha(ket0(), diag_state({0.5, 0.5}), 2.0);
    CHECK_THAT(r.q, WithinAbs(2.0, 1e-12));
    CHECK_FALSE(r.support_violation);
  }
  SECTION("support violation flagged for alpha > 1") {
    const auto r = q_alpha(ket0(), ket1(), 2.0);
    CHECK(r.support_violation);
  }
}

TEST_CASE("divergence special values", "[divergences]") {
  SECTION("Appendix-C max-relative entropy") {
    const auto rho = diag_state({0.25, 0.75});
    const auto sigma = diag_state({0.5, 0.5});
    const auto d = divergence(rho, sigma, DivergenceOrder::max());
    CHECK_THAT(d.value, WithinAbs(0.5849625007211562, 1e-12));  // log2(3/2)
  }
  SECTION("any order vanishes on identical states") {
    const auto rho = random_density(4, 4, 9);
    for (double a : kAlphaGrid) {
      const auto d = divergence_alpha(rho, rho, a);
      CHECK_THAT(d.value, WithinAbs(0.0, 1e-9));
    }
  }
  SECTION("min-relative entropy of pure states is the log overlap") {
    Eigen::VectorXcd phi = Eigen::VectorXcd::Zero(4);
    phi(0) = std::sqrt(0.25);
    phi(3) = std::sqrt(0.75);
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(4);
    psi(0) = std::sqrt(0.5);
    psi(3) = std::sqrt(0.5);
    DensityMatrix rho{Matrix(phi * phi.adjoint()), {2, 2}};
    DensityMatrix cand{Matrix(psi * psi.adjoint()), {2, 2}};
    const double overlap2 = std::norm((phi.adjoint() * psi)(0));
    const auto d = divergence(rho, cand, DivergenceOrder::min());
    CHECK_THAT(d.value, WithinAbs(-std::log2(overlap2), 1e-10));
    // orthogonal pure states diverge
    const auto inf = divergence(ket0(), ket1(), DivergenceOrder::min());
    CHECK(inf.is_infinite());
  }
  SECTION("relative entropy is +inf outside the support") {
    const auto d = divergence(ket0(), ket1(), DivergenceOrder::relative());
    CHECK(d.is_infinite());
    CHECK(d.support_violation);
  }
}

TEST_CASE("fidelity", "[divergences]") {
  const auto rho = random_density(3, 3, 31);
  const auto sigma = random_density(3, 3, 32);
  SECTION("normalization and symmetry") {
    CHECK_THAT(fidelity(rho, rho), WithinAbs(1.0, 1e-10));
    CHECK_THAT(fidelity(rho, sigma), WithinAbs(fidelity(sigma, rho), 1e-10));
  }
  SECTION("orthogonal pure states") {
    CHECK_THAT(fidelity(ket0(), ket1()), WithinAbs(0.0, 1e-12));
  }
  SECTION("commuting case") {
    CHECK_THAT(fidelity(diag_state({0.25, 0.75}), diag_state({0.5, 0.5})),
               WithinAbs(0.9330127018922193, 1e-12));  // (2 + sqrt 3)/4
  }
  SECTION("pure first argument reduces to an inner product") {
    const auto psi = random_density(3, 1, 33);
    const double expected = (psi.mat * sigma.mat).trace().real();
    CHECK_THAT(fidelity(psi, sigma), WithinAbs(expected, 1e-10));
  }
}

TEST_CASE("support_condition", "[divergences]") {
  const auto rho = random_density(2, 2, 41);
  CHECK(support_condition(rho, random_density(2, 2, 42)));
  CHECK_FALSE(support_condition(ket0(), ket1()));
  CHECK(support_condition(ket0(), diag_state({0.5, 0.5})));
}

TEST_CASE("monotonicity in alpha", "[divergences]") {
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    const auto rho = random_density(2, 2, 2 * seed);
    const auto sigma = random_density(2, 2, 2 * seed + 1);
    double prev = -std::numeric_limits<double>::infinity();
    for (double a : kAlphaGrid) {
      const double d = divergence_alpha(rho, sigma, a).value;
      CHECK(d >= prev - 1e-7);
      prev = d;
    }
  }
}

TEST_CASE("data-processing under partial trace", "[divergences]") {
  for (uint64_t seed = 1; seed <= 6; ++seed) {
    const auto rho = make_density(random_density(4, 4, 100 + seed).mat, {2, 2});
    const auto sigma = make_density(random_density(4, 4, 200 + seed).mat, {2, 2});
    const auto rho_a = reduce(rho, {0});
    const auto sigma_a = reduce(sigma, {0});
    for (double a : kAlphaGrid) {
      const double whole = divergence_alpha(rho, sigma, a).value;
      const double part = divergence_alpha(rho_a, sigma_a, a).value;
      CHECK(part <= whole + 1e-7);
    }
  }
}

TEST_CASE("additivity under tensor powers", "[divergences]") {
  const auto rho = random_density(2, 2, 77);
  const auto sigma = random_density(2, 2, 78);
  const auto rho2 = tensor_power(rho, 2);
  const auto sigma2 = tensor_power(sigma, 2);
  for (double a : kAlphaGrid) {
    const double once = divergence_alpha(rho, sigma, a).value;
    const double twice = divergence_alpha(rho2, sigma2, a).value;
    CHECK_THAT(twice, WithinAbs(2.0 * once, 1e-7));
  }
}

TEST_CASE("limits toward the explicit code paths", "[divergences]") {
  const auto rho = random_density(2, 2, 91);
  const auto sigma = random_density(2, 2, 92);
  const double d1 = divergence(rho, sigma, DivergenceOrder::relative()).value;
  const double dmax = divergence(rho, sigma, DivergenceOrder::max()).value;

  // alpha -> 1 from below and above, monotone approach
  double below_prev = -1e300;
  for (double a : {0.9, 0.99, 0.999}) {
    const double d = divergence_alpha(rho, sigma, a).value;
    CHECK(d >= below_prev - 1e-10);
    CHECK(d <= d1 + 1e-9);
    below_prev = d;
  }
  CHECK_THAT(below_prev, WithinAbs(d1, 1e-2));
  double above_prev = 1e300;
  for (double a : {1.1, 1.01, 1.001}) {
    const double d = divergence_alpha(rho, sigma, a).value;
    CHECK(d <= above_prev + 1e-10);
    CHECK(d >= d1 - 1e-9);
    above_prev = d;
  }
  CHECK_THAT(above_prev, WithinAbs(d1, 1e-2));

  // alpha -> infinity
  double prev = -1e300;
  for (double a : {4.0, 16.0, 64.0, 256.0}) {
    const double d = divergence_alpha(rho, sigma, a).value;
    CHECK(d >= prev - 1e-10);
    CHECK(d <= dmax + 1e-9);
    prev = d;
  }
  CHECK_THAT(prev, WithinAbs(dmax, 1e-2));
}

TEST_CASE("classical reduction matches scalar formulas", "[divergences]") {
  std::mt19937_64 rng(123);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> p(4), q(4);
    double sp = 0, sq = 0;
    for (int i = 0; i < 4; ++i) {
      p[i] = 0.05 + uhlmann::detail::uniform01(rng);
      q[i] = 0.05 + uhlmann::detail::uniform01(rng);
      sp += p[i];
      sq += q[i];
    }
    for (int i = 0; i < 4; ++i) {
      p[i] /= sp;
      q[i] /= sq;
    }
    const auto rho = classical_embed({Eigen::Map<RealVector>(p.data(), 4)}, {4});
    const auto sigma = classical_embed({Eigen::Map<RealVector>(q.data(), 4)}, {4});
    for (double a : kAlphaGrid) {
      const double quantum = divergence_alpha(rho, sigma, a).value;
      const double scalar = oracles::classical_divergence(p, q, a);
      CHECK_THAT(quantum, WithinAbs(scalar, 1e-10));
    }
  }
}
