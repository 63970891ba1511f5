#include <cmath>

#include <doctest.h>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "qsat/errors.hpp"
#include "qsat/fockspace.hpp"

using namespace qsat::fock;

namespace {

// Dense two-mode squeezed vacuum at a larger cutoff, via Eigen's matrix exponential.
double oracle_squeezed_mean(double eps, int cutoff) {
  const int d = cutoff + 1;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
  for (int n = 1; n < d; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd a1 = Eigen::kroneckerProduct(a, id);
  const Eigen::MatrixXd a2 = Eigen::kroneckerProduct(id, a);
  const Eigen::MatrixXd gen = eps * (a1.transpose() * a2.transpose() - a1 * a2);
  const Eigen::MatrixXd u = gen.exp();
  Eigen::VectorXd psi = u.col(0);
  psi /= psi.norm();
  const Eigen::MatrixXd number = a1.transpose() * a1 + a2.transpose() * a2;
  return psi.dot(number * psi);
}

double poisson_mean(double mu, int cutoff) {
  double norm = 0.0, mean = 0.0, term = std::exp(-mu);
  for (int n = 0; n <= cutoff; ++n) {
    if (n > 0) term *= mu / n;
    norm += term;
    mean += n * term;
  }
  return mean / norm;
}

double max_abs_diff(const Eigen::MatrixXcd& x, const Eigen::MatrixXcd& y) {
  return (x - y).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_SUITE("fockspace") {
  TEST_CASE("vacuum") {
    const auto v = make_vacuum(ModeLayout(2, 6));
    const auto rho = v.density();
    CHECK(std::abs(rho(0, 0) - 1.0) < 1e-15);
    CHECK(rho.cwiseAbs().sum() == doctest::Approx(1.0));
    const auto big = make_vacuum(ModeLayout(6, 2));
    CHECK(big.layout().dimension() == 729);
    CHECK(big.trace() == doctest::Approx(1.0));
    CHECK_THROWS_AS(ModeLayout(1, 0), qsat::ValidationError);
    CHECK_THROWS_AS(ModeLayout(12, 9), qsat::ValidationError);
  }

  TEST_CASE("squeezer mean pair number against matrix exponential") {
    const auto vac = make_vacuum(ModeLayout(2, 6));
    CHECK(max_abs_diff(apply_squeezer(vac, 0, 1, 0.0).density(), vac.density()) < 1e-15);
    const double n = apply_squeezer(vac, 0, 1, 0.22).total_mean_photon_number();
    CHECK(std::abs(n - oracle_squeezed_mean(0.22, 10)) < 1e-7);
    CHECK(std::abs(n - 2.0 * std::sinh(0.22) * std::sinh(0.22)) < 1e-7);
    CHECK(std::abs(n - 0.1) / 0.1 < 0.03);
    const double n41 = apply_squeezer(vac, 0, 1, 0.41).total_mean_photon_number();
    CHECK(std::abs(n41 - 2.0 * std::sinh(0.41) * std::sinh(0.41)) < 1e-4);
    CHECK(mean_pairs_per_pulse(0.41) == doctest::Approx(2.0 * std::sinh(0.41) * std::sinh(0.41)));
  }

  TEST_CASE("displacement against Poisson sums") {
    const auto vac = make_vacuum(ModeLayout(1, 6));
    const auto s5 = apply_displacement(vac, 0, std::sqrt(0.5));
    CHECK(std::abs(s5.mean_photon_number(0) - 0.5) < 1e-4);
    CHECK(std::abs(s5.mean_photon_number(0) - poisson_mean(0.5, 6)) < 1e-6);
    const auto s1 = apply_displacement(vac, 0, std::sqrt(0.1));
    CHECK(std::abs(s1.mean_photon_number(0) - 0.1) < 1e-6);
    CHECK(max_abs_diff(apply_displacement(vac, 0, 0.0).density(), vac.density()) < 1e-15);
    CHECK_THROWS_AS(apply_displacement(vac, 0, 2.0), qsat::ValidationError);
  }

  TEST_CASE("loss channel") {
    const auto vac = make_vacuum(ModeLayout(2, 6));
    const auto coh = apply_displacement(vac, 0, std::sqrt(0.5));
    CHECK(max_abs_diff(apply_loss(coh, 0, 1.0).density(), coh.density()) < 1e-14);
    const auto half = apply_loss(coh, 0, 0.5);
    CHECK(std::abs(half.mean_photon_number(0) - 0.5 * poisson_mean(0.5, 6)) < 1e-9);
    CHECK(std::abs(half.trace() - 1.0) < 1e-9);
    const auto gone = apply_loss(coh, 0, 0.0);
    CHECK(gone.mean_photon_number(0) < 1e-14);

    // composition on an entangled state
    const auto sq = apply_squeezer(vac, 0, 1, 0.3);
    const auto two = apply_loss(apply_loss(sq, 0, 0.7), 0, 0.4);
    const auto one = apply_loss(sq, 0, 0.28);
    CHECK(max_abs_diff(two.density(), one.density()) < 1e-9);
    CHECK(std::abs(two.trace() - 1.0) < 1e-9);
  }

  TEST_CASE("beam splitter") {
    const auto vac = make_vacuum(ModeLayout(2, 6));
    const auto sq = apply_squeezer(vac, 0, 1, 0.1);
    CHECK(max_abs_diff(apply_beamsplitter(sq, 0, 1, 1.0).density(), sq.density()) < 1e-14);
    // Hong-Ou-Mandel: the |1,1> amplitude of a pair source interferes away.
    const auto out = apply_beamsplitter(sq, 0, 1, 0.5);
    const auto before = sq.number_distribution();
    const auto after = out.number_distribution();
    const auto& lay = sq.layout();
    CHECK(before[lay.index_of({1, 1})] > 1e-3);
    CHECK(after[lay.index_of({1, 1})] < 1e-14);
    CHECK(after[lay.index_of({2, 0})] + after[lay.index_of({0, 2})] ==
          doctest::Approx(before[lay.index_of({1, 1})]).epsilon(1e-9));
    // single-mode input splits evenly
    const auto coh = apply_beamsplitter(apply_displacement(vac, 0, std::sqrt(0.2)), 0, 1, 0.5);
    CHECK(coh.mean_photon_number(0) == doctest::Approx(coh.mean_photon_number(1)).epsilon(1e-9));
  }

  TEST_CASE("operators invert") {
    const auto vac = make_vacuum(ModeLayout(2, 6));
    const auto s = apply_displacement(apply_squeezer(vac, 0, 1, 0.05), 1, 0.1);
    const auto r = apply_polarization_rotation(s, 0, 1, -0.3);
    const auto back = apply_polarization_rotation(r, 0, 1, 0.3);
    CHECK(back.fidelity_with_pure(s) > 1.0 - 1e-6);
    const auto d = apply_displacement(apply_displacement(s, 0, 0.1), 0, -0.1);
    CHECK(d.fidelity_with_pure(s) > 1.0 - 1e-6);
    CHECK_THROWS_AS(apply_squeezer(s, 0, 1, -0.04), qsat::ValidationError);
  }

  TEST_CASE("entangled pair populations") {
    const auto pair = make_entangled_pair(0.22, 0.0, 6);
    CHECK(std::abs(pair.trace() - 1.0) < 1e-9);
    const auto& lay = pair.layout();
    const auto p = pair.number_distribution();
    // |Psi-> correlations: H with V only in the one-pair sector
    CHECK(p[lay.index_of({1, 0, 1, 0})] < 1e-15);
    CHECK(p[lay.index_of({0, 1, 0, 1})] < 1e-15);
    CHECK(p[lay.index_of({1, 0, 0, 1})] == doctest::Approx(p[lay.index_of({0, 1, 1, 0})]));
    CHECK(pair.total_mean_photon_number() ==
          doctest::Approx(2.0 * mean_pairs_per_pulse(0.22)).epsilon(1e-6));
    CHECK(std::cos(2.0 * misalignment_for_visibility(0.98)) == doctest::Approx(0.98));
  }
}
