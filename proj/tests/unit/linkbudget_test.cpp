#include <cmath>
#include <numbers>
#include <random>

#include <doctest.h>

#include "qsat/errors.hpp"
#include "qsat/linkbudget.hpp"

using namespace qsat::link;
using std::numbers::pi;

namespace {

LinkGeometry zenith(double distance = 600e3, Direction dir = Direction::downlink) {
  LinkGeometry g;
  g.distance = distance;
  g.receiver_altitude = distance;
  g.direction = dir;
  return g;
}

double second_moment(const RadialIntensityProfile& p) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i + 1 < p.radii.size(); ++i) {
    const double r0 = p.radii[i], r1 = p.radii[i + 1];
    const double f0 = p.intensity[i] * r0, f1 = p.intensity[i + 1] * r1;
    num += 0.5 * (f0 * r0 * r0 + f1 * r1 * r1) * (r1 - r0);
    den += 0.5 * (f0 + f1) * (r1 - r0);
  }
  return num / den;
}

RadialIntensityProfile gaussian_mixture(const std::vector<double>& widths,
                                        const std::vector<double>& weights, double r_max,
                                        std::size_t n) {
  RadialIntensityProfile p;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = r_max * static_cast<double>(i) / static_cast<double>(n - 1);
    double v = 0;
    for (std::size_t k = 0; k < widths.size(); ++k)
      v += weights[k] * std::exp(-r * r / (2 * widths[k] * widths[k]));
    p.radii.push_back(r);
    p.intensity.push_back(v);
  }
  return p;
}

// Coherence radius by composite Simpson on a uniform altitude grid.
double coherence_oracle(double h, double elevation, double lambda, const TurbulenceProfile& t) {
  const int n = 1000000;
  const double dz = h / n;
  auto f = [&](double z) {
    const double w = t.wind_speed / 27;
    const double cn2 = 0.00594 * w * w * std::pow(z * 1e-5, 10) * std::exp(-z / 1000) +
                       2.7e-16 * std::exp(-z / 1500) + t.ground_cn2 * std::exp(-z / 100);
    return cn2 * std::pow(1 - z / h, 5.0 / 3.0);
  };
  double s = f(0) + f(h);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4 : 2) * f(i * dz);
  const double k = 2 * pi / lambda;
  return std::pow(1.46 / std::sin(elevation) * k * k * s * dz / 3, -0.6);
}

}  // namespace

TEST_SUITE("linkbudget") {
  TEST_CASE("gaussian far field width") {
    // aperture wide enough that clipping does not broaden the beam
    TelescopeSpec tx{0.5, 0.0, 0.1};
    const auto p = diffract(tx, zenith(), 800.0);
    const double w0 = 0.1 / std::sqrt(2 * std::log(2.0));
    const double expected = 800e-9 * 600e3 / (pi * w0) * std::sqrt(2 * std::log(2.0));
    CHECK(p.fwhm() == doctest::Approx(expected).epsilon(0.02));
  }

  TEST_CASE("uniform aperture first dark ring") {
    TelescopeSpec tx{0.1, 0.0, 100.0};
    DiffractionOptions opt;
    opt.span = 15.0;
    opt.auto_span = false;
    const auto p = diffract(tx, zenith(), 800.0, opt);
    std::size_t i = 1;
    while (i + 1 < p.intensity.size() && !(p.intensity[i] < p.intensity[i - 1] &&
                                            p.intensity[i] <= p.intensity[i + 1]))
      ++i;
    CHECK(p.radii[i] == doctest::Approx(1.22 * 800e-9 * 600e3 / 0.1).epsilon(0.02));
    CHECK(p.intensity[i] < 0.01 * p.intensity[0]);
  }

  TEST_CASE("coarse grids do not alias") {
    TelescopeSpec tx{0.5, 0.0, 0.1};
    DiffractionOptions opt;
    opt.grid = 20;
    const auto p = diffract(tx, zenith(), 800.0, opt);
    CHECK(p.total_power() / unclipped_power(tx) == doctest::Approx(1.0).epsilon(0.02));
  }

  TEST_CASE("diffraction conserves power") {
    for (double obs : {0.0, 0.3}) {
      TelescopeSpec tx{0.25, obs, 0.15};
      const auto p = diffract(tx, zenith(1000e3), 785.0);
      const double sent = unclipped_power(tx) * aperture_transmission(tx);
      CHECK(p.total_power() / sent > 0.98);
      CHECK(p.total_power() / sent < 1.02);
    }
  }

  TEST_CASE("convolution adds variance") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    for (int t = 0; t < 10; ++t) {
      const std::vector<double> widths{0.5 + 2 * u(rng), 1 + 3 * u(rng)};
      const std::vector<double> weights{u(rng), u(rng)};
      const auto p = gaussian_mixture(widths, weights, 60.0, 3000);
      const double sigma = 0.5 + 3 * u(rng);
      const auto q = convolve_gaussian(p, sigma);
      CHECK(second_moment(q) == doctest::Approx(second_moment(p) + 2 * sigma * sigma).epsilon(2e-3));
      CHECK(q.total_power() == doctest::Approx(p.total_power()).epsilon(2e-3));
    }
  }

  TEST_CASE("convolving a narrow spot gives the kernel") {
    const auto p = gaussian_mixture({0.01}, {1.0}, 20.0, 4001);
    const double power = p.total_power();
    const double sigma = 2.0;
    const auto q = convolve_gaussian(p, sigma);
    for (double r : {0.0, 1.0, 2.0, 4.0}) {
      const auto i = static_cast<std::size_t>(r / 20.0 * 4000);
      const double expected = power / (2 * pi * sigma * sigma) * std::exp(-r * r / (2 * sigma * sigma));
      CHECK(q.intensity[i] == doctest::Approx(expected).epsilon(5e-3));
    }
  }

  TEST_CASE("coherence radius against quadrature") {
    TurbulenceProfile t;
    for (double el : {90.0, 50.0, 20.0}) {
      LinkGeometry g = zenith();
      g.elevation = el * pi / 180;
      g.distance = 600e3 / std::sin(g.elevation);
      CHECK(coherence_length(g, 785.0, t) ==
            doctest::Approx(coherence_oracle(600e3, g.elevation, 785e-9, t)).epsilon(1e-3));
    }
    // r0 grows as lambda^(6/5)
    const auto g = zenith();
    CHECK(coherence_length(g, 1550.0, t) / coherence_length(g, 775.0, t) ==
          doctest::Approx(std::pow(2.0, 1.2)).epsilon(1e-9));
    CHECK(turbulence_waist(g, 785.0, t) ==
          doctest::Approx(2 * std::sqrt(2.0) * 600e3 * 785e-9 /
                          (pi * t.fried_scale * coherence_length(g, 785.0, t))));
  }

  TEST_CASE("loss is smallest overhead") {
    TelescopeSpec tx{0.1, 0.0, 0.1};
    TelescopeSpec rx{1.0, 0.0, 0.0};
    double prev = -1e9;
    for (double el : {90.0, 60.0, 40.0, 20.0}) {
      LinkGeometry g = zenith();
      g.elevation = el * pi / 180;
      g.distance = 600e3 / std::sin(g.elevation);
      const double l = loss_breakdown(tx, rx, g, 670.0, 2e-6, 1.0, 1.0).total_db;
      CHECK(l > prev);
      prev = l;
    }
  }

  TEST_CASE("loss grows with pointing error and turbulence") {
    TelescopeSpec tx{0.25, 0.0, 0.125};
    TelescopeSpec rx{0.3, 0.0, 0.0};
    const auto g = zenith(600e3, Direction::uplink);
    double prev = -1e9;
    for (double p : {0.0, 1e-6, 3e-6, 10e-6}) {
      const double l = loss_breakdown(tx, rx, g, 785.0, p, 1.0, 1.0).total_db;
      CHECK(l > prev);
      prev = l;
    }
    TurbulenceProfile strong;
    strong.ground_cn2 = 1e-13;
    LossOptions opt;
    opt.turbulence = strong;
    CHECK(loss_breakdown(tx, rx, g, 785.0, 1e-6, 1.0, 1.0, opt).total_db >
          loss_breakdown(tx, rx, g, 785.0, 1e-6, 1.0, 1.0).total_db);
    CHECK(loss_breakdown(tx, rx, g, 785.0, 1e-6, 0.5, 1.0).total_db ==
          doctest::Approx(loss_breakdown(tx, rx, g, 785.0, 1e-6, 1.0, 1.0).total_db +
                          10 * std::log10(2.0)));
  }

  TEST_CASE("central obstruction") {
    TelescopeSpec tx{0.25, 0.0, 0.25};
    TelescopeSpec rx{1.0, 0.0, 0.0};
    const auto g = zenith();
    CHECK(obstruction_penalty(tx, rx, g, 670.0, SourceKind::wcp) == 0.0);
    double prev = 0.0;
    for (double obs : {0.1, 0.2, 0.3}) {
      tx.obstruction_ratio = obs;
      const double pen = obstruction_penalty(tx, rx, g, 670.0, SourceKind::entangled);
      CHECK(pen > prev);
      prev = pen;
    }
    tx.obstruction_ratio = 0.6;
    CHECK_THROWS_AS(obstruction_penalty(tx, rx, g, 670.0, SourceKind::wcp), qsat::ValidationError);
  }

  TEST_CASE("effective loss for a WCP source removes clipping") {
    LossBreakdown b;
    b.total_db = 30;
    b.clipping_db = 2;
    CHECK(effective_loss_db(b, SourceKind::wcp) == 28);
    CHECK(effective_loss_db(b, SourceKind::entangled) == 30);
  }

  TEST_CASE("validation") {
    TelescopeSpec tx{0.1, 0.0, 0.1};
    LinkGeometry g = zenith();
    g.distance = 500;
    CHECK_THROWS_AS(diffract(tx, g, 800.0), qsat::ValidationError);
    tx.beam_fwhm = 0.0;
    CHECK_THROWS_AS(diffract(tx, zenith(), 800.0), qsat::ValidationError);
  }
}
