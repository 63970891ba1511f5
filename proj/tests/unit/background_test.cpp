#include <cmath>
#include <numbers>
#include <string>

#include <doctest.h>

#include "qsat/background.hpp"
#include "qsat/errors.hpp"

using namespace qsat::background;
using std::numbers::pi;

namespace {

constexpr double h = 6.62607015e-34, c = 299792458.0;

qsat::link::LinkGeometry slant(double elevation_deg, double distance) {
  qsat::link::LinkGeometry g;
  g.elevation = elevation_deg * pi / 180;
  g.distance = distance;
  g.direction = qsat::link::Direction::uplink;
  return g;
}

LightPollutionGrid uniform(double value) {
  return LightPollutionGrid({40, 50}, {-80, -70}, {{value, value}, {value, value}});
}

}  // namespace

TEST_SUITE("background") {
  TEST_CASE("downlink sky background") {
    SkyBrightness sky;
    ReceiverView view;
    const double expected = (1.2e-8 + 2.2e-8) * 1.0 * pi * 50e-6 * 50e-6 * pi * 0.25 * 0.25 /
                            (h * c / 670e-9);
    CHECK(downlink_background(sky, view, 670.0) == doctest::Approx(expected).epsilon(1e-12));
    const auto terms = total_background_downlink(sky, view, 670.0);
    CHECK(terms.total() == doctest::Approx(expected));
    CHECK(terms.natural / terms.artificial == doctest::Approx(1.2 / 2.2));
    view.telescope_radius = 0.5;
    CHECK(downlink_background(sky, view, 670.0) == doctest::Approx(4 * expected));
    view.telescope_radius = 0.25;
    view.filter_bandwidth_nm = 3.0;
    CHECK(downlink_background(sky, view, 670.0) == doctest::Approx(3 * expected));
  }

  TEST_CASE("planck spectrum") {
    double best = 0, best_wl = 0;
    for (double wl = 400; wl <= 600; wl += 0.1) {
      const double v = planck_radiance_wavelength(wl * 1e-9, 5778.0);
      if (v > best) {
        best = v;
        best_wl = wl;
      }
    }
    CHECK(best_wl == doctest::Approx(2.897771955e-3 / 5778.0 * 1e9).epsilon(1e-3));
    const double nu = 5e14;
    CHECK(planck_radiance_frequency(nu, 5778.0) ==
          doctest::Approx(2 * h * nu * nu * nu / (c * c) / std::expm1(h * nu / (1.380649e-23 * 5778.0))));
  }

  TEST_CASE("footprint and collecting solid angle") {
    ReceiverView view;
    const auto g = slant(30.0, 1000e3);
    CHECK(footprint_area(g, view) == doctest::Approx(pi * 50.0 * 50.0 / 0.5));
    CHECK(receiver_solid_angle(g, view) == doctest::Approx(pi * 0.0625 / 1e12));
  }

  TEST_CASE("uniform light pollution") {
    ReceiverView view;
    const double radiance = 3e-8;
    const auto grid = uniform(radiance);
    const auto g = slant(40.0, 900e3);
    const double area = pi * std::pow(50e-6 * 900e3, 2) / std::sin(40 * pi / 180);
    const double omega = pi * 0.0625 / (900e3 * 900e3);
    const double expected = 0.7 * radiance * area * omega / (h * c / 785e-9);
    CHECK(uplink_pollution_background(grid, {45.3, -75.9}, g, view, 785.0, 0.7) ==
          doctest::Approx(expected).epsilon(1e-9));
    CHECK(grid.mean_radiance(45, -75, 2000) == doctest::Approx(radiance));
    CHECK_THROWS_AS(grid.radiance(60, -75), qsat::DataError);
  }

  TEST_CASE("moonlight reflected by the ground") {
    ReceiverView view;
    const auto g = slant(50.0, 780e3);
    MoonState moon{0.12, 60 * pi / 180};
    const double v = uplink_natural_background(g, view, 785.0, moon, 0.3, 1.0);
    CHECK(v > 0.0);
    CHECK(uplink_natural_background(g, view, 785.0, moon, 0.0, 1.0) == 0.0);
    CHECK(uplink_natural_background(g, view, 785.0, moon, 0.6, 1.0) == doctest::Approx(2 * v));
    CHECK(uplink_natural_background(g, view, 785.0, moon, 0.3, 0.5) == doctest::Approx(0.5 * v));
    moon.elevation = -0.1;
    CHECK(uplink_natural_background(g, view, 785.0, moon, 0.3, 1.0) == 0.0);
  }

  TEST_CASE("moon albedo table") {
    const auto m = load_moon_albedo(moon_albedo_path(QSAT_DATA_DIR));
    CHECK(m.at(0.0) == 0.0);
    CHECK(m.at(1.0) > m.at(0.5));
    CHECK_THROWS_AS(m.at(1.5), qsat::ValidationError);
  }

  TEST_CASE("detected rate per detector") {
    CHECK(detected_per_detector(1e6, 0.5) == doctest::Approx(1e6 * 0.5 * std::pow(10, -0.3) / 4));
    CHECK_THROWS_AS(detected_per_detector(1e6, 0.5, 0), qsat::ValidationError);
  }

  TEST_CASE("bundled light pollution covers the site") {
    const auto grid = load_light_pollution(light_pollution_path(QSAT_DATA_DIR));
    CHECK(grid.radiance(45.3, -75.9) > 0.0);
    CHECK_FALSE(grid.provenance().empty());
  }
}
