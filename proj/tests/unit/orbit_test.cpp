#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <doctest.h>

#include "qsat/errors.hpp"
#include "qsat/orbit.hpp"
#include "qsat/pipeline.hpp"

using namespace qsat::orbit;
using std::numbers::pi;

namespace {

constexpr double re = 6378137.0;

Vec3 above(double lat_deg, double lon_deg, double alt) {
  const double r = re + alt, la = lat_deg * pi / 180, lo = lon_deg * pi / 180;
  return {r * std::cos(la) * std::cos(lo), r * std::cos(la) * std::sin(lo), r * std::sin(la)};
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_SUITE("orbit") {
  TEST_CASE("kepler period and sun-synchronous inclination") {
    CHECK(orbital_period(600e3) == doctest::Approx(5801.0).epsilon(5e-4));
    CHECK(sun_synchronous_inclination(600e3) * 180 / pi == doctest::Approx(97.8).epsilon(2e-3));
  }

  TEST_CASE("slant range by the law of cosines") {
    for (double el : {10.0, 30.0, 60.0, 90.0}) {
      const double e = el * pi / 180;
      const double d = std::sqrt(std::pow(re + 600e3, 2) - std::pow(re * std::cos(e), 2)) - re * std::sin(e);
      CHECK(qsat::pipeline::slant_range(600e3, e) == doctest::Approx(d).epsilon(1e-12));
    }
    CHECK(qsat::pipeline::slant_range(600e3, pi / 2) == doctest::Approx(600e3));
  }

  TEST_CASE("look angles") {
    const Site site{45.3, -75.9};
    const auto z = look_angles(site, above(45.3, -75.9, 600e3));
    CHECK(z.distance == doctest::Approx(600e3).epsilon(1e-9));
    CHECK(z.elevation == doctest::Approx(pi / 2).epsilon(1e-6));
    // a point 10 degrees of arc away, checked against the triangle at Earth's centre
    const auto off = look_angles({0, 0}, above(0, 10, 600e3));
    const double g = 10 * pi / 180, r = re + 600e3;
    const double d = std::sqrt(re * re + r * r - 2 * re * r * std::cos(g));
    CHECK(off.distance == doctest::Approx(d).epsilon(1e-12));
    CHECK(std::cos(off.elevation) == doctest::Approx(r * std::sin(g) / d).epsilon(1e-9));
  }

  TEST_CASE("times and sun") {
    const double t = parse_utc("2013-03-20T12:00:00Z");
    CHECK(format_utc(t) == "2013-03-20T12:00:00.000Z");
    CHECK(parse_utc(format_utc(t + 0.25)) == doctest::Approx(t + 0.25));
    CHECK(parse_utc("2013-03-20") == doctest::Approx(t - 43200));
    CHECK(utc_month(t) == 3);
    CHECK(utc_year(t) == 2013);
    CHECK_THROWS_AS(parse_utc("March 20"), qsat::ValidationError);
    CHECK(sun_elevation({0, 0}, t) * 180 / pi > 85.0);
    CHECK(sun_elevation({0, 180}, t) * 180 / pi < -85.0);
  }

  TEST_CASE("one day of passes") {
    OrbitSpec o;
    PassOptions opt;
    opt.days = 3;
    const auto passes = propagate_passes(o, {45.3, -75.9}, opt);
    REQUIRE(!passes.empty());
    for (const auto& p : passes) {
      CHECK(p.max_elevation() > 10 * pi / 180);
      std::size_t usable = 0;
      for (std::size_t i = 0; i < p.samples.size(); ++i) {
        CHECK(p.usable[i] == (p.samples[i].elevation > 10 * pi / 180));
        usable += p.usable[i];
        CHECK(p.samples[i].alt_m == doctest::Approx(600e3).epsilon(1e-6));
      }
      CHECK(p.duration_usable == doctest::Approx(static_cast<double>(usable)));
      CHECK(p.min_usable_distance() >= 600e3 * (1 - 1e-9));
      CHECK(sun_elevation({45.3, -75.9}, p.samples[p.samples.size() / 2].t) < -6 * pi / 180 + 0.05);
      // rise and set are symmetric about the peak
      std::size_t peak = 0;
      for (std::size_t i = 0; i < p.samples.size(); ++i)
        if (p.samples[i].elevation > p.samples[peak].elevation) peak = i;
      const double before = static_cast<double>(peak);
      const double after = static_cast<double>(p.samples.size() - 1 - peak);
      CHECK(std::abs(before - after) <= 2.0 + 0.01 * p.samples.size());
    }
  }

  TEST_CASE("classification") {
    std::vector<PassProfile> passes(8);
    const double durations[] = {100, 400, 300, 50, 700, 200, 600, 500};
    for (int i = 0; i < 8; ++i) passes[i].duration_usable = durations[i];
    const auto c = classify_passes(passes);
    CHECK(c.best == 4);
    CHECK(passes[c.upper_quartile].duration_usable == 500);
    CHECK(passes[c.median].duration_usable == 300);
    CHECK_THROWS_AS(classify_passes({}), qsat::ValidationError);
  }

  TEST_CASE("ephemeris round trip") {
    OrbitSpec o;
    PassOptions opt;
    opt.days = 2;
    const Site site{45.3, -75.9};
    const auto passes = propagate_passes(o, site, opt);
    REQUIRE(!passes.empty());
    const auto path = temp_path("qsat_ephemeris_round_trip.csv");
    export_ephemeris(path, passes);
    const auto back = import_ephemeris(path, site);
    REQUIRE(back.size() == passes.size());
    for (std::size_t p = 0; p < passes.size(); ++p) {
      REQUIRE(back[p].samples.size() == passes[p].samples.size());
      CHECK(back[p].duration_usable == passes[p].duration_usable);
      for (std::size_t i = 0; i < passes[p].samples.size(); i += 50) {
        CHECK(back[p].samples[i].distance == doctest::Approx(passes[p].samples[i].distance).epsilon(1e-7));
        CHECK(back[p].samples[i].elevation == doctest::Approx(passes[p].samples[i].elevation).epsilon(1e-7));
      }
    }
    std::filesystem::remove(path);
  }

  TEST_CASE("ephemeris errors") {
    const auto path = temp_path("qsat_ephemeris_bad.csv");
    {
      std::ofstream out(path);
      out << "utc_iso8601,lat_deg,lon_deg,alt_m\n2013-01-01T00:00:00Z,45.3,-75.9,600000\n";
    }
    CHECK_THROWS_AS(import_ephemeris(path, {45.3, -75.9}), qsat::DataError);
    {
      std::ofstream out(path);
      out << "2013-01-01T00:00:00Z,45.3\n2013-01-01T00:00:01Z,45.3,-75.9,600000\n";
    }
    CHECK_THROWS_AS(import_ephemeris(path, {45.3, -75.9}), qsat::DataError);
    CHECK_THROWS_AS(import_ephemeris(temp_path("qsat_missing.csv"), {45.3, -75.9}), qsat::DataError);
    std::filesystem::remove(path);
  }

  TEST_CASE("overhead ephemeris reaches the zenith") {
    const auto path = temp_path("qsat_ephemeris_overhead.csv");
    {
      std::ofstream out(path);
      for (int i = -300; i <= 300; ++i) {
        char buf[128];
        std::snprintf(buf, sizeof buf, ",%.6f,-75.9,600000\n", 45.3 + i * 0.06);
        out << format_utc(parse_utc("2013-01-01") + 300 + i) << buf;
      }
    }
    const auto passes = import_ephemeris(path, {45.3, -75.9});
    REQUIRE(passes.size() == 1);
    CHECK(passes[0].max_elevation() * 180 / pi == doctest::Approx(90.0).epsilon(1e-6));
    CHECK(passes[0].min_usable_distance() == doctest::Approx(600e3).epsilon(1e-6));
    std::filesystem::remove(path);
  }
}
