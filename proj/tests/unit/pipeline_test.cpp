#include <cmath>

#include <doctest.h>

#include "qsat/errors.hpp"
#include "qsat/pipeline.hpp"

using namespace qsat;
using namespace qsat::pipeline;

namespace {

const std::string data_dir = QSAT_DATA_DIR;

PassResult result_at(const std::string& when, double bits, double distance, bool success) {
  PassResult r;
  r.start = orbit::parse_utc(when);
  r.key.secure_bits = bits;
  r.min_distance = distance;
  r.success = success;
  return r;
}

config::Config short_downlink() {
  config::Config c;
  c.set("orbit.days", "4");
  return c;
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("rate grid interpolation") {
    auto evaluator = [](double loss, const std::vector<double>& bgs) {
      std::vector<std::vector<double>> rows;
      for (double bg : bgs) rows.push_back({std::pow(10.0, -loss / 10) * 1e6 + 3 * bg, 5.0});
      return rows;
    };
    RateGrid pure({10, 20, 30}, {0.0}, [](double loss, const std::vector<double>& bgs) {
      return std::vector<std::vector<double>>(bgs.size(), {std::pow(10.0, -loss / 10)});
    });
    // exponential in loss is exact in log space
    CHECK(pure.at(17.3, 0.0)[0] == doctest::Approx(std::pow(10.0, -1.73)).epsilon(1e-12));
    CHECK(pure.at(40.0, 0.0)[0] == doctest::Approx(1e-3));  // clamped to the last node
    RateGrid g({10, 20, 30}, {0, 100, 200}, evaluator);
    CHECK(g.channels() == 2);
    for (double loss : {10.0, 20.0, 30.0})
      for (double bg : {0.0, 100.0, 200.0}) CHECK(g.at(loss, bg)[0] == doctest::Approx(g.exact(loss, bg)[0]));
    CHECK(g.at(20.0, 50.0)[0] == doctest::Approx(g.exact(20.0, 50.0)[0]));
    CHECK(g.at(13.0, 170.0)[1] == doctest::Approx(5.0));
  }

  TEST_CASE("monthly aggregation") {
    std::vector<PassResult> rs{result_at("2013-01-03", 100, 700e3, true),
                               result_at("2013-01-20", 50, 900e3, true),
                               result_at("2013-03-02", 30, 650e3, true),
                               result_at("2013-03-05", 0, 1200e3, false)};
    const auto m = monthly_key(rs, 0.5);
    REQUIRE(m.months.size() == 3);
    CHECK(m.months[0].secure_bits == 150);
    CHECK(m.months[0].passes == 2);
    CHECK(m.months[1].month == 2);
    CHECK(m.months[1].passes == 0);
    CHECK(m.months[2].successful == 1);
    CHECK(m.months[2].derated_bits == 15);
    CHECK(m.mean_monthly_bits == doctest::Approx((75.0 + 0.0 + 15.0) / 3));
    CHECK(monthly_key(rs, 1.0).mean_monthly_bits == 0.0);
    CHECK_THROWS_AS(monthly_key(rs, 1.5), ValidationError);
    CHECK(max_success_distance(rs) == 900e3);
    CHECK(max_success_distance({}) == 0.0);
  }

  TEST_CASE("configuration resolution") {
    config::Config c;
    auto down = resolve(c, data_dir);
    CHECK(down.direction == link::Direction::downlink);
    CHECK(down.wavelength_nm == 670.0);
    c.set("link.direction", "uplink");
    auto up = resolve(c, data_dir);
    CHECK(up.wavelength_nm == 785.0);
    const auto listing = describe(up);
    for (const auto& key : {"link.direction", "link.wavelength_nm", "turbulence.fried_scale"})
      CHECK(listing.count(key) == 1);
    c.set("link.colour", "blue");
    CHECK_THROWS_AS(resolve(c, data_dir), ValidationError);
    config::Config bad;
    bad.set("link.direction", "sideways");
    CHECK_THROWS_AS(resolve(bad, data_dir), ValidationError);
    bad = {};
    bad.set("cloud_fraction", "2");
    CHECK_THROWS_AS(resolve(bad, data_dir), ValidationError);
    bad = {};
    bad.set("source.mu", "0.05");
    bad.set("source.nu", "0.1");
    CHECK_THROWS_AS(resolve(bad, data_dir), ValidationError);
  }

  TEST_CASE("slant distance corrects the tabulated loss") {
    Scenario s(resolve(short_downlink(), data_dir), DataBundle::load(data_dir));
    const auto& t = s.link_table();
    const double el = 50 * 3.14159265358979323846 / 180;
    const double d = slant_range(600e3, el);
    CHECK(t.loss_at(el, 2 * d) == doctest::Approx(t.loss_at(el, d) + 20 * std::log10(2.0)));
    double prev = -1e9;
    for (std::size_t i = t.elevations_deg.size(); i-- > 0;) {
      CHECK(t.loss_db[i] > prev);
      prev = t.loss_db[i];
    }
  }

  TEST_CASE("short run is deterministic") {
    const auto cfg = resolve(short_downlink(), data_dir);
    Scenario a(cfg, DataBundle::load(data_dir));
    Scenario b(cfg, DataBundle::load(data_dir));
    const auto ra = a.evaluate_all(Experiment::qkd);
    const auto rb = b.evaluate_all(Experiment::qkd);
    REQUIRE(!ra.empty());
    REQUIRE(ra.size() == rb.size());
    bool any = false;
    for (std::size_t i = 0; i < ra.size(); ++i) {
      CHECK(ra[i].key.secure_bits == rb[i].key.secure_bits);
      CHECK(ra[i].totals == rb[i].totals);
      any = any || ra[i].success;
    }
    CHECK(any);
    std::vector<const orbit::PassProfile*> ps{&a.passes().front()};
    CHECK(a.spot_check(ps, Experiment::qkd).max_relative_deviation < 0.01);
  }
}
