#include <cmath>

#include <doctest.h>

#include "qsat/detection.hpp"
#include "qsat/errors.hpp"
#include "qsat/protocols.hpp"

using namespace qsat::fock;

namespace {

constexpr double quarter = 0.78539816339744830962;

DetectorModel ideal() {
  DetectorModel d;
  d.efficiency = 1.0;
  d.dark_rate = 0.0;
  return d;
}

double pair_visibility(double eps, double angle, double transmissivity, double background,
                       int cutoff = 6) {
  const auto pair = make_entangled_pair(eps, angle, cutoff);
  PairAnalyzer an(pair, {0.0, quarter}, {0.0, quarter}, mean_pairs_per_pulse(eps));
  DetectorModel a;
  a.efficiency = 0.25;
  DetectorModel b;
  b.efficiency = 0.5;
  return an.measure(a, b, transmissivity, background, 100e6).visibility;
}

}  // namespace

TEST_SUITE("detection") {
  TEST_CASE("detector model") {
    DetectorModel d;
    CHECK(d.dark_probability() == doctest::Approx(20.0 * 0.5e-9));
    CHECK(d.dark_probability(100.0) == doctest::Approx(120.0 * 0.5e-9));
    d.dark_rate = 3e9;
    CHECK_THROWS_AS(d.validate(), qsat::ValidationError);
    d = DetectorModel{};
    d.efficiency = 1.2;
    CHECK_THROWS_AS(d.validate(), qsat::ValidationError);
  }

  TEST_CASE("bucket clicks and squashing") {
    CHECK(click_probability(0, 0.6, 0.01) == doctest::Approx(0.01));
    CHECK(click_probability(3, 1.0, 0.0) == doctest::Approx(1.0));
    CHECK(click_probability(2, 0.5, 0.0) == doctest::Approx(0.75));
    const auto o = squash_outcomes({0.3, 0.1, 0.05, 0.6});
    double total = 0.0;
    for (double p : o) {
      CHECK(p >= 0.0);
      total += p;
    }
    CHECK(total == doctest::Approx(1.0));
    const auto one = squash_outcomes({1.0, 0.0, 0.0, 0.0});
    CHECK(one[outcome_index(0, 0)] == doctest::Approx(1.0));
    // a double click inside one basis is a random bit
    const auto dbl = squash_outcomes({1.0, 1.0, 0.0, 0.0});
    CHECK(dbl[outcome_index(0, 0)] == doctest::Approx(0.5));
    CHECK(dbl[outcome_index(0, 1)] == doctest::Approx(0.5));
  }

  TEST_CASE("vacuum without darks never clicks") {
    const auto vac = make_vacuum(ModeLayout(2, 6));
    Bb84Setup s;
    s.bob = ideal();
    const auto st = measure_bb84_analyzer(vac, s);
    for (double p : st.p_click) CHECK(p == 0.0);
    CHECK(st.p_coinc == 0.0);
  }

  TEST_CASE("qber and visibility identity") {
    for (double bg : {0.0, 1e3, 1e5}) {
      const auto pair = make_entangled_pair(0.22, misalignment_for_visibility(0.98), 6);
      PairAnalyzer an(pair, {0.0, quarter}, {0.0, quarter}, mean_pairs_per_pulse(0.22));
      const auto st = an.measure(DetectorModel{}, DetectorModel{}, 1e-3, bg, 100e6);
      CHECK(std::abs(st.qber - (1.0 - st.visibility) / 2.0) < 1e-12);
      CHECK(st.p_coinc <= std::min(st.p_alice, st.p_bob) + 1e-15);
      CHECK(st.p_error <= st.p_sifted);
    }
  }

  TEST_CASE("entangled pair visibility") {
    const auto pair = make_entangled_pair(0.01, misalignment_for_visibility(0.98), 6);
    PairAnalyzer an(pair, {0.0, quarter}, {0.0, quarter}, mean_pairs_per_pulse(0.01));
    const auto st = an.measure(ideal(), ideal(), 1.0, 0.0, 1e6);
    CHECK(std::abs(st.visibility - 0.98) < 1e-3);
    const auto scrambled = make_entangled_pair(0.22, quarter, 6);
    PairAnalyzer sc(scrambled, {0.0, quarter}, {0.0, quarter}, mean_pairs_per_pulse(0.22));
    CHECK(std::abs(sc.measure(ideal(), ideal(), 1.0, 0.0, 1e6).visibility) < 1e-9);
    // multi-pair emission alone keeps the visibility below one
    const auto clean = make_entangled_pair(0.22, 0.0, 6);
    PairAnalyzer cl(clean, {0.0, quarter}, {0.0, quarter}, mean_pairs_per_pulse(0.22));
    const double v = cl.measure(ideal(), ideal(), 1.0, 0.0, 1e6).visibility;
    CHECK(v < 1.0);
    CHECK(v > 0.8);
  }

  TEST_CASE("visibility falls with background and with loss") {
    const double angle = misalignment_for_visibility(0.98);
    double last = 2.0;
    for (double bg : {0.0, 100.0, 1e3, 1e4}) {
      const double v = pair_visibility(0.22, angle, 1e-3, bg);
      CHECK(v <= last + 1e-12);
      last = v;
    }
    last = 2.0;
    for (double loss_db : {20.0, 30.0, 40.0, 50.0}) {
      const double v = pair_visibility(0.22, angle, std::pow(10.0, -loss_db / 10.0), 500.0);
      CHECK(v <= last + 1e-12);
      last = v;
    }
  }

  TEST_CASE("high-loss asymptotes") {
    const double bg = 1000.0;
    DetectorModel a;
    a.efficiency = 0.25;
    a.window = 1e-9;
    DetectorModel b = a;
    b.efficiency = 0.5;
    const auto pair = make_entangled_pair(0.22, 0.0, 6);
    PairAnalyzer an(pair, {0.0, quarter}, {0.0, quarter}, mean_pairs_per_pulse(0.22));
    const double t = 1e-8;
    const auto st = an.measure(a, b, t, bg, 1.0 / 10e-9);
    const double expected = bg * 4.0 * (1.0 / 10.0) * 0.25;
    CHECK(std::abs(st.rate - expected) / expected < 0.05);

    WcpAnalyzer wcp(0.5, 0.0, 6);
    const auto w = wcp.measure(b, t, bg, 1.0 / 3.3e-9);
    const double expected_wcp = bg * 4.0 * (1.0 / 3.3);
    CHECK(std::abs(w.rate - expected_wcp) / expected_wcp < 0.05);
  }

  TEST_CASE("cutoff convergence at operating intensities") {
    const double angle = misalignment_for_visibility(0.98);
    for (double eps : {0.22}) {
      const auto p6 = make_entangled_pair(eps, angle, 6);
      const auto p7 = make_entangled_pair(eps, angle, 7);
      PairAnalyzer a6(p6, {0.0, quarter}, {0.0, quarter}, mean_pairs_per_pulse(eps));
      PairAnalyzer a7(p7, {0.0, quarter}, {0.0, quarter}, mean_pairs_per_pulse(eps));
      const auto s6 = a6.measure(DetectorModel{}, DetectorModel{}, 0.01, 200.0, 1e8);
      const auto s7 = a7.measure(DetectorModel{}, DetectorModel{}, 0.01, 200.0, 1e8);
      for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j)
          CHECK(std::abs(s6.outcome_joint[i][j] - s7.outcome_joint[i][j]) < 1e-4);
    }
    const auto w6 = WcpAnalyzer(0.5, 0.1, 6).measure(DetectorModel{}, 0.5, 200.0, 1e8);
    const auto w7 = WcpAnalyzer(0.5, 0.1, 7).measure(DetectorModel{}, 0.5, 200.0, 1e8);
    CHECK(std::abs(w6.p_sifted - w7.p_sifted) < 1e-4);
    CHECK(std::abs(w6.p_error - w7.p_error) < 1e-4);
  }

  TEST_CASE("chsh from the pair analyzer") {
    const auto pair = make_entangled_pair(0.01, 0.0, 6);
    PairAnalyzer an(pair, qsat::protocols::chsh_alice_angles, qsat::protocols::chsh_bob_angles,
                    mean_pairs_per_pulse(0.01));
    const auto st = an.measure(ideal(), ideal(), 1.0, 0.0, 1e6);
    const auto p = chsh_probabilities(st);
    qsat::protocols::ChshCounts counts{};
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int k = 0; k < 4; ++k) counts[a][b][k] = p[a][b][k] * 1e12;
    const auto r = qsat::protocols::chsh_verdict(counts);
    CHECK(std::abs(r.s) <= 2.0 * std::sqrt(2.0) + 1e-9);
    CHECK(std::abs(r.s) > 2.8);
    CHECK(r.pass);
  }

  TEST_CASE("teleportation") {
    TeleportationSetup s;
    s.epsilon = 0.05;
    s.alpha = 0.2;
    s.alice = ideal();
    s.bob = ideal();
    const auto good = simulate_teleportation(s, 0.0, 0.0, 1e8);
    CHECK(good.visibility > 2.0 / 3.0);
    CHECK(std::abs(good.qber - (1.0 - good.visibility) / 2.0) < 1e-12);

    // without an input photon only double pairs condition, scaling as eps^4
    s.alpha = 0.0;
    s.epsilon = 0.02;
    const double lo = simulate_teleportation(s, 0.0, 0.0, 1e8).p_sifted;
    s.epsilon = 0.04;
    const double hi = simulate_teleportation(s, 0.0, 0.0, 1e8).p_sifted;
    CHECK(lo > 0.0);
    CHECK(hi / lo == doctest::Approx(16.0).epsilon(0.1));

    s.epsilon = 0.41;
    s.alpha = 0.07;
    s.cutoff = 3;
    const auto conv = simulate_teleportation_converged(s, 30.0, 100.0, 1e8, 1e-3, 5);
    CHECK(conv.truncation_shift < 1e-3);
    CHECK_THROWS_AS(simulate_teleportation_converged(s, 30.0, 100.0, 1e8, 1e-9, 4),
                    qsat::ConvergenceError);
  }
}
