#include "qsat/detection.hpp"

#include <cmath>
#include <numbers>

#include "qsat/errors.hpp"

namespace qsat::fock {

void DetectorModel::validate() const {
  if (!(efficiency >= 0.0 && efficiency <= 1.0)) {
    throw ValidationError("detector efficiency must lie in [0, 1]");
  }
  if (dark_rate < 0.0) throw ValidationError("dark rate must be non-negative");
  if (!(window > 0.0)) throw ValidationError("detection window must be positive");
  if (dark_rate * window >= 1.0) {
    throw ValidationError("dark probability per window must be below 1");
  }
}

double DetectorModel::dark_probability(double extra_rate) const {
  const double p = (dark_rate + extra_rate) * window;
  if (!(p >= 0.0 && p < 1.0)) {
    throw ValidationError("accidental click probability per window must lie in [0, 1)");
  }
  return p;
}

double click_probability(int photons, double efficiency, double dark_probability) {
  return 1.0 - std::pow(1.0 - efficiency, photons) * (1.0 - dark_probability);
}

std::array<double, 5> squash_outcomes(const std::array<double, 4>& clicks) {
  std::array<double, 5> out{};
  for (int pattern = 0; pattern < 16; ++pattern) {
    double p = 1.0;
    for (int det = 0; det < 4; ++det) {
      p *= (pattern >> det) & 1 ? clicks[det] : 1.0 - clicks[det];
    }
    if (p == 0.0) continue;
    const int basis0 = pattern & 0b0011;
    const int basis1 = (pattern >> 2) & 0b0011;
    if (basis0 == 0 && basis1 == 0) {
      out[no_event] += p;
      continue;
    }
    const double basis_weight = (basis0 != 0 && basis1 != 0) ? 0.5 : 1.0;
    for (int basis = 0; basis < 2; ++basis) {
      const int bits = basis == 0 ? basis0 : basis1;
      if (bits == 0) continue;
      if (bits == 0b11) {
        out[outcome_index(basis, 0)] += 0.5 * basis_weight * p;
        out[outcome_index(basis, 1)] += 0.5 * basis_weight * p;
      } else {
        out[outcome_index(basis, bits == 0b10 ? 1 : 0)] += basis_weight * p;
      }
    }
  }
  return out;
}

namespace {

constexpr double quarter_turn = std::numbers::pi / 4.0;

// Marginal number distribution over the listed modes (first listed is most significant).
std::vector<double> marginal(const MultimodeState& state, const std::vector<std::size_t>& modes) {
  const auto& layout = state.layout();
  const auto d = layout.local_dim();
  std::size_t size = 1;
  for (std::size_t i = 0; i < modes.size(); ++i) size *= d;
  std::vector<double> out(size, 0.0);
  const auto full = state.number_distribution();
  for (std::size_t i = 0; i < full.size(); ++i) {
    if (full[i] == 0.0) continue;
    std::size_t idx = 0;
    for (auto m : modes) idx = idx * d + static_cast<std::size_t>(layout.occupation(i, m));
    out[idx] += full[i];
  }
  return out;
}

// Outcome table for one party with photons routed to basis `route`.
std::vector<std::array<double, 5>> party_table(int d, int route, double efficiency, double dark) {
  std::vector<std::array<double, 5>> table(static_cast<std::size_t>(d * d));
  for (int n0 = 0; n0 < d; ++n0) {
    for (int n1 = 0; n1 < d; ++n1) {
      std::array<double, 4> clicks{dark, dark, dark, dark};
      clicks[2 * route] = click_probability(n0, efficiency, dark);
      clicks[2 * route + 1] = click_probability(n1, efficiency, dark);
      table[static_cast<std::size_t>(n0 * d + n1)] = squash_outcomes(clicks);
    }
  }
  return table;
}

std::array<double, 4> party_click_marginals(const std::array<std::vector<double>, 2>& marg, int d,
                                            double efficiency, double dark) {
  std::array<double, 4> p{};
  for (int route = 0; route < 2; ++route) {
    for (int n0 = 0; n0 < d; ++n0) {
      for (int n1 = 0; n1 < d; ++n1) {
        const double w = 0.5 * marg[route][static_cast<std::size_t>(n0 * d + n1)];
        if (w == 0.0) continue;
        for (int det = 0; det < 4; ++det) {
          double c = dark;
          if (det == 2 * route) c = click_probability(n0, efficiency, dark);
          if (det == 2 * route + 1) c = click_probability(n1, efficiency, dark);
          p[det] += w * c;
        }
      }
    }
  }
  return p;
}

void finish_rates(DetectionStats& s) {
  s.qber = s.p_sifted > 0.0 ? s.p_error / s.p_sifted : 0.5;
  s.visibility = 1.0 - 2.0 * s.qber;
  s.rate = s.p_coinc * s.windows_per_second;
}

// Joint statistics from per-route four-mode distributions (Alice pair first).
DetectionStats pair_stats(const std::array<std::vector<double>, 4>& dist, int d,
                          const DetectorModel& alice, const DetectorModel& bob,
                          double bob_transmissivity, double bob_background_rate,
                          double windows_per_second) {
  alice.validate();
  bob.validate();
  if (!(bob_transmissivity >= 0.0 && bob_transmissivity <= 1.0)) {
    throw ValidationError("transmissivity must lie in [0, 1]");
  }
  const double dark_a = alice.dark_probability();
  const double dark_b = bob.dark_probability(bob_background_rate);
  const double eta_a = alice.efficiency;
  const double eta_b = bob.efficiency * bob_transmissivity;
  const std::size_t d2 = static_cast<std::size_t>(d * d);

  DetectionStats s;
  s.cutoff = d - 1;
  for (int ra = 0; ra < 2; ++ra) {
    const auto table_a = party_table(d, ra, eta_a, dark_a);
    for (int rb = 0; rb < 2; ++rb) {
      const auto table_b = party_table(d, rb, eta_b, dark_b);
      const auto& p = dist[static_cast<std::size_t>(ra * 2 + rb)];
      for (std::size_t na = 0; na < d2; ++na) {
        std::array<double, 5> tmp{};
        for (std::size_t nb = 0; nb < d2; ++nb) {
          const double w = p[na * d2 + nb];
          if (w == 0.0) continue;
          for (std::size_t o = 0; o < 5; ++o) tmp[o] += w * table_b[nb][o];
        }
        for (std::size_t oa = 0; oa < 5; ++oa) {
          const double pa = 0.25 * table_a[na][oa];
          if (pa == 0.0) continue;
          for (std::size_t ob = 0; ob < 5; ++ob) s.outcome_joint[oa][ob] += pa * tmp[ob];
        }
      }
    }
  }

  for (std::size_t oa = 0; oa < 5; ++oa) {
    for (std::size_t ob = 0; ob < 5; ++ob) {
      const double j = s.outcome_joint[oa][ob];
      if (oa != no_event) s.p_alice += j;
      if (ob != no_event) s.p_bob += j;
      if (oa == no_event || ob == no_event) continue;
      s.p_coinc += j;
      const std::size_t basis_a = (oa - 1) / 2;
      const std::size_t basis_b = (ob - 1) / 2;
      if (basis_a != basis_b) continue;
      s.p_sifted += j;
      // Psi- is anticorrelated in both bases; equal bits are errors.
      if ((oa - 1) % 2 == (ob - 1) % 2) s.p_error += j;
    }
  }

  std::array<std::vector<double>, 2> bob_marg;
  for (int rb = 0; rb < 2; ++rb) {
    bob_marg[rb].assign(d2, 0.0);
    const auto& p = dist[static_cast<std::size_t>(rb)];  // route_a = 0
    for (std::size_t na = 0; na < d2; ++na)
      for (std::size_t nb = 0; nb < d2; ++nb) bob_marg[rb][nb] += p[na * d2 + nb];
  }
  const auto clicks = party_click_marginals(bob_marg, d, eta_b, dark_b);
  s.p_click.assign(clicks.begin(), clicks.end());
  s.windows_per_second = windows_per_second;
  finish_rates(s);
  return s;
}

DetectionStats prepared_stats(const std::array<std::vector<double>, 2>& dist, int d, int basis_choice,
                              const DetectorModel& bob, double transmissivity,
                              double background_rate, double pulse_rate) {
  bob.validate();
  if (!(transmissivity >= 0.0 && transmissivity <= 1.0)) {
    throw ValidationError("transmissivity must lie in [0, 1]");
  }
  const double dark = bob.dark_probability(background_rate);
  const double eta = bob.efficiency * transmissivity;
  std::array<double, 5> outcome{};
  for (int route = 0; route < 2; ++route) {
    const auto table = party_table(d, route, eta, dark);
    for (std::size_t n = 0; n < table.size(); ++n) {
      const double w = 0.5 * dist[route][n];
      if (w == 0.0) continue;
      for (std::size_t o = 0; o < 5; ++o) outcome[o] += w * table[n][o];
    }
  }
  DetectionStats s;
  s.cutoff = d - 1;
  s.p_bob = 1.0 - outcome[no_event];
  s.p_coinc = s.p_bob;
  s.p_sifted = outcome[outcome_index(basis_choice, 0)] + outcome[outcome_index(basis_choice, 1)];
  s.p_error = outcome[outcome_index(basis_choice, 1)];
  s.outcome_joint[no_event] = outcome;
  const auto clicks = party_click_marginals(dist, d, eta, dark);
  s.p_click.assign(clicks.begin(), clicks.end());
  s.windows_per_second = pulse_rate;
  finish_rates(s);
  return s;
}

MultimodeState to_basis(const MultimodeState& s, std::size_t h, std::size_t v, double angle) {
  return apply_polarization_rotation(s, h, v, -angle);
}

}  // namespace

PairAnalyzer::PairAnalyzer(const MultimodeState& pair, std::array<double, 2> alice_angles,
                           std::array<double, 2> bob_angles, double pairs_per_pulse)
    : d_(pair.layout().cutoff() + 1), pairs_per_pulse_(pairs_per_pulse) {
  using namespace pair_modes;
  if (pair.layout().n_modes() != 4) throw ValidationError("pair analyzer expects four modes");
  if (!(pairs_per_pulse > 0.0)) throw ValidationError("pairs per pulse must be positive");
  for (int ra = 0; ra < 2; ++ra) {
    const auto sa = to_basis(pair, alice_h, alice_v, alice_angles[ra]);
    for (int rb = 0; rb < 2; ++rb) {
      const auto sb = to_basis(sa, bob_h, bob_v, bob_angles[rb]);
      dist_[static_cast<std::size_t>(ra * 2 + rb)] = sb.number_distribution();
    }
  }
}

DetectionStats PairAnalyzer::measure(const DetectorModel& alice, const DetectorModel& bob,
                                     double bob_transmissivity, double bob_background_rate,
                                     double pair_rate) const {
  return pair_stats(dist_, d_, alice, bob, bob_transmissivity, bob_background_rate,
                    pair_rate / pairs_per_pulse_);
}

WcpAnalyzer::WcpAnalyzer(double mu, double misalignment_angle, int cutoff)
    : d_(cutoff + 1), mu_(mu) {
  if (!(mu >= 0.0)) throw ValidationError("mean photon number must be non-negative");
  const ModeLayout layout(2, cutoff, {{"bob", Polarization::h}, {"bob", Polarization::v}});
  auto state = apply_displacement(make_vacuum(layout), 0, Complex{std::sqrt(mu), 0.0});
  state = apply_polarization_rotation(state, 0, 1, misalignment_angle);
  dist_[0] = state.number_distribution();
  dist_[1] = to_basis(state, 0, 1, quarter_turn).number_distribution();
}

DetectionStats WcpAnalyzer::measure(const DetectorModel& bob, double transmissivity,
                                    double background_rate, double pulse_rate) const {
  return prepared_stats(dist_, d_, 0, bob, transmissivity, background_rate, pulse_rate);
}

DetectionStats measure_bb84_analyzer(const MultimodeState& state, const Bb84Setup& setup) {
  const int d = state.layout().cutoff() + 1;
  if (setup.basis_choice != 0 && setup.basis_choice != 1) {
    throw ValidationError("basis choice must be 0 or 1");
  }
  if (setup.has_alice) {
    std::array<std::vector<double>, 4> dist;
    for (int ra = 0; ra < 2; ++ra) {
      const auto sa = to_basis(state, setup.alice_h, setup.alice_v, ra * quarter_turn);
      for (int rb = 0; rb < 2; ++rb) {
        const auto sb = to_basis(sa, setup.bob_h, setup.bob_v, rb * quarter_turn);
        dist[static_cast<std::size_t>(ra * 2 + rb)] =
            marginal(sb, {setup.alice_h, setup.alice_v, setup.bob_h, setup.bob_v});
      }
    }
    return pair_stats(dist, d, setup.alice, setup.bob, 1.0, setup.bob_background_rate,
                      setup.source_rate / setup.pulses_per_count);
  }
  std::array<std::vector<double>, 2> dist;
  for (int rb = 0; rb < 2; ++rb) {
    dist[rb] = marginal(to_basis(state, setup.bob_h, setup.bob_v, rb * quarter_turn),
                        {setup.bob_h, setup.bob_v});
  }
  return prepared_stats(dist, d, setup.basis_choice, setup.bob, 1.0, setup.bob_background_rate,
                        setup.source_rate / setup.pulses_per_count);
}

ChshProbabilities chsh_probabilities(const DetectionStats& stats) {
  ChshProbabilities p{};
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int xa = 0; xa < 2; ++xa)
        for (int xb = 0; xb < 2; ++xb)
          p[a][b][xa * 2 + xb] = stats.outcome_joint[outcome_index(a, xa)][outcome_index(b, xb)];
  return p;
}

TeleportationModel::TeleportationModel(const TeleportationSetup& setup) : setup_(setup) {
  using namespace teleport_modes;
  setup_.alice.validate();
  setup_.bob.validate();
  if (setup_.epsilon < 0.0 || setup_.alpha < 0.0) {
    throw ValidationError("teleportation source strengths must be non-negative");
  }
  if (setup_.input_angles.empty()) throw ValidationError("need at least one input polarization");
  const ModeLayout layout(6, setup_.cutoff,
                          {{"alice", Polarization::h},
                           {"alice", Polarization::v},
                           {"link", Polarization::h},
                           {"link", Polarization::v},
                           {"input", Polarization::h},
                           {"input", Polarization::v}});
  auto pair = make_vacuum(layout);
  pair = apply_singlet_source(pair, alice_h, alice_v, link_h, link_v, setup_.epsilon);
  pair = apply_polarization_rotation(pair, link_h, link_v, setup_.misalignment_angle);
  for (double psi : setup_.input_angles) {
    auto s = apply_displacement(pair, input_h, Complex{setup_.alpha * std::cos(psi), 0.0});
    s = apply_displacement(s, input_v, Complex{setup_.alpha * std::sin(psi), 0.0});
    // Alice analyses parallel (H after rotation) and perpendicular to the input.
    prepared_.push_back(to_basis(s, alice_h, alice_v, psi));
  }
}

DetectionStats TeleportationModel::evaluate(double channel_loss_db, double background_rate,
                                            double pair_rate) const {
  return evaluate_backgrounds(channel_loss_db, {background_rate}, pair_rate).front();
}

std::vector<DetectionStats> TeleportationModel::evaluate_backgrounds(
    double channel_loss_db, const std::vector<double>& background_rates, double pair_rate) const {
  using namespace teleport_modes;
  if (channel_loss_db < 0.0) throw ValidationError("channel loss must be non-negative");
  const double t = std::pow(10.0, -channel_loss_db / 10.0);
  std::vector<std::vector<double>> dists;
  std::vector<std::vector<std::array<int, 6>>> occupations;
  for (const auto& prepared : prepared_) {
    auto s = apply_loss(prepared, link_h, t);
    s = apply_loss(s, link_v, t);
    s = apply_beamsplitter(s, link_h, input_h, 0.5);
    s = apply_beamsplitter(s, link_v, input_v, 0.5);
    const auto& layout = s.layout();
    auto p = s.number_distribution();
    std::vector<double> kept;
    std::vector<std::array<int, 6>> occ;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p[i] == 0.0) continue;
      kept.push_back(p[i]);
      std::array<int, 6> o{};
      for (std::size_t m = 0; m < 6; ++m) o[m] = layout.occupation(i, m);
      occ.push_back(o);
    }
    dists.push_back(std::move(kept));
    occupations.push_back(std::move(occ));
  }

  const double dark_a = setup_.alice.dark_probability();
  const double eta_a = setup_.alice.efficiency;
  const double eta_b = setup_.bob.efficiency;
  const double n = static_cast<double>(prepared_.size());
  std::vector<DetectionStats> out;
  for (double background_rate : background_rates) {
    const double dark_b = setup_.bob.dark_probability(background_rate);
    double expected = 0.0;
    double unexpected = 0.0;
    double bsm_total = 0.0;
    for (std::size_t k = 0; k < dists.size(); ++k) {
      for (std::size_t i = 0; i < dists[k].size(); ++i) {
        const double w = dists[k][i];
        const auto& o = occupations[k][i];
        const double c1h = click_probability(o[link_h], eta_b, dark_b);
        const double c1v = click_probability(o[link_v], eta_b, dark_b);
        const double c2h = click_probability(o[input_h], eta_b, dark_b);
        const double c2v = click_probability(o[input_v], eta_b, dark_b);
        // Psi- signature: one H and one V click in opposite output ports, nothing else.
        const double bsm = c1h * c2v * (1.0 - c1v) * (1.0 - c2h) + c1v * c2h * (1.0 - c1h) * (1.0 - c2v);
        if (bsm == 0.0) continue;
        const double ca = click_probability(o[alice_h], eta_a, dark_a);
        const double cb = click_probability(o[alice_v], eta_a, dark_a);
        bsm_total += w * bsm;
        expected += w * bsm * (ca * (1.0 - cb) + 0.5 * ca * cb);
        unexpected += w * bsm * (cb * (1.0 - ca) + 0.5 * ca * cb);
      }
    }
    DetectionStats stats;
    stats.cutoff = setup_.cutoff;
    stats.p_bob = bsm_total / n;
    stats.p_sifted = (expected + unexpected) / n;
    stats.p_coinc = stats.p_sifted;
    stats.p_error = unexpected / n;
    stats.windows_per_second =
        setup_.epsilon > 0.0 ? pair_rate / mean_pairs_per_pulse(setup_.epsilon) : pair_rate;
    finish_rates(stats);
    if (stats.p_sifted == 0.0) {
      stats.visibility = 0.0;
      stats.qber = 0.5;
    }
    out.push_back(stats);
  }
  return out;
}

DetectionStats simulate_teleportation(const TeleportationSetup& setup, double channel_loss_db,
                                      double background_rate, double pair_rate) {
  return TeleportationModel(setup).evaluate(channel_loss_db, background_rate, pair_rate);
}

DetectionStats simulate_teleportation_converged(TeleportationSetup setup, double channel_loss_db,
                                                double background_rate, double pair_rate,
                                                double tolerance, int max_cutoff) {
  auto low = simulate_teleportation(setup, channel_loss_db, background_rate, pair_rate);
  double last_shift = 0.0;
  while (setup.cutoff < max_cutoff) {
    ++setup.cutoff;
    auto high = simulate_teleportation(setup, channel_loss_db, background_rate, pair_rate);
    last_shift = std::abs(high.visibility - low.visibility);
    if (last_shift < tolerance) {
      high.truncation_shift = last_shift;
      return high;
    }
    low = high;
  }
  throw ConvergenceError("teleportation visibility not converged in Fock cutoff (shift " +
                         std::to_string(last_shift) + " at cutoff " + std::to_string(max_cutoff) +
                         ")");
}

}  // namespace qsat::fock
