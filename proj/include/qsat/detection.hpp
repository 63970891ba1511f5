#pragma once

// Detection models on top of the Fock engine: passive four-detector BB84
// analyzers (bucket detectors with efficiency thinning and dark counts),
// the CHSH configuration, and the teleportation Bell-state measurement.
//
// Basis choice in a passive analyzer is modelled per window: the photons of a
// window are routed to one of the two bases with probability 1/2, while all
// four detectors contribute dark and background clicks. Multi-click patterns
// are squashed: clicks in both bases pick a basis at random, a double click
// within a basis yields a random bit.

#include <array>
#include <cstddef>
#include <limits>
#include <vector>

#include "qsat/fockspace.hpp"

namespace qsat::fock {

struct DetectorModel {
  double efficiency = 1.0;    // folded with optics/link where the caller chooses
  double dark_rate = 20.0;    // counts/s per detector
  double window = 0.5e-9;     // s
  int n_detectors = 4;

  void validate() const;
  /// Per-window accidental click probability, (dark_rate + extra_rate) * window.
  double dark_probability(double extra_rate = 0.0) const;
};

/// Outcome index used in joint tables: 0 = no event, 1 + 2*basis + bit otherwise.
inline constexpr std::size_t no_event = 0;
constexpr std::size_t outcome_index(int basis, int bit) {
  return 1 + 2 * static_cast<std::size_t>(basis) + static_cast<std::size_t>(bit);
}
using OutcomeTable = std::array<std::array<double, 5>, 5>;

struct DetectionStats {
  std::vector<double> p_click;   // receiving party's detectors, per window
  OutcomeTable outcome_joint{};  // [alice outcome][bob outcome], entangled analysers only
  double p_alice = 0.0;          // probability of an Alice event per window
  double p_bob = 0.0;            // probability of a Bob event per window
  double p_coinc = 0.0;          // counted events per window (coincidences, or Bob events for WCP)
  double p_sifted = 0.0;
  double p_error = 0.0;
  double visibility = 0.0;
  double qber = 0.5;
  double windows_per_second = 0.0;
  double rate = 0.0;             // counted events per second
  double truncation_shift = std::numeric_limits<double>::quiet_NaN();
  int cutoff = 0;
};

/// Probability that a bucket detector fires for n incident photons.
double click_probability(int photons, double efficiency, double dark_probability);

/// Squashed outcome distribution for one passive analyzer given the click
/// probabilities of detectors [basis0 bit0, basis0 bit1, basis1 bit0, basis1 bit1].
std::array<double, 5> squash_outcomes(const std::array<double, 4>& clicks);

/// Passive two-basis analysis of an entangled pair on the standard pair layout.
/// Bases are given as polarizer angles; bit 0 is the detector at that angle.
class PairAnalyzer {
 public:
  PairAnalyzer(const MultimodeState& pair, std::array<double, 2> alice_angles,
               std::array<double, 2> bob_angles, double pairs_per_pulse);

  /// Joint statistics; Bob's detectors see the additional transmissivity and
  /// background rate (counts/s per detector). Event rates are normalised per
  /// emitted pair, so windows_per_second = pair_rate / pairs_per_pulse.
  DetectionStats measure(const DetectorModel& alice, const DetectorModel& bob,
                         double bob_transmissivity, double bob_background_rate,
                         double pair_rate) const;

  int cutoff() const { return d_ - 1; }

 private:
  // [route_a * 2 + route_b] -> P(nAh, nAv, nBh, nBv) in the routed bases.
  std::array<std::vector<double>, 4> dist_;
  int d_;
  double pairs_per_pulse_;
};

/// Weak-coherent-pulse analysis: Alice sends the basis-0 bit-0 state (by
/// symmetry of the real misalignment rotation this stands for all four).
class WcpAnalyzer {
 public:
  WcpAnalyzer(double mu, double misalignment_angle, int cutoff = 6);

  DetectionStats measure(const DetectorModel& bob, double transmissivity,
                         double background_rate, double pulse_rate) const;

  double mu() const { return mu_; }

 private:
  std::array<std::vector<double>, 2> dist_;  // per Bob route: P(n_bit0, n_bit1)
  int d_;
  double mu_;
};

/// BB84 analysis of an arbitrary state. With alice_modes set the state is
/// treated as an entangled pair (Psi- correlations expected); otherwise it is a
/// prepared signal in basis `basis_choice` carrying bit 0.
struct Bb84Setup {
  std::size_t bob_h = 0;
  std::size_t bob_v = 1;
  bool has_alice = false;
  std::size_t alice_h = 0;
  std::size_t alice_v = 1;
  DetectorModel alice;
  DetectorModel bob;
  double bob_background_rate = 0.0;
  double source_rate = 1.0;
  double pulses_per_count = 1.0;  // mean pairs per pulse for entangled sources
  int basis_choice = 0;
};

DetectionStats measure_bb84_analyzer(const MultimodeState& state, const Bb84Setup& setup);

/// CHSH counting probabilities extracted from a PairAnalyzer run whose bases
/// are the CHSH settings. Index [setting_a][setting_b][a_bit * 2 + b_bit].
using ChshProbabilities = std::array<std::array<std::array<double, 4>, 2>, 2>;
ChshProbabilities chsh_probabilities(const DetectionStats& stats);

// Teleportation layout: Alice's kept photon, the photon sent over the link,
// and the weak coherent input interfered with it.
namespace teleport_modes {
inline constexpr std::size_t alice_h = 0;
inline constexpr std::size_t alice_v = 1;
inline constexpr std::size_t link_h = 2;
inline constexpr std::size_t link_v = 3;
inline constexpr std::size_t input_h = 4;
inline constexpr std::size_t input_v = 5;
}  // namespace teleport_modes

struct TeleportationSetup {
  double epsilon = 0.41;
  double alpha = 0.07;
  double misalignment_angle = 0.0;
  int cutoff = 3;
  DetectorModel alice;        // detectors on the teleported photon
  DetectorModel bob;          // Bell-state-measurement detectors
  /// Input polarizations averaged over (H only by default).
  std::vector<double> input_angles{0.0};
};

/// Caches the prepared (pre-channel) six-mode states for repeated evaluation.
class TeleportationModel {
 public:
  explicit TeleportationModel(const TeleportationSetup& setup);

  /// Visibility of the teleported polarization conditioned on a Psi- BSM
  /// click pattern and an Alice detection. p_sifted counts parallel plus
  /// perpendicular detections, p_error the perpendicular ones.
  DetectionStats evaluate(double channel_loss_db, double background_rate, double pair_rate) const;
  /// Same channel, several background rates; the channel is applied once.
  std::vector<DetectionStats> evaluate_backgrounds(double channel_loss_db,
                                                   const std::vector<double>& background_rates,
                                                   double pair_rate) const;

  const TeleportationSetup& setup() const { return setup_; }

 private:
  TeleportationSetup setup_;
  std::vector<MultimodeState> prepared_;
};

DetectionStats simulate_teleportation(const TeleportationSetup& setup, double channel_loss_db,
                                      double background_rate, double pair_rate);

/// Evaluates at the setup cutoff and one above; raises the cutoff (up to
/// max_cutoff) until the visibility shift is below tolerance. Throws
/// ConvergenceError if it never is.
DetectionStats simulate_teleportation_converged(TeleportationSetup setup, double channel_loss_db,
                                                double background_rate, double pair_rate,
                                                double tolerance = 1e-3, int max_cutoff = 5);

}  // namespace qsat::fock
