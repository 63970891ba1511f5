#pragma once

// Secure key lengths (finite-size BBM92, decoy-state BB84) and the verdicts of
// the CHSH Bell test and the teleportation cloning-limit test.

#include <array>
#include <string>

namespace qsat::protocols {

struct SecurityParams {
  double eps_total = 1e-9;
  double eps_ec = 1e-10;
  double f_ec = 1.22;
  double q = 0.5;
  /// Number of standard deviations applied to decoy-state observables.
  double decoy_sigmas = 10.0;

  void validate() const;
};

/// Finite-size QBER deviation used in the BBM92 bound:
/// xi = sqrt((2 ln(1/eps_pe) + 2 ln(N + 1)) / N), with eps_pe = eps_bar_prime.
double finite_size_xi(double n, double eps_pe);
inline constexpr const char* xi_formula = "xi = sqrt((2*ln(1/eps_bar_prime) + 2*ln(N+1))/N)";

/// Privacy-amplification penalty
/// 2 log2(1/(2(eps - eps_bar - eps_ec))) + 7 sqrt(N log2(2/(eps_bar - eps_bar_prime))).
double finite_size_delta(double n, const SecurityParams& params, double eps_bar,
                         double eps_bar_prime);

struct KeyResult {
  double secure_bits = 0.0;
  double raw_bits = 0.0;
  double mean_qber = 0.0;
  std::string verdict;
  double delta = 0.0;
  double xi = 0.0;
  double eps_bar = 0.0;
  double eps_bar_prime = 0.0;
  // Decoy-state estimates (zero for BBM92).
  double q1 = 0.0;
  double e1 = 0.0;
};

/// Secure bits per raw coincidence for given (eps_bar, eps_bar_prime), unclamped.
double bbm92_rate(double n, double qber, const SecurityParams& params, double eps_bar,
                  double eps_bar_prime);

/// Key from N raw coincidences at the given QBER, with (eps_bar, eps_bar_prime)
/// optimised by nested golden-section search.
KeyResult bbm92_key_length(double raw_n, double qber, const SecurityParams& params = {});

struct DecoyCounts {
  double n_mu = 0.0;  // Bob's detections from signal pulses
  double n_nu = 0.0;  // from decoy pulses
  double e_mu = 0.0;  // QBER of signal pulses
  double e_nu = 0.0;
};

struct DecoyIntensities {
  double mu = 0.5;
  double nu = 0.1;
};

/// Upper bound on the vacuum yield from either intensity's error count.
double decoy_vacuum_yield_bound(double q_mu, double e_mu, double q_nu, double e_nu,
                                const DecoyIntensities& in);

/// Q1 lower bound from the one-decoy estimator given a vacuum-yield upper bound.
double decoy_single_photon_gain(double q_mu, double q_nu, double y0_hi,
                                const DecoyIntensities& in);

/// `pulses_sent` counts signal and decoy pulses together; a fraction
/// `signal_fraction` of them are signals.
KeyResult decoy_bb84_key_length(const DecoyCounts& counts, const DecoyIntensities& intensities,
                                double pulses_sent, double signal_fraction = 0.5,
                                const SecurityParams& params = {});

/// Coincidence counts per setting pair, [setting_a][setting_b][a_bit * 2 + b_bit],
/// bit 0 standing for outcome +1.
using ChshCounts = std::array<std::array<std::array<double, 4>, 2>, 2>;

struct ChshResult {
  double s = 0.0;
  double sigma = 0.0;
  bool pass = false;
  std::array<std::array<double, 2>, 2> correlators{};
};

/// Polarizer angles for maximal violation with the singlet.
inline constexpr std::array<double, 2> chsh_alice_angles{0.0, 0.785398163397448309616};
inline constexpr std::array<double, 2> chsh_bob_angles{0.392699081698724154808,
                                                       1.178097245096172464424};

/// Throws ValidationError if any setting pair has no events.
ChshResult chsh_verdict(const ChshCounts& counts);

struct TeleportResult {
  double visibility = 0.0;
  double sigma = 0.0;
  bool pass = false;
};

inline constexpr double cloning_limit = 2.0 / 3.0;

bool teleportation_verdict(double visibility, double sigma);
/// Visibility and binomial sigma from expected/unexpected counts.
TeleportResult teleportation_from_counts(double expected, double unexpected);

}  // namespace qsat::protocols
