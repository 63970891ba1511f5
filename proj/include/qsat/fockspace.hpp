#pragma once

// Truncated Fock-space engine. States are density operators stored as an
// ensemble of unnormalised kets, rho = sum_k |psi_k><psi_k|. Unitaries act on
// each ket; photon loss splits every ket into its Kraus branches. This keeps
// rho Hermitian and positive semidefinite by construction and avoids forming
// dense (cutoff+1)^(2 n_modes) matrices for the 4- and 6-mode configurations.

#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace qsat::fock {

using Complex = std::complex<double>;

enum class Polarization { h, v };

struct ModeLabel {
  std::string party;
  Polarization polarization = Polarization::h;
};

/// Ket dimension above which construction is refused.
inline constexpr std::size_t default_dimension_budget = 1u << 20;

class ModeLayout {
 public:
  ModeLayout(std::size_t n_modes, int cutoff, std::vector<ModeLabel> labels = {},
             std::size_t dimension_budget = default_dimension_budget);

  std::size_t n_modes() const { return n_modes_; }
  int cutoff() const { return cutoff_; }
  std::size_t local_dim() const { return static_cast<std::size_t>(cutoff_) + 1; }
  std::size_t dimension() const { return dimension_; }
  const std::vector<ModeLabel>& labels() const { return labels_; }

  /// Mode 0 is the most significant digit of the flat index.
  std::size_t stride(std::size_t mode) const { return strides_[mode]; }
  int occupation(std::size_t index, std::size_t mode) const {
    return static_cast<int>((index / strides_[mode]) % local_dim());
  }
  std::vector<int> occupations(std::size_t index) const;
  std::size_t index_of(const std::vector<int>& occupations) const;

  bool operator==(const ModeLayout& other) const {
    return n_modes_ == other.n_modes_ && cutoff_ == other.cutoff_;
  }

 private:
  std::size_t n_modes_;
  int cutoff_;
  std::size_t dimension_;
  std::vector<std::size_t> strides_;
  std::vector<ModeLabel> labels_;
};

class MultimodeState {
 public:
  const ModeLayout& layout() const { return layout_; }
  const std::vector<Eigen::VectorXcd>& components() const { return kets_; }
  std::size_t rank() const { return kets_.size(); }

  double trace() const;
  bool is_pure() const { return kets_.size() == 1; }

  /// Dense density matrix. Refuses dimensions above 4096.
  Eigen::MatrixXcd density() const;

  /// Fock-basis populations, i.e. the diagonal of rho.
  std::vector<double> number_distribution() const;
  double mean_photon_number(std::size_t mode) const;
  double total_mean_photon_number() const;

  /// Largest pre-renormalisation trace deficit seen so far.
  double truncation_leakage() const { return leakage_; }

  /// Fidelity <phi|rho|phi> against the first component of a pure reference.
  double fidelity_with_pure(const MultimodeState& pure) const;

  friend MultimodeState make_vacuum(const ModeLayout& layout);
  friend class StateEditor;

 private:
  explicit MultimodeState(ModeLayout layout) : layout_(std::move(layout)) {}

  ModeLayout layout_;
  std::vector<Eigen::VectorXcd> kets_;
  double leakage_ = 0.0;
};

MultimodeState make_vacuum(const ModeLayout& layout);

/// Leakage above which a warning is written to std::clog.
inline constexpr double leakage_warning_threshold = 1e-4;

/// Two-mode squeezer exp(eps (a^dag b^dag - a b)).
MultimodeState apply_squeezer(const MultimodeState& state, std::size_t mode_a, std::size_t mode_b,
                              double epsilon);

/// Pair of squeezers (a_h, b_v) with +eps and (a_v, b_h) with -eps, giving
/// |Psi-> = (|HV> - |VH>)/sqrt(2) correlations between parties a and b.
MultimodeState apply_singlet_source(const MultimodeState& state, std::size_t a_h, std::size_t a_v,
                                    std::size_t b_h, std::size_t b_v, double epsilon);

/// Displacement exp(alpha a^dag - alpha* a). Throws ValidationError if the Poisson
/// weight of |alpha|^2 beyond the cutoff exceeds 1e-5.
MultimodeState apply_displacement(const MultimodeState& state, std::size_t mode, Complex alpha);

/// Pure-loss (amplitude damping) channel with the given intensity transmissivity.
MultimodeState apply_loss(const MultimodeState& state, std::size_t mode, double transmissivity);

/// Beam splitter exp(theta (a^dag b - a b^dag)) with transmissivity cos^2(theta).
MultimodeState apply_beamsplitter(const MultimodeState& state, std::size_t mode_a,
                                  std::size_t mode_b, double transmissivity);

/// Real polarization rotation on an (H, V) pair: an H photon becomes
/// cos(angle)|H> + sin(angle)|V>.
MultimodeState apply_polarization_rotation(const MultimodeState& state, std::size_t mode_h,
                                           std::size_t mode_v, double angle);

/// General two-mode operator exp(generator) where the generator is given on the
/// padded local space of both modes (index n_a * L + n_b, L = cutoff + 1 + pad).
MultimodeState apply_two_mode_generator(const MultimodeState& state, std::size_t mode_a,
                                        std::size_t mode_b, const Eigen::MatrixXcd& generator,
                                        int pad);

/// Truncated annihilation operator on occupations 0..dim-1.
Eigen::MatrixXcd annihilation(int dim);

/// Layout of the entangled-pair configuration: Alice H/V then Bob H/V.
namespace pair_modes {
inline constexpr std::size_t alice_h = 0;
inline constexpr std::size_t alice_v = 1;
inline constexpr std::size_t bob_h = 2;
inline constexpr std::size_t bob_v = 3;
}  // namespace pair_modes

/// Misalignment angle giving the requested visibility in the two-photon limit:
/// visibility = cos(2 angle).
double misalignment_for_visibility(double visibility);

/// Two SPDC squeezers arranged into the |Psi-> = (|HV> - |VH>)/sqrt(2) correlations,
/// multi-pair terms included, followed by a polarization rotation on Bob's modes.
MultimodeState make_entangled_pair(double epsilon, double misalignment_angle, int cutoff = 6);

/// Mean pairs per pulse of the two-squeezer entangled source, 2 sinh^2(eps).
double mean_pairs_per_pulse(double epsilon);

}  // namespace qsat::fock
