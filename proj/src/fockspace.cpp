#include "qsat/fockspace.hpp"

#include <cmath>
#include <iostream>
#include <numeric>

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "qsat/errors.hpp"

namespace qsat::fock {

namespace {

constexpr std::size_t dense_limit = 4096;
// Complex amplitudes held across all ensemble components.
constexpr std::size_t ensemble_budget = std::size_t{1} << 26;

int squeezer_pad(int cutoff) { return std::max(6, cutoff); }
int beamsplitter_pad(int cutoff) { return cutoff; }
constexpr int displacement_pad = 14;

}  // namespace

ModeLayout::ModeLayout(std::size_t n_modes, int cutoff, std::vector<ModeLabel> labels,
                       std::size_t dimension_budget)
    : n_modes_(n_modes), cutoff_(cutoff), labels_(std::move(labels)) {
  if (n_modes_ < 1) throw ValidationError("mode layout needs at least one mode");
  if (cutoff_ < 1) throw ValidationError("Fock cutoff must be at least 1");
  if (!labels_.empty() && labels_.size() != n_modes_) {
    throw ValidationError("mode labels must match the number of modes");
  }
  strides_.assign(n_modes_, 1);
  double dim = 1.0;
  for (std::size_t m = 0; m < n_modes_; ++m) dim *= static_cast<double>(local_dim());
  if (dim > static_cast<double>(dimension_budget)) {
    throw ValidationError("Hilbert dimension " + std::to_string(dim) + " exceeds budget " +
                          std::to_string(dimension_budget));
  }
  dimension_ = static_cast<std::size_t>(dim);
  for (std::size_t m = n_modes_; m-- > 1;) strides_[m - 1] = strides_[m] * local_dim();
}

std::vector<int> ModeLayout::occupations(std::size_t index) const {
  std::vector<int> occ(n_modes_);
  for (std::size_t m = 0; m < n_modes_; ++m) occ[m] = occupation(index, m);
  return occ;
}

std::size_t ModeLayout::index_of(const std::vector<int>& occupations) const {
  std::size_t index = 0;
  for (std::size_t m = 0; m < n_modes_; ++m) {
    index += static_cast<std::size_t>(occupations.at(m)) * strides_[m];
  }
  return index;
}

// Internal access to MultimodeState's representation.
class StateEditor {
 public:
  static std::vector<Eigen::VectorXcd>& kets(MultimodeState& s) { return s.kets_; }
  static double& leakage(MultimodeState& s) { return s.leakage_; }

  static void renormalise(MultimodeState& s, double trace_before) {
    const double after = s.trace();
    const double deficit = trace_before > 0.0 ? 1.0 - after / trace_before : 0.0;
    if (deficit > s.leakage_) {
      s.leakage_ = deficit;
      if (deficit > leakage_warning_threshold) {
        std::clog << "warning: Fock truncation leakage " << deficit << " at cutoff "
                  << s.layout().cutoff() << "\n";
      }
    }
    if (after <= 0.0) throw ValidationError("state annihilated by truncated operator");
    const double scale = 1.0 / std::sqrt(after);
    for (auto& k : s.kets_) k *= scale;
  }

  static void compress(MultimodeState& s) {
    const std::size_t dim = s.layout().dimension();
    if (s.kets_.size() <= dim) {
      if (s.kets_.size() * dim > ensemble_budget) {
        throw ValidationError("state ensemble exceeds memory budget");
      }
      return;
    }
    if (dim > dense_limit) throw ValidationError("state ensemble exceeds memory budget");
    const Eigen::MatrixXcd rho = s.density();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(rho);
    const double tr = rho.trace().real();
    std::vector<Eigen::VectorXcd> kets;
    for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
      const double lambda = solver.eigenvalues()[i];
      if (lambda > 1e-16 * tr) kets.emplace_back(std::sqrt(lambda) * solver.eigenvectors().col(i));
    }
    s.kets_ = std::move(kets);
  }
};

MultimodeState make_vacuum(const ModeLayout& layout) {
  MultimodeState s(layout);
  Eigen::VectorXcd ket = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(layout.dimension()));
  ket[0] = 1.0;
  s.kets_.push_back(std::move(ket));
  return s;
}

double MultimodeState::trace() const {
  double t = 0.0;
  for (const auto& k : kets_) t += k.squaredNorm();
  return t;
}

Eigen::MatrixXcd MultimodeState::density() const {
  const auto dim = static_cast<Eigen::Index>(layout_.dimension());
  if (layout_.dimension() > dense_limit) {
    throw ValidationError("dense density matrix requested above dimension limit");
  }
  Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(dim, dim);
  for (const auto& k : kets_) rho.noalias() += k * k.adjoint();
  return rho;
}

std::vector<double> MultimodeState::number_distribution() const {
  std::vector<double> p(layout_.dimension(), 0.0);
  for (const auto& k : kets_) {
    for (std::size_t i = 0; i < p.size(); ++i) p[i] += std::norm(k[static_cast<Eigen::Index>(i)]);
  }
  return p;
}

double MultimodeState::mean_photon_number(std::size_t mode) const {
  const auto p = number_distribution();
  double mean = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) mean += p[i] * layout_.occupation(i, mode);
  return mean;
}

double MultimodeState::total_mean_photon_number() const {
  double total = 0.0;
  for (std::size_t m = 0; m < layout_.n_modes(); ++m) total += mean_photon_number(m);
  return total;
}

double MultimodeState::fidelity_with_pure(const MultimodeState& pure) const {
  if (!(pure.layout() == layout_) || pure.rank() != 1) {
    throw ValidationError("fidelity reference must be a pure state on the same layout");
  }
  double f = 0.0;
  for (const auto& k : kets_) f += std::norm(pure.kets_.front().dot(k));
  return f;
}

Eigen::MatrixXcd annihilation(int dim) {
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(dim, dim);
  for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

namespace {

void check_mode(const MultimodeState& s, std::size_t mode) {
  if (mode >= s.layout().n_modes()) throw ValidationError("mode index out of range");
}

// Flat indices whose occupation of every listed mode is zero.
std::vector<std::size_t> base_indices(const ModeLayout& layout, std::initializer_list<std::size_t> modes) {
  std::vector<std::size_t> out;
  out.reserve(layout.dimension());
  for (std::size_t i = 0; i < layout.dimension(); ++i) {
    bool zero = true;
    for (auto m : modes) zero = zero && layout.occupation(i, m) == 0;
    if (zero) out.push_back(i);
  }
  return out;
}

MultimodeState apply_local_matrix_two(const MultimodeState& state, std::size_t a, std::size_t b,
                                      const Eigen::MatrixXcd& m) {
  MultimodeState out = state;
  const auto& layout = state.layout();
  const auto d = layout.local_dim();
  const auto bases = base_indices(layout, {a, b});
  const std::size_t sa = layout.stride(a);
  const std::size_t sb = layout.stride(b);
  std::vector<std::size_t> offsets(d * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) offsets[i * d + j] = i * sa + j * sb;

  const double before = state.trace();
  Eigen::VectorXcd local(static_cast<Eigen::Index>(d * d));
  Eigen::VectorXcd mapped(static_cast<Eigen::Index>(d * d));
  for (auto& ket : StateEditor::kets(out)) {
    for (auto base : bases) {
      for (std::size_t k = 0; k < offsets.size(); ++k) local[static_cast<Eigen::Index>(k)] = ket[static_cast<Eigen::Index>(base + offsets[k])];
      mapped.noalias() = m * local;
      for (std::size_t k = 0; k < offsets.size(); ++k) ket[static_cast<Eigen::Index>(base + offsets[k])] = mapped[static_cast<Eigen::Index>(k)];
    }
  }
  StateEditor::renormalise(out, before);
  return out;
}

MultimodeState apply_local_matrix_one(const MultimodeState& state, std::size_t a,
                                      const Eigen::MatrixXcd& m) {
  MultimodeState out = state;
  const auto& layout = state.layout();
  const auto d = layout.local_dim();
  const auto bases = base_indices(layout, {a});
  const std::size_t sa = layout.stride(a);
  const double before = state.trace();
  Eigen::VectorXcd local(static_cast<Eigen::Index>(d));
  Eigen::VectorXcd mapped(static_cast<Eigen::Index>(d));
  for (auto& ket : StateEditor::kets(out)) {
    for (auto base : bases) {
      for (std::size_t k = 0; k < d; ++k) local[static_cast<Eigen::Index>(k)] = ket[static_cast<Eigen::Index>(base + k * sa)];
      mapped.noalias() = m * local;
      for (std::size_t k = 0; k < d; ++k) ket[static_cast<Eigen::Index>(base + k * sa)] = mapped[static_cast<Eigen::Index>(k)];
    }
  }
  StateEditor::renormalise(out, before);
  return out;
}

// Restriction of exp(generator) on the padded space back to occupations 0..cutoff.
Eigen::MatrixXcd restricted_exponential_two(const Eigen::MatrixXcd& generator, int cutoff, int pad) {
  const int big = cutoff + 1 + pad;
  const int d = cutoff + 1;
  const Eigen::MatrixXcd u = generator.exp();
  Eigen::MatrixXcd m(d * d, d * d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) m(i * d + j, k * d + l) = u(i * big + j, k * big + l);
  return m;
}

MultimodeState squeeze_signed(const MultimodeState& state, std::size_t a, std::size_t b,
                              double epsilon) {
  check_mode(state, a);
  check_mode(state, b);
  if (a == b) throw ValidationError("squeezer needs two distinct modes");
  if (epsilon == 0.0) return state;
  const int pad = squeezer_pad(state.layout().cutoff());
  const int big = state.layout().cutoff() + 1 + pad;
  const Eigen::MatrixXcd op = annihilation(big);
  const Eigen::MatrixXcd cr = op.adjoint();
  const Eigen::MatrixXcd g = epsilon * (Eigen::kroneckerProduct(cr, cr).eval() -
                                        Eigen::kroneckerProduct(op, op).eval());
  return apply_local_matrix_two(state, a, b,
                                restricted_exponential_two(g, state.layout().cutoff(), pad));
}

}  // namespace

MultimodeState apply_two_mode_generator(const MultimodeState& state, std::size_t mode_a,
                                        std::size_t mode_b, const Eigen::MatrixXcd& generator,
                                        int pad) {
  check_mode(state, mode_a);
  check_mode(state, mode_b);
  if (mode_a == mode_b) throw ValidationError("two-mode operator needs distinct modes");
  const int big = state.layout().cutoff() + 1 + pad;
  if (generator.rows() != big * big || generator.cols() != big * big) {
    throw ValidationError("generator size does not match the padded two-mode space");
  }
  return apply_local_matrix_two(state, mode_a, mode_b,
                                restricted_exponential_two(generator, state.layout().cutoff(), pad));
}

MultimodeState apply_squeezer(const MultimodeState& state, std::size_t mode_a, std::size_t mode_b,
                              double epsilon) {
  if (epsilon < 0.0) throw ValidationError("squeezing strength must be non-negative");
  return squeeze_signed(state, mode_a, mode_b, epsilon);
}

MultimodeState apply_singlet_source(const MultimodeState& state, std::size_t a_h, std::size_t a_v,
                                    std::size_t b_h, std::size_t b_v, double epsilon) {
  if (epsilon < 0.0) throw ValidationError("squeezing strength must be non-negative");
  auto out = squeeze_signed(state, a_h, b_v, epsilon);
  return squeeze_signed(out, a_v, b_h, -epsilon);
}

MultimodeState apply_displacement(const MultimodeState& state, std::size_t mode, Complex alpha) {
  check_mode(state, mode);
  if (alpha == Complex{0.0, 0.0}) return state;
  const int cutoff = state.layout().cutoff();
  const double mu = std::norm(alpha);
  double head = 0.0;
  double term = std::exp(-mu);
  for (int n = 0; n <= cutoff; ++n) {
    head += term;
    term *= mu / (n + 1);
  }
  if (1.0 - head > 1e-5) {
    throw ValidationError("coherent amplitude too large for cutoff " + std::to_string(cutoff) +
                          ": Poisson tail " + std::to_string(1.0 - head));
  }
  const int big = cutoff + 1 + displacement_pad;
  const Eigen::MatrixXcd op = annihilation(big);
  const Eigen::MatrixXcd g = alpha * op.adjoint() - std::conj(alpha) * op;
  const Eigen::MatrixXcd u = g.exp();
  return apply_local_matrix_one(state, mode, u.topLeftCorner(cutoff + 1, cutoff + 1));
}

MultimodeState apply_loss(const MultimodeState& state, std::size_t mode, double transmissivity) {
  check_mode(state, mode);
  if (!(transmissivity >= 0.0 && transmissivity <= 1.0)) {
    throw ValidationError("transmissivity must lie in [0, 1]");
  }
  if (transmissivity == 1.0) return state;
  const auto& layout = state.layout();
  const int cutoff = layout.cutoff();
  const std::size_t stride = layout.stride(mode);
  const double eta = transmissivity;

  // Kraus amplitudes A[k][n] = sqrt(C(n,k) eta^(n-k) (1-eta)^k) for n -> n-k.
  std::vector<std::vector<double>> amp(cutoff + 1, std::vector<double>(cutoff + 1, 0.0));
  for (int n = 0; n <= cutoff; ++n) {
    for (int k = 0; k <= n; ++k) {
      const double log_binom = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
      const double w = std::exp(log_binom) * std::pow(eta, n - k) * std::pow(1.0 - eta, k);
      amp[k][n] = std::sqrt(w);
    }
  }

  MultimodeState out = state;
  auto& kets = StateEditor::kets(out);
  std::vector<Eigen::VectorXcd> branched;
  const auto dim = static_cast<Eigen::Index>(layout.dimension());
  for (const auto& ket : state.components()) {
    for (int k = 0; k <= cutoff; ++k) {
      Eigen::VectorXcd branch = Eigen::VectorXcd::Zero(dim);
      bool any = false;
      for (std::size_t i = 0; i < layout.dimension(); ++i) {
        const int n = layout.occupation(i, mode);
        if (n < k) continue;
        const Complex v = ket[static_cast<Eigen::Index>(i)];
        if (v == Complex{0.0, 0.0}) continue;
        const double a = amp[k][n];
        if (a == 0.0) continue;
        branch[static_cast<Eigen::Index>(i - static_cast<std::size_t>(k) * stride)] = a * v;
        any = true;
      }
      if (any && branch.squaredNorm() > 1e-300) branched.push_back(std::move(branch));
    }
  }
  kets = std::move(branched);
  StateEditor::compress(out);
  return out;
}

MultimodeState apply_beamsplitter(const MultimodeState& state, std::size_t mode_a,
                                  std::size_t mode_b, double transmissivity) {
  if (!(transmissivity >= 0.0 && transmissivity <= 1.0)) {
    throw ValidationError("beam splitter transmissivity must lie in [0, 1]");
  }
  check_mode(state, mode_a);
  check_mode(state, mode_b);
  if (mode_a == mode_b) throw ValidationError("beam splitter needs two distinct modes");
  if (transmissivity == 1.0) return state;
  const double theta = std::acos(std::sqrt(transmissivity));
  const int pad = beamsplitter_pad(state.layout().cutoff());
  const int big = state.layout().cutoff() + 1 + pad;
  const Eigen::MatrixXcd op = annihilation(big);
  const Eigen::MatrixXcd cr = op.adjoint();
  const Eigen::MatrixXcd g = theta * (Eigen::kroneckerProduct(cr, op).eval() -
                                      Eigen::kroneckerProduct(op, cr).eval());
  return apply_two_mode_generator(state, mode_a, mode_b, g, pad);
}

MultimodeState apply_polarization_rotation(const MultimodeState& state, std::size_t mode_h,
                                           std::size_t mode_v, double angle) {
  if (angle == 0.0) return state;
  check_mode(state, mode_h);
  check_mode(state, mode_v);
  const int pad = beamsplitter_pad(state.layout().cutoff());
  const int big = state.layout().cutoff() + 1 + pad;
  const Eigen::MatrixXcd op = annihilation(big);
  const Eigen::MatrixXcd cr = op.adjoint();
  // a_v^dag a_h - a_h^dag a_v moves an H photon into V with amplitude sin(angle).
  const Eigen::MatrixXcd g = angle * (Eigen::kroneckerProduct(op, cr).eval() -
                                      Eigen::kroneckerProduct(cr, op).eval());
  return apply_two_mode_generator(state, mode_h, mode_v, g, pad);
}

double misalignment_for_visibility(double visibility) {
  if (!(visibility >= -1.0 && visibility <= 1.0)) {
    throw ValidationError("visibility must lie in [-1, 1]");
  }
  return 0.5 * std::acos(visibility);
}

MultimodeState make_entangled_pair(double epsilon, double misalignment_angle, int cutoff) {
  if (epsilon < 0.0) throw ValidationError("squeezing strength must be non-negative");
  using namespace pair_modes;
  const ModeLayout layout(4, cutoff,
                          {{"alice", Polarization::h},
                           {"alice", Polarization::v},
                           {"bob", Polarization::h},
                           {"bob", Polarization::v}});
  auto state = make_vacuum(layout);
  // First order: eps (|H_A V_B> - |V_A H_B>).
  state = squeeze_signed(state, alice_h, bob_v, epsilon);
  state = squeeze_signed(state, alice_v, bob_h, -epsilon);
  return apply_polarization_rotation(state, bob_h, bob_v, misalignment_angle);
}

double mean_pairs_per_pulse(double epsilon) {
  const double s = std::sinh(epsilon);
  return 2.0 * s * s;
}

}  // namespace qsat::fock
