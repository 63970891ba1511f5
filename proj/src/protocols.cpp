#include "qsat/protocols.hpp"

#include <algorithm>
#include <cmath>

#include "qsat/errors.hpp"
#include "qsat/numeric.hpp"

namespace qsat::protocols {

using numeric::binary_entropy;

void SecurityParams::validate() const {
  if (!(eps_total > eps_ec && eps_ec > 0.0)) throw ValidationError("need eps_total > eps_ec > 0");
  if (!(f_ec >= 1.0)) throw ValidationError("error-correction efficiency must be >= 1");
  if (!(q > 0.0 && q <= 1.0)) throw ValidationError("sifting factor must lie in (0, 1]");
  if (!(decoy_sigmas >= 0.0)) throw ValidationError("decoy deviation count must be non-negative");
}

double finite_size_xi(double n, double eps_pe) {
  if (!(n > 0.0) || !(eps_pe > 0.0)) return 0.5;
  return std::sqrt((2.0 * std::log(1.0 / eps_pe) + 2.0 * std::log(n + 1.0)) / n);
}

double finite_size_delta(double n, const SecurityParams& p, double eps_bar, double eps_bar_prime) {
  return 2.0 * std::log2(1.0 / (2.0 * (p.eps_total - eps_bar - p.eps_ec))) +
         7.0 * std::sqrt(n * std::log2(2.0 / (eps_bar - eps_bar_prime)));
}

namespace {

double entropy_capped(double e) { return e >= 0.5 ? 1.0 : binary_entropy(std::max(e, 0.0)); }

struct Optimum {
  double rate;
  double eps_bar;
  double eps_bar_prime;
};

// eps_bar = (eps - eps_ec) 10^x, eps_bar_prime = eps_bar 10^y, both exponents negative.
constexpr double exponent_floor = -30.0;

Optimum optimise(double n, double qber, const SecurityParams& p) {
  const double span = p.eps_total - p.eps_ec;
  auto inner = [&](double x, double* best_y) {
    const double eb = span * std::pow(10.0, x);
    auto f = [&](double y) { return bbm92_rate(n, qber, p, eb, eb * std::pow(10.0, y)); };
    const auto r = numeric::golden_section_max(f, exponent_floor, -1e-9, 1e-7);
    if (best_y) *best_y = r.x;
    return r.value;
  };
  const auto outer = numeric::golden_section_max([&](double x) { return inner(x, nullptr); },
                                                 exponent_floor, -1e-9, 1e-7);
  double y = 0.0;
  const double rate = inner(outer.x, &y);
  const double eb = span * std::pow(10.0, outer.x);
  return {rate, eb, eb * std::pow(10.0, y)};
}

}  // namespace

double bbm92_rate(double n, double qber, const SecurityParams& p, double eps_bar,
                  double eps_bar_prime) {
  const double xi = finite_size_xi(n, eps_bar_prime);
  return p.q * (1.0 - entropy_capped(qber + xi) - p.f_ec * entropy_capped(qber) -
                finite_size_delta(n, p, eps_bar, eps_bar_prime) / n);
}

KeyResult bbm92_key_length(double raw_n, double qber, const SecurityParams& params) {
  params.validate();
  if (!(qber >= 0.0 && qber <= 0.5)) throw ValidationError("QBER must lie in [0, 0.5]");
  if (raw_n < 0.0) throw ValidationError("raw count must be non-negative");
  KeyResult out;
  out.raw_bits = raw_n;
  out.mean_qber = qber;
  if (raw_n < 1.0) {
    out.verdict = "no raw key";
    return out;
  }
  const auto best = optimise(raw_n, qber, params);
  out.eps_bar = best.eps_bar;
  out.eps_bar_prime = best.eps_bar_prime;
  out.xi = finite_size_xi(raw_n, best.eps_bar_prime);
  out.delta = finite_size_delta(raw_n, params, best.eps_bar, best.eps_bar_prime);
  if (best.rate > 0.0) {
    out.secure_bits = std::min(raw_n, best.rate * raw_n);
    out.verdict = "positive key";
  } else if (1.0 - (1.0 + params.f_ec) * entropy_capped(qber) <= 0.0) {
    out.verdict = "QBER too high: error correction and phase-error terms exceed the sifted key";
  } else {
    out.verdict = "finite-size penalty (xi, delta) exceeds the asymptotic key";
  }
  return out;
}

double decoy_vacuum_yield_bound(double q_mu, double e_mu, double q_nu, double e_nu,
                                const DecoyIntensities& in) {
  // e0 Y0 <= E Q e^intensity for either intensity, e0 = 1/2
  return std::min(2.0 * e_mu * q_mu * std::exp(in.mu), 2.0 * e_nu * q_nu * std::exp(in.nu));
}

double decoy_single_photon_gain(double q_mu, double q_nu, double y0_hi,
                                const DecoyIntensities& in) {
  const double mu = in.mu;
  const double nu = in.nu;
  return mu * mu * std::exp(-mu) / (mu * nu - nu * nu) *
         (q_nu * std::exp(nu) - q_mu * std::exp(mu) * nu * nu / (mu * mu) -
          (mu * mu - nu * nu) / (mu * mu) * y0_hi);
}

KeyResult decoy_bb84_key_length(const DecoyCounts& c, const DecoyIntensities& in,
                                double pulses_sent, double signal_fraction,
                                const SecurityParams& params) {
  params.validate();
  if (c.n_mu < 0.0 || c.n_nu < 0.0) throw ValidationError("decoy counts must be non-negative");
  if (!(in.mu > in.nu && in.nu > 0.0)) throw ValidationError("need mu > nu > 0");
  if (!(signal_fraction > 0.0 && signal_fraction < 1.0)) {
    throw ValidationError("signal fraction must lie in (0, 1)");
  }
  if (!(pulses_sent > 0.0)) throw ValidationError("pulses sent must be positive");
  KeyResult out;
  out.raw_bits = c.n_mu;
  out.mean_qber = c.e_mu;
  if (c.n_mu < 1.0 || c.n_nu < 1.0) {
    out.verdict = "no raw key";
    return out;
  }
  const double pulses_mu = pulses_sent * signal_fraction;
  const double pulses_nu = pulses_sent * (1.0 - signal_fraction);
  const double q_mu = c.n_mu / pulses_mu;
  const double q_nu = c.n_nu / pulses_nu;
  const double k = params.decoy_sigmas;
  auto sd = [](double p, double n) { return std::sqrt(std::max(p * (1.0 - p), 0.0) / n); };
  const double q_mu_hi = q_mu + k * sd(q_mu, pulses_mu);
  const double q_nu_lo = std::max(0.0, q_nu - k * sd(q_nu, pulses_nu));
  const double q_nu_hi = q_nu + k * sd(q_nu, pulses_nu);
  const double e_mu_hi = std::min(0.5, c.e_mu + k * sd(c.e_mu, params.q * c.n_mu));
  const double e_nu_hi = std::min(0.5, c.e_nu + k * sd(c.e_nu, params.q * c.n_nu));

  const double q1 = decoy_single_photon_gain(
      q_mu_hi, q_nu_lo, decoy_vacuum_yield_bound(q_mu_hi, e_mu_hi, q_nu_hi, e_nu_hi, in), in);
  out.q1 = q1;
  if (!(q1 > 0.0)) {
    out.verdict = "decoy bound vacuous";
    return out;
  }
  const double e1 = std::min(0.5, e_nu_hi * q_nu_hi / q1);
  out.e1 = e1;

  const double n = c.n_mu;
  const auto inner = [&](double eb, double ebp) {
    return params.q * n / (c.n_mu + c.n_nu) *
           (-q_mu_hi * params.f_ec * entropy_capped(e_mu_hi) + q1 * (1.0 - entropy_capped(e1)) -
            q_mu_hi * finite_size_delta(n, params, eb, ebp) / n);
  };
  // Delta alone depends on (eps_bar, eps_bar_prime); minimise it.
  const double span = params.eps_total - params.eps_ec;
  double best_x = 0.0, best_y = 0.0;
  const auto outer = numeric::golden_section_max(
      [&](double x) {
        const double eb = span * std::pow(10.0, x);
        return numeric::golden_section_max(
                   [&](double y) { return inner(eb, eb * std::pow(10.0, y)); }, exponent_floor,
                   -1e-9, 1e-7)
            .value;
      },
      exponent_floor, -1e-9, 1e-7);
  best_x = outer.x;
  const double eb = span * std::pow(10.0, best_x);
  best_y = numeric::golden_section_max([&](double y) { return inner(eb, eb * std::pow(10.0, y)); },
                                       exponent_floor, -1e-9, 1e-7)
               .x;
  out.eps_bar = eb;
  out.eps_bar_prime = eb * std::pow(10.0, best_y);
  out.delta = finite_size_delta(n, params, out.eps_bar, out.eps_bar_prime);
  const double rate = inner(out.eps_bar, out.eps_bar_prime);
  if (rate > 0.0) {
    out.secure_bits = std::min(c.n_mu, rate * pulses_sent);
    out.verdict = "positive key";
  } else if (-q_mu_hi * params.f_ec * entropy_capped(e_mu_hi) + q1 * (1.0 - entropy_capped(e1)) <= 0.0) {
    out.verdict = "error correction exceeds the single-photon key";
  } else {
    out.verdict = "finite-size penalty (delta) exceeds the asymptotic key";
  }
  return out;
}

ChshResult chsh_verdict(const ChshCounts& counts) {
  ChshResult out;
  double variance = 0.0;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      const auto& n = counts[a][b];
      const double total = n[0] + n[1] + n[2] + n[3];
      if (!(total > 0.0)) throw ValidationError("CHSH setting pair without events");
      const double e = (n[0] - n[1] - n[2] + n[3]) / total;
      out.correlators[a][b] = e;
      variance += (1.0 - e * e) / total;
    }
  }
  const auto& e = out.correlators;
  out.s = std::abs(e[0][0] - e[0][1]) + std::abs(e[1][0] + e[1][1]);
  out.sigma = std::sqrt(variance);
  out.pass = out.s - 2.0 > 3.0 * out.sigma;
  return out;
}

bool teleportation_verdict(double visibility, double sigma) {
  if (!(visibility >= -1.0 && visibility <= 1.0)) throw ValidationError("visibility must lie in [-1, 1]");
  if (!(sigma >= 0.0)) throw ValidationError("sigma must be non-negative");
  return visibility - cloning_limit > 3.0 * sigma;
}

TeleportResult teleportation_from_counts(double expected, double unexpected) {
  TeleportResult out;
  const double n = expected + unexpected;
  if (!(n > 0.0)) return out;
  out.visibility = (expected - unexpected) / n;
  out.sigma = std::sqrt(std::max(0.0, 1.0 - out.visibility * out.visibility) / n);
  out.pass = teleportation_verdict(out.visibility, out.sigma);
  return out;
}

}  // namespace qsat::protocols
