#include "qsat/linkbudget.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "qsat/constants.hpp"
#include "qsat/errors.hpp"
#include "qsat/numeric.hpp"

namespace qsat::link {

using constants::pi;

void TelescopeSpec::validate(bool transmitter) const {
  if (!(diameter > 0.0)) throw ValidationError("telescope diameter must be positive");
  if (!(obstruction_ratio >= 0.0 && obstruction_ratio < 1.0)) {
    throw ValidationError("obstruction ratio must lie in [0, 1)");
  }
  if (transmitter && !(beam_fwhm > 0.0)) throw ValidationError("transmit beam FWHM must be positive");
}

void LinkGeometry::validate() const {
  if (!(distance > 0.0)) throw ValidationError("link distance must be positive");
  if (!(elevation > 0.0 && elevation <= pi / 2 + 1e-12)) {
    throw ValidationError("elevation must lie in (0, pi/2]");
  }
  if (!(receiver_altitude > 0.0)) throw ValidationError("altitude must be positive");
}

double RadialIntensityProfile::power_within(double radius) const {
  numeric::CompensatedSum<double> sum;
  for (std::size_t i = 1; i < radii.size(); ++i) {
    const double r0 = radii[i - 1];
    if (r0 >= radius) break;
    double r1 = radii[i];
    double i1 = intensity[i];
    if (r1 > radius) {
      const double t = (radius - r0) / (r1 - r0);
      i1 = intensity[i - 1] + t * (intensity[i] - intensity[i - 1]);
      r1 = radius;
    }
    sum.add(pi * (r1 - r0) * (r0 * intensity[i - 1] + r1 * i1));
  }
  return sum.value();
}

double RadialIntensityProfile::total_power() const {
  return radii.empty() ? 0.0 : power_within(radii.back());
}

double RadialIntensityProfile::fwhm() const {
  if (intensity.empty()) return 0.0;
  const double half = 0.5 * *std::max_element(intensity.begin(), intensity.end());
  std::size_t peak = static_cast<std::size_t>(
      std::max_element(intensity.begin(), intensity.end()) - intensity.begin());
  for (std::size_t i = peak + 1; i < intensity.size(); ++i) {
    if (intensity[i] < half) {
      const double t = (intensity[i - 1] - half) / (intensity[i - 1] - intensity[i]);
      return 2.0 * (radii[i - 1] + t * (radii[i] - radii[i - 1]));
    }
  }
  return 2.0 * radii.back();
}

void RadialIntensityProfile::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "radius_m,intensity\n" << std::setprecision(10);
  for (std::size_t i = 0; i < radii.size(); ++i) out << radii[i] << ',' << intensity[i] << '\n';
}

namespace {

// exp(-4 ln2 r^2 / F^2) == exp(-2 r^2 / w0^2)
double gaussian_exponent(double fwhm) { return 4.0 * std::log(2.0) / (fwhm * fwhm); }

double far_field_radius(const TelescopeSpec& tx, double distance, double lambda) {
  const double w0 = std::min(tx.beam_fwhm / std::sqrt(2.0 * std::log(2.0)), tx.diameter / 2.0);
  const double gaussian = lambda * distance / (pi * w0);
  const double airy = 1.22 * lambda * distance / tx.diameter;
  return std::max(gaussian, 2.0 * airy);
}

}  // namespace

RadialIntensityProfile diffract(const TelescopeSpec& tx, const LinkGeometry& geometry,
                                double wavelength_nm, const DiffractionOptions& options) {
  tx.validate(true);
  geometry.validate();
  if (!(wavelength_nm > 0.0)) throw ValidationError("wavelength must be positive");
  if (geometry.distance <= 1e3) throw ValidationError("diffraction needs the far field (distance > 1 km)");
  if (options.grid < 2 || options.samples < 2 || !(options.span > 0.0)) {
    throw ValidationError("invalid diffraction discretisation");
  }
  const double lambda = wavelength_nm * 1e-9;
  const double k = 2.0 * pi / lambda;
  const double d = geometry.distance;
  const double outer = tx.diameter / 2.0;
  const double inner = tx.obstruction_ratio * outer;
  const double alpha = gaussian_exponent(tx.beam_fwhm);

  double span = options.span;
  if (options.auto_span) span = std::max(span, 6.0 * far_field_radius(tx, d, lambda));
  // A lattice of point sources repeats the beam every lambda d / cell; keep
  // those copies well outside the evaluated radii.
  const double extent = std::min(span, options.max_radius);
  const int grid = std::max(options.grid,
                            static_cast<int>(std::ceil(1.5 * extent * tx.diameter / (lambda * d))));
  const double cell = tx.diameter / grid;

  std::vector<double> sx;
  std::vector<double> sy2;
  std::vector<double> amp;
  for (int i = 0; i < grid; ++i) {
    const double x = -outer + (i + 0.5) * cell;
    for (int j = 0; j < grid; ++j) {
      const double y = -outer + (j + 0.5) * cell;
      const double r2 = x * x + y * y;
      if (r2 > outer * outer || r2 < inner * inner) continue;
      sx.push_back(x);
      sy2.push_back(y * y);
      amp.push_back(std::exp(-0.5 * alpha * r2));
    }
  }

  RadialIntensityProfile out;
  out.wavelength_nm = wavelength_nm;
  out.radii = numeric::linspace(0.0, span, options.samples);
  if (options.max_radius < span) {
    const auto keep = std::upper_bound(out.radii.begin(), out.radii.end(), options.max_radius);
    out.radii.erase(std::min(keep + 1, out.radii.end()), out.radii.end());
  }
  out.intensity.resize(out.radii.size());
  const double prefactor = d / lambda * cell * cell;
  const double d2 = d * d;
  for (std::size_t n = 0; n < out.radii.size(); ++n) {
    const double r = out.radii[n];
    numeric::CompensatedSum<double> re;
    numeric::CompensatedSum<double> im;
    for (std::size_t s = 0; s < amp.size(); ++s) {
      const double dx = r - sx[s];
      const double s2 = dx * dx + sy2[s];
      const double dist = std::sqrt(d2 + s2);
      // k (R - d) without cancellation.
      const double phase = k * s2 / (dist + d);
      const double w = amp[s] / (dist * dist);
      re.add(w * std::cos(phase));
      im.add(w * std::sin(phase));
    }
    const double a = prefactor * re.value();
    const double b = prefactor * im.value();
    out.intensity[n] = a * a + b * b;
  }
  return out;
}

RadialIntensityProfile convolve_gaussian(const RadialIntensityProfile& profile, double sigma,
                                         double max_radius) {
  if (!(sigma >= 0.0)) throw ValidationError("convolution width must be non-negative");
  if (profile.radii.size() < 2) throw ValidationError("profile needs at least two samples");
  const auto& rin = profile.radii;
  const auto& iin = profile.intensity;
  const double back = rin.back();
  const double dr = back / static_cast<double>(rin.size() - 1);

  RadialIntensityProfile out;
  out.wavelength_nm = profile.wavelength_nm;
  const bool full = !(max_radius < back + 8.0 * sigma);
  if (sigma == 0.0) {
    for (std::size_t i = 0; i < rin.size() && rin[i] <= max_radius + dr; ++i) {
      out.radii.push_back(rin[i]);
      out.intensity.push_back(iin[i]);
    }
    return out;
  }

  bool uniform = true;
  for (std::size_t i = 1; i < rin.size() && uniform; ++i) {
    uniform = std::abs(rin[i] - rin[i - 1] - dr) < 1e-9 * std::max(dr, 1.0);
  }
  auto input_at = [&](double r) {
    if (r >= back) return r > back ? 0.0 : iin.back();
    if (!uniform) return numeric::interp_linear(rin, iin, r);
    const double pos = r / dr;
    const std::size_t i = static_cast<std::size_t>(pos);
    const double t = pos - static_cast<double>(i);
    return iin[i] + t * (iin[i + 1] - iin[i]);
  };

  const double reach = 8.0 * sigma;
  const double limit = full ? back + reach : std::min(max_radius + dr, back + reach);
  const std::size_t n_out = static_cast<std::size_t>(std::floor(limit / dr)) + 1;
  const double step_target = std::min(dr, sigma / 4.0);
  const double inv_s2 = 1.0 / (sigma * sigma);
  out.radii.resize(n_out);
  out.intensity.resize(n_out);
  for (std::size_t n = 0; n < n_out; ++n) {
    const double r = n * dr;
    const double lo = std::max(0.0, r - reach);
    const double hi = r + reach;
    const std::size_t steps = std::max<std::size_t>(8, static_cast<std::size_t>(std::ceil((hi - lo) / step_target)));
    const double h = (hi - lo) / static_cast<double>(steps);
    numeric::CompensatedSum<double> acc;
    numeric::CompensatedSum<double> weight;
    for (std::size_t m = 0; m <= steps; ++m) {
      const double rp = lo + m * h;
      const double diff = r - rp;
      // Rician kernel: (r'/s^2) exp(-(r - r')^2 / 2s^2) * exp(-r r'/s^2) I0(r r'/s^2)
      const double kernel = rp * inv_s2 * std::exp(-0.5 * diff * diff * inv_s2) *
                            numeric::bessel_i0_scaled(r * rp * inv_s2);
      const double wq = (m == 0 || m == steps) ? 0.5 * h : h;
      weight.add(wq * kernel);
      acc.add(wq * kernel * input_at(rp));
    }
    if (std::abs(weight.value() - 1.0) > 5e-3) {
      throw ConvergenceError("Gaussian convolution kernel lost normalisation at r = " +
                             std::to_string(r));
    }
    out.radii[n] = r;
    out.intensity[n] = acc.value();
  }
  if (full) {
    const double before = profile.total_power();
    const double after = out.total_power();
    if (before > 0.0 && std::abs(after - before) > 5e-3 * before) {
      throw ConvergenceError("Gaussian convolution changed the total power by more than 0.5%");
    }
  }
  return out;
}

double hufnagel_valley_cn2(double z, const TurbulenceProfile& p) {
  const double wind = p.wind_speed / 27.0;
  return 0.00594 * wind * wind * std::pow(z * 1e-5, 10.0) * std::exp(-z / 1000.0) +
         2.7e-16 * std::exp(-z / 1500.0) + p.ground_cn2 * std::exp(-z / 100.0);
}

double coherence_length(const LinkGeometry& geometry, double wavelength_nm,
                       const TurbulenceProfile& profile) {
  geometry.validate();
  if (!(profile.ground_cn2 > 0.0 && profile.wind_speed > 0.0 && profile.fried_scale > 0.0)) {
    throw ValidationError("turbulence parameters must be positive");
  }
  const double h = geometry.receiver_altitude;
  const double k = 2.0 * pi / (wavelength_nm * 1e-9);
  std::vector<double> breaks{0.0};
  for (double b : {100.0, 500.0, 1500.0, 5000.0, 10000.0, 20000.0, 50000.0}) {
    if (b < h) breaks.push_back(b);
  }
  breaks.push_back(h);
  const double integral = numeric::integrate_piecewise(
      [&](double z) { return hufnagel_valley_cn2(z, profile) * std::pow(1.0 - z / h, 5.0 / 3.0); },
      breaks, 1e-9);
  return std::pow(1.46 / std::sin(geometry.elevation) * k * k * integral, -3.0 / 5.0);
}

double turbulence_waist(const LinkGeometry& geometry, double wavelength_nm,
                        const TurbulenceProfile& profile) {
  const double r0 = profile.fried_scale * coherence_length(geometry, wavelength_nm, profile);
  return 2.0 * std::sqrt(2.0) * geometry.distance * wavelength_nm * 1e-9 / (pi * r0);
}

double turbulence_sigma(const LinkGeometry& geometry, double wavelength_nm,
                        const TurbulenceProfile& profile) {
  return turbulence_waist(geometry, wavelength_nm, profile) / 2.0;
}

double unclipped_power(const TelescopeSpec& tx) {
  return pi * tx.beam_fwhm * tx.beam_fwhm / (4.0 * std::log(2.0));
}

double aperture_transmission(const TelescopeSpec& tx) {
  const double alpha = gaussian_exponent(tx.beam_fwhm);
  const double outer = tx.diameter / 2.0;
  const double inner = tx.obstruction_ratio * outer;
  return std::exp(-alpha * inner * inner) - std::exp(-alpha * outer * outer);
}

LossBreakdown loss_breakdown(const TelescopeSpec& tx, const TelescopeSpec& rx,
                             const LinkGeometry& geometry, double wavelength_nm,
                             double pointing_sigma_rad, double atmosphere_transmittance,
                             double detector_efficiency, const LossOptions& options) {
  tx.validate(true);
  rx.validate(false);
  geometry.validate();
  if (!(pointing_sigma_rad >= 0.0)) throw ValidationError("pointing error must be non-negative");
  if (!(atmosphere_transmittance > 0.0 && atmosphere_transmittance <= 1.0) ||
      !(detector_efficiency > 0.0 && detector_efficiency <= 1.0)) {
    throw ValidationError("transmittance and detector efficiency must lie in (0, 1]");
  }
  LossBreakdown out;
  out.atmosphere = atmosphere_transmittance;
  out.detector = detector_efficiency;
  out.pointing_sigma_m = pointing_sigma_rad * geometry.distance;
  if (geometry.direction == Direction::uplink) {
    out.turbulence_sigma_m = turbulence_sigma(geometry, wavelength_nm, options.turbulence);
  }
  // Successive Gaussian convolutions compose into one with the summed variance.
  const double sigma = std::hypot(out.pointing_sigma_m, out.turbulence_sigma_m);
  const double radius = rx.diameter / 2.0;
  // Only radii within reach of the receiver after broadening are needed.
  auto diffraction = options.diffraction;
  diffraction.max_radius = std::min(diffraction.max_radius, radius + 9.0 * sigma + 1e-3);
  const auto profile = diffract(tx, geometry, wavelength_nm, diffraction);
  const auto received = convolve_gaussian(profile, sigma, radius);
  const double power =
      (1.0 - rx.obstruction_ratio * rx.obstruction_ratio) * received.power_within(radius);
  if (!(power > 0.0)) throw ValidationError("no power reaches the receiver");
  out.geometric_db = -10.0 * std::log10(power / unclipped_power(tx));
  out.clipping_db = -10.0 * std::log10(aperture_transmission(tx));
  out.total_db = out.geometric_db -
                 10.0 * std::log10(atmosphere_transmittance * detector_efficiency) +
                 analyzer_loss_db;
  return out;
}

double total_loss(const TelescopeSpec& tx, const TelescopeSpec& rx, const LinkGeometry& geometry,
                  double wavelength_nm, double pointing_sigma_rad,
                  const atmosphere::AtmosphereTable& atmosphere, double detector_efficiency,
                  const LossOptions& options) {
  const double eta_t = atmosphere.transmittance(wavelength_nm, geometry.elevation);
  return loss_breakdown(tx, rx, geometry, wavelength_nm, pointing_sigma_rad, eta_t,
                        detector_efficiency, options)
      .total_db;
}

double effective_loss_db(const LossBreakdown& loss, SourceKind source) {
  if (source == SourceKind::entangled) return loss.total_db;
  return loss.total_db - std::max(0.0, loss.clipping_db);
}

double obstruction_penalty(const TelescopeSpec& tx, const TelescopeSpec& rx,
                           const LinkGeometry& geometry, double wavelength_nm, SourceKind source,
                           double pointing_sigma_rad, const LossOptions& options) {
  if (!(tx.obstruction_ratio >= 0.0 && tx.obstruction_ratio <= 0.5)) {
    throw ValidationError("obstruction ratio must lie in [0, 0.5]");
  }
  if (tx.obstruction_ratio == 0.0) return 0.0;
  TelescopeSpec clear = tx;
  clear.obstruction_ratio = 0.0;
  const auto with = loss_breakdown(tx, rx, geometry, wavelength_nm, pointing_sigma_rad, 1.0, 1.0, options);
  const auto without =
      loss_breakdown(clear, rx, geometry, wavelength_nm, pointing_sigma_rad, 1.0, 1.0, options);
  return effective_loss_db(with, source) - effective_loss_db(without, source);
}

}  // namespace qsat::link
