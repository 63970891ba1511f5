#pragma once

// Optical loss for a ground-satellite geometry: scalar diffraction of the
// transmitted Gaussian, pointing and turbulence broadening, receiver capture,
// atmospheric transmittance and detector efficiency.

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "qsat/atmosphere.hpp"

namespace qsat::link {

struct TelescopeSpec {
  double diameter = 0.1;           // m
  double obstruction_ratio = 0.0;  // secondary / primary diameter
  double beam_fwhm = 0.0;          // m, transmitters only

  void validate(bool transmitter) const;
};

enum class Direction { uplink, downlink };

struct LinkGeometry {
  double distance = 600e3;            // m, slant range
  double elevation = 1.5707963267948966;  // rad
  double receiver_altitude = 600e3;   // m, satellite altitude (turbulence path length)
  Direction direction = Direction::downlink;

  void validate() const;
};

/// Hufnagel-Valley parameters: ground structure constant and high-altitude wind.
struct TurbulenceProfile {
  double ground_cn2 = 1.7e-14;  // m^(-2/3)
  double wind_speed = 21.0;     // m/s
  // Fried parameter over coherence radius, (1.46 / 0.423)^(3/5). The waist
  // formula takes the Fried parameter; 1 feeds it the coherence radius.
  double fried_scale = 2.1028461179;
};

struct RadialIntensityProfile {
  std::vector<double> radii;      // m, from 0, strictly increasing
  std::vector<double> intensity;  // W/m^2 for unit transmit peak intensity
  double wavelength_nm = 0.0;

  /// Power inside [0, radius], trapezoidal in r with the 2 pi r weight.
  double power_within(double radius) const;
  double total_power() const;
  /// Full width at half maximum, by linear interpolation on the falling edge.
  double fwhm() const;
  void write_csv(const std::string& path) const;
};

struct DiffractionOptions {
  int grid = 50;               // transmit-plane cells per side, raised to push lattice copies out of range
  std::size_t samples = 5000;  // receiver radii
  double span = 50.0;          // m; widened automatically for broad far-field beams
  bool auto_span = true;
  /// Radii beyond this are not evaluated and are dropped from the profile.
  double max_radius = std::numeric_limits<double>::infinity();
};

/// Rayleigh-Sommerfeld propagation of the clipped transmit Gaussian to the
/// receiver plane. Requires distance > 1 km.
RadialIntensityProfile diffract(const TelescopeSpec& tx, const LinkGeometry& geometry,
                                double wavelength_nm, const DiffractionOptions& options = {});

/// Two-dimensional isotropic Gaussian convolution of a radial profile. Output
/// is evaluated on the input radii up to max_radius.
RadialIntensityProfile convolve_gaussian(const RadialIntensityProfile& profile, double sigma,
                                         double max_radius = std::numeric_limits<double>::infinity());

double hufnagel_valley_cn2(double altitude_m, const TurbulenceProfile& profile);

/// Transverse coherence radius for a spherical wave from the ground to the
/// receiver altitude, [1.46 sec(z) k^2 int Cn2 (1 - z/h)^(5/3)]^(-3/5).
double coherence_length(const LinkGeometry& geometry, double wavelength_nm,
                       const TurbulenceProfile& profile);

/// Long-term turbulent waist w2 = 2 sqrt(2) d lambda / (pi r0) at the receiver,
/// with r0 = fried_scale * coherence_length.
double turbulence_waist(const LinkGeometry& geometry, double wavelength_nm,
                        const TurbulenceProfile& profile);

/// Gaussian broadening parameter for the uplink. The waist w2 is a 1/e^2
/// intensity radius, so the convolution kernel has sigma = w2 / 2.
double turbulence_sigma(const LinkGeometry& geometry, double wavelength_nm,
                        const TurbulenceProfile& profile);

/// Power of the unclipped transmit Gaussian of unit peak intensity, pi FWHM^2 / (4 ln 2).
double unclipped_power(const TelescopeSpec& tx);

/// Fraction of the unclipped Gaussian that passes the transmit annulus.
double aperture_transmission(const TelescopeSpec& tx);

struct LossBreakdown {
  double geometric_db = 0.0;    // -10 log10(P / P0)
  double clipping_db = 0.0;     // transmit aperture clipping included in geometric_db
  double atmosphere = 1.0;      // eta_t
  double detector = 1.0;        // eta_d
  double total_db = 0.0;        // including the fixed analyzer term
  double pointing_sigma_m = 0.0;
  double turbulence_sigma_m = 0.0;
};

inline constexpr double analyzer_loss_db = 3.0;

struct LossOptions {
  TurbulenceProfile turbulence;
  DiffractionOptions diffraction;
};

LossBreakdown loss_breakdown(const TelescopeSpec& tx, const TelescopeSpec& rx,
                             const LinkGeometry& geometry, double wavelength_nm,
                             double pointing_sigma_rad, double atmosphere_transmittance,
                             double detector_efficiency, const LossOptions& options = {});

double total_loss(const TelescopeSpec& tx, const TelescopeSpec& rx, const LinkGeometry& geometry,
                  double wavelength_nm, double pointing_sigma_rad,
                  const atmosphere::AtmosphereTable& atmosphere, double detector_efficiency,
                  const LossOptions& options = {});

enum class SourceKind { wcp, entangled };

/// Effective loss for a source: a WCP transmitter sets its mean photon number
/// after the aperture, so clipping is absorbed into the attenuation.
double effective_loss_db(const LossBreakdown& loss, SourceKind source);

/// Loss increase from the transmitter's central obstruction at fixed geometry.
double obstruction_penalty(const TelescopeSpec& tx, const TelescopeSpec& rx,
                           const LinkGeometry& geometry, double wavelength_nm, SourceKind source,
                           double pointing_sigma_rad = 0.0, const LossOptions& options = {});

}  // namespace qsat::link
