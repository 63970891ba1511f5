#pragma once

// Background photon rates collected by the receiver. Radiances are spectral
// (W m^-2 sr^-1 nm^-1) and treated as flat across the filter band.

#include <string>
#include <vector>

#include "qsat/linkbudget.hpp"
#include "qsat/orbit.hpp"

namespace qsat::background {

struct SkyBrightness {
  double h_nat = 1.2e-8;
  double h_art = 2.2e-8;
};

struct ReceiverView {
  double fov = 50e-6;              // rad, half-angle
  double telescope_radius = 0.25;  // m
  double filter_bandwidth_nm = 1.0;

  void validate() const;
};

/// Photons/s entering the aperture from the sky within the field of view.
double downlink_background(const SkyBrightness& sky, const ReceiverView& view,
                           double wavelength_nm);

/// Planck spectral radiance per unit frequency, W m^-2 sr^-1 Hz^-1.
double planck_radiance_frequency(double frequency_hz, double temperature_k);
/// Planck spectral radiance per unit wavelength, W m^-2 sr^-1 m^-1.
double planck_radiance_wavelength(double wavelength_m, double temperature_k);

/// Ground area seen by the satellite receiver: the field-of-view cone cut by
/// the ground plane, pi (fov d)^2 / sin(elevation).
double footprint_area(const link::LinkGeometry& geometry, const ReceiverView& view);

/// Solid angle of the receiver aperture seen from the footprint.
double receiver_solid_angle(const link::LinkGeometry& geometry, const ReceiverView& view);

class MoonAlbedo {
 public:
  MoonAlbedo(std::vector<double> phase_fraction, std::vector<double> albedo);
  /// Piecewise-linear in illuminated fraction (0 new, 0.5 half, 1 full).
  double at(double phase_fraction) const;

 private:
  std::vector<double> phase_;
  std::vector<double> albedo_;
};

MoonAlbedo load_moon_albedo(const std::string& path);

struct MoonState {
  double albedo = 0.012;        // effective albedo at the current phase
  double elevation = 0.785398;  // rad
};

inline constexpr double default_earth_albedo = 0.3;

/// Sunlight reflected by the Moon, then by the ground into the satellite
/// receiver. `extinction` covers both atmospheric traversals.
double uplink_natural_background(const link::LinkGeometry& geometry, const ReceiverView& view,
                                 double wavelength_nm, const MoonState& moon, double earth_albedo,
                                 double extinction);

class LightPollutionGrid {
 public:
  LightPollutionGrid(std::vector<double> latitudes_deg, std::vector<double> longitudes_deg,
                     std::vector<std::vector<double>> radiance, std::string provenance = {});

  /// Bilinear radiance; throws DataError outside the grid.
  double radiance(double lat_deg, double lon_deg) const;
  /// Mean radiance over a ground disc of the given radius.
  double mean_radiance(double lat_deg, double lon_deg, double radius_m) const;

  const std::vector<double>& latitudes() const { return lat_; }
  const std::vector<double>& longitudes() const { return lon_; }
  const std::vector<std::vector<double>>& values() const { return values_; }
  const std::string& provenance() const { return provenance_; }

 private:
  std::vector<double> lat_;
  std::vector<double> lon_;
  std::vector<std::vector<double>> values_;
  std::string provenance_;
};

LightPollutionGrid load_light_pollution(const std::string& path);
void save_light_pollution(const std::string& path, const LightPollutionGrid& grid);

/// Converts an ESRI ASCII raster (ncols/nrows/xllcorner/yllcorner/cellsize
/// header, first row northernmost) to the grid format, scaling values by `scale`.
LightPollutionGrid convert_esri_ascii(const std::string& path, double scale,
                                      const std::string& provenance);

using orbit::Site;

/// Light pollution emitted upward from the footprint into the receiver.
/// `extinction` is the one-way ground-to-satellite transmittance.
double uplink_pollution_background(const LightPollutionGrid& grid, const Site& site,
                                   const link::LinkGeometry& geometry, const ReceiverView& view,
                                   double wavelength_nm, double extinction);

struct BackgroundTerms {
  double natural = 0.0;     // photons/s at the aperture
  double artificial = 0.0;
  double total() const { return natural + artificial; }
};

struct UplinkInputs {
  MoonState moon;
  double earth_albedo = default_earth_albedo;
  double moon_extinction = 1.0;       // transmittance along the Moon-to-ground path
  double satellite_extinction = 1.0;  // transmittance along the ground-to-satellite path
};

BackgroundTerms total_background_downlink(const SkyBrightness& sky, const ReceiverView& view,
                                          double wavelength_nm);

BackgroundTerms total_background_uplink(const LightPollutionGrid& grid, const Site& site,
                                        const link::LinkGeometry& geometry, const ReceiverView& view,
                                        double wavelength_nm, const UplinkInputs& inputs);

/// Detected background per detector: aperture rate through the detector
/// efficiency and the fixed analyzer loss, shared by the analyzer's detectors.
double detected_per_detector(double aperture_rate, double detector_efficiency, int n_detectors = 4);

std::string moon_albedo_path(const std::string& data_dir);
std::string light_pollution_path(const std::string& data_dir);

}  // namespace qsat::background
