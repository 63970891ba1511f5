#include "qsat/background.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "qsat/constants.hpp"
#include "qsat/errors.hpp"
#include "qsat/gridfile.hpp"
#include "qsat/numeric.hpp"

namespace qsat::background {

using constants::pi;

void ReceiverView::validate() const {
  if (!(fov > 0.0)) throw ValidationError("field of view must be positive");
  if (!(telescope_radius > 0.0)) throw ValidationError("telescope radius must be positive");
  if (!(filter_bandwidth_nm > 0.0)) throw ValidationError("filter bandwidth must be positive");
}

double downlink_background(const SkyBrightness& sky, const ReceiverView& view,
                           double wavelength_nm) {
  view.validate();
  if (sky.h_nat < 0.0 || sky.h_art < 0.0) throw ValidationError("sky radiance must be non-negative");
  const double solid_angle = pi * view.fov * view.fov;
  const double area = pi * view.telescope_radius * view.telescope_radius;
  return (sky.h_nat + sky.h_art) * view.filter_bandwidth_nm * solid_angle * area /
         constants::photon_energy(wavelength_nm);
}

double planck_radiance_frequency(double nu, double temperature) {
  const double x = constants::planck * nu / (constants::boltzmann * temperature);
  return 2.0 * constants::planck * nu * nu * nu /
         (constants::speed_of_light * constants::speed_of_light) / std::expm1(x);
}

double planck_radiance_wavelength(double lambda, double temperature) {
  const double nu = constants::speed_of_light / lambda;
  return planck_radiance_frequency(nu, temperature) * constants::speed_of_light / (lambda * lambda);
}

double footprint_area(const link::LinkGeometry& geometry, const ReceiverView& view) {
  const double radius = view.fov * geometry.distance;
  return pi * radius * radius / std::sin(geometry.elevation);
}

double receiver_solid_angle(const link::LinkGeometry& geometry, const ReceiverView& view) {
  return pi * view.telescope_radius * view.telescope_radius /
         (geometry.distance * geometry.distance);
}

MoonAlbedo::MoonAlbedo(std::vector<double> phase_fraction, std::vector<double> albedo)
    : phase_(std::move(phase_fraction)), albedo_(std::move(albedo)) {
  if (phase_.empty() || phase_.size() != albedo_.size()) {
    throw DataError("moon albedo table needs matching phase and albedo lists");
  }
  for (double a : albedo_) {
    if (!(a >= 0.0 && a <= 1.0)) throw DataError("moon albedo outside [0, 1]");
  }
}

double MoonAlbedo::at(double phase_fraction) const {
  if (!(phase_fraction >= 0.0 && phase_fraction <= 1.0)) {
    throw ValidationError("moon phase fraction must lie in [0, 1]");
  }
  return numeric::interp_linear(phase_, albedo_, phase_fraction);
}

MoonAlbedo load_moon_albedo(const std::string& path) {
  auto grid = data::read_grid(path, "", "phase_fraction");
  return MoonAlbedo(std::move(grid.columns), std::move(grid.values.front()));
}

double uplink_natural_background(const link::LinkGeometry& geometry, const ReceiverView& view,
                                 double wavelength_nm, const MoonState& moon, double earth_albedo,
                                 double extinction) {
  view.validate();
  if (moon.elevation <= 0.0) return 0.0;
  const double lambda = wavelength_nm * 1e-9;
  // Solar spectral irradiance at the Moon, W m^-2 per nm.
  const double sun_ratio = constants::sun_radius / constants::astronomical_unit;
  const double solar =
      pi * planck_radiance_wavelength(lambda, constants::sun_temperature) * sun_ratio * sun_ratio * 1e-9;
  // Power scattered by the lunar disc, spread Lambertian-like toward Earth.
  const double moon_power = moon.albedo * solar * pi * constants::moon_radius * constants::moon_radius;
  const double ground_irradiance = moon_power / (pi * constants::earth_moon_distance *
                                                 constants::earth_moon_distance) *
                                   std::sin(moon.elevation);
  const double ground_radiance = earth_albedo * ground_irradiance / pi;
  return extinction * ground_radiance * view.filter_bandwidth_nm *
         footprint_area(geometry, view) * receiver_solid_angle(geometry, view) /
         constants::photon_energy(wavelength_nm);
}

LightPollutionGrid::LightPollutionGrid(std::vector<double> latitudes_deg,
                                       std::vector<double> longitudes_deg,
                                       std::vector<std::vector<double>> radiance,
                                       std::string provenance)
    : lat_(std::move(latitudes_deg)),
      lon_(std::move(longitudes_deg)),
      values_(std::move(radiance)),
      provenance_(std::move(provenance)) {
  if (lat_.size() < 2 || lon_.size() < 2) throw DataError("light-pollution grid needs at least 2x2 cells");
  if (values_.size() != lat_.size()) throw DataError("light-pollution grid row count mismatch");
  for (const auto& row : values_) {
    if (row.size() != lon_.size()) throw DataError("light-pollution grid is not rectangular");
    for (double v : row) {
      if (!(v >= 0.0)) throw DataError("light-pollution radiance must be non-negative");
    }
  }
}

double LightPollutionGrid::radiance(double lat, double lon) const {
  if (lat < lat_.front() || lat > lat_.back() || lon < lon_.front() || lon > lon_.back()) {
    std::ostringstream os;
    os << "footprint at (" << lat << ", " << lon << ") lies outside the light-pollution grid";
    throw DataError(os.str());
  }
  auto cell = [](const std::vector<double>& axis, double x) {
    std::size_t hi = static_cast<std::size_t>(std::upper_bound(axis.begin(), axis.end(), x) - axis.begin());
    hi = std::clamp<std::size_t>(hi, 1, axis.size() - 1);
    return hi - 1;
  };
  const std::size_t i = cell(lat_, lat);
  const std::size_t j = cell(lon_, lon);
  const double ty = (lat - lat_[i]) / (lat_[i + 1] - lat_[i]);
  const double tx = (lon - lon_[j]) / (lon_[j + 1] - lon_[j]);
  const double a = values_[i][j] + tx * (values_[i][j + 1] - values_[i][j]);
  const double b = values_[i + 1][j] + tx * (values_[i + 1][j + 1] - values_[i + 1][j]);
  return a + ty * (b - a);
}

double LightPollutionGrid::mean_radiance(double lat, double lon, double radius_m) const {
  // Equal-area rings, twelve points each.
  constexpr int rings = 4;
  constexpr int spokes = 12;
  const double m_per_deg = constants::earth_radius * constants::deg;
  numeric::CompensatedSum<double> sum;
  for (int k = 1; k <= rings; ++k) {
    const double rho = radius_m * std::sqrt((k - 0.5) / rings);
    for (int s = 0; s < spokes; ++s) {
      const double phi = 2.0 * pi * (s + 0.5 * (k % 2)) / spokes;
      const double dlat = rho * std::sin(phi) / m_per_deg;
      const double dlon = rho * std::cos(phi) / (m_per_deg * std::cos(lat * constants::deg));
      sum.add(radiance(lat + dlat, lon + dlon));
    }
  }
  return sum.value() / (rings * spokes);
}

LightPollutionGrid load_light_pollution(const std::string& path) {
  auto grid = data::read_grid(path, "latitudes_deg", "longitudes_deg");
  return LightPollutionGrid(std::move(grid.rows), std::move(grid.columns), std::move(grid.values),
                            std::move(grid.provenance));
}

void save_light_pollution(const std::string& path, const LightPollutionGrid& grid) {
  data::GridFile out{grid.latitudes(), grid.longitudes(), grid.values(), grid.provenance()};
  data::write_grid(path, out, "latitudes_deg", "longitudes_deg");
}

LightPollutionGrid convert_esri_ascii(const std::string& path, double scale,
                                      const std::string& provenance) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::map<std::string, double> header;
  std::string line;
  std::string first_data;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    if (!std::isalpha(static_cast<unsigned char>(key[0]))) {
      first_data = line;
      break;
    }
    std::transform(key.begin(), key.end(), key.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    double value = 0.0;
    if (!(ls >> value)) throw DataError(path + ": bad header value for " + key);
    header[key] = value;
  }
  for (const char* required : {"ncols", "nrows", "xllcorner", "yllcorner", "cellsize"}) {
    if (!header.count(required)) throw DataError(path + ": missing header field " + required);
  }
  const auto ncols = static_cast<std::size_t>(header["ncols"]);
  const auto nrows = static_cast<std::size_t>(header["nrows"]);
  const double cs = header["cellsize"];
  const bool has_nodata = header.count("nodata_value") > 0;
  const double nodata = has_nodata ? header["nodata_value"] : 0.0;
  std::vector<std::vector<double>> rows(nrows, std::vector<double>(ncols));
  std::stringstream body;
  body << first_data << '\n' << in.rdbuf();
  for (std::size_t i = 0; i < nrows; ++i) {
    for (std::size_t j = 0; j < ncols; ++j) {
      double v = 0.0;
      if (!(body >> v)) throw DataError(path + ": raster ends early at row " + std::to_string(i + 1));
      if (has_nodata && v == nodata) v = 0.0;
      rows[nrows - 1 - i][j] = v * scale;
    }
  }
  std::vector<double> lat(nrows);
  std::vector<double> lon(ncols);
  for (std::size_t i = 0; i < nrows; ++i) lat[i] = header["yllcorner"] + (i + 0.5) * cs;
  for (std::size_t j = 0; j < ncols; ++j) lon[j] = header["xllcorner"] + (j + 0.5) * cs;
  return LightPollutionGrid(std::move(lat), std::move(lon), std::move(rows), provenance);
}

double uplink_pollution_background(const LightPollutionGrid& grid, const Site& site,
                                   const link::LinkGeometry& geometry, const ReceiverView& view,
                                   double wavelength_nm, double extinction) {
  view.validate();
  const double area = footprint_area(geometry, view);
  const double mean = grid.mean_radiance(site.lat_deg, site.lon_deg, std::sqrt(area / pi));
  return extinction * mean * view.filter_bandwidth_nm * area * receiver_solid_angle(geometry, view) /
         constants::photon_energy(wavelength_nm);
}

BackgroundTerms total_background_downlink(const SkyBrightness& sky, const ReceiverView& view,
                                          double wavelength_nm) {
  BackgroundTerms t;
  t.natural = downlink_background({sky.h_nat, 0.0}, view, wavelength_nm);
  t.artificial = downlink_background({0.0, sky.h_art}, view, wavelength_nm);
  return t;
}

BackgroundTerms total_background_uplink(const LightPollutionGrid& grid, const Site& site,
                                        const link::LinkGeometry& geometry, const ReceiverView& view,
                                        double wavelength_nm, const UplinkInputs& inputs) {
  BackgroundTerms t;
  t.natural = uplink_natural_background(geometry, view, wavelength_nm, inputs.moon,
                                        inputs.earth_albedo,
                                        inputs.moon_extinction * inputs.satellite_extinction);
  t.artificial = uplink_pollution_background(grid, site, geometry, view, wavelength_nm,
                                             inputs.satellite_extinction);
  return t;
}

double detected_per_detector(double aperture_rate, double detector_efficiency, int n_detectors) {
  if (n_detectors < 1) throw ValidationError("need at least one detector");
  return aperture_rate * detector_efficiency * std::pow(10.0, -link::analyzer_loss_db / 10.0) /
         n_detectors;
}

std::string moon_albedo_path(const std::string& data_dir) { return data_dir + "/moon_albedo.csv"; }
std::string light_pollution_path(const std::string& data_dir) {
  return data_dir + "/light_pollution_ottawa.csv";
}

}  // namespace qsat::background
