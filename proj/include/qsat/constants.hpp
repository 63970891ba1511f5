#pragma once

#include <numbers>

namespace qsat::constants {

inline constexpr double pi = std::numbers::pi;
inline constexpr double planck = 6.62607015e-34;         // J s
inline constexpr double speed_of_light = 299792458.0;    // m/s
inline constexpr double boltzmann = 1.380649e-23;        // J/K

// Spherical Earth; pass geometry and ephemeris import share this radius.
inline constexpr double earth_radius = 6378137.0;        // m
inline constexpr double earth_mu = 3.986004418e14;       // m^3/s^2
inline constexpr double earth_j2 = 1.08262668e-3;
inline constexpr double earth_rotation_rate = 7.2921158553e-5;  // rad/s (sidereal)

inline constexpr double sun_temperature = 5778.0;        // K
inline constexpr double sun_radius = 6.957e8;            // m
inline constexpr double astronomical_unit = 1.495978707e11;  // m
inline constexpr double moon_radius = 1.7374e6;          // m
inline constexpr double earth_moon_distance = 3.844e8;   // m

inline constexpr double tropical_year_days = 365.2422;

inline constexpr double deg = pi / 180.0;

/// Photon energy h c / lambda for a vacuum wavelength in nm.
constexpr double photon_energy(double wavelength_nm) {
  return planck * speed_of_light / (wavelength_nm * 1e-9);
}

}  // namespace qsat::constants
