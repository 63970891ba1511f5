#pragma once

// Circular sun-synchronous orbit and nighttime pass prediction over a ground site.

#include <cstddef>
#include <string>
#include <vector>

namespace qsat::orbit {

struct Site {
  double lat_deg = 45.3;
  double lon_deg = -75.9;
};

struct OrbitSpec {
  double altitude = 600e3;        // m
  std::string epoch = "2013-01-01";
  /// Right ascension of the ascending node relative to the mean Sun at epoch:
  /// 0 puts the ascending node at local noon (noon/midnight orbit).
  double node_offset = 0.0;

  void validate() const;
};

/// Seconds since 1970-01-01T00:00:00Z for "YYYY-MM-DD" or "YYYY-MM-DDTHH:MM:SS[Z]".
double parse_utc(const std::string& text);
std::string format_utc(double unix_seconds);
/// Calendar month (1-12) and year of a UTC instant.
int utc_month(double unix_seconds);
int utc_year(double unix_seconds);

double orbital_period(double altitude);
/// Inclination at which J2 nodal regression follows the mean Sun.
double sun_synchronous_inclination(double altitude);
/// Greenwich mean sidereal angle, rad.
double gmst(double unix_seconds);

struct SunPosition {
  double right_ascension;  // rad
  double declination;      // rad
};
SunPosition sun_position(double unix_seconds);
double sun_elevation(const Site& site, double unix_seconds);

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

/// Earth-fixed satellite position for the circular orbit, m.
Vec3 satellite_position(const OrbitSpec& orbit, double unix_seconds);
Vec3 site_position(const Site& site);

struct LookAngles {
  double distance;   // m
  double elevation;  // rad
};
LookAngles look_angles(const Site& site, const Vec3& satellite);

struct PassSample {
  double t;          // s since 1970 (UTC)
  double distance;   // m
  double elevation;  // rad
  double lat_deg;    // sub-satellite point (spherical Earth)
  double lon_deg;
  double alt_m;
};

struct PassProfile {
  std::vector<PassSample> samples;
  std::vector<bool> usable;
  double duration_usable = 0.0;  // s

  double max_elevation() const;
  /// Smallest distance over usable samples (infinity if none).
  double min_usable_distance() const;
  double start() const { return samples.empty() ? 0.0 : samples.front().t; }
};

inline constexpr double default_usable_elevation_deg = 10.0;
inline constexpr double default_night_sun_elevation_deg = -6.0;

struct PassOptions {
  double days = 365.0;
  double step = 1.0;                 // s
  double coarse_step = 30.0;         // s
  double usable_elevation_deg = default_usable_elevation_deg;
  double night_sun_elevation_deg = default_night_sun_elevation_deg;
};

/// Marks samples above the threshold usable and sets the usable duration
/// (usable sample count times the sampling cadence).
void apply_usable_mask(PassProfile& pass, double threshold_deg, double cadence);

/// Nighttime passes whose peak elevation exceeds the usable threshold.
std::vector<PassProfile> propagate_passes(const OrbitSpec& orbit, const Site& site,
                                          const PassOptions& options = {});

struct PassClasses {
  std::size_t best;
  std::size_t upper_quartile;
  std::size_t median;
};

/// Order statistics of usable duration. Throws ValidationError on an empty list.
PassClasses classify_passes(const std::vector<PassProfile>& passes);

/// Reads utc_iso8601,lat_deg,lon_deg,alt_m rows and splits them into passes
/// over the site (samples above the horizon; gaps longer than 1.5 cadences
/// start a new pass).
std::vector<PassProfile> import_ephemeris(const std::string& path, const Site& site,
                                          double usable_elevation_deg = default_usable_elevation_deg);

void export_ephemeris(const std::string& path, const std::vector<PassProfile>& passes);

}  // namespace qsat::orbit
