#include "qsat/orbit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "qsat/constants.hpp"
#include "qsat/errors.hpp"

namespace qsat::orbit {

using constants::deg;
using constants::pi;

void OrbitSpec::validate() const {
  if (!(altitude >= 300e3 && altitude <= 2000e3)) {
    throw ValidationError("orbit altitude must lie in [300, 2000] km");
  }
  parse_utc(epoch);
}

double parse_utc(const std::string& text) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0;
  double s = 0.0;
  char tail = 0;
  const int n = std::sscanf(text.c_str(), "%d-%d-%d%*[T ]%d:%d:%lf%c", &y, &mo, &d, &h, &mi, &s, &tail);
  const bool date_only = n == 3;
  const bool full = n == 6 || (n == 7 && (tail == 'Z' || tail == 'z'));
  if (!(date_only || full)) throw ValidationError("cannot parse UTC time '" + text + "'");
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h < 0 || h > 23 || mi < 0 || mi > 59 || s < 0.0 || s >= 61.0) {
    throw ValidationError("invalid UTC time '" + text + "'");
  }
  const auto days = std::chrono::sys_days{ymd}.time_since_epoch().count();
  return static_cast<double>(days) * 86400.0 + h * 3600.0 + mi * 60.0 + s;
}

namespace {

std::chrono::year_month_day civil(double unix_seconds) {
  const auto days = static_cast<long>(std::floor(unix_seconds / 86400.0));
  return std::chrono::year_month_day{std::chrono::sys_days{std::chrono::days{days}}};
}

double julian_centuries_days(double unix_seconds) {
  return unix_seconds / 86400.0 + 2440587.5 - 2451545.0;
}

double wrap(double angle) {
  angle = std::fmod(angle, 2.0 * pi);
  return angle < 0.0 ? angle + 2.0 * pi : angle;
}

}  // namespace

std::string format_utc(double unix_seconds) {
  const double rounded = std::round(unix_seconds * 1000.0) / 1000.0;
  const auto ymd = civil(rounded);
  double sod = rounded - std::floor(rounded / 86400.0) * 86400.0;
  const int h = static_cast<int>(sod / 3600.0);
  sod -= h * 3600.0;
  const int m = static_cast<int>(sod / 60.0);
  sod -= m * 60.0;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%06.3fZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), h, m, sod);
  return buf;
}

int utc_month(double unix_seconds) { return static_cast<int>(static_cast<unsigned>(civil(unix_seconds).month())); }
int utc_year(double unix_seconds) { return static_cast<int>(civil(unix_seconds).year()); }

double orbital_period(double altitude) {
  const double a = constants::earth_radius + altitude;
  return 2.0 * pi * std::sqrt(a * a * a / constants::earth_mu);
}

double sun_synchronous_inclination(double altitude) {
  const double a = constants::earth_radius + altitude;
  const double n = std::sqrt(constants::earth_mu / (a * a * a));
  const double node_rate = 2.0 * pi / (constants::tropical_year_days * 86400.0);
  const double ratio = constants::earth_radius / a;
  const double cos_i = -node_rate / (1.5 * n * constants::earth_j2 * ratio * ratio);
  if (cos_i < -1.0) throw ValidationError("no sun-synchronous inclination at this altitude");
  return std::acos(cos_i);
}

double gmst(double unix_seconds) {
  const double d = julian_centuries_days(unix_seconds);
  return wrap(2.0 * pi * (0.7790572732640 + 1.00273781191135448 * d));
}

SunPosition sun_position(double unix_seconds) {
  const double n = julian_centuries_days(unix_seconds);
  const double mean_lon = (280.460 + 0.9856474 * n) * deg;
  const double anomaly = (357.528 + 0.9856003 * n) * deg;
  const double ecl_lon = mean_lon + (1.915 * std::sin(anomaly) + 0.020 * std::sin(2.0 * anomaly)) * deg;
  const double obliquity = (23.439 - 0.0000004 * n) * deg;
  return {wrap(std::atan2(std::cos(obliquity) * std::sin(ecl_lon), std::cos(ecl_lon))),
          std::asin(std::sin(obliquity) * std::sin(ecl_lon))};
}

double sun_elevation(const Site& site, double unix_seconds) {
  const auto sun = sun_position(unix_seconds);
  const double lat = site.lat_deg * deg;
  const double hour_angle = gmst(unix_seconds) + site.lon_deg * deg - sun.right_ascension;
  return std::asin(std::sin(lat) * std::sin(sun.declination) +
                   std::cos(lat) * std::cos(sun.declination) * std::cos(hour_angle));
}

Vec3 satellite_position(const OrbitSpec& orbit, double t) {
  const double a = constants::earth_radius + orbit.altitude;
  const double n = std::sqrt(constants::earth_mu / (a * a * a));
  const double inc = sun_synchronous_inclination(orbit.altitude);
  const double epoch = parse_utc(orbit.epoch);
  const double dt = t - epoch;
  // The node starts on the Sun's right ascension and regresses at the solar rate.
  const double node_rate = 2.0 * pi / (constants::tropical_year_days * 86400.0);
  const double node = sun_position(epoch).right_ascension + orbit.node_offset + node_rate * dt;
  const double u = n * dt;
  const double cu = std::cos(u), su = std::sin(u), cn = std::cos(node), sn = std::sin(node);
  const double ci = std::cos(inc), si = std::sin(inc);
  const double x = a * (cn * cu - sn * su * ci);
  const double y = a * (sn * cu + cn * su * ci);
  const double z = a * su * si;
  const double theta = gmst(t);
  return {std::cos(theta) * x + std::sin(theta) * y, -std::sin(theta) * x + std::cos(theta) * y, z};
}

Vec3 site_position(const Site& site) {
  const double lat = site.lat_deg * deg;
  const double lon = site.lon_deg * deg;
  const double r = constants::earth_radius;
  return {r * std::cos(lat) * std::cos(lon), r * std::cos(lat) * std::sin(lon), r * std::sin(lat)};
}

LookAngles look_angles(const Site& site, const Vec3& sat) {
  const Vec3 s = site_position(site);
  const Vec3 rho{sat.x - s.x, sat.y - s.y, sat.z - s.z};
  const double range = std::sqrt(rho.x * rho.x + rho.y * rho.y + rho.z * rho.z);
  const double up = (rho.x * s.x + rho.y * s.y + rho.z * s.z) / constants::earth_radius;
  return {range, std::asin(std::clamp(up / range, -1.0, 1.0))};
}

namespace {

PassSample make_sample(const Site& site, const Vec3& sat, double t) {
  const auto look = look_angles(site, sat);
  const double r = std::sqrt(sat.x * sat.x + sat.y * sat.y + sat.z * sat.z);
  return {t, look.distance, look.elevation, std::asin(sat.z / r) / deg,
          std::atan2(sat.y, sat.x) / deg, r - constants::earth_radius};
}

Vec3 from_geodetic(double lat_deg, double lon_deg, double alt) {
  const double r = constants::earth_radius + alt;
  const double lat = lat_deg * deg;
  const double lon = lon_deg * deg;
  return {r * std::cos(lat) * std::cos(lon), r * std::cos(lat) * std::sin(lon), r * std::sin(lat)};
}

}  // namespace

double PassProfile::max_elevation() const {
  double best = -pi / 2;
  for (const auto& s : samples) best = std::max(best, s.elevation);
  return best;
}

double PassProfile::min_usable_distance() const {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (usable[i]) best = std::min(best, samples[i].distance);
  }
  return best;
}

void apply_usable_mask(PassProfile& pass, double threshold_deg, double cadence) {
  pass.usable.assign(pass.samples.size(), false);
  std::size_t count = 0;
  for (std::size_t i = 0; i < pass.samples.size(); ++i) {
    pass.usable[i] = pass.samples[i].elevation > threshold_deg * deg;
    count += pass.usable[i];
  }
  pass.duration_usable = static_cast<double>(count) * cadence;
}

std::vector<PassProfile> propagate_passes(const OrbitSpec& orbit, const Site& site,
                                          const PassOptions& options) {
  orbit.validate();
  if (!(options.step > 0.0 && options.coarse_step >= options.step && options.days > 0.0)) {
    throw ValidationError("invalid pass sampling options");
  }
  const double start = parse_utc(orbit.epoch);
  const double end = start + options.days * 86400.0;
  const double horizon = 0.0;
  std::vector<PassProfile> passes;
  double t = start;
  while (t < end) {
    const double el = look_angles(site, satellite_position(orbit, t)).elevation;
    if (el <= horizon) {
      t += options.coarse_step;
      continue;
    }
    // Back up to the rise and sample finely until the satellite sets.
    double rise = t;
    while (rise > start && look_angles(site, satellite_position(orbit, rise - options.step)).elevation > horizon) {
      rise -= options.step;
    }
    PassProfile pass;
    double s = rise;
    for (;; s += options.step) {
      const Vec3 sat = satellite_position(orbit, s);
      const auto sample = make_sample(site, sat, s);
      if (sample.elevation <= horizon) break;
      pass.samples.push_back(sample);
    }
    t = s + options.coarse_step;
    if (pass.samples.empty()) continue;
    if (pass.max_elevation() <= options.usable_elevation_deg * deg) continue;
    const auto peak = std::max_element(pass.samples.begin(), pass.samples.end(),
                                       [](const PassSample& a, const PassSample& b) { return a.elevation < b.elevation; });
    if (sun_elevation(site, peak->t) >= options.night_sun_elevation_deg * deg) continue;
    apply_usable_mask(pass, options.usable_elevation_deg, options.step);
    passes.push_back(std::move(pass));
  }
  return passes;
}

PassClasses classify_passes(const std::vector<PassProfile>& passes) {
  if (passes.empty()) throw ValidationError("no passes to classify");
  std::vector<std::size_t> order(passes.size());
  std::iota(order.begin(), order.end(), 0);
  // Longest first; ties resolved by time order for determinism.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return passes[a].duration_usable > passes[b].duration_usable;
  });
  const std::size_t n = passes.size();
  return {order[0], order[std::min(n - 1, n / 4)], order[std::min(n - 1, n / 2)]};
}

std::vector<PassProfile> import_ephemeris(const std::string& path, const Site& site,
                                          double usable_elevation_deg) {
  std::ifstream in(path);
  if (!in) throw qsat::DataError("cannot open " + path);
  std::vector<PassSample> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("utc", 0) == 0) continue;  // header
    std::stringstream ss(line);
    std::string utc, lat, lon, alt;
    if (!std::getline(ss, utc, ',') || !std::getline(ss, lat, ',') || !std::getline(ss, lon, ',') ||
        !std::getline(ss, alt)) {
      throw qsat::DataError(path + ":" + std::to_string(line_no) + ": expected utc,lat,lon,alt");
    }
    double t = 0.0;
    PassSample s{};
    try {
      t = parse_utc(utc);
      s.lat_deg = std::stod(lat);
      s.lon_deg = std::stod(lon);
      s.alt_m = std::stod(alt);
    } catch (const std::exception& e) {
      throw qsat::DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!rows.empty() && t <= rows.back().t) {
      throw qsat::DataError(path + ":" + std::to_string(line_no) + ": times must be strictly increasing");
    }
    const auto look = look_angles(site, from_geodetic(s.lat_deg, s.lon_deg, s.alt_m));
    s.t = t;
    s.distance = look.distance;
    s.elevation = look.elevation;
    rows.push_back(s);
  }
  if (rows.size() < 2) throw qsat::DataError(path + ": at least two samples are needed to form a pass");
  std::vector<double> gaps;
  for (std::size_t i = 1; i < rows.size(); ++i) gaps.push_back(rows[i].t - rows[i - 1].t);
  std::nth_element(gaps.begin(), gaps.begin() + gaps.size() / 2, gaps.end());
  const double cadence = gaps[gaps.size() / 2];

  std::vector<PassProfile> passes;
  PassProfile current;
  auto flush = [&]() {
    if (!current.samples.empty()) {
      apply_usable_mask(current, usable_elevation_deg, cadence);
      passes.push_back(std::move(current));
    }
    current = PassProfile{};
  };
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const bool gap = !current.samples.empty() && rows[i].t - current.samples.back().t > 1.5 * cadence;
    if (gap || rows[i].elevation <= 0.0) flush();
    if (rows[i].elevation > 0.0) current.samples.push_back(rows[i]);
  }
  flush();
  return passes;
}

void export_ephemeris(const std::string& path, const std::vector<PassProfile>& passes) {
  std::ofstream out(path);
  if (!out) throw qsat::DataError("cannot write " + path);
  out << "utc_iso8601,lat_deg,lon_deg,alt_m\n";
  char buf[128];
  for (const auto& pass : passes) {
    for (const auto& s : pass.samples) {
      std::snprintf(buf, sizeof buf, ",%.9f,%.9f,%.4f\n", s.lat_deg, s.lon_deg, s.alt_m);
      out << format_utc(s.t) << buf;
    }
  }
}

}  // namespace qsat::orbit
