#include "qsat/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>

#include "qsat/constants.hpp"
#include "qsat/errors.hpp"
#include "qsat/fockspace.hpp"
#include "qsat/numeric.hpp"

namespace qsat::pipeline {

using constants::deg;

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

link::Direction parse_direction(const std::string& text) {
  if (text == "downlink") return link::Direction::downlink;
  if (text == "uplink") return link::Direction::uplink;
  throw ValidationError("link.direction must be 'downlink' or 'uplink', got '" + text + "'");
}

link::SourceKind parse_source(const std::string& text) {
  if (text == "wcp") return link::SourceKind::wcp;
  if (text == "entangled") return link::SourceKind::entangled;
  throw ValidationError("source.kind must be 'wcp' or 'entangled', got '" + text + "'");
}

Timing parse_timing(const std::string& text) {
  if (text == "pulsed") return Timing::pulsed;
  if (text == "cw") return Timing::cw;
  throw ValidationError("source.timing must be 'pulsed' or 'cw', got '" + text + "'");
}

}  // namespace

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys{
      "link.direction", "link.wavelength_nm", "link.reference_elevation_deg",
      "tx.diameter_m", "tx.obstruction", "tx.beam_fwhm_m",
      "rx.diameter_m", "rx.obstruction",
      "pointing.sigma_urad",
      "orbit.altitude_km", "orbit.epoch", "orbit.days", "orbit.node_offset_deg", "orbit.step_s",
      "orbit.usable_elevation_deg", "orbit.night_sun_elevation_deg",
      "site.lat_deg", "site.lon_deg",
      "ephemeris.path",
      "source.kind", "source.rate_hz", "source.mu", "source.nu", "source.signal_fraction",
      "source.epsilon", "source.visibility", "source.timing",
      "detector.dark_cps", "detector.window_ns", "detector.alice_efficiency",
      "detector.efficiency",
      "security.eps_total", "security.eps_ec", "security.f_ec", "security.q",
      "security.decoy_sigmas", "security.pool_passes",
      "cloud_fraction",
      "view.fov_urad", "view.filter_nm",
      "sky.h_nat", "sky.h_art",
      "moon.phase_fraction", "moon.elevation_deg", "earth_albedo",
      "turbulence.ground_cn2", "turbulence.wind_speed", "turbulence.fried_scale",
      "teleport.epsilon", "teleport.alpha", "teleport.cutoff",
      "fock.cutoff",
      "grid.loss_step_db", "grid.background_steps", "grid.elevation_step_deg",
      "grid.diffraction_cells", "grid.diffraction_samples", "grid.diffraction_span_m"};
  return keys;
}

void ScenarioConfig::validate() const {
  tx.validate(true);
  rx.validate(false);
  orbit.validate();
  detector.validate();
  security.validate();
  view.validate();
  if (!(wavelength_nm > 0.0)) throw ValidationError("wavelength must be positive");
  if (!(source_rate > 0.0)) throw ValidationError("source rate must be positive");
  if (!(pointing_sigma >= 0.0)) throw ValidationError("pointing error must be non-negative");
  if (!(intensities.mu > intensities.nu && intensities.nu > 0.0)) {
    throw ValidationError("decoy intensities need mu > nu > 0");
  }
  if (!(signal_fraction > 0.0 && signal_fraction < 1.0)) {
    throw ValidationError("signal fraction must lie in (0, 1)");
  }
  if (!(epsilon > 0.0)) throw ValidationError("source.epsilon must be positive");
  if (!(visibility > 0.0 && visibility <= 1.0)) {
    throw ValidationError("source visibility must lie in (0, 1]");
  }
  if (!(alice_efficiency > 0.0 && alice_efficiency <= 1.0)) {
    throw ValidationError("Alice efficiency must lie in (0, 1]");
  }
  if (!(detector_efficiency >= 0.0 && detector_efficiency <= 1.0)) {
    throw ValidationError("detector.efficiency must lie in [0, 1] (0 selects the bundled curve)");
  }
  if (!(cloud_fraction >= 0.0 && cloud_fraction <= 1.0)) {
    throw ValidationError("cloud_fraction must lie in [0, 1]");
  }
  if (!(moon_phase_fraction >= 0.0 && moon_phase_fraction <= 1.0)) {
    throw ValidationError("moon.phase_fraction must lie in [0, 1]");
  }
  if (!(earth_albedo >= 0.0 && earth_albedo <= 1.0)) {
    throw ValidationError("earth_albedo must lie in [0, 1]");
  }
  if (!(reference_elevation_deg > 0.0 && reference_elevation_deg <= 90.0)) {
    throw ValidationError("reference elevation must lie in (0, 90] degrees");
  }
  if (!(loss.turbulence.ground_cn2 > 0.0 && loss.turbulence.wind_speed > 0.0 &&
        loss.turbulence.fried_scale > 0.0)) {
    throw ValidationError("turbulence parameters must be positive");
  }
  if (!(teleport_epsilon > 0.0 && teleport_alpha > 0.0)) {
    throw ValidationError("teleportation source strengths must be positive");
  }
  if (teleport_cutoff < 1 || fock_cutoff < 1) throw ValidationError("Fock cutoffs must be >= 1");
  if (!(grid_loss_step_db > 0.0) || grid_background_steps < 1 || !(elevation_step_deg > 0.0)) {
    throw ValidationError("grid steps must be positive");
  }
  if (!(passes.days > 0.0 && passes.step > 0.0)) {
    throw ValidationError("orbit.days and orbit.step_s must be positive");
  }
}

ScenarioConfig resolve(const config::Config& c, const std::string& data_dir) {
  const auto& keys = known_keys();
  const std::set<std::string> known(keys.begin(), keys.end());
  for (const auto& [key, value] : c.entries()) {
    if (!known.count(key)) throw ValidationError("unknown configuration key '" + key + "'");
  }

  ScenarioConfig s;
  s.data_dir = data_dir;
  s.direction = parse_direction(c.text("link.direction", "downlink"));
  const bool down = s.direction == link::Direction::downlink;
  s.source = parse_source(c.text("source.kind", "wcp"));
  const bool wcp = s.source == link::SourceKind::wcp;

  s.wavelength_nm = c.number("link.wavelength_nm", down ? 670.0 : 785.0);
  s.reference_elevation_deg = c.number("link.reference_elevation_deg", 50.0);
  s.tx.diameter = c.number("tx.diameter_m", down ? 0.10 : 0.50);
  s.tx.obstruction_ratio = c.number("tx.obstruction", 0.0);
  const std::string fwhm = c.text("tx.beam_fwhm_m", "auto");
  s.auto_beam = fwhm == "auto";
  s.tx.beam_fwhm = s.auto_beam ? (wcp ? s.tx.diameter : s.tx.diameter / 2.0)
                               : c.number("tx.beam_fwhm_m", 0.0);
  s.rx.diameter = c.number("rx.diameter_m", down ? 0.50 : 0.30);
  s.rx.obstruction_ratio = c.number("rx.obstruction", 0.0);
  s.pointing_sigma = c.number("pointing.sigma_urad", 2.0) * 1e-6;

  s.orbit.altitude = c.number("orbit.altitude_km", 600.0) * 1e3;
  s.orbit.epoch = c.text("orbit.epoch", "2013-01-01");
  s.orbit.node_offset = c.number("orbit.node_offset_deg", 0.0) * deg;
  s.passes.days = c.number("orbit.days", 365.0);
  s.passes.step = c.number("orbit.step_s", 1.0);
  s.passes.usable_elevation_deg =
      c.number("orbit.usable_elevation_deg", orbit::default_usable_elevation_deg);
  s.passes.night_sun_elevation_deg =
      c.number("orbit.night_sun_elevation_deg", orbit::default_night_sun_elevation_deg);
  s.site.lat_deg = c.number("site.lat_deg", 45.3);
  s.site.lon_deg = c.number("site.lon_deg", -75.9);
  s.ephemeris_path = c.text("ephemeris.path", "");

  s.source_rate = c.number("source.rate_hz", wcp ? 300e6 : 100e6);
  s.intensities.mu = c.number("source.mu", 0.5);
  s.intensities.nu = c.number("source.nu", 0.1);
  s.signal_fraction = c.number("source.signal_fraction", 0.5);
  s.epsilon = c.number("source.epsilon", 0.22);
  s.visibility = c.number("source.visibility", 0.98);
  s.timing = parse_timing(c.text("source.timing", "pulsed"));

  s.detector.dark_rate = c.number("detector.dark_cps", 20.0);
  s.detector.window = c.number("detector.window_ns", 0.5) * 1e-9;
  s.detector.efficiency = 1.0;
  s.alice_efficiency = c.number("detector.alice_efficiency", 0.25);
  s.detector_efficiency = c.number("detector.efficiency", 0.0);

  s.security.eps_total = c.number("security.eps_total", 1e-9);
  s.security.eps_ec = c.number("security.eps_ec", 1e-10);
  s.security.f_ec = c.number("security.f_ec", 1.22);
  s.security.q = c.number("security.q", 0.5);
  s.security.decoy_sigmas = c.number("security.decoy_sigmas", 10.0);
  s.pool_passes = c.flag("security.pool_passes", false);
  s.cloud_fraction = c.number("cloud_fraction", 0.5);

  s.view.fov = c.number("view.fov_urad", 50.0) * 1e-6;
  s.view.filter_bandwidth_nm = c.number("view.filter_nm", 1.0);
  s.view.telescope_radius = s.rx.diameter / 2.0;
  s.sky.h_nat = c.number("sky.h_nat", 1.2e-8);
  s.sky.h_art = c.number("sky.h_art", 2.2e-8);
  s.moon_phase_fraction = c.number("moon.phase_fraction", 0.5);
  s.moon_elevation_deg = c.number("moon.elevation_deg", 45.0);
  s.earth_albedo = c.number("earth_albedo", background::default_earth_albedo);

  s.loss.turbulence.ground_cn2 = c.number("turbulence.ground_cn2", 1.7e-14);
  s.loss.turbulence.wind_speed = c.number("turbulence.wind_speed", 21.0);
  s.loss.turbulence.fried_scale =
      c.number("turbulence.fried_scale", link::TurbulenceProfile{}.fried_scale);
  s.loss.diffraction.grid = c.integer("grid.diffraction_cells", 50);
  const int samples = c.integer("grid.diffraction_samples", 5000);
  if (samples < 2) throw ValidationError("grid.diffraction_samples must be >= 2");
  s.loss.diffraction.samples = static_cast<std::size_t>(samples);
  s.loss.diffraction.span = c.number("grid.diffraction_span_m", 50.0);

  s.teleport_epsilon = c.number("teleport.epsilon", down ? 0.41 : 0.55);
  s.teleport_alpha = c.number("teleport.alpha", down ? 0.07 : 0.14);
  s.teleport_cutoff = c.integer("teleport.cutoff", 3);
  s.fock_cutoff = c.integer("fock.cutoff", 6);

  s.grid_loss_step_db = c.number("grid.loss_step_db", 0.5);
  s.grid_background_steps = c.integer("grid.background_steps", 10);
  s.elevation_step_deg = c.number("grid.elevation_step_deg", 2.0);

  s.validate();
  return s;
}

std::map<std::string, std::string> describe(const ScenarioConfig& s) {
  const bool down = s.direction == link::Direction::downlink;
  return {
      {"link.direction", down ? "downlink" : "uplink"},
      {"link.wavelength_nm", fmt(s.wavelength_nm)},
      {"link.reference_elevation_deg", fmt(s.reference_elevation_deg)},
      {"tx.diameter_m", fmt(s.tx.diameter)},
      {"tx.obstruction", fmt(s.tx.obstruction_ratio)},
      {"tx.beam_fwhm_m", fmt(s.tx.beam_fwhm)},
      {"rx.diameter_m", fmt(s.rx.diameter)},
      {"rx.obstruction", fmt(s.rx.obstruction_ratio)},
      {"pointing.sigma_urad", fmt(s.pointing_sigma * 1e6)},
      {"orbit.altitude_km", fmt(s.orbit.altitude / 1e3)},
      {"orbit.epoch", s.orbit.epoch},
      {"orbit.days", fmt(s.passes.days)},
      {"orbit.node_offset_deg", fmt(s.orbit.node_offset / deg)},
      {"orbit.step_s", fmt(s.passes.step)},
      {"orbit.usable_elevation_deg", fmt(s.passes.usable_elevation_deg)},
      {"orbit.night_sun_elevation_deg", fmt(s.passes.night_sun_elevation_deg)},
      {"site.lat_deg", fmt(s.site.lat_deg)},
      {"site.lon_deg", fmt(s.site.lon_deg)},
      {"ephemeris.path", s.ephemeris_path},
      {"source.kind", s.source == link::SourceKind::wcp ? "wcp" : "entangled"},
      {"source.rate_hz", fmt(s.source_rate)},
      {"source.mu", fmt(s.intensities.mu)},
      {"source.nu", fmt(s.intensities.nu)},
      {"source.signal_fraction", fmt(s.signal_fraction)},
      {"source.epsilon", fmt(s.epsilon)},
      {"source.visibility", fmt(s.visibility)},
      {"source.timing", s.timing == Timing::pulsed ? "pulsed" : "cw"},
      {"detector.dark_cps", fmt(s.detector.dark_rate)},
      {"detector.window_ns", fmt(s.detector.window * 1e9)},
      {"detector.alice_efficiency", fmt(s.alice_efficiency)},
      {"detector.efficiency", fmt(s.detector_efficiency)},
      {"security.eps_total", fmt(s.security.eps_total)},
      {"security.eps_ec", fmt(s.security.eps_ec)},
      {"security.f_ec", fmt(s.security.f_ec)},
      {"security.q", fmt(s.security.q)},
      {"security.decoy_sigmas", fmt(s.security.decoy_sigmas)},
      {"security.pool_passes", s.pool_passes ? "true" : "false"},
      {"cloud_fraction", fmt(s.cloud_fraction)},
      {"view.fov_urad", fmt(s.view.fov * 1e6)},
      {"view.filter_nm", fmt(s.view.filter_bandwidth_nm)},
      {"sky.h_nat", fmt(s.sky.h_nat)},
      {"sky.h_art", fmt(s.sky.h_art)},
      {"moon.phase_fraction", fmt(s.moon_phase_fraction)},
      {"moon.elevation_deg", fmt(s.moon_elevation_deg)},
      {"earth_albedo", fmt(s.earth_albedo)},
      {"turbulence.ground_cn2", fmt(s.loss.turbulence.ground_cn2)},
      {"turbulence.wind_speed", fmt(s.loss.turbulence.wind_speed)},
      {"turbulence.fried_scale", fmt(s.loss.turbulence.fried_scale)},
      {"teleport.epsilon", fmt(s.teleport_epsilon)},
      {"teleport.alpha", fmt(s.teleport_alpha)},
      {"teleport.cutoff", std::to_string(s.teleport_cutoff)},
      {"fock.cutoff", std::to_string(s.fock_cutoff)},
      {"grid.loss_step_db", fmt(s.grid_loss_step_db)},
      {"grid.background_steps", std::to_string(s.grid_background_steps)},
      {"grid.elevation_step_deg", fmt(s.elevation_step_deg)},
      {"grid.diffraction_cells", std::to_string(s.loss.diffraction.grid)},
      {"grid.diffraction_samples", std::to_string(s.loss.diffraction.samples)},
      {"grid.diffraction_span_m", fmt(s.loss.diffraction.span)},
  };
}

DataBundle DataBundle::load(const std::string& dir) {
  return DataBundle{
      atmosphere::load_table(atmosphere::atmosphere_path(dir)),
      atmosphere::load_detector_curve(atmosphere::thin_apd_path(dir),
                                      atmosphere::DetectorKind::thin_apd),
      atmosphere::load_detector_curve(atmosphere::thick_apd_path(dir),
                                      atmosphere::DetectorKind::thick_apd),
      background::load_moon_albedo(background::moon_albedo_path(dir)),
      background::load_light_pollution(background::light_pollution_path(dir)),
  };
}

double slant_range(double altitude, double elevation) {
  const double r = constants::earth_radius;
  const double s = std::sin(elevation);
  return std::sqrt(r * r * s * s + 2.0 * r * altitude + altitude * altitude) - r * s;
}

double receiver_detector_efficiency(const ScenarioConfig& s, const DataBundle& data) {
  if (s.detector_efficiency > 0.0) return s.detector_efficiency;
  return atmosphere::detector_efficiency(data.thin, data.thick, s.wavelength_nm);
}

namespace {

link::LinkGeometry geometry_at(const ScenarioConfig& s, double elevation, double distance) {
  link::LinkGeometry g;
  g.distance = distance;
  g.elevation = elevation;
  g.receiver_altitude = s.orbit.altitude;
  g.direction = s.direction;
  return g;
}

background::BackgroundTerms aperture_background(const ScenarioConfig& s, const DataBundle& data,
                                                const link::LinkGeometry& g) {
  if (s.direction == link::Direction::downlink) {
    return background::total_background_downlink(s.sky, s.view, s.wavelength_nm);
  }
  background::UplinkInputs in;
  in.earth_albedo = s.earth_albedo;
  in.satellite_extinction = data.atmosphere.transmittance(s.wavelength_nm, g.elevation);
  if (s.moon_elevation_deg > 0.0) {
    in.moon.albedo = data.moon.at(s.moon_phase_fraction);
    in.moon.elevation = s.moon_elevation_deg * deg;
    // Below the tabulated range the lowest tabulated elevation stands in.
    const double table_min = data.atmosphere.elevations_deg().front();
    in.moon_extinction = data.atmosphere.transmittance(
        s.wavelength_nm, std::max(s.moon_elevation_deg, table_min) * deg);
  } else {
    in.moon.albedo = 0.0;
  }
  return background::total_background_uplink(data.pollution, s.site, g, s.view, s.wavelength_nm,
                                              in);
}

}  // namespace

double LinkTable::loss_at(double elevation, double distance) const {
  const double el = elevation / deg;
  const double base = numeric::interp_linear(elevations_deg, loss_db, el);
  const double d_table = numeric::interp_linear(elevations_deg, distances, el);
  return base + 20.0 * std::log10(distance / d_table);
}

double LinkTable::background_at(double elevation) const {
  return numeric::interp_linear(elevations_deg, background, elevation / deg);
}

LinkTable build_link_table(const ScenarioConfig& s, const DataBundle& data) {
  LinkTable t;
  const double lo = s.passes.usable_elevation_deg;
  const double eta_d = receiver_detector_efficiency(s, data);
  const int n = static_cast<int>(std::ceil((90.0 - lo) / s.elevation_step_deg - 1e-9));
  for (int i = 0; i <= n; ++i) {
    const double el_deg = std::min(90.0, lo + i * s.elevation_step_deg);
    const double el = el_deg * deg;
    const auto g = geometry_at(s, el, slant_range(s.orbit.altitude, el));
    const double eta_t = data.atmosphere.transmittance(s.wavelength_nm, el);
    const auto b = link::loss_breakdown(s.tx, s.rx, g, s.wavelength_nm, s.pointing_sigma, eta_t,
                                        eta_d, s.loss);
    const auto bg = aperture_background(s, data, g);
    t.elevations_deg.push_back(el_deg);
    t.distances.push_back(g.distance);
    t.breakdown.push_back(b);
    t.loss_db.push_back(link::effective_loss_db(b, s.source));
    t.aperture_background.push_back(bg);
    t.background.push_back(background::detected_per_detector(bg.total(), eta_d,
                                                             s.detector.n_detectors));
  }
  return t;
}

link::LossBreakdown reference_loss(const ScenarioConfig& s, const DataBundle& data) {
  const double el = s.reference_elevation_deg * deg;
  const auto g = geometry_at(s, el, slant_range(s.orbit.altitude, el));
  return link::loss_breakdown(s.tx, s.rx, g, s.wavelength_nm, s.pointing_sigma,
                              data.atmosphere.transmittance(s.wavelength_nm, el),
                              receiver_detector_efficiency(s, data), s.loss);
}


RateGrid::RateGrid(std::vector<double> losses_db, std::vector<double> backgrounds,
                   Evaluator evaluator)
    : losses_(std::move(losses_db)), backgrounds_(std::move(backgrounds)),
      evaluator_(std::move(evaluator)) {
  if (losses_.empty() || backgrounds_.empty()) throw ValidationError("empty detection grid");
  log_rates_.reserve(losses_.size());
  for (double loss : losses_) {
    auto rows = evaluator_(loss, backgrounds_);
    if (rows.size() != backgrounds_.size()) throw ValidationError("grid evaluator row mismatch");
    for (auto& row : rows) {
      if (channels_ == 0) channels_ = row.size();
      if (row.size() != channels_) throw ValidationError("grid evaluator channel mismatch");
      for (double& v : row) v = std::log(std::max(v, std::numeric_limits<double>::min()));
    }
    log_rates_.push_back(std::move(rows));
  }
}

std::vector<double> RateGrid::exact(double loss_db, double background) const {
  return evaluator_(loss_db, {background}).front();
}

namespace {

struct Bracket {
  std::size_t lo;
  std::size_t hi;
  double t;
};

Bracket bracket(const std::vector<double>& xs, double x) {
  if (xs.size() == 1 || x <= xs.front()) return {0, 0, 0.0};
  if (x >= xs.back()) return {xs.size() - 1, xs.size() - 1, 0.0};
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  const auto hi = static_cast<std::size_t>(it - xs.begin());
  return {hi - 1, hi, (x - xs[hi - 1]) / (xs[hi] - xs[hi - 1])};
}

}  // namespace

std::vector<double> RateGrid::at(double loss_db, double background) const {
  const auto l = bracket(losses_, loss_db);
  const auto b = bracket(backgrounds_, background);
  std::vector<double> out(channels_);
  for (std::size_t c = 0; c < channels_; ++c) {
    auto along_background = [&](std::size_t li) {
      const double v0 = std::exp(log_rates_[li][b.lo][c]);
      const double v1 = std::exp(log_rates_[li][b.hi][c]);
      return v0 + b.t * (v1 - v0);
    };
    const double r0 = along_background(l.lo);
    const double r1 = along_background(l.hi);
    out[c] = std::exp(std::log(r0) + l.t * (std::log(r1) - std::log(r0)));
  }
  return out;
}

namespace {

fock::DetectorModel receiver_detector(const ScenarioConfig& s) {
  auto d = s.detector;
  d.efficiency = 1.0;  // folded into the link loss
  return d;
}

fock::DetectorModel local_detector(const ScenarioConfig& s) {
  auto d = s.detector;
  d.efficiency = s.alice_efficiency;
  return d;
}

// Squeezing strength of the pair source; a CW source is treated per window.
double pair_epsilon(const ScenarioConfig& s) {
  if (s.timing == Timing::pulsed) return s.epsilon;
  return std::asinh(std::sqrt(s.source_rate * s.detector.window / 2.0));
}

std::vector<double> axis(double lo, double hi, double step) {
  const double a = std::floor(lo / step) * step;
  const double b = std::ceil(hi / step) * step;
  const auto n = static_cast<std::size_t>(std::llround((b - a) / step));
  std::vector<double> out;
  for (std::size_t i = 0; i <= n; ++i) out.push_back(a + step * static_cast<double>(i));
  return out;
}

}  // namespace

Simulator::Simulator(const ScenarioConfig& s, Experiment experiment, double min_loss_db,
                     double max_loss_db, double min_background, double max_background)
    : experiment_(experiment) {
  auto losses = axis(min_loss_db, max_loss_db, s.grid_loss_step_db);
  std::vector<double> backgrounds{min_background};
  if (max_background > min_background * (1.0 + 1e-9) + 1e-12) {
    backgrounds = numeric::linspace(min_background, max_background,
                                    static_cast<std::size_t>(s.grid_background_steps));
  }
  const auto bob = receiver_detector(s);
  const auto alice = local_detector(s);
  const double misalignment = fock::misalignment_for_visibility(s.visibility);
  const double rate = s.source_rate;
  RateGrid::Evaluator eval;

  if (experiment == Experiment::teleport) {
    fock::TeleportationSetup setup;
    setup.epsilon = s.teleport_epsilon;
    setup.alpha = s.teleport_alpha;
    setup.misalignment_angle = misalignment;
    setup.cutoff = s.teleport_cutoff;
    setup.alice = alice;
    setup.bob = bob;
    // Raise the cutoff until the visibility is stable at a representative operating point.
    const double mid = 0.5 * (losses.front() + losses.back());
    setup.cutoff = fock::simulate_teleportation_converged(setup, mid, backgrounds.back(), rate,
                                                         1e-3, 7)
                       .cutoff - 1;
    auto model = std::make_shared<fock::TeleportationModel>(setup);
    eval = [model, rate](double loss, const std::vector<double>& bgs) {
      std::vector<std::vector<double>> rows;
      for (const auto& st : model->evaluate_backgrounds(loss, bgs, rate)) {
        rows.push_back({st.p_sifted * st.windows_per_second, st.p_error * st.windows_per_second});
      }
      return rows;
    };
  } else if (s.source == link::SourceKind::entangled || experiment == Experiment::bell) {
    const double eps = pair_epsilon(s);
    const bool bell = experiment == Experiment::bell;
    const auto pair = fock::make_entangled_pair(eps, misalignment, s.fock_cutoff);
    const std::array<double, 2> bb84{0.0, constants::pi / 4.0};
    auto analyzer = std::make_shared<fock::PairAnalyzer>(
        pair, bell ? protocols::chsh_alice_angles : bb84,
        bell ? protocols::chsh_bob_angles : bb84, fock::mean_pairs_per_pulse(eps));
    eval = [analyzer, alice, bob, rate, bell](double loss, const std::vector<double>& bgs) {
      std::vector<std::vector<double>> rows;
      const double t = std::pow(10.0, -loss / 10.0);
      for (double bg : bgs) {
        const auto st = analyzer->measure(alice, bob, t, bg, rate);
        const double w = st.windows_per_second;
        if (bell) {
          std::vector<double> row;
          const auto p = fock::chsh_probabilities(st);
          for (const auto& a : p)
            for (const auto& b : a)
              for (double v : b) row.push_back(v * w);
          rows.push_back(std::move(row));
        } else {
          rows.push_back({st.p_coinc * w, st.p_sifted * w, st.p_error * w});
        }
      }
      return rows;
    };
  } else {
    auto signal = std::make_shared<fock::WcpAnalyzer>(s.intensities.mu, misalignment, s.fock_cutoff);
    auto decoy = std::make_shared<fock::WcpAnalyzer>(s.intensities.nu, misalignment, s.fock_cutoff);
    eval = [signal, decoy, bob, rate](double loss, const std::vector<double>& bgs) {
      std::vector<std::vector<double>> rows;
      const double t = std::pow(10.0, -loss / 10.0);
      for (double bg : bgs) {
        const auto a = signal->measure(bob, t, bg, rate);
        const auto b = decoy->measure(bob, t, bg, rate);
        const double wa = a.windows_per_second;
        const double wb = b.windows_per_second;
        rows.push_back({a.p_coinc * wa, a.p_sifted * wa, a.p_error * wa, b.p_coinc * wb,
                        b.p_sifted * wb, b.p_error * wb});
      }
      return rows;
    };
  }
  grid_ = std::make_unique<RateGrid>(std::move(losses), std::move(backgrounds), std::move(eval));
}

Scenario::Scenario(ScenarioConfig config, DataBundle data)
    : config_(std::move(config)), data_(std::move(data)) {
  config_.validate();
}

const LinkTable& Scenario::link_table() const {
  if (!table_) table_ = std::make_unique<LinkTable>(build_link_table(config_, data_));
  return *table_;
}

const std::vector<orbit::PassProfile>& Scenario::passes() const {
  if (!passes_) {
    auto list = config_.ephemeris_path.empty()
                    ? orbit::propagate_passes(config_.orbit, config_.site, config_.passes)
                    : orbit::import_ephemeris(config_.ephemeris_path, config_.site,
                                              config_.passes.usable_elevation_deg);
    passes_ = std::make_unique<std::vector<orbit::PassProfile>>(std::move(list));
  }
  return *passes_;
}

const Simulator& Scenario::simulator(Experiment experiment) const {
  auto& slot = simulators_[static_cast<std::size_t>(experiment)];
  if (!slot) {
    const auto& t = link_table();
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    // Cover the table plus the distance correction of any pass sample.
    for (const auto& p : passes()) {
      for (std::size_t i = 0; i < p.samples.size(); ++i) {
        if (!p.usable[i]) continue;
        const double l = t.loss_at(p.samples[i].elevation, p.samples[i].distance);
        lo = std::min(lo, l);
        hi = std::max(hi, l);
      }
    }
    for (double l : t.loss_db) {
      lo = std::min(lo, l);
      hi = std::max(hi, l);
    }
    const auto [bmin, bmax] = std::minmax_element(t.background.begin(), t.background.end());
    slot = std::make_unique<Simulator>(config_, experiment, lo, hi, *bmin, *bmax);
  }
  return *slot;
}

PassSeries Scenario::series(const orbit::PassProfile& pass) const {
  const auto& t = link_table();
  const auto& sim = simulator(Experiment::qkd);
  PassSeries out;
  for (std::size_t i = 0; i < pass.samples.size(); ++i) {
    const auto& smp = pass.samples[i];
    if (!pass.usable[i]) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      out.loss_db.push_back(nan);
      out.background.push_back(nan);
      out.qber.push_back(nan);
      continue;
    }
    const double loss = t.loss_at(smp.elevation, smp.distance);
    const double bg = t.background_at(smp.elevation);
    const auto r = sim.rates(loss, bg);
    out.loss_db.push_back(loss);
    out.background.push_back(bg);
    out.qber.push_back(r[1] > 0.0 ? r[2] / r[1] : std::numeric_limits<double>::quiet_NaN());
  }
  return out;
}

protocols::KeyResult Scenario::key_from_totals(const std::vector<double>& t,
                                               double usable_seconds) const {
  const auto& s = config_;
  if (s.source == link::SourceKind::entangled) {
    const double qber = t[1] > 0.0 ? std::min(0.5, t[2] / t[1]) : 0.5;
    return protocols::bbm92_key_length(t[0], qber, s.security);
  }
  protocols::DecoyCounts counts;
  counts.n_mu = s.signal_fraction * t[0];
  counts.n_nu = (1.0 - s.signal_fraction) * t[3];
  counts.e_mu = t[1] > 0.0 ? std::min(0.5, t[2] / t[1]) : 0.5;
  counts.e_nu = t[4] > 0.0 ? std::min(0.5, t[5] / t[4]) : 0.5;
  const double pulses = s.source_rate * usable_seconds;
  if (!(pulses > 0.0)) {
    protocols::KeyResult none;
    none.verdict = "no usable samples";
    return none;
  }
  return protocols::decoy_bb84_key_length(counts, s.intensities, pulses, s.signal_fraction,
                                          s.security);
}

void Scenario::finish(PassResult& r, Experiment experiment) const {
  const bool any = r.usable_seconds > 0.0;
  switch (experiment) {
    case Experiment::qkd:
      if (any) {
        r.key = key_from_totals(r.totals, r.usable_seconds);
      } else {
        r.key.verdict = "no usable samples";
      }
      r.success = r.key.secure_bits > 0.0;
      break;
    case Experiment::bell: {
      if (!any) break;
      protocols::ChshCounts counts{};
      for (std::size_t i = 0; i < 16; ++i) counts[i / 8][(i / 4) % 2][i % 4] = r.totals[i];
      try {
        r.chsh = protocols::chsh_verdict(counts);
      } catch (const ValidationError&) {
        r.chsh = {};
      }
      r.success = r.chsh.pass;
      break;
    }
    case Experiment::teleport:
      if (!any) break;
      r.teleport = protocols::teleportation_from_counts(r.totals[0] - r.totals[1], r.totals[1]);
      r.success = r.teleport.pass;
      break;
  }
}

PassResult Scenario::evaluate_pass(const orbit::PassProfile& pass, Experiment experiment) const {
  const auto& t = link_table();
  const auto& sim = simulator(experiment);
  PassResult r;
  r.start = pass.start();
  r.max_elevation_deg = pass.max_elevation() / deg;
  r.min_distance = pass.min_usable_distance();
  r.usable_seconds = pass.duration_usable;
  r.totals.assign(sim.grid().channels(), 0.0);
  std::size_t usable = 0;
  for (bool u : pass.usable) usable += u ? 1 : 0;
  if (usable > 0) {
    const double dt = pass.duration_usable / static_cast<double>(usable);
    std::vector<numeric::CompensatedSum<double>> sums(r.totals.size());
    for (std::size_t i = 0; i < pass.samples.size(); ++i) {
      if (!pass.usable[i]) continue;
      const auto& smp = pass.samples[i];
      const auto rates =
          sim.rates(t.loss_at(smp.elevation, smp.distance), t.background_at(smp.elevation));
      for (std::size_t c = 0; c < rates.size(); ++c) sums[c].add(rates[c] * dt);
    }
    for (std::size_t c = 0; c < sums.size(); ++c) r.totals[c] = sums[c].value();
  }
  finish(r, experiment);
  return r;
}

std::vector<PassResult> Scenario::evaluate_all(Experiment experiment) const {
  std::vector<PassResult> out;
  out.reserve(passes().size());
  for (const auto& p : passes()) out.push_back(evaluate_pass(p, experiment));
  return out;
}

SpotCheck Scenario::spot_check(const std::vector<const orbit::PassProfile*>& list,
                               Experiment experiment) const {
  const auto& t = link_table();
  const auto& grid = simulator(experiment).grid();
  SpotCheck out;
  std::size_t seen = 0;
  for (const auto* pass : list) {
    for (std::size_t i = 0; i < pass->samples.size(); ++i) {
      if (!pass->usable[i]) continue;
      if (seen++ % 100 != 0) continue;
      const auto& smp = pass->samples[i];
      const double loss = t.loss_at(smp.elevation, smp.distance);
      const double bg = t.background_at(smp.elevation);
      const auto approx = grid.at(loss, bg);
      const auto exact = grid.exact(loss, bg);
      const double scale = *std::max_element(exact.begin(), exact.end());
      for (std::size_t c = 0; c < exact.size(); ++c) {
        // Channels many orders below the leading one carry no weight in any result.
        if (exact[c] < 1e-6 * scale) continue;
        out.max_relative_deviation =
            std::max(out.max_relative_deviation, std::abs(approx[c] - exact[c]) / exact[c]);
      }
      ++out.samples;
    }
  }
  if (out.max_relative_deviation > 0.01) {
    throw ConvergenceError("detection grid deviates from exact evaluation by " +
                           fmt(100.0 * out.max_relative_deviation) + "%");
  }
  return out;
}

MonthlySummary monthly_key(const std::vector<PassResult>& results, double cloud_fraction) {
  if (!(cloud_fraction >= 0.0 && cloud_fraction <= 1.0)) {
    throw ValidationError("cloud_fraction must lie in [0, 1]");
  }
  MonthlySummary out;
  std::map<std::pair<int, int>, MonthRow> rows;
  for (const auto& r : results) {
    const int y = orbit::utc_year(r.start);
    const int m = orbit::utc_month(r.start);
    auto& row = rows[{y, m}];
    row.year = y;
    row.month = m;
    ++row.passes;
    if (r.success) ++row.successful;
    row.secure_bits += r.key.secure_bits;
  }
  if (rows.empty()) return out;
  // Months without passes still count toward the mean.
  auto [y, m] = rows.begin()->first;
  const auto last = rows.rbegin()->first;
  while (std::make_pair(y, m) <= last) {
    auto& row = rows[{y, m}];
    row.year = y;
    row.month = m;
    if (++m > 12) {
      m = 1;
      ++y;
    }
  }
  double total = 0.0;
  for (auto& [key, row] : rows) {
    row.derated_bits = row.secure_bits * (1.0 - cloud_fraction);
    total += row.derated_bits;
    out.months.push_back(row);
  }
  out.mean_monthly_bits = total / static_cast<double>(out.months.size());
  return out;
}

protocols::KeyResult pooled_key(const Scenario& scenario, const std::vector<PassResult>& results) {
  if (results.empty()) return {};
  std::vector<double> totals(results.front().totals.size(), 0.0);
  double seconds = 0.0;
  for (const auto& r : results) {
    for (std::size_t c = 0; c < totals.size(); ++c) totals[c] += r.totals[c];
    seconds += r.usable_seconds;
  }
  return scenario.key_from_totals(totals, seconds);
}

double max_success_distance(const std::vector<PassResult>& results) {
  double best = 0.0;
  for (const auto& r : results) {
    if (r.success && std::isfinite(r.min_distance)) best = std::max(best, r.min_distance);
  }
  return best;
}

namespace {

// Bell tests and teleportation always run from the pair source.
config::Config entangled_variant(config::Config c) {
  if (!c.has("source.kind")) c.set("source.kind", "entangled");
  return c;
}

}  // namespace

std::vector<SweepRow> sweep(const config::Config& base, const std::string& data_dir,
                            const SweepSpec& spec) {
  if (spec.values.empty()) throw ValidationError("sweep needs at least one value");
  if (spec.metrics.empty()) throw ValidationError("sweep needs at least one metric");
  const auto& keys = known_keys();
  if (std::find(keys.begin(), keys.end(), spec.axis) == keys.end()) {
    throw ValidationError("cannot sweep unknown key '" + spec.axis + "'");
  }
  for (const auto& m : spec.metrics) {
    if (std::find(sweep_metrics.begin(), sweep_metrics.end(), m) == sweep_metrics.end()) {
      throw ValidationError("unknown sweep metric '" + m + "'");
    }
  }
  const auto data = DataBundle::load(data_dir);
  std::vector<SweepRow> rows;
  for (const auto& value : spec.values) {
    auto c = base;
    c.set(spec.axis, value);
    Scenario main(resolve(c, data_dir), data);
    std::unique_ptr<Scenario> pair;
    auto pair_scenario = [&]() -> const Scenario& {
      if (!pair) pair = std::make_unique<Scenario>(resolve(entangled_variant(c), data_dir), data);
      return *pair;
    };
    SweepRow row;
    row.value = value;
    for (const auto& m : spec.metrics) {
      const auto& s = main.config();
      double v = 0.0;
      if (m == "loss_db") {
        v = link::effective_loss_db(reference_loss(s, data), s.source);
      } else if (m == "obstruction_penalty_db") {
        const double el = s.reference_elevation_deg * deg;
        link::LinkGeometry g;
        g.distance = slant_range(s.orbit.altitude, el);
        g.elevation = el;
        g.receiver_altitude = s.orbit.altitude;
        g.direction = s.direction;
        v = link::obstruction_penalty(s.tx, s.rx, g, s.wavelength_nm, s.source, s.pointing_sigma,
                                      s.loss);
      } else if (m == "upper_quartile_key_bits") {
        const auto& passes = main.passes();
        const auto cls = orbit::classify_passes(passes);
        v = main.evaluate_pass(passes[cls.upper_quartile], Experiment::qkd).key.secure_bits;
      } else if (m == "monthly_key_mbit") {
        v = monthly_key(main.evaluate_all(Experiment::qkd), s.cloud_fraction).mean_monthly_bits /
            1e6;
      } else if (m == "bell_max_distance_km") {
        v = max_success_distance(pair_scenario().evaluate_all(Experiment::bell)) / 1e3;
      } else if (m == "teleport_max_distance_km") {
        v = max_success_distance(pair_scenario().evaluate_all(Experiment::teleport)) / 1e3;
      }
      row.metrics[m] = v;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace qsat::pipeline
