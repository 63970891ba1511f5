#pragma once

// Scenario assembly and pass integration: loss and background along each pass,
// detection statistics from a precomputed loss x background grid, per-pass
// protocol evaluation, monthly totals and parameter sweeps.

#include <array>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "qsat/atmosphere.hpp"
#include "qsat/background.hpp"
#include "qsat/config.hpp"
#include "qsat/detection.hpp"
#include "qsat/linkbudget.hpp"
#include "qsat/orbit.hpp"
#include "qsat/protocols.hpp"

namespace qsat::pipeline {

enum class Timing { pulsed, cw };

struct ScenarioConfig {
  link::Direction direction = link::Direction::downlink;
  double wavelength_nm = 670.0;
  link::TelescopeSpec tx;
  link::TelescopeSpec rx;
  bool auto_beam = true;  // FWHM = D for WCP, D/2 for entangled sources
  double pointing_sigma = 2e-6;  // rad
  double reference_elevation_deg = 50.0;

  orbit::OrbitSpec orbit;
  orbit::Site site;
  orbit::PassOptions passes;
  std::string ephemeris_path;  // replaces the idealized orbit when set

  link::SourceKind source = link::SourceKind::wcp;
  double source_rate = 300e6;  // pulses/s (WCP) or pairs/s (entangled)
  protocols::DecoyIntensities intensities;
  double signal_fraction = 0.5;
  double epsilon = 0.22;
  double visibility = 0.98;
  Timing timing = Timing::pulsed;

  fock::DetectorModel detector;     // receiving party; efficiency is set from the curve
  double alice_efficiency = 0.25;   // local detection of the kept photon
  double detector_efficiency = 0.0; // 0 selects the bundled APD curve
  protocols::SecurityParams security;
  bool pool_passes = false;
  double cloud_fraction = 0.5;

  background::ReceiverView view;
  background::SkyBrightness sky;
  double moon_phase_fraction = 0.5;
  double moon_elevation_deg = 45.0;
  double earth_albedo = background::default_earth_albedo;

  link::LossOptions loss;

  double teleport_epsilon = 0.41;
  double teleport_alpha = 0.07;
  int teleport_cutoff = 3;
  int fock_cutoff = 6;

  double grid_loss_step_db = 0.5;
  int grid_background_steps = 10;
  double elevation_step_deg = 2.0;
  std::string data_dir;

  void validate() const;
};

/// Every key accepted in a scenario file.
const std::vector<std::string>& known_keys();

/// Applies defaults (which depend on link.direction and source.kind) and
/// validates. Unknown keys are rejected with ValidationError.
ScenarioConfig resolve(const config::Config& config, const std::string& data_dir);

/// Fully resolved key/value listing for the output record.
std::map<std::string, std::string> describe(const ScenarioConfig& scenario);

/// Bundled tables loaded from a data directory.
struct DataBundle {
  atmosphere::AtmosphereTable atmosphere;
  atmosphere::DetectorCurve thin;
  atmosphere::DetectorCurve thick;
  background::MoonAlbedo moon;
  background::LightPollutionGrid pollution;

  static DataBundle load(const std::string& data_dir);
};

/// Slant range from a site to a satellite at the given altitude and elevation.
double slant_range(double altitude, double elevation);

/// Loss and detected background tabulated against elevation.
struct LinkTable {
  std::vector<double> elevations_deg;
  std::vector<double> distances;      // m, at the table geometry
  std::vector<double> loss_db;        // effective loss for the configured source
  std::vector<link::LossBreakdown> breakdown;
  std::vector<double> background;     // detected counts/s per detector
  std::vector<background::BackgroundTerms> aperture_background;  // photons/s

  /// Loss at a sample, with the free-space correction 20 log10(d / d_table).
  double loss_at(double elevation, double distance) const;
  double background_at(double elevation) const;
};

double receiver_detector_efficiency(const ScenarioConfig& scenario, const DataBundle& data);

LinkTable build_link_table(const ScenarioConfig& scenario, const DataBundle& data);

/// Single-geometry loss at the reference elevation.
link::LossBreakdown reference_loss(const ScenarioConfig& scenario, const DataBundle& data);

enum class Experiment { qkd, bell, teleport };

/// Detection rates (per second) on a loss x background grid. Each node holds a
/// fixed set of channels; interpolation is linear in log-rate along loss and
/// linear along background.
class RateGrid {
 public:
  using Evaluator = std::function<std::vector<std::vector<double>>(
      double loss_db, const std::vector<double>& backgrounds)>;

  RateGrid(std::vector<double> losses_db, std::vector<double> backgrounds, Evaluator evaluator);

  std::vector<double> at(double loss_db, double background) const;
  std::vector<double> exact(double loss_db, double background) const;
  std::size_t channels() const { return channels_; }
  const std::vector<double>& losses() const { return losses_; }
  const std::vector<double>& backgrounds() const { return backgrounds_; }

 private:
  std::vector<double> losses_;
  std::vector<double> backgrounds_;
  Evaluator evaluator_;
  std::size_t channels_ = 0;
  std::vector<std::vector<std::vector<double>>> log_rates_;  // [loss][background][channel]
};

/// Channel layout per experiment and source:
///   entangled QKD: coincidences, sifted, errors
///   WCP QKD: signal detections, sifted, errors, then the same for decoys
///   Bell: 16 CHSH coincidence rates [a][b][bits]
///   teleportation: parallel + perpendicular, perpendicular
class Simulator {
 public:
  Simulator(const ScenarioConfig& scenario, Experiment experiment, double min_loss_db,
            double max_loss_db, double min_background, double max_background);

  Experiment experiment() const { return experiment_; }
  const RateGrid& grid() const { return *grid_; }
  std::vector<double> rates(double loss_db, double background) const {
    return grid_->at(loss_db, background);
  }

 private:
  Experiment experiment_;
  std::unique_ptr<RateGrid> grid_;
};

struct PassSeries {
  std::vector<double> loss_db;
  std::vector<double> background;
  std::vector<double> qber;  // per-sample estimate, NaN where nothing is counted
};

struct PassResult {
  double start = 0.0;
  double usable_seconds = 0.0;
  double max_elevation_deg = 0.0;
  double min_distance = 0.0;  // m, over usable samples
  std::vector<double> totals; // channel sums over the usable samples
  protocols::KeyResult key;
  protocols::ChshResult chsh;
  protocols::TeleportResult teleport;
  bool success = false;       // positive key, or a passed Bell/teleportation test
};

struct SpotCheck {
  std::size_t samples = 0;
  double max_relative_deviation = 0.0;
};

class Scenario {
 public:
  Scenario(ScenarioConfig config, DataBundle data);

  const ScenarioConfig& config() const { return config_; }
  const DataBundle& data() const { return data_; }
  const LinkTable& link_table() const;
  const std::vector<orbit::PassProfile>& passes() const;
  const Simulator& simulator(Experiment experiment) const;

  /// Loss, background and per-sample QBER along a pass (QKD channels).
  PassSeries series(const orbit::PassProfile& pass) const;

  PassResult evaluate_pass(const orbit::PassProfile& pass, Experiment experiment) const;
  std::vector<PassResult> evaluate_all(Experiment experiment) const;

  /// Compares grid interpolation with exact evaluation on every hundredth
  /// usable sample of the given passes. Throws ConvergenceError above 1%.
  SpotCheck spot_check(const std::vector<const orbit::PassProfile*>& passes,
                       Experiment experiment) const;

  /// QKD key from summed channel counts over the given usable time.
  protocols::KeyResult key_from_totals(const std::vector<double>& totals,
                                       double usable_seconds) const;

 private:
  void finish(PassResult& result, Experiment experiment) const;

  ScenarioConfig config_;
  DataBundle data_;
  mutable std::unique_ptr<LinkTable> table_;
  mutable std::unique_ptr<std::vector<orbit::PassProfile>> passes_;
  mutable std::array<std::unique_ptr<Simulator>, 3> simulators_;
};

struct MonthRow {
  int year = 0;
  int month = 0;
  std::size_t passes = 0;
  std::size_t successful = 0;
  double secure_bits = 0.0;
  double derated_bits = 0.0;
};

struct MonthlySummary {
  std::vector<MonthRow> months;
  double mean_monthly_bits = 0.0;  // derated
};

/// Per-month sums of per-pass secure bits, derated by the clear-sky fraction.
MonthlySummary monthly_key(const std::vector<PassResult>& results, double cloud_fraction);

/// Pooled key for a set of passes: all raw counts combined in one finite-size block.
protocols::KeyResult pooled_key(const Scenario& scenario, const std::vector<PassResult>& results);

/// Largest minimum distance among successful passes, m (0 if none).
double max_success_distance(const std::vector<PassResult>& results);

inline const std::vector<std::string> sweep_metrics{
    "loss_db",          "obstruction_penalty_db", "upper_quartile_key_bits",
    "monthly_key_mbit", "bell_max_distance_km",   "teleport_max_distance_km"};

struct SweepSpec {
  std::string axis;
  std::vector<std::string> values;
  std::vector<std::string> metrics;
};

struct SweepRow {
  std::string value;
  std::map<std::string, double> metrics;
};

/// One row per axis value; each row re-resolves the configuration with the
/// axis key overridden.
std::vector<SweepRow> sweep(const config::Config& base, const std::string& data_dir,
                            const SweepSpec& spec);

}  // namespace qsat::pipeline
