#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qsat/background.hpp"
#include "qsat/config.hpp"
#include "qsat/constants.hpp"
#include "qsat/errors.hpp"
#include "qsat/pipeline.hpp"
#include "qsat/protocols.hpp"

namespace {

using nlohmann::ordered_json;
using namespace qsat;
using pipeline::Experiment;

constexpr int exit_validation = 2;
constexpr int exit_data = 3;
constexpr int exit_convergence = 4;

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string data_dir = QSAT_DATA_DIR;
  std::string out;
  bool spotcheck = false;
  std::string pass_class;  // best | upper_quartile | median, empty for all
  std::string profile_path;
  std::string ephemeris_out;
  std::string axis;
  std::string values;
  std::string metrics;
  std::string input;
  double scale = 1.0;
  std::string provenance = "converted raster";
};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

config::Config load_config(const Options& o, const std::string& implied_source = {}) {
  config::Config c;
  if (!o.config_path.empty()) c = config::Config::load(o.config_path);
  for (const auto& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ValidationError("--set expects key=value, got '" + kv + "'");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    c.set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
  if (!implied_source.empty() && !c.has("source.kind")) c.set("source.kind", implied_source);
  return c;
}

// Writes the CSV to --out (plus the JSON sidecar) or to stdout.
void emit(const Options& o, const std::string& command, const std::string& csv,
          const ordered_json& config, const ordered_json& summary) {
  if (o.out.empty()) {
    std::cout << csv;
    std::cerr << summary.dump(2) << "\n";
    return;
  }
  std::ofstream f(o.out);
  if (!f) throw DataError("cannot write " + o.out);
  f << csv;
  ordered_json side;
  side["command"] = command;
  side["data_dir"] = o.data_dir;
  side["config"] = config;
  side["xi_formula"] = protocols::xi_formula;
  side["summary"] = summary;
  std::ofstream j(o.out + ".json");
  if (!j) throw DataError("cannot write " + o.out + ".json");
  j << side.dump(2) << "\n";
}

ordered_json config_json(const pipeline::ScenarioConfig& s) {
  ordered_json j;
  for (const auto& [k, v] : pipeline::describe(s)) j[k] = v;
  return j;
}

struct Loaded {
  pipeline::ScenarioConfig config;
  std::unique_ptr<pipeline::Scenario> scenario;
};

Loaded load(const Options& o, const std::string& implied_source = {}) {
  Loaded l;
  l.config = pipeline::resolve(load_config(o, implied_source), o.data_dir);
  l.scenario =
      std::make_unique<pipeline::Scenario>(l.config, pipeline::DataBundle::load(o.data_dir));
  return l;
}

const char* class_name(std::size_t i, const orbit::PassClasses& c) {
  if (i == c.best) return "best";
  if (i == c.upper_quartile) return "upper_quartile";
  if (i == c.median) return "median";
  return "";
}

std::vector<std::size_t> selected_passes(const Options& o,
                                         const std::vector<orbit::PassProfile>& passes) {
  std::vector<std::size_t> out;
  if (o.pass_class.empty()) {
    for (std::size_t i = 0; i < passes.size(); ++i) out.push_back(i);
    return out;
  }
  const auto c = orbit::classify_passes(passes);
  if (o.pass_class == "best") return {c.best};
  if (o.pass_class == "upper_quartile") return {c.upper_quartile};
  if (o.pass_class == "median") return {c.median};
  throw ValidationError("--pass must be best, upper_quartile or median");
}

void add_spotcheck(const Options& o, const pipeline::Scenario& sc, Experiment e,
                   const std::vector<std::size_t>& idx, ordered_json& summary) {
  if (!o.spotcheck) return;
  std::vector<const orbit::PassProfile*> list;
  for (auto i : idx) list.push_back(&sc.passes()[i]);
  const auto check = sc.spot_check(list, e);
  summary["spotcheck_samples"] = check.samples;
  summary["spotcheck_max_relative_deviation"] = check.max_relative_deviation;
}

int cmd_link_loss(const Options& o) {
  auto l = load(o);
  const auto& t = l.scenario->link_table();
  std::ostringstream csv;
  csv << "elevation_deg,distance_km,geometric_db,clipping_db,atmosphere,detector,total_db,"
         "effective_db,background_per_detector_cps\n";
  for (std::size_t i = 0; i < t.elevations_deg.size(); ++i) {
    const auto& b = t.breakdown[i];
    csv << num(t.elevations_deg[i]) << ',' << num(t.distances[i] / 1e3) << ','
        << num(b.geometric_db) << ',' << num(b.clipping_db) << ',' << num(b.atmosphere) << ','
        << num(b.detector) << ',' << num(b.total_db) << ',' << num(t.loss_db[i]) << ','
        << num(t.background[i]) << '\n';
  }
  const auto ref = pipeline::reference_loss(l.config, l.scenario->data());
  ordered_json summary;
  summary["reference_elevation_deg"] = l.config.reference_elevation_deg;
  summary["reference_total_db"] = ref.total_db;
  summary["reference_effective_db"] = link::effective_loss_db(ref, l.config.source);
  summary["pointing_sigma_m"] = ref.pointing_sigma_m;
  summary["turbulence_sigma_m"] = ref.turbulence_sigma_m;
  if (!o.profile_path.empty()) {
    const double el = l.config.reference_elevation_deg * constants::deg;
    link::LinkGeometry g;
    g.distance = pipeline::slant_range(l.config.orbit.altitude, el);
    g.elevation = el;
    g.receiver_altitude = l.config.orbit.altitude;
    g.direction = l.config.direction;
    auto profile = link::diffract(l.config.tx, g, l.config.wavelength_nm, l.config.loss.diffraction);
    const double sigma = std::hypot(ref.pointing_sigma_m, ref.turbulence_sigma_m);
    if (sigma > 0.0) profile = link::convolve_gaussian(profile, sigma);
    profile.write_csv(o.profile_path);
    summary["profile"] = o.profile_path;
  }
  emit(o, "link-loss", csv.str(), config_json(l.config), summary);
  return 0;
}

int cmd_background(const Options& o) {
  auto l = load(o);
  const auto& t = l.scenario->link_table();
  std::ostringstream csv;
  csv << "elevation_deg,natural_aperture_cps,artificial_aperture_cps,detected_total_cps,"
         "detected_per_detector_cps\n";
  for (std::size_t i = 0; i < t.elevations_deg.size(); ++i) {
    const auto& b = t.aperture_background[i];
    csv << num(t.elevations_deg[i]) << ',' << num(b.natural) << ',' << num(b.artificial) << ','
        << num(t.background[i] * l.config.detector.n_detectors) << ',' << num(t.background[i])
        << '\n';
  }
  ordered_json summary;
  summary["light_pollution_provenance"] = l.scenario->data().pollution.provenance();
  emit(o, "background", csv.str(), config_json(l.config), summary);
  return 0;
}

int cmd_passes(const Options& o) {
  auto l = load(o);
  const auto& passes = l.scenario->passes();
  ordered_json summary;
  summary["passes"] = passes.size();
  summary["passes_per_night"] =
      static_cast<double>(passes.size()) / std::max(1.0, l.config.passes.days);
  if (!o.ephemeris_out.empty()) orbit::export_ephemeris(o.ephemeris_out, passes);
  std::ostringstream csv;
  if (passes.empty()) {
    csv << "index,start_utc,usable_s,max_elevation_deg,min_distance_km,class\n";
    emit(o, "passes", csv.str(), config_json(l.config), summary);
    return 0;
  }
  const auto cls = orbit::classify_passes(passes);
  summary["best_usable_s"] = passes[cls.best].duration_usable;
  summary["upper_quartile_usable_s"] = passes[cls.upper_quartile].duration_usable;
  summary["median_usable_s"] = passes[cls.median].duration_usable;
  if (o.pass_class.empty()) {
    csv << "index,start_utc,usable_s,max_elevation_deg,min_distance_km,class\n";
    for (std::size_t i = 0; i < passes.size(); ++i) {
      const auto& p = passes[i];
      csv << i << ',' << orbit::format_utc(p.start()) << ',' << num(p.duration_usable) << ','
          << num(p.max_elevation() / constants::deg) << ','
          << num(p.min_usable_distance() / 1e3) << ',' << class_name(i, cls) << '\n';
    }
  } else {
    const auto& p = passes[selected_passes(o, passes).front()];
    const auto series = l.scenario->series(p);
    csv << "utc,elevation_deg,distance_km,usable,loss_db,background_per_detector_cps,qber\n";
    for (std::size_t i = 0; i < p.samples.size(); ++i) {
      const auto& s = p.samples[i];
      csv << orbit::format_utc(s.t) << ',' << num(s.elevation / constants::deg) << ','
          << num(s.distance / 1e3) << ',' << (p.usable[i] ? 1 : 0) << ','
          << num(series.loss_db[i]) << ',' << num(series.background[i]) << ','
          << num(series.qber[i]) << '\n';
    }
  }
  emit(o, "passes", csv.str(), config_json(l.config), summary);
  return 0;
}

int cmd_qkd(const Options& o) {
  auto l = load(o);
  const auto& sc = *l.scenario;
  const auto idx = selected_passes(o, sc.passes());
  std::vector<pipeline::PassResult> results;
  std::ostringstream csv;
  csv << "index,start_utc,usable_s,max_elevation_deg,raw_bits,qber,secure_bits,q1,e1,verdict\n";
  double total = 0.0;
  for (auto i : idx) {
    auto r = sc.evaluate_pass(sc.passes()[i], Experiment::qkd);
    csv << i << ',' << orbit::format_utc(r.start) << ',' << num(r.usable_seconds) << ','
        << num(r.max_elevation_deg) << ',' << num(r.key.raw_bits) << ',' << num(r.key.mean_qber)
        << ',' << num(r.key.secure_bits) << ',' << num(r.key.q1) << ',' << num(r.key.e1) << ','
        << quoted(r.key.verdict) << '\n';
    total += r.key.secure_bits;
    results.push_back(std::move(r));
  }
  ordered_json summary;
  summary["passes"] = idx.size();
  summary["secure_bits_total"] = total;
  if (l.config.pool_passes) summary["pooled_secure_bits"] = pipeline::pooled_key(sc, results).secure_bits;
  add_spotcheck(o, sc, Experiment::qkd, idx, summary);
  emit(o, "qkd", csv.str(), config_json(l.config), summary);
  return 0;
}

int cmd_bell(const Options& o) {
  auto l = load(o, "entangled");
  const auto& sc = *l.scenario;
  const auto idx = selected_passes(o, sc.passes());
  std::vector<pipeline::PassResult> results;
  std::ostringstream csv;
  csv << "index,start_utc,usable_s,max_elevation_deg,min_distance_km,S,sigma,pass\n";
  for (auto i : idx) {
    auto r = sc.evaluate_pass(sc.passes()[i], Experiment::bell);
    csv << i << ',' << orbit::format_utc(r.start) << ',' << num(r.usable_seconds) << ','
        << num(r.max_elevation_deg) << ',' << num(r.min_distance / 1e3) << ',' << num(r.chsh.s)
        << ',' << num(r.chsh.sigma) << ',' << (r.chsh.pass ? 1 : 0) << '\n';
    results.push_back(std::move(r));
  }
  ordered_json summary;
  summary["passes"] = idx.size();
  summary["max_distance_km"] = pipeline::max_success_distance(results) / 1e3;
  add_spotcheck(o, sc, Experiment::bell, idx, summary);
  emit(o, "bell", csv.str(), config_json(l.config), summary);
  return 0;
}

int cmd_teleport(const Options& o) {
  auto l = load(o, "entangled");
  const auto& sc = *l.scenario;
  const auto idx = selected_passes(o, sc.passes());
  std::vector<pipeline::PassResult> results;
  std::ostringstream csv;
  csv << "index,start_utc,usable_s,max_elevation_deg,min_distance_km,visibility,sigma,pass\n";
  for (auto i : idx) {
    auto r = sc.evaluate_pass(sc.passes()[i], Experiment::teleport);
    csv << i << ',' << orbit::format_utc(r.start) << ',' << num(r.usable_seconds) << ','
        << num(r.max_elevation_deg) << ',' << num(r.min_distance / 1e3) << ','
        << num(r.teleport.visibility) << ',' << num(r.teleport.sigma) << ','
        << (r.teleport.pass ? 1 : 0) << '\n';
    results.push_back(std::move(r));
  }
  ordered_json summary;
  summary["passes"] = idx.size();
  summary["max_distance_km"] = pipeline::max_success_distance(results) / 1e3;
  summary["cloning_limit"] = protocols::cloning_limit;
  add_spotcheck(o, sc, Experiment::teleport, idx, summary);
  emit(o, "teleport", csv.str(), config_json(l.config), summary);
  return 0;
}

int cmd_monthly(const Options& o) {
  auto l = load(o);
  const auto& sc = *l.scenario;
  const auto results = sc.evaluate_all(Experiment::qkd);
  const auto m = pipeline::monthly_key(results, l.config.cloud_fraction);
  std::ostringstream csv;
  csv << "year,month,passes,successful_passes,secure_bits,derated_bits\n";
  for (const auto& row : m.months) {
    csv << row.year << ',' << row.month << ',' << row.passes << ',' << row.successful << ','
        << num(row.secure_bits) << ',' << num(row.derated_bits) << '\n';
  }
  ordered_json summary;
  summary["passes"] = results.size();
  summary["mean_monthly_bits"] = m.mean_monthly_bits;
  summary["mean_monthly_mbit"] = m.mean_monthly_bits / 1e6;
  if (o.spotcheck) {
    std::vector<std::size_t> all;
    for (std::size_t i = 0; i < sc.passes().size(); ++i) all.push_back(i);
    add_spotcheck(o, sc, Experiment::qkd, all, summary);
  }
  emit(o, "monthly", csv.str(), config_json(l.config), summary);
  return 0;
}

int cmd_sweep(const Options& o) {
  if (o.axis.empty() || o.values.empty()) throw ValidationError("sweep needs --axis and --values");
  const auto base = load_config(o);
  pipeline::SweepSpec spec{o.axis, split(o.values, ','),
                           o.metrics.empty() ? std::vector<std::string>{"loss_db"}
                                             : split(o.metrics, ',')};
  const auto rows = pipeline::sweep(base, o.data_dir, spec);
  std::ostringstream csv;
  csv << spec.axis;
  for (const auto& m : spec.metrics) csv << ',' << m;
  csv << '\n';
  for (const auto& r : rows) {
    csv << r.value;
    for (const auto& m : spec.metrics) csv << ',' << num(r.metrics.at(m));
    csv << '\n';
  }
  ordered_json summary;
  summary["axis"] = spec.axis;
  summary["values"] = spec.values;
  summary["metrics"] = spec.metrics;
  emit(o, "sweep", csv.str(), config_json(pipeline::resolve(base, o.data_dir)), summary);
  return 0;
}

int cmd_grid_convert(const Options& o) {
  if (o.input.empty() || o.out.empty()) throw ValidationError("grid-convert needs --input and --out");
  const auto grid = background::convert_esri_ascii(o.input, o.scale, o.provenance);
  background::save_light_pollution(o.out, grid);
  std::cerr << "wrote " << grid.latitudes().size() << " x " << grid.longitudes().size()
            << " grid to " << o.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ground-satellite quantum link simulator"};
  app.require_subcommand(1);
  Options o;

  auto common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "Scenario file (key = value lines)");
    sub->add_option("--set", o.overrides, "Override a key, key=value (repeatable)");
    sub->add_option("--data-dir", o.data_dir, "Directory with tables and grids");
    sub->add_option("--out", o.out, "CSV output path (a .json record is written alongside)");
    sub->add_flag("--oracle-spotcheck", o.spotcheck,
                  "Recompute 1% of samples exactly and fail above 1% deviation");
  };
  auto with_pass = [&o](CLI::App* sub) {
    sub->add_option("--pass", o.pass_class, "Only the best, upper_quartile or median pass");
  };

  auto* link_loss = app.add_subcommand("link-loss", "Loss versus elevation");
  common(link_loss);
  link_loss->add_option("--profile", o.profile_path,
                        "Write the received radial profile at the reference elevation");
  auto* bg = app.add_subcommand("background", "Background counts versus elevation");
  common(bg);
  auto* passes = app.add_subcommand("passes", "Nighttime passes, or one pass in detail");
  common(passes);
  with_pass(passes);
  passes->add_option("--export-ephemeris", o.ephemeris_out, "Write the passes as ephemeris CSV");
  auto* qkd = app.add_subcommand("qkd", "Secure key per pass");
  common(qkd);
  with_pass(qkd);
  auto* bell = app.add_subcommand("bell", "CHSH test per pass");
  common(bell);
  with_pass(bell);
  auto* tele = app.add_subcommand("teleport", "Teleportation test per pass");
  common(tele);
  with_pass(tele);
  auto* sweep = app.add_subcommand("sweep", "Metrics over values of one key");
  common(sweep);
  sweep->add_option("--axis", o.axis, "Configuration key to vary")->required();
  sweep->add_option("--values", o.values, "Comma-separated values")->required();
  sweep->add_option("--metrics", o.metrics, "Comma-separated metrics (default loss_db)");
  auto* monthly = app.add_subcommand("monthly", "Secure key per month");
  common(monthly);
  auto* convert = app.add_subcommand("grid-convert", "ESRI ASCII raster to light-pollution grid");
  convert->add_option("--input", o.input, "Raster file")->required();
  convert->add_option("--out", o.out, "Grid CSV output")->required();
  convert->add_option("--scale", o.scale, "Factor to W m^-2 sr^-1 nm^-1");
  convert->add_option("--provenance", o.provenance, "Provenance note");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_validation;
  }

  try {
    if (*link_loss) return cmd_link_loss(o);
    if (*bg) return cmd_background(o);
    if (*passes) return cmd_passes(o);
    if (*qkd) return cmd_qkd(o);
    if (*bell) return cmd_bell(o);
    if (*tele) return cmd_teleport(o);
    if (*sweep) return cmd_sweep(o);
    if (*monthly) return cmd_monthly(o);
    if (*convert) return cmd_grid_convert(o);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_validation;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return exit_data;
  } catch (const ConvergenceError& e) {
    std::cerr << "convergence error: " << e.what() << "\n";
    return exit_convergence;
  }
  return 1;
}
