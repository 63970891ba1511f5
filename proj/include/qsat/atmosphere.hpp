#pragma once

// Atmospheric transmittance tables and detector efficiency curves.

#include <string>
#include <vector>

namespace qsat::atmosphere {

class AtmosphereTable {
 public:
  /// values[i][j]: transmittance at wavelengths_nm[i], elevations_deg[j].
  AtmosphereTable(std::vector<double> wavelengths_nm, std::vector<double> elevations_deg,
                  std::vector<std::vector<double>> values, std::string provenance = {});

  /// Bilinear interpolation. Throws DataError outside the grid.
  double transmittance(double wavelength_nm, double elevation_rad) const;

  const std::vector<double>& wavelengths_nm() const { return wavelengths_; }
  const std::vector<double>& elevations_deg() const { return elevations_; }
  const std::vector<std::vector<double>>& values() const { return values_; }
  const std::string& provenance() const { return provenance_; }

 private:
  std::vector<double> wavelengths_;
  std::vector<double> elevations_;
  std::vector<std::vector<double>> values_;
  std::string provenance_;
};

/// Slack allowed when checking that transmittance does not grow toward the horizon.
inline constexpr double monotonicity_slack = 1e-3;

AtmosphereTable load_table(const std::string& path);

enum class DetectorKind { thin_apd, thick_apd };

class DetectorCurve {
 public:
  DetectorCurve(std::vector<double> wavelengths_nm, std::vector<double> efficiency,
                DetectorKind kind);

  /// Linear interpolation; throws DataError outside the tabulated range.
  double efficiency(double wavelength_nm) const;
  DetectorKind kind() const { return kind_; }

 private:
  std::vector<double> wavelengths_;
  std::vector<double> efficiency_;
  DetectorKind kind_;
};

DetectorCurve load_detector_curve(const std::string& path, DetectorKind kind);

/// Thin APDs serve wavelengths below 532 nm, thick APDs 532 nm and above.
inline constexpr double thick_apd_from_nm = 532.0;

double detector_efficiency(const DetectorCurve& thin, const DetectorCurve& thick,
                           double wavelength_nm);

/// Bundled files inside a data directory.
std::string atmosphere_path(const std::string& data_dir);
std::string thin_apd_path(const std::string& data_dir);
std::string thick_apd_path(const std::string& data_dir);

}  // namespace qsat::atmosphere
