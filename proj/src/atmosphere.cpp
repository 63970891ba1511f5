#include "qsat/atmosphere.hpp"

#include <algorithm>
#include <sstream>

#include "qsat/constants.hpp"
#include "qsat/errors.hpp"
#include "qsat/gridfile.hpp"
#include "qsat/numeric.hpp"

namespace qsat::atmosphere {

namespace {

// Index of the cell containing x; the last cell for x on the upper edge.
std::size_t cell(const std::vector<double>& axis, double x) {
  const auto it = std::upper_bound(axis.begin(), axis.end(), x);
  std::size_t hi = static_cast<std::size_t>(it - axis.begin());
  if (hi >= axis.size()) hi = axis.size() - 1;
  return hi == 0 ? 0 : hi - 1;
}

std::string number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

AtmosphereTable::AtmosphereTable(std::vector<double> wavelengths_nm,
                                 std::vector<double> elevations_deg,
                                 std::vector<std::vector<double>> values, std::string provenance)
    : wavelengths_(std::move(wavelengths_nm)),
      elevations_(std::move(elevations_deg)),
      values_(std::move(values)),
      provenance_(std::move(provenance)) {
  if (wavelengths_.empty() || elevations_.empty()) throw DataError("atmosphere table is empty");
  if (values_.size() != wavelengths_.size()) throw DataError("atmosphere table row count mismatch");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (values_[i].size() != elevations_.size()) {
      throw DataError("atmosphere table column count mismatch");
    }
    for (std::size_t j = 0; j < values_[i].size(); ++j) {
      const double v = values_[i][j];
      if (!(v >= 0.0 && v <= 1.0)) {
        throw DataError("transmittance " + number(v) + " outside [0, 1] at " +
                        number(wavelengths_[i]) + " nm, " + number(elevations_[j]) + " deg");
      }
      if (j > 0 && values_[i][j - 1] > v + monotonicity_slack) {
        throw DataError("transmittance decreases toward zenith at " + number(wavelengths_[i]) +
                        " nm between " + number(elevations_[j - 1]) + " and " +
                        number(elevations_[j]) + " deg");
      }
    }
  }
}

double AtmosphereTable::transmittance(double wavelength_nm, double elevation_rad) const {
  const double el = elevation_rad / constants::deg;
  const double eps = 1e-9;
  if (wavelength_nm < wavelengths_.front() - eps || wavelength_nm > wavelengths_.back() + eps ||
      el < elevations_.front() - eps || el > elevations_.back() + eps) {
    throw DataError("atmosphere query (" + number(wavelength_nm) + " nm, " + number(el) +
                    " deg) outside table");
  }
  if (wavelengths_.size() == 1 && elevations_.size() == 1) return values_[0][0];
  const std::size_t i = wavelengths_.size() > 1 ? cell(wavelengths_, wavelength_nm) : 0;
  const std::size_t j = elevations_.size() > 1 ? cell(elevations_, el) : 0;
  const std::size_t i1 = std::min(i + 1, wavelengths_.size() - 1);
  const std::size_t j1 = std::min(j + 1, elevations_.size() - 1);
  const double tx = i1 == i ? 0.0 : std::clamp((wavelength_nm - wavelengths_[i]) /
                                                   (wavelengths_[i1] - wavelengths_[i]), 0.0, 1.0);
  const double ty = j1 == j ? 0.0 : std::clamp((el - elevations_[j]) /
                                                   (elevations_[j1] - elevations_[j]), 0.0, 1.0);
  const double a = values_[i][j] + ty * (values_[i][j1] - values_[i][j]);
  const double b = values_[i1][j] + ty * (values_[i1][j1] - values_[i1][j]);
  return a + tx * (b - a);
}

AtmosphereTable load_table(const std::string& path) {
  auto grid = data::read_grid(path, "wavelengths_nm", "elevations_deg");
  return AtmosphereTable(std::move(grid.rows), std::move(grid.columns), std::move(grid.values),
                         std::move(grid.provenance));
}

DetectorCurve::DetectorCurve(std::vector<double> wavelengths_nm, std::vector<double> efficiency,
                             DetectorKind kind)
    : wavelengths_(std::move(wavelengths_nm)), efficiency_(std::move(efficiency)), kind_(kind) {
  if (wavelengths_.empty() || wavelengths_.size() != efficiency_.size()) {
    throw DataError("detector curve needs matching, non-empty wavelength and efficiency lists");
  }
  for (double e : efficiency_) {
    if (!(e >= 0.0 && e <= 1.0)) throw DataError("detector efficiency " + number(e) + " outside [0, 1]");
  }
}

double DetectorCurve::efficiency(double wavelength_nm) const {
  if (wavelength_nm < wavelengths_.front() - 1e-9 || wavelength_nm > wavelengths_.back() + 1e-9) {
    throw DataError("detector curve has no data at " + number(wavelength_nm) + " nm");
  }
  return numeric::interp_linear(wavelengths_, efficiency_, wavelength_nm);
}

DetectorCurve load_detector_curve(const std::string& path, DetectorKind kind) {
  auto grid = data::read_grid(path, "", "wavelengths_nm");
  return DetectorCurve(std::move(grid.columns), std::move(grid.values.front()), kind);
}

double detector_efficiency(const DetectorCurve& thin, const DetectorCurve& thick,
                           double wavelength_nm) {
  return wavelength_nm < thick_apd_from_nm ? thin.efficiency(wavelength_nm)
                                           : thick.efficiency(wavelength_nm);
}

std::string atmosphere_path(const std::string& data_dir) {
  return data_dir + "/atmosphere_rural_5km.csv";
}
std::string thin_apd_path(const std::string& data_dir) { return data_dir + "/detector_thin_apd.csv"; }
std::string thick_apd_path(const std::string& data_dir) { return data_dir + "/detector_thick_apd.csv"; }

}  // namespace qsat::atmosphere
