#include "graphnf/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "graphnf/errors.hpp"

namespace graphnf {

double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

Direction Direction::make(double azimuth_deg, double elevation_deg) {
  if (!std::isfinite(azimuth_deg) || !std::isfinite(elevation_deg)) {
    throw ContractViolation("direction components must be finite");
  }
  if (elevation_deg < -90.0 || elevation_deg > 90.0) {
    throw ContractViolation("elevation " + std::to_string(elevation_deg) + " outside [-90, 90]");
  }
  double az = std::fmod(azimuth_deg, 360.0);
  if (az < 0.0) az += 360.0;
  if (az >= 360.0) az = 0.0;
  return Direction{az, elevation_deg};
}

std::array<double, 3> Direction::unit_vector() const {
  const double az = deg_to_rad(azimuth);
  const double el = deg_to_rad(elevation);
  return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
}

double angular_distance(const Direction& a, const Direction& b) {
  if (a == b) return 0.0;
  const auto u = a.unit_vector();
  const auto v = b.unit_vector();
  // atan2 of |u x v| and u.v stays accurate for both tiny and near-antipodal angles.
  const double cx = u[1] * v[2] - u[2] * v[1];
  const double cy = u[2] * v[0] - u[0] * v[2];
  const double cz = u[0] * v[1] - u[1] * v[0];
  const double cross = std::sqrt(cx * cx + cy * cy + cz * cz);
  const double dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
  return rad_to_deg(std::atan2(cross, dot));
}

}  // namespace graphnf
