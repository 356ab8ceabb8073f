#pragma once

#include <array>

namespace graphnf {

// Source direction in degrees. Azimuth counterclockwise in [0, 360) with 90 on
// the left-ear side; elevation in [-90, 90].
struct Direction {
  double azimuth = 0.0;
  double elevation = 0.0;

  // Normalizes azimuth modulo 360; throws ContractViolation for elevation
  // outside [-90, 90] or non-finite input.
  static Direction make(double azimuth_deg, double elevation_deg);

  // x = front, y = left, z = up.
  std::array<double, 3> unit_vector() const;

  friend bool operator==(const Direction&, const Direction&) = default;
};

// Great-circle angle between two directions in degrees.
double angular_distance(const Direction& a, const Direction& b);

double deg_to_rad(double deg);
double rad_to_deg(double rad);

}  // namespace graphnf
