#pragma once

// Array geometry, direction grids on the sphere and angular arithmetic.
//
// Angles are in degrees throughout. Azimuth is measured from the positive
// x-axis in [0, 360); elevation is the polar angle from the positive z-axis
// in [0, 180].

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"

namespace rlsfi {

struct Direction {
  double azimuth = 0.0;    // degrees, [0, 360)
  double elevation = 0.0;  // degrees, [0, 180]

  // Wraps azimuth into [0, 360); throws InvalidArgument for non-finite input
  // or elevation outside [0, 180].
  static Direction make(double azimuth_deg, double elevation_deg);

  bool operator==(const Direction&) const = default;
};

// Unit vector pointing from the array towards the direction.
Eigen::Vector3d unit_vector(Direction d);

// Great-circle angle between two directions in degrees, in [0, 180].
double great_circle_distance(Direction a, Direction b);

class ArrayGeometry {
 public:
  // Throws InvalidArgument if empty, non-finite, two microphones closer than
  // 1e-6 m, or frontmost_index out of range.
  ArrayGeometry(std::vector<Eigen::Vector3d> mics, std::size_t frontmost_index = 0);

  std::size_t size() const noexcept { return mics_.size(); }
  const std::vector<Eigen::Vector3d>& mics() const noexcept { return mics_; }
  const Eigen::Vector3d& mic(std::size_t n) const { return mics_.at(n); }
  std::size_t frontmost_index() const noexcept { return frontmost_; }
  Eigen::Vector3d centroid() const;

 private:
  std::vector<Eigen::Vector3d> mics_;
  std::size_t frontmost_;
};

// A built-in 12-microphone layout on a head-sized sphere (radius ~7 cm) with
// an irregular, slightly left-heavy distribution. Front is +y.
ArrayGeometry head12_geometry();

class DirectionGrid {
 public:
  // Throws InvalidArgument on duplicate directions, repeated poles,
  // non-positive weights, size mismatch, or weights not summing to 4*pi
  // within 1e-6 relative.
  DirectionGrid(std::vector<Direction> directions, std::vector<double> weights);

  std::size_t size() const noexcept { return dirs_.size(); }
  const Direction& operator[](std::size_t m) const { return dirs_[m]; }
  const std::vector<Direction>& directions() const noexcept { return dirs_; }
  const std::vector<double>& weights() const noexcept { return weights_; }

  // Index of the node within tol_deg of target, if any (lowest index wins).
  std::optional<std::size_t> find(Direction target, double tol_deg = 1e-6) const;

  // Stable FNV-1a hash of the ordered direction list.
  std::uint64_t hash() const;

 private:
  std::vector<Direction> dirs_;
  std::vector<double> weights_;
};

// Product grid: elevation-major (north pole, rings of increasing elevation
// with ascending azimuth, south pole). Poles sit at azimuth 90. Ring weights
// are proportional to sin(elevation); poles get their spherical-cap area.
// Total weight is rescaled to 4*pi.
DirectionGrid make_uniform_grid(double az_step_deg, double el_step_deg, bool include_poles);

// Index minimizing great-circle distance; ties go to the lowest index.
std::size_t nearest_direction(const DirectionGrid& grid, Direction target);

// Integral of f over the sphere using the grid's quadrature weights.
double integrate(const DirectionGrid& grid, std::span<const double> values);

nlohmann::json to_json(const ArrayGeometry& geom);
ArrayGeometry geometry_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DirectionGrid& grid);
DirectionGrid grid_from_json(const nlohmann::json& j);

// One "x,y,z" row per microphone (meters); blank lines and lines starting
// with '#' are skipped, as is a non-numeric header row.
ArrayGeometry load_geometry_csv(const std::filesystem::path& path, std::size_t frontmost_index = 0);

}  // namespace rlsfi
