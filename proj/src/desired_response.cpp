#include "rlsfi/desired_response.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "rlsfi/error.hpp"
#include "rlsfi/io.hpp"

namespace rlsfi {

double taper(double delta_deg, double beamwidth_deg) {
  if (!(beamwidth_deg > 0.0)) throw InvalidArgument("3-dB beamwidth must be positive");
  if (!(delta_deg >= 0.0)) throw InvalidArgument("angular distance must be non-negative");
  if (delta_deg >= beamwidth_deg) return 0.0;
  return std::cos(std::numbers::pi * delta_deg / (2.0 * beamwidth_deg));
}

DesiredResponse build_desired_1d(double az_step, double elevation, Direction look,
                                 double beamwidth) {
  if (!(az_step > 0.0) || std::abs(360.0 / az_step - std::round(360.0 / az_step)) > 1e-9) {
    throw InvalidArgument("360 is not divisible by the azimuth step");
  }
  if (!(elevation > 0.0 && elevation < 180.0)) {
    throw InvalidArgument("ring elevation must lie strictly between the poles");
  }
  if (look.elevation != elevation) {
    throw InvalidArgument("look direction is not on the design ring");
  }
  const double k = look.azimuth / az_step;
  if (std::abs(k - std::round(k)) > 1e-9) {
    throw InvalidArgument("look azimuth is not on the azimuth lattice");
  }
  (void)taper(0.0, beamwidth);

  const auto n = static_cast<std::size_t>(std::llround(360.0 / az_step));
  std::vector<Direction> dirs;
  for (std::size_t i = 0; i < n; ++i) dirs.push_back({static_cast<double>(i) * az_step, elevation});
  // A ring has no solid-angle meaning; uniform weights keep the grid valid.
  std::vector<double> weights(n, 4.0 * std::numbers::pi / static_cast<double>(n));
  DirectionGrid grid(std::move(dirs), std::move(weights));

  const auto look_index = static_cast<std::size_t>(std::llround(k)) % n;
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Azimuthal separation on the ring, wrapped to [0, 180].
    double delta = std::abs(grid[i].azimuth - grid[look_index].azimuth);
    if (delta > 180.0) delta = 360.0 - delta;
    values[i] = taper(delta, beamwidth);
  }
  values[look_index] = 1.0;
  return {std::move(grid), std::move(values), look_index};
}

DesiredResponse build_desired_2d(const DirectionGrid& grid, Direction look, double beamwidth) {
  (void)taper(0.0, beamwidth);
  const auto look_index = grid.find(look);
  if (!look_index) throw InvalidArgument("look direction is not a node of the design grid");
  std::vector<double> values(grid.size());
  for (std::size_t m = 0; m < grid.size(); ++m) {
    values[m] = m == *look_index ? 1.0 : taper(great_circle_distance(grid[m], look), beamwidth);
  }
  return {grid, std::move(values), *look_index};
}

void write_desired_csv(const DesiredResponse& desired, const std::filesystem::path& path,
                       std::string_view config_hash) {
  const std::vector<std::string> header{"azimuth_deg", "elevation_deg", "value"};
  io::CsvWriter csv(path, config_hash, header);
  for (std::size_t m = 0; m < desired.grid.size(); ++m) {
    csv.row(desired.grid[m].azimuth, desired.grid[m].elevation, desired.values[m]);
  }
}

}  // namespace rlsfi
