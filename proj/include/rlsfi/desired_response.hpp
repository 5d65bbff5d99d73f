#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "rlsfi/array_model.hpp"

namespace rlsfi {

// Frequency-invariant target response over a set of design directions.
// values[look_index] == 1 and every value lies in [0, 1].
struct DesiredResponse {
  DirectionGrid grid;
  std::vector<double> values;
  std::size_t look_index = 0;
};

// Raised-cosine main lobe: cos(pi * delta / (2 * beamwidth)) for
// delta <= beamwidth, else 0. The -3 dB point falls at beamwidth / 2.
double taper(double delta_deg, double beamwidth_3db_deg);

// Azimuth ring at a fixed elevation, sampled every az_step degrees.
DesiredResponse build_desired_1d(double az_step_deg, double elevation_deg, Direction look,
                                 double beamwidth_3db_deg);

// Taper of the great-circle distance to `look` at every node of `grid`.
DesiredResponse build_desired_2d(const DirectionGrid& grid, Direction look,
                                 double beamwidth_3db_deg);

// CSV with columns azimuth_deg, elevation_deg, value.
void write_desired_csv(const DesiredResponse& desired, const std::filesystem::path& path,
                       std::string_view config_hash);

}  // namespace rlsfi
