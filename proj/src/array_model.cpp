#include "rlsfi/array_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <utility>

#include "rlsfi/error.hpp"

namespace rlsfi {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kFourPi = 4.0 * std::numbers::pi;

bool is_pole(const Direction& d) { return d.elevation == 0.0 || d.elevation == 180.0; }

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

bool is_integer_multiple(double total, double step) {
  const double k = total / step;
  return std::abs(k - std::round(k)) < 1e-9;
}

}  // namespace

Direction Direction::make(double azimuth_deg, double elevation_deg) {
  if (!std::isfinite(azimuth_deg) || !std::isfinite(elevation_deg)) {
    throw InvalidArgument("direction angles must be finite");
  }
  if (elevation_deg < 0.0 || elevation_deg > 180.0) {
    throw InvalidArgument("elevation must lie in [0, 180] degrees, got " +
                          std::to_string(elevation_deg));
  }
  double az = std::fmod(azimuth_deg, 360.0);
  if (az < 0.0) az += 360.0;
  if (az >= 360.0) az = 0.0;
  return Direction{az, elevation_deg};
}

Eigen::Vector3d unit_vector(Direction d) {
  const double az = d.azimuth * kDeg;
  const double el = d.elevation * kDeg;
  return {std::sin(el) * std::cos(az), std::sin(el) * std::sin(az), std::cos(el)};
}

double great_circle_distance(Direction a, Direction b) {
  const double c = std::clamp(unit_vector(a).dot(unit_vector(b)), -1.0, 1.0);
  return std::acos(c) / kDeg;
}

ArrayGeometry::ArrayGeometry(std::vector<Eigen::Vector3d> mics, std::size_t frontmost_index)
    : mics_(std::move(mics)), frontmost_(frontmost_index) {
  if (mics_.empty()) throw InvalidArgument("array geometry needs at least one microphone");
  for (std::size_t i = 0; i < mics_.size(); ++i) {
    if (!mics_[i].allFinite()) {
      throw InvalidArgument("microphone " + std::to_string(i) + " has a non-finite position");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if ((mics_[i] - mics_[j]).norm() < 1e-6) {
        throw InvalidArgument("microphones " + std::to_string(j) + " and " + std::to_string(i) +
                              " are closer than 1e-6 m");
      }
    }
  }
  if (frontmost_ >= mics_.size()) {
    throw InvalidArgument("frontmost_index " + std::to_string(frontmost_) +
                          " out of range for " + std::to_string(mics_.size()) + " microphones");
  }
}

Eigen::Vector3d ArrayGeometry::centroid() const {
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
  for (const auto& m : mics_) c += m;
  return c / static_cast<double>(mics_.size());
}

ArrayGeometry head12_geometry() {
  // (azimuth, elevation, radius) per microphone.
  static constexpr double kLayout[12][3] = {
      {90.0, 70.0, 0.071},   {60.0, 100.0, 0.069},  {125.0, 95.0, 0.072}, {20.0, 60.0, 0.068},
      {160.0, 55.0, 0.070},  {200.0, 85.0, 0.073},  {0.0, 105.0, 0.067},  {235.0, 45.0, 0.070},
      {180.0, 115.0, 0.071}, {300.0, 75.0, 0.069},  {140.0, 125.0, 0.068}, {100.0, 30.0, 0.066},
  };
  std::vector<Eigen::Vector3d> mics;
  for (const auto& row : kLayout) {
    mics.push_back(row[2] * unit_vector(Direction::make(row[0], row[1])));
  }
  std::size_t front = 0;
  for (std::size_t n = 1; n < mics.size(); ++n) {
    if (mics[n].y() > mics[front].y()) front = n;
  }
  return ArrayGeometry(std::move(mics), front);
}

DirectionGrid::DirectionGrid(std::vector<Direction> directions, std::vector<double> weights)
    : dirs_(std::move(directions)), weights_(std::move(weights)) {
  if (dirs_.empty()) throw InvalidArgument("direction grid must not be empty");
  if (dirs_.size() != weights_.size()) {
    throw InvalidArgument("direction grid has " + std::to_string(dirs_.size()) +
                          " directions but " + std::to_string(weights_.size()) + " weights");
  }
  int north = 0, south = 0;
  std::set<std::pair<long long, long long>> seen;
  double total = 0.0;
  for (std::size_t m = 0; m < dirs_.size(); ++m) {
    const Direction& d = dirs_[m];
    // Re-validate ranges.
    (void)Direction::make(d.azimuth, d.elevation);
    if (d.azimuth < 0.0 || d.azimuth >= 360.0) {
      throw InvalidArgument("azimuth must lie in [0, 360)");
    }
    if (!(weights_[m] > 0.0) || !std::isfinite(weights_[m])) {
      throw InvalidArgument("quadrature weight " + std::to_string(m) + " must be positive");
    }
    total += weights_[m];
    if (d.elevation == 0.0) ++north;
    if (d.elevation == 180.0) ++south;
    const long long az_key = is_pole(d) ? 0 : std::llround(d.azimuth * 1e6);
    if (!seen.emplace(az_key, std::llround(d.elevation * 1e6)).second) {
      throw InvalidArgument("duplicate direction in grid at index " + std::to_string(m));
    }
  }
  if (north > 1 || south > 1) throw InvalidArgument("each pole may appear at most once");
  if (std::abs(total - kFourPi) > 1e-6 * kFourPi) {
    throw InvalidArgument("quadrature weights must sum to 4*pi, got " + std::to_string(total));
  }
}

std::optional<std::size_t> DirectionGrid::find(Direction target, double tol_deg) const {
  for (std::size_t m = 0; m < dirs_.size(); ++m) {
    if (great_circle_distance(dirs_[m], target) <= tol_deg) return m;
  }
  return std::nullopt;
}

std::uint64_t DirectionGrid::hash() const {
  std::uint64_t h = 14695981039346656037ULL;
  for (const auto& d : dirs_) {
    h = fnv1a(h, &d.azimuth, sizeof(double));
    h = fnv1a(h, &d.elevation, sizeof(double));
  }
  return h;
}

DirectionGrid make_uniform_grid(double az_step, double el_step, bool include_poles) {
  if (!(az_step > 0.0) || !(el_step > 0.0)) {
    throw InvalidArgument("grid steps must be positive");
  }
  if (!is_integer_multiple(360.0, az_step)) {
    throw InvalidArgument("360 is not divisible by the azimuth step");
  }
  if (!is_integer_multiple(180.0, el_step)) {
    throw InvalidArgument("180 is not divisible by the elevation step");
  }
  const auto n_az = static_cast<std::size_t>(std::llround(360.0 / az_step));
  const auto n_el = static_cast<std::size_t>(std::llround(180.0 / el_step));
  const double d_az = az_step * kDeg;
  const double d_el = el_step * kDeg;
  const double cap = 2.0 * std::numbers::pi * (1.0 - std::cos(0.5 * d_el));

  std::vector<Direction> dirs;
  std::vector<double> w;
  dirs.reserve(n_az * (n_el - 1) + 2);
  if (include_poles) {
    dirs.push_back({90.0, 0.0});
    w.push_back(cap);
  }
  for (std::size_t i = 1; i < n_el; ++i) {
    const double el = static_cast<double>(i) * el_step;
    const double ring = std::sin(el * kDeg) * d_el * d_az;
    for (std::size_t k = 0; k < n_az; ++k) {
      dirs.push_back({static_cast<double>(k) * az_step, el});
      w.push_back(ring);
    }
  }
  if (include_poles) {
    dirs.push_back({90.0, 180.0});
    w.push_back(cap);
  }
  if (dirs.empty()) throw InvalidArgument("grid has no directions; use poles or a finer step");
  double total = 0.0;
  for (double x : w) total += x;
  for (double& x : w) x *= kFourPi / total;
  return DirectionGrid(std::move(dirs), std::move(w));
}

std::size_t nearest_direction(const DirectionGrid& grid, Direction target) {
  std::size_t best = 0;
  double best_d = great_circle_distance(grid[0], target);
  for (std::size_t m = 1; m < grid.size(); ++m) {
    const double d = great_circle_distance(grid[m], target);
    if (d < best_d) {
      best_d = d;
      best = m;
    }
  }
  return best;
}

double integrate(const DirectionGrid& grid, std::span<const double> values) {
  if (values.size() != grid.size()) throw InvalidArgument("integrand size mismatch");
  double acc = 0.0;
  for (std::size_t m = 0; m < grid.size(); ++m) acc += grid.weights()[m] * values[m];
  return acc;
}

nlohmann::json to_json(const ArrayGeometry& geom) {
  nlohmann::json mics = nlohmann::json::array();
  for (const auto& m : geom.mics()) mics.push_back({m.x(), m.y(), m.z()});
  return {{"units", "m"}, {"frontmost_index", geom.frontmost_index()}, {"mics", mics}};
}

ArrayGeometry geometry_from_json(const nlohmann::json& j) {
  try {
    std::vector<Eigen::Vector3d> mics;
    for (const auto& row : j.at("mics")) {
      if (row.size() != 3) throw FormatError("microphone rows must have 3 coordinates");
      mics.emplace_back(row[0].get<double>(), row[1].get<double>(), row[2].get<double>());
    }
    return ArrayGeometry(std::move(mics), j.value("frontmost_index", std::size_t{0}));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("geometry JSON: ") + e.what());
  }
}

nlohmann::json to_json(const DirectionGrid& grid) {
  nlohmann::json dirs = nlohmann::json::array();
  for (const auto& d : grid.directions()) dirs.push_back({d.azimuth, d.elevation});
  return {{"units", "deg"}, {"directions", dirs}, {"weights", grid.weights()}};
}

DirectionGrid grid_from_json(const nlohmann::json& j) {
  try {
    std::vector<Direction> dirs;
    for (const auto& row : j.at("directions")) {
      if (row.size() != 2) throw FormatError("grid rows must be [azimuth, elevation]");
      dirs.push_back(Direction::make(row[0].get<double>(), row[1].get<double>()));
    }
    return DirectionGrid(std::move(dirs), j.at("weights").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("grid JSON: ") + e.what());
  }
}

ArrayGeometry load_geometry_csv(const std::filesystem::path& path, std::size_t frontmost_index) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open geometry CSV " + path.string());
  std::vector<Eigen::Vector3d> mics;
  std::string line;
  std::size_t line_no = 0;
  std::uint64_t offset = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::uint64_t line_offset = offset;
    offset += line.size() + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    double x, y, z;
    if (!(row >> x >> y >> z)) {
      if (mics.empty() && line_no == 1) continue;  // header
      throw FormatError("geometry CSV line " + std::to_string(line_no) + " is not 'x,y,z'",
                        line_offset);
    }
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) {
      throw FormatError("geometry CSV line " + std::to_string(line_no) + " is not finite",
                        line_offset);
    }
    mics.emplace_back(x, y, z);
  }
  if (mics.empty()) throw FormatError("geometry CSV " + path.string() + " has no rows");
  return ArrayGeometry(std::move(mics), frontmost_index);
}

}  // namespace rlsfi
