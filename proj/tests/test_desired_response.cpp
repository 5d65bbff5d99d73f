#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "rlsfi/desired_response.hpp"
#include "rlsfi/error.hpp"

using namespace rlsfi;

TEST_CASE("taper shape") {
  CHECK(taper(0.0, 20.0) == 1.0);
  // -3 dB (power) at half the beamwidth.
  CHECK(20.0 * std::log10(taper(10.0, 20.0)) == doctest::Approx(-3.0103).epsilon(1e-4));
  CHECK(taper(20.0, 20.0) == 0.0);
  CHECK(taper(90.0, 20.0) == 0.0);
  CHECK(taper(5.0, 20.0) > taper(6.0, 20.0));
  CHECK_THROWS_AS(taper(1.0, 0.0), InvalidArgument);
  CHECK_THROWS_AS(taper(-1.0, 20.0), InvalidArgument);
}

TEST_CASE("1-D ring response") {
  const auto d = build_desired_1d(5.0, 90.0, {90.0, 90.0}, 20.0);
  CHECK(d.grid.size() == 72);
  CHECK(d.grid[d.look_index] == Direction{90.0, 90.0});
  CHECK(d.values[d.look_index] == 1.0);
  for (std::size_t i = 0; i < d.grid.size(); ++i) {
    CHECK(d.grid[i].elevation == 90.0);
    CHECK(d.values[i] >= 0.0);
    CHECK(d.values[i] <= 1.0);
  }
  // Main lobe: |delta| < 20 deg -> 90 +- 15 are the outermost nonzero nodes.
  CHECK(d.values[*d.grid.find({75.0, 90.0})] > 0.0);
  CHECK(d.values[*d.grid.find({70.0, 90.0})] == 0.0);
}

TEST_CASE("1-D response wraps across 0/360") {
  const auto d = build_desired_1d(5.0, 90.0, {0.0, 90.0}, 20.0);
  const auto a = d.values[*d.grid.find({355.0, 90.0})];
  const auto b = d.values[*d.grid.find({5.0, 90.0})];
  CHECK(a == doctest::Approx(b));
  CHECK(a == doctest::Approx(taper(5.0, 20.0)));
}

TEST_CASE("1-D response input checks") {
  CHECK_THROWS_AS(build_desired_1d(7.0, 90.0, {0.0, 90.0}, 20.0), InvalidArgument);
  CHECK_THROWS_AS(build_desired_1d(5.0, 90.0, {0.0, 80.0}, 20.0), InvalidArgument);
  CHECK_THROWS_AS(build_desired_1d(5.0, 90.0, {2.0, 90.0}, 20.0), InvalidArgument);
  CHECK_THROWS_AS(build_desired_1d(5.0, 0.0, {0.0, 0.0}, 20.0), InvalidArgument);
  CHECK_THROWS_AS(build_desired_1d(5.0, 90.0, {0.0, 90.0}, 0.0), InvalidArgument);
}

TEST_CASE("2-D response follows great-circle distance") {
  const auto grid = make_uniform_grid(5.0, 5.0, true);
  const Direction look{90.0, 90.0};
  const auto d = build_desired_2d(grid, look, 20.0);
  CHECK(d.grid.size() == 2522);
  CHECK(d.values[d.look_index] == 1.0);
  std::size_t nonzero = 0;
  for (std::size_t m = 0; m < grid.size(); ++m) {
    CHECK(d.values[m] == doctest::Approx(taper(great_circle_distance(grid[m], look), 20.0)));
    nonzero += d.values[m] > 0.0;
  }
  // The off-plane neighbours at the same angular distance carry the same value.
  CHECK(d.values[*grid.find({90.0, 80.0})] == doctest::Approx(d.values[*grid.find({80.0, 90.0})]));
  CHECK(nonzero > 20);
  CHECK_THROWS_AS(build_desired_2d(grid, {91.0, 90.0}, 20.0), InvalidArgument);
}

TEST_CASE("desired CSV") {
  const auto path = std::filesystem::temp_directory_path() / "rlsfi_desired.csv";
  write_desired_csv(build_desired_1d(90.0, 90.0, {0.0, 90.0}, 20.0), path, "abc");
  std::ifstream in(path);
  std::string l1, l2, l3;
  std::getline(in, l1);
  std::getline(in, l2);
  std::getline(in, l3);
  CHECK(l1 == "# config_hash=abc");
  CHECK(l2 == "azimuth_deg,elevation_deg,value");
  CHECK(l3 == "0,90,1");
}
