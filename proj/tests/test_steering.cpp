#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "rlsfi/error.hpp"
#include "rlsfi/fft.hpp"
#include "rlsfi/io.hpp"
#include "rlsfi/steering.hpp"

using namespace rlsfi;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "rlsfi_test_steering" / name;
  std::filesystem::create_directories(dir);
  return dir;
}

// IR of direction m at mic n is a unit impulse at tap (m + 2n) % len.
HrtfDataset impulse_dataset(std::size_t len) {
  HrtfDataset ds{ArrayGeometry({{0.05, 0, 0}, {-0.05, 0, 0}, {0, 0.05, 0}}),
                 make_uniform_grid(90.0, 90.0, true), len, 16000.0, {}};
  ds.impulse_responses.assign(ds.grid.size() * ds.geometry.size() * len, 0.0f);
  for (std::size_t m = 0; m < ds.grid.size(); ++m) {
    for (std::size_t n = 0; n < ds.geometry.size(); ++n) {
      ds.impulse_responses[(m * ds.geometry.size() + n) * len + (m + 2 * n) % len] = 1.0f;
    }
  }
  return ds;
}

}  // namespace

TEST_CASE("frequency grid") {
  const FrequencyGrid f(16000.0, 1024);
  CHECK(f.num_bins() == 513);
  CHECK(f.frequency(1) == 15.625);
  CHECK(f.frequency(512) == 8000.0);
  CHECK(f.omega(512) == doctest::Approx(std::numbers::pi));
  const auto band = f.bins_in_band(300.0, 5000.0);
  CHECK(band.front() == 20);  // 312.5 Hz
  CHECK(band.back() == 320);  // 5000 Hz
  CHECK_THROWS_AS(FrequencyGrid(16000.0, 1023), InvalidArgument);
  CHECK_THROWS_AS(FrequencyGrid(0.0, 1024), InvalidArgument);
}

TEST_CASE("FFT matches a naive DFT on random input") {
  std::mt19937_64 rng(3);
  for (std::size_t n : {2, 8, 30, 64, 250, 1024}) {
    for (std::size_t len : {n / 2, n}) {
      const auto x = oracle::random_signal(rng, len);
      RealFft fft(n);
      std::vector<std::complex<double>> X(fft.num_bins());
      fft.forward(x, X);
      const auto ref = oracle::naive_rdft(x, n);
      double scale = 0.0;
      for (double v : x) scale += std::abs(v);
      for (std::size_t q = 0; q < X.size(); ++q) CHECK(std::abs(X[q] - ref[q]) <= 1e-10 * scale);
    }
  }
}

TEST_CASE("FFT round trip and Parseval") {
  std::mt19937_64 rng(4);
  for (std::size_t n : {16, 1024}) {
    const auto x = oracle::random_signal(rng, n);
    RealFft fft(n);
    std::vector<std::complex<double>> X(fft.num_bins());
    fft.forward(x, X);
    std::vector<double> back(n);
    fft.inverse(X, back);
    for (std::size_t i = 0; i < n; ++i) CHECK(back[i] == doctest::Approx(x[i]).epsilon(1e-12));

    double e_time = 0.0, e_freq = 0.0;
    for (double v : x) e_time += v * v;
    for (std::size_t q = 0; q < X.size(); ++q) {
      const double w = (q == 0 || q == n / 2) ? 1.0 : 2.0;
      e_freq += w * std::norm(X[q]);
    }
    CHECK(std::abs(e_freq / static_cast<double>(n) - e_time) <= 1e-9 * e_time);
  }
}

TEST_CASE("free-field steering is unit modulus with plane-wave phase") {
  const auto geom = head12_geometry();
  const auto grid = make_uniform_grid(30.0, 30.0, true);
  const FrequencyGrid f(16000.0, 64);
  const auto s = free_field_steering(geom, grid, f);
  for (std::size_t q = 0; q < f.num_bins(); ++q) {
    for (std::size_t m = 0; m < grid.size(); ++m) {
      const auto tau = plane_wave_delays(geom, grid[m], kDefaultSoundSpeed);
      for (std::size_t n = 0; n < geom.size(); ++n) {
        const auto expect = std::exp(std::complex<double>(0.0, -2.0 * std::numbers::pi * f.frequency(q) * tau[n]));
        CHECK(std::abs(s.at(q, m, n) - expect) < 1e-12);
        CHECK(std::abs(s.at(q, m, n)) == doctest::Approx(1.0));
      }
    }
  }
  // DC is all ones.
  for (std::size_t m = 0; m < grid.size(); ++m) CHECK(s.at(0, m, 3) == std::complex<double>(1.0, 0.0));
}

TEST_CASE("plane-wave delays: a mic towards the source hears it first") {
  const ArrayGeometry g({{0.1, 0, 0}, {-0.1, 0, 0}});
  const auto tau = plane_wave_delays(g, {0.0, 90.0}, 340.0);
  CHECK(tau[0] == doctest::Approx(-0.1 / 340.0));
  CHECK(tau[1] == doctest::Approx(0.1 / 340.0));
  CHECK_THROWS_AS(plane_wave_delays(g, {0.0, 90.0}, 0.0), InvalidArgument);
}

TEST_CASE("two-element array factor") {
  // Delay-and-sum steered broadside: |B| = |cos(pi f D cos(phi) / c)|.
  const double D = 0.2, c = 343.0;
  const ArrayGeometry g({{D / 2, 0, 0}, {-D / 2, 0, 0}});
  const auto grid = make_uniform_grid(15.0, 90.0, true);
  const FrequencyGrid f(16000.0, 32);
  const auto s = free_field_steering(g, grid, f, c);
  for (std::size_t q = 0; q < f.num_bins(); ++q) {
    for (std::size_t m = 0; m < grid.size(); ++m) {
      const auto u = unit_vector(grid[m]);
      const double expect = std::abs(std::cos(std::numbers::pi * f.frequency(q) * D * u.x() / c));
      CHECK(std::abs(0.5 * (s.at(q, m, 0) + s.at(q, m, 1))) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("HRTF steering is the DFT of the impulse responses") {
  const auto ds = impulse_dataset(8);
  const FrequencyGrid f(16000.0, 16);
  const auto s = hrtf_steering(ds, f);
  for (std::size_t q = 0; q < f.num_bins(); ++q) {
    for (std::size_t m = 0; m < ds.grid.size(); ++m) {
      for (std::size_t n = 0; n < ds.geometry.size(); ++n) {
        const auto ir = ds.ir(m, n);
        const std::vector<double> h(ir.begin(), ir.end());
        CHECK(std::abs(s.at(q, m, n) - oracle::dtft(h, f.omega(q))) < 1e-12);
      }
    }
  }
  CHECK_THROWS_AS(hrtf_steering(ds, FrequencyGrid(16000.0, 4)), InvalidArgument);
  CHECK_THROWS_AS(hrtf_steering(ds, FrequencyGrid(48000.0, 16)), InvalidArgument);
}

TEST_CASE("steering submatrix picks rows") {
  const auto geom = head12_geometry();
  const auto grid = make_uniform_grid(30.0, 30.0, true);
  const FrequencyGrid f(16000.0, 16);
  const auto s = free_field_steering(geom, grid, f);
  const std::vector<std::size_t> idx{5, 0, 5};
  const auto G = steering_submatrix(s, 3, idx);
  CHECK(G.rows() == 3);
  CHECK(G(0, 7) == s.at(3, 5, 7));
  CHECK(G(1, 2) == s.at(3, 0, 2));
  const std::vector<std::size_t> bad{grid.size()};
  CHECK_THROWS_AS(steering_submatrix(s, 3, bad), InvalidArgument);
  CHECK_THROWS_AS(steering_submatrix(s, 9, idx), InvalidArgument);
}

TEST_CASE("HRTF container round trip is bit exact") {
  auto ds = impulse_dataset(6);
  ds.impulse_responses[3] = -0.123456789f;
  const auto path = scratch("roundtrip") / "set.json";
  save_hrtf_dataset(ds, path);
  const auto back = load_hrtf_dataset(path);
  CHECK(back.impulse_responses == ds.impulse_responses);
  CHECK(back.grid.hash() == ds.grid.hash());
  CHECK(back.ir_length == 6);
  CHECK(back.sample_rate == 16000.0);
  CHECK(back.geometry.size() == 3);
}

TEST_CASE("HRTF loader rejects damaged files") {
  const auto ds = impulse_dataset(6);
  const auto dir = scratch("damaged");
  const auto path = dir / "set.json";
  save_hrtf_dataset(ds, path);
  auto bytes = io::read_bytes(dir / "set.bin");

  SUBCASE("truncated payload") {
    auto cut = bytes;
    cut.resize(cut.size() - 5);
    io::write_bytes(dir / "set.bin", cut);
    try {
      load_hrtf_dataset(path);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("expected") != std::string::npos);
      CHECK(e.byte_offset() == std::optional<std::uint64_t>(cut.size()));
    }
  }
  SUBCASE("NaN sample") {
    auto bad = bytes;
    const float nan = std::numeric_limits<float>::quiet_NaN();
    std::vector<unsigned char> enc;
    io::append_f32le(enc, nan);
    std::copy(enc.begin(), enc.end(), bad.begin() + 40);
    io::write_bytes(dir / "set.bin", bad);
    try {
      load_hrtf_dataset(path);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.byte_offset() == std::optional<std::uint64_t>(40));
    }
  }
  SUBCASE("bad JSON") {
    io::write_bytes(dir / "broken.json", std::vector<unsigned char>{'{', '"', 'a'});
    CHECK_THROWS_AS(load_hrtf_dataset(dir / "broken.json"), FormatError);
  }
  SUBCASE("missing manifest keys") {
    io::write_json(dir / "partial.json", {{"format", "rlsfi-hrtf"}, {"version", 1}});
    CHECK_THROWS_AS(load_hrtf_dataset(dir / "partial.json"), FormatError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_hrtf_dataset(dir / "nope.json"), FormatError); }
}
