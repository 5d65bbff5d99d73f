#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "rlsfi/error.hpp"
#include "rlsfi/fft.hpp"
#include "rlsfi/fir_synthesis.hpp"

using namespace rlsfi;
using cd = std::complex<double>;

namespace {

std::vector<double> row_of(const BeamformerFilters& bf, std::size_t n) {
  const auto r = bf.row(n);
  return {r.begin(), r.end()};
}

// Spectrum of a random real minimum-order cepstrum: smooth in frequency and
// conjugate-symmetric, so bins 0 and L/2 are real.
Eigen::MatrixXcd smooth_spectrum(std::mt19937_64& rng, const FrequencyGrid& f, Eigen::Index mics) {
  std::normal_distribution<double> g(0.0, 0.3);
  Eigen::MatrixXcd W(static_cast<Eigen::Index>(f.num_bins()), mics);
  for (Eigen::Index n = 0; n < mics; ++n) {
    std::vector<double> c(6);
    for (double& v : c) v = g(rng);
    for (std::size_t q = 0; q < f.num_bins(); ++q) {
      cd logw = 0.0;
      for (std::size_t k = 0; k < c.size(); ++k) logw += c[k] * std::polar(1.0, -f.omega(q) * static_cast<double>(k));
      W(static_cast<Eigen::Index>(q), n) = std::exp(logw);
    }
  }
  return W;
}

}  // namespace

TEST_CASE("flat spectrum gives an impulse at the modeling delay") {
  const FrequencyGrid f(16000.0, 64);
  const auto bf = synthesize_fir(Eigen::MatrixXcd::Ones(33, 2), f);
  CHECK(bf.modeling_delay == 32);
  CHECK(bf.num_mics() == 2);
  CHECK(bf.num_taps() == 64);
  for (std::size_t n = 0; n < 2; ++n) {
    for (std::size_t l = 0; l < 64; ++l) CHECK(std::abs(bf.row(n)[l] - (l == 32 ? 1.0 : 0.0)) <= 1e-12);
  }
  CHECK(bf.discarded_imag_ratio == 0.0);
}

TEST_CASE("one-sample phase ramp shifts the impulse by one") {
  const FrequencyGrid f(16000.0, 64);
  Eigen::MatrixXcd W(33, 1);
  for (Eigen::Index q = 0; q < 33; ++q) W(q, 0) = std::polar(1.0, -f.omega(static_cast<std::size_t>(q)));
  const auto bf = synthesize_fir(W, f);
  for (std::size_t l = 0; l < 64; ++l) CHECK(std::abs(bf.row(0)[l] - (l == 33 ? 1.0 : 0.0)) <= 1e-12);
}

TEST_CASE("bin-frequency reconstruction of a smooth spectrum") {
  std::mt19937_64 rng(1);
  const FrequencyGrid f(16000.0, 256);
  const auto W = smooth_spectrum(rng, f, 3);
  const auto bf = synthesize_fir(W, f);
  CHECK(bf.discarded_imag_ratio < 1e-20);
  double max_err = 0.0;
  for (std::size_t q = 0; q < f.num_bins(); ++q) {
    const auto resp = filter_response(bf, f.frequency(q));
    const cd delay = std::polar(1.0, -f.omega(q) * 128.0);
    for (Eigen::Index n = 0; n < 3; ++n) {
      max_err = std::max(max_err, std::abs(resp(n) - W(static_cast<Eigen::Index>(q), n) * delay));
    }
  }
  CHECK(max_err <= 1e-10);
}

TEST_CASE("imaginary parts at DC and Nyquist are dropped and accounted") {
  const FrequencyGrid f(16000.0, 8);
  Eigen::MatrixXcd W = Eigen::MatrixXcd::Ones(5, 1);
  W(0, 0) = cd(1.0, 1.0);
  const auto bf = synthesize_fir(W, f);
  CHECK(bf.discarded_imag_ratio == doctest::Approx(1.0 / 6.0));
  CHECK(std::abs(filter_response(bf, 0.0)(0) - cd(1.0)) < 1e-12);
}

TEST_CASE("Parseval: tap energy equals symmetric spectral energy") {
  std::mt19937_64 rng(2);
  const FrequencyGrid f(16000.0, 128);
  const auto W = smooth_spectrum(rng, f, 2);
  const auto bf = synthesize_fir(W, f);
  for (Eigen::Index n = 0; n < 2; ++n) {
    double taps = 0.0;
    for (double v : bf.row(static_cast<std::size_t>(n))) taps += v * v;
    double spec = 0.0;
    for (Eigen::Index q = 0; q < 65; ++q) spec += (q == 0 || q == 64 ? 1.0 : 2.0) * std::norm(W(q, n));
    CHECK(std::abs(taps - spec / 128.0) <= 1e-9 * taps);
  }
}

TEST_CASE("filter response is the exact DTFT") {
  BeamformerFilters bf;
  bf.sample_rate = 16000.0;
  bf.taps = TapMatrix::Zero(2, 16);
  bf.taps(0, 0) = 1.0;
  bf.taps(1, 8) = 1.0;
  for (double fr : {0.0, 123.4, 4000.0, 8000.0}) {
    const auto r = filter_response(bf, fr);
    CHECK(std::abs(r(0) - cd(1.0)) < 1e-15);
    CHECK(std::abs(r(1) - std::polar(1.0, -2.0 * std::numbers::pi * fr / 16000.0 * 8.0)) < 1e-12);
  }
  // f = fs/4 and delay L/2 = 8: exp(-j pi L / 4) = exp(-j 4 pi) = 1.
  CHECK(std::abs(filter_response(bf, 4000.0)(1) - std::polar(1.0, -std::numbers::pi * 16.0 / 4.0)) < 1e-12);
  CHECK_THROWS_AS(filter_response(bf, -1.0), InvalidArgument);
  CHECK_THROWS_AS(filter_response(bf, 8000.1), InvalidArgument);

  std::mt19937_64 rng(3);
  bf.taps = TapMatrix(1, 32);
  for (Eigen::Index l = 0; l < 32; ++l) bf.taps(0, l) = std::normal_distribution<double>()(rng);
  RealFft fft(32);
  std::vector<cd> X(17);
  fft.forward(bf.row(0), X);
  for (std::size_t q = 0; q < 17; ++q) {
    CHECK(std::abs(filter_response(bf, q * 16000.0 / 32.0)(0) - X[q]) <= 1e-12 * 32);
  }
  const auto naive = oracle::dtft(row_of(bf, 0), 2.0 * std::numbers::pi * 1234.5 / 16000.0);
  CHECK(std::abs(filter_response(bf, 1234.5)(0) - naive) <= 1e-12);
}

TEST_CASE("synthesis input checks") {
  const FrequencyGrid f(16000.0, 8);
  CHECK_THROWS_AS(synthesize_fir(Eigen::MatrixXcd::Ones(4, 1), f), InvalidArgument);
  Eigen::MatrixXcd W = Eigen::MatrixXcd::Ones(5, 1);
  W(2, 0) = cd(NAN, 0.0);
  CHECK_THROWS_AS(synthesize_fir(W, f), InvalidArgument);
}

TEST_CASE("filter file round trip is exact") {
  std::mt19937_64 rng(4);
  const FrequencyGrid f(16000.0, 64);
  auto bf = synthesize_fir(smooth_spectrum(rng, f, 4), f);
  bf.look = {30.0, 80.0};
  bf.gamma = 0.01;
  const auto dir = std::filesystem::temp_directory_path() / "rlsfi_test_filters";
  std::filesystem::create_directories(dir);
  save_filters(bf, dir / "f.json");
  const auto back = load_filters(dir / "f.json");
  CHECK(back.taps == bf.taps);
  CHECK(back.look == bf.look);
  CHECK(back.gamma == bf.gamma);
  CHECK(back.modeling_delay == 32);
  CHECK(back.sample_rate == 16000.0);

  std::filesystem::resize_file(dir / "f.bin", 100);
  CHECK_THROWS_AS(load_filters(dir / "f.json"), FormatError);
}
