#pragma once

#include <Eigen/Core>
#include <complex>
#include <cstddef>
#include <filesystem>
#include <span>

#include "json.hpp"
#include "rlsfi/array_model.hpp"
#include "rlsfi/solver.hpp"

namespace rlsfi {

using TapMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Time-domain filter-and-sum coefficients, one row of L taps per microphone.
struct BeamformerFilters {
  TapMatrix taps;  // [mic][tap]
  std::size_t modeling_delay = 0;
  double sample_rate = 0.0;
  Direction look{};
  double gamma = 0.0;
  // Imaginary energy dropped at bins 0 and L/2, relative to total weight energy.
  double discarded_imag_ratio = 0.0;

  std::size_t num_mics() const { return static_cast<std::size_t>(taps.rows()); }
  std::size_t num_taps() const { return static_cast<std::size_t>(taps.cols()); }
  std::span<const double> row(std::size_t n) const {
    return {taps.data() + n * num_taps(), num_taps()};
  }
};

// Frequency-sampling FIR: each bin is delayed by L/2 samples, the spectrum is
// extended conjugate-symmetrically (bins 0 and L/2 forced real) and inverse
// transformed to L real taps.
BeamformerFilters synthesize_fir(const FrequencyDesign& fd);
BeamformerFilters synthesize_fir(const Eigen::MatrixXcd& bin_weights, const FrequencyGrid& freqs);

// Exact DTFT of every tap row at f_hz (no bin snapping).
Eigen::VectorXcd filter_response(const BeamformerFilters& bf, double f_hz);

// Filter file: JSON metadata next to little-endian float64 taps [mic][tap].
void save_filters(const BeamformerFilters& bf, const std::filesystem::path& manifest);
BeamformerFilters load_filters(const std::filesystem::path& manifest);

}  // namespace rlsfi
