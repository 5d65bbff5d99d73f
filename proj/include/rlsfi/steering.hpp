#pragma once

// Sensor responses g_n(w, direction) for every grid direction and DFT bin,
// either from a far-field plane-wave model or from measured impulse
// responses (HRTFs).

#include <Eigen/Core>
#include <complex>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "rlsfi/array_model.hpp"

namespace rlsfi {

inline constexpr double kDefaultSoundSpeed = 343.0;

// The L/2 + 1 DFT bin frequencies q * fs / L.
class FrequencyGrid {
 public:
  // Throws InvalidArgument unless fs > 0 and L is even and >= 2.
  FrequencyGrid(double sample_rate, std::size_t num_taps);

  double sample_rate() const noexcept { return fs_; }
  std::size_t num_taps() const noexcept { return taps_; }
  std::size_t num_bins() const noexcept { return taps_ / 2 + 1; }
  double frequency(std::size_t q) const { return static_cast<double>(q) * fs_ / static_cast<double>(taps_); }
  // Normalized angular frequency 2 pi q / L in rad/sample.
  double omega(std::size_t q) const;
  // Bins whose frequency lies in [lo, hi].
  std::vector<std::size_t> bins_in_band(double lo_hz, double hi_hz) const;
  bool operator==(const FrequencyGrid&) const = default;

 private:
  double fs_;
  std::size_t taps_;
};

// Complex tensor g[q][m][n].
class SteeringSet {
 public:
  SteeringSet(DirectionGrid grid, FrequencyGrid freqs, std::size_t num_mics,
              std::vector<std::complex<double>> data);

  const DirectionGrid& grid() const noexcept { return grid_; }
  const FrequencyGrid& freqs() const noexcept { return freqs_; }
  std::size_t num_mics() const noexcept { return mics_; }

  const std::complex<double>& at(std::size_t q, std::size_t m, std::size_t n) const {
    return data_[index(q, m, n)];
  }
  // The N responses for one bin and direction.
  std::span<const std::complex<double>> row(std::size_t q, std::size_t m) const {
    return {data_.data() + index(q, m, 0), mics_};
  }

 private:
  std::size_t index(std::size_t q, std::size_t m, std::size_t n) const {
    return (q * grid_.size() + m) * mics_ + n;
  }

  DirectionGrid grid_;
  FrequencyGrid freqs_;
  std::size_t mics_;
  std::vector<std::complex<double>> data_;
};

// Measured impulse responses, stored as float32 [direction][mic][tap].
struct HrtfDataset {
  ArrayGeometry geometry;
  DirectionGrid grid;
  std::size_t ir_length = 0;
  double sample_rate = 0.0;
  std::vector<float> impulse_responses;

  std::span<const float> ir(std::size_t m, std::size_t n) const {
    return {impulse_responses.data() + (m * geometry.size() + n) * ir_length, ir_length};
  }

  // Throws InvalidArgument on size mismatch or non-finite samples.
  void validate() const;
};

// Plane-wave phases exp(-j w tau_n) with tau_n = -(r_n . u) / c, r_n relative
// to the array centroid.
SteeringSet free_field_steering(const ArrayGeometry& geom, const DirectionGrid& grid,
                                const FrequencyGrid& freqs, double sound_speed = kDefaultSoundSpeed);

// Per-microphone delay (seconds) of a plane wave from `dir`, relative to the
// array centroid.
std::vector<double> plane_wave_delays(const ArrayGeometry& geom, Direction dir, double sound_speed);

// Length-L DFT of each zero-padded impulse response, evaluated at bins 0..L/2.
SteeringSet hrtf_steering(const HrtfDataset& ds, const FrequencyGrid& freqs);

// G(w_q) restricted to `dirs`: row i is the steering row of dirs[i].
Eigen::MatrixXcd steering_submatrix(const SteeringSet& set, std::size_t q,
                                    std::span<const std::size_t> dirs);

// Container: JSON manifest plus a raw little-endian float32 payload stored
// next to it. The manifest path is what gets passed around.
HrtfDataset load_hrtf_dataset(const std::filesystem::path& manifest);
void save_hrtf_dataset(const HrtfDataset& ds, const std::filesystem::path& manifest);

}  // namespace rlsfi
