#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace rlsfi {

// Multichannel real signal, samples[channel][time]. All channels share one
// length; samples are finite.
class AudioBuffer {
 public:
  AudioBuffer(double sample_rate, std::vector<std::vector<double>> channels);
  static AudioBuffer zeros(double sample_rate, std::size_t channels, std::size_t frames);
  static AudioBuffer mono(double sample_rate, std::vector<double> samples);

  double sample_rate() const noexcept { return fs_; }
  std::size_t channels() const noexcept { return data_.size(); }
  std::size_t frames() const noexcept { return data_.front().size(); }

  std::span<const double> channel(std::size_t c) const { return data_.at(c); }
  std::span<double> channel(std::size_t c) { return data_.at(c); }
  AudioBuffer extract_channel(std::size_t c) const;

 private:
  double fs_;
  std::vector<std::vector<double>> data_;
};

}  // namespace rlsfi
