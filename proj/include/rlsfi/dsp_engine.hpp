#pragma once

// Time-domain filter-and-sum processing and anechoic scene synthesis.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "rlsfi/array_model.hpp"
#include "rlsfi/audio.hpp"
#include "rlsfi/fir_synthesis.hpp"
#include "rlsfi/steering.hpp"

namespace rlsfi {

// y[k] = sum_n sum_l w[n][l] x_n[k - l], full length T + L - 1.
AudioBuffer filter_and_sum(const BeamformerFilters& bf, const AudioBuffer& x);

// Full linear convolution of one signal with one impulse response, scaled.
std::vector<double> convolve(std::span<const double> x, std::span<const double> h, double gain = 1.0);

inline constexpr std::size_t kFractionalDelayTaps = 64;
inline constexpr double kFractionalDelayBeta = 8.0;

// Kaiser-windowed sinc realizing a delay of `delay_samples` (>= 31). Tap j of
// `taps` applies at output offset `shift + j`.
struct FractionalDelay {
  long shift = 0;
  std::vector<double> taps;
};
FractionalDelay fractional_delay(double delay_samples);

// Gaussian noise shaped to a speech-like long-term spectrum with a syllabic
// amplitude envelope, normalized to -20 dBFS RMS. Deterministic in `seed`.
std::vector<double> speech_shaped_noise(double sample_rate, std::size_t frames, std::uint64_t seed);

struct SourceSpec {
  std::vector<double> signal;  // mono, at the scene sample rate
  Direction direction{};
  double gain_db = 0.0;
  nlohmann::json reference = nlohmann::json::object();  // provenance of `signal`
};

struct SceneSpec {
  double sample_rate = 16000.0;
  double duration_s = 0.0;  // signals are cut or zero-padded to this length
  std::vector<SourceSpec> sources;
  std::size_t target_index = 0;
  std::optional<double> sensor_noise_snr_db;  // relative to the target at the frontmost mic
  std::uint64_t seed = 0;
};

struct FreeFieldModel {
  double sound_speed = kDefaultSoundSpeed;
};
// Free-field fractional delays, or measured impulse responses looked up by
// direction (exact grid match).
using PropagationModel = std::variant<FreeFieldModel, std::reference_wrapper<const HrtfDataset>>;

struct RenderedScene {
  AudioBuffer mix;                 // N channels
  std::vector<AudioBuffer> stems;  // per source, N channels, gain applied
  std::optional<AudioBuffer> sensor_noise;
};

RenderedScene render_scene(const SceneSpec& scene, const PropagationModel& model,
                           const ArrayGeometry& geom);

struct ReferenceSignals {
  AudioBuffer input_ref;    // target stem at the frontmost mic
  AudioBuffer input_test;   // mix at the frontmost mic
  AudioBuffer output_ref;   // beamformer applied to the target stem
  AudioBuffer output_test;  // beamformer applied to the mix
};

ReferenceSignals reference_signals(const SceneSpec& scene, const RenderedScene& rendered,
                                   const BeamformerFilters& bf, std::size_t frontmost_index);

// Scene JSON:
//   {"sample_rate": 16000, "duration_s": 3, "seed": 1, "target_index": 0,
//    "sensor_noise_snr_db": null,
//    "sources": [{"direction": [az, el], "gain_db": 0,
//                 "signal": {"type": "speech_shaped_noise", "seed": 7}
//                        or {"type": "wav", "path": "clean.wav", "channel": 0}}]}
// Relative WAV paths resolve against `base_dir`.
SceneSpec scene_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

}  // namespace rlsfi
