#pragma once

// Frequency-weighted segmental SNR and the two-source scenario evaluation
// built on it.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "rlsfi/array_model.hpp"
#include "rlsfi/audio.hpp"
#include "rlsfi/dsp_engine.hpp"
#include "rlsfi/fir_synthesis.hpp"

namespace rlsfi {

struct FwSegSnrParams {
  double frame_ms = 30.0;
  double overlap = 0.75;
  std::size_t num_bands = 25;
  double weight_exponent = 0.2;
  double clamp_lo = -10.0;
  double clamp_hi = 35.0;
  double band_lo_hz = 50.0;      // bands are mel-spaced from here to fs/2
  double silence_dbfs = -60.0;   // frames whose ref mean square falls below are skipped

  void validate() const;
};

struct FwSegSnrResult {
  double score_db = 0.0;
  std::size_t frames_total = 0;
  std::size_t frames_scored = 0;
};

// Hann-windowed frames; per band j the reference level X = sum tri_j |S| and
// the error level E = sum tri_j |S - S_test|; band SNR = 10 log10(X^2 / E^2)
// clamped, weighted by X^weight_exponent. E = 0 scores the ceiling.
// Throws InvalidArgument on length or rate mismatch, multichannel input, a
// signal shorter than one frame, or when every frame is silent.
FwSegSnrResult fwsegsnr(const AudioBuffer& ref, const AudioBuffer& test,
                        const FwSegSnrParams& p = {});

// Target at (phi_ld, target_elevation), one interferer at (phi_int, theta_int).
struct ScenarioCell {
  Direction target{};
  Direction interferer{};
  SceneSpec scene;  // sources[0] is the target, sources[1] the interferer
};

struct ScenarioMatrix {
  std::vector<double> target_azimuths{0, 30, 60, 90, 120, 150, 180};
  double target_elevation = 90.0;
  std::vector<double> interferer_azimuths{15, 45, 75, 105, 135, 165, 195};
  std::vector<double> interferer_elevations{90, 73};
  double sample_rate = 16000.0;
  double duration_s = 3.0;
  double interferer_gain_db = 0.0;
  std::optional<double> sensor_noise_snr_db;
  nlohmann::json target_signal = {{"type", "speech_shaped_noise"}, {"seed", 1}};
  nlohmann::json interferer_signal = {{"type", "speech_shaped_noise"}, {"seed", 2}};
  std::uint64_t seed = 0;

  static ScenarioMatrix from_json(const nlohmann::json& j);
};

// Cells ordered by interferer elevation, target azimuth, interferer azimuth.
// WAV references resolve against `base_dir`; each signal is loaded once.
std::vector<ScenarioCell> enumerate_scenarios(const ScenarioMatrix& m,
                                              const std::filesystem::path& base_dir = {});

// A design steered to `look`; cells use the designs whose look matches their
// target direction.
struct NamedFilters {
  std::string id;
  Direction look{};
  BeamformerFilters filters;
};

struct ScenarioRow {
  double phi_ld = 0.0;
  double theta_int = 0.0;
  double phi_int = 0.0;
  std::string design_id;
  double input_db = 0.0;   // frontmost microphone
  double output_db = 0.0;  // beamformer output
};

struct ScenarioSummaryRow {
  double phi_ld = 0.0;
  double theta_int = 0.0;
  std::string design_id;
  double mean_input_db = 0.0;
  double mean_output_db = 0.0;
  std::size_t count = 0;
};

struct ScenarioReport {
  std::vector<ScenarioRow> rows;
  std::vector<ScenarioSummaryRow> summary;
};

// Per-target means over interferer positions, grouped by (phi_ld, theta_int,
// design_id) in first-appearance order.
std::vector<ScenarioSummaryRow> summarize(const std::vector<ScenarioRow>& rows);

// Throws InvalidArgument if a cell has no matching design or designs disagree
// on microphone count or sample rate.
ScenarioReport eval_scenario(const std::vector<NamedFilters>& designs,
                             const std::vector<ScenarioCell>& cells, const PropagationModel& model,
                             const ArrayGeometry& geom, const FwSegSnrParams& p = {});

// Columns phi_ld, theta_int, phi_int, design_id, input_dB, output_dB.
void write_report_csv(const ScenarioReport& report, const std::filesystem::path& path,
                      std::string_view config_hash);
// Columns phi_ld, theta_int, design_id, mean_input_dB, mean_output_dB, count.
void write_summary_csv(const ScenarioReport& report, const std::filesystem::path& path,
                       std::string_view config_hash);

}  // namespace rlsfi
