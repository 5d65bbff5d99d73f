#pragma once

// Signal-independent evaluation: beampatterns, white noise gain and
// directivity index, plus the dB normalization conventions used for plots.

#include <Eigen/Core>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "rlsfi/array_model.hpp"
#include "rlsfi/fir_synthesis.hpp"
#include "rlsfi/solver.hpp"
#include "rlsfi/steering.hpp"

namespace rlsfi {

struct BeampatternMap {
  std::vector<std::size_t> bins;
  std::vector<double> freqs;  // Hz
  DirectionGrid grid;
  Eigen::MatrixXcd values;  // [freq][direction]
};

enum class CurveKind { Wng, Di };

struct CurveReport {
  CurveKind kind = CurveKind::Wng;
  std::vector<double> freqs;   // Hz
  std::vector<double> values;  // dB
};

// B(w, dir) = sum_n W_n(w) g_n(w, dir) with W_n the DTFT of the FIR taps.
BeampatternMap beampattern(const BeamformerFilters& bf, const SteeringSet& steer,
                           std::span<const std::size_t> bins);
// Same, with the per-bin optimum weights (before FIR synthesis).
BeampatternMap beampattern(const FrequencyDesign& fd, const SteeringSet& steer,
                           std::span<const std::size_t> bins);

// 10 log10 |w^T d|^2 / (w^H w) per bin from the per-bin weights. An empty
// selection means every bin.
CurveReport wng_curve(const FrequencyDesign& fd, std::span<const std::size_t> bins = {});
// Same, with w sampled from the DTFT of the synthesized taps.
CurveReport wng_curve_fir(const BeamformerFilters& bf, const SteeringSet& steer, Direction look,
                          std::span<const std::size_t> bins = {});

// 10 log10( |B(look)|^2 / ((1/4pi) sum_m weight_m |B(m)|^2) ) per row.
CurveReport directivity_index(const BeampatternMap& bp, Direction look);

struct Normalization {
  enum class Mode { Global, Plane } mode = Mode::Global;
  double plane_elevation = 90.0;  // used in Plane mode

  // "global" or "plane:<elevation>"
  static Normalization parse(std::string_view text);
};

// 20 log10 |B| minus the maximum over the reference region (all entries, or
// the directions at the plane elevation); the reference maximum maps to 0 dB.
Eigen::MatrixXd normalize_db(const BeampatternMap& bp, const Normalization& norm);

inline constexpr double kCsvDbFloor = -80.0;

// CSV exports; dB values are clamped at kCsvDbFloor.
void write_beampattern_csv(const BeampatternMap& bp, const Eigen::MatrixXd& db,
                           const std::filesystem::path& path, std::string_view config_hash);
void write_curve_csv(const CurveReport& curve, const std::filesystem::path& path,
                     std::string_view config_hash);

}  // namespace rlsfi
