#pragma once

// Per-frequency robust least-squares frequency-invariant design:
//
//   minimize   || G w - b ||^2
//   subject to w^T d = 1,  |w^T d|^2 / (w^H w) >= gamma.
//
// With the distortionless constraint active the WNG floor is the ball
// ||w||^2 <= 1/gamma. Writing w = conj(d)/||d||^2 + U z, with U an
// orthonormal basis of the complement of conj(d), leaves a least-squares
// problem in z over a ball of radius rho^2 = 1/gamma - 1/||d||^2. Its
// solution is the Tikhonov path z(lambda) at the smallest lambda >= 0 that
// lands inside the ball; ||z(lambda)|| is nonincreasing, so lambda is found
// by bisection. The Tikhonov path is evaluated in closed form from an SVD of
// G U.

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "rlsfi/array_model.hpp"
#include "rlsfi/desired_response.hpp"
#include "rlsfi/steering.hpp"

namespace rlsfi {

double db_to_linear_power(double db);
double linear_power_to_db(double x);

struct DesignConfig {
  double gamma = 0.01;  // linear WNG floor
  Direction look{90.0, 90.0};
  double beamwidth_3db = 20.0;
  std::size_t num_taps = 1024;
  double sample_rate = 16000.0;
  double band_lo = 300.0;
  double band_hi = 5000.0;

  // Throws InvalidArgument when gamma <= 0, L odd, or the band is not
  // inside [0, fs/2].
  void validate() const;
};

struct BinDiagnostics {
  double residual = 0.0;            // ||G w - b||
  double achieved_wng = 0.0;        // |w^T d|^2 / (w^H w), linear
  double feasibility_margin_db = 0.0;  // 10 log10(||d||^2 / gamma_used)
  double gamma_used = 0.0;
  double stationarity = 0.0;        // ||A^H (A z - r) + lambda z|| / ||A^H r||
  int iterations = 0;               // bisection steps
  bool clamped = false;             // gamma reduced to 0.999 ||d||^2
  bool single_point = false;        // rho == 0: feasible set is {conj(d)/||d||^2}
};

struct FrequencySolution {
  Eigen::VectorXcd w;
  double lambda = 0.0;
  BinDiagnostics diagnostics;
};

// ||d||^2: the largest gamma for which the constraint set is non-empty.
double feasibility_bound(const Eigen::VectorXcd& d);

// Throws FeasibilityError when gamma > ||d||^2 (1 + 1e-12), InvalidArgument
// on non-finite or inconsistent input, NumericalError if the multiplier
// search fails within 200 bisection steps.
FrequencySolution solve_frequency(const Eigen::MatrixXcd& G, const Eigen::VectorXd& b_hat,
                                  const Eigen::VectorXcd& d, double gamma);

struct FrequencyDesign {
  FrequencyGrid freqs;
  Eigen::MatrixXcd weights;        // [bin][mic]
  Eigen::MatrixXcd look_steering;  // d(w_q) as rows, [bin][mic]
  std::vector<double> multipliers;
  std::vector<BinDiagnostics> diagnostics;
  double gamma = 0.0;
  Direction look{};
  double beamwidth_3db = 0.0;
  double band_lo = 0.0;
  double band_hi = 0.0;
  std::uint64_t grid_hash = 0;
  std::size_t num_design_directions = 0;

  std::size_t num_mics() const { return static_cast<std::size_t>(weights.cols()); }
};

// Called for every bin whose gamma had to be clamped.
using ClampCallback = std::function<void(std::size_t bin, double gamma_max)>;

// Solves every bin q = 0..L/2 independently. Bins may run on several threads;
// results do not depend on the schedule.
FrequencyDesign design_broadband(const SteeringSet& steer, const DesiredResponse& desired,
                                 const DesignConfig& cfg, const ClampCallback& on_clamp = {});

// Design file: JSON metadata next to a little-endian complex64 payload holding
// the weight tensor followed by the look-direction steering tensor, both
// [bin][mic]. `extra` is merged into the metadata (e.g. steering provenance).
void save_design(const FrequencyDesign& fd, const std::filesystem::path& manifest,
                 const nlohmann::json& extra = nlohmann::json::object());
FrequencyDesign load_design(const std::filesystem::path& manifest,
                            nlohmann::json* metadata = nullptr);

}  // namespace rlsfi
