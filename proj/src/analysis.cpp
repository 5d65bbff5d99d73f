#include "rlsfi/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "rlsfi/error.hpp"
#include "rlsfi/io.hpp"
#include "rlsfi/kernels.hpp"

namespace rlsfi {

namespace {

std::vector<std::size_t> all_bins_if_empty(std::span<const std::size_t> bins, std::size_t n) {
  if (!bins.empty()) return {bins.begin(), bins.end()};
  std::vector<std::size_t> out(n);
  for (std::size_t q = 0; q < n; ++q) out[q] = q;
  return out;
}

template <typename WeightsAt>
BeampatternMap evaluate(const SteeringSet& steer, std::span<const std::size_t> bins,
                        std::size_t n_mics, WeightsAt&& weights_at) {
  if (n_mics != steer.num_mics()) {
    throw InvalidArgument("beamformer and steering set have different microphone counts");
  }
  const auto& k = kernels::active();
  const std::size_t n_dirs = steer.grid().size();
  BeampatternMap bp{{}, {}, steer.grid(),
                    Eigen::MatrixXcd(static_cast<Eigen::Index>(bins.size()),
                                     static_cast<Eigen::Index>(n_dirs))};
  std::vector<std::complex<double>> w(n_mics);
  for (std::size_t i = 0; i < bins.size(); ++i) {
    const std::size_t q = bins[i];
    if (q >= steer.freqs().num_bins()) {
      throw InvalidArgument("bin " + std::to_string(q) + " is not in the steering set");
    }
    const Eigen::VectorXcd wq = weights_at(q);
    for (std::size_t n = 0; n < n_mics; ++n) w[n] = wq(static_cast<Eigen::Index>(n));
    for (std::size_t m = 0; m < n_dirs; ++m) {
      bp.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m)) =
          k.cdot(w.data(), steer.row(q, m).data(), n_mics);
    }
    bp.bins.push_back(q);
    bp.freqs.push_back(steer.freqs().frequency(q));
  }
  return bp;
}

double wng(const Eigen::VectorXcd& w, const Eigen::VectorXcd& d) {
  const double denom = w.squaredNorm();
  if (!(denom > 0.0)) throw NumericalError("white noise gain undefined for all-zero weights");
  return std::norm(w.cwiseProduct(d).sum()) / denom;
}

}  // namespace

BeampatternMap beampattern(const BeamformerFilters& bf, const SteeringSet& steer,
                           std::span<const std::size_t> bins) {
  if (bf.sample_rate != steer.freqs().sample_rate()) {
    throw InvalidArgument("filter and steering sample rates differ");
  }
  return evaluate(steer, bins, bf.num_mics(), [&](std::size_t q) {
    return filter_response(bf, steer.freqs().frequency(q));
  });
}

BeampatternMap beampattern(const FrequencyDesign& fd, const SteeringSet& steer,
                           std::span<const std::size_t> bins) {
  if (!(fd.freqs == steer.freqs())) throw InvalidArgument("design and steering bins differ");
  return evaluate(steer, bins, fd.num_mics(), [&](std::size_t q) -> Eigen::VectorXcd {
    return fd.weights.row(static_cast<Eigen::Index>(q)).transpose();
  });
}

CurveReport wng_curve(const FrequencyDesign& fd, std::span<const std::size_t> bins) {
  CurveReport out{CurveKind::Wng, {}, {}};
  for (std::size_t q : all_bins_if_empty(bins, fd.freqs.num_bins())) {
    const auto qi = static_cast<Eigen::Index>(q);
    out.freqs.push_back(fd.freqs.frequency(q));
    out.values.push_back(linear_power_to_db(
        wng(fd.weights.row(qi).transpose(), fd.look_steering.row(qi).transpose())));
  }
  return out;
}

CurveReport wng_curve_fir(const BeamformerFilters& bf, const SteeringSet& steer, Direction look,
                          std::span<const std::size_t> bins) {
  const auto look_index = steer.grid().find(look);
  if (!look_index) throw InvalidArgument("look direction is not a node of the steering grid");
  if (bf.num_mics() != steer.num_mics()) throw InvalidArgument("microphone count mismatch");
  CurveReport out{CurveKind::Wng, {}, {}};
  for (std::size_t q : all_bins_if_empty(bins, steer.freqs().num_bins())) {
    const double f = steer.freqs().frequency(q);
    const auto row = steer.row(q, *look_index);
    Eigen::VectorXcd d(static_cast<Eigen::Index>(row.size()));
    for (std::size_t n = 0; n < row.size(); ++n) d(static_cast<Eigen::Index>(n)) = row[n];
    out.freqs.push_back(f);
    out.values.push_back(linear_power_to_db(wng(filter_response(bf, f), d)));
  }
  return out;
}

CurveReport directivity_index(const BeampatternMap& bp, Direction look) {
  const auto look_index = bp.grid.find(look);
  if (!look_index) throw InvalidArgument("look direction is not a node of the analysis grid");
  const auto& weights = bp.grid.weights();
  CurveReport out{CurveKind::Di, bp.freqs, {}};
  for (Eigen::Index i = 0; i < bp.values.rows(); ++i) {
    double diffuse = 0.0;
    for (Eigen::Index m = 0; m < bp.values.cols(); ++m) {
      diffuse += weights[static_cast<std::size_t>(m)] * std::norm(bp.values(i, m));
    }
    diffuse /= 4.0 * std::numbers::pi;
    if (!(diffuse > 0.0)) {
      throw NumericalError("diffuse-field response is zero at " + std::to_string(bp.freqs[i]) + " Hz");
    }
    const double look_power = std::norm(bp.values(i, static_cast<Eigen::Index>(*look_index)));
    out.values.push_back(10.0 * std::log10(look_power / diffuse));
  }
  return out;
}

Normalization Normalization::parse(std::string_view text) {
  if (text == "global") return {};
  if (text.starts_with("plane")) {
    Normalization n{Mode::Plane, 90.0};
    if (text.size() > 5) {
      if (text[5] != ':') throw InvalidArgument("normalization must be 'global' or 'plane:<deg>'");
      try {
        n.plane_elevation = std::stod(std::string(text.substr(6)));
      } catch (const std::exception&) {
        throw InvalidArgument("bad plane elevation in '" + std::string(text) + "'");
      }
    }
    return n;
  }
  throw InvalidArgument("normalization must be 'global' or 'plane:<deg>'");
}

Eigen::MatrixXd normalize_db(const BeampatternMap& bp, const Normalization& norm) {
  Eigen::MatrixXd db(bp.values.rows(), bp.values.cols());
  double ref = 0.0;
  bool any_ref = false;
  for (Eigen::Index m = 0; m < bp.values.cols(); ++m) {
    const bool in_ref = norm.mode == Normalization::Mode::Global ||
                        std::abs(bp.grid[static_cast<std::size_t>(m)].elevation -
                                 norm.plane_elevation) < 1e-9;
    for (Eigen::Index i = 0; i < bp.values.rows(); ++i) {
      const double mag = std::abs(bp.values(i, m));
      db(i, m) = mag > 0.0 ? 20.0 * std::log10(mag) : -std::numeric_limits<double>::infinity();
      if (in_ref) {
        any_ref = true;
        ref = std::max(ref, mag);
      }
    }
  }
  if (!any_ref) throw InvalidArgument("no grid directions lie in the normalization plane");
  if (!(ref > 0.0)) throw NumericalError("beampattern is zero over the normalization region");
  db.array() -= 20.0 * std::log10(ref);
  return db;
}

void write_beampattern_csv(const BeampatternMap& bp, const Eigen::MatrixXd& db,
                           const std::filesystem::path& path, std::string_view config_hash) {
  const std::vector<std::string> header{"frequency_hz", "azimuth_deg", "elevation_deg",
                                        "magnitude_db"};
  io::CsvWriter csv(path, config_hash, header);
  for (Eigen::Index i = 0; i < db.rows(); ++i) {
    for (Eigen::Index m = 0; m < db.cols(); ++m) {
      const auto& d = bp.grid[static_cast<std::size_t>(m)];
      csv.row(bp.freqs[static_cast<std::size_t>(i)], d.azimuth, d.elevation,
              std::max(db(i, m), kCsvDbFloor));
    }
  }
}

void write_curve_csv(const CurveReport& curve, const std::filesystem::path& path,
                     std::string_view config_hash) {
  const std::vector<std::string> header{"frequency_hz",
                                        curve.kind == CurveKind::Wng ? "wng_db" : "di_db"};
  io::CsvWriter csv(path, config_hash, header);
  for (std::size_t i = 0; i < curve.freqs.size(); ++i) csv.row(curve.freqs[i], curve.values[i]);
}

}  // namespace rlsfi
