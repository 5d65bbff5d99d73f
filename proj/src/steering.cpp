#include "rlsfi/steering.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "rlsfi/error.hpp"
#include "rlsfi/fft.hpp"
#include "rlsfi/io.hpp"

namespace rlsfi {

namespace {
constexpr const char* kHrtfFormat = "rlsfi-hrtf";
constexpr int kHrtfVersion = 1;
}  // namespace

FrequencyGrid::FrequencyGrid(double sample_rate, std::size_t num_taps)
    : fs_(sample_rate), taps_(num_taps) {
  if (!(fs_ > 0.0) || !std::isfinite(fs_)) throw InvalidArgument("sample rate must be positive");
  if (taps_ < 2 || taps_ % 2 != 0) {
    throw InvalidArgument("number of taps must be even and >= 2, got " + std::to_string(taps_));
  }
}

double FrequencyGrid::omega(std::size_t q) const {
  return 2.0 * std::numbers::pi * static_cast<double>(q) / static_cast<double>(taps_);
}

std::vector<std::size_t> FrequencyGrid::bins_in_band(double lo_hz, double hi_hz) const {
  std::vector<std::size_t> out;
  for (std::size_t q = 0; q < num_bins(); ++q) {
    const double f = frequency(q);
    if (f >= lo_hz && f <= hi_hz) out.push_back(q);
  }
  return out;
}

SteeringSet::SteeringSet(DirectionGrid grid, FrequencyGrid freqs, std::size_t num_mics,
                         std::vector<std::complex<double>> data)
    : grid_(std::move(grid)), freqs_(freqs), mics_(num_mics), data_(std::move(data)) {
  if (mics_ == 0) throw InvalidArgument("steering set needs at least one microphone");
  if (data_.size() != freqs_.num_bins() * grid_.size() * mics_) {
    throw InvalidArgument("steering tensor size does not match bins x directions x mics");
  }
  for (const auto& v : data_) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
      throw InvalidArgument("steering tensor contains non-finite entries");
    }
  }
}

void HrtfDataset::validate() const {
  if (ir_length < 1) throw InvalidArgument("impulse response length must be >= 1");
  if (!(sample_rate > 0.0)) throw InvalidArgument("sample rate must be positive");
  if (impulse_responses.size() != grid.size() * geometry.size() * ir_length) {
    throw InvalidArgument("impulse response tensor size does not match directions x mics x taps");
  }
  for (float v : impulse_responses) {
    if (!std::isfinite(v)) throw InvalidArgument("impulse responses contain non-finite samples");
  }
}

std::vector<double> plane_wave_delays(const ArrayGeometry& geom, Direction dir, double c) {
  if (!(c > 0.0)) throw InvalidArgument("sound speed must be positive");
  const Eigen::Vector3d u = unit_vector(dir);
  const Eigen::Vector3d center = geom.centroid();
  std::vector<double> tau(geom.size());
  for (std::size_t n = 0; n < geom.size(); ++n) tau[n] = -(geom.mic(n) - center).dot(u) / c;
  return tau;
}

SteeringSet free_field_steering(const ArrayGeometry& geom, const DirectionGrid& grid,
                                const FrequencyGrid& freqs, double c) {
  const std::size_t n_mics = geom.size();
  std::vector<std::complex<double>> data(freqs.num_bins() * grid.size() * n_mics);
  std::vector<std::vector<double>> delays;
  delays.reserve(grid.size());
  for (const auto& d : grid.directions()) delays.push_back(plane_wave_delays(geom, d, c));

  std::size_t i = 0;
  for (std::size_t q = 0; q < freqs.num_bins(); ++q) {
    const double w = 2.0 * std::numbers::pi * freqs.frequency(q);
    for (std::size_t m = 0; m < grid.size(); ++m) {
      for (std::size_t n = 0; n < n_mics; ++n) data[i++] = std::polar(1.0, -w * delays[m][n]);
    }
  }
  return SteeringSet(grid, freqs, n_mics, std::move(data));
}

SteeringSet hrtf_steering(const HrtfDataset& ds, const FrequencyGrid& freqs) {
  if (ds.sample_rate != freqs.sample_rate()) {
    throw InvalidArgument("HRTF sample rate " + std::to_string(ds.sample_rate) +
                          " Hz does not match design rate " + std::to_string(freqs.sample_rate()) +
                          " Hz");
  }
  if (ds.ir_length > freqs.num_taps()) {
    throw InvalidArgument("impulse responses (" + std::to_string(ds.ir_length) +
                          " taps) are longer than the filter length " +
                          std::to_string(freqs.num_taps()));
  }
  const std::size_t n_mics = ds.geometry.size();
  const std::size_t n_bins = freqs.num_bins();
  const std::size_t n_dirs = ds.grid.size();
  std::vector<std::complex<double>> data(n_bins * n_dirs * n_mics);
  RealFft fft(freqs.num_taps());
  std::vector<double> ir(ds.ir_length);
  std::vector<std::complex<double>> spec(n_bins);
  for (std::size_t m = 0; m < n_dirs; ++m) {
    for (std::size_t n = 0; n < n_mics; ++n) {
      const auto src = ds.ir(m, n);
      std::copy(src.begin(), src.end(), ir.begin());
      fft.forward(ir, spec);
      for (std::size_t q = 0; q < n_bins; ++q) data[(q * n_dirs + m) * n_mics + n] = spec[q];
    }
  }
  return SteeringSet(ds.grid, freqs, n_mics, std::move(data));
}

Eigen::MatrixXcd steering_submatrix(const SteeringSet& set, std::size_t q,
                                    std::span<const std::size_t> dirs) {
  if (q >= set.freqs().num_bins()) throw InvalidArgument("bin index out of range");
  const std::size_t n_mics = set.num_mics();
  Eigen::MatrixXcd g(static_cast<Eigen::Index>(dirs.size()), static_cast<Eigen::Index>(n_mics));
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    if (dirs[i] >= set.grid().size()) {
      throw InvalidArgument("direction index " + std::to_string(dirs[i]) + " out of range");
    }
    const auto row = set.row(q, dirs[i]);
    for (std::size_t n = 0; n < n_mics; ++n) {
      g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(n)) = row[n];
    }
  }
  return g;
}

HrtfDataset load_hrtf_dataset(const std::filesystem::path& manifest_path) {
  const nlohmann::json doc = io::read_json(manifest_path);
  std::size_t n_dirs = 0, n_mics = 0, ir_len = 0;
  double fs = 0.0;
  std::string data_file;
  try {
    if (doc.at("format").get<std::string>() != kHrtfFormat) {
      throw FormatError("not an HRTF manifest (format field is '" +
                        doc.at("format").get<std::string>() + "')");
    }
    if (doc.at("version").get<int>() != kHrtfVersion) {
      throw FormatError("unsupported HRTF manifest version " +
                        std::to_string(doc.at("version").get<int>()));
    }
    if (doc.at("sample_format").get<std::string>() != "float32le") {
      throw FormatError("unsupported sample format " + doc.at("sample_format").get<std::string>());
    }
    n_dirs = doc.at("num_directions").get<std::size_t>();
    n_mics = doc.at("num_mics").get<std::size_t>();
    ir_len = doc.at("ir_length").get<std::size_t>();
    fs = doc.at("sample_rate_hz").get<double>();
    data_file = doc.at("data_file").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }
  if (ir_len < 1) throw FormatError("ir_length must be >= 1");

  auto section = [&](const char* key) -> const nlohmann::json& {
    if (!doc.contains(key)) throw FormatError(manifest_path.string() + ": missing '" + key + "'");
    return doc.at(key);
  };
  HrtfDataset ds{geometry_from_json(section("geometry")), grid_from_json(section("grid")), ir_len, fs,
                 {}};
  if (ds.grid.size() != n_dirs) {
    throw FormatError("grid lists " + std::to_string(ds.grid.size()) +
                      " directions but num_directions is " + std::to_string(n_dirs));
  }
  if (ds.geometry.size() != n_mics) {
    throw FormatError("geometry lists " + std::to_string(ds.geometry.size()) +
                      " microphones but num_mics is " + std::to_string(n_mics));
  }

  const auto payload = io::read_bytes(manifest_path.parent_path() / data_file);
  const std::uint64_t expected = static_cast<std::uint64_t>(n_dirs) * n_mics * ir_len * 4;
  if (payload.size() != expected) {
    throw FormatError("HRTF payload " + data_file + " has " + std::to_string(payload.size()) +
                          " bytes, expected " + std::to_string(expected),
                      std::min<std::uint64_t>(payload.size(), expected));
  }
  ds.impulse_responses.resize(n_dirs * n_mics * ir_len);
  for (std::size_t i = 0; i < ds.impulse_responses.size(); ++i) {
    const float v = io::read_f32le(payload.data() + 4 * i);
    if (!std::isfinite(v)) {
      throw FormatError("non-finite sample in HRTF payload " + data_file, 4 * i);
    }
    ds.impulse_responses[i] = v;
  }
  return ds;
}

void save_hrtf_dataset(const HrtfDataset& ds, const std::filesystem::path& manifest_path) {
  ds.validate();
  const std::string data_file = manifest_path.stem().string() + ".bin";
  nlohmann::json doc = {
      {"format", kHrtfFormat},
      {"version", kHrtfVersion},
      {"sample_rate_hz", ds.sample_rate},
      {"num_directions", ds.grid.size()},
      {"num_mics", ds.geometry.size()},
      {"ir_length", ds.ir_length},
      {"sample_format", "float32le"},
      {"layout", "direction,mic,tap"},
      {"data_file", data_file},
      {"geometry", to_json(ds.geometry)},
      {"grid", to_json(ds.grid)},
  };
  std::vector<unsigned char> payload;
  payload.reserve(ds.impulse_responses.size() * 4);
  for (float v : ds.impulse_responses) io::append_f32le(payload, v);
  io::write_json(manifest_path, doc);
  io::write_bytes(manifest_path.parent_path() / data_file, payload);
}

}  // namespace rlsfi
