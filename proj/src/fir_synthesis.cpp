#include "rlsfi/fir_synthesis.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "rlsfi/error.hpp"
#include "rlsfi/fft.hpp"
#include "rlsfi/io.hpp"
#include "rlsfi/kernels.hpp"

namespace rlsfi {

BeamformerFilters synthesize_fir(const Eigen::MatrixXcd& W, const FrequencyGrid& freqs) {
  const std::size_t L = freqs.num_taps();
  const std::size_t n_bins = freqs.num_bins();
  if (static_cast<std::size_t>(W.rows()) != n_bins || W.cols() < 1) {
    throw InvalidArgument("weight tensor must have L/2 + 1 rows and at least one column");
  }
  BeamformerFilters bf;
  bf.taps = TapMatrix(W.cols(), static_cast<Eigen::Index>(L));
  bf.modeling_delay = L / 2;
  bf.sample_rate = freqs.sample_rate();

  RealFft fft(L);
  std::vector<std::complex<double>> spec(n_bins);
  std::vector<double> out(L);
  double total = 0.0;
  double dropped = 0.0;
  for (Eigen::Index n = 0; n < W.cols(); ++n) {
    for (std::size_t q = 0; q < n_bins; ++q) {
      // exp(-j w_q L/2) = (-1)^q at w_q = 2 pi q / L.
      const std::complex<double> v = W(static_cast<Eigen::Index>(q), n);
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
        throw InvalidArgument("non-finite frequency-domain weight");
      }
      spec[q] = (q % 2 == 0) ? v : -v;
      total += std::norm(v);
    }
    dropped += spec[0].imag() * spec[0].imag() + spec[L / 2].imag() * spec[L / 2].imag();
    spec[0] = spec[0].real();
    spec[L / 2] = spec[L / 2].real();
    fft.inverse(spec, out);
    for (std::size_t l = 0; l < L; ++l) bf.taps(n, static_cast<Eigen::Index>(l)) = out[l];
  }
  bf.discarded_imag_ratio = total > 0.0 ? dropped / total : 0.0;
  return bf;
}

BeamformerFilters synthesize_fir(const FrequencyDesign& fd) {
  BeamformerFilters bf = synthesize_fir(fd.weights, fd.freqs);
  bf.look = fd.look;
  bf.gamma = fd.gamma;
  return bf;
}

Eigen::VectorXcd filter_response(const BeamformerFilters& bf, double f_hz) {
  if (!(f_hz >= 0.0 && f_hz <= 0.5 * bf.sample_rate)) {
    throw InvalidArgument("frequency " + std::to_string(f_hz) + " Hz outside [0, fs/2]");
  }
  const std::size_t L = bf.num_taps();
  const double w = 2.0 * std::numbers::pi * f_hz / bf.sample_rate;
  std::vector<std::complex<double>> phasor(L);
  for (std::size_t l = 0; l < L; ++l) phasor[l] = std::polar(1.0, -w * static_cast<double>(l));
  const auto& k = kernels::active();
  Eigen::VectorXcd out(static_cast<Eigen::Index>(bf.num_mics()));
  for (std::size_t n = 0; n < bf.num_mics(); ++n) {
    out(static_cast<Eigen::Index>(n)) = k.rcdot(bf.row(n).data(), phasor.data(), L);
  }
  return out;
}

void save_filters(const BeamformerFilters& bf, const std::filesystem::path& manifest) {
  const std::string data_file = manifest.stem().string() + ".bin";
  const nlohmann::json doc = {
      {"format", "rlsfi-filters"},
      {"version", 1},
      {"num_mics", bf.num_mics()},
      {"num_taps", bf.num_taps()},
      {"sample_rate_hz", bf.sample_rate},
      {"modeling_delay", bf.modeling_delay},
      {"look", {bf.look.azimuth, bf.look.elevation}},
      {"gamma_linear", bf.gamma},
      {"gamma_db", bf.gamma > 0.0 ? 10.0 * std::log10(bf.gamma) : 0.0},
      {"discarded_imag_ratio", bf.discarded_imag_ratio},
      {"sample_format", "float64le"},
      {"layout", "mic,tap"},
      {"data_file", data_file},
  };
  std::vector<unsigned char> payload;
  payload.reserve(static_cast<std::size_t>(bf.taps.size()) * 8);
  for (Eigen::Index i = 0; i < bf.taps.size(); ++i) io::append_f64le(payload, bf.taps.data()[i]);
  io::write_json(manifest, doc);
  io::write_bytes(manifest.parent_path() / data_file, payload);
}

BeamformerFilters load_filters(const std::filesystem::path& manifest) {
  const nlohmann::json doc = io::read_json(manifest);
  try {
    if (doc.at("format").get<std::string>() != "rlsfi-filters" || doc.at("version").get<int>() != 1) {
      throw FormatError(manifest.string() + " is not a version-1 filter file");
    }
    const auto n_mics = doc.at("num_mics").get<std::size_t>();
    const auto n_taps = doc.at("num_taps").get<std::size_t>();
    if (n_mics == 0 || n_taps == 0) throw FormatError("filter file has empty dimensions");
    const auto data_file = doc.at("data_file").get<std::string>();
    const auto payload = io::read_bytes(manifest.parent_path() / data_file);
    const std::uint64_t expected = static_cast<std::uint64_t>(n_mics) * n_taps * 8;
    if (payload.size() != expected) {
      throw FormatError("filter payload " + data_file + " has " + std::to_string(payload.size()) +
                            " bytes, expected " + std::to_string(expected),
                        std::min<std::uint64_t>(payload.size(), expected));
    }
    BeamformerFilters bf;
    bf.taps = TapMatrix(static_cast<Eigen::Index>(n_mics), static_cast<Eigen::Index>(n_taps));
    for (std::size_t i = 0; i < n_mics * n_taps; ++i) {
      const double v = io::read_f64le(payload.data() + 8 * i);
      if (!std::isfinite(v)) throw FormatError("non-finite tap in " + data_file, 8 * i);
      bf.taps.data()[i] = v;
    }
    bf.sample_rate = doc.at("sample_rate_hz").get<double>();
    if (!(bf.sample_rate > 0.0)) throw FormatError("filter sample rate must be positive");
    bf.modeling_delay = doc.at("modeling_delay").get<std::size_t>();
    bf.look = Direction::make(doc.at("look")[0].get<double>(), doc.at("look")[1].get<double>());
    bf.gamma = doc.at("gamma_linear").get<double>();
    bf.discarded_imag_ratio = doc.value("discarded_imag_ratio", 0.0);
    return bf;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(manifest.string() + ": " + e.what());
  }
}

}  // namespace rlsfi
