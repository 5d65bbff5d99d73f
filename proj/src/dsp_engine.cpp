#include "rlsfi/dsp_engine.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "rlsfi/error.hpp"
#include "rlsfi/kernels.hpp"
#include "rlsfi/wav.hpp"

namespace rlsfi {

AudioBuffer::AudioBuffer(double sample_rate, std::vector<std::vector<double>> channels)
    : fs_(sample_rate), data_(std::move(channels)) {
  if (!(fs_ > 0.0) || !std::isfinite(fs_)) throw InvalidArgument("sample rate must be positive");
  if (data_.empty()) throw InvalidArgument("audio buffer needs at least one channel");
  for (const auto& ch : data_) {
    if (ch.size() != data_.front().size()) throw InvalidArgument("channel lengths differ");
    for (double v : ch) {
      if (!std::isfinite(v)) throw InvalidArgument("audio buffer contains non-finite samples");
    }
  }
}

AudioBuffer AudioBuffer::zeros(double sample_rate, std::size_t channels, std::size_t frames) {
  return AudioBuffer(sample_rate, std::vector<std::vector<double>>(channels, std::vector<double>(frames)));
}

AudioBuffer AudioBuffer::mono(double sample_rate, std::vector<double> samples) {
  std::vector<std::vector<double>> ch;
  ch.push_back(std::move(samples));
  return AudioBuffer(sample_rate, std::move(ch));
}

AudioBuffer AudioBuffer::extract_channel(std::size_t c) const {
  return mono(fs_, data_.at(c));
}

AudioBuffer filter_and_sum(const BeamformerFilters& bf, const AudioBuffer& x) {
  if (x.channels() != bf.num_mics()) {
    throw InvalidArgument("input has " + std::to_string(x.channels()) + " channels, filters expect " +
                          std::to_string(bf.num_mics()));
  }
  if (x.sample_rate() != bf.sample_rate) throw InvalidArgument("sample rate mismatch");
  const std::size_t T = x.frames();
  const std::size_t L = bf.num_taps();
  const std::size_t out_len = T + L - 1;
  std::vector<double> y(out_len, 0.0);
  if (T == 0) return AudioBuffer::mono(x.sample_rate(), std::move(y));

  // Output-blocked so the accumulator stays cache resident; the per-sample
  // summation order (mic, then tap) does not depend on the blocking.
  constexpr std::size_t kBlock = 2048;
  const auto& k = kernels::active();
  for (std::size_t k0 = 0; k0 < out_len; k0 += kBlock) {
    const std::size_t k1 = std::min(out_len, k0 + kBlock);
    for (std::size_t n = 0; n < bf.num_mics(); ++n) {
      const auto w = bf.row(n);
      const double* xn = x.channel(n).data();
      for (std::size_t l = 0; l < L; ++l) {
        const std::size_t lo = std::max(k0, l);
        const std::size_t hi = std::min(k1, T + l);
        if (lo < hi) k.axpy(w[l], xn + (lo - l), y.data() + lo, hi - lo);
      }
    }
  }
  return AudioBuffer::mono(x.sample_rate(), std::move(y));
}

std::vector<double> convolve(std::span<const double> x, std::span<const double> h, double gain) {
  if (x.empty() || h.empty()) return {};
  std::vector<double> y(x.size() + h.size() - 1, 0.0);
  const auto& k = kernels::active();
  for (std::size_t j = 0; j < h.size(); ++j) k.axpy(gain * h[j], x.data(), y.data() + j, x.size());
  return y;
}

FractionalDelay fractional_delay(double delay) {
  constexpr long kHalf = static_cast<long>(kFractionalDelayTaps / 2);
  if (!std::isfinite(delay) || delay < kHalf - 1) {
    throw InvalidArgument("fractional delay must be at least " + std::to_string(kHalf - 1) + " samples");
  }
  const double whole = std::floor(delay);
  const double frac = delay - whole;
  FractionalDelay fd;
  fd.shift = static_cast<long>(whole) - (kHalf - 1);
  fd.taps.resize(kFractionalDelayTaps);
  const double norm = std::cyl_bessel_i(0.0, kFractionalDelayBeta);
  for (std::size_t i = 0; i < kFractionalDelayTaps; ++i) {
    // Offset from the ideal (fractional) center, within [-32, 32].
    const double t = static_cast<double>(static_cast<long>(i) - (kHalf - 1)) - frac;
    const double sinc = t == 0.0 ? 1.0 : std::sin(std::numbers::pi * t) / (std::numbers::pi * t);
    const double r = t / static_cast<double>(kHalf);
    const double win =
        std::abs(r) <= 1.0 ? std::cyl_bessel_i(0.0, kFractionalDelayBeta * std::sqrt(1.0 - r * r)) / norm
                           : 0.0;
    fd.taps[i] = sinc * win;
  }
  return fd;
}

std::vector<double> speech_shaped_noise(double fs, std::size_t frames, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 2.0 * std::numbers::pi);

  // One-pole sections: high-pass at 100 Hz, low-pass at 800 Hz and 4 kHz.
  auto pole = [fs](double fc) { return std::exp(-2.0 * std::numbers::pi * fc / fs); };
  const double a_hp = pole(100.0), a_lp1 = pole(800.0), a_lp2 = pole(4000.0);
  double hp_x = 0.0, hp_y = 0.0, lp1 = 0.0, lp2 = 0.0;

  const double ph1 = uni(rng), ph2 = uni(rng), ph3 = uni(rng);
  std::vector<double> out(frames);
  for (std::size_t k = 0; k < frames; ++k) {
    const double e = gauss(rng);
    hp_y = a_hp * (hp_y + e - hp_x);
    hp_x = e;
    lp1 = (1.0 - a_lp1) * hp_y + a_lp1 * lp1;
    lp2 = (1.0 - a_lp2) * (0.7 * lp1 + 0.3 * hp_y) + a_lp2 * lp2;
    const double t = static_cast<double>(k) / fs;
    const double s = 0.5 * (1.0 + 0.6 * std::sin(2.0 * std::numbers::pi * 3.1 * t + ph1) +
                            0.4 * std::sin(2.0 * std::numbers::pi * 5.3 * t + ph2));
    const double env = 0.1 + 0.9 * s * s * (0.75 + 0.25 * std::sin(2.0 * std::numbers::pi * 0.7 * t + ph3));
    out[k] = lp2 * env;
  }
  double power = 0.0;
  for (double v : out) power += v * v;
  if (frames > 0 && power > 0.0) {
    const double scale = 0.1 / std::sqrt(power / static_cast<double>(frames));
    for (double& v : out) v *= scale;
  }
  return out;
}

namespace {

std::vector<double> fit_length(const std::vector<double>& x, std::size_t n) {
  std::vector<double> out(n, 0.0);
  std::copy_n(x.begin(), std::min(n, x.size()), out.begin());
  return out;
}

// Extra output samples beyond the source length for a propagation model.
std::size_t render_padding(const PropagationModel& model, const ArrayGeometry& geom, double fs) {
  if (const auto* ff = std::get_if<FreeFieldModel>(&model)) {
    double rmax = 0.0;
    for (const auto& m : geom.mics()) rmax = std::max(rmax, (m - geom.centroid()).norm());
    return 2 * (kFractionalDelayTaps / 2 + static_cast<std::size_t>(std::ceil(rmax * fs / ff->sound_speed)));
  }
  return std::get<1>(model).get().ir_length - 1;
}

}  // namespace

RenderedScene render_scene(const SceneSpec& scene, const PropagationModel& model,
                           const ArrayGeometry& geom) {
  const double fs = scene.sample_rate;
  if (scene.sources.empty()) throw InvalidArgument("scene has no sources");
  if (scene.target_index >= scene.sources.size()) throw InvalidArgument("target index out of range");
  if (!(scene.duration_s > 0.0)) throw InvalidArgument("scene duration must be positive");
  const auto T = static_cast<std::size_t>(std::llround(scene.duration_s * fs));
  const std::size_t pad = render_padding(model, geom, fs);
  const std::size_t out_len = T + pad;
  const std::size_t n_mics = geom.size();
  const auto& k = kernels::active();

  const HrtfDataset* hrtf = nullptr;
  if (const auto* ref = std::get_if<1>(&model)) {
    hrtf = &ref->get();
    if (hrtf->sample_rate != fs) throw InvalidArgument("HRTF sample rate differs from the scene rate");
    if (hrtf->geometry.size() != n_mics) throw InvalidArgument("HRTF microphone count differs from geometry");
  }

  RenderedScene out{AudioBuffer::zeros(fs, n_mics, out_len), {}, std::nullopt};
  for (const auto& src : scene.sources) {
    const std::vector<double> x = fit_length(src.signal, T);
    const double gain = std::pow(10.0, src.gain_db / 20.0);
    AudioBuffer stem = AudioBuffer::zeros(fs, n_mics, out_len);
    if (hrtf) {
      const auto m = hrtf->grid.find(src.direction);
      if (!m) throw InvalidArgument("source direction is not on the HRTF grid");
      for (std::size_t n = 0; n < n_mics; ++n) {
        const auto ir = hrtf->ir(*m, n);
        const std::vector<double> h(ir.begin(), ir.end());
        auto y = convolve(x, h, gain);
        y.resize(out_len, 0.0);
        std::copy(y.begin(), y.end(), stem.channel(n).begin());
      }
    } else {
      const auto& ff = std::get<FreeFieldModel>(model);
      const double bulk = static_cast<double>(pad / 2);
      const auto tau = plane_wave_delays(geom, src.direction, ff.sound_speed);
      for (std::size_t n = 0; n < n_mics; ++n) {
        const FractionalDelay fd = fractional_delay(bulk + tau[n] * fs);
        auto y = stem.channel(n);
        for (std::size_t j = 0; j < fd.taps.size(); ++j) {
          const auto start = static_cast<std::size_t>(fd.shift + static_cast<long>(j));
          const std::size_t len = std::min(T, out_len - start);
          k.axpy(gain * fd.taps[j], x.data(), y.data() + start, len);
        }
      }
    }
    for (std::size_t n = 0; n < n_mics; ++n) {
      auto mix = out.mix.channel(n);
      const auto s = stem.channel(n);
      for (std::size_t i = 0; i < out_len; ++i) mix[i] += s[i];
    }
    out.stems.push_back(std::move(stem));
  }

  if (scene.sensor_noise_snr_db) {
    const auto target_front = out.stems[scene.target_index].channel(geom.frontmost_index());
    double p = 0.0;
    for (double v : target_front) p += v * v;
    p /= static_cast<double>(out_len);
    const double sigma = std::sqrt(p / std::pow(10.0, *scene.sensor_noise_snr_db / 10.0));
    std::mt19937_64 rng(scene.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    AudioBuffer noise = AudioBuffer::zeros(fs, n_mics, out_len);
    for (std::size_t n = 0; n < n_mics; ++n) {
      auto ch = noise.channel(n);
      auto mix = out.mix.channel(n);
      for (std::size_t i = 0; i < out_len; ++i) {
        ch[i] = sigma * gauss(rng);
        mix[i] += ch[i];
      }
    }
    out.sensor_noise = std::move(noise);
  }
  return out;
}

ReferenceSignals reference_signals(const SceneSpec& scene, const RenderedScene& rendered,
                                   const BeamformerFilters& bf, std::size_t frontmost_index) {
  const AudioBuffer& target = rendered.stems.at(scene.target_index);
  return {target.extract_channel(frontmost_index), rendered.mix.extract_channel(frontmost_index),
          filter_and_sum(bf, target), filter_and_sum(bf, rendered.mix)};
}

SceneSpec scene_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  try {
    SceneSpec s;
    s.sample_rate = j.value("sample_rate", 16000.0);
    s.duration_s = j.at("duration_s").get<double>();
    s.seed = j.value("seed", std::uint64_t{0});
    s.target_index = j.value("target_index", std::size_t{0});
    if (j.contains("sensor_noise_snr_db") && !j.at("sensor_noise_snr_db").is_null()) {
      s.sensor_noise_snr_db = j.at("sensor_noise_snr_db").get<double>();
    }
    const auto frames = static_cast<std::size_t>(std::llround(s.duration_s * s.sample_rate));
    for (const auto& src : j.at("sources")) {
      SourceSpec spec;
      spec.direction = Direction::make(src.at("direction")[0].get<double>(),
                                       src.at("direction")[1].get<double>());
      spec.gain_db = src.value("gain_db", 0.0);
      spec.reference = src.at("signal");
      const auto type = spec.reference.at("type").get<std::string>();
      if (type == "speech_shaped_noise") {
        spec.signal = speech_shaped_noise(s.sample_rate, frames,
                                          spec.reference.value("seed", std::uint64_t{0}));
      } else if (type == "wav") {
        std::filesystem::path p = spec.reference.at("path").get<std::string>();
        if (p.is_relative()) p = base_dir / p;
        const AudioBuffer wav = read_wav(p);
        if (wav.sample_rate() != s.sample_rate) {
          throw InvalidArgument("source " + p.string() + " is not at the scene sample rate");
        }
        const auto c = spec.reference.value("channel", std::size_t{0});
        const auto ch = wav.channel(c);
        spec.signal.assign(ch.begin(), ch.end());
      } else {
        throw InvalidArgument("unknown source signal type '" + type + "'");
      }
      s.sources.push_back(std::move(spec));
    }
    if (s.sources.empty()) throw InvalidArgument("scene has no sources");
    if (s.target_index >= s.sources.size()) throw InvalidArgument("target_index out of range");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("scene JSON: ") + e.what());
  }
}

}  // namespace rlsfi
