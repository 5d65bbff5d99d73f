#include "rlsfi/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <numbers>
#include <thread>

#include "rlsfi/error.hpp"
#include "rlsfi/fft.hpp"
#include "rlsfi/io.hpp"

namespace rlsfi {

void FwSegSnrParams::validate() const {
  if (!(frame_ms > 0.0)) throw InvalidArgument("frame length must be positive");
  if (!(overlap >= 0.0 && overlap < 1.0)) throw InvalidArgument("overlap must lie in [0, 1)");
  if (num_bands < 1) throw InvalidArgument("at least one band is required");
  if (!(clamp_lo < clamp_hi)) throw InvalidArgument("clamp_lo must be below clamp_hi");
  if (!(band_lo_hz >= 0.0)) throw InvalidArgument("band_lo_hz must be non-negative");
  if (!std::isfinite(weight_exponent)) throw InvalidArgument("weight exponent must be finite");
}

namespace {

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// [band][bin] triangular weights on the FFT bin frequencies.
std::vector<std::vector<double>> mel_filterbank(std::size_t bands, double f_lo, double fs,
                                                std::size_t nfft) {
  const std::size_t bins = nfft / 2 + 1;
  const double f_hi = fs / 2.0;
  if (!(f_lo < f_hi)) throw InvalidArgument("band_lo_hz must be below fs/2");
  const double m_lo = hz_to_mel(f_lo), m_hi = hz_to_mel(f_hi);
  std::vector<double> edge(bands + 2);
  for (std::size_t i = 0; i < edge.size(); ++i) {
    edge[i] = mel_to_hz(m_lo + (m_hi - m_lo) * static_cast<double>(i) / static_cast<double>(bands + 1));
  }
  std::vector<std::vector<double>> fb(bands, std::vector<double>(bins, 0.0));
  for (std::size_t j = 0; j < bands; ++j) {
    const double lo = edge[j], c = edge[j + 1], hi = edge[j + 2];
    bool any = false;
    for (std::size_t q = 0; q < bins; ++q) {
      const double f = static_cast<double>(q) * fs / static_cast<double>(nfft);
      double w = 0.0;
      if (f > lo && f <= c) w = (f - lo) / (c - lo);
      else if (f > c && f < hi) w = (hi - f) / (hi - c);
      fb[j][q] = w;
      any = any || w > 0.0;
    }
    if (!any) {
      // Narrower than the bin spacing: take the bin nearest the center.
      const auto q = static_cast<std::size_t>(std::lround(c * static_cast<double>(nfft) / fs));
      fb[j][std::min(q, bins - 1)] = 1.0;
    }
  }
  return fb;
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

FwSegSnrResult fwsegsnr(const AudioBuffer& ref, const AudioBuffer& test, const FwSegSnrParams& p) {
  p.validate();
  if (ref.channels() != 1 || test.channels() != 1) throw InvalidArgument("fwsegsnr expects mono signals");
  if (ref.sample_rate() != test.sample_rate()) throw InvalidArgument("sample rate mismatch");
  if (ref.frames() != test.frames()) {
    throw InvalidArgument("length mismatch: " + std::to_string(ref.frames()) + " vs " +
                          std::to_string(test.frames()));
  }
  const double fs = ref.sample_rate();
  const auto frame = static_cast<std::size_t>(std::lround(p.frame_ms * 1e-3 * fs));
  const auto hop = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(frame * (1.0 - p.overlap))));
  const std::size_t T = ref.frames();
  if (frame < 2 || T < frame) throw InvalidArgument("signal shorter than one frame");

  const std::size_t nfft = next_pow2(frame);
  const auto fb = mel_filterbank(p.num_bands, p.band_lo_hz, fs, nfft);
  std::vector<double> window(frame);
  for (std::size_t i = 0; i < frame; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                     static_cast<double>(frame - 1));
  }

  RealFft fft(nfft);
  std::vector<double> xr(frame), xt(frame);
  std::vector<std::complex<double>> sr(fft.num_bins()), st(fft.num_bins());
  std::vector<double> mag_ref(fft.num_bins()), mag_err(fft.num_bins());
  const double silence = std::pow(10.0, p.silence_dbfs / 10.0);
  const auto r = ref.channel(0), t = test.channel(0);

  FwSegSnrResult out;
  out.frames_total = (T - frame) / hop + 1;
  double total = 0.0;
  for (std::size_t m = 0; m < out.frames_total; ++m) {
    const std::size_t k0 = m * hop;
    double energy = 0.0;
    for (std::size_t i = 0; i < frame; ++i) {
      energy += r[k0 + i] * r[k0 + i];
      xr[i] = r[k0 + i] * window[i];
      xt[i] = t[k0 + i] * window[i];
    }
    if (energy / static_cast<double>(frame) < silence) continue;
    fft.forward(xr, sr);
    fft.forward(xt, st);
    for (std::size_t q = 0; q < sr.size(); ++q) {
      mag_ref[q] = std::abs(sr[q]);
      mag_err[q] = std::abs(sr[q] - st[q]);
    }
    double num = 0.0, den = 0.0;
    for (const auto& tri : fb) {
      double X = 0.0, E = 0.0;
      for (std::size_t q = 0; q < tri.size(); ++q) {
        if (tri[q] == 0.0) continue;
        X += tri[q] * mag_ref[q];
        E += tri[q] * mag_err[q];
      }
      double snr;
      if (E == 0.0) snr = p.clamp_hi;
      else if (X == 0.0) snr = p.clamp_lo;
      else snr = std::clamp(10.0 * std::log10((X * X) / (E * E)), p.clamp_lo, p.clamp_hi);
      const double w = std::pow(X, p.weight_exponent);
      num += w * snr;
      den += w;
    }
    if (den == 0.0) continue;
    total += num / den;
    ++out.frames_scored;
  }
  if (out.frames_scored == 0) throw InvalidArgument("every frame of the reference is silent");
  out.score_db = total / static_cast<double>(out.frames_scored);
  return out;
}

ScenarioMatrix ScenarioMatrix::from_json(const nlohmann::json& j) {
  try {
    ScenarioMatrix m;
    if (j.contains("target_azimuths")) m.target_azimuths = j.at("target_azimuths").get<std::vector<double>>();
    m.target_elevation = j.value("target_elevation", m.target_elevation);
    if (j.contains("interferer_azimuths")) {
      m.interferer_azimuths = j.at("interferer_azimuths").get<std::vector<double>>();
    }
    if (j.contains("interferer_elevations")) {
      m.interferer_elevations = j.at("interferer_elevations").get<std::vector<double>>();
    }
    m.sample_rate = j.value("sample_rate", m.sample_rate);
    m.duration_s = j.value("duration_s", m.duration_s);
    m.interferer_gain_db = j.value("interferer_gain_db", m.interferer_gain_db);
    if (j.contains("sensor_noise_snr_db") && !j.at("sensor_noise_snr_db").is_null()) {
      m.sensor_noise_snr_db = j.at("sensor_noise_snr_db").get<double>();
    }
    if (j.contains("target_signal")) m.target_signal = j.at("target_signal");
    if (j.contains("interferer_signal")) m.interferer_signal = j.at("interferer_signal");
    m.seed = j.value("seed", m.seed);
    if (m.target_azimuths.empty() || m.interferer_azimuths.empty() || m.interferer_elevations.empty()) {
      throw InvalidArgument("scenario matrix has an empty axis");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("scenario matrix JSON: ") + e.what());
  }
}

std::vector<ScenarioCell> enumerate_scenarios(const ScenarioMatrix& m,
                                              const std::filesystem::path& base_dir) {
  // Load each signal once through the scene parser.
  const nlohmann::json proto = {
      {"sample_rate", m.sample_rate},
      {"duration_s", m.duration_s},
      {"sources",
       {{{"direction", {0.0, 90.0}}, {"signal", m.target_signal}},
        {{"direction", {0.0, 90.0}}, {"signal", m.interferer_signal}}}}};
  const SceneSpec base = scene_from_json(proto, base_dir);

  std::vector<ScenarioCell> cells;
  for (double th_int : m.interferer_elevations) {
    for (double phi_ld : m.target_azimuths) {
      for (double phi_int : m.interferer_azimuths) {
        ScenarioCell c;
        c.target = Direction::make(phi_ld, m.target_elevation);
        c.interferer = Direction::make(phi_int, th_int);
        c.scene = base;
        c.scene.sources[0].direction = c.target;
        c.scene.sources[1].direction = c.interferer;
        c.scene.sources[1].gain_db = m.interferer_gain_db;
        c.scene.sensor_noise_snr_db = m.sensor_noise_snr_db;
        c.scene.seed = m.seed;
        c.scene.target_index = 0;
        cells.push_back(std::move(c));
      }
    }
  }
  return cells;
}

std::vector<ScenarioSummaryRow> summarize(const std::vector<ScenarioRow>& rows) {
  std::vector<ScenarioSummaryRow> out;
  std::vector<std::vector<const ScenarioRow*>> members;
  for (const auto& r : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const ScenarioSummaryRow& s) {
      return s.phi_ld == r.phi_ld && s.theta_int == r.theta_int && s.design_id == r.design_id;
    });
    if (it == out.end()) {
      out.push_back({r.phi_ld, r.theta_int, r.design_id, 0.0, 0.0, 0});
      members.emplace_back();
      it = out.end() - 1;
    }
    members[static_cast<std::size_t>(it - out.begin())].push_back(&r);
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    double in = 0.0, o = 0.0;
    for (const auto* r : members[i]) {
      in += r->input_db;
      o += r->output_db;
    }
    const auto n = static_cast<double>(members[i].size());
    out[i].mean_input_db = in / n;
    out[i].mean_output_db = o / n;
    out[i].count = members[i].size();
  }
  return out;
}

ScenarioReport eval_scenario(const std::vector<NamedFilters>& designs,
                             const std::vector<ScenarioCell>& cells, const PropagationModel& model,
                             const ArrayGeometry& geom, const FwSegSnrParams& p) {
  p.validate();
  if (designs.empty()) throw InvalidArgument("no designs to evaluate");
  for (const auto& d : designs) {
    if (d.filters.num_mics() != geom.size()) {
      throw InvalidArgument("design '" + d.id + "' has " + std::to_string(d.filters.num_mics()) +
                            " channels, geometry has " + std::to_string(geom.size()));
    }
    if (d.filters.sample_rate != designs.front().filters.sample_rate) {
      throw InvalidArgument("designs disagree on sample rate");
    }
  }
  std::vector<std::vector<const NamedFilters*>> matched(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (const auto& d : designs) {
      if (great_circle_distance(d.look, cells[c].target) < 1e-6) matched[c].push_back(&d);
    }
    if (matched[c].empty()) {
      throw InvalidArgument("no design steered to target (" + std::to_string(cells[c].target.azimuth) +
                            ", " + std::to_string(cells[c].target.elevation) + ")");
    }
  }

  std::vector<std::vector<ScenarioRow>> per_cell(cells.size());
  std::vector<std::exception_ptr> errors(cells.size());
  const std::size_t front = geom.frontmost_index();
  auto run = [&](std::size_t c) {
    try {
      const auto& cell = cells[c];
      const RenderedScene rs = render_scene(cell.scene, model, geom);
      const double input_db =
          fwsegsnr(rs.stems[0].extract_channel(front), rs.mix.extract_channel(front), p).score_db;
      for (const NamedFilters* d : matched[c]) {
        const ReferenceSignals sig = reference_signals(cell.scene, rs, d->filters, front);
        const double output_db = fwsegsnr(sig.output_ref, sig.output_test, p).score_db;
        per_cell[c].push_back({cell.target.azimuth, cell.interferer.elevation, cell.interferer.azimuth,
                               d->id, input_db, output_db});
      }
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };
  const std::size_t workers =
      std::min<std::size_t>(cells.size(), std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t c = 0; c < cells.size(); ++c) run(c);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t c = w; c < cells.size(); c += workers) run(c);
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  ScenarioReport report;
  for (auto& rows : per_cell) {
    for (auto& r : rows) report.rows.push_back(std::move(r));
  }
  report.summary = summarize(report.rows);
  return report;
}

void write_report_csv(const ScenarioReport& report, const std::filesystem::path& path,
                      std::string_view config_hash) {
  const std::vector<std::string> header{"phi_ld", "theta_int", "phi_int", "design_id", "input_dB", "output_dB"};
  io::CsvWriter csv(path, config_hash, header);
  for (const auto& r : report.rows) {
    csv.row(r.phi_ld, r.theta_int, r.phi_int, r.design_id, r.input_db, r.output_db);
  }
}

void write_summary_csv(const ScenarioReport& report, const std::filesystem::path& path,
                       std::string_view config_hash) {
  const std::vector<std::string> header{"phi_ld",         "theta_int",       "design_id",
                                        "mean_input_dB", "mean_output_dB", "count"};
  io::CsvWriter csv(path, config_hash, header);
  for (const auto& s : report.summary) {
    csv.row(s.phi_ld, s.theta_int, s.design_id, s.mean_input_db, s.mean_output_db, s.count);
  }
}

}  // namespace rlsfi
