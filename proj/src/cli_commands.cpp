#include "rlsfi/cli_commands.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>

#include "CLI11.hpp"
#include "rlsfi/analysis.hpp"
#include "rlsfi/desired_response.hpp"
#include "rlsfi/dsp_engine.hpp"
#include "rlsfi/error.hpp"
#include "rlsfi/fir_synthesis.hpp"
#include "rlsfi/io.hpp"
#include "rlsfi/kernels.hpp"
#include "rlsfi/metrics.hpp"
#include "rlsfi/steering.hpp"
#include "rlsfi/wav.hpp"

namespace rlsfi::cli {

namespace fs = std::filesystem;
using nlohmann::json;

json RunConfig::to_json() const {
  json j = {{"geometry", geometry},
            {"frontmost_index", frontmost_index},
            {"free_field", free_field},
            {"hrtf", hrtf ? json(*hrtf) : json(nullptr)},
            {"sound_speed", sound_speed},
            {"gamma_db", linear_power_to_db(design.gamma)},
            {"look", {design.look.azimuth, design.look.elevation}},
            {"beamwidth", design.beamwidth_3db},
            {"taps", design.num_taps},
            {"fs", design.sample_rate},
            {"band", {design.band_lo, design.band_hi}},
            {"mode", mode},
            {"az_step", az_step},
            {"el_step", el_step},
            {"normalization", normalization},
            {"out", out.string()},
            {"seed", seed}};
  return j;
}

namespace {

Direction parse_look(const json& j) {
  if (!j.is_array() || j.size() != 2) throw InvalidArgument("look must be [azimuth, elevation]");
  return Direction::make(j[0].get<double>(), j[1].get<double>());
}

Direction parse_look(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw InvalidArgument("--look expects az,el (got '" + s + "')");
  try {
    std::size_t used_a = 0, used_e = 0;
    const std::string a = s.substr(0, comma), e = s.substr(comma + 1);
    const double az = std::stod(a, &used_a);
    const double el = std::stod(e, &used_e);
    if (used_a != a.size() || used_e != e.size()) throw std::invalid_argument(s);
    return Direction::make(az, el);
  } catch (const std::logic_error&) {
    throw InvalidArgument("--look expects az,el (got '" + s + "')");
  }
}

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
  static const std::vector<std::string> known = {
      "geometry", "frontmost_index", "free_field", "hrtf", "sound_speed", "gamma_db", "look",
      "beamwidth", "taps", "fs", "band", "mode", "az_step", "el_step", "normalization", "out", "seed"};
  if (!j.is_object()) throw InvalidArgument("config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw InvalidArgument("unknown config key '" + key + "'");
    }
  }
  try {
    RunConfig c;
    c.geometry = j.value("geometry", c.geometry);
    c.frontmost_index = j.value("frontmost_index", c.frontmost_index);
    c.free_field = j.value("free_field", c.free_field);
    if (j.contains("hrtf") && !j.at("hrtf").is_null()) c.hrtf = j.at("hrtf").get<std::string>();
    c.sound_speed = j.value("sound_speed", c.sound_speed);
    if (j.contains("gamma_db")) c.design.gamma = db_to_linear_power(j.at("gamma_db").get<double>());
    if (j.contains("look")) c.design.look = parse_look(j.at("look"));
    c.design.beamwidth_3db = j.value("beamwidth", c.design.beamwidth_3db);
    c.design.num_taps = j.value("taps", c.design.num_taps);
    c.design.sample_rate = j.value("fs", c.design.sample_rate);
    if (j.contains("band")) {
      const auto band = j.at("band").get<std::vector<double>>();
      if (band.size() != 2) throw InvalidArgument("band must be [lo_hz, hi_hz]");
      c.design.band_lo = band[0];
      c.design.band_hi = band[1];
    }
    c.mode = j.value("mode", c.mode);
    c.az_step = j.value("az_step", c.az_step);
    c.el_step = j.value("el_step", c.el_step);
    c.normalization = j.value("normalization", c.normalization);
    c.out = j.value("out", c.out.string());
    c.seed = j.value("seed", c.seed);
    return c;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
}

namespace {

// Command-line values; unset options leave the config file value alone.
struct Flags {
  std::optional<std::string> config, out, look, geometry, hrtf, mode, normalization;
  bool free_field = false;
  std::optional<double> gamma_db, beamwidth, fs, band_lo, band_hi, sound_speed, az_step, el_step;
  std::optional<std::size_t> taps;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App& sub, Flags& f) {
  sub.add_option("--config", f.config, "JSON config file; flags override its values");
  sub.add_option("--out", f.out, "Output directory");
  sub.add_option("--geometry", f.geometry, "builtin:head12, geometry JSON or CSV");
  sub.add_flag("--free-field", f.free_field, "Plane-wave steering from the geometry");
  sub.add_option("--hrtf", f.hrtf, "HRTF dataset manifest");
  sub.add_option("--sound-speed", f.sound_speed, "Speed of sound in m/s (free field)");
  sub.add_option("--gamma-db", f.gamma_db, "WNG floor in dB");
  sub.add_option("--look", f.look, "Look direction az,el in degrees");
  sub.add_option("--beamwidth", f.beamwidth, "3 dB main-lobe width in degrees");
  sub.add_option("--taps", f.taps, "FIR length L (even)");
  sub.add_option("--fs", f.fs, "Sample rate in Hz");
  sub.add_option("--band-lo", f.band_lo, "Analysis band lower edge in Hz");
  sub.add_option("--band-hi", f.band_hi, "Analysis band upper edge in Hz");
  sub.add_option("--mode", f.mode, "Desired response: 1d or 2d")->check(CLI::IsMember({"1d", "2d"}));
  sub.add_option("--az-step", f.az_step, "Azimuth grid step in degrees");
  sub.add_option("--el-step", f.el_step, "Elevation grid step in degrees");
  sub.add_option("--normalization", f.normalization, "global or plane[:elevation]");
  sub.add_option("--seed", f.seed, "Noise seed");
}

RunConfig resolve(const Flags& f) {
  RunConfig c = f.config ? RunConfig::from_json(io::read_json(*f.config)) : RunConfig{};
  if (f.out) c.out = *f.out;
  if (f.geometry) c.geometry = *f.geometry;
  if (f.free_field) c.free_field = true;
  if (f.hrtf) c.hrtf = *f.hrtf;
  if (f.sound_speed) c.sound_speed = *f.sound_speed;
  if (f.gamma_db) c.design.gamma = db_to_linear_power(*f.gamma_db);
  if (f.look) c.design.look = parse_look(*f.look);
  if (f.beamwidth) c.design.beamwidth_3db = *f.beamwidth;
  if (f.taps) c.design.num_taps = *f.taps;
  if (f.fs) c.design.sample_rate = *f.fs;
  if (f.band_lo) c.design.band_lo = *f.band_lo;
  if (f.band_hi) c.design.band_hi = *f.band_hi;
  if (f.mode) c.mode = *f.mode;
  if (f.az_step) c.az_step = *f.az_step;
  if (f.el_step) c.el_step = *f.el_step;
  if (f.normalization) c.normalization = *f.normalization;
  if (f.seed) c.seed = *f.seed;

  if (c.mode != "1d" && c.mode != "2d") throw InvalidArgument("mode must be 1d or 2d");
  if (!(c.sound_speed > 0.0)) throw InvalidArgument("sound speed must be positive");
  Normalization::parse(c.normalization);
  c.design.validate();
  return c;
}

void require_steering_choice(const RunConfig& c) {
  if (c.free_field == c.hrtf.has_value()) {
    throw InvalidArgument("choose exactly one of --free-field and --hrtf");
  }
}

// The output directory is left out so identical settings hash identically
// wherever they are written.
std::string config_hash(std::string_view command, const RunConfig& c, const json& extra = {}) {
  json cfg = c.to_json();
  cfg.erase("out");
  json j = {{"command", command}, {"config", cfg}, {"extra", extra}};
  return io::hex64(io::fnv1a64(j.dump()));
}

ArrayGeometry load_geometry(const RunConfig& c) {
  if (c.geometry == "builtin:head12") return head12_geometry();
  const fs::path p = c.geometry;
  if (p.extension() == ".csv") return load_geometry_csv(p, c.frontmost_index);
  const json j = io::read_json(p);
  try {
    return geometry_from_json(j);
  } catch (const json::exception& e) {
    throw FormatError(p.string() + ": " + e.what());
  }
}

// Everything that depends on the propagation model.
struct Acoustics {
  ArrayGeometry geom;
  std::optional<HrtfDataset> hrtf;
  double sound_speed = kDefaultSoundSpeed;

  PropagationModel model() const {
    if (hrtf) return std::cref(*hrtf);
    return FreeFieldModel{sound_speed};
  }
  json describe() const {
    if (hrtf) return {{"type", "hrtf"}};
    return {{"type", "free_field"}, {"sound_speed", sound_speed}};
  }
};

Acoustics load_acoustics(const RunConfig& c) {
  require_steering_choice(c);
  if (c.hrtf) {
    HrtfDataset ds = load_hrtf_dataset(*c.hrtf);
    ArrayGeometry g = ds.geometry;
    return {std::move(g), std::move(ds), c.sound_speed};
  }
  return {load_geometry(c), std::nullopt, c.sound_speed};
}

// Steering on every node the design or analysis needs.
SteeringSet steering_for(const Acoustics& a, const RunConfig& c, const FrequencyGrid& freqs) {
  if (a.hrtf) return hrtf_steering(*a.hrtf, freqs);
  return free_field_steering(a.geom, make_uniform_grid(c.az_step, c.el_step, true), freqs, a.sound_speed);
}

DesiredResponse desired_for(const RunConfig& c, const SteeringSet& steer) {
  if (c.mode == "1d") {
    return build_desired_1d(c.az_step, c.design.look.elevation, c.design.look, c.design.beamwidth_3db);
  }
  return build_desired_2d(steer.grid(), c.design.look, c.design.beamwidth_3db);
}

struct DesignOutcome {
  FrequencyDesign fd;
  BeamformerFilters bf;
  std::vector<std::pair<std::size_t, double>> clamps;
};

DesignOutcome run_design(const RunConfig& c, const SteeringSet& steer, std::ostream& err) {
  const DesiredResponse desired = desired_for(c, steer);
  std::mutex mu;
  std::vector<std::pair<std::size_t, double>> clamps;
  FrequencyDesign fd = design_broadband(steer, desired, c.design, [&](std::size_t q, double gmax) {
    std::lock_guard lock(mu);
    clamps.emplace_back(q, gmax);
  });
  std::sort(clamps.begin(), clamps.end());
  for (const auto& [q, gmax] : clamps) {
    err << "warning: bin " << q << " (" << fd.freqs.frequency(q) << " Hz): WNG floor "
        << linear_power_to_db(c.design.gamma) << " dB exceeds the feasibility bound "
        << linear_power_to_db(gmax) << " dB; clamped to " << linear_power_to_db(0.999 * gmax)
        << " dB\n";
  }
  BeamformerFilters bf = synthesize_fir(fd);
  return {std::move(fd), std::move(bf), std::move(clamps)};
}

void write_diagnostics_csv(const FrequencyDesign& fd, const fs::path& path, std::string_view hash) {
  const std::vector<std::string> header{"bin",        "frequency_hz",          "residual",
                                        "wng_db",     "feasibility_margin_db", "gamma_used_db",
                                        "lambda",     "stationarity",          "iterations",
                                        "clamped",    "single_point"};
  io::CsvWriter csv(path, hash, header);
  for (std::size_t q = 0; q < fd.diagnostics.size(); ++q) {
    const auto& d = fd.diagnostics[q];
    csv.row(q, fd.freqs.frequency(q), d.residual, linear_power_to_db(d.achieved_wng),
            d.feasibility_margin_db, linear_power_to_db(d.gamma_used), fd.multipliers[q],
            d.stationarity, d.iterations, static_cast<int>(d.clamped), static_cast<int>(d.single_point));
  }
}

int cmd_design(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const Acoustics a = load_acoustics(c);
  const FrequencyGrid freqs(c.design.sample_rate, c.design.num_taps);
  const SteeringSet steer = steering_for(a, c, freqs);
  DesignOutcome d = run_design(c, steer, err);

  fs::create_directories(c.out);
  const std::string hash = config_hash("design", c);
  json extra = {{"config", c.to_json()},
                {"config_hash", hash},
                {"steering", a.describe()},
                {"geometry", to_json(a.geom)}};
  save_design(d.fd, c.out / "design.json", extra);
  save_filters(d.bf, c.out / "filters.json");
  write_diagnostics_csv(d.fd, c.out / "diagnostics.csv", hash);
  write_desired_csv(desired_for(c, steer), c.out / "desired.csv", hash);

  const auto band = freqs.bins_in_band(c.design.band_lo, c.design.band_hi);
  double min_wng = std::numeric_limits<double>::infinity();
  for (std::size_t q : band) min_wng = std::min(min_wng, d.fd.diagnostics[q].achieved_wng);
  out << "design: " << freqs.num_bins() << " bins, " << a.geom.size() << " mics, "
      << d.fd.num_design_directions << " design directions, mode " << c.mode << "\n"
      << "min WNG in band: " << linear_power_to_db(min_wng) << " dB; clamped bins: " << d.clamps.size()
      << "\nwrote " << (c.out / "design.json").string() << ", " << (c.out / "filters.json").string()
      << "\n";
  return kOk;
}

int cmd_analyze(RunConfig c, const fs::path& design_path, std::optional<fs::path> filters_path,
                const Flags& flags, std::ostream& out) {
  json meta;
  const FrequencyDesign fd = load_design(design_path, &meta);
  // Steering and geometry default to what the design was made with.
  if (!flags.free_field && !flags.hrtf && !flags.config && meta.contains("config")) {
    const RunConfig stored = RunConfig::from_json(meta.at("config"));
    c.free_field = stored.free_field;
    c.hrtf = stored.hrtf;
    c.geometry = stored.geometry;
    c.frontmost_index = stored.frontmost_index;
    c.sound_speed = stored.sound_speed;
    if (!flags.az_step) c.az_step = stored.az_step;
    if (!flags.el_step) c.el_step = stored.el_step;
    if (!flags.band_lo) c.design.band_lo = stored.design.band_lo;
    if (!flags.band_hi) c.design.band_hi = stored.design.band_hi;
  }
  const Acoustics a = load_acoustics(c);
  if (a.geom.size() != fd.num_mics()) throw InvalidArgument("design and geometry disagree on mic count");

  if (!filters_path) {
    const fs::path sibling = design_path.parent_path() / "filters.json";
    if (fs::exists(sibling)) filters_path = sibling;
  }
  const BeamformerFilters bf = filters_path ? load_filters(*filters_path) : synthesize_fir(fd);
  if (bf.num_mics() != fd.num_mics() || bf.sample_rate != fd.freqs.sample_rate()) {
    throw InvalidArgument("filters do not match the design");
  }

  const SteeringSet steer = steering_for(a, c, fd.freqs);
  const auto bins = fd.freqs.bins_in_band(c.design.band_lo, c.design.band_hi);
  if (bins.empty()) throw InvalidArgument("analysis band contains no bins");

  const std::string hash = config_hash("analyze", c, {{"design", meta.value("config_hash", "")}});
  fs::create_directories(c.out);
  const BeampatternMap bp = beampattern(bf, steer, bins);
  write_beampattern_csv(bp, normalize_db(bp, Normalization::parse(c.normalization)),
                        c.out / "beampattern.csv", hash);
  const CurveReport wng = wng_curve(fd, bins);
  const CurveReport wng_fir = wng_curve_fir(bf, steer, fd.look, bins);
  const CurveReport di = directivity_index(bp, fd.look);
  write_curve_csv(wng, c.out / "wng.csv", hash);
  write_curve_csv(wng_fir, c.out / "wng_fir.csv", hash);
  write_curve_csv(di, c.out / "di.csv", hash);

  auto min_of = [](const CurveReport& r) { return *std::min_element(r.values.begin(), r.values.end()); };
  double di_mean = 0.0;
  for (double v : di.values) di_mean += v;
  di_mean /= static_cast<double>(di.values.size());
  out << "analyze: " << bins.size() << " bins in " << c.design.band_lo << "-" << c.design.band_hi
      << " Hz, " << steer.grid().size() << " directions\n"
      << "min WNG " << min_of(wng) << " dB (per-bin), " << min_of(wng_fir) << " dB (FIR); mean DI "
      << di_mean << " dB\n";
  return kOk;
}

int cmd_apply(const fs::path& filters_path, const fs::path& input, const fs::path& output,
              std::ostream& out) {
  const BeamformerFilters bf = load_filters(filters_path);
  const AudioBuffer x = read_wav(input);
  const AudioBuffer y = filter_and_sum(bf, x);
  if (output.has_parent_path()) fs::create_directories(output.parent_path());
  write_wav(y, output, WavFormat::Float32);
  out << "apply: " << x.channels() << " channels x " << x.frames() << " frames -> "
      << y.frames() << " frames, wrote " << output.string() << "\n";
  return kOk;
}

int cmd_synth(const RunConfig& c, const fs::path& scene_path, std::ostream& out) {
  const Acoustics a = load_acoustics(c);
  SceneSpec scene = scene_from_json(io::read_json(scene_path), scene_path.parent_path());
  if (scene.sample_rate != c.design.sample_rate) {
    throw InvalidArgument("scene sample rate differs from --fs");
  }
  const RenderedScene rs = render_scene(scene, a.model(), a.geom);
  fs::create_directories(c.out);
  write_wav(rs.mix, c.out / "mix.wav", WavFormat::Float32);
  for (std::size_t i = 0; i < rs.stems.size(); ++i) {
    write_wav(rs.stems[i], c.out / ("stem_" + std::to_string(i) + ".wav"), WavFormat::Float32);
  }
  if (rs.sensor_noise) write_wav(*rs.sensor_noise, c.out / "noise.wav", WavFormat::Float32);
  out << "synth: " << scene.sources.size() << " sources, " << rs.mix.channels() << " channels x "
      << rs.mix.frames() << " frames, wrote " << (c.out / "mix.wav").string() << "\n";
  return kOk;
}

int cmd_eval(const RunConfig& c, const std::optional<fs::path>& matrix_path, std::ostream& out,
             std::ostream& err) {
  const Acoustics a = load_acoustics(c);
  ScenarioMatrix m;
  fs::path base;
  if (matrix_path) {
    m = ScenarioMatrix::from_json(io::read_json(*matrix_path));
    base = matrix_path->parent_path();
  }
  if (m.sample_rate != c.design.sample_rate) throw InvalidArgument("matrix sample rate differs from --fs");
  if (c.seed != 0) m.seed = c.seed;
  const std::vector<ScenarioCell> cells = enumerate_scenarios(m, base);

  const FrequencyGrid freqs(c.design.sample_rate, c.design.num_taps);
  const SteeringSet steer = steering_for(a, c, freqs);
  std::vector<NamedFilters> designs;
  for (double az : m.target_azimuths) {
    for (const std::string mode : {"2d", "1d"}) {
      RunConfig dc = c;
      dc.mode = mode;
      dc.design.look = Direction::make(az, m.target_elevation);
      designs.push_back({mode, dc.design.look, run_design(dc, steer, err).bf});
    }
  }
  const ScenarioReport report = eval_scenario(designs, cells, a.model(), a.geom);
  const std::string hash = config_hash("eval", c, {{"matrix", matrix_path ? io::read_json(*matrix_path) : json()}});
  fs::create_directories(c.out);
  write_report_csv(report, c.out / "report.csv", hash);
  write_summary_csv(report, c.out / "summary.csv", hash);
  out << "eval: " << cells.size() << " cells, " << report.rows.size() << " rows\n";
  for (const auto& s : report.summary) {
    out << "  phi_ld " << s.phi_ld << " theta_int " << s.theta_int << " " << s.design_id << ": input "
        << s.mean_input_db << " dB, output " << s.mean_output_db << " dB\n";
  }
  return kOk;
}

int cmd_grid_info(const RunConfig& c, bool poles, std::ostream& out) {
  const DirectionGrid g = make_uniform_grid(c.az_step, c.el_step, poles);
  double wsum = 0.0;
  for (double w : g.weights()) wsum += w;
  const json j = {{"az_step", c.az_step},
                  {"el_step", c.el_step},
                  {"poles", poles},
                  {"num_directions", g.size()},
                  {"weight_sum", wsum},
                  {"hash", io::hex64(g.hash())},
                  {"kernels", std::string(kernels::isa_name(kernels::active().isa))}};
  out << j.dump(2) << "\n";
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Robust least-squares frequency-invariant beamformer design", "rlsfi"};
  app.require_subcommand(1);

  Flags f_design, f_analyze, f_synth, f_eval, f_grid;
  auto* design = app.add_subcommand("design", "Design per-bin weights and FIR filters");
  add_common(*design, f_design);

  auto* analyze = app.add_subcommand("analyze", "Beampattern, WNG and DI of a design");
  add_common(*analyze, f_analyze);
  std::string design_file;
  std::optional<std::string> filters_file;
  analyze->add_option("--design", design_file, "Design manifest")->required();
  analyze->add_option("--filters", filters_file, "Filter manifest (default: next to the design)");

  auto* apply = app.add_subcommand("apply", "Filter-and-sum a multichannel WAV");
  std::string apply_filters, apply_input, apply_output;
  apply->add_option("--filters", apply_filters, "Filter manifest")->required();
  apply->add_option("--input", apply_input, "Multichannel WAV")->required();
  apply->add_option("--output", apply_output, "Mono output WAV")->required();

  auto* synth = app.add_subcommand("synth", "Render an anechoic scene");
  add_common(*synth, f_synth);
  std::string scene_file;
  synth->add_option("--scene", scene_file, "Scene JSON")->required();

  auto* eval = app.add_subcommand("eval", "Two-source fwSegSNR evaluation over a scenario matrix");
  add_common(*eval, f_eval);
  std::optional<std::string> matrix_file;
  eval->add_option("--matrix", matrix_file, "Scenario matrix JSON (default: 7 x 7 x 2)");

  auto* grid = app.add_subcommand("grid-info", "Describe a uniform direction grid");
  add_common(*grid, f_grid);
  bool no_poles = false;
  grid->add_flag("--no-poles", no_poles, "Leave out the two poles");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, e_out;
    const int code = app.exit(e, o, e_out);
    out << o.str();
    err << e_out.str();
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*design) return cmd_design(resolve(f_design), out, err);
    if (*analyze) {
      return cmd_analyze(resolve(f_analyze), design_file,
                         filters_file ? std::optional<fs::path>(*filters_file) : std::nullopt, f_analyze, out);
    }
    if (*apply) return cmd_apply(apply_filters, apply_input, apply_output, out);
    if (*synth) return cmd_synth(resolve(f_synth), scene_file, out);
    if (*eval) {
      return cmd_eval(resolve(f_eval), matrix_file ? std::optional<fs::path>(*matrix_file) : std::nullopt,
                      out, err);
    }
    if (*grid) return cmd_grid_info(resolve(f_grid), !no_poles, out);
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kFormatError;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return kNumericalError;
  } catch (const FeasibilityError& e) {
    err << "error: " << e.what() << "\n";
    return kNumericalError;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }
  return kConfigError;
}

}  // namespace rlsfi::cli
