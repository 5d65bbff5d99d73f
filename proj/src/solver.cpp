#include "rlsfi/solver.hpp"

#include <Eigen/Householder>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "rlsfi/error.hpp"
#include "rlsfi/io.hpp"

namespace rlsfi {

namespace {

constexpr int kMaxBisection = 200;
constexpr int kMaxDoublings = 2100;

bool all_finite(const Eigen::MatrixXcd& m) {
  return m.real().allFinite() && m.imag().allFinite();
}

// Tikhonov path of min ||A z - r||^2 + lambda ||z||^2 from the thin SVD
// A = P S V^H. Directions with negligible singular values are dropped, so
// lambda = 0 yields the minimum-norm least-squares solution.
class TikhonovPath {
 public:
  TikhonovPath(const Eigen::MatrixXcd& A, const Eigen::VectorXcd& r)
      : svd_(A, Eigen::ComputeThinU | Eigen::ComputeThinV) {
    const Eigen::VectorXd& s = svd_.singularValues();
    const Eigen::Index k = s.size();
    const double smax = k > 0 ? s(0) : 0.0;
    const double tol =
        smax * static_cast<double>(std::max(A.rows(), A.cols())) * std::numeric_limits<double>::epsilon();
    rank_ = 0;
    while (rank_ < k && s(rank_) > tol) ++rank_;
    s_ = s.head(rank_);
    c_ = svd_.matrixU().leftCols(rank_).adjoint() * r;
  }

  double norm2(double lambda) const {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < rank_; ++i) {
      const double f = s_(i) * std::abs(c_(i)) / (s_(i) * s_(i) + lambda);
      acc += f * f;
    }
    return acc;
  }

  Eigen::VectorXcd solve(double lambda) const {
    Eigen::VectorXcd scaled(rank_);
    for (Eigen::Index i = 0; i < rank_; ++i) scaled(i) = c_(i) * (s_(i) / (s_(i) * s_(i) + lambda));
    return svd_.matrixV().leftCols(rank_) * scaled;
  }

 private:
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd_;
  Eigen::Index rank_ = 0;
  Eigen::VectorXd s_;
  Eigen::VectorXcd c_;
};

struct MultiplierSearch {
  double lambda;
  int iterations;
};

// Smallest lambda >= 0 with ||z(lambda)||^2 <= rho2; the returned point is
// always on the feasible side.
MultiplierSearch find_multiplier(const TikhonovPath& path, double rho2) {
  if (path.norm2(0.0) <= rho2) return {0.0, 0};

  double hi = 1.0;
  int doublings = 0;
  while (path.norm2(hi) > rho2) {
    hi *= 2.0;
    if (++doublings > kMaxDoublings || !std::isfinite(hi)) {
      throw NumericalError("multiplier bracket search diverged (lambda_hi = " +
                           std::to_string(hi) + ")");
    }
  }
  double lo = doublings > 0 ? 0.5 * hi : 0.0;

  for (int it = 0; it < kMaxBisection; ++it) {
    const double gap = rho2 - path.norm2(hi);
    if (gap <= 1e-14 * rho2 || hi - lo <= 1e-15 * hi) return {hi, it};
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) return {hi, it};
    if (path.norm2(mid) > rho2) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  std::ostringstream msg;
  msg.precision(17);
  msg << "multiplier bisection did not converge after " << kMaxBisection
      << " iterations (bracket [" << lo << ", " << hi << "], ||z(hi)||^2 = " << path.norm2(hi)
      << ", rho^2 = " << rho2 << ")";
  throw NumericalError(msg.str());
}

std::string bin_prefix(std::size_t q) { return "bin " + std::to_string(q) + ": "; }

// Maps every desired-grid direction to its index in the steering grid.
std::vector<std::size_t> match_directions(const DirectionGrid& haystack,
                                          const DirectionGrid& needles) {
  auto key = [](const Direction& d) {
    const Eigen::Vector3d u = unit_vector(d);
    std::ostringstream k;
    k << std::llround(u.x() * 1e9) << ':' << std::llround(u.y() * 1e9) << ':'
      << std::llround(u.z() * 1e9);
    return k.str();
  };
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t m = haystack.size(); m-- > 0;) index[key(haystack[m])] = m;
  std::vector<std::size_t> out;
  out.reserve(needles.size());
  for (const auto& d : needles.directions()) {
    if (auto it = index.find(key(d)); it != index.end()) {
      out.push_back(it->second);
    } else if (auto m = haystack.find(d)) {
      out.push_back(*m);
    } else {
      std::ostringstream msg;
      msg << "design direction (" << d.azimuth << ", " << d.elevation
          << ") is not covered by the steering grid";
      throw InvalidArgument(msg.str());
    }
  }
  return out;
}

void rethrow_for_bin(std::size_t q, const std::exception_ptr& err) {
  try {
    std::rethrow_exception(err);
  } catch (const FeasibilityError& e) {
    throw FeasibilityError(bin_prefix(q) + e.what(), e.gamma_max());
  } catch (const NumericalError& e) {
    throw NumericalError(bin_prefix(q) + e.what());
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(bin_prefix(q) + e.what());
  }
}

}  // namespace

double db_to_linear_power(double db) { return std::pow(10.0, db / 10.0); }
double linear_power_to_db(double x) { return 10.0 * std::log10(x); }

void DesignConfig::validate() const {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidArgument("WNG floor gamma must be > 0");
  if (num_taps < 2 || num_taps % 2 != 0) throw InvalidArgument("filter length L must be even");
  if (!(sample_rate > 0.0)) throw InvalidArgument("sample rate must be positive");
  if (!(band_lo >= 0.0 && band_lo < band_hi && band_hi <= 0.5 * sample_rate)) {
    throw InvalidArgument("analysis band must satisfy 0 <= lo < hi <= fs/2");
  }
  (void)Direction::make(look.azimuth, look.elevation);
}

double feasibility_bound(const Eigen::VectorXcd& d) {
  const double n2 = d.squaredNorm();
  if (d.size() == 0 || !(n2 > 0.0)) throw InvalidArgument("steering vector must be nonzero");
  return n2;
}

FrequencySolution solve_frequency(const Eigen::MatrixXcd& G, const Eigen::VectorXd& b_hat,
                                  const Eigen::VectorXcd& d, double gamma) {
  const Eigen::Index M = G.rows();
  const Eigen::Index N = G.cols();
  if (M < 1 || N < 1) throw InvalidArgument("G must have at least one row and one column");
  if (b_hat.size() != M) throw InvalidArgument("b_hat length does not match the rows of G");
  if (d.size() != N) throw InvalidArgument("d length does not match the columns of G");
  if (!all_finite(G) || !b_hat.allFinite() || !all_finite(d)) {
    throw InvalidArgument("non-finite entries in G, b_hat or d");
  }
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidArgument("gamma must be > 0");

  const double d_norm2 = feasibility_bound(d);
  if (gamma > d_norm2 * (1.0 + 1e-12)) {
    throw FeasibilityError("WNG floor " + std::to_string(gamma) + " exceeds the feasible maximum " +
                               std::to_string(d_norm2),
                           d_norm2);
  }

  FrequencySolution out;
  const Eigen::VectorXcd w_p = d.conjugate() / d_norm2;
  const double rho2 = std::max(0.0, 1.0 / gamma - 1.0 / d_norm2);

  Eigen::VectorXcd z;
  Eigen::MatrixXcd U;
  Eigen::MatrixXcd A;
  Eigen::VectorXcd r = b_hat.cast<std::complex<double>>() - G * w_p;
  if (N > 1) {
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(Eigen::MatrixXcd(d.conjugate()));
    const Eigen::MatrixXcd Q = qr.householderQ() * Eigen::MatrixXcd::Identity(N, N);
    U = Q.rightCols(N - 1);
    A = G * U;
  }

  if (N == 1 || rho2 == 0.0) {
    z = Eigen::VectorXcd::Zero(N - 1);
    out.diagnostics.single_point = true;
  } else {
    const TikhonovPath path(A, r);
    const MultiplierSearch ms = find_multiplier(path, rho2);
    out.lambda = ms.lambda;
    out.diagnostics.iterations = ms.iterations;
    z = path.solve(ms.lambda);
  }

  out.w = N > 1 ? Eigen::VectorXcd(w_p + U * z) : w_p;

  auto& diag = out.diagnostics;
  diag.gamma_used = gamma;
  diag.residual = (G * out.w - b_hat.cast<std::complex<double>>()).norm();
  diag.achieved_wng = std::norm(out.w.cwiseProduct(d).sum()) / out.w.squaredNorm();
  diag.feasibility_margin_db = linear_power_to_db(d_norm2 / gamma);
  if (N > 1 && !diag.single_point) {
    const double scale = (A.adjoint() * r).norm();
    const double stat = (A.adjoint() * (A * z - r) + out.lambda * z).norm();
    diag.stationarity = scale > 0.0 ? stat / scale : stat;
  }
  return out;
}

FrequencyDesign design_broadband(const SteeringSet& steer, const DesiredResponse& desired,
                                 const DesignConfig& cfg, const ClampCallback& on_clamp) {
  cfg.validate();
  if (steer.freqs().num_taps() != cfg.num_taps || steer.freqs().sample_rate() != cfg.sample_rate) {
    throw InvalidArgument("steering frequency grid does not match the design configuration");
  }
  if (desired.values.size() != desired.grid.size()) {
    throw InvalidArgument("desired response size does not match its grid");
  }
  const auto look_index = steer.grid().find(cfg.look);
  if (!look_index) throw InvalidArgument("look direction is not a node of the steering grid");
  if (great_circle_distance(desired.grid[desired.look_index], cfg.look) > 1e-6) {
    throw InvalidArgument("desired response is centered on a different look direction");
  }
  const std::vector<std::size_t> rows = match_directions(steer.grid(), desired.grid);
  const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(
      desired.values.data(), static_cast<Eigen::Index>(desired.values.size()));

  const std::size_t n_bins = steer.freqs().num_bins();
  const auto n_mics = static_cast<Eigen::Index>(steer.num_mics());

  FrequencyDesign fd{steer.freqs(),
                     Eigen::MatrixXcd(static_cast<Eigen::Index>(n_bins), n_mics),
                     Eigen::MatrixXcd(static_cast<Eigen::Index>(n_bins), n_mics),
                     std::vector<double>(n_bins),
                     std::vector<BinDiagnostics>(n_bins),
                     cfg.gamma,
                     steer.grid()[*look_index],
                     cfg.beamwidth_3db,
                     cfg.band_lo,
                     cfg.band_hi,
                     steer.grid().hash(),
                     rows.size()};
  std::vector<std::exception_ptr> errors(n_bins);

  auto solve_bin = [&](std::size_t q) {
    try {
      const auto drow = steer.row(q, *look_index);
      Eigen::VectorXcd d(n_mics);
      for (Eigen::Index n = 0; n < n_mics; ++n) d(n) = drow[static_cast<std::size_t>(n)];
      const Eigen::MatrixXcd G = steering_submatrix(steer, q, rows);
      const double gamma_max = feasibility_bound(d);
      double gamma = cfg.gamma;
      bool clamped = false;
      if (gamma > gamma_max * (1.0 + 1e-12)) {
        gamma = 0.999 * gamma_max;
        clamped = true;
      }
      FrequencySolution sol = solve_frequency(G, b, d, gamma);
      sol.diagnostics.clamped = clamped;
      const auto qi = static_cast<Eigen::Index>(q);
      fd.weights.row(qi) = sol.w.transpose();
      fd.look_steering.row(qi) = d.transpose();
      fd.multipliers[q] = sol.lambda;
      fd.diagnostics[q] = sol.diagnostics;
    } catch (...) {
      errors[q] = std::current_exception();
    }
  };

  const std::size_t n_threads =
      std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, n_bins);
  if (n_threads == 1) {
    for (std::size_t q = 0; q < n_bins; ++q) solve_bin(q);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t q = t; q < n_bins; q += n_threads) solve_bin(q);
      });
    }
  }

  for (std::size_t q = 0; q < n_bins; ++q) {
    if (errors[q]) rethrow_for_bin(q, errors[q]);
    if (fd.diagnostics[q].clamped && on_clamp) {
      on_clamp(q, feasibility_bound(fd.look_steering.row(static_cast<Eigen::Index>(q)).transpose()));
    }
  }
  return fd;
}

void save_design(const FrequencyDesign& fd, const std::filesystem::path& manifest,
                 const nlohmann::json& extra) {
  const std::string data_file = manifest.stem().string() + ".bin";
  nlohmann::json diags = nlohmann::json::array();
  for (std::size_t q = 0; q < fd.diagnostics.size(); ++q) {
    const auto& dg = fd.diagnostics[q];
    diags.push_back({{"bin", q},
                     {"frequency_hz", fd.freqs.frequency(q)},
                     {"residual", dg.residual},
                     {"achieved_wng", dg.achieved_wng},
                     {"feasibility_margin_db", dg.feasibility_margin_db},
                     {"gamma_used", dg.gamma_used},
                     {"stationarity", dg.stationarity},
                     {"iterations", dg.iterations},
                     {"clamped", dg.clamped},
                     {"single_point", dg.single_point}});
  }
  nlohmann::json doc = extra;
  doc.update({
      {"format", "rlsfi-design"},
      {"version", 1},
      {"num_bins", fd.freqs.num_bins()},
      {"num_mics", fd.num_mics()},
      {"num_taps", fd.freqs.num_taps()},
      {"sample_rate_hz", fd.freqs.sample_rate()},
      {"gamma_linear", fd.gamma},
      {"gamma_db", linear_power_to_db(fd.gamma)},
      {"look", {fd.look.azimuth, fd.look.elevation}},
      {"beamwidth_3db_deg", fd.beamwidth_3db},
      {"band_hz", {fd.band_lo, fd.band_hi}},
      {"grid_hash", io::hex64(fd.grid_hash)},
      {"num_design_directions", fd.num_design_directions},
      {"sample_format", "complex64le"},
      {"layout", "weights[bin][mic], look_steering[bin][mic]"},
      {"data_file", data_file},
      {"multipliers", fd.multipliers},
      {"diagnostics", diags},
  });
  std::vector<unsigned char> payload;
  payload.reserve(static_cast<std::size_t>(fd.weights.size()) * 16);
  for (const Eigen::MatrixXcd* m : {&fd.weights, &fd.look_steering}) {
    for (Eigen::Index q = 0; q < m->rows(); ++q) {
      for (Eigen::Index n = 0; n < m->cols(); ++n) {
        io::append_f32le(payload, static_cast<float>((*m)(q, n).real()));
        io::append_f32le(payload, static_cast<float>((*m)(q, n).imag()));
      }
    }
  }
  io::write_json(manifest, doc);
  io::write_bytes(manifest.parent_path() / data_file, payload);
}

FrequencyDesign load_design(const std::filesystem::path& manifest, nlohmann::json* metadata) {
  const nlohmann::json doc = io::read_json(manifest);
  try {
    if (doc.at("format").get<std::string>() != "rlsfi-design" || doc.at("version").get<int>() != 1) {
      throw FormatError(manifest.string() + " is not a version-1 design file");
    }
    const FrequencyGrid freqs(doc.at("sample_rate_hz").get<double>(),
                              doc.at("num_taps").get<std::size_t>());
    const auto n_bins = doc.at("num_bins").get<std::size_t>();
    const auto n_mics = doc.at("num_mics").get<std::size_t>();
    if (n_bins != freqs.num_bins() || n_mics == 0) {
      throw FormatError("design file dimensions are inconsistent");
    }
    const auto data_file = doc.at("data_file").get<std::string>();
    const auto payload = io::read_bytes(manifest.parent_path() / data_file);
    const std::uint64_t expected = 2ULL * n_bins * n_mics * 8;
    if (payload.size() != expected) {
      throw FormatError("design payload " + data_file + " has " + std::to_string(payload.size()) +
                            " bytes, expected " + std::to_string(expected),
                        std::min<std::uint64_t>(payload.size(), expected));
    }
    FrequencyDesign fd{freqs,
                       Eigen::MatrixXcd(static_cast<Eigen::Index>(n_bins), static_cast<Eigen::Index>(n_mics)),
                       Eigen::MatrixXcd(static_cast<Eigen::Index>(n_bins), static_cast<Eigen::Index>(n_mics)),
                       doc.at("multipliers").get<std::vector<double>>(),
                       std::vector<BinDiagnostics>(n_bins),
                       doc.at("gamma_linear").get<double>(),
                       Direction::make(doc.at("look")[0].get<double>(), doc.at("look")[1].get<double>()),
                       doc.at("beamwidth_3db_deg").get<double>(),
                       doc.at("band_hz")[0].get<double>(),
                       doc.at("band_hz")[1].get<double>(),
                       std::stoull(doc.at("grid_hash").get<std::string>(), nullptr, 16),
                       doc.at("num_design_directions").get<std::size_t>()};
    std::size_t off = 0;
    for (Eigen::MatrixXcd* m : {&fd.weights, &fd.look_steering}) {
      for (Eigen::Index q = 0; q < m->rows(); ++q) {
        for (Eigen::Index n = 0; n < m->cols(); ++n) {
          const float re = io::read_f32le(payload.data() + off);
          const float im = io::read_f32le(payload.data() + off + 4);
          if (!std::isfinite(re) || !std::isfinite(im)) {
            throw FormatError("non-finite value in design payload " + data_file, off);
          }
          (*m)(q, n) = {re, im};
          off += 8;
        }
      }
    }
    const auto& diags = doc.at("diagnostics");
    if (diags.size() != n_bins) throw FormatError("diagnostics count does not match bins");
    for (std::size_t q = 0; q < n_bins; ++q) {
      const auto& j = diags[q];
      auto& dg = fd.diagnostics[q];
      dg.residual = j.at("residual").get<double>();
      dg.achieved_wng = j.at("achieved_wng").get<double>();
      dg.feasibility_margin_db = j.at("feasibility_margin_db").get<double>();
      dg.gamma_used = j.at("gamma_used").get<double>();
      dg.stationarity = j.at("stationarity").get<double>();
      dg.iterations = j.at("iterations").get<int>();
      dg.clamped = j.at("clamped").get<bool>();
      dg.single_point = j.at("single_point").get<bool>();
    }
    if (fd.multipliers.size() != n_bins) throw FormatError("multiplier count does not match bins");
    if (metadata) *metadata = doc;
    return fd;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(manifest.string() + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw FormatError(manifest.string() + ": " + e.what());
  }
}

}  // namespace rlsfi
