#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "rlsfi/error.hpp"
#include "rlsfi/solver.hpp"

using namespace rlsfi;
using cd = std::complex<double>;

namespace {

struct Instance {
  Eigen::MatrixXcd G;
  Eigen::VectorXd b;
  Eigen::VectorXcd d;
  double gamma;
};

Instance random_instance(std::mt19937_64& rng, Eigen::Index n, Eigen::Index m, double gamma_fraction) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  // Column scale spread over two decades so both constraint regimes occur.
  const double scale = std::pow(10.0, -2.0 * u(rng));
  Instance in{scale * oracle::random_complex(rng, m, n), Eigen::VectorXd(m), oracle::random_unit_modulus(rng, n),
              0.0};
  for (Eigen::Index i = 0; i < m; ++i) in.b(i) = u(rng);
  in.gamma = gamma_fraction * in.d.squaredNorm();
  return in;
}

double objective(const Instance& in, const Eigen::VectorXcd& w) { return (in.G * w - in.b.cast<cd>()).squaredNorm(); }

void check_kkt(const Instance& in, const FrequencySolution& s) {
  const double cap = 1.0 / in.gamma;
  CHECK(std::abs((s.w.transpose() * in.d).value() - cd(1.0)) <= 1e-9);
  CHECK(s.w.squaredNorm() <= cap * (1.0 + 1e-8));
  CHECK(s.lambda >= 0.0);
  CHECK(std::abs(s.lambda * (s.w.squaredNorm() - cap)) <= 1e-8 * cap);
  if (!s.diagnostics.single_point) CHECK(s.diagnostics.stationarity <= 1e-6);
  const double wng = std::norm((s.w.transpose() * in.d).value()) / s.w.squaredNorm();
  CHECK(wng >= in.gamma * (1.0 - 1e-12));
}

}  // namespace

TEST_CASE("dB conversions") {
  CHECK(db_to_linear_power(-20.0) == doctest::Approx(0.01));
  CHECK(linear_power_to_db(12.0) == doctest::Approx(10.7918).epsilon(1e-5));
}

TEST_CASE("feasibility bound") {
  Eigen::VectorXcd d(2);
  d << 2.0, 0.0;
  CHECK(feasibility_bound(d) == 4.0);
  std::mt19937_64 rng(1);
  CHECK(feasibility_bound(oracle::random_unit_modulus(rng, 12)) == doctest::Approx(12.0));
  CHECK_THROWS_AS(feasibility_bound(Eigen::VectorXcd::Zero(3)), InvalidArgument);
}

TEST_CASE("maximum gamma forces delay-and-sum weights") {
  std::mt19937_64 rng(2);
  auto in = random_instance(rng, 12, 40, 1.0);
  const auto s = solve_frequency(in.G, in.b, in.d, in.gamma);
  CHECK((s.w - in.d.conjugate() / 12.0).norm() <= 1e-14);
  CHECK(s.diagnostics.single_point);
  CHECK(s.lambda == 0.0);
  check_kkt(in, s);
}

TEST_CASE("d = [2, 0] at its bound") {
  Eigen::MatrixXcd G = Eigen::MatrixXcd::Identity(3, 2);
  Eigen::VectorXd b = Eigen::VectorXd::Ones(3);
  Eigen::VectorXcd d(2);
  d << 2.0, 0.0;
  const auto s = solve_frequency(G, b, d, 4.0);
  CHECK(std::abs(s.w(0) - cd(0.5)) < 1e-15);
  CHECK(std::abs(s.w(1)) < 1e-15);
}

TEST_CASE("single microphone: the equality constraint fixes w") {
  Eigen::MatrixXcd G(1, 1);
  G << cd(0.6, -0.8);
  Eigen::VectorXd b(1);
  b << 1.0;
  const Eigen::VectorXcd d = G.row(0).transpose();
  const auto s = solve_frequency(G, b, d, 0.5);
  CHECK(std::abs(s.w(0) - 1.0 / G(0, 0)) < 1e-15);
  CHECK(s.lambda == 0.0);
}

TEST_CASE("infeasible gamma reports the bound") {
  std::mt19937_64 rng(3);
  auto in = random_instance(rng, 4, 10, 1.0);
  try {
    solve_frequency(in.G, in.b, in.d, 4.5);
    FAIL("expected FeasibilityError");
  } catch (const FeasibilityError& e) {
    CHECK(e.gamma_max() == doctest::Approx(4.0));
  }
  // Within the 1e-12 slack is accepted.
  CHECK_NOTHROW(solve_frequency(in.G, in.b, in.d, 4.0 * (1.0 + 1e-13)));
}

TEST_CASE("invalid input") {
  std::mt19937_64 rng(4);
  auto in = random_instance(rng, 4, 10, 0.1);
  CHECK_THROWS_AS(solve_frequency(in.G, in.b.head(9), in.d, in.gamma), InvalidArgument);
  CHECK_THROWS_AS(solve_frequency(in.G, in.b, in.d.head(3), in.gamma), InvalidArgument);
  CHECK_THROWS_AS(solve_frequency(in.G, in.b, in.d, 0.0), InvalidArgument);
  auto bad = in.G;
  bad(0, 0) = cd(NAN, 0.0);
  CHECK_THROWS_AS(solve_frequency(bad, in.b, in.d, in.gamma), InvalidArgument);
  CHECK_THROWS_AS(solve_frequency(Eigen::MatrixXcd(0, 4), Eigen::VectorXd(0), in.d, in.gamma), InvalidArgument);
}

TEST_CASE("N = 4, M = 24, gamma = 0.01 ||d||^2 matches the lambda-grid oracle") {
  std::mt19937_64 rng(5);
  auto in = random_instance(rng, 4, 24, 0.01);
  const auto s = solve_frequency(in.G, in.b, in.d, in.gamma);
  const auto ref = oracle::lambda_grid(in.G, in.b, in.d, in.gamma);
  CHECK((s.w - ref.w).norm() <= 1e-4 * ref.w.norm());
  check_kkt(in, s);
}

TEST_CASE("random instances against the oracle, active and inactive constraint") {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> nd(2, 12);
  std::uniform_real_distribution<double> ex(0.0, 2.0);
  int active = 0, inactive = 0;
  for (int t = 0; t < 60; ++t) {
    const int n = nd(rng);
    std::uniform_int_distribution<int> md(std::max(8, n), 128);
    auto in = random_instance(rng, n, md(rng), std::pow(10.0, -ex(rng)));
    CAPTURE(t);
    const auto s = solve_frequency(in.G, in.b, in.d, in.gamma);
    const auto ref = oracle::lambda_grid(in.G, in.b, in.d, in.gamma);
    CHECK((s.w - ref.w).norm() <= 1e-4 * ref.w.norm());
    CHECK(objective(in, s.w) <= objective(in, ref.w) * (1.0 + 1e-6) + 1e-12);
    check_kkt(in, s);
    (s.lambda > 0.0 ? active : inactive)++;
  }
  CHECK(active > 5);
  CHECK(inactive > 5);
}

TEST_CASE("no feasible perturbation improves the objective") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 1.0);
  for (double frac : {0.5, 0.05, 0.002}) {
    auto in = random_instance(rng, 6, 30, frac);
    const auto s = solve_frequency(in.G, in.b, in.d, in.gamma);
    const double f0 = objective(in, s.w);
    const Eigen::VectorXcd a = in.d.conjugate();
    const Eigen::VectorXcd wp = a / a.squaredNorm();
    const double rho = std::sqrt(1.0 / in.gamma - 1.0 / a.squaredNorm());
    for (int k = 0; k < 100; ++k) {
      Eigen::VectorXcd delta = oracle::random_complex(rng, 6, 1) * (0.1 * std::pow(10.0, -g(rng)));
      delta -= a * (a.adjoint() * delta)(0) / a.squaredNorm();
      Eigen::VectorXcd w = s.w + delta;
      const double r = (w - wp).norm();
      if (r > rho) w = wp + (w - wp) * (rho / r);
      CHECK(objective(in, w) >= f0 - 1e-9 * std::max(1.0, f0));
    }
  }
}

TEST_CASE("residual is nonincreasing as the floor loosens") {
  std::mt19937_64 rng(8);
  auto in = random_instance(rng, 8, 50, 1.0);
  const double dn = in.d.squaredNorm();
  double prev = std::numeric_limits<double>::infinity();
  for (double frac = 1.0; frac > 1e-4; frac *= 0.5) {
    const auto s = solve_frequency(in.G, in.b, in.d, frac * dn);
    CHECK(s.diagnostics.residual <= prev * (1.0 + 1e-12));
    prev = s.diagnostics.residual;
  }
}

TEST_CASE("scaling covariance") {
  std::mt19937_64 rng(9);
  for (double frac : {0.3, 0.01}) {
    auto in = random_instance(rng, 5, 20, frac);
    const double alpha = 3.7;
    const auto s = solve_frequency(in.G, in.b, in.d, in.gamma);
    // The feasible set maps onto itself only when gamma scales with ||d||^2.
    const auto t = solve_frequency(alpha * in.G, in.b, alpha * in.d, alpha * alpha * in.gamma);
    CHECK((t.w - s.w / alpha).norm() <= 1e-9 * s.w.norm() / alpha);
  }
}

TEST_CASE("diagnostics") {
  std::mt19937_64 rng(10);
  auto in = random_instance(rng, 6, 30, 0.01);
  const auto s = solve_frequency(in.G, in.b, in.d, in.gamma);
  CHECK(s.diagnostics.residual == doctest::Approx(std::sqrt(objective(in, s.w))));
  CHECK(s.diagnostics.gamma_used == in.gamma);
  CHECK(s.diagnostics.feasibility_margin_db == doctest::Approx(20.0));
  CHECK(s.diagnostics.achieved_wng >= in.gamma * (1.0 - 1e-12));
  CHECK_FALSE(s.diagnostics.clamped);
}

TEST_CASE("design config validation") {
  DesignConfig c;
  CHECK_NOTHROW(c.validate());
  c.num_taps = 1023;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = {};
  c.gamma = 0.0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = {};
  c.band_hi = 9000.0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = {};
  c.band_lo = 6000.0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

namespace {

struct SmallSetup {
  ArrayGeometry geom = head12_geometry();
  DirectionGrid grid = make_uniform_grid(15.0, 15.0, true);
  FrequencyGrid freqs{16000.0, 64};
  SteeringSet steer = free_field_steering(geom, grid, freqs);
  DesignConfig cfg = [] {
    DesignConfig c;
    c.num_taps = 64;
    c.look = {90.0, 90.0};
    c.beamwidth_3db = 30.0;
    return c;
  }();
};

}  // namespace

TEST_CASE("broadband design at gamma = N returns delay-and-sum weights") {
  SmallSetup s;
  s.cfg.gamma = 12.0;
  const auto desired = build_desired_2d(s.grid, s.cfg.look, s.cfg.beamwidth_3db);
  const auto fd = design_broadband(s.steer, desired, s.cfg);
  REQUIRE(fd.weights.rows() == 33);
  for (Eigen::Index q = 0; q < fd.weights.rows(); ++q) {
    const Eigen::VectorXcd d = fd.look_steering.row(q).transpose();
    CHECK((fd.weights.row(q).transpose() - d.conjugate() / 12.0).norm() <= 1e-9);
  }
}

TEST_CASE("broadband design clamps an infeasible floor and reports each bin") {
  SmallSetup s;
  s.cfg.gamma = 20.0;
  const auto desired = build_desired_2d(s.grid, s.cfg.look, s.cfg.beamwidth_3db);
  std::vector<std::size_t> clamped;
  const auto fd = design_broadband(s.steer, desired, s.cfg, [&](std::size_t q, double gmax) {
    clamped.push_back(q);
    CHECK(gmax == doctest::Approx(12.0));
  });
  CHECK(clamped.size() == 33);
  for (const auto& d : fd.diagnostics) {
    CHECK(d.clamped);
    CHECK(d.gamma_used == doctest::Approx(0.999 * 12.0));
  }
}

TEST_CASE("broadband design is reproducible and satisfies per-bin invariants") {
  SmallSetup s;
  s.cfg.gamma = 0.01;
  const auto desired = build_desired_2d(s.grid, s.cfg.look, s.cfg.beamwidth_3db);
  const auto a = design_broadband(s.steer, desired, s.cfg);
  const auto b = design_broadband(s.steer, desired, s.cfg);
  CHECK(a.weights == b.weights);
  CHECK(a.multipliers == b.multipliers);
  for (Eigen::Index q = 0; q < a.weights.rows(); ++q) {
    const Eigen::VectorXcd w = a.weights.row(q).transpose();
    const Eigen::VectorXcd d = a.look_steering.row(q).transpose();
    CHECK(std::abs((w.transpose() * d).value() - cd(1.0)) <= 1e-9);
    CHECK(w.squaredNorm() <= 100.0 * (1.0 + 1e-8));
    CHECK(a.multipliers[static_cast<std::size_t>(q)] >= 0.0);
  }
  CHECK(a.num_design_directions == s.grid.size());
  CHECK(a.grid_hash == s.grid.hash());
}

TEST_CASE("look direction must be on the steering grid") {
  SmallSetup s;
  const auto desired = build_desired_1d(5.0, 90.0, {90.0, 90.0}, 20.0);
  // 5-degree ring directions are not on the 15-degree grid.
  CHECK_THROWS_AS(design_broadband(s.steer, desired, s.cfg), InvalidArgument);
}

TEST_CASE("design file round trip") {
  SmallSetup s;
  const auto desired = build_desired_2d(s.grid, s.cfg.look, s.cfg.beamwidth_3db);
  const auto fd = design_broadband(s.steer, desired, s.cfg);
  const auto dir = std::filesystem::temp_directory_path() / "rlsfi_test_design";
  std::filesystem::create_directories(dir);
  save_design(fd, dir / "d.json", {{"note", "x"}});
  nlohmann::json meta;
  const auto back = load_design(dir / "d.json", &meta);
  CHECK(meta.at("note") == "x");
  CHECK(back.freqs == fd.freqs);
  CHECK(back.gamma == fd.gamma);
  CHECK(back.look == fd.look);
  CHECK(back.grid_hash == fd.grid_hash);
  CHECK(back.multipliers == fd.multipliers);
  // complex64 payload
  CHECK((back.weights - fd.weights).norm() <= 1e-6 * fd.weights.norm());
  CHECK((back.look_steering - fd.look_steering).norm() <= 1e-6 * fd.look_steering.norm());
  CHECK(back.diagnostics.size() == fd.diagnostics.size());
  CHECK_THROWS_AS(load_design(dir / "missing.json"), FormatError);
}
