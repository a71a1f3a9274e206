#include <doctest.h>

#include <cmath>

#include "koopmoo/errors.hpp"
#include "koopmoo/io.hpp"
#include "koopmoo/surrogate.hpp"
#include "oracles.hpp"

using namespace koopmoo;

namespace {

// 1-D model b(x) = -theta x, a(x) = s2 on monomials {1, x}.
SdeModel ou_model(double theta, double s2) {
  SdeModel m{Dictionary::monomials(1, 1), Matrix::Zero(2, 1), Matrix::Zero(2, 1)};
  m.drift(1, 0) = -theta;
  m.diffusion(0, 0) = s2;
  return m;
}

ReducedTrajectory line(std::vector<double> times, double slope, double offset) {
  ReducedTrajectory t;
  t.states.resize(static_cast<Eigen::Index>(times.size()), 2);
  for (std::size_t k = 0; k < times.size(); ++k) {
    t.states(static_cast<Eigen::Index>(k), 0) = slope * times[k] + offset;
    t.states(static_cast<Eigen::Index>(k), 1) = -slope * times[k];
  }
  t.times = std::move(times);
  return t;
}

}  // namespace

TEST_CASE("mean-field integration is forward Euler on the drift") {
  const auto model = ou_model(0.8, 0.5);
  SimulationOptions opts;
  opts.dt = 0.05;
  const auto traj = simulate_reduced(model, Vector::Constant(1, 2.0), 1.0, opts);
  REQUIRE(traj.times.size() == 21);
  CHECK(traj.times.back() == 1.0);
  CHECK(traj.provenance == ReducedTrajectory::Provenance::mean_field);
  for (int k = 0; k <= 20; ++k) {
    CHECK(traj.states(k, 0) == doctest::Approx(2.0 * std::pow(1.0 - 0.8 * 0.05, k)).epsilon(1e-13));
  }
}

TEST_CASE("Euler-Maruyama ensemble mean tracks the Ornstein-Uhlenbeck mean") {
  const auto model = ou_model(1.0, 0.4);
  SimulationOptions opts;
  opts.dt = 0.01;
  opts.mean_field = false;
  opts.paths = 4000;
  opts.seed = 3;
  const auto traj = simulate_reduced(model, Vector::Constant(1, 1.0), 1.0, opts);
  CHECK(traj.provenance == ReducedTrajectory::Provenance::ensemble);
  // Var X_1 <= s2 / (2 theta) = 0.2; 4 standard errors of the mean
  const double tol = 4.0 * std::sqrt(0.2 / 4000.0);
  CHECK(std::abs(traj.states(100, 0) - std::pow(0.99, 100)) < tol);
  opts.exec = Exec::parallel;
  const auto par = simulate_reduced(model, Vector::Constant(1, 1.0), 1.0, opts);
  CHECK(par.states == traj.states);
}

TEST_CASE("indefinite diffusion falls back to a drift step and is counted") {
  const auto model = ou_model(1.0, -1.0);
  SimulationOptions opts;
  opts.dt = 0.1;
  opts.mean_field = false;
  opts.paths = 3;
  const auto traj = simulate_reduced(model, Vector::Constant(1, 1.0), 1.0, opts);
  CHECK(traj.indefinite_fallbacks == 30);
  CHECK(traj.states(10, 0) == doctest::Approx(std::pow(0.9, 10)).epsilon(1e-13));
}

TEST_CASE("state clamping counts every clipped component") {
  SdeModel growth{Dictionary::monomials(1, 1), Matrix::Zero(2, 1), Matrix()};
  growth.drift(0, 0) = 1.0;  // dx/dt = 1
  SimulationOptions opts;
  opts.dt = 0.25;
  opts.clamp = std::make_pair(0.0, 1.0);
  const auto traj = simulate_reduced(growth, Vector::Constant(1, 0.5), 2.0, opts);
  CHECK(traj.states.maxCoeff() == 1.0);
  CHECK(traj.clamp_events == 6);
  CHECK_THROWS_AS(simulate_reduced(growth, Vector::Zero(2), 1.0, opts), ConfigurationError);
  opts.dt = 0.0;
  CHECK_THROWS_AS(simulate_reduced(growth, Vector::Zero(1), 1.0, opts), ConfigurationError);
}

TEST_CASE("augmented simulation holds the control coordinates") {
  // z = [x, u], dx/dt = -u x
  AugmentedModel aug;
  aug.state_dimension = 1;
  aug.control_dimension = 1;
  aug.model.dictionary = Dictionary::monomials(2, 2);
  aug.model.drift = Matrix::Zero(6, 2);
  aug.model.drift(*aug.model.dictionary.pair_index(0, 1), 0) = -1.0;
  SimulationOptions opts;
  opts.dt = 0.1;
  const auto traj = simulate_reduced(aug, Vector::Constant(1, 0.5), Vector::Constant(1, 1.0), 1.0, opts);
  CHECK(traj.states.cols() == 1);
  CHECK(traj.states(10, 0) == doctest::Approx(std::pow(0.95, 10)).epsilon(1e-13));
  // a control law u' = 1 speeds the decay
  const auto ramp = simulate_reduced(aug, Vector::Constant(1, 0.5), Vector::Constant(1, 1.0), 1.0, opts,
                                     [](const Vector& u) { return Vector::Ones(u.size()); });
  CHECK(ramp.states(10, 0) < traj.states(10, 0));
  CHECK_THROWS_AS(simulate_reduced(aug, Vector::Zero(2), Vector::Constant(1, 1.0), 1.0, opts), ConfigurationError);
}

TEST_CASE("objective quadrature") {
  const auto traj = line({0.0, 0.5, 1.0, 2.0}, 2.0, 1.0);  // x0 = 2t + 1
  ObjectiveSpec f;
  f.name = "area";
  f.running = [](const Vector& x, const Vector& u) { return u(0) * x(0); };
  f.terminal = [](const Vector& x, const Vector&) { return x(1); };
  // trapezoid is exact for a linear integrand: 3 * (t^2 + t) on [0, 2] = 18; terminal -4
  CHECK(integrate_objective(f, traj, Vector::Constant(1, 3.0)) == doctest::Approx(14.0).epsilon(1e-14));
  ObjectiveSpec g;
  g.name = "cost";
  g.control_only = [](const Vector& u) { return u.squaredNorm(); };
  CHECK(integrate_objective(g, traj, Vector::Constant(2, 2.0)) == 8.0);
  ObjectiveSpec empty;
  empty.name = "empty";
  CHECK_THROWS_AS(empty.validate(), ConfigurationError);
  f.t1 = -1.0;
  CHECK_THROWS_AS(f.validate(), ConfigurationError);
}

TEST_CASE("objectives sharing a time grid reuse one trajectory") {
  int calls = 0;
  ModelAtControl model = [&](const Vector& u) {
    ++calls;
    return ou_model(u(0), 0.0);
  };
  ObjectiveSpec final_state;
  final_state.name = "final";
  final_state.terminal = [](const Vector& x, const Vector&) { return x(0); };
  final_state.step = 0.1;
  ObjectiveSpec integral = final_state;
  integral.name = "integral";
  integral.terminal = nullptr;
  integral.running = [](const Vector& x, const Vector&) { return x(0); };
  ObjectiveSpec cost;
  cost.name = "cost";
  cost.control_only = [](const Vector& u) { return u(0) * u(0); };
  const Vector f = evaluate_objectives({final_state, integral, cost}, model, Vector::Constant(1, 1.0),
                                       Vector::Constant(1, 1.0));
  CHECK(calls == 1);
  CHECK(f(0) == doctest::Approx(std::pow(0.9, 10)).epsilon(1e-13));
  double trap = 0.0;
  for (int k = 0; k < 10; ++k) trap += 0.05 * (std::pow(0.9, k) + std::pow(0.9, k + 1));
  CHECK(f(1) == doctest::Approx(trap).epsilon(1e-13));
  CHECK(f(2) == 1.0);
  CHECK_THROWS_AS(evaluate_objectives({}, model, Vector::Zero(1), Vector::Zero(1)), ConfigurationError);
}

TEST_CASE("trajectory RMSE") {
  const auto ref = line({0.0, 1.0, 2.0, 3.0}, 1.0, 0.0);
  CHECK(trajectory_rmse(ref, ref) == 0.0);
  // a shifted first component: pooled over 2 components, rmse = c / sqrt(2)
  const auto shifted = line({0.0, 1.0, 2.0, 3.0}, 1.0, 0.3);
  CHECK(trajectory_rmse(ref, shifted) == doctest::Approx(0.3 / std::sqrt(2.0)));
  // a coarser candidate of the same line interpolates exactly
  const auto coarse = line({0.0, 3.0}, 1.0, 0.0);
  CHECK(trajectory_rmse(ref, coarse) < 1e-15);
  // reference times outside the candidate are skipped
  const auto part = line({0.0, 1.5}, 1.0, 0.0);
  CHECK(trajectory_rmse(ref, part) < 1e-15);
  const auto late = line({5.0, 6.0}, 1.0, 0.0);
  CHECK_THROWS_AS(trajectory_rmse(ref, late), ConfigurationError);
  ReducedTrajectory narrow;
  narrow.times = {0.0};
  narrow.states = Matrix::Zero(1, 1);
  CHECK_THROWS_AS(trajectory_rmse(ref, narrow), ConfigurationError);
}

TEST_CASE("trajectory CSV export") {
  const auto dir = oracle::scratch_dir("surrogate_csv");
  const auto traj = line({0.0, 0.5, 1.0}, 1.0 / 3.0, 0.1);
  write_trajectory_csv(dir / "t.csv", traj, {"a", "b"});
  const auto table = read_csv(dir / "t.csv");
  REQUIRE(table.rows.size() == 3);
  CHECK(table.header == std::vector<std::string>{"t", "a", "b"});
  CHECK(table.rows[2][1] == traj.states(2, 0));
  CHECK(table.rows[1][2] == traj.states(1, 1));
}
