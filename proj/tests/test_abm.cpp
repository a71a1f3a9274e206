#include <doctest.h>

#include <cmath>

#include "koopmoo/abm.hpp"
#include "koopmoo/diagnostics.hpp"
#include "koopmoo/errors.hpp"
#include "oracles.hpp"

using namespace koopmoo;

TEST_CASE("Gillespie voter paths stay on the lattice and are seed-deterministic") {
  VoterParams p;
  p.agents = 50;
  const auto a = gillespie_voter(p, 25, 5.0, 42);
  const auto b = gillespie_voter(p, 25, 5.0, 42);
  CHECK(a.times == b.times);
  CHECK(a.counts == b.counts);
  REQUIRE(a.times.size() == a.counts.size());
  CHECK(a.times.front() == 0.0);
  for (std::size_t k = 1; k < a.times.size(); ++k) {
    CHECK(a.times[k] > a.times[k - 1]);
    CHECK(std::abs(a.counts[k] - a.counts[k - 1]) == 1);
  }
  for (int c : a.counts) CHECK((c >= 0 && c <= 50));
  CHECK(a.at(0.0) == 25);
  CHECK(a.at(5.0) == a.counts.back());
  const auto c = gillespie_voter(p, 25, 5.0, 43);
  CHECK(c.counts != a.counts);
}

TEST_CASE("voter boundaries only move inward through the first-order rates") {
  VoterParams p;
  p.agents = 20;
  p.gamma12_prime = 0.0;
  p.gamma21_prime = 0.0;
  // With X1 = 0, only the gamma21' term can act; switching it off freezes the state.
  const auto frozen = gillespie_voter(p, 0, 10.0, 1);
  CHECK(frozen.counts.size() == 1);
  p.gamma21_prime = 0.5;
  const auto moving = gillespie_voter(p, 0, 10.0, 1);
  CHECK(moving.counts.size() > 1);
  CHECK(moving.counts[1] == 1);
}

TEST_CASE("controlled voter rates clamp at zero with a warning") {
  VoterParams p;
  ScopedWarningCapture capture;
  Vector u(2);
  u << -3.0, 0.0;
  const auto q = p.with_control(u);
  CHECK(q.rate12() == 0.0);
  CHECK(q.rate21() == 2.0);
  CHECK(capture.contains("clamped to 0"));
}

TEST_CASE("Kramers-Moyal estimate of the voter model near the Kurtz limit") {
  VoterParams p;
  const auto prop = voter_propagator(p);
  const auto est = km_estimate(prop, Vector::Constant(1, 0.4), Vector(), 0.01, 4000, 9);
  CHECK(std::abs(est.drift(0) - voter_kurtz_drift(p, 0.4)) < 4.0 * est.drift_se(0));
  CHECK(std::abs(est.diffusion(0, 0) - voter_kurtz_diffusion(p, 0.4)) < 4.0 * est.diffusion_se(0, 0));
  // drift = (g21 - g12) c (1 - c) - g12' c + g21' (1 - c)
  CHECK(voter_kurtz_drift(p, 0.4) == doctest::Approx(1.0 * 0.24 - 0.04 + 0.06));
  CHECK(voter_kurtz_diffusion(p, 0.4) == doctest::Approx((3.0 * 0.24 + 0.04 + 0.06) / 500.0));
}

TEST_CASE("serial and parallel Kramers-Moyal estimates are bit-identical") {
  const auto prop = voter_propagator(VoterParams{});
  const auto s = km_estimate(prop, Vector::Constant(1, 0.5), Vector::Zero(2), 0.01, 300, 5, Exec::serial);
  const auto q = km_estimate(prop, Vector::Constant(1, 0.5), Vector::Zero(2), 0.01, 300, 5, Exec::parallel);
  CHECK(s.drift == q.drift);
  CHECK(s.diffusion == q.diffusion);
  CHECK(s.drift_se == q.drift_se);
}

TEST_CASE("Kramers-Moyal estimator is unbiased for exact Gaussian increments") {
  // X_tau = x + b tau + sqrt(tau) L xi with L L^T = a.
  Vector b(2);
  b << 0.3, -1.2;
  Matrix l(2, 2);
  l << 1.0, 0.0, 0.5, 0.8;
  const Matrix a = l * l.transpose();
  Propagator gauss = [&](const Vector& x, const Vector&, double tau, Rng& rng) {
    std::normal_distribution<double> n;
    Vector xi(2);
    xi << n(rng), n(rng);
    return Vector(x + b * tau + std::sqrt(tau) * l * xi);
  };
  const auto est = km_estimate(gauss, Vector::Zero(2), Vector(), 0.5, 20000, 3);
  for (int i = 0; i < 2; ++i) {
    CHECK(std::abs(est.drift(i) - b(i)) < 4.0 * est.drift_se(i));
    for (int j = 0; j < 2; ++j) CHECK(std::abs(est.diffusion(i, j) - a(i, j)) < 4.0 * est.diffusion_se(i, j));
  }
  CHECK((est.diffusion - est.diffusion.transpose()).norm() == 0.0);
  CHECK_THROWS_AS(km_estimate(gauss, Vector::Zero(2), Vector(), 0.0, 10, 1), ConfigurationError);
  CHECK_THROWS_AS(km_estimate(gauss, Vector::Zero(2), Vector(), 0.1, 1, 1), ConfigurationError);
}

TEST_CASE("one-group SIR drift and diffusion") {
  const auto p = SirParams::one_group(200.0, 0.4, 0.1);
  Vector x(2);
  x << 0.7, 0.2;
  const Vector u = Vector::Constant(1, 0.25);
  const double lambda = 0.4 * 0.7 * 0.2 * 0.75 * 0.75;
  const Vector b = sir_drift(p, x, u);
  CHECK(b(0) == doctest::Approx(-lambda));
  CHECK(b(1) == doctest::Approx(lambda - 0.1 * 0.2));
  const Matrix a = sir_diffusion(p, x, u);
  CHECK(a(0, 0) == doctest::Approx(lambda / 200.0));
  CHECK(a(0, 1) == doctest::Approx(-lambda / 200.0));
  CHECK(a(1, 0) == a(0, 1));
  CHECK(a(1, 1) == doctest::Approx((lambda + 0.02) / 200.0));
}

TEST_CASE("two-group control action") {
  const auto p = SirParams::two_group(1000.0, 0.2, 0.02, 0.015, 0.015, 0.1, 0.01);
  CHECK(p.groups() == 2);
  CHECK(p.group_fractions[0] == doctest::Approx(0.8));
  Vector u(2);
  u << 0.5, 0.2;  // (u_s, u_w)
  // adults respond to u_w, children to u_s; action (phi_g phi_h)^(p/2) with p = 2
  CHECK(p.infection_rate(0, 0, u) == doctest::Approx(0.02 * 0.8 * 0.8));
  CHECK(p.infection_rate(0, 1, u) == doctest::Approx(0.015 * 0.8 * 0.5));
  CHECK(p.infection_rate(1, 1, u) == doctest::Approx(0.1 * 0.5 * 0.5));
  const Vector zero = Vector::Zero(2);
  CHECK(p.infection_rate(1, 0, zero) == doctest::Approx(0.015));
}

TEST_CASE("SIR simulation conserves group sizes and keeps fractions non-negative") {
  auto p = SirParams::two_group(300.0, 0.3, 0.3, 0.2, 0.2, 0.5, 0.1);
  Vector x0(4);
  x0 << 0.69, 0.29, 0.01, 0.01;
  Vector u(2);
  u << 0.2, 0.1;
  const auto traj = simulate_sir(p, ControlSchedule::constant(u), x0, 60.0, 0.1, 7, 5);
  CHECK(traj.max_conservation_error < 1e-12);
  CHECK(traj.states.minCoeff() >= 0.0);
  for (Eigen::Index r = 0; r < traj.states.rows(); ++r) {
    CHECK(traj.states(r, 0) + traj.states(r, 2) + traj.states(r, 4) == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(traj.states(r, 1) + traj.states(r, 3) + traj.states(r, 5) == doctest::Approx(0.3).epsilon(1e-12));
  }
  CHECK(traj.times.size() == 121);
  CHECK(traj.times.back() == doctest::Approx(60.0));
  CHECK(traj.reduced().cols() == 4);
}

TEST_CASE("noise-free SIR equals forward Euler on the drift") {
  auto p = SirParams::one_group(100.0, 0.5, 0.1);
  p.noise = false;
  Vector x(2);
  x << 0.9, 0.1;
  const Vector u = Vector::Constant(1, 0.3);
  const auto traj = simulate_sir(p, ControlSchedule::constant(u), x, 2.0, 0.05, 1);
  Vector y = x;
  for (int s = 0; s < 40; ++s) {
    const double lambda = 0.5 * y(0) * y(1) * 0.49;
    y(0) -= 0.05 * lambda;
    y(1) += 0.05 * (lambda - 0.1 * y(1));
  }
  CHECK(traj.states(40, 0) == doctest::Approx(y(0)).epsilon(1e-12));
  CHECK(traj.states(40, 1) == doctest::Approx(y(1)).epsilon(1e-12));
}

TEST_CASE("SIR stability guard and input validation") {
  auto p = SirParams::one_group(10.0, 50.0, 0.1);
  Vector x(2);
  x << 0.5, 0.5;
  CHECK_THROWS_AS(simulate_sir(p, ControlSchedule::constant(Vector::Zero(1)), x, 10.0, 1.0, 1), StabilityError);
  Vector too_big(2);
  too_big << 0.8, 0.5;
  CHECK_THROWS_AS(simulate_sir(p, ControlSchedule::constant(Vector::Zero(1)), too_big, 1.0, 0.1, 1),
                  ConfigurationError);
  CHECK_THROWS_AS(simulate_sir(p, ControlSchedule::constant(Vector::Zero(2)), x, 1.0, 0.1, 1), ConfigurationError);
}

TEST_CASE("logistic control law and its derivative") {
  for (bool literal : {false, true}) {
    const auto law = ControlSchedule::logistic(0.5, 1000.0, 0.1, literal);
    for (double t : {0.5, 10.0, 60.0, 120.0}) {
      const auto [u, du] = logistic_control(law, t);
      const double h = 1e-4;
      const double fd = (logistic_control(law, t + h).first - logistic_control(law, t - h).first) / (2.0 * h);
      CHECK(du == doctest::Approx(fd).epsilon(1e-6).scale(1e-9));
      CHECK(logistic_rate_from_value(law, u) == doctest::Approx(du).epsilon(1e-10).scale(1e-12));
      CHECK(u >= 0.0);
    }
  }
  const auto law = ControlSchedule::logistic();
  CHECK(logistic_control(law, 0.0).first == doctest::Approx(0.5 / 1001.0));
  CHECK(logistic_control(law, 1e4).first == doctest::Approx(0.5));
  CHECK_THROWS_AS(logistic_control(law, -1.0), ConfigurationError);
  CHECK_THROWS_AS(logistic_control(ControlSchedule::logistic(0.0), 1.0), ConfigurationError);
  CHECK_THROWS_AS(logistic_control(ControlSchedule::logistic(0.5, -1.0), 1.0), ConfigurationError);
}

TEST_CASE("ensemble summaries") {
  const auto s = ensemble_mean([](Rng& rng) { return Vector::Constant(1, std::normal_distribution<double>(2.0, 1.0)(rng)); },
                               5000, 11);
  CHECK(s.samples == 5000);
  CHECK(s.halfwidth(0) == doctest::Approx(z_999 * s.sd(0) / std::sqrt(5000.0)));
  CHECK(std::abs(s.mean(0) - 2.0) < s.halfwidth(0));
  const auto t = ensemble_mean([](Rng& rng) { return Vector::Constant(1, std::normal_distribution<double>(2.0, 1.0)(rng)); },
                               5000, 11, Exec::serial);
  CHECK(t.mean == s.mean);
  CHECK(t.sd == s.sd);
}
