#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "koopmoo/gedmd.hpp"
#include "koopmoo/parallel.hpp"
#include "koopmoo/rng.hpp"

namespace koopmoo {

// ---------------------------------------------------------------------------
// Two-opinion voter model
// ---------------------------------------------------------------------------

/// Rates are per unit time. Controls add to the second-order rates:
/// gamma12(u) = gamma12 + u_push, gamma21(u) = gamma21 + u_pull.
struct VoterParams {
  int agents = 500;
  double gamma12 = 1.0;
  double gamma21 = 2.0;
  double gamma12_prime = 0.1;
  double gamma21_prime = 0.1;
  double u_push = 0.0;
  double u_pull = 0.0;

  /// Copy with (u_push, u_pull) = u.
  VoterParams with_control(const Vector& u) const;
  // Effective second-order rates, clamped at zero with a warning.
  double rate12() const;
  double rate21() const;

  bool operator==(const VoterParams&) const = default;
};

/// Piecewise-constant count of opinion-1 agents; counts[k] holds on [times[k], times[k+1]).
struct JumpTrajectory {
  std::vector<double> times;
  std::vector<int> counts;

  int at(double t) const;
};

/// Exact continuous-time realisation (Gillespie direct method) on [0, horizon].
JumpTrajectory gillespie_voter(const VoterParams& params, int x1_0, double horizon, std::uint64_t seed);

/// Same dynamics without recording: returns X1 at `horizon`.
int gillespie_voter_advance(const VoterParams& params, int x1, double horizon, Rng& rng);

/// Large-population SDE limit for the opinion-1 fraction c.
double voter_kurtz_drift(const VoterParams& params, double c);
double voter_kurtz_diffusion(const VoterParams& params, double c);

// ---------------------------------------------------------------------------
// Controlled stochastic SIR (one or two groups)
// ---------------------------------------------------------------------------

/// Population fractions of the total N. The reduced state is [S_0..S_{G-1}, I_0..I_{G-1}];
/// R_g = group_fraction_g - S_g - I_g. Infection of group g by group h happens at
/// rate contact(g, h) * phi_g(u) * phi_h(u) ... with the control action
/// (phi_g phi_h)^{action_exponent / 2}, phi_g = 1 - u_{channel(g)}.
///
/// One group: u = (u), contact = [beta]. Two groups (0 = adults, 1 = children):
/// u = (u_s, u_w); adults respond to u_w, children to u_s.
struct SirParams {
  double population = 1000.0;
  double gamma = 0.05;
  double action_exponent = 2.0;
  std::vector<double> group_fractions{1.0};
  std::vector<double> contact{0.5};  // row-major G x G base infection rates
  bool noise = true;

  static SirParams one_group(double population, double beta, double gamma);
  static SirParams two_group(double population, double child_fraction, double beta_aa, double beta_ac,
                             double beta_ca, double beta_cc, double gamma);

  int groups() const { return static_cast<int>(group_fractions.size()); }
  int state_dimension() const { return 2 * groups(); }
  int control_dimension() const { return groups() == 1 ? 1 : 2; }
  double infection_rate(int g, int h, const Vector& u) const;
  void validate() const;

  bool operator==(const SirParams&) const = default;
};

/// Exact drift and diffusion of the SIR SDE on the reduced state.
Vector sir_drift(const SirParams& params, const Vector& x, const Vector& u);
Matrix sir_diffusion(const SirParams& params, const Vector& x, const Vector& u);

// ---------------------------------------------------------------------------
// Control schedules
// ---------------------------------------------------------------------------

/// Constant control, or a scalar logistic ramp. The default logistic form is
/// u(t) = A / (1 + Q exp(-B t)); `logistic_literal` is u(t) = A Q / (1 + exp(B t)).
struct ControlSchedule {
  enum class Kind { constant, logistic, logistic_literal };

  Kind kind = Kind::constant;
  Vector value;
  double plateau = 0.5;    // A
  double offset = 1000.0;  // Q
  double steepness = 0.1;  // B, 1/time

  static ControlSchedule constant(Vector u);
  static ControlSchedule logistic(double plateau = 0.5, double offset = 1000.0, double steepness = 0.1,
                                  bool literal = false);

  int dimension() const;
  Vector at(double t) const;
  Vector rate(double t) const;
};

/// (u(t), du/dt) of a logistic schedule.
std::pair<double, double> logistic_control(const ControlSchedule& schedule, double t);

/// Time derivative of the logistic law expressed through u itself (the u-drift that
/// state augmentation identifies).
double logistic_rate_from_value(const ControlSchedule& schedule, double u);

struct SirTrajectory {
  std::vector<double> times;
  Matrix states;    // rows: recorded times; cols: S.., I.., R..
  Matrix controls;  // rows: recorded times
  int clamp_events = 0;
  // Largest per-group |S + I + R - n_g| after any step.
  double max_conservation_error = 0.0;

  // Rows restricted to the reduced [S.., I..] state.
  Matrix reduced() const { return states.leftCols(states.cols() / 3 * 2); }
};

/// Euler-Maruyama integration of the SIR SDE. Infection and recovery flows are clipped so
/// that no compartment goes negative (counted in clamp_events); group sizes are conserved.
/// Throws StabilityError if a single step moves any fraction by more than 0.5.
SirTrajectory simulate_sir(const SirParams& params, const ControlSchedule& schedule, const Vector& x0,
                           double horizon, double dt, std::uint64_t seed, int record_stride = 1);

/// Advance the reduced SIR state by `tau` using steps of `dt` with control u held fixed.
Vector sir_advance(const SirParams& params, const Vector& x, const Vector& u, double tau, double dt, Rng& rng);

// ---------------------------------------------------------------------------
// Kramers-Moyal estimation and ensembles
// ---------------------------------------------------------------------------

/// Advances state x under constant control u for time tau.
using Propagator = std::function<Vector(const Vector& x, const Vector& u, double tau, Rng& rng)>;

/// Voter propagator on the fraction c = X1 / N (c is snapped to the k/N lattice).
Propagator voter_propagator(const VoterParams& params);
Propagator sir_propagator(const SirParams& params, double dt);

struct KmEstimate {
  Vector x;
  Vector u;
  Vector drift;
  Matrix diffusion;
  int samples = 0;
  double tau = 0.0;
  Vector drift_se;
  Matrix diffusion_se;

  SamplePoint sample() const { return {x, drift, diffusion}; }
};

/// b = mean(dX) / tau and a = cov(dX) / tau from n runs of length tau started at x.
KmEstimate km_estimate(const Propagator& propagate, const Vector& x, const Vector& u, double tau, int n,
                       std::uint64_t seed, Exec exec = Exec::parallel);

/// Two-sided 99.9 % normal quantile.
inline constexpr double z_999 = 3.2905;

struct EnsembleSummary {
  Vector mean;
  Vector sd;
  Vector halfwidth;  // z * sd / sqrt(n)
  int samples = 0;
};

/// Monte Carlo summary over n independent draws; draw r uses sub-seed (seed, r).
EnsembleSummary ensemble_mean(const std::function<Vector(Rng&)>& draw, int n, std::uint64_t seed,
                              Exec exec = Exec::parallel, double z = z_999);

EnsembleSummary ensemble_mean(const Propagator& propagate, const Vector& x0, const Vector& u, double t, int n,
                              std::uint64_t seed, Exec exec = Exec::parallel, double z = z_999);

}  // namespace koopmoo
