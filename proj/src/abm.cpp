#include "koopmoo/abm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "koopmoo/diagnostics.hpp"
#include "koopmoo/errors.hpp"

namespace koopmoo {

// ---------------------------------------------------------------------------
// Voter model

VoterParams VoterParams::with_control(const Vector& u) const {
  if (u.size() != 2) throw ConfigurationError("voter control must be (u_push, u_pull)");
  VoterParams p = *this;
  p.u_push = u(0);
  p.u_pull = u(1);
  return p;
}

double VoterParams::rate12() const {
  const double r = gamma12 + u_push;
  if (r < 0.0) {
    warn("voter rate gamma12 + u_push is negative; clamped to 0");
    return 0.0;
  }
  return r;
}

double VoterParams::rate21() const {
  const double r = gamma21 + u_pull;
  if (r < 0.0) {
    warn("voter rate gamma21 + u_pull is negative; clamped to 0");
    return 0.0;
  }
  return r;
}

int JumpTrajectory::at(double t) const {
  if (times.empty()) throw ConfigurationError("empty trajectory");
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return counts.front();
  return counts[static_cast<std::size_t>(it - times.begin() - 1)];
}

namespace {

void check_voter(const VoterParams& p, int x1) {
  if (p.agents < 1) throw ConfigurationError("voter model needs at least one agent");
  if (x1 < 0 || x1 > p.agents) throw ConfigurationError("initial opinion-1 count outside [0, N]");
  if (p.gamma12_prime < 0.0 || p.gamma21_prime < 0.0) throw ConfigurationError("voter rates must be non-negative");
}

// Runs the jump process from (t, x1) to the horizon; `on_jump` sees every event.
template <class OnJump>
int run_voter(const VoterParams& p, int x1, double horizon, Rng& rng, OnJump&& on_jump) {
  const double n = p.agents;
  const double g12 = p.rate12();
  const double g21 = p.rate21();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double t = 0.0;
  for (;;) {
    const double x = x1;
    const double pairs = x * (n - x) / n;
    const double up = g21 * pairs + p.gamma21_prime * (n - x);
    const double down = g12 * pairs + p.gamma12_prime * x;
    const double total = up + down;
    if (total <= 0.0) break;
    t += std::exponential_distribution<double>(total)(rng);
    if (t > horizon) break;
    x1 += unit(rng) * total < up ? 1 : -1;
    on_jump(t, x1);
  }
  return x1;
}

}  // namespace

JumpTrajectory gillespie_voter(const VoterParams& params, int x1_0, double horizon, std::uint64_t seed) {
  check_voter(params, x1_0);
  JumpTrajectory traj;
  traj.times.push_back(0.0);
  traj.counts.push_back(x1_0);
  Rng rng(seed);
  run_voter(params, x1_0, horizon, rng, [&](double t, int x1) {
    traj.times.push_back(t);
    traj.counts.push_back(x1);
  });
  return traj;
}

int gillespie_voter_advance(const VoterParams& params, int x1, double horizon, Rng& rng) {
  check_voter(params, x1);
  return run_voter(params, x1, horizon, rng, [](double, int) {});
}

double voter_kurtz_drift(const VoterParams& p, double c) {
  return (p.rate21() - p.rate12()) * c * (1.0 - c) - p.gamma12_prime * c + p.gamma21_prime * (1.0 - c);
}

double voter_kurtz_diffusion(const VoterParams& p, double c) {
  return ((p.rate12() + p.rate21()) * c * (1.0 - c) + p.gamma12_prime * c + p.gamma21_prime * (1.0 - c)) /
         p.agents;
}

// ---------------------------------------------------------------------------
// SIR

SirParams SirParams::one_group(double population, double beta, double gamma) {
  SirParams p;
  p.population = population;
  p.gamma = gamma;
  p.group_fractions = {1.0};
  p.contact = {beta};
  p.validate();
  return p;
}

SirParams SirParams::two_group(double population, double child_fraction, double beta_aa, double beta_ac,
                               double beta_ca, double beta_cc, double gamma) {
  SirParams p;
  p.population = population;
  p.gamma = gamma;
  p.group_fractions = {1.0 - child_fraction, child_fraction};
  p.contact = {beta_aa, beta_ac, beta_ca, beta_cc};
  p.validate();
  return p;
}

void SirParams::validate() const {
  const int g = groups();
  if (g != 1 && g != 2) throw ConfigurationError("SIR model supports one or two groups");
  if (!(population > 0.0)) throw ConfigurationError("SIR population must be positive");
  if (gamma < 0.0) throw ConfigurationError("SIR recovery rate must be non-negative");
  if (!(action_exponent > 0.0)) throw ConfigurationError("control action exponent must be positive");
  if (contact.size() != static_cast<std::size_t>(g * g)) throw ConfigurationError("contact table must be G x G");
  for (double b : contact) {
    if (b < 0.0) throw ConfigurationError("infection rates must be non-negative");
  }
  double total = 0.0;
  for (double f : group_fractions) {
    if (!(f > 0.0)) throw ConfigurationError("group fractions must be positive");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ConfigurationError("group sizes must sum to N");
}

namespace {

double group_factor(const SirParams& p, int g, const Vector& u) {
  if (p.groups() == 1) return 1.0 - u(0);
  return g == 0 ? 1.0 - u(1) : 1.0 - u(0);  // adults: work, children: school
}

void check_sir_control(const SirParams& p, const Vector& u) {
  if (u.size() != p.control_dimension()) {
    throw ConfigurationError("SIR control has dimension " + std::to_string(u.size()) + ", expected " +
                             std::to_string(p.control_dimension()));
  }
}

// Infection flux into I_g (fractions of N per unit time).
Vector infection_flux(const SirParams& p, const Vector& s, const Vector& i, const Vector& u) {
  const int g = p.groups();
  Vector lambda = Vector::Zero(g);
  for (int a = 0; a < g; ++a) {
    for (int b = 0; b < g; ++b) lambda(a) += p.infection_rate(a, b, u) * i(b);
    lambda(a) *= s(a);
  }
  return lambda;
}

}  // namespace

double SirParams::infection_rate(int g, int h, const Vector& u) const {
  const double base = contact[static_cast<std::size_t>(g * groups() + h)];
  double phi = group_factor(*this, g, u) * group_factor(*this, h, u);
  if (phi < 0.0) phi = 0.0;
  return base * (action_exponent == 2.0 ? phi : std::pow(phi, 0.5 * action_exponent));
}

Vector sir_drift(const SirParams& params, const Vector& x, const Vector& u) {
  check_sir_control(params, u);
  const int g = params.groups();
  if (x.size() != 2 * g) throw ConfigurationError("SIR state must be [S.., I..]");
  const Vector lambda = infection_flux(params, x.head(g), x.tail(g), u);
  Vector b(2 * g);
  b.head(g) = -lambda;
  b.tail(g) = lambda - params.gamma * x.tail(g);
  return b;
}

Matrix sir_diffusion(const SirParams& params, const Vector& x, const Vector& u) {
  check_sir_control(params, u);
  const int g = params.groups();
  if (x.size() != 2 * g) throw ConfigurationError("SIR state must be [S.., I..]");
  const Vector lambda = infection_flux(params, x.head(g), x.tail(g), u);
  Matrix a = Matrix::Zero(2 * g, 2 * g);
  for (int k = 0; k < g; ++k) {
    a(k, k) = lambda(k);
    a(k, g + k) = -lambda(k);
    a(g + k, k) = -lambda(k);
    a(g + k, g + k) = lambda(k) + params.gamma * x(g + k);
  }
  return a / params.population;
}

// ---------------------------------------------------------------------------
// Control schedules

ControlSchedule ControlSchedule::constant(Vector u) {
  ControlSchedule s;
  s.kind = Kind::constant;
  s.value = std::move(u);
  return s;
}

ControlSchedule ControlSchedule::logistic(double plateau, double offset, double steepness, bool literal) {
  if (!(plateau > 0.0) || !(offset > 0.0)) throw ConfigurationError("logistic control needs A > 0 and Q > 0");
  ControlSchedule s;
  s.kind = literal ? Kind::logistic_literal : Kind::logistic;
  s.plateau = plateau;
  s.offset = offset;
  s.steepness = steepness;
  return s;
}

int ControlSchedule::dimension() const {
  return kind == Kind::constant ? static_cast<int>(value.size()) : 1;
}

std::pair<double, double> logistic_control(const ControlSchedule& s, double t) {
  if (s.kind == ControlSchedule::Kind::constant) throw ConfigurationError("schedule is not logistic");
  if (!(s.plateau > 0.0) || !(s.offset > 0.0)) throw ConfigurationError("logistic control needs A > 0 and Q > 0");
  if (t < 0.0) throw ConfigurationError("logistic control is defined for t >= 0");
  const double a = s.plateau;
  const double q = s.offset;
  const double b = s.steepness;
  if (s.kind == ControlSchedule::Kind::logistic) {
    const double u = a / (1.0 + q * std::exp(-b * t));
    return {u, b * u * (1.0 - u / a)};
  }
  // A Q / (1 + e^{Bt}) written with e^{-Bt} to stay finite for large t.
  const double e = std::exp(-b * t);
  const double u = a * q * e / (1.0 + e);
  return {u, -b * u * (1.0 - u / (a * q))};
}

double logistic_rate_from_value(const ControlSchedule& s, double u) {
  const double b = s.steepness;
  if (s.kind == ControlSchedule::Kind::logistic) return b * u - (b / s.plateau) * u * u;
  if (s.kind == ControlSchedule::Kind::logistic_literal) return -b * u + (b / (s.plateau * s.offset)) * u * u;
  throw ConfigurationError("schedule is not logistic");
}

Vector ControlSchedule::at(double t) const {
  if (kind == Kind::constant) return value;
  return Vector::Constant(1, logistic_control(*this, t).first);
}

Vector ControlSchedule::rate(double t) const {
  if (kind == Kind::constant) return Vector::Zero(value.size());
  return Vector::Constant(1, logistic_control(*this, t).second);
}

// ---------------------------------------------------------------------------
// SIR integration

namespace {

struct StepStats {
  int clamps = 0;
  double conservation = 0.0;
};

// One Euler-Maruyama step on the full [S.., I.., R..] state.
void sir_step(const SirParams& p, Vector& y, const Vector& u, double dt, Rng& rng, StepStats& stats) {
  const int g = p.groups();
  const Vector lambda = infection_flux(p, y.head(g), y.segment(g, g), u);
  std::normal_distribution<double> normal;
  Vector delta(3 * g);
  for (int k = 0; k < g; ++k) {
    const double inf = lambda(k) * dt;
    const double rec = p.gamma * y(g + k) * dt;
    double inf_noise = 0.0;
    double rec_noise = 0.0;
    if (p.noise) {
      inf_noise = std::sqrt(std::max(inf, 0.0) / p.population) * normal(rng);
      rec_noise = std::sqrt(std::max(rec, 0.0) / p.population) * normal(rng);
    }
    // Flows are clipped so that no compartment goes negative; S + I + R is kept exactly.
    const double s_k = y(k);
    const double i_k = y(g + k);
    const double r_k = y(2 * g + k);
    double flow_inf = inf + inf_noise;
    double flow_rec = rec + rec_noise;
    if (std::abs(flow_inf) > 0.5 || std::abs(flow_rec) > 0.5) {
      throw StabilityError("SIR step moved a fraction by more than 0.5; reduce dt");
    }
    const double clipped_inf = std::clamp(flow_inf, -i_k, s_k);
    const double clipped_rec = std::clamp(flow_rec, -r_k, i_k + clipped_inf);
    if (clipped_inf != flow_inf) ++stats.clamps;
    if (clipped_rec != flow_rec) ++stats.clamps;
    flow_inf = clipped_inf;
    flow_rec = clipped_rec;
    delta(k) = -flow_inf;
    delta(g + k) = flow_inf - flow_rec;
    delta(2 * g + k) = flow_rec;
  }
  y += delta;
  for (int k = 0; k < g; ++k) {
    const double n_k = p.group_fractions[static_cast<std::size_t>(k)];
    stats.conservation = std::max(stats.conservation, std::abs(y(k) + y(g + k) + y(2 * g + k) - n_k));
    for (int c = 0; c < 3; ++c) y(c * g + k) = std::max(y(c * g + k), 0.0);  // rounding only
  }
}

Vector full_state(const SirParams& p, const Vector& x) {
  const int g = p.groups();
  if (x.size() != 2 * g) throw ConfigurationError("SIR state must be [S.., I..]");
  Vector y(3 * g);
  y.head(2 * g) = x;
  for (int k = 0; k < g; ++k) {
    if (x(k) < 0.0 || x(g + k) < 0.0) throw ConfigurationError("SIR fractions must be non-negative");
    const double r = p.group_fractions[static_cast<std::size_t>(k)] - x(k) - x(g + k);
    if (r < -1e-12) throw ConfigurationError("SIR state exceeds its group size");
    y(2 * g + k) = std::max(r, 0.0);
  }
  return y;
}

int step_count(double span, double dt) {
  if (!(dt > 0.0)) throw ConfigurationError("dt must be positive");
  if (span < 0.0) throw ConfigurationError("integration span must be non-negative");
  return std::max(1, static_cast<int>(std::ceil(span / dt - 1e-9)));
}

}  // namespace

SirTrajectory simulate_sir(const SirParams& params, const ControlSchedule& schedule, const Vector& x0,
                           double horizon, double dt, std::uint64_t seed, int record_stride) {
  params.validate();
  if (schedule.dimension() != params.control_dimension()) {
    throw ConfigurationError("control schedule dimension does not match the SIR model");
  }
  if (record_stride < 1) throw ConfigurationError("record stride must be >= 1");
  const int steps = step_count(horizon, dt);
  Vector y = full_state(params, x0);
  Rng rng(seed);
  StepStats stats;

  const int rows = steps / record_stride + 1 + (steps % record_stride != 0 ? 1 : 0);
  SirTrajectory out;
  out.states.resize(rows, y.size());
  out.controls.resize(rows, schedule.dimension());
  int row = 0;
  auto record = [&](double t) {
    out.times.push_back(t);
    out.states.row(row) = y.transpose();
    out.controls.row(row) = schedule.at(t).transpose();
    ++row;
  };
  record(0.0);
  for (int s = 0; s < steps; ++s) {
    const double t = s * dt;
    sir_step(params, y, schedule.at(t), dt, rng, stats);
    if ((s + 1) % record_stride == 0 || s + 1 == steps) record((s + 1) * dt);
  }
  out.clamp_events = stats.clamps;
  out.max_conservation_error = stats.conservation;
  return out;
}

Vector sir_advance(const SirParams& params, const Vector& x, const Vector& u, double tau, double dt, Rng& rng) {
  check_sir_control(params, u);
  const int steps = step_count(tau, dt);
  Vector y = full_state(params, x);
  StepStats stats;
  for (int s = 0; s < steps; ++s) sir_step(params, y, u, dt, rng, stats);
  return y.head(2 * params.groups());
}

// ---------------------------------------------------------------------------
// Propagators, Kramers-Moyal, ensembles

Propagator voter_propagator(const VoterParams& params) {
  return [params](const Vector& x, const Vector& u, double tau, Rng& rng) {
    const VoterParams p = u.size() == 0 ? params : params.with_control(u);
    const double scaled = x(0) * p.agents;
    const double k = std::round(scaled);
    if (std::abs(scaled - k) > 1e-9) warn("voter state is not a multiple of 1/N; snapped to the lattice");
    const int x1 = gillespie_voter_advance(p, static_cast<int>(k), tau, rng);
    return Vector::Constant(1, static_cast<double>(x1) / p.agents);
  };
}

Propagator sir_propagator(const SirParams& params, double dt) {
  params.validate();
  return [params, dt](const Vector& x, const Vector& u, double tau, Rng& rng) {
    return sir_advance(params, x, u, tau, dt, rng);
  };
}

KmEstimate km_estimate(const Propagator& propagate, const Vector& x, const Vector& u, double tau, int n,
                       std::uint64_t seed, Exec exec) {
  if (!(tau > 0.0)) throw ConfigurationError("Kramers-Moyal horizon tau must be positive");
  if (n < 2) throw ConfigurationError("Kramers-Moyal estimate needs n >= 2 runs");
  const Eigen::Index d = x.size();
  Matrix dx(d, n);
  for_each_seeded(exec, static_cast<std::size_t>(n), seed, streams::kramers_moyal, [&](std::size_t r, Rng& rng) {
    const Vector y = propagate(x, u, tau, rng);
    if (y.size() != d) throw ConfigurationError("propagator changed the state dimension");
    dx.col(static_cast<Eigen::Index>(r)) = y - x;
  });

  const double nn = n;
  const Vector mean = dx.rowwise().mean();
  const Matrix centered = dx.colwise() - mean;
  const Matrix cov = centered * centered.transpose() / (nn - 1.0);

  KmEstimate est;
  est.x = x;
  est.u = u;
  est.tau = tau;
  est.samples = n;
  est.drift = mean / tau;
  est.diffusion = 0.5 * (cov + cov.transpose()) / tau;
  est.drift_se = (cov.diagonal().cwiseSqrt() / std::sqrt(nn)) / tau;
  est.diffusion_se = Matrix::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const Eigen::ArrayXd prod = centered.row(i).array() * centered.row(j).array();
      const double var = (prod - prod.mean()).square().sum() / (nn - 1.0);
      est.diffusion_se(i, j) = est.diffusion_se(j, i) = std::sqrt(var / nn) / tau;
    }
  }
  return est;
}

EnsembleSummary ensemble_mean(const std::function<Vector(Rng&)>& draw, int n, std::uint64_t seed, Exec exec,
                              double z) {
  if (n < 2) throw ConfigurationError("ensemble needs n >= 2 members");
  std::vector<Vector> values(static_cast<std::size_t>(n));
  for_each_seeded(exec, values.size(), seed, streams::ensemble, [&](std::size_t r, Rng& rng) {
    values[r] = draw(rng);
  });
  const Eigen::Index d = values.front().size();
  Vector sum = Vector::Zero(d);
  for (const auto& v : values) {
    if (v.size() != d) throw ConfigurationError("ensemble members differ in dimension");
    sum += v;
  }
  EnsembleSummary out;
  out.samples = n;
  out.mean = sum / n;
  Vector ss = Vector::Zero(d);
  for (const auto& v : values) ss += (v - out.mean).cwiseAbs2();
  out.sd = (ss / (n - 1.0)).cwiseSqrt();
  out.halfwidth = z * out.sd / std::sqrt(static_cast<double>(n));
  return out;
}

EnsembleSummary ensemble_mean(const Propagator& propagate, const Vector& x0, const Vector& u, double t, int n,
                              std::uint64_t seed, Exec exec, double z) {
  return ensemble_mean([&](Rng& rng) { return propagate(x0, u, t, rng); }, n, seed, exec, z);
}

}  // namespace koopmoo
