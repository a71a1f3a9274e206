#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "koopmoo/control_models.hpp"
#include "koopmoo/gedmd.hpp"
#include "koopmoo/parallel.hpp"

namespace koopmoo {

/// f = integral over [t0, t1] of running(x, u) dt + terminal(x(t1), u), evaluated on a
/// reduced trajectory; or, when control_only is set, a closed form in u alone.
struct ObjectiveSpec {
  std::string name;
  std::function<double(const Vector& x, const Vector& u)> running;
  std::function<double(const Vector& x, const Vector& u)> terminal;
  std::function<double(const Vector& u)> control_only;
  double t0 = 0.0;
  double t1 = 1.0;
  double step = 0.01;  // integrator and quadrature step

  bool needs_trajectory() const { return !control_only; }
  void validate() const;
};

struct ReducedTrajectory {
  enum class Provenance { propagated, mean_field, ensemble, reference };

  std::vector<double> times;
  Matrix states;  // one row per time
  Provenance provenance = Provenance::mean_field;
  std::string model;
  int indefinite_fallbacks = 0;
  int clamp_events = 0;
};

struct SimulationOptions {
  double dt = 0.01;
  int paths = 1;
  bool mean_field = true;  // drift only; paths is ignored
  std::uint64_t seed = 0;
  std::optional<std::pair<double, double>> clamp;  // componentwise state bounds after each step
  Exec exec = Exec::serial;
};

/// (exp(tL) c)^T psi(x0): the expectation of c^T psi(X_t) given X_0 = x0.
/// Throws HorizonError when spectral_abscissa(L) * t > 700.
double propagate_observable(const GeneratorMatrix& generator, const Vector& c, const Vector& x0, double t);

/// Euler-Maruyama ensemble mean (or mean-field integration) of an identified SDE.
/// A visited state with indefinite diffusion takes a drift-only step and is counted.
ReducedTrajectory simulate_reduced(const SdeModel& model, const Vector& x0, double horizon,
                                   const SimulationOptions& options);

/// Augmented model with the control coordinates held at u. `u_drift` supplies the
/// control's own law (zero for constant controls); the control coordinates are
/// noise-free. Only the state columns are returned.
ReducedTrajectory simulate_reduced(const AugmentedModel& model, const Vector& u, const Vector& x0, double horizon,
                                   const SimulationOptions& options,
                                   const std::function<Vector(const Vector&)>& u_drift = {});

/// Identified model for a constant control (interpolation or substitution).
using ModelAtControl = std::function<SdeModel(const Vector& u)>;

/// Objective vector for one constant control. A trajectory is simulated once per distinct
/// (t0, t1, step) among the specs; integrals use the trapezoidal rule on that grid.
Vector evaluate_objectives(const std::vector<ObjectiveSpec>& specs, const ModelAtControl& model, const Vector& u,
                           const Vector& x0, const SimulationOptions& options = {});

/// Integral of running cost plus terminal cost along a given trajectory.
double integrate_objective(const ObjectiveSpec& spec, const ReducedTrajectory& trajectory, const Vector& u);

/// Pooled RMSE over all components and the reference times covered by the candidate
/// (candidate values linearly interpolated). Disjoint time ranges are a ConfigurationError.
double trajectory_rmse(const ReducedTrajectory& reference, const ReducedTrajectory& candidate);

void write_trajectory_csv(const std::filesystem::path& path, const ReducedTrajectory& trajectory,
                          const std::vector<std::string>& names);

}  // namespace koopmoo
