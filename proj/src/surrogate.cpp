#include "koopmoo/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "koopmoo/errors.hpp"
#include "koopmoo/expm.hpp"
#include "koopmoo/io.hpp"
#include "koopmoo/rng.hpp"

namespace koopmoo {

void ObjectiveSpec::validate() const {
  if (control_only) return;
  if (!running && !terminal) throw ConfigurationError("objective '" + name + "' has no cost terms");
  if (!(t0 < t1)) throw ConfigurationError("objective '" + name + "' needs t0 < t1");
  if (!(step > 0.0)) throw ConfigurationError("objective '" + name + "' needs a positive step");
}

double propagate_observable(const GeneratorMatrix& generator, const Vector& c, const Vector& x0, double t) {
  if (t < 0.0) throw ConfigurationError("propagation time must be non-negative");
  const Matrix& l = generator.matrix;
  if (c.size() != l.rows()) throw ConfigurationError("observable coefficients do not match the dictionary");
  const Vector psi = generator.dictionary.eval(x0);
  if (t == 0.0) return c.dot(psi);
  if (spectral_abscissa(l) * t > 700.0) {
    throw HorizonError("exp(tL) would overflow: spectral abscissa times t exceeds 700");
  }
  return (expm(t * l) * c).dot(psi);
}

namespace {

struct Grid {
  int steps;
  double dt;
};

Grid make_grid(double horizon, double dt) {
  if (!(dt > 0.0)) throw ConfigurationError("time step must be positive");
  if (!(horizon > 0.0)) throw ConfigurationError("horizon must be positive");
  const int steps = std::max(1, static_cast<int>(std::ceil(horizon / dt - 1e-9)));
  return {steps, horizon / steps};
}

// Drift/diffusion callbacks on the integrated state.
struct Dynamics {
  std::function<Vector(const Vector&)> drift;
  std::function<Matrix(const Vector&)> diffusion;  // empty for drift-only models
};

ReducedTrajectory integrate(const Dynamics& dyn, const Vector& x0, double horizon, const SimulationOptions& options,
                            Eigen::Index output_columns) {
  const Grid grid = make_grid(horizon, options.dt);
  const bool noisy = !options.mean_field && static_cast<bool>(dyn.diffusion);
  const int paths = noisy ? options.paths : 1;
  if (paths < 1) throw ConfigurationError("simulate_reduced needs at least one path");

  const Eigen::Index d = x0.size();
  std::vector<Matrix> per_path(static_cast<std::size_t>(paths));
  std::vector<int> fallbacks(static_cast<std::size_t>(paths), 0);
  std::vector<int> clamps(static_cast<std::size_t>(paths), 0);
  const double sqrt_dt = std::sqrt(grid.dt);

  for_each_index(options.exec, per_path.size(), [&](std::size_t p) {
    Rng rng = make_rng(options.seed, streams::reduced_paths, p);
    std::normal_distribution<double> normal;
    Matrix& out = per_path[p];
    out.resize(grid.steps + 1, output_columns);
    Vector x = x0;
    out.row(0) = x.head(output_columns).transpose();
    Vector xi(d);
    for (int s = 0; s < grid.steps; ++s) {
      Vector next = x + grid.dt * dyn.drift(x);
      if (noisy) {
        Matrix sigma;
        bool ok = true;
        try {
          sigma = psd_factor(dyn.diffusion(x));
        } catch (const IndefiniteDiffusionError&) {
          ok = false;
          ++fallbacks[p];
        }
        if (ok) {
          for (Eigen::Index k = 0; k < sigma.cols(); ++k) xi(k) = normal(rng);
          next.head(sigma.rows()) += sqrt_dt * sigma * xi.head(sigma.cols());
        }
      }
      if (options.clamp) {
        for (Eigen::Index k = 0; k < output_columns; ++k) {
          const double v = std::clamp(next(k), options.clamp->first, options.clamp->second);
          if (v != next(k)) {
            next(k) = v;
            ++clamps[p];
          }
        }
      }
      x = std::move(next);
      out.row(s + 1) = x.head(output_columns).transpose();
    }
  });

  ReducedTrajectory traj;
  traj.provenance = noisy ? ReducedTrajectory::Provenance::ensemble : ReducedTrajectory::Provenance::mean_field;
  traj.times.resize(static_cast<std::size_t>(grid.steps) + 1);
  for (int s = 0; s <= grid.steps; ++s) traj.times[static_cast<std::size_t>(s)] = s * grid.dt;
  traj.times.back() = horizon;
  traj.states = Matrix::Zero(grid.steps + 1, output_columns);
  for (std::size_t p = 0; p < per_path.size(); ++p) {
    traj.states += per_path[p];
    traj.indefinite_fallbacks += fallbacks[p];
    traj.clamp_events += clamps[p];
  }
  traj.states /= paths;
  return traj;
}

}  // namespace

ReducedTrajectory simulate_reduced(const SdeModel& model, const Vector& x0, double horizon,
                                   const SimulationOptions& options) {
  if (x0.size() != model.dimension()) throw ConfigurationError("initial state does not match the model dimension");
  Dynamics dyn;
  dyn.drift = [&](const Vector& x) { return model.drift_at(x); };
  if (model.has_diffusion()) dyn.diffusion = [&](const Vector& x) { return model.diffusion_at(x); };
  auto traj = integrate(dyn, x0, horizon, options, x0.size());
  traj.model = "sde";
  return traj;
}

ReducedTrajectory simulate_reduced(const AugmentedModel& model, const Vector& u, const Vector& x0, double horizon,
                                   const SimulationOptions& options,
                                   const std::function<Vector(const Vector&)>& u_drift) {
  const int d = model.state_dimension;
  const int du = model.control_dimension;
  if (x0.size() != d) throw ConfigurationError("initial state does not match the model's state dimension");
  if (u.size() != du) throw ConfigurationError("control does not match the model's control dimension");
  Vector z0(d + du);
  z0 << x0, u;
  Dynamics dyn;
  dyn.drift = [&](const Vector& z) {
    Vector b = model.model.drift_at(z);
    b.tail(du) = u_drift ? u_drift(z.tail(du)) : Vector::Zero(du);
    return b;
  };
  if (model.model.has_diffusion()) {
    dyn.diffusion = [&](const Vector& z) { return Matrix(model.model.diffusion_at(z).topLeftCorner(d, d)); };
  }
  auto traj = integrate(dyn, z0, horizon, options, d);
  traj.model = "augmented";
  return traj;
}

double integrate_objective(const ObjectiveSpec& spec, const ReducedTrajectory& trajectory, const Vector& u) {
  if (spec.control_only) return spec.control_only(u);
  const auto n = trajectory.times.size();
  if (n == 0) throw ConfigurationError("empty trajectory");
  double total = 0.0;
  if (spec.running) {
    double prev = spec.running(trajectory.states.row(0).transpose(), u);
    for (std::size_t k = 1; k < n; ++k) {
      const double cur = spec.running(trajectory.states.row(static_cast<Eigen::Index>(k)).transpose(), u);
      total += 0.5 * (trajectory.times[k] - trajectory.times[k - 1]) * (prev + cur);
      prev = cur;
    }
  }
  if (spec.terminal) {
    total += spec.terminal(trajectory.states.row(static_cast<Eigen::Index>(n) - 1).transpose(), u);
  }
  return total;
}

Vector evaluate_objectives(const std::vector<ObjectiveSpec>& specs, const ModelAtControl& model, const Vector& u,
                           const Vector& x0, const SimulationOptions& options) {
  if (specs.empty()) throw ConfigurationError("no objectives given");
  Vector f(static_cast<Eigen::Index>(specs.size()));
  std::optional<SdeModel> identified;
  std::map<std::tuple<double, double, double>, ReducedTrajectory> cache;
  for (std::size_t k = 0; k < specs.size(); ++k) {
    const auto& spec = specs[k];
    spec.validate();
    if (!spec.needs_trajectory()) {
      f(static_cast<Eigen::Index>(k)) = spec.control_only(u);
      continue;
    }
    const auto key = std::make_tuple(spec.t0, spec.t1, spec.step);
    auto it = cache.find(key);
    if (it == cache.end()) {
      if (!identified) identified = model(u);
      SimulationOptions sim = options;
      sim.dt = spec.step;
      it = cache.emplace(key, simulate_reduced(*identified, x0, spec.t1 - spec.t0, sim)).first;
    }
    f(static_cast<Eigen::Index>(k)) = integrate_objective(spec, it->second, u);
  }
  return f;
}

double trajectory_rmse(const ReducedTrajectory& reference, const ReducedTrajectory& candidate) {
  if (reference.states.cols() != candidate.states.cols()) {
    throw ConfigurationError("trajectories have different state dimensions");
  }
  if (candidate.times.empty() || reference.times.empty()) throw ConfigurationError("empty trajectory");
  const auto& ct = candidate.times;
  const double lo = ct.front();
  const double hi = ct.back();
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < reference.times.size(); ++r) {
    const double t = reference.times[r];
    if (t < lo - 1e-12 || t > hi + 1e-12) continue;
    auto it = std::lower_bound(ct.begin(), ct.end(), t);
    Vector value;
    if (it == ct.end()) {
      value = candidate.states.row(static_cast<Eigen::Index>(ct.size()) - 1).transpose();
    } else if (*it == t || it == ct.begin()) {
      value = candidate.states.row(it - ct.begin()).transpose();
    } else {
      const auto j = it - ct.begin();
      const double w = (t - ct[static_cast<std::size_t>(j - 1)]) / (*it - ct[static_cast<std::size_t>(j - 1)]);
      value = ((1.0 - w) * candidate.states.row(j - 1) + w * candidate.states.row(j)).transpose();
    }
    sum += (reference.states.row(static_cast<Eigen::Index>(r)).transpose() - value).squaredNorm();
    count += static_cast<std::size_t>(value.size());
  }
  if (count == 0) throw ConfigurationError("trajectories share no time range");
  return std::sqrt(sum / static_cast<double>(count));
}

void write_trajectory_csv(const std::filesystem::path& path, const ReducedTrajectory& trajectory,
                          const std::vector<std::string>& names) {
  write_trajectory_csv(path, trajectory.times, trajectory.states, names);
}

}  // namespace koopmoo
