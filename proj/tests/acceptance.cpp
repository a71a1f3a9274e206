// Acceptance runner: one PASS/FAIL line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "koopmoo/abm.hpp"
#include "koopmoo/control_models.hpp"
#include "koopmoo/diagnostics.hpp"
#include "koopmoo/dictionary.hpp"
#include "koopmoo/expm.hpp"
#include "koopmoo/experiments.hpp"
#include "koopmoo/gedmd.hpp"
#include "koopmoo/moo.hpp"
#include "oracles.hpp"

using namespace koopmoo;

namespace {

// Every criterion draws from the project's default master seed.
const std::uint64_t master_seed = ExperimentConfig::defaults().seed;

struct Outcome {
  bool ok = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double limit_seconds;  // <= 0: no limit
  std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Polynomial as exponent -> coefficient, expanded onto a dictionary.
using Poly = std::map<MultiIndex, double>;

Poly mul(const Poly& a, const Poly& b) {
  Poly out;
  for (const auto& [ea, ca] : a) {
    for (const auto& [eb, cb] : b) {
      MultiIndex e(ea.size());
      for (std::size_t i = 0; i < e.size(); ++i) e[i] = ea[i] + eb[i];
      out[e] += ca * cb;
    }
  }
  return out;
}

Poly add(Poly a, const Poly& b, double s = 1.0) {
  for (const auto& [e, c] : b) a[e] += s * c;
  return a;
}

Vector coefficients(const Dictionary& dict, const Poly& p) {
  Vector c = Vector::Zero(static_cast<Eigen::Index>(dict.size()));
  for (const auto& [e, v] : p) {
    if (v == 0.0) continue;
    bool found = false;
    for (std::size_t k = 0; k < dict.size(); ++k) {
      if (dict.exponents(k) == e) {
        c(static_cast<Eigen::Index>(k)) = v;
        found = true;
      }
    }
    if (!found) throw std::logic_error("oracle polynomial leaves the dictionary");
  }
  return c;
}

// 1. Generator of x1' = (gamma + u) x1, x2' = delta (x2 - x1^2) on {1, x1, x2, x1^2}.
Outcome example2() {
  const double gamma = 0.3;
  const double delta = -1.0;
  double worst = 0.0;
  for (double u : {0.0, 0.2, 1.0}) {
    const double lambda = gamma + u;
    // columns: L applied to 1, x1, x2, x1^2, expanded over the dictionary
    Matrix expected = Matrix::Zero(4, 4);
    expected(1, 1) = lambda;
    expected(2, 2) = delta;
    expected(3, 2) = -delta;
    expected(3, 3) = 2.0 * lambda;
    const auto gen = fit_generator(example2_dictionary(), example2_samples(gamma, delta, u, 50, master_seed));
    worst = std::max(worst, (gen.matrix - expected).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-8, fmt("max entry error %.3e (tol 1e-8)", worst)};
}

// 2. Affinity of the generator in the control.
Outcome affinity() {
  const auto aff = run_affinity_checks(master_seed);
  const double exact = *std::max_element(aff.affine_exact.begin(), aff.affine_exact.end());
  const double ratio = aff.sir_quadratic / aff.sir_affine_noise_floor;
  return {exact <= 1e-8 && ratio > 10.0,
          fmt("control-affine defect %.3e (tol 1e-8); quadratic SIR defect %.3e = %.1fx noise floor %.3e", exact,
              aff.sir_quadratic, ratio, aff.sir_affine_noise_floor)};
}

// 3. Augmented identification of the one-group SIR with the logistic control law.
Outcome example3() {
  const double beta = 0.5;
  const double g = 0.05;
  const double n = 100.0;
  const SirParams params = SirParams::one_group(n, beta, g);
  const auto law = ControlSchedule::logistic();
  const auto model = learn_augmented(Dictionary::monomials(3, 5), example3_samples(params, law, 1000, master_seed), {});
  const auto& dict = model.model.dictionary;
  // z = (S, I, u)
  const Poly s{{{1, 0, 0}, 1.0}};
  const Poly i{{{0, 1, 0}, 1.0}};
  const Poly u{{{0, 0, 1}, 1.0}};
  const Poly one{{{0, 0, 0}, 1.0}};
  const Poly damp = add(one, u, -1.0);  // 1 - u
  const Poly force = mul(mul(mul(s, i), mul(damp, damp)), Poly{{{0, 0, 0}, beta}});
  const Poly rec = mul(i, Poly{{{0, 0, 0}, g}});
  const Poly law_rate = add(mul(u, Poly{{{0, 0, 0}, law.steepness}}),
                            mul(mul(u, u), Poly{{{0, 0, 0}, -law.steepness / law.plateau}}));
  Matrix drift(static_cast<Eigen::Index>(dict.size()), 3);
  drift.col(0) = coefficients(dict, mul(force, Poly{{{0, 0, 0}, -1.0}}));
  drift.col(1) = coefficients(dict, add(force, rec, -1.0));
  drift.col(2) = coefficients(dict, law_rate);
  Matrix diffusion = Matrix::Zero(static_cast<Eigen::Index>(dict.size()), 9);
  diffusion.col(0) = coefficients(dict, force) / n;
  diffusion.col(1) = -coefficients(dict, force) / n;
  diffusion.col(3) = diffusion.col(1);
  diffusion.col(4) = coefficients(dict, add(force, rec)) / n;
  const double de = (model.model.drift - drift).cwiseAbs().maxCoeff();
  const double ae = (model.model.diffusion - diffusion).cwiseAbs().maxCoeff();
  return {de <= 1e-6 && ae <= 1e-6, fmt("drift coefficient error %.3e, diffusion %.3e (tol 1e-6)", de, ae)};
}

// 4. Kramers-Moyal estimates of the voter model against its Kurtz limit.
Outcome kurtz() {
  const VoterParams p;
  const std::vector<double> grid{0.1, 0.3, 0.5, 0.7, 0.9};
  const auto pts = run_kurtz_check(p, grid, 0.01, 10000, master_seed);
  double worst = 0.0;
  for (const auto& q : pts) {
    const double c = q.c;
    const double b = (p.gamma21 - p.gamma12) * c * (1 - c) - p.gamma12_prime * c + p.gamma21_prime * (1 - c);
    const double a =
        ((p.gamma12 + p.gamma21) * c * (1 - c) + p.gamma12_prime * c + p.gamma21_prime * (1 - c)) / p.agents;
    worst = std::max(worst, std::abs(q.estimate.drift(0) - b) / q.estimate.drift_se(0));
    worst = std::max(worst, std::abs(q.estimate.diffusion(0, 0) - a) / q.estimate.diffusion_se(0, 0));
  }
  return {worst <= 3.0, fmt("largest deviation %.2f standard errors (tol 3)", worst)};
}

// 5. Covering of the Pareto set [1.5, 2] of Example 1.
Outcome example1() {
  const auto ex = run_example1(12, 20, master_seed);
  const double w = ex.box_width;
  const bool width_ok = std::abs(w - 3.0 * std::ldexp(1.0, -12)) < 1e-15;
  const bool within = ex.covered_lower >= 1.5 - w - 1e-12 && ex.covered_upper <= 2.0 + w + 1e-12;
  // brute-force Pareto set on a 10^5 grid
  const int m = 100000;
  std::vector<Vector> f(m);
  std::vector<double> y(m);
  for (int k = 0; k < m; ++k) {
    y[k] = -0.5 + 3.0 * k / (m - 1);
    f[k] = Vector(2);
    f[k] << (y[k] - 1.5) * (y[k] - 1.5), y[k] * y[k] * (y[k] - 2.0) * (y[k] - 2.0);
  }
  std::vector<double> pareto;
  for (auto k : oracle::pareto_indices_2d(f)) pareto.push_back(y[k]);
  std::sort(pareto.begin(), pareto.end());
  double farthest = 0.0;
  const auto boxes = ex.result.tree.leaf_boxes();
  for (const auto& b : boxes) {
    const double c = b.center(0);
    auto it = std::lower_bound(pareto.begin(), pareto.end(), c);
    double d = INFINITY;
    if (it != pareto.end()) d = std::min(d, *it - c);
    if (it != pareto.begin()) d = std::min(d, c - *std::prev(it));
    farthest = std::max(farthest, d);
  }
  const bool ok = ex.covers_target && within && width_ok && farthest <= w;
  return {ok, fmt("union [%.6f, %.6f], w = %.3e, %zu boxes, farthest center from grid Pareto set %.3e",
                  ex.covered_lower, ex.covered_upper, w, boxes.size(), farthest)};
}

// 6. Voter MOO validated against the agent-based model on R*.
Outcome voter() {
  const auto config = ExperimentConfig::defaults(Scale::desk);
  const auto run = run_voter_moo(config);
  const auto& v = run.validation;
  const bool inside_ok = v.inside_nondominated == v.inside;
  const bool outside_ok = v.outside == 0 || v.outside_fraction() >= 0.9;
  return {inside_ok && outside_ok,
          fmt("inside covering %zu/%zu non-dominated; outside %zu/%zu = %.0f%% dominated (CI-inflated), %zu plain",
              v.inside_nondominated, v.inside, v.outside_dominated, v.outside, 100.0 * v.outside_fraction(),
              v.outside_dominated_plain)};
}

// 7. Epidemic stand-in: augmentation against interpolation and the economic objective.
Outcome epidemic() {
  const auto config = ExperimentConfig::defaults(Scale::desk);
  const auto run = run_epidemic_moo(config);
  std::map<std::pair<double, double>, std::map<std::string, double>> by_corner;
  for (const auto& r : run.rmse) by_corner[{r.u(0), r.u(1)}][r.model] = r.rmse;
  bool ordering = by_corner.size() == 4;
  std::ostringstream detail;
  for (const auto& [u, m] : by_corner) {
    const double a = m.at("augmented6");
    const double i = m.at("interpolation");
    ordering = ordering && a < i;
    detail << fmt("u=(%.1f,%.1f) aug6 %.5f %s interp %.5f; ", u.first, u.second, a, a < i ? "<" : ">=", i);
  }
  const auto& plan = config.epidemic;
  double worst = 0.0;
  std::size_t checked = 0;
  for (const auto& p : run.front) {
    if (!p.ok) continue;
    const double us = p.center(0);
    const double uw = p.center(1);
    const double expected = plan.horizon * (us * us - std::log(plan.u_w_max - uw));
    worst = std::max(worst, std::abs(p.f(1) - expected) / std::max(1.0, std::abs(expected)));
    ++checked;
  }
  const bool closed_form = checked > 0 && worst <= 1e-12;
  detail << fmt("f2 closed form over %zu front points: max rel error %.2e", checked, worst);
  return {ordering && closed_form, detail.str()};
}

// 8. Invariants and determinism.
Outcome invariants() {
  std::vector<std::string> failed;
  std::mt19937_64 rng(8);

  // archive mutual non-domination
  ParetoArchive archive;
  for (int k = 0; k < 3000; ++k) archive.insert(Vector::Zero(1), oracle::random_vector(rng, 3, 0.0, 1.0));
  for (const auto& a : archive.entries()) {
    for (const auto& b : archive.entries()) {
      if (&a != &b && oracle::weakly_better(a.f, b.f)) {
        failed.push_back("archive");
        goto archive_done;
      }
    }
  }
archive_done:

  // SIR group conservation
  {
    const auto p = SirParams::two_group(500.0, 0.3, 0.3, 0.2, 0.2, 0.4, 0.05);
    Vector x0(4);
    x0 << 0.68, 0.28, 0.02, 0.02;
    Vector u(2);
    u << 0.3, 0.1;
    const auto traj = simulate_sir(p, ControlSchedule::constant(u), x0, 100.0, 0.1, 4);
    double err = traj.max_conservation_error;
    for (Eigen::Index r = 0; r < traj.states.rows(); ++r) {
      err = std::max(err, std::abs(traj.states(r, 0) + traj.states(r, 2) + traj.states(r, 4) - 0.7));
      err = std::max(err, std::abs(traj.states(r, 1) + traj.states(r, 3) + traj.states(r, 5) - 0.3));
    }
    if (err > 1e-12 || traj.states.minCoeff() < 0.0) failed.push_back("conservation");
  }

  // semigroup property
  {
    const Matrix l = Matrix::Random(6, 6) - 2.0 * Matrix::Identity(6, 6);
    const Matrix lhs = expm(0.7 * l) * expm(1.1 * l);
    if ((lhs - expm(1.8 * l)).norm() > 1e-12 * std::max(1.0, lhs.norm())) failed.push_back("semigroup");
  }

  // dictionary derivatives against finite differences
  {
    const auto dict = Dictionary::monomials(3, 4);
    double worst = 0.0;
    for (int t = 0; t < 5; ++t) {
      const Vector x = oracle::random_vector(rng, 3, 0.3, 1.7);
      for (std::size_t k = 0; k < dict.size(); ++k) {
        const auto f = [&](const Vector& y) { return oracle::monomial(y, dict.exponents(k)); };
        const Vector g = dict.gradient(k, x);
        const Matrix h = dict.hessian(k, x);
        worst = std::max(worst, (g - oracle::fd_gradient(f, x)).cwiseAbs().maxCoeff() /
                                    std::max(1.0, g.cwiseAbs().maxCoeff()));
        worst = std::max(worst, (h - oracle::fd_hessian(f, x)).cwiseAbs().maxCoeff() /
                                    std::max(1.0, h.cwiseAbs().maxCoeff()));
      }
    }
    if (worst > 1e-6) failed.push_back(fmt("finite differences (%.1e)", worst));
  }

  // seeded byte-identical reruns of a small voter pipeline
  {
    auto c = ExperimentConfig::defaults(Scale::desk);
    c.voter.params.agents = 100;
    c.voter.state_points = 10;
    c.voter.mc_runs = 100;
    c.voter.iterations = 4;
    c.voter.samples_per_box = 4;
    c.voter.test_points = 3;
    c.voter.test_runs = 10;
    const auto a = oracle::scratch_dir("acceptance_a");
    const auto b = oracle::scratch_dir("acceptance_b");
    run_voter_moo(c, {a, false, Exec::parallel, false});
    run_voter_moo(c, {b, false, Exec::serial, false});
    auto strip = [](std::vector<std::pair<std::string, std::string>> files) {
      for (auto& [name, text] : files) {
        if (name == "report.json") {
          auto j = nlohmann::json::parse(text);
          j.erase("runtime_seconds");
          j.erase("warnings");
          text = j.dump();
        }
      }
      return files;
    };
    if (strip(oracle::tree_contents(a)) != strip(oracle::tree_contents(b))) failed.push_back("reruns");
  }

  std::string detail = "archive, conservation, semigroup, finite differences, reruns";
  if (!failed.empty()) {
    detail = "failed:";
    for (const auto& f : failed) detail += " " + f;
  }
  return {failed.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> only;
  bool report_only = false;
  app.add_option("--only", only, "criteria to run (default: all)");
  app.add_flag("--report-only", report_only, "exit 0 whenever every criterion ran to completion");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {1, "example 2 exactness", 1.0, example2},
      {2, "generator affinity", 10.0, affinity},
      {3, "example 3 identification", 30.0, example3},
      {4, "Kurtz consistency", 120.0, kurtz},
      {5, "example 1 Pareto covering", 30.0, example1},
      {6, "voter MOO validation", 900.0, voter},
      {7, "epidemic stand-in", 1800.0, epidemic},
      {8, "invariants and determinism", 0.0, invariants},
  };

  ScopedWarningCapture quiet;  // warnings are expected in the Monte Carlo runs
  bool all_ok = true;
  bool crashed = false;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("error: ") + e.what()};
      crashed = true;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = c.limit_seconds <= 0.0 || secs < c.limit_seconds;
    const bool ok = out.ok && in_time;
    all_ok = all_ok && ok;
    std::string timing = fmt("%.1fs", secs);
    if (c.limit_seconds > 0.0) timing += fmt(" < %.0fs%s", c.limit_seconds, in_time ? "" : " EXCEEDED");
    std::printf("criterion %d: %s  %s [%s]  %s\n", c.id, ok ? "PASS" : "FAIL", c.name.c_str(), timing.c_str(),
                out.detail.c_str());
    std::fflush(stdout);
  }
  if (report_only) return crashed ? 1 : 0;
  return all_ok ? 0 : 1;
}
