#include "koopmoo/experiments.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>
#include <map>

#include "koopmoo/diagnostics.hpp"
#include "koopmoo/errors.hpp"
#include "koopmoo/io.hpp"
#include "koopmoo/rng.hpp"

namespace koopmoo {

namespace {

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Vector& v) { return {v.begin(), v.end()}; }

void progress(const RunOptions& options, const std::string& msg) {
  if (options.verbose) std::cerr << "[koopmoo] " << msg << std::endl;
}

template <class T>
void read_field(const nlohmann::json& j, const char* key, T& field) {
  if (!j.contains(key)) return;
  try {
    field = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigurationError(std::string("config field '") + key + "': " + e.what());
  }
}

}  // namespace

Scale parse_scale(const std::string& s) {
  if (s == "desk") return Scale::desk;
  if (s == "paper") return Scale::paper;
  throw ConfigurationError("unknown scale '" + s + "' (expected desk or paper)");
}

std::string to_string(Scale s) { return s == Scale::desk ? "desk" : "paper"; }

// ---------------------------------------------------------------------------
// Configuration

ExperimentConfig ExperimentConfig::defaults(Scale scale) {
  ExperimentConfig c;
  c.scale = scale;
  if (scale == Scale::paper) {
    c.voter.mc_runs = 100;
    c.epidemic.mc_runs = 1000;
  }
  return c;
}

void ExperimentConfig::validate() const {
  auto check_box = [](const std::vector<double>& lo, const std::vector<double>& hi, const char* what) {
    if (lo.size() != 2 || hi.size() != 2) throw ConfigurationError(std::string(what) + " must be 2-dimensional");
    for (std::size_t i = 0; i < 2; ++i) {
      if (!(lo[i] < hi[i])) throw ConfigurationError(std::string(what) + " needs lower < upper");
    }
  };
  const auto& v = voter;
  if (v.params.agents < 1) throw ConfigurationError("voter model needs agents >= 1");
  if (v.initial_fraction < 0.0 || v.initial_fraction > 1.0) throw ConfigurationError("initial fraction outside [0, 1]");
  if (v.dictionary_degree < 1) throw ConfigurationError("dictionary degree must be >= 1");
  if (v.state_points < 1 || v.mc_runs < 2) throw ConfigurationError("voter sampling plan too small");
  if (!(v.tau > 0.0) || !(v.horizon > 0.0) || !(v.dt > 0.0)) throw ConfigurationError("voter times must be positive");
  if (v.learning_controls.empty()) throw ConfigurationError("voter learning controls are empty");
  for (const auto& u : v.learning_controls) {
    if (u.size() != 2) throw ConfigurationError("voter controls are (u_push, u_pull)");
  }
  check_box(v.region_lower, v.region_upper, "voter region");
  check_box(v.refined_lower, v.refined_upper, "voter refined region");
  if (v.iterations < 1 || v.samples_per_box < 1) throw ConfigurationError("voter MOO plan invalid");
  if (v.test_points < 0 || v.test_runs < 2) throw ConfigurationError("voter validation plan invalid");

  const auto& e = epidemic;
  e.params.validate();
  if (e.params.groups() != 2) throw ConfigurationError("epidemic stand-in needs two groups");
  if (!(e.horizon > 0.0) || !(e.dt > 0.0) || !(e.tau > 0.0)) throw ConfigurationError("epidemic times must be positive");
  if (e.subsample < 1 || e.training_points < 1) throw ConfigurationError("epidemic subsampling invalid");
  if ((e.training_points - 1) * e.subsample * e.dt > e.horizon + 1e-9) {
    throw ConfigurationError("epidemic training points exceed the horizon");
  }
  if (e.control_grid < 2 || e.mc_runs < 2) throw ConfigurationError("epidemic sampling plan too small");
  check_box(e.region_lower, e.region_upper, "epidemic region");
  if (e.region_lower[0] != 0.0 || e.region_lower[1] != 0.0) {
    throw ConfigurationError("epidemic region must start at the zero control (needed by interpolation)");
  }
  if (e.dictionary_degree < 2) throw ConfigurationError("epidemic dictionary degree must be >= 2");
  if (e.iterations < 1 || e.samples_per_box < 1) throw ConfigurationError("epidemic MOO plan invalid");
  if (e.reference_runs < 2 || e.test_runs < 2 || e.test_points < 0) {
    throw ConfigurationError("epidemic validation plan invalid");
  }
  if (e.infected_adults < 0.0 || e.infected_children < 0.0) throw ConfigurationError("initial infections negative");
}

nlohmann::json to_json(const ExperimentConfig& c) {
  const auto& v = c.voter;
  const auto& e = c.epidemic;
  nlohmann::json voter = {
      {"params",
       {{"agents", v.params.agents},
        {"gamma12", v.params.gamma12},
        {"gamma21", v.params.gamma21},
        {"gamma12_prime", v.params.gamma12_prime},
        {"gamma21_prime", v.params.gamma21_prime}}},
      {"initial_fraction", v.initial_fraction},
      {"dictionary_degree", v.dictionary_degree},
      {"state_points", v.state_points},
      {"mc_runs", v.mc_runs},
      {"tau", v.tau},
      {"learning_controls", v.learning_controls},
      {"horizon", v.horizon},
      {"dt", v.dt},
      {"region_lower", v.region_lower},
      {"region_upper", v.region_upper},
      {"refined_lower", v.refined_lower},
      {"refined_upper", v.refined_upper},
      {"iterations", v.iterations},
      {"samples_per_box", v.samples_per_box},
      {"test_points", v.test_points},
      {"test_runs", v.test_runs},
      {"confidence_z", v.confidence_z}};
  nlohmann::json epidemic = {
      {"params",
       {{"population", e.params.population},
        {"gamma", e.params.gamma},
        {"action_exponent", e.params.action_exponent},
        {"group_fractions", e.params.group_fractions},
        {"contact", e.params.contact},
        {"noise", e.params.noise}}},
      {"infected_adults", e.infected_adults},
      {"infected_children", e.infected_children},
      {"horizon", e.horizon},
      {"dt", e.dt},
      {"subsample", e.subsample},
      {"training_points", e.training_points},
      {"control_grid", e.control_grid},
      {"region_lower", e.region_lower},
      {"region_upper", e.region_upper},
      {"mc_runs", e.mc_runs},
      {"tau", e.tau},
      {"dictionary_degree", e.dictionary_degree},
      {"ridge", e.ridge},
      {"i_max", e.i_max},
      {"u_w_max", e.u_w_max},
      {"iterations", e.iterations},
      {"samples_per_box", e.samples_per_box},
      {"reference_runs", e.reference_runs},
      {"test_points", e.test_points},
      {"test_runs", e.test_runs},
      {"confidence_z", e.confidence_z},
      {"aggregated_model", e.aggregated_model}};
  return {{"id", c.id}, {"seed", c.seed}, {"scale", to_string(c.scale)}, {"voter", voter}, {"epidemic", epidemic}};
}

ExperimentConfig config_from_json(const nlohmann::json& j, const ExperimentConfig& base) {
  ExperimentConfig c = base;
  try {
    if (j.contains("scale")) {
      const Scale s = parse_scale(j.at("scale").get<std::string>());
      if (s != base.scale) {
        const auto d = ExperimentConfig::defaults(s);
        c.voter.mc_runs = d.voter.mc_runs;
        c.epidemic.mc_runs = d.epidemic.mc_runs;
      }
      c.scale = s;
    }
    read_field(j, "id", c.id);
    read_field(j, "seed", c.seed);
    if (j.contains("voter")) {
      const auto& jv = j.at("voter");
      auto& v = c.voter;
      if (jv.contains("params")) {
        const auto& p = jv.at("params");
        read_field(p, "agents", v.params.agents);
        read_field(p, "gamma12", v.params.gamma12);
        read_field(p, "gamma21", v.params.gamma21);
        read_field(p, "gamma12_prime", v.params.gamma12_prime);
        read_field(p, "gamma21_prime", v.params.gamma21_prime);
      }
      read_field(jv, "initial_fraction", v.initial_fraction);
      read_field(jv, "dictionary_degree", v.dictionary_degree);
      read_field(jv, "state_points", v.state_points);
      read_field(jv, "mc_runs", v.mc_runs);
      read_field(jv, "tau", v.tau);
      read_field(jv, "learning_controls", v.learning_controls);
      read_field(jv, "horizon", v.horizon);
      read_field(jv, "dt", v.dt);
      read_field(jv, "region_lower", v.region_lower);
      read_field(jv, "region_upper", v.region_upper);
      read_field(jv, "refined_lower", v.refined_lower);
      read_field(jv, "refined_upper", v.refined_upper);
      read_field(jv, "iterations", v.iterations);
      read_field(jv, "samples_per_box", v.samples_per_box);
      read_field(jv, "test_points", v.test_points);
      read_field(jv, "test_runs", v.test_runs);
      read_field(jv, "confidence_z", v.confidence_z);
    }
    if (j.contains("epidemic")) {
      const auto& je = j.at("epidemic");
      auto& e = c.epidemic;
      if (je.contains("params")) {
        const auto& p = je.at("params");
        read_field(p, "population", e.params.population);
        read_field(p, "gamma", e.params.gamma);
        read_field(p, "action_exponent", e.params.action_exponent);
        read_field(p, "group_fractions", e.params.group_fractions);
        read_field(p, "contact", e.params.contact);
        read_field(p, "noise", e.params.noise);
      }
      read_field(je, "infected_adults", e.infected_adults);
      read_field(je, "infected_children", e.infected_children);
      read_field(je, "horizon", e.horizon);
      read_field(je, "dt", e.dt);
      read_field(je, "subsample", e.subsample);
      read_field(je, "training_points", e.training_points);
      read_field(je, "control_grid", e.control_grid);
      read_field(je, "region_lower", e.region_lower);
      read_field(je, "region_upper", e.region_upper);
      read_field(je, "mc_runs", e.mc_runs);
      read_field(je, "tau", e.tau);
      read_field(je, "dictionary_degree", e.dictionary_degree);
      read_field(je, "ridge", e.ridge);
      read_field(je, "i_max", e.i_max);
      read_field(je, "u_w_max", e.u_w_max);
      read_field(je, "iterations", e.iterations);
      read_field(je, "samples_per_box", e.samples_per_box);
      read_field(je, "reference_runs", e.reference_runs);
      read_field(je, "test_points", e.test_points);
      read_field(je, "test_runs", e.test_runs);
      read_field(je, "confidence_z", e.confidence_z);
      read_field(je, "aggregated_model", e.aggregated_model);
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigurationError(std::string("malformed experiment config: ") + ex.what());
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Analytic checks

bool AnalyticReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

nlohmann::json to_json(const AnalyticReport& r) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : r.checks) {
    checks.push_back({{"name", c.name},
                      {"passed", c.passed},
                      {"measured", c.measured},
                      {"tolerance", c.tolerance},
                      {"detail", c.detail}});
  }
  return {{"all_passed", r.all_passed()}, {"checks", checks}};
}

Evaluator example1_objectives() {
  return [](const Vector& y) {
    const double v = y(0);
    Vector f(2);
    f << (v - 1.5) * (v - 1.5), v * v * v * v - 4.0 * v * v * v + 4.0 * v * v;
    return f;
  };
}

Example1Outcome run_example1(int iterations, int samples_per_box, std::uint64_t seed, Exec exec) {
  const Box region = Box::from_bounds(Vector::Constant(1, -0.5), Vector::Constant(1, 2.5));
  SamplingOptions opts{samples_per_box, seed, exec};
  Example1Outcome out{sampling_algorithm(region, example1_objectives(), iterations, opts)};
  out.box_width = 3.0 * std::ldexp(1.0, -iterations);
  auto boxes = out.result.tree.leaf_boxes();
  std::sort(boxes.begin(), boxes.end(), [](const Box& a, const Box& b) { return a.lower()(0) < b.lower()(0); });
  out.covered_lower = boxes.front().lower()(0);
  out.covered_upper = boxes.front().upper()(0);
  for (const auto& b : boxes) {
    out.covered_lower = std::min(out.covered_lower, b.lower()(0));
    out.covered_upper = std::max(out.covered_upper, b.upper()(0));
  }
  // Walk the sorted intervals from 1.5 and see whether they reach 2 without a gap.
  double reach = 1.5;
  for (const auto& b : boxes) {
    if (b.lower()(0) <= reach + 1e-12 && b.upper()(0) > reach) reach = b.upper()(0);
  }
  out.covers_target = reach >= 2.0 - 1e-12;
  return out;
}

Vector example2_drift(const Vector& x, double gamma, double delta, double u) {
  Vector b(2);
  b << (gamma + u) * x(0), delta * (x(1) - x(0) * x(0));
  return b;
}

Dictionary example2_dictionary() { return Dictionary::from_exponents(2, {{0, 0}, {1, 0}, {0, 1}, {2, 0}}); }

std::vector<SamplePoint> example2_samples(double gamma, double delta, double u, int m, std::uint64_t seed) {
  Rng rng = make_rng(seed, streams::state_points);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  std::vector<SamplePoint> out;
  for (int k = 0; k < m; ++k) {
    Vector x(2);
    x << unif(rng), unif(rng);
    out.push_back({x, example2_drift(x, gamma, delta, u), Matrix::Zero(2, 2)});
  }
  return out;
}

std::vector<SamplePoint> example3_samples(const SirParams& params, const ControlSchedule& law, int m,
                                          std::uint64_t seed) {
  Rng rng = make_rng(seed, streams::state_points);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<SamplePoint> out;
  for (int k = 0; k < m; ++k) {
    Vector x(2);
    x << unit(rng), unit(rng);
    const Vector u = Vector::Constant(1, law.plateau * unit(rng));
    const SamplePoint s{x, sir_drift(params, x, u), sir_diffusion(params, x, u)};
    out.push_back(augment_sample(s, u, Vector::Constant(1, logistic_rate_from_value(law, u(0)))));
  }
  return out;
}

void synthetic_affine_sde(const Vector& x, double u, Vector& b, Matrix& a) {
  b.resize(2);
  b << -x(0) + 0.5 * x(1) * x(1) + u * x(0), -x(1) + u * (1.0 - x(1));
  a.resize(2, 2);
  a << 1.0 + x(0) * x(0) + u * x(1) * x(1), 0.2 * x(0), 0.2 * x(0), 1.0 + u;
}

namespace {

// One-group SIR used for the affinity contrast.
SirParams affinity_sir(double exponent) {
  SirParams p = SirParams::one_group(1000.0, 0.5, 0.05);
  p.action_exponent = exponent;
  return p;
}

}  // namespace

AffinityOutcome run_affinity_checks(std::uint64_t seed, int km_runs, Exec exec) {
  AffinityOutcome out;
  out.alphas = {0.0, 0.25, 0.5, 1.0};
  const double u_a = 0.0;
  const double u_b = 1.0;

  // Synthetic control-affine SDE with exact data.
  const Dictionary dict2 = Dictionary::monomials(2, 4);
  std::vector<Vector> points;
  {
    Rng rng = make_rng(seed, streams::state_points, 1);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (int k = 0; k < 200; ++k) {
      Vector x(2);
      x << unif(rng), unif(rng);
      points.push_back(x);
    }
  }
  auto exact_generator = [&](double u) {
    std::vector<SamplePoint> samples;
    for (const auto& x : points) {
      SamplePoint s{x, Vector(), Matrix()};
      synthetic_affine_sde(x, u, s.b, s.a);
      samples.push_back(s);
    }
    return fit_generator(dict2, samples, 0.0, exec).matrix;
  };
  const Matrix la = exact_generator(u_a);
  const Matrix lb = exact_generator(u_b);
  for (double alpha : out.alphas) {
    const Matrix lmid = exact_generator(alpha * u_a + (1.0 - alpha) * u_b);
    out.affine_exact.push_back(affinity_defect(lmid, la, lb, alpha));
  }

  // SIR contrast: quadratic versus linear control action on identical estimated data.
  const double alpha = 0.5;
  // One Euler-Maruyama step per estimate: its increment moments are exactly b tau and a tau.
  const double dt = 0.1;
  const double tau = dt;
  const Dictionary dict_sir = Dictionary::monomials(2, 3);
  std::vector<Vector> states;
  {
    Rng rng = make_rng(seed, streams::state_points, 2);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int k = 0; k < 400; ++k) {
      const double s = 0.05 + 0.9 * unit(rng);
      const double i = 0.03 + (0.97 - s) * unit(rng);
      Vector x(2);
      x << s, i;
      states.push_back(x);
    }
  }
  auto sir_generator = [&](double exponent, double u, int control_index, bool exact) {
    const SirParams params = affinity_sir(exponent);
    const Vector uu = Vector::Constant(1, u);
    std::vector<SamplePoint> samples(states.size());
    const auto prop = sir_propagator(params, dt);
    for_each_index(exec, states.size(), [&](std::size_t k) {
      if (exact) {
        samples[k] = {states[k], sir_drift(params, states[k], uu), sir_diffusion(params, states[k], uu)};
      } else {
        const auto seed_k = sub_seed(seed, streams::kramers_moyal,
                                     static_cast<std::uint64_t>(control_index) * states.size() + k);
        samples[k] = km_estimate(prop, states[k], uu, tau, km_runs, seed_k, Exec::serial).sample();
      }
    });
    return fit_generator(dict_sir, samples, 0.0, Exec::serial).matrix;
  };
  auto sir_defect = [&](double exponent, bool exact) {
    const Matrix a = sir_generator(exponent, u_a, 0, exact);
    const Matrix b = sir_generator(exponent, u_b, 1, exact);
    const Matrix mid = sir_generator(exponent, alpha * u_a + (1.0 - alpha) * u_b, 2, exact);
    return affinity_defect(mid, a, b, alpha);
  };
  out.sir_quadratic = sir_defect(2.0, false);
  out.sir_affine_noise_floor = sir_defect(1.0, false);
  out.sir_quadratic_exact = sir_defect(2.0, true);
  out.sir_affine_exact = sir_defect(1.0, true);
  return out;
}

std::vector<KurtzPoint> run_kurtz_check(const VoterParams& params, const std::vector<double>& grid, double tau, int n,
                                        std::uint64_t seed, Exec exec) {
  std::vector<KurtzPoint> out;
  const auto prop = voter_propagator(params);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const Vector x = Vector::Constant(1, grid[k]);
    out.push_back({grid[k], km_estimate(prop, x, Vector::Zero(2), tau, n,
                                        sub_seed(seed, streams::kramers_moyal, k), exec)});
  }
  return out;
}

namespace {

// Coefficient table over `dict` from (coefficient, exponents) terms.
Vector expansion(const Dictionary& dict, const std::vector<std::pair<double, MultiIndex>>& terms) {
  Vector c = Vector::Zero(static_cast<Eigen::Index>(dict.size()));
  for (const auto& [coef, e] : terms) c(static_cast<Eigen::Index>(*dict.find(e))) += coef;
  return c;
}

CheckResult check(std::string name, double measured, double tolerance, bool passed, std::string detail = {}) {
  return {std::move(name), passed, measured, tolerance, std::move(detail)};
}

// Generator block on {x1, x2, x1^2} in the row-form convention d/dt f = L_u f.
Matrix example2_block(double gamma, double delta, double g) {
  Matrix l(3, 3);
  l << gamma + g, 0.0, 0.0, 0.0, delta, -delta, 0.0, 0.0, 2.0 * (gamma + g);
  return l;
}

Matrix example2_recovered_block(const Matrix& generator) {
  // Dictionary order {1, x1, x2, x1^2}; M = generator^T.
  return generator.transpose().bottomRightCorner(3, 3);
}

}  // namespace

AnalyticReport run_analytic_checks(std::uint64_t seed, Exec exec) {
  AnalyticReport report;

  // Example 1.
  {
    const auto ex = run_example1(12, 20, seed, exec);
    const double w = ex.box_width;
    report.checks.push_back(check("example1.covers_[1.5,2]", ex.covers_target ? 1.0 : 0.0, 1.0, ex.covers_target));
    const double overshoot = std::max(1.5 - ex.covered_lower, ex.covered_upper - 2.0);
    report.checks.push_back(check("example1.within_[1.5-w,2+w]", overshoot, w, overshoot <= w + 1e-12,
                                  "w = 3*2^-12"));
  }

  // Example 2.
  {
    const double gamma = 0.3;
    const double delta = -1.0;
    const std::vector<double> us{0.0, 0.2, 1.0};
    const Dictionary dict = example2_dictionary();
    std::vector<GeneratorMatrix> gens;
    std::vector<Vector> controls;
    double direct = 0.0;
    for (double u : us) {
      const auto samples = example2_samples(gamma, delta, u, 50, seed);
      gens.push_back(fit_generator(dict, samples, 0.0, exec));
      controls.push_back(Vector::Constant(1, u));
      direct = std::max(direct, (example2_recovered_block(gens.back().matrix) - example2_block(gamma, delta, u))
                                    .cwiseAbs()
                                    .maxCoeff());
    }
    report.checks.push_back(check("example2.direct_recovery", direct, 1e-8, direct <= 1e-8));
    const auto family = assemble_affine_family(controls, gens);
    Matrix a_expected = Matrix::Zero(3, 3);
    a_expected(0, 0) = 1.0;
    a_expected(2, 2) = 2.0;
    const double split =
        std::max((example2_recovered_block(family.base) - example2_block(gamma, delta, 0.0)).cwiseAbs().maxCoeff(),
                 (example2_recovered_block(family.channels[0]) - a_expected).cwiseAbs().maxCoeff());
    report.checks.push_back(check("example2.affine_split", split, 1e-8, split <= 1e-8));
  }

  // Example 3.
  {
    const SirParams params = SirParams::one_group(100.0, 0.5, 0.05);
    const auto law = ControlSchedule::logistic();
    const auto samples = example3_samples(params, law, 1000, seed);
    AugmentedOptions opts;
    opts.exec = exec;
    const auto model = learn_augmented(Dictionary::monomials(3, 5), samples, opts);
    const auto& dict = model.model.dictionary;
    const double beta = 0.5;
    const double g = 0.05;
    const double n = params.population;
    const std::vector<std::pair<double, MultiIndex>> inf{
        {beta, {1, 1, 0}}, {-2.0 * beta, {1, 1, 1}}, {beta, {1, 1, 2}}};
    auto scaled = [](std::vector<std::pair<double, MultiIndex>> t, double s) {
      for (auto& p : t) p.first *= s;
      return t;
    };
    auto with = [](std::vector<std::pair<double, MultiIndex>> t, std::pair<double, MultiIndex> extra) {
      t.push_back(std::move(extra));
      return t;
    };
    Matrix drift(static_cast<Eigen::Index>(dict.size()), 3);
    drift.col(0) = expansion(dict, scaled(inf, -1.0));
    drift.col(1) = expansion(dict, with(inf, {-g, {0, 1, 0}}));
    drift.col(2) = expansion(dict, {{law.steepness, {0, 0, 1}}, {-law.steepness / law.plateau, {0, 0, 2}}});
    Matrix diffusion = Matrix::Zero(static_cast<Eigen::Index>(dict.size()), 9);
    diffusion.col(0) = expansion(dict, scaled(inf, 1.0 / n));
    diffusion.col(1) = expansion(dict, scaled(inf, -1.0 / n));
    diffusion.col(3) = diffusion.col(1);
    diffusion.col(4) = expansion(dict, scaled(with(inf, {g, {0, 1, 0}}), 1.0 / n));
    const double de = (model.model.drift - drift).cwiseAbs().maxCoeff();
    const double ae = (model.model.diffusion - diffusion).cwiseAbs().maxCoeff();
    report.checks.push_back(check("example3.drift_coefficients", de, 1e-6, de <= 1e-6));
    report.checks.push_back(check("example3.diffusion_coefficients", ae, 1e-6, ae <= 1e-6));
  }

  // Kramers-Moyal against the Kurtz limit.
  {
    const VoterParams params;
    const auto pts = run_kurtz_check(params, {0.1, 0.3, 0.5, 0.7, 0.9}, 0.01, 10000, seed, exec);
    double worst = 0.0;
    for (const auto& p : pts) {
      worst = std::max(worst, std::abs(p.estimate.drift(0) - voter_kurtz_drift(params, p.c)) / p.estimate.drift_se(0));
      worst = std::max(worst, std::abs(p.estimate.diffusion(0, 0) - voter_kurtz_diffusion(params, p.c)) /
                                  p.estimate.diffusion_se(0, 0));
    }
    report.checks.push_back(check("kurtz.max_standard_errors", worst, 3.0, worst <= 3.0));
  }

  // Affinity.
  {
    const auto aff = run_affinity_checks(seed, 2000, exec);
    const double worst = *std::max_element(aff.affine_exact.begin(), aff.affine_exact.end());
    report.checks.push_back(check("affinity.control_affine_exact", worst, 1e-8, worst <= 1e-8));
    const double ratio = aff.sir_quadratic / aff.sir_affine_noise_floor;
    char detail[160];
    std::snprintf(detail, sizeof detail, "quadratic %.3e, affine floor %.3e; exact data: quadratic %.3e, affine %.3e",
                  aff.sir_quadratic, aff.sir_affine_noise_floor, aff.sir_quadratic_exact, aff.sir_affine_exact);
    report.checks.push_back(check("affinity.quadratic_over_noise_floor", ratio, 10.0, ratio > 10.0, detail));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Surrogate problems and validation

Vector SurrogateProblem::evaluate(const Vector& u) const {
  return evaluate_objectives(objectives, model, u, x0, simulation);
}

Evaluator SurrogateProblem::evaluator() const {
  return [problem = *this](const Vector& u) { return problem.evaluate(u); };
}

double ValidationReport::inside_fraction() const {
  return inside == 0 ? 1.0 : static_cast<double>(inside_nondominated) / static_cast<double>(inside);
}

double ValidationReport::outside_fraction() const {
  return outside == 0 ? 1.0 : static_cast<double>(outside_dominated) / static_cast<double>(outside);
}

nlohmann::json to_json(const ValidationReport& r) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : r.points) {
    pts.push_back({{"u", to_std(p.u)},
                   {"abm_f1", p.abm_f1},
                   {"halfwidth", p.halfwidth},
                   {"f2", p.f2},
                   {"surrogate_f", to_std(p.surrogate_f)},
                   {"covered", p.covered},
                   {"dominated_inflated", p.dominated_inflated},
                   {"dominated_plain", p.dominated_plain}});
  }
  return {{"confidence_z", r.z},
          {"inside", r.inside},
          {"inside_nondominated", r.inside_nondominated},
          {"outside", r.outside},
          {"outside_dominated", r.outside_dominated},
          {"outside_dominated_plain", r.outside_dominated_plain},
          {"inside_fraction", r.inside_fraction()},
          {"outside_fraction", r.outside_fraction()},
          {"points", pts}};
}

ValidationReport classify_test_points(std::vector<TestPoint> points, const std::vector<Box>& covering,
                                      const std::vector<FrontPoint>& front, double z) {
  ValidationReport r;
  r.z = z;
  for (auto& p : points) {
    p.covered = std::any_of(covering.begin(), covering.end(), [&](const Box& b) { return b.contains(p.u, 1e-12); });
    Vector fp(2);
    fp << p.abm_f1, p.f2;
    p.dominated_inflated = false;
    p.dominated_plain = false;
    for (const auto& q : front) {
      if (!q.ok) continue;
      if (dominates(q.f, fp)) p.dominated_plain = true;
      Vector inflated = q.f;
      inflated(0) += p.halfwidth;
      if (dominates(inflated, fp)) p.dominated_inflated = true;
    }
    if (p.covered) {
      ++r.inside;
      if (!p.dominated_inflated) ++r.inside_nondominated;
    } else {
      ++r.outside;
      if (p.dominated_inflated) ++r.outside_dominated;
      if (p.dominated_plain) ++r.outside_dominated_plain;
    }
  }
  r.points = std::move(points);
  return r;
}

// ---------------------------------------------------------------------------
// Voter pipeline

SdeModel VoterSurrogate::model_at(const Vector& u) const {
  const auto gen = family.interpolate(u);
  return {gen.dictionary, identify_drift(gen), Matrix()};
}

SurrogateProblem VoterSurrogate::problem() const {
  SurrogateProblem p;
  p.model = [self = *this](const Vector& u) { return self.model_at(u); };
  ObjectiveSpec f1;
  f1.name = "opinion1_fraction";
  f1.terminal = [](const Vector& x, const Vector&) { return x(0); };
  f1.t0 = 0.0;
  f1.t1 = plan.horizon;
  f1.step = plan.dt;
  ObjectiveSpec f2;
  f2.name = "control_cost";
  f2.control_only = [](const Vector& u) { return u.squaredNorm(); };
  p.objectives = {f1, f2};
  p.x0 = Vector::Constant(1, plan.initial_fraction);
  p.simulation.dt = plan.dt;
  p.simulation.mean_field = true;
  return p;
}

std::vector<SamplePoint> voter_training_samples(const VoterPlan& plan, const Vector& u, std::uint64_t seed,
                                                Exec exec) {
  const int n = plan.params.agents;
  Rng rng = make_rng(seed, streams::state_points);
  std::uniform_int_distribution<int> lattice(0, n);
  std::vector<Vector> states;
  for (int k = 0; k < plan.state_points; ++k) states.push_back(Vector::Constant(1, static_cast<double>(lattice(rng)) / n));

  const auto prop = voter_propagator(plan.params);
  // Distinct Monte Carlo streams per (control, point).
  const std::uint64_t control_key =
      sub_seed(sub_seed(seed, streams::kramers_moyal, std::bit_cast<std::uint64_t>(u(0))), 0,
               std::bit_cast<std::uint64_t>(u(1)));
  std::vector<SamplePoint> samples(states.size());
  for_each_index(exec, states.size(), [&](std::size_t k) {
    samples[k] = km_estimate(prop, states[k], u, plan.tau, plan.mc_runs, sub_seed(control_key, 0, k), Exec::serial)
                     .sample();
  });
  return samples;
}

VoterSurrogate learn_voter_surrogate(const VoterPlan& plan, std::uint64_t seed, Exec exec) {
  const Dictionary dict = Dictionary::monomials(1, plan.dictionary_degree);
  std::vector<Vector> controls;
  std::vector<GeneratorMatrix> gens;
  for (const auto& c : plan.learning_controls) {
    controls.push_back(to_vector(c));
    const auto samples = voter_training_samples(plan, controls.back(), seed, exec);
    gens.push_back(fit_generator(dict, samples, 0.0, Exec::serial));
  }
  return {assemble_affine_family(controls, gens), plan};
}

EnsembleSummary voter_abm_f1(const VoterPlan& plan, const Vector& u, int runs, std::uint64_t seed, Exec exec) {
  const VoterParams p = plan.params.with_control(u);
  const int x1 = static_cast<int>(std::lround(plan.initial_fraction * p.agents));
  return ensemble_mean(
      [&](Rng& rng) {
        return Vector::Constant(1, static_cast<double>(gillespie_voter_advance(p, x1, plan.horizon, rng)) / p.agents);
      },
      runs, seed, exec, plan.confidence_z);
}

namespace {

Box box_of(const std::vector<double>& lo, const std::vector<double>& hi) {
  return Box::from_bounds(to_vector(lo), to_vector(hi));
}

std::vector<Vector> uniform_points(const Box& box, int n, std::uint64_t seed) {
  Rng rng = make_rng(seed, streams::test_points);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<Vector> out;
  for (int k = 0; k < n; ++k) {
    Vector y = box.center;
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += box.radius(i) * unit(rng);
    out.push_back(y);
  }
  return out;
}

nlohmann::json front_json(const std::vector<FrontPoint>& front) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : front) {
    if (p.ok) out.push_back({{"y", to_std(p.center)}, {"f", to_std(p.f)}});
  }
  return out;
}

}  // namespace

VoterRun run_voter_moo(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  const auto& plan = config.voter;
  const auto t_start = std::chrono::steady_clock::now();
  VoterRun run;

  std::optional<std::filesystem::path> checkpoint;
  if (options.out) checkpoint = *options.out / "voter_model.json";
  if (options.resume && checkpoint && std::filesystem::exists(*checkpoint)) {
    progress(options, "loading voter model checkpoint");
    run.surrogate = {affine_family_from_json(read_json(*checkpoint).at("family")), plan};
  } else {
    progress(options, "learning voter generator family");
    run.surrogate = learn_voter_surrogate(plan, config.seed, options.exec);
    if (checkpoint) {
      write_json(*checkpoint, {{"family", to_json(run.surrogate.family)}, {"config", to_json(config)}});
    }
  }

  const auto problem = run.surrogate.problem();
  const auto evaluator = problem.evaluator();
  const SamplingOptions sopts{plan.samples_per_box, sub_seed(config.seed, streams::box_offsets), options.exec};
  progress(options, "sampling algorithm on R");
  run.full = sampling_algorithm(box_of(plan.region_lower, plan.region_upper), evaluator, plan.iterations, sopts);
  run.front_full = pareto_front(run.full.tree, evaluator, options.exec);
  progress(options, "sampling algorithm on R*");
  const Box refined = box_of(plan.refined_lower, plan.refined_upper);
  run.refined = sampling_algorithm(refined, evaluator, plan.iterations, sopts);
  run.front_refined = pareto_front(run.refined.tree, evaluator, options.exec);

  progress(options, "validating test points with the agent-based model");
  run.validation =
      validate_voter(config, run.refined.tree.leaf_boxes(), run.front_refined, evaluator, options.exec);

  if (options.out) {
    const auto& out = *options.out;
    write_covering_csv(out / "covering.csv", run.full.tree);
    write_front_csv(out / "front.csv", run.front_full);
    write_covering_csv(out / "covering_refined.csv", run.refined.tree);
    write_front_csv(out / "front_refined.csv", run.front_refined);

    // Surrogate against the agent-based model for a few controls.
    const std::vector<std::vector<double>> shown{{0.0, 0.0}, {0.5, -0.5}, {1.0, 0.0}};
    for (std::size_t s = 0; s < shown.size(); ++s) {
      const Vector u = to_vector(shown[s]);
      const auto traj = simulate_reduced(run.surrogate.model_at(u), problem.x0, plan.horizon, problem.simulation);
      const int frames = 101;
      const VoterParams p = plan.params.with_control(u);
      const int x1 = static_cast<int>(std::lround(plan.initial_fraction * p.agents));
      const auto abm = ensemble_mean(
          [&](Rng& rng) {
            const auto path = gillespie_voter(p, x1, plan.horizon, rng());
            Vector v(frames);
            for (int f = 0; f < frames; ++f) v(f) = static_cast<double>(path.at(plan.horizon * f / (frames - 1))) / p.agents;
            return v;
          },
          plan.test_runs, sub_seed(config.seed, streams::reference, 1000 + s), options.exec, plan.confidence_z);
      std::vector<double> times;
      Matrix states(frames, 3);
      for (int f = 0; f < frames; ++f) {
        const double t = plan.horizon * f / (frames - 1);
        times.push_back(t);
        const auto steps = static_cast<double>(traj.times.size() - 1);
        const auto idx = static_cast<Eigen::Index>(std::lround(steps * f / (frames - 1)));
        states(f, 0) = abm.mean(f);
        states(f, 1) = abm.halfwidth(f);
        states(f, 2) = traj.states(idx, 0);
      }
      write_trajectory_csv(out / "trajectories" / ("voter_u" + std::to_string(s) + ".csv"), times, states,
                           {"abm_mean", "abm_halfwidth", "surrogate"});
    }

    // Integrator check for f1: the same controls at dt and dt / 2.
    nlohmann::json halving = nlohmann::json::array();
    auto halved = problem;
    halved.objectives[0].step = plan.dt / 2.0;
    for (const auto& c : shown) {
      const Vector u = to_vector(c);
      const double a = problem.evaluate(u)(0);
      const double b = halved.evaluate(u)(0);
      halving.push_back({{"u", c}, {"f1_dt", a}, {"f1_half_dt", b}, {"difference", std::abs(a - b)}});
    }

    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    write_json(out / "report.json", {{"experiment", "voter-moo"},
                                     {"step_halving", halving},
                                     {"config", to_json(config)},
                                     {"family_consistency_residual", run.surrogate.family.consistency_residual},
                                     {"full", run_summary(run.full)},
                                     {"refined", run_summary(run.refined)},
                                     {"front_refined", front_json(run.front_refined)},
                                     {"validation", to_json(run.validation)},
                                     {"warnings", warning_count()},
                                     {"runtime_seconds", seconds}});
  }
  return run;
}

// ---------------------------------------------------------------------------
// Epidemic pipeline

Vector epidemic_initial_state(const EpidemicPlan& plan) {
  const auto& p = plan.params;
  const double n = p.population;
  const double na = p.group_fractions[0] * n;
  const double nc = p.group_fractions[1] * n;
  Vector x(4);
  x << (na - plan.infected_adults) / n, (nc - plan.infected_children) / n, plan.infected_adults / n,
      plan.infected_children / n;
  return x;
}

namespace {

std::vector<Vector> control_grid(const EpidemicPlan& plan) {
  std::vector<Vector> out;
  const int g = plan.control_grid;
  for (int i = 0; i < g; ++i) {
    for (int j = 0; j < g; ++j) {
      Vector u(2);
      u << plan.region_lower[0] + (plan.region_upper[0] - plan.region_lower[0]) * i / (g - 1),
          plan.region_lower[1] + (plan.region_upper[1] - plan.region_lower[1]) * j / (g - 1);
      out.push_back(u);
    }
  }
  return out;
}

std::vector<std::size_t> corner_indices(const EpidemicPlan& plan) {
  const auto g = static_cast<std::size_t>(plan.control_grid);
  return {0, (g - 1) * g, g - 1, g * g - 1};  // (lo,lo), (hi,lo), (lo,hi), (hi,hi)
}

Vector aggregate_state(const Vector& x) {
  Vector out(2);
  out << x(0) + x(1), x(2) + x(3);
  return out;
}

Matrix aggregate_states(const Matrix& s) {
  Matrix out(s.rows(), 2);
  out.col(0) = s.col(0) + s.col(1);
  out.col(1) = s.col(2) + s.col(3);
  return out;
}

}  // namespace

EpidemicData epidemic_training_data(const EpidemicPlan& plan, std::uint64_t seed, Exec exec) {
  EpidemicData data;
  data.controls = control_grid(plan);
  data.samples.resize(data.controls.size());
  const Vector x0 = epidemic_initial_state(plan);
  const auto prop = sir_propagator(plan.params, plan.dt);
  const auto points = static_cast<std::size_t>(plan.training_points);
  const double horizon = (plan.training_points - 1) * plan.subsample * plan.dt;
  for_each_index(exec, data.controls.size(), [&](std::size_t c) {
    const auto& u = data.controls[c];
    const auto traj = simulate_sir(plan.params, ControlSchedule::constant(u), x0, std::max(horizon, plan.dt), plan.dt,
                                   sub_seed(seed, streams::training_paths, c), plan.subsample);
    const Matrix states = traj.reduced();
    auto& out = data.samples[c];
    for (std::size_t p = 0; p < points; ++p) {
      const Vector x = states.row(static_cast<Eigen::Index>(p)).transpose();
      out.push_back(km_estimate(prop, x, u, plan.tau, plan.mc_runs,
                                sub_seed(seed, streams::kramers_moyal, c * points + p), Exec::serial)
                        .sample());
    }
  });
  return data;
}

SamplePoint aggregate_sample(const SamplePoint& s) {
  if (s.x.size() != 4) throw ConfigurationError("aggregation expects [S_a, S_c, I_a, I_c]");
  Matrix p = Matrix::Zero(2, 4);
  p << 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0;
  return {p * s.x, p * s.b, p * s.a * p.transpose()};
}

EpidemicModels learn_epidemic_models(const EpidemicPlan& plan, const EpidemicData& data, Exec exec) {
  EpidemicModels models;
  std::vector<SamplePoint> full;
  std::vector<SamplePoint> aggregated;
  for (std::size_t c = 0; c < data.controls.size(); ++c) {
    const Vector zero = Vector::Zero(2);
    for (const auto& s : data.samples[c]) {
      full.push_back(augment_sample(s, data.controls[c], zero));
      if (plan.aggregated_model) aggregated.push_back(augment_sample(aggregate_sample(s), data.controls[c], zero));
    }
  }
  AugmentedOptions opts;
  opts.control_dimension = 2;
  opts.ridge = plan.ridge;
  opts.identify_diffusion = false;
  opts.exec = exec;
  models.augmented = learn_augmented(Dictionary::monomials(6, plan.dictionary_degree), full, opts);
  if (plan.aggregated_model) {
    models.aggregated = learn_augmented(Dictionary::monomials(4, plan.dictionary_degree), aggregated, opts);
  }

  models.interpolation = fit_affine_family(Dictionary::monomials(4, plan.dictionary_degree), data.controls,
                                           data.samples, plan.ridge, exec);
  return models;
}

ObjectiveSpec epidemic_health_objective(const EpidemicPlan& plan, bool aggregated_state) {
  ObjectiveSpec f;
  f.name = "health";
  const double i_max = plan.i_max;
  if (aggregated_state) {
    f.running = [i_max](const Vector& x, const Vector&) { return x(1) + std::exp(10.0 * (x(1) - i_max)); };
  } else {
    f.running = [i_max](const Vector& x, const Vector&) {
      const double i = x(2) + x(3);
      return i + std::exp(10.0 * (i - i_max));
    };
  }
  f.t0 = 0.0;
  f.t1 = plan.horizon;
  f.step = plan.dt;
  return f;
}

ObjectiveSpec epidemic_economic_objective(const EpidemicPlan& plan) {
  ObjectiveSpec f;
  f.name = "economic";
  const double t = plan.horizon;
  const double wmax = plan.u_w_max;
  f.control_only = [t, wmax](const Vector& u) {
    if (u(1) >= wmax) return std::numeric_limits<double>::infinity();
    return t * (u(0) * u(0) - std::log(wmax - u(1)));
  };
  return f;
}

SurrogateProblem epidemic_problem(const EpidemicPlan& plan, const AugmentedModel& model) {
  SurrogateProblem p;
  p.model = [model](const Vector& u) { return model.substitute(u); };
  const bool aggregated = model.state_dimension == 2;
  p.objectives = {epidemic_health_objective(plan, aggregated), epidemic_economic_objective(plan)};
  const Vector x0 = epidemic_initial_state(plan);
  p.x0 = aggregated ? aggregate_state(x0) : x0;
  p.simulation.dt = plan.dt;
  p.simulation.mean_field = true;
  p.simulation.clamp = std::make_pair(0.0, 1.0);
  return p;
}

ReducedTrajectory epidemic_reference(const EpidemicPlan& plan, const Vector& u, int runs, std::uint64_t seed,
                                     Exec exec) {
  const Vector x0 = epidemic_initial_state(plan);
  const auto probe = simulate_sir(plan.params, ControlSchedule::constant(u), x0, plan.horizon, plan.dt, 0,
                                  plan.subsample);
  const auto rows = static_cast<Eigen::Index>(probe.times.size());
  const auto summary = ensemble_mean(
      [&](Rng& rng) {
        const auto traj = simulate_sir(plan.params, ControlSchedule::constant(u), x0, plan.horizon, plan.dt, rng(),
                                       plan.subsample);
        const Matrix r = traj.reduced();
        return Vector(r.reshaped());
      },
      runs, seed, exec);
  ReducedTrajectory ref;
  ref.times = probe.times;
  ref.states = summary.mean.reshaped(rows, 4);
  ref.provenance = ReducedTrajectory::Provenance::reference;
  ref.model = "abm";
  return ref;
}

namespace {

double abm_health(const EpidemicPlan& plan, const SirTrajectory& traj) {
  double total = 0.0;
  auto r = [&](Eigen::Index k) {
    const double i = traj.states(k, 2) + traj.states(k, 3);
    return i + std::exp(10.0 * (i - plan.i_max));
  };
  for (std::size_t k = 1; k < traj.times.size(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    total += 0.5 * (traj.times[k] - traj.times[k - 1]) * (r(kk - 1) + r(kk));
  }
  return total;
}

}  // namespace

EpidemicRun run_epidemic_moo(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  const auto& plan = config.epidemic;
  const auto t_start = std::chrono::steady_clock::now();
  EpidemicRun run;

  std::optional<std::filesystem::path> checkpoint;
  if (options.out) checkpoint = *options.out / "epidemic_model.json";
  if (options.resume && checkpoint && std::filesystem::exists(*checkpoint)) {
    progress(options, "loading epidemic model checkpoint");
    const auto j = read_json(*checkpoint);
    run.models.augmented = augmented_model_from_json(j.at("augmented"));
    if (j.contains("aggregated") && !j.at("aggregated").is_null()) {
      run.models.aggregated = augmented_model_from_json(j.at("aggregated"));
    }
    run.models.interpolation = affine_family_from_json(j.at("interpolation"));
  } else {
    progress(options, "sampling the agent-based model for training data");
    const auto data = epidemic_training_data(plan, config.seed, options.exec);
    progress(options, "learning reduced models");
    run.models = learn_epidemic_models(plan, data, options.exec);
    if (checkpoint) {
      write_json(*checkpoint,
                 {{"augmented", to_json(run.models.augmented)},
                  {"aggregated", run.models.aggregated ? to_json(*run.models.aggregated) : nlohmann::json()},
                  {"interpolation", to_json(run.models.interpolation)},
                  {"config", to_json(config)}});
    }
  }

  // Trajectory errors at the corners of R.
  progress(options, "comparing reduced models against the agent-based model");
  const Vector x0 = epidemic_initial_state(plan);
  SimulationOptions sim;
  sim.dt = plan.dt;
  sim.mean_field = true;
  sim.clamp = std::make_pair(0.0, 1.0);
  const auto grid = control_grid(plan);
  const std::vector<std::string> names{"S_a", "S_c", "I_a", "I_c"};
  std::size_t corner_no = 0;
  for (auto c : corner_indices(plan)) {
    const Vector& u = grid[c];
    const auto ref = epidemic_reference(plan, u, plan.reference_runs,
                                        sub_seed(config.seed, streams::reference, 10000 + corner_no), options.exec);
    ReducedTrajectory ref_agg = ref;
    ref_agg.states = aggregate_states(ref.states);

    auto add_row = [&](const std::string& name, const ReducedTrajectory& traj, bool aggregated_model) {
      RmseRow row;
      row.model = name;
      row.u = u;
      if (aggregated_model) {
        row.rmse = trajectory_rmse(ref_agg, traj);
        row.rmse_aggregated = row.rmse;
      } else {
        row.rmse = trajectory_rmse(ref, traj);
        ReducedTrajectory agg = traj;
        agg.states = aggregate_states(traj.states);
        row.rmse_aggregated = trajectory_rmse(ref_agg, agg);
      }
      run.rmse.push_back(row);
      if (options.out) {
        write_trajectory_csv(*options.out / "trajectories" / (name + "_corner" + std::to_string(corner_no) + ".csv"),
                             traj, aggregated_model ? std::vector<std::string>{"S", "I"} : names);
      }
    };
    add_row("augmented6", simulate_reduced(run.models.augmented, u, x0, plan.horizon, sim), false);
    if (run.models.aggregated) {
      const Vector x0a = aggregate_state(x0);
      add_row("augmented4", simulate_reduced(*run.models.aggregated, u, x0a, plan.horizon, sim), true);
    }
    const auto gen = run.models.interpolation.interpolate(u);
    add_row("interpolation", simulate_reduced(SdeModel{gen.dictionary, identify_drift(gen), Matrix()}, x0,
                                              plan.horizon, sim),
            false);
    if (options.out) {
      write_trajectory_csv(*options.out / "trajectories" / ("abm_corner" + std::to_string(corner_no) + ".csv"), ref,
                           names);
    }
    ++corner_no;
  }

  progress(options, "sampling algorithm on R");
  const auto problem = epidemic_problem(plan, run.models.augmented);
  const auto evaluator = problem.evaluator();
  const SamplingOptions sopts{plan.samples_per_box, sub_seed(config.seed, streams::box_offsets), options.exec};
  run.result = sampling_algorithm(box_of(plan.region_lower, plan.region_upper), evaluator, plan.iterations, sopts);
  run.front = pareto_front(run.result.tree, evaluator, options.exec);

  progress(options, "validating test points with the agent-based model");
  run.validation = validate_epidemic(config, run.result.tree.leaf_boxes(), run.front, evaluator, options.exec);

  if (options.out) {
    const auto& out = *options.out;
    write_covering_csv(out / "covering.csv", run.result.tree);
    write_front_csv(out / "front.csv", run.front);
    CsvWriter rmse(out / "rmse.csv", {"model_id", "u_s", "u_w", "rmse", "rmse_aggregated"});
    nlohmann::json rmse_json = nlohmann::json::array();
    for (const auto& r : run.rmse) {
      const double id = r.model == "augmented6" ? 6.0 : r.model == "augmented4" ? 4.0 : 0.0;
      rmse.row(std::vector<double>{id, r.u(0), r.u(1), r.rmse, r.rmse_aggregated});
      rmse_json.push_back(
          {{"model", r.model}, {"u", to_std(r.u)}, {"rmse", r.rmse}, {"rmse_aggregated", r.rmse_aggregated}});
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    write_json(out / "report.json", {{"experiment", "epidemic-moo"},
                                     {"config", to_json(config)},
                                     {"interpolation_consistency_residual", run.models.interpolation.consistency_residual},
                                     {"rmse", rmse_json},
                                     {"moo", run_summary(run.result)},
                                     {"front", front_json(run.front)},
                                     {"validation", to_json(run.validation)},
                                     {"warnings", warning_count()},
                                     {"runtime_seconds", seconds}});
  }
  return run;
}

std::vector<Box> read_covering_csv(const std::filesystem::path& path) {
  const auto table = read_csv(path);
  const auto it = table.column("survived_iteration");
  const std::size_t n = it / 2;
  if (n == 0 || it != 2 * n) throw ConfigurationError("covering CSV has an unexpected layout");
  double last = -1.0;
  for (const auto& r : table.rows) last = std::max(last, r[it]);
  std::vector<Box> boxes;
  for (const auto& r : table.rows) {
    if (r[it] != last) continue;
    Box b{Vector(static_cast<Eigen::Index>(n)), Vector(static_cast<Eigen::Index>(n))};
    for (std::size_t i = 0; i < n; ++i) {
      b.center(static_cast<Eigen::Index>(i)) = r[i];
      b.radius(static_cast<Eigen::Index>(i)) = r[n + i];
    }
    boxes.push_back(b);
  }
  return boxes;
}

std::vector<FrontPoint> read_front_csv(const std::filesystem::path& path) {
  const auto table = read_csv(path);
  std::size_t ny = 0;
  while (ny < table.header.size() && table.header[ny].rfind("y_", 0) == 0) ++ny;
  const std::size_t nf = table.header.size() - ny;
  if (ny == 0 || nf == 0) throw ConfigurationError("front CSV has an unexpected layout");
  std::vector<FrontPoint> front;
  for (const auto& r : table.rows) {
    FrontPoint p{Vector(static_cast<Eigen::Index>(ny)), Vector(static_cast<Eigen::Index>(nf)), true};
    for (std::size_t i = 0; i < ny; ++i) p.center(static_cast<Eigen::Index>(i)) = r[i];
    for (std::size_t i = 0; i < nf; ++i) p.f(static_cast<Eigen::Index>(i)) = r[ny + i];
    front.push_back(p);
  }
  return front;
}

ValidationReport validate_voter(const ExperimentConfig& config, const std::vector<Box>& covering,
                                const std::vector<FrontPoint>& front, const Evaluator& surrogate, Exec exec) {
  const auto& plan = config.voter;
  const auto us = uniform_points(box_of(plan.refined_lower, plan.refined_upper), plan.test_points, config.seed);
  std::vector<TestPoint> points(us.size());
  for (std::size_t k = 0; k < us.size(); ++k) {
    const auto abm = voter_abm_f1(plan, us[k], plan.test_runs, sub_seed(config.seed, streams::reference, k), exec);
    points[k].u = us[k];
    points[k].abm_f1 = abm.mean(0);
    points[k].halfwidth = abm.halfwidth(0);
    points[k].f2 = us[k].squaredNorm();
    if (surrogate) points[k].surrogate_f = surrogate(us[k]);
  }
  return classify_test_points(std::move(points), covering, front, plan.confidence_z);
}

ValidationReport validate_epidemic(const ExperimentConfig& config, const std::vector<Box>& covering,
                                   const std::vector<FrontPoint>& front, const Evaluator& surrogate, Exec exec) {
  const auto& plan = config.epidemic;
  const Vector x0 = epidemic_initial_state(plan);
  const auto us = uniform_points(box_of(plan.region_lower, plan.region_upper), plan.test_points, config.seed);
  const auto econ = epidemic_economic_objective(plan);
  std::vector<TestPoint> points(us.size());
  for (std::size_t k = 0; k < us.size(); ++k) {
    const Vector& u = us[k];
    const auto abm = ensemble_mean(
        [&](Rng& rng) {
          const auto traj = simulate_sir(plan.params, ControlSchedule::constant(u), x0, plan.horizon, plan.dt, rng());
          return Vector::Constant(1, abm_health(plan, traj));
        },
        plan.test_runs, sub_seed(config.seed, streams::reference, k), exec, plan.confidence_z);
    points[k].u = u;
    points[k].abm_f1 = abm.mean(0);
    points[k].halfwidth = abm.halfwidth(0);
    points[k].f2 = econ.control_only(u);
    if (surrogate) points[k].surrogate_f = surrogate(u);
  }
  return classify_test_points(std::move(points), covering, front, plan.confidence_z);
}

}  // namespace koopmoo
