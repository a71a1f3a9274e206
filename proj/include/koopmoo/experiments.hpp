#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "koopmoo/abm.hpp"
#include "koopmoo/control_models.hpp"
#include "koopmoo/moo.hpp"
#include "koopmoo/surrogate.hpp"

namespace koopmoo {

enum class Scale { desk, paper };

Scale parse_scale(const std::string& s);
std::string to_string(Scale s);

// ---------------------------------------------------------------------------
// Configuration

struct VoterPlan {
  VoterParams params;
  double initial_fraction = 0.5;
  int dictionary_degree = 3;
  int state_points = 100;
  int mc_runs = 10000;
  double tau = 0.01;
  std::vector<std::vector<double>> learning_controls{{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}};
  double horizon = 10.0;  // f1 is the opinion-1 fraction at this time
  double dt = 0.01;
  std::vector<double> region_lower{-1.0, -2.0};
  std::vector<double> region_upper{5.0, 5.0};
  std::vector<double> refined_lower{0.25, -0.75};
  std::vector<double> refined_upper{0.75, -0.25};
  int iterations = 12;
  int samples_per_box = 20;
  int test_points = 100;
  int test_runs = 100;
  double confidence_z = z_999;

  bool operator==(const VoterPlan&) const = default;
};

/// Two-group SIR stand-in for the large epidemic model. Times are in hours.
struct EpidemicPlan {
  SirParams params = SirParams::two_group(1045.0, 0.2, 0.02, 0.015, 0.015, 0.1, 1.0 / 168.0);
  double infected_adults = 3.0;    // initial counts
  double infected_children = 2.0;
  double horizon = 1176.0;
  double dt = 1.0;
  int subsample = 24;  // one training point every `subsample` steps
  int training_points = 49;
  int control_grid = 15;
  std::vector<double> region_lower{0.0, 0.0};
  std::vector<double> region_upper{1.0, 0.8};
  int mc_runs = 100;
  double tau = 1.0;
  int dictionary_degree = 4;
  double ridge = 0.0;
  double i_max = 0.005;  // fraction of N
  double u_w_max = 0.81;
  int iterations = 14;
  int samples_per_box = 10;
  int reference_runs = 200;
  int test_points = 20;
  int test_runs = 100;
  double confidence_z = z_999;
  bool aggregated_model = true;

  bool operator==(const EpidemicPlan&) const = default;
};

struct ExperimentConfig {
  std::string id = "default";
  std::uint64_t seed = 20240607;
  Scale scale = Scale::desk;
  VoterPlan voter;
  EpidemicPlan epidemic;

  /// Defaults for a scale; `paper` restores the full Monte Carlo counts.
  static ExperimentConfig defaults(Scale scale = Scale::desk);
  void validate() const;

  bool operator==(const ExperimentConfig&) const = default;
};

nlohmann::json to_json(const ExperimentConfig& c);
/// Missing keys keep the defaults of `base`.
ExperimentConfig config_from_json(const nlohmann::json& j, const ExperimentConfig& base = ExperimentConfig::defaults());

// ---------------------------------------------------------------------------
// Analytic checks

struct CheckResult {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct AnalyticReport {
  std::vector<CheckResult> checks;
  bool all_passed() const;
};

nlohmann::json to_json(const AnalyticReport& r);

/// f1 = (y - 1.5)^2, f2 = y^4 - 4y^3 + 4y^2.
Evaluator example1_objectives();

struct Example1Outcome {
  SamplingResult result;
  double box_width = 0.0;
  double covered_lower = 0.0;  // extent of the union of surviving boxes
  double covered_upper = 0.0;
  bool covers_target = false;  // union contains [1.5, 2]
};

Example1Outcome run_example1(int iterations = 12, int samples_per_box = 20, std::uint64_t seed = 1,
                             Exec exec = Exec::parallel);

/// Deterministic system xdot = ((gamma + g(u)) x1, delta (x2 - x1^2)) with g(u) = u.
Vector example2_drift(const Vector& x, double gamma, double delta, double u);
/// {1, x1, x2, x1^2}.
Dictionary example2_dictionary();
std::vector<SamplePoint> example2_samples(double gamma, double delta, double u, int m, std::uint64_t seed);

/// Exact augmented samples [x, u] for the one-group SIR with the logistic control law:
/// x uniform on [0, 1]^2, u uniform on [0, A].
std::vector<SamplePoint> example3_samples(const SirParams& params, const ControlSchedule& law, int m,
                                          std::uint64_t seed);

/// Affinity defects ||L(alpha u_a + (1 - alpha) u_b) - alpha L(u_a) - (1 - alpha) L(u_b)||_F.
struct AffinityOutcome {
  std::vector<double> alphas;
  std::vector<double> affine_exact;    // synthetic control-affine SDE, exact data
  double sir_quadratic = 0.0;          // SIR with (1 - u)^2 action, estimated data
  double sir_affine_noise_floor = 0.0; // SIR with (1 - u) action, same estimated data
  double sir_quadratic_exact = 0.0;
  double sir_affine_exact = 0.0;
};

/// A 2-D SDE with drift and diffusion affine in a scalar control.
void synthetic_affine_sde(const Vector& x, double u, Vector& b, Matrix& a);
AffinityOutcome run_affinity_checks(std::uint64_t seed, int km_runs = 2000, Exec exec = Exec::parallel);

struct KurtzPoint {
  double c = 0.0;
  KmEstimate estimate;
};

std::vector<KurtzPoint> run_kurtz_check(const VoterParams& params, const std::vector<double>& grid, double tau, int n,
                                        std::uint64_t seed, Exec exec = Exec::parallel);

AnalyticReport run_analytic_checks(std::uint64_t seed = 1, Exec exec = Exec::parallel);

// ---------------------------------------------------------------------------
// Surrogate problems and validation

/// Objective evaluation through an identified model for constant controls.
struct SurrogateProblem {
  ModelAtControl model;
  std::vector<ObjectiveSpec> objectives;
  Vector x0;
  SimulationOptions simulation;

  Vector evaluate(const Vector& u) const;
  Evaluator evaluator() const;
};

struct TestPoint {
  Vector u;
  double abm_f1 = 0.0;
  double halfwidth = 0.0;
  double f2 = 0.0;
  Vector surrogate_f;
  bool covered = false;
  bool dominated_inflated = false;  // by a front point whose f1 is worsened by the halfwidth
  bool dominated_plain = false;
};

struct ValidationReport {
  std::vector<TestPoint> points;
  double z = z_999;
  std::size_t inside = 0;
  std::size_t inside_nondominated = 0;
  std::size_t outside = 0;
  std::size_t outside_dominated = 0;
  std::size_t outside_dominated_plain = 0;

  double inside_fraction() const;
  double outside_fraction() const;
};

nlohmann::json to_json(const ValidationReport& r);

/// Classifies ABM-evaluated test points against a covering and its front.
ValidationReport classify_test_points(std::vector<TestPoint> points, const std::vector<Box>& covering,
                                      const std::vector<FrontPoint>& front, double z);

// ---------------------------------------------------------------------------
// Voter pipeline

struct VoterSurrogate {
  AffineGeneratorFamily family;
  VoterPlan plan;

  SdeModel model_at(const Vector& u) const;
  SurrogateProblem problem() const;
};

std::vector<SamplePoint> voter_training_samples(const VoterPlan& plan, const Vector& u, std::uint64_t seed,
                                                Exec exec);
VoterSurrogate learn_voter_surrogate(const VoterPlan& plan, std::uint64_t seed, Exec exec = Exec::parallel);

/// ABM estimate of f1 (mean, halfwidth) from `runs` Gillespie realisations.
EnsembleSummary voter_abm_f1(const VoterPlan& plan, const Vector& u, int runs, std::uint64_t seed,
                             Exec exec = Exec::parallel);

struct VoterRun {
  VoterSurrogate surrogate;
  SamplingResult full;
  SamplingResult refined;
  std::vector<FrontPoint> front_full;
  std::vector<FrontPoint> front_refined;
  ValidationReport validation;
};

struct RunOptions {
  std::optional<std::filesystem::path> out;  // exports are skipped when empty
  bool resume = false;                       // reuse a model checkpoint in `out`
  Exec exec = Exec::parallel;
  bool verbose = false;
};

VoterRun run_voter_moo(const ExperimentConfig& config, const RunOptions& options = {});

// ---------------------------------------------------------------------------
// Epidemic pipeline

struct EpidemicData {
  std::vector<Vector> controls;                  // grid, row-major over (u_s, u_w)
  std::vector<std::vector<SamplePoint>> samples; // per control, state samples [S_a, S_c, I_a, I_c]
};

EpidemicData epidemic_training_data(const EpidemicPlan& plan, std::uint64_t seed, Exec exec = Exec::parallel);

/// [S_a, S_c, I_a, I_c] -> [S, I] for states, drifts and diffusions.
SamplePoint aggregate_sample(const SamplePoint& s);

struct EpidemicModels {
  AugmentedModel augmented;                   // 6-dim [S_a, S_c, I_a, I_c, u_s, u_w]
  std::optional<AugmentedModel> aggregated;   // 4-dim [S, I, u_s, u_w]
  AffineGeneratorFamily interpolation;        // 4-dim state, joint affine fit over every grid control
};

EpidemicModels learn_epidemic_models(const EpidemicPlan& plan, const EpidemicData& data, Exec exec = Exec::parallel);

Vector epidemic_initial_state(const EpidemicPlan& plan);
/// f1 on the full state: integral of I + exp(10 (I - I_max)), I the total infected fraction.
ObjectiveSpec epidemic_health_objective(const EpidemicPlan& plan, bool aggregated_state = false);
/// T (u_s^2 - log(u_w_max - u_w)); +inf when u_w >= u_w_max.
ObjectiveSpec epidemic_economic_objective(const EpidemicPlan& plan);
SurrogateProblem epidemic_problem(const EpidemicPlan& plan, const AugmentedModel& model);

/// ABM ensemble mean of the reduced state on the daily grid.
ReducedTrajectory epidemic_reference(const EpidemicPlan& plan, const Vector& u, int runs, std::uint64_t seed,
                                     Exec exec = Exec::parallel);

struct RmseRow {
  std::string model;
  Vector u;
  double rmse = 0.0;             // on the model's own state
  double rmse_aggregated = 0.0;  // on [S, I]
};

struct EpidemicRun {
  EpidemicModels models;
  SamplingResult result;
  std::vector<FrontPoint> front;
  std::vector<RmseRow> rmse;
  ValidationReport validation;
};

EpidemicRun run_epidemic_moo(const ExperimentConfig& config, const RunOptions& options = {});

/// ABM test points drawn uniformly in the refined region R*, classified against a covering
/// of R* and its front. `surrogate` may be empty.
ValidationReport validate_voter(const ExperimentConfig& config, const std::vector<Box>& covering,
                                const std::vector<FrontPoint>& front, const Evaluator& surrogate = {},
                                Exec exec = Exec::parallel);
/// Same for the epidemic stand-in; test points are drawn uniformly in R.
ValidationReport validate_epidemic(const ExperimentConfig& config, const std::vector<Box>& covering,
                                   const std::vector<FrontPoint>& front, const Evaluator& surrogate = {},
                                   Exec exec = Exec::parallel);

/// Reads a covering CSV and returns the boxes of the final collection.
std::vector<Box> read_covering_csv(const std::filesystem::path& path);
/// Reads a front CSV (y_i, f_j columns).
std::vector<FrontPoint> read_front_csv(const std::filesystem::path& path);

}  // namespace koopmoo
