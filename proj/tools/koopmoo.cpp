#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "koopmoo/errors.hpp"
#include "koopmoo/experiments.hpp"
#include "koopmoo/io.hpp"

using namespace koopmoo;
namespace fs = std::filesystem;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string scale = "desk";
  std::string out;
  bool resume = false;
  bool serial = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config, "experiment config (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", flags.seed, "master seed");
  cmd->add_option("--scale", flags.scale, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
  cmd->add_option("--out", flags.out, "output directory");
  cmd->add_flag("--serial", flags.serial, "disable OpenMP kernels");
  cmd->add_flag("--quiet", flags.quiet, "no progress messages");
}

ExperimentConfig load_config(const CommonFlags& flags) {
  auto config = ExperimentConfig::defaults(parse_scale(flags.scale));
  if (!flags.config.empty()) {
    auto j = read_json(flags.config);
    // --scale on the command line wins over the file
    j["scale"] = flags.scale;
    config = config_from_json(j, config);
  }
  if (flags.seed) config.seed = *flags.seed;
  config.validate();
  return config;
}

RunOptions run_options(const CommonFlags& flags) {
  RunOptions opts;
  if (!flags.out.empty()) opts.out = fs::path(flags.out);
  opts.resume = flags.resume;
  opts.exec = flags.serial ? Exec::serial : Exec::parallel;
  opts.verbose = !flags.quiet;
  return opts;
}

fs::path require_out(const CommonFlags& flags) {
  if (flags.out.empty()) throw ConfigurationError("--out is required for this command");
  return flags.out;
}

void print_validation(const ValidationReport& r) {
  std::printf("test points inside covering: %zu, non-dominated: %zu\n", r.inside, r.inside_nondominated);
  std::printf("test points outside covering: %zu, dominated (CI-inflated): %zu, dominated (plain): %zu\n", r.outside,
              r.outside_dominated, r.outside_dominated_plain);
}

int cmd_analytic(const CommonFlags& flags) {
  const auto config = load_config(flags);
  const auto report = run_analytic_checks(config.seed, flags.serial ? Exec::serial : Exec::parallel);
  for (const auto& c : report.checks) {
    std::printf("%-40s %s  measured=%.3e  tol=%.1e\n", c.name.c_str(), c.passed ? "PASS" : "FAIL", c.measured,
                c.tolerance);
    if (!c.detail.empty()) std::printf("    %s\n", c.detail.c_str());
  }
  if (!flags.out.empty()) write_json(fs::path(flags.out) / "report.json", to_json(report));
  return report.all_passed() ? 0 : 1;
}

int cmd_voter(const CommonFlags& flags) {
  const auto config = load_config(flags);
  const auto run = run_voter_moo(config, run_options(flags));
  std::printf("R: %zu boxes, %zu front points; R*: %zu boxes, %zu front points\n", run.full.tree.leaves().size(),
              run.front_full.size(), run.refined.tree.leaves().size(), run.front_refined.size());
  print_validation(run.validation);
  return 0;
}

int cmd_epidemic(const CommonFlags& flags) {
  const auto config = load_config(flags);
  const auto run = run_epidemic_moo(config, run_options(flags));
  for (const auto& r : run.rmse) {
    std::printf("%-14s u=(%.2f, %.2f)  rmse=%.5f  rmse[S,I]=%.5f\n", r.model.c_str(), r.u(0), r.u(1), r.rmse,
                r.rmse_aggregated);
  }
  std::printf("%zu boxes, %zu front points\n", run.result.tree.leaves().size(), run.front.size());
  print_validation(run.validation);
  return 0;
}

int cmd_identify(const CommonFlags& flags, const std::string& system) {
  const auto config = load_config(flags);
  const auto out = require_out(flags);
  const Exec exec = flags.serial ? Exec::serial : Exec::parallel;
  if (system == "voter") {
    const auto s = learn_voter_surrogate(config.voter, config.seed, exec);
    write_json(out / "voter_model.json", {{"family", to_json(s.family)}, {"config", to_json(config)}});
    std::printf("consistency residual of the affine family: %.3e\n", s.family.consistency_residual);
  } else {
    const auto data = epidemic_training_data(config.epidemic, config.seed, exec);
    const auto m = learn_epidemic_models(config.epidemic, data, exec);
    write_json(out / "epidemic_model.json",
               {{"augmented", to_json(m.augmented)},
                {"aggregated", m.aggregated ? to_json(*m.aggregated) : nlohmann::json()},
                {"interpolation", to_json(m.interpolation)},
                {"config", to_json(config)}});
  }
  return 0;
}

int cmd_validate(const CommonFlags& flags, const std::string& system) {
  const auto config = load_config(flags);
  const auto out = require_out(flags);
  const Exec exec = flags.serial ? Exec::serial : Exec::parallel;
  ValidationReport report;
  if (system == "voter") {
    report = validate_voter(config, read_covering_csv(out / "covering_refined.csv"),
                            read_front_csv(out / "front_refined.csv"), {}, exec);
  } else {
    report = validate_epidemic(config, read_covering_csv(out / "covering.csv"), read_front_csv(out / "front.csv"),
                               {}, exec);
  }
  write_json(out / "validation.json", to_json(report));
  print_validation(report);
  return 0;
}

int cmd_export_front(const CommonFlags& flags, const std::string& system) {
  const auto config = load_config(flags);
  const auto out = require_out(flags);
  const Exec exec = flags.serial ? Exec::serial : Exec::parallel;
  Evaluator evaluator;
  if (system == "voter") {
    const auto j = read_json(out / "voter_model.json");
    const VoterSurrogate s{affine_family_from_json(j.at("family")), config.voter};
    evaluator = s.problem().evaluator();
  } else {
    const auto j = read_json(out / "epidemic_model.json");
    evaluator = epidemic_problem(config.epidemic, augmented_model_from_json(j.at("augmented"))).evaluator();
  }
  std::vector<Vector> centers;
  for (const auto& b : read_covering_csv(out / "covering.csv")) centers.push_back(b.center);
  const auto front = pareto_front(centers, evaluator, exec);
  write_front_csv(out / "front.csv", front);
  std::printf("%zu front points written\n", front.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Surrogate-based multi-objective control of agent-based models"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string system = "voter";

  auto* analytic = app.add_subcommand("analytic-checks", "closed-form identification and covering checks");
  auto* voter = app.add_subcommand("voter-moo", "voter model: learn, optimise, validate");
  auto* epidemic = app.add_subcommand("epidemic-moo", "two-group SIR stand-in: learn, optimise, validate");
  auto* identify = app.add_subcommand("identify", "learn a reduced model and write it to --out");
  auto* validate = app.add_subcommand("validate", "classify ABM test points against a stored covering and front");
  auto* export_front = app.add_subcommand("export-front", "front.csv from a stored covering and model");
  for (auto* cmd : {analytic, voter, epidemic, identify, validate, export_front}) add_common(cmd, flags);
  for (auto* cmd : {voter, epidemic}) cmd->add_flag("--resume", flags.resume, "reuse the model checkpoint in --out");
  for (auto* cmd : {identify, validate, export_front}) {
    cmd->add_option("--system", system, "voter or epidemic")->check(CLI::IsMember({"voter", "epidemic"}));
  }

  CLI11_PARSE(app, argc, argv);

  try {
    if (*analytic) return cmd_analytic(flags);
    if (*voter) return cmd_voter(flags);
    if (*epidemic) return cmd_epidemic(flags);
    if (*identify) return cmd_identify(flags, system);
    if (*validate) return cmd_validate(flags, system);
    if (*export_front) return cmd_export_front(flags, system);
  } catch (const ConfigurationError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
