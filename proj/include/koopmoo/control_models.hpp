#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "koopmoo/gedmd.hpp"

namespace koopmoo {

/// Pointwise drift/diffusion source for a constant control u.
using ControlSampler = std::function<std::vector<SamplePoint>(const Vector& u)>;

/// Generator family L(u) = L0 + sum_i u_i A_i for control-affine dynamics.
struct AffineGeneratorFamily {
  Dictionary dictionary;
  Matrix base;
  std::vector<Matrix> channels;
  // Axis-aligned hull of the learning controls; interpolation outside it warns.
  Vector valid_lower;
  Vector valid_upper;
  // Frobenius residual of the affine least-squares fit over redundant controls.
  double consistency_residual = 0.0;

  int control_dimension() const { return static_cast<int>(channels.size()); }
  GeneratorMatrix interpolate(const Vector& u) const;
};

/// Assemble a family from generators already estimated at `controls`. The zero control
/// must be present; the remaining offsets must span R^{d_u}. With more offsets than
/// channels, A is the least-squares fit of L(u_c) - L0 = sum_i u_{c,i} A_i.
AffineGeneratorFamily assemble_affine_family(std::span<const Vector> controls,
                                             std::span<const GeneratorMatrix> generators);

AffineGeneratorFamily learn_affine_family(const Dictionary& dict, const ControlSampler& sampler,
                                          std::span<const Vector> controls, double ridge = 0.0,
                                          Exec exec = Exec::parallel);

/// Joint least-squares fit of L(u) = L0 + sum_i u_i A_i on the pooled data of every
/// control: dPsi ~ (M0 + sum_i u_i M_i) Psi. Needs no zero control and no per-control
/// generator, so it also works when a single control has fewer samples than basis
/// functions. consistency_residual holds the Frobenius residual of that fit.
AffineGeneratorFamily fit_affine_family(const Dictionary& dict, std::span<const Vector> controls,
                                        std::span<const std::vector<SamplePoint>> samples, double ridge = 0.0,
                                        Exec exec = Exec::parallel);

/// ||L_mid - (alpha L_a + (1 - alpha) L_b)||_F.
double affinity_defect(const Matrix& l_mid, const Matrix& l_a, const Matrix& l_b, double alpha);

/// Generator and identified SDE on the augmented state [x, u]; controls are the
/// trailing control_dimension coordinates.
struct AugmentedModel {
  GeneratorMatrix generator;
  SdeModel model;
  int state_dimension = 0;
  int control_dimension = 0;
  bool control_columns_dropped = false;

  /// State-only model with the controls frozen at u (polynomial partial evaluation).
  SdeModel substitute(const Vector& u) const;
};

struct AugmentedOptions {
  int control_dimension = 1;
  bool drop_control_columns = false;
  double ridge = 0.0;
  bool identify_diffusion = true;
  Exec exec = Exec::parallel;
};

/// Augmented sample [x, u] with drift [b, u_dot] and block diffusion
/// [[a, a12], [a12^T, a22]]; the control blocks default to zero.
SamplePoint augment_sample(const SamplePoint& state_sample, const Vector& u, const Vector& u_dot,
                           const std::optional<Matrix>& a12 = std::nullopt,
                           const std::optional<Matrix>& a22 = std::nullopt);

AugmentedModel learn_augmented(const Dictionary& dict_aug, std::span<const SamplePoint> samples,
                               const AugmentedOptions& options);

nlohmann::json to_json(const AffineGeneratorFamily& family);
AffineGeneratorFamily affine_family_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AugmentedModel& model);
AugmentedModel augmented_model_from_json(const nlohmann::json& j);

}  // namespace koopmoo
