#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "koopmoo/dictionary.hpp"
#include "koopmoo/parallel.hpp"

namespace koopmoo {

/// One pointwise measurement: state x, drift b(x), diffusion a(x) = sigma sigma^T.
struct SamplePoint {
  Vector x;
  Vector b;
  Matrix a;
};

/// Psi_X and dPsi_X, both l x m.
struct GedmdMatrices {
  Matrix psi_x;
  Matrix dpsi_x;
};

/// Empirical generator representation. Column k of `matrix` holds the expansion of
/// (L psi_k) over the dictionary, i.e. matrix = M^T where dPsi_X ~ M Psi_X.
struct GeneratorMatrix {
  Dictionary dictionary;
  Matrix matrix;
  std::size_t sample_count = 0;

  Matrix m() const { return matrix.transpose(); }
};

/// Drift and diffusion as coefficient expansions over a dictionary.
/// drift is l x D with b_i(x) = sum_k drift(k, i) psi_k(x); diffusion is l x D^2 with
/// column i*D + j expanding a_ij.
struct SdeModel {
  Dictionary dictionary;
  Matrix drift;
  Matrix diffusion;

  int dimension() const { return dictionary.dimension(); }
  bool has_diffusion() const { return diffusion.size() > 0; }
  Vector drift_at(const Vector& x) const;
  Matrix diffusion_at(const Vector& x) const;
  Eigen::Ref<const Vector> diffusion_coefficients(int i, int j) const {
    return diffusion.col(i * dimension() + j);
  }
};

GedmdMatrices build_matrices(const Dictionary& dict, std::span<const SamplePoint> samples,
                             Exec exec = Exec::parallel);

/// L = M^T with M = argmin ||dPsi_X - M Psi_X||_F. ridge == 0 uses the pseudoinverse
/// with singular values below 1e-12 * sigma_max discarded; ridge > 0 solves the
/// Tikhonov-regularised normal equations.
GeneratorMatrix estimate_generator(const Dictionary& dict, const Matrix& psi_x, const Matrix& dpsi_x,
                                   double ridge = 0.0);

GeneratorMatrix fit_generator(const Dictionary& dict, std::span<const SamplePoint> samples, double ridge = 0.0,
                              Exec exec = Exec::parallel);

/// l x D matrix of drift coefficients, read from the generator columns of x_1..x_D.
Matrix identify_drift(const GeneratorMatrix& generator);

/// l x D^2 matrix of diffusion coefficients via a_ij = L(x_i x_j) - b_i x_j - b_j x_i,
/// symmetrised over (i, j). Terms b_i x_j that leave the dictionary are dropped with a
/// warning; a missing x_i x_j entry is a ConfigurationError.
Matrix identify_diffusion(const GeneratorMatrix& generator, const Matrix& drift);

SdeModel identify_model(const GeneratorMatrix& generator, bool with_diffusion = true);

/// Lower-triangular sigma with sigma sigma^T = a; eigenvalues in [-1e-10, 0) are
/// clamped to zero, anything below -1e-10 throws IndefiniteDiffusionError.
Matrix psd_factor(const Matrix& a);
Matrix sigma_pointwise(const SdeModel& model, const Vector& x);

/// Sequentially thresholded least squares. Each column of `coefficients` (l x q) is a
/// fit of the matching column of `targets` (m x q) on `features` (m x l). Entries with
/// magnitude below `threshold` are zeroed and the survivors refit until the support
/// stops changing.
Matrix sparsify(const Matrix& features, const Matrix& targets, const Matrix& coefficients, double threshold);

GeneratorMatrix sparsify_generator(const GeneratorMatrix& generator, const GedmdMatrices& data, double threshold);

/// Frobenius residual ||dPsi_X - M Psi_X||_F for a candidate M.
double generator_residual(const Matrix& m, const GedmdMatrices& data);

nlohmann::json to_json(const GeneratorMatrix& g);
GeneratorMatrix generator_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SdeModel& model);
SdeModel sde_model_from_json(const nlohmann::json& j);

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

}  // namespace koopmoo
