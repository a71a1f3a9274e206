#include "koopmoo/gedmd.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "koopmoo/diagnostics.hpp"
#include "koopmoo/errors.hpp"

namespace koopmoo {

namespace {

// Minimum-norm least-squares solution of A X = B with relative singular value cutoff.
Matrix pinv_solve(const Matrix& a, const Matrix& b, double rcond = 1e-12) {
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  Matrix x = Matrix::Zero(a.cols(), b.cols());
  if (s.size() == 0 || s(0) == 0.0) return x;
  const double cutoff = rcond * s(0);
  Eigen::Index rank = 0;
  while (rank < s.size() && s(rank) > cutoff) ++rank;
  const Matrix utb = svd.matrixU().leftCols(rank).transpose() * b;
  x = svd.matrixV().leftCols(rank) * (s.head(rank).cwiseInverse().asDiagonal() * utb);
  return x;
}

// Coefficients of x_j * f where f = sum_r c_r psi_r. Terms whose product leaves the
// dictionary are dropped; `dropped` is set when any nonzero term was lost.
Vector multiply_by_coordinate(const Dictionary& dict, const Eigen::Ref<const Vector>& c, int j, bool& dropped) {
  Vector out = Vector::Zero(c.size());
  for (std::size_t r = 0; r < dict.size(); ++r) {
    const double cr = c(static_cast<Eigen::Index>(r));
    if (cr == 0.0) continue;
    MultiIndex e = dict.exponents(r);
    e[static_cast<std::size_t>(j)] += 1;
    if (const auto idx = dict.find(e)) {
      out(static_cast<Eigen::Index>(*idx)) += cr;
    } else {
      dropped = true;
    }
  }
  return out;
}

}  // namespace

Vector SdeModel::drift_at(const Vector& x) const { return drift.transpose() * dictionary.eval(x); }

Matrix SdeModel::diffusion_at(const Vector& x) const {
  const int d = dimension();
  if (!has_diffusion()) return Matrix::Zero(d, d);
  const Vector flat = diffusion.transpose() * dictionary.eval(x);
  Matrix a(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) a(i, j) = flat(i * d + j);
  }
  return a;
}

GedmdMatrices build_matrices(const Dictionary& dict, std::span<const SamplePoint> samples, Exec exec) {
  if (samples.empty()) throw ConfigurationError("build_matrices needs at least one sample");
  const auto l = static_cast<Eigen::Index>(dict.size());
  const auto m = static_cast<Eigen::Index>(samples.size());
  for (const auto& s : samples) {
    if (s.x.size() != dict.dimension() || s.b.size() != dict.dimension() || s.a.rows() != dict.dimension() ||
        s.a.cols() != dict.dimension()) {
      throw ConfigurationError("sample dimension does not match dictionary dimension " +
                               std::to_string(dict.dimension()));
    }
  }
  GedmdMatrices out{Matrix(l, m), Matrix(l, m)};
  for_each_index(exec, samples.size(), [&](std::size_t col) {
    const auto& s = samples[col];
    const auto c = static_cast<Eigen::Index>(col);
    out.psi_x.col(c) = dict.eval(s.x);
    out.dpsi_x.col(c) = dict.generator_column(s.b, s.a, s.x);
  });
  return out;
}

GeneratorMatrix estimate_generator(const Dictionary& dict, const Matrix& psi_x, const Matrix& dpsi_x, double ridge) {
  const auto l = static_cast<Eigen::Index>(dict.size());
  if (psi_x.rows() != l || dpsi_x.rows() != l || psi_x.cols() != dpsi_x.cols()) {
    throw ConfigurationError("Psi_X and dPsi_X are not conformable with the dictionary");
  }
  if (ridge < 0.0) throw ConfigurationError("ridge must be non-negative");
  if (psi_x.cwiseAbs().maxCoeff() == 0.0) throw DegenerateDataError("Psi_X is identically zero");

  GeneratorMatrix g{dict, Matrix(), static_cast<std::size_t>(psi_x.cols())};
  if (ridge > 0.0) {
    Matrix gram = psi_x * psi_x.transpose();
    gram.diagonal().array() += ridge;
    g.matrix = gram.ldlt().solve(psi_x * dpsi_x.transpose());
  } else {
    // Psi_X^T L = dPsi_X^T in the least-squares sense.
    g.matrix = pinv_solve(psi_x.transpose(), dpsi_x.transpose());
  }
  return g;
}

GeneratorMatrix fit_generator(const Dictionary& dict, std::span<const SamplePoint> samples, double ridge, Exec exec) {
  const auto data = build_matrices(dict, samples, exec);
  return estimate_generator(dict, data.psi_x, data.dpsi_x, ridge);
}

Matrix identify_drift(const GeneratorMatrix& generator) {
  const auto& dict = generator.dictionary;
  Matrix drift(generator.matrix.rows(), dict.dimension());
  for (int i = 0; i < dict.dimension(); ++i) {
    drift.col(i) = generator.matrix.col(static_cast<Eigen::Index>(dict.coordinate_index(i)));
  }
  return drift;
}

Matrix identify_diffusion(const GeneratorMatrix& generator, const Matrix& drift) {
  const auto& dict = generator.dictionary;
  const int d = dict.dimension();
  if (drift.rows() != generator.matrix.rows() || drift.cols() != d) {
    throw ConfigurationError("drift coefficient matrix has the wrong shape");
  }
  Matrix table(generator.matrix.rows(), d * d);
  bool dropped = false;
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      const auto k = dict.pair_index(i, j);
      if (!k) {
        throw ConfigurationError("dictionary lacks x" + std::to_string(i + 1) + "*x" + std::to_string(j + 1) +
                                 ", needed to identify the diffusion");
      }
      const Vector bij = multiply_by_coordinate(dict, drift.col(i), j, dropped);
      const Vector bji = multiply_by_coordinate(dict, drift.col(j), i, dropped);
      const Vector aij = generator.matrix.col(static_cast<Eigen::Index>(*k)) - bij - bji;
      table.col(i * d + j) = aij;
      table.col(j * d + i) = aij;
    }
  }
  if (dropped) {
    warn("drift times coordinate exceeds the dictionary degree; diffusion identification truncates those terms");
  }
  // Noise can break the (i, j)/(j, i) symmetry only if the columns were estimated
  // separately; averaging keeps the table exactly symmetric either way.
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      const Vector avg = 0.5 * (table.col(i * d + j) + table.col(j * d + i));
      table.col(i * d + j) = avg;
      table.col(j * d + i) = avg;
    }
  }
  return table;
}

SdeModel identify_model(const GeneratorMatrix& generator, bool with_diffusion) {
  SdeModel model{generator.dictionary, identify_drift(generator), Matrix()};
  if (with_diffusion) model.diffusion = identify_diffusion(generator, model.drift);
  return model;
}

Matrix psd_factor(const Matrix& a) {
  if (a.rows() != a.cols()) throw ConfigurationError("diffusion matrix must be square");
  const Matrix sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  Vector lambda = eig.eigenvalues();
  if (lambda.size() > 0 && lambda.minCoeff() < -1e-10) {
    throw IndefiniteDiffusionError("diffusion matrix has eigenvalue " + std::to_string(lambda.minCoeff()));
  }
  lambda = lambda.cwiseMax(0.0);
  // B^T B = a with B = sqrt(Lambda) Q^T; the R factor of B = QR gives a = R^T R.
  const Matrix b = lambda.cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
  Eigen::HouseholderQR<Matrix> qr(b);
  Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    if (r(i, i) < 0.0) r.row(i) *= -1.0;
  }
  return r.transpose();
}

Matrix sigma_pointwise(const SdeModel& model, const Vector& x) { return psd_factor(model.diffusion_at(x)); }

Matrix sparsify(const Matrix& features, const Matrix& targets, const Matrix& coefficients, double threshold) {
  if (threshold < 0.0) throw ConfigurationError("sparsify threshold must be non-negative");
  if (features.rows() != targets.rows() || features.cols() != coefficients.rows() ||
      targets.cols() != coefficients.cols()) {
    throw ConfigurationError("sparsify: features, targets and coefficients are not conformable");
  }
  if (threshold == 0.0) return coefficients;

  const Eigen::Index l = coefficients.rows();
  Matrix out = coefficients;
  for (Eigen::Index q = 0; q < coefficients.cols(); ++q) {
    Vector c = coefficients.col(q);
    std::vector<Eigen::Index> support;
    for (Eigen::Index iter = 0; iter <= l; ++iter) {
      std::vector<Eigen::Index> next;
      for (Eigen::Index k = 0; k < l; ++k) {
        if (std::abs(c(k)) >= threshold) next.push_back(k);
      }
      if (iter > 0 && next == support) break;
      support = std::move(next);
      c.setZero();
      if (support.empty()) break;
      Matrix sub(features.rows(), static_cast<Eigen::Index>(support.size()));
      for (std::size_t s = 0; s < support.size(); ++s) sub.col(static_cast<Eigen::Index>(s)) = features.col(support[s]);
      const Vector fit = pinv_solve(sub, targets.col(q));
      for (std::size_t s = 0; s < support.size(); ++s) c(support[s]) = fit(static_cast<Eigen::Index>(s));
    }
    out.col(q) = c;
  }
  if (out.cwiseAbs().maxCoeff() == 0.0) warn("sparsify: every coefficient fell below the threshold; model is zero");
  return out;
}

GeneratorMatrix sparsify_generator(const GeneratorMatrix& generator, const GedmdMatrices& data, double threshold) {
  GeneratorMatrix out = generator;
  out.matrix = sparsify(data.psi_x.transpose(), data.dpsi_x.transpose(), generator.matrix, threshold);
  return out;
}

double generator_residual(const Matrix& m, const GedmdMatrices& data) {
  return (data.dpsi_x - m * data.psi_x).norm();
}

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  j["data"] = std::move(data);
  return j;
}

Matrix matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw ConfigurationError("matrix data length mismatch");
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
  }
  return m;
}

nlohmann::json to_json(const GeneratorMatrix& g) {
  return {{"dictionary", g.dictionary.to_json()}, {"sample_count", g.sample_count}, {"L", matrix_to_json(g.matrix)}};
}

GeneratorMatrix generator_from_json(const nlohmann::json& j) {
  GeneratorMatrix g{Dictionary::from_json(j.at("dictionary")), matrix_from_json(j.at("L")),
                    j.at("sample_count").get<std::size_t>()};
  if (g.matrix.rows() != static_cast<Eigen::Index>(g.dictionary.size()) || g.matrix.cols() != g.matrix.rows()) {
    throw ConfigurationError("generator matrix does not match its dictionary");
  }
  return g;
}

nlohmann::json to_json(const SdeModel& model) {
  nlohmann::json j{{"dictionary", model.dictionary.to_json()}, {"drift", matrix_to_json(model.drift)}};
  if (model.has_diffusion()) j["diffusion"] = matrix_to_json(model.diffusion);
  return j;
}

SdeModel sde_model_from_json(const nlohmann::json& j) {
  SdeModel model{Dictionary::from_json(j.at("dictionary")), matrix_from_json(j.at("drift")), Matrix()};
  if (j.contains("diffusion")) model.diffusion = matrix_from_json(j.at("diffusion"));
  return model;
}

}  // namespace koopmoo
