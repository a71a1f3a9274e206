#include "koopmoo/control_models.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "koopmoo/diagnostics.hpp"
#include "koopmoo/errors.hpp"

namespace koopmoo {

GeneratorMatrix AffineGeneratorFamily::interpolate(const Vector& u) const {
  if (u.size() != control_dimension()) throw ConfigurationError("control has the wrong dimension for this family");
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (u(i) < valid_lower(i) || u(i) > valid_upper(i)) {
      warn("generator interpolation outside the learning controls' hull (affine extrapolation)");
      break;
    }
  }
  GeneratorMatrix g{dictionary, base, 0};
  for (std::size_t i = 0; i < channels.size(); ++i) {
    const double ui = u(static_cast<Eigen::Index>(i));
    if (ui != 0.0) g.matrix += ui * channels[i];
  }
  return g;
}

AffineGeneratorFamily assemble_affine_family(std::span<const Vector> controls,
                                             std::span<const GeneratorMatrix> generators) {
  if (controls.empty() || controls.size() != generators.size()) {
    throw ConfigurationError("affine family needs one generator per control");
  }
  const Eigen::Index du = controls.front().size();
  if (du < 1) throw ConfigurationError("control dimension must be >= 1");
  std::optional<std::size_t> zero;
  for (std::size_t c = 0; c < controls.size(); ++c) {
    if (controls[c].size() != du) throw ConfigurationError("controls have inconsistent dimensions");
    if (!zero && controls[c].cwiseAbs().maxCoeff() == 0.0) zero = c;
  }
  if (!zero) throw ConfigurationError("affine family requires the zero control among the learning controls");

  const Matrix& l0 = generators[*zero].matrix;
  const Eigen::Index entries = l0.size();
  const auto offsets = static_cast<Eigen::Index>(controls.size() - 1);
  if (offsets < du) throw ConfigurationError("affine family needs at least d_u nonzero controls");
  Matrix c(offsets, du);
  Matrix delta(offsets, entries);
  Eigen::Index row = 0;
  for (std::size_t k = 0; k < controls.size(); ++k) {
    if (k == *zero) continue;
    if (generators[k].matrix.rows() != l0.rows() || generators[k].matrix.cols() != l0.cols()) {
      throw ConfigurationError("generators in an affine family must share the dictionary");
    }
    c.row(row) = controls[k].transpose();
    delta.row(row) = (generators[k].matrix - l0).reshaped().transpose();
    ++row;
  }
  Eigen::JacobiSVD<Matrix> svd(c, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  if (s.minCoeff() <= 1e-10 * s.maxCoeff()) {
    throw ConfigurationError("learning controls are rank deficient; cannot separate control channels");
  }
  const Matrix a = svd.solve(delta);  // du x entries

  AffineGeneratorFamily family;
  family.dictionary = generators[*zero].dictionary;
  family.base = l0;
  for (Eigen::Index i = 0; i < du; ++i) {
    family.channels.emplace_back(a.row(i).reshaped(l0.rows(), l0.cols()));
  }
  family.valid_lower = controls.front();
  family.valid_upper = controls.front();
  for (const auto& u : controls) {
    family.valid_lower = family.valid_lower.cwiseMin(u);
    family.valid_upper = family.valid_upper.cwiseMax(u);
  }
  family.consistency_residual = (c * a - delta).norm();
  return family;
}

AffineGeneratorFamily learn_affine_family(const Dictionary& dict, const ControlSampler& sampler,
                                          std::span<const Vector> controls, double ridge, Exec exec) {
  std::vector<GeneratorMatrix> generators(controls.size(), GeneratorMatrix{dict, Matrix(), 0});
  for_each_index(exec, controls.size(), [&](std::size_t c) {
    const auto samples = sampler(controls[c]);
    generators[c] = fit_generator(dict, samples, ridge, Exec::serial);
  });
  return assemble_affine_family(controls, generators);
}

AffineGeneratorFamily fit_affine_family(const Dictionary& dict, std::span<const Vector> controls,
                                        std::span<const std::vector<SamplePoint>> samples, double ridge, Exec exec) {
  if (controls.empty() || controls.size() != samples.size()) {
    throw ConfigurationError("affine family needs one sample set per control");
  }
  if (ridge < 0.0) throw ConfigurationError("ridge must be non-negative");
  const Eigen::Index du = controls.front().size();
  if (du < 1) throw ConfigurationError("control dimension must be >= 1");
  const auto l = static_cast<Eigen::Index>(dict.size());

  std::vector<GedmdMatrices> blocks(controls.size());
  for (std::size_t c = 0; c < controls.size(); ++c) {
    if (controls[c].size() != du) throw ConfigurationError("controls have inconsistent dimensions");
  }
  for_each_index(exec, controls.size(), [&](std::size_t c) { blocks[c] = build_matrices(dict, samples[c], Exec::serial); });
  Eigen::Index m = 0;
  for (const auto& b : blocks) m += b.psi_x.cols();

  // Features [psi; u_1 psi; ...; u_du psi], targets dpsi.
  Matrix features((du + 1) * l, m);
  Matrix targets(l, m);
  Eigen::Index col = 0;
  for (std::size_t c = 0; c < blocks.size(); ++c) {
    const auto n = blocks[c].psi_x.cols();
    features.block(0, col, l, n) = blocks[c].psi_x;
    for (Eigen::Index i = 0; i < du; ++i) features.block((i + 1) * l, col, l, n) = controls[c](i) * blocks[c].psi_x;
    targets.middleCols(col, n) = blocks[c].dpsi_x;
    col += n;
  }
  Matrix big;  // l x (du + 1) l
  if (ridge == 0.0) {
    Eigen::BDCSVD<Matrix> svd(features.transpose(), Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(1e-12);
    big = svd.solve(targets.transpose()).transpose();
  } else {
    const Matrix gram = features * features.transpose() + ridge * Matrix::Identity(features.rows(), features.rows());
    big = gram.ldlt().solve(features * targets.transpose()).transpose();
  }

  AffineGeneratorFamily family;
  family.dictionary = dict;
  family.base = big.leftCols(l).transpose();
  for (Eigen::Index i = 0; i < du; ++i) family.channels.emplace_back(big.middleCols((i + 1) * l, l).transpose());
  family.valid_lower = controls.front();
  family.valid_upper = controls.front();
  for (const auto& u : controls) {
    family.valid_lower = family.valid_lower.cwiseMin(u);
    family.valid_upper = family.valid_upper.cwiseMax(u);
  }
  family.consistency_residual = (targets - big * features).norm();
  return family;
}

double affinity_defect(const Matrix& l_mid, const Matrix& l_a, const Matrix& l_b, double alpha) {
  return (l_mid - (alpha * l_a + (1.0 - alpha) * l_b)).norm();
}

SdeModel AugmentedModel::substitute(const Vector& u) const {
  if (u.size() != control_dimension) throw ConfigurationError("control has the wrong dimension for this model");
  const auto& aug = model.dictionary;
  const int d = state_dimension;
  const int full = d + control_dimension;
  SdeModel out{Dictionary::monomials(d, std::max(1, aug.max_degree())), Matrix(), Matrix()};
  const auto l = static_cast<Eigen::Index>(out.dictionary.size());
  out.drift = Matrix::Zero(l, d);
  if (model.has_diffusion()) out.diffusion = Matrix::Zero(l, d * d);
  for (std::size_t k = 0; k < aug.size(); ++k) {
    const auto& e = aug.exponents(k);
    double factor = 1.0;
    for (int j = 0; j < control_dimension; ++j) {
      for (int p = 0; p < e[static_cast<std::size_t>(d + j)]; ++p) factor *= u(j);
    }
    if (factor == 0.0) continue;
    const MultiIndex state_part(e.begin(), e.begin() + d);
    const auto target = static_cast<Eigen::Index>(*out.dictionary.find(state_part));
    const auto source = static_cast<Eigen::Index>(k);
    out.drift.row(target) += factor * model.drift.row(source).head(d);
    if (model.has_diffusion()) {
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) out.diffusion(target, i * d + j) += factor * model.diffusion(source, i * full + j);
      }
    }
  }
  return out;
}

SamplePoint augment_sample(const SamplePoint& s, const Vector& u, const Vector& u_dot, const std::optional<Matrix>& a12,
                           const std::optional<Matrix>& a22) {
  const Eigen::Index d = s.x.size();
  const Eigen::Index du = u.size();
  if (u_dot.size() != du) throw ConfigurationError("u_dot must match the control dimension");
  SamplePoint out;
  out.x.resize(d + du);
  out.x << s.x, u;
  out.b.resize(d + du);
  out.b << s.b, u_dot;
  out.a = Matrix::Zero(d + du, d + du);
  out.a.topLeftCorner(d, d) = s.a;
  if (a12) {
    out.a.topRightCorner(d, du) = *a12;
    out.a.bottomLeftCorner(du, d) = a12->transpose();
  }
  if (a22) out.a.bottomRightCorner(du, du) = *a22;
  return out;
}

AugmentedModel learn_augmented(const Dictionary& dict_aug, std::span<const SamplePoint> samples,
                               const AugmentedOptions& options) {
  const int du = options.control_dimension;
  const int full = dict_aug.dimension();
  if (du < 1 || du >= full) {
    throw ConfigurationError("augmented dictionary must cover the state plus " + std::to_string(du) +
                             " control coordinate(s)");
  }
  if (!samples.empty() && samples.front().x.size() != full) {
    throw ConfigurationError("augmented samples do not carry the control coordinates expected by the dictionary");
  }
  AugmentedModel out;
  out.generator = fit_generator(dict_aug, samples, options.ridge, options.exec);
  out.model = identify_model(out.generator, options.identify_diffusion);
  out.state_dimension = full - du;
  out.control_dimension = du;
  out.control_columns_dropped = options.drop_control_columns;
  if (options.drop_control_columns) {
    for (int j = out.state_dimension; j < full; ++j) {
      out.model.drift.col(j).setZero();
      if (out.model.has_diffusion()) {
        for (int i = 0; i < full; ++i) {
          out.model.diffusion.col(i * full + j).setZero();
          out.model.diffusion.col(j * full + i).setZero();
        }
      }
    }
  }
  return out;
}

nlohmann::json to_json(const AffineGeneratorFamily& family) {
  nlohmann::json channels = nlohmann::json::array();
  for (const auto& a : family.channels) channels.push_back(matrix_to_json(a));
  return {{"dictionary", family.dictionary.to_json()},
          {"L0", matrix_to_json(family.base)},
          {"channels", channels},
          {"valid_lower", std::vector<double>(family.valid_lower.begin(), family.valid_lower.end())},
          {"valid_upper", std::vector<double>(family.valid_upper.begin(), family.valid_upper.end())},
          {"consistency_residual", family.consistency_residual}};
}

AffineGeneratorFamily affine_family_from_json(const nlohmann::json& j) {
  AffineGeneratorFamily f;
  f.dictionary = Dictionary::from_json(j.at("dictionary"));
  f.base = matrix_from_json(j.at("L0"));
  for (const auto& c : j.at("channels")) f.channels.push_back(matrix_from_json(c));
  const auto lo = j.at("valid_lower").get<std::vector<double>>();
  const auto hi = j.at("valid_upper").get<std::vector<double>>();
  f.valid_lower = Eigen::Map<const Vector>(lo.data(), static_cast<Eigen::Index>(lo.size()));
  f.valid_upper = Eigen::Map<const Vector>(hi.data(), static_cast<Eigen::Index>(hi.size()));
  f.consistency_residual = j.at("consistency_residual").get<double>();
  return f;
}

nlohmann::json to_json(const AugmentedModel& model) {
  std::vector<int> controls;
  for (int j = 0; j < model.control_dimension; ++j) controls.push_back(model.state_dimension + j);
  return {{"generator", to_json(model.generator)},
          {"model", to_json(model.model)},
          {"state_dimension", model.state_dimension},
          {"control_coordinates", controls},
          {"control_columns_dropped", model.control_columns_dropped}};
}

AugmentedModel augmented_model_from_json(const nlohmann::json& j) {
  AugmentedModel m;
  m.generator = generator_from_json(j.at("generator"));
  m.model = sde_model_from_json(j.at("model"));
  m.state_dimension = j.at("state_dimension").get<int>();
  m.control_dimension = static_cast<int>(j.at("control_coordinates").size());
  m.control_columns_dropped = j.at("control_columns_dropped").get<bool>();
  return m;
}

}  // namespace koopmoo
