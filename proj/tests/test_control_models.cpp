#include <doctest.h>

#include <random>

#include "koopmoo/control_models.hpp"
#include "koopmoo/diagnostics.hpp"
#include "koopmoo/errors.hpp"
#include "oracles.hpp"

using namespace koopmoo;

namespace {

// Drift and diffusion affine in a 2-D control.
void affine_sde(const Vector& x, const Vector& u, Vector& b, Matrix& a) {
  b.resize(2);
  b << -x(0) + u(0) * x(1), -x(1) + u(1) * x(0) * x(0) + 0.5 * u(0);
  a.resize(2, 2);
  a << 1.0 + u(0) * x(0) * x(0), 0.1 * u(1), 0.1 * u(1), 1.0 + u(1);
}

// Same structure but quadratic in u_0.
void quadratic_sde(const Vector& x, const Vector& u, Vector& b, Matrix& a) {
  affine_sde(x, u, b, a);
  b(0) += u(0) * u(0) * x(0);
}

using Sde = void (*)(const Vector&, const Vector&, Vector&, Matrix&);

ControlSampler sampler_for(Sde sde) {
  return [sde](const Vector& u) {
    std::mt19937_64 rng(17);
    std::vector<SamplePoint> out;
    for (int k = 0; k < 150; ++k) {
      SamplePoint s{oracle::random_vector(rng, 2, -1.0, 1.0), Vector(), Matrix()};
      sde(s.x, u, s.b, s.a);
      out.push_back(s);
    }
    return out;
  };
}

std::vector<Vector> corners() {
  std::vector<Vector> c;
  for (auto [a, b] : {std::pair{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}}) {
    Vector u(2);
    u << a, b;
    c.push_back(u);
  }
  return c;
}

}  // namespace

TEST_CASE("interpolated generators match direct estimates for control-affine dynamics") {
  const auto dict = Dictionary::monomials(2, 3);
  const auto sampler = sampler_for(affine_sde);
  const auto controls = corners();
  const auto family = learn_affine_family(dict, sampler, controls);
  CHECK(family.control_dimension() == 2);
  CHECK(family.consistency_residual < 1e-9);
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    const Vector u = oracle::random_vector(rng, 2, 0.0, 1.0);
    const auto direct = fit_generator(dict, sampler(u));
    CHECK((family.interpolate(u).matrix - direct.matrix).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("consistency residual exposes non-affine control dependence") {
  const auto dict = Dictionary::monomials(2, 3);
  // u^2 = u at the corners, so an interior control is needed to see the curvature
  auto controls = corners();
  Vector mid(2);
  mid << 0.5, 0.0;
  controls.push_back(mid);
  const auto family = learn_affine_family(dict, sampler_for(quadratic_sde), controls);
  CHECK(family.consistency_residual > 1e-3);
  CHECK(learn_affine_family(dict, sampler_for(affine_sde), controls).consistency_residual < 1e-9);
}

TEST_CASE("affinity defect is zero at the end points") {
  const Matrix a = Matrix::Random(4, 4);
  const Matrix b = Matrix::Random(4, 4);
  CHECK(affinity_defect(a, a, b, 1.0) == 0.0);
  CHECK(affinity_defect(b, a, b, 0.0) == 0.0);
  CHECK(affinity_defect(0.5 * a + 0.5 * b, a, b, 0.5) < 1e-15);
}

TEST_CASE("assembly preconditions") {
  const auto dict = Dictionary::monomials(2, 2);
  const auto sampler = sampler_for(affine_sde);
  std::vector<Vector> no_zero{corners()[1], corners()[2]};
  CHECK_THROWS_AS(learn_affine_family(dict, sampler, no_zero), ConfigurationError);
  Vector diag(2);
  diag << 1.0, 1.0;
  std::vector<Vector> rank_deficient{corners()[0], diag, 2.0 * diag};
  CHECK_THROWS_AS(learn_affine_family(dict, sampler, rank_deficient), ConfigurationError);
  const auto family = learn_affine_family(dict, sampler, corners());
  CHECK_THROWS_AS(family.interpolate(Vector::Zero(3)), ConfigurationError);
}

TEST_CASE("interpolation outside the learning hull warns") {
  const auto dict = Dictionary::monomials(2, 2);
  const auto family = learn_affine_family(dict, sampler_for(affine_sde), corners());
  ScopedWarningCapture capture;
  Vector inside(2);
  inside << 0.5, 0.5;
  family.interpolate(inside);
  CHECK(capture.messages().empty());
  Vector outside(2);
  outside << 2.0, -1.0;
  family.interpolate(outside);
  CHECK(capture.contains("outside the learning controls' hull"));
}

TEST_CASE("augmented samples carry the control block") {
  SamplePoint s{Vector::Ones(2), Vector::Constant(2, 3.0), Matrix::Identity(2, 2)};
  const auto aug = augment_sample(s, Vector::Constant(1, 0.4), Vector::Constant(1, -0.2));
  CHECK(aug.x.size() == 3);
  CHECK(aug.x(2) == 0.4);
  CHECK(aug.b(2) == -0.2);
  CHECK(aug.a.topLeftCorner(2, 2) == Matrix::Identity(2, 2));
  CHECK(aug.a.col(2).norm() == 0.0);
  CHECK_THROWS_AS(augment_sample(s, Vector::Constant(1, 0.4), Vector::Zero(2)), ConfigurationError);
}

TEST_CASE("augmented identification of a control-nonlinear system and substitution") {
  // b = (-x1 + u^2 x2, -x2 (1 - u)), a = diag(1 + u, 1)
  std::mt19937_64 rng(12);
  std::vector<SamplePoint> samples;
  for (int k = 0; k < 300; ++k) {
    const Vector x = oracle::random_vector(rng, 2, -1.0, 1.0);
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    Vector b(2);
    b << -x(0) + u * u * x(1), -x(1) * (1.0 - u);
    Matrix a = Matrix::Identity(2, 2);
    a(0, 0) += u;
    samples.push_back(augment_sample({x, b, a}, Vector::Constant(1, u), Vector::Zero(1)));
  }
  AugmentedOptions opts;
  const auto model = learn_augmented(Dictionary::monomials(3, 4), samples, opts);
  CHECK(model.state_dimension == 2);
  CHECK(model.control_dimension == 1);
  const Vector u = Vector::Constant(1, 0.3);
  const auto sub = model.substitute(u);
  CHECK(sub.dimension() == 2);
  for (int trial = 0; trial < 5; ++trial) {
    const Vector x = oracle::random_vector(rng, 2, -1.0, 1.0);
    Vector b(2);
    b << -x(0) + 0.09 * x(1), -0.7 * x(1);
    CHECK((sub.drift_at(x) - b).cwiseAbs().maxCoeff() < 1e-9);
    Matrix a = Matrix::Identity(2, 2);
    a(0, 0) = 1.3;
    CHECK((sub.diffusion_at(x) - a).cwiseAbs().maxCoeff() < 1e-9);
  }
  CHECK_THROWS_AS(model.substitute(Vector::Zero(2)), ConfigurationError);

  const auto back = augmented_model_from_json(to_json(model));
  CHECK(back.generator.matrix == model.generator.matrix);
  CHECK(back.model.drift == model.model.drift);
  CHECK(back.state_dimension == 2);
}

TEST_CASE("affine family JSON round trip") {
  const auto dict = Dictionary::monomials(2, 2);
  const auto family = learn_affine_family(dict, sampler_for(affine_sde), corners());
  const auto back = affine_family_from_json(to_json(family));
  CHECK(back.base == family.base);
  REQUIRE(back.channels.size() == 2);
  CHECK(back.channels[1] == family.channels[1]);
  CHECK(back.valid_upper == family.valid_upper);
  CHECK(back.consistency_residual == family.consistency_residual);
}
