#include <doctest.h>

#include <random>

#include "koopmoo/dictionary.hpp"
#include "koopmoo/errors.hpp"
#include "oracles.hpp"

using namespace koopmoo;

TEST_CASE("monomial dictionary size and ordering") {
  CHECK(monomial_count(2, 2) == 6);
  CHECK(monomial_count(6, 4) == 210);
  CHECK(monomial_count(3, 5) == 56);
  for (int d = 1; d <= 4; ++d) {
    for (int p = 0; p <= 4; ++p) {
      if (p == 0) continue;
      CHECK(Dictionary::monomials(d, p).size() == monomial_count(d, p));
    }
  }
  const auto dict = Dictionary::monomials(2, 2);
  const std::vector<MultiIndex> expected{{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}};
  for (std::size_t k = 0; k < expected.size(); ++k) CHECK(dict.exponents(k) == expected[k]);
  CHECK(dict.constant_index() == 0);
  CHECK(dict.coordinate_index(0) == 1);
  CHECK(dict.coordinate_index(1) == 2);
  CHECK(*dict.pair_index(0, 1) == 4);
  CHECK(*dict.pair_index(1, 1) == 5);
}

TEST_CASE("custom dictionaries must hold the constant and every coordinate") {
  CHECK_NOTHROW(Dictionary::from_exponents(2, {{0, 0}, {1, 0}, {0, 1}, {2, 0}}));
  CHECK_THROWS_AS(Dictionary::from_exponents(2, {{1, 0}, {0, 1}}), ConfigurationError);
  CHECK_THROWS_AS(Dictionary::from_exponents(2, {{0, 0}, {1, 0}, {2, 0}}), ConfigurationError);
  CHECK_THROWS_AS(Dictionary::from_exponents(2, {{0, 0}, {1, 0}, {0, 1}, {1, 0}}), ConfigurationError);
  CHECK_THROWS_AS(Dictionary::from_exponents(2, {{0, 0}, {1, 0}, {0, 1}, {-1, 2}}), ConfigurationError);
  CHECK_THROWS_AS(Dictionary::from_exponents(2, {{0, 0}, {1, 0, 0}, {0, 1}}), ConfigurationError);
}

TEST_CASE("evaluation matches direct products") {
  std::mt19937_64 rng(3);
  const auto dict = Dictionary::monomials(3, 4);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector x = oracle::random_vector(rng, 3, -2.0, 2.0);
    const Vector psi = dict.eval(x);
    for (std::size_t k = 0; k < dict.size(); ++k) {
      CHECK(psi(static_cast<Eigen::Index>(k)) == doctest::Approx(oracle::monomial(x, dict.exponents(k))).epsilon(1e-14));
    }
  }
}

TEST_CASE("gradients and Hessians agree with finite differences to 1e-6 relative") {
  std::mt19937_64 rng(11);
  const auto dict = Dictionary::monomials(3, 4);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const Vector x = oracle::random_vector(rng, 3, 0.3, 1.7);
    for (std::size_t k = 0; k < dict.size(); ++k) {
      const auto f = [&](const Vector& y) { return oracle::monomial(y, dict.exponents(k)); };
      const Vector g = dict.gradient(k, x);
      const Vector g_fd = oracle::fd_gradient(f, x);
      const Matrix h = dict.hessian(k, x);
      const Matrix h_fd = oracle::fd_hessian(f, x);
      const double gs = std::max(1.0, g.cwiseAbs().maxCoeff());
      const double hs = std::max(1.0, h.cwiseAbs().maxCoeff());
      worst = std::max(worst, (g - g_fd).cwiseAbs().maxCoeff() / gs);
      worst = std::max(worst, (h - h_fd).cwiseAbs().maxCoeff() / hs);
      CHECK((h - h.transpose()).norm() == 0.0);
    }
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("generator action matches a finite-difference generator") {
  std::mt19937_64 rng(5);
  const auto dict = Dictionary::monomials(2, 3);
  for (int trial = 0; trial < 10; ++trial) {
    const Vector x = oracle::random_vector(rng, 2, -1.0, 1.0);
    const Vector b = oracle::random_vector(rng, 2, -1.0, 1.0);
    Matrix s = Matrix::Random(2, 2);
    const Matrix a = s * s.transpose();
    const Vector col = dict.generator_column(b, a, x);
    for (std::size_t k = 0; k < dict.size(); ++k) {
      const auto f = [&](const Vector& y) { return oracle::monomial(y, dict.exponents(k)); };
      const double expected = oracle::fd_generator(f, b, a, x);
      CHECK(dict.apply_generator(k, b, a, x) == doctest::Approx(expected).epsilon(1e-6));
      CHECK(col(static_cast<Eigen::Index>(k)) == doctest::Approx(dict.apply_generator(k, b, a, x)).epsilon(1e-13));
    }
  }
}

TEST_CASE("asymmetric diffusion is rejected") {
  const auto dict = Dictionary::monomials(2, 2);
  Matrix a(2, 2);
  a << 1.0, 0.5, 0.4, 1.0;
  CHECK_THROWS_AS(dict.apply_generator(0, Vector::Zero(2), a, Vector::Zero(2)), ConfigurationError);
}

TEST_CASE("wrong point dimension is a configuration error") {
  const auto dict = Dictionary::monomials(2, 2);
  CHECK_THROWS_AS(dict.eval(Vector::Zero(3)), ConfigurationError);
}

TEST_CASE("dictionary JSON round trip") {
  const auto full = Dictionary::monomials(3, 3);
  CHECK(Dictionary::from_json(full.to_json()) == full);
  const auto custom = Dictionary::from_exponents(2, {{0, 0}, {1, 0}, {0, 1}, {2, 0}});
  const auto back = Dictionary::from_json(custom.to_json());
  CHECK(back == custom);
  CHECK_FALSE(back.is_complete());
}
