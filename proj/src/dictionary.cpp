#include "koopmoo/dictionary.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include "koopmoo/errors.hpp"

namespace koopmoo {

namespace {

int total_degree(const MultiIndex& e) { return std::accumulate(e.begin(), e.end(), 0); }

// Product over coordinates of x_m^(e_m - shift_m) where the shift lowers at most two
// exponents by one each (the caller guarantees the exponents stay non-negative).
double shifted_product(const MultiIndex& e, const Matrix& powers, int i = -1, int j = -1) {
  double value = 1.0;
  for (std::size_t m = 0; m < e.size(); ++m) {
    int p = e[m];
    if (static_cast<int>(m) == i) --p;
    if (static_cast<int>(m) == j) --p;
    if (p > 0) value *= powers(static_cast<Eigen::Index>(m), p);
  }
  return value;
}

void check_symmetric(const Matrix& a) {
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw ConfigurationError("diffusion matrix a is not symmetric");
  }
}

}  // namespace

std::size_t monomial_count(int dimension, int max_degree) {
  // C(D + deg, deg) computed incrementally to stay exact in integers.
  std::size_t c = 1;
  for (int k = 1; k <= max_degree; ++k) {
    c = c * static_cast<std::size_t>(dimension + k) / static_cast<std::size_t>(k);
  }
  return c;
}

Dictionary::Dictionary(int dimension, std::vector<MultiIndex> exponents, bool complete)
    : dimension_(dimension), complete_(complete), exponents_(std::move(exponents)) {
  if (dimension_ < 1) throw ConfigurationError("dictionary dimension must be >= 1");
  if (exponents_.empty()) throw ConfigurationError("dictionary must not be empty");
  coordinate_index_.assign(static_cast<std::size_t>(dimension_), exponents_.size());
  bool has_constant = false;
  for (std::size_t k = 0; k < exponents_.size(); ++k) {
    const auto& e = exponents_[k];
    if (static_cast<int>(e.size()) != dimension_) {
      throw ConfigurationError("exponent vector length does not match dictionary dimension");
    }
    if (std::any_of(e.begin(), e.end(), [](int p) { return p < 0; })) {
      throw ConfigurationError("negative exponent in dictionary");
    }
    if (!lookup_.emplace(e, k).second) {
      throw ConfigurationError("duplicate basis function in dictionary");
    }
    const int deg = total_degree(e);
    max_degree_ = std::max(max_degree_, deg);
    if (deg == 0) {
      has_constant = true;
      constant_index_ = k;
    } else if (deg == 1) {
      const auto it = std::find(e.begin(), e.end(), 1);
      coordinate_index_[static_cast<std::size_t>(it - e.begin())] = k;
    }
  }
  if (!has_constant) throw ConfigurationError("dictionary must contain the constant function");
  for (int i = 0; i < dimension_; ++i) {
    if (coordinate_index_[static_cast<std::size_t>(i)] == exponents_.size()) {
      throw ConfigurationError("dictionary is missing coordinate observable x" + std::to_string(i + 1));
    }
  }
}

Dictionary Dictionary::monomials(int dimension, int max_degree) {
  if (dimension < 1 || max_degree < 1) {
    throw ConfigurationError("monomials requires dimension >= 1 and max_degree >= 1");
  }
  std::vector<MultiIndex> all;
  all.reserve(monomial_count(dimension, max_degree));
  for (int deg = 0; deg <= max_degree; ++deg) {
    // Descending lexicographic enumeration of exponent vectors with total degree deg.
    MultiIndex e(static_cast<std::size_t>(dimension), 0);
    std::function<void(int, int)> fill = [&](int pos, int remaining) {
      if (pos == dimension - 1) {
        e[static_cast<std::size_t>(pos)] = remaining;
        all.push_back(e);
        return;
      }
      for (int p = remaining; p >= 0; --p) {
        e[static_cast<std::size_t>(pos)] = p;
        fill(pos + 1, remaining - p);
      }
    };
    fill(0, deg);
  }
  return Dictionary(dimension, std::move(all), true);
}

Dictionary Dictionary::from_exponents(int dimension, std::vector<MultiIndex> exponents) {
  return Dictionary(dimension, std::move(exponents), false);
}

int Dictionary::degree(std::size_t k) const { return total_degree(exponents_[k]); }

std::optional<std::size_t> Dictionary::find(const MultiIndex& e) const {
  const auto it = lookup_.find(e);
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> Dictionary::pair_index(int i, int j) const {
  MultiIndex e(static_cast<std::size_t>(dimension_), 0);
  e[static_cast<std::size_t>(i)] += 1;
  e[static_cast<std::size_t>(j)] += 1;
  return find(e);
}

void Dictionary::check_point(const Vector& x) const {
  if (x.size() != dimension_) throw ConfigurationError("point dimension does not match dictionary");
}

Matrix Dictionary::power_table(const Vector& x) const {
  Matrix powers(dimension_, max_degree_ + 1);
  for (int i = 0; i < dimension_; ++i) {
    powers(i, 0) = 1.0;
    for (int p = 1; p <= max_degree_; ++p) powers(i, p) = powers(i, p - 1) * x(i);
  }
  return powers;
}

Vector Dictionary::eval(const Vector& x) const {
  check_point(x);
  const Matrix powers = power_table(x);
  Vector out(static_cast<Eigen::Index>(size()));
  for (std::size_t k = 0; k < size(); ++k) {
    out(static_cast<Eigen::Index>(k)) = shifted_product(exponents_[k], powers);
  }
  return out;
}

Vector Dictionary::gradient(std::size_t k, const Vector& x) const {
  check_point(x);
  const Matrix powers = power_table(x);
  const auto& e = exponents_[k];
  Vector g = Vector::Zero(dimension_);
  for (int i = 0; i < dimension_; ++i) {
    const int ei = e[static_cast<std::size_t>(i)];
    if (ei > 0) g(i) = ei * shifted_product(e, powers, i);
  }
  return g;
}

Matrix Dictionary::hessian(std::size_t k, const Vector& x) const {
  check_point(x);
  const Matrix powers = power_table(x);
  const auto& e = exponents_[k];
  Matrix h = Matrix::Zero(dimension_, dimension_);
  for (int i = 0; i < dimension_; ++i) {
    const int ei = e[static_cast<std::size_t>(i)];
    if (ei == 0) continue;
    if (ei > 1) h(i, i) = ei * (ei - 1) * shifted_product(e, powers, i, i);
    for (int j = i + 1; j < dimension_; ++j) {
      const int ej = e[static_cast<std::size_t>(j)];
      if (ej == 0) continue;
      h(i, j) = h(j, i) = ei * ej * shifted_product(e, powers, i, j);
    }
  }
  return h;
}

double Dictionary::apply_generator(std::size_t k, const Vector& b, const Matrix& a, const Vector& x) const {
  check_point(x);
  if (b.size() != dimension_ || a.rows() != dimension_ || a.cols() != dimension_) {
    throw ConfigurationError("drift/diffusion dimension does not match dictionary");
  }
  check_symmetric(a);
  return b.dot(gradient(k, x)) + 0.5 * a.cwiseProduct(hessian(k, x)).sum();
}

Vector Dictionary::generator_column(const Vector& b, const Matrix& a, const Vector& x) const {
  check_point(x);
  if (b.size() != dimension_ || a.rows() != dimension_ || a.cols() != dimension_) {
    throw ConfigurationError("drift/diffusion dimension does not match dictionary");
  }
  check_symmetric(a);
  const Matrix powers = power_table(x);
  Vector out(static_cast<Eigen::Index>(size()));
  for (std::size_t k = 0; k < size(); ++k) {
    const auto& e = exponents_[k];
    double value = 0.0;
    for (int i = 0; i < dimension_; ++i) {
      const int ei = e[static_cast<std::size_t>(i)];
      if (ei == 0) continue;
      if (b(i) != 0.0) value += b(i) * ei * shifted_product(e, powers, i);
      if (ei > 1 && a(i, i) != 0.0) value += 0.5 * a(i, i) * ei * (ei - 1) * shifted_product(e, powers, i, i);
      for (int j = i + 1; j < dimension_; ++j) {
        const int ej = e[static_cast<std::size_t>(j)];
        if (ej == 0) continue;
        // Off-diagonal pairs appear twice in the double sum: 1/2 (a_ij + a_ji) = a_ij.
        const double aij = 0.5 * (a(i, j) + a(j, i));
        if (aij != 0.0) value += aij * ei * ej * shifted_product(e, powers, i, j);
      }
    }
    out(static_cast<Eigen::Index>(k)) = value;
  }
  return out;
}

nlohmann::json Dictionary::to_json() const {
  nlohmann::json j;
  j["dimension"] = dimension_;
  j["max_degree"] = max_degree_;
  if (complete_) {
    j["ordering"] = "degree-lex";
  } else {
    j["ordering"] = "explicit";
    j["exponents"] = exponents_;
  }
  return j;
}

Dictionary Dictionary::from_json(const nlohmann::json& j) {
  const int dimension = j.at("dimension").get<int>();
  const auto ordering = j.at("ordering").get<std::string>();
  if (ordering == "degree-lex") return monomials(dimension, j.at("max_degree").get<int>());
  if (ordering == "explicit") return from_exponents(dimension, j.at("exponents").get<std::vector<MultiIndex>>());
  throw ConfigurationError("unknown dictionary ordering '" + ordering + "'");
}

}  // namespace koopmoo
