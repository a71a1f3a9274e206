#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace koopmoo {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Exponent of each coordinate in a monomial basis function.
using MultiIndex = std::vector<int>;

/// A finite monomial basis psi_1..psi_l over R^D with exact derivatives.
///
/// Every dictionary contains the constant function and the D coordinate
/// observables x_1..x_D exactly once; the latter are what system identification
/// reads the drift from. Instances are immutable and safe to share across threads.
class Dictionary {
 public:
  // Empty placeholder; only useful as the target of an assignment.
  Dictionary() = default;

  /// All monomials of total degree <= max_degree, ordered by total degree and,
  /// within a degree, by descending lexicographic exponent vector
  /// (x1^2, x1 x2, x2^2, ...).
  static Dictionary monomials(int dimension, int max_degree);

  /// A custom basis given by explicit exponent vectors, in the given order.
  /// Throws ConfigurationError when an invariant is violated.
  static Dictionary from_exponents(int dimension, std::vector<MultiIndex> exponents);

  int dimension() const { return dimension_; }
  std::size_t size() const { return exponents_.size(); }
  int max_degree() const { return max_degree_; }
  // True for dictionaries built by monomials(); only these serialize to the compact spec.
  bool is_complete() const { return complete_; }

  const MultiIndex& exponents(std::size_t k) const { return exponents_[k]; }
  int degree(std::size_t k) const;
  std::optional<std::size_t> find(const MultiIndex& e) const;
  std::size_t constant_index() const { return constant_index_; }
  std::size_t coordinate_index(int i) const { return coordinate_index_[static_cast<std::size_t>(i)]; }
  bool is_coordinate(std::size_t k) const { return degree(k) == 1; }
  // Index of x_i x_j (x_i^2 when i == j), if present.
  std::optional<std::size_t> pair_index(int i, int j) const;

  Vector eval(const Vector& x) const;
  Vector gradient(std::size_t k, const Vector& x) const;
  Matrix hessian(std::size_t k, const Vector& x) const;

  /// (L psi_k)(x) = sum_i b_i d_i psi_k + 1/2 sum_ij a_ij d_ij psi_k.
  /// Throws ConfigurationError if a is not symmetric to within 1e-12.
  double apply_generator(std::size_t k, const Vector& b, const Matrix& a, const Vector& x) const;

  /// Generator action on every basis function at once; same contract as apply_generator.
  Vector generator_column(const Vector& b, const Matrix& a, const Vector& x) const;

  nlohmann::json to_json() const;
  static Dictionary from_json(const nlohmann::json& j);

  bool operator==(const Dictionary& other) const {
    return dimension_ == other.dimension_ && exponents_ == other.exponents_;
  }

 private:
  Dictionary(int dimension, std::vector<MultiIndex> exponents, bool complete);

  // powers(i, p) = x_i^p for p = 0..max_degree.
  Matrix power_table(const Vector& x) const;
  void check_point(const Vector& x) const;

  int dimension_ = 0;
  int max_degree_ = 0;
  bool complete_ = false;
  std::vector<MultiIndex> exponents_;
  std::map<MultiIndex, std::size_t> lookup_;
  std::size_t constant_index_ = 0;
  std::vector<std::size_t> coordinate_index_;
};

// Number of monomials in D variables with total degree <= max_degree: C(D + deg, deg).
std::size_t monomial_count(int dimension, int max_degree);

}  // namespace koopmoo
