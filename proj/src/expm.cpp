#include "koopmoo/expm.hpp"

#include <array>
#include <cmath>

#include "koopmoo/errors.hpp"

namespace koopmoo {

namespace {

using Matrix = Eigen::MatrixXd;

// b_j = (2m - j)! m! / ((2m)! j! (m - j)!), built by the ratio b_{j+1}/b_j.
std::array<double, 14> pade_coefficients(int m) {
  std::array<double, 14> b{};
  b[0] = 1.0;
  for (int j = 0; j < m; ++j) {
    b[static_cast<std::size_t>(j + 1)] =
        b[static_cast<std::size_t>(j)] * static_cast<double>(m - j) / (static_cast<double>(2 * m - j) * (j + 1));
  }
  return b;
}

Matrix solve_pade(const Matrix& u, const Matrix& v) { return (v - u).partialPivLu().solve(v + u); }

Matrix pade_low(const Matrix& a, int m) {
  const auto b = pade_coefficients(m);
  const Matrix id = Matrix::Identity(a.rows(), a.cols());
  const Matrix a2 = a * a;
  Matrix odd = b[1] * id;
  Matrix even = b[0] * id;
  Matrix power = id;
  for (int j = 2; j <= m; j += 2) {
    power = power * a2;
    even += b[static_cast<std::size_t>(j)] * power;
    if (j + 1 <= m) odd += b[static_cast<std::size_t>(j + 1)] * power;
  }
  return solve_pade(a * odd, even);
}

Matrix pade13(const Matrix& a) {
  const auto b = pade_coefficients(13);
  const Matrix id = Matrix::Identity(a.rows(), a.cols());
  const Matrix a2 = a * a;
  const Matrix a4 = a2 * a2;
  const Matrix a6 = a4 * a2;
  const Matrix u_inner = a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id;
  const Matrix u = a * u_inner;
  const Matrix v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;
  return solve_pade(u, v);
}

}  // namespace

Matrix expm(const Matrix& a) {
  if (a.rows() != a.cols()) throw ConfigurationError("expm requires a square matrix");
  if (a.size() == 0) return a;
  constexpr std::array<double, 4> theta_low{1.495585217958292e-2, 2.539398330063230e-1, 9.504178996162932e-1,
                                            2.097847961257068e0};
  constexpr std::array<int, 4> degree_low{3, 5, 7, 9};
  constexpr double theta13 = 5.371920351148152e0;

  const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
  if (!std::isfinite(norm1)) throw ConfigurationError("expm: matrix has non-finite entries");
  for (std::size_t i = 0; i < theta_low.size(); ++i) {
    if (norm1 <= theta_low[i]) return pade_low(a, degree_low[i]);
  }
  int squarings = 0;
  if (norm1 > theta13) squarings = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
  Matrix r = pade13(a / std::ldexp(1.0, squarings));
  for (int s = 0; s < squarings; ++s) r = r * r;
  return r;
}

double spectral_abscissa(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(a, false);
  return es.eigenvalues().real().maxCoeff();
}

}  // namespace koopmoo
