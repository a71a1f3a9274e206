#pragma once

#include <Eigen/Dense>

namespace koopmoo {

// Dense matrix exponential by scaling and squaring with diagonal Pade approximants of
// degree 3, 5, 7, 9 or 13, chosen from the 1-norm (Higham 2005 thresholds).
Eigen::MatrixXd expm(const Eigen::MatrixXd& a);

// Largest real part among the eigenvalues of a.
double spectral_abscissa(const Eigen::MatrixXd& a);

}  // namespace koopmoo
