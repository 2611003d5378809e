#pragma once

#include <Eigen/Dense>

#include <complex>
#include <vector>

namespace rsstab::linalg {

// e^A by scaling and squaring with the degree-13 diagonal Padé approximant
// (Higham 2005).
Eigen::MatrixXd expm(const Eigen::MatrixXd& a);

// ∫_0^t e^{sA} ds, read off the top-right block of exp([[A, I], [0, 0]] t).
Eigen::MatrixXd expm_integral(const Eigen::MatrixXd& a, double t);

// Eigenvalues of a general real square matrix: balancing, Householder
// reduction to upper Hessenberg form, then Francis double-shift QR.
// Throws EigensolveFailure after 100·n iterations without deflation.
std::vector<std::complex<double>> eigenvalues(const Eigen::MatrixXd& a);

// Reduces `a` in place to upper Hessenberg form by Householder reflections.
void to_hessenberg(Eigen::MatrixXd& a);

// Maximum absolute row sum.
double max_row_sum_norm(const Eigen::MatrixXd& a);

}  // namespace rsstab::linalg
