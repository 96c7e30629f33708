#pragma once

#include <Eigen/Core>

namespace odf {

// Real spherical harmonics restricted to even degrees, which is the natural
// function space for antipodally symmetric ODFs.  Coefficients are ordered
// degree-major: l = 0, 2, ..., order, and m = -l..l inside each degree.
// Basis functions are orthonormal over the sphere.

inline constexpr int sh_max_order = 12;

// Number of even-degree coefficients up to `order` (order must be even).
// Equals (order + 1)(order + 2) / 2.
int sh_coeff_count(int order);

// Evaluates the basis row at a unit direction.  `out` receives
// sh_coeff_count(order) values.
void sh_basis_row(int order, const Eigen::Vector3d& s, double* out);

// Convenience wrapper returning a dense row.
Eigen::VectorXd sh_basis_vector(int order, const Eigen::Vector3d& s);

}  // namespace odf
