#include "odfreg/sh_basis.hpp"

#include <cmath>

#include "odfreg/errors.hpp"

namespace odf {

int sh_coeff_count(int order) {
  if (order < 0 || order > sh_max_order || order % 2 != 0)
    throw usage_error("sh order must be even and within [0, 12], got " +
                      std::to_string(order));
  return (order + 1) * (order + 2) / 2;
}

namespace {

// Fully normalized associated Legendre values P(l, m) for all l <= L,
// m <= l, matching std::sph_legendre (Condon-Shortley phase included):
// sph_legendre(l, m, theta) = Y_l^m(theta, 0).
// Uses the standard stable three-term recurrence in l with normalized
// coefficients; odd degrees are computed as intermediates only.
void legendre_table(int L, double ct, double st,
                    double p[sh_max_order + 1][sh_max_order + 1]) {
  p[0][0] = 0.28209479177387814;  // 1/sqrt(4*pi)
  for (int m = 1; m <= L; ++m)
    p[m][m] = -std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * st * p[m - 1][m - 1];
  for (int m = 0; m < L; ++m)
    p[m + 1][m] = std::sqrt(2.0 * m + 3.0) * ct * p[m][m];
  for (int m = 0; m <= L - 2; ++m) {
    for (int l = m + 2; l <= L; ++l) {
      const double a =
          std::sqrt((4.0 * l * l - 1.0) / (double(l) * l - double(m) * m));
      const double b = std::sqrt(((2.0 * l + 1.0) *
                                  ((l - 1.0) * (l - 1.0) - double(m) * m)) /
                                 ((2.0 * l - 3.0) *
                                  (double(l) * l - double(m) * m)));
      p[l][m] = a * ct * p[l - 1][m] - b * p[l - 2][m];
    }
  }
}

}  // namespace

void sh_basis_row(int order, const Eigen::Vector3d& s, double* out) {
  const int L = order;
  double ct = s.z();
  if (ct > 1.0) ct = 1.0;
  if (ct < -1.0) ct = -1.0;
  const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
  double cp = 1.0, sp = 0.0;
  if (st > 1e-290) {
    cp = s.x() / st;
    sp = s.y() / st;
  }

  double p[sh_max_order + 1][sh_max_order + 1];
  legendre_table(L, ct, st, p);

  // cos(m*phi), sin(m*phi) by angle-addition recurrence.
  double cm[sh_max_order + 1], sm[sh_max_order + 1];
  cm[0] = 1.0;
  sm[0] = 0.0;
  for (int m = 1; m <= L; ++m) {
    cm[m] = cm[m - 1] * cp - sm[m - 1] * sp;
    sm[m] = sm[m - 1] * cp + cm[m - 1] * sp;
  }

  const double sqrt2 = 1.4142135623730951;
  int idx = 0;
  for (int l = 0; l <= L; l += 2) {
    for (int m = -l; m < 0; ++m) out[idx++] = sqrt2 * p[l][-m] * sm[-m];
    out[idx++] = p[l][0];
    for (int m = 1; m <= l; ++m) out[idx++] = sqrt2 * p[l][m] * cm[m];
  }
}

Eigen::VectorXd sh_basis_vector(int order, const Eigen::Vector3d& s) {
  Eigen::VectorXd row(sh_coeff_count(order));
  sh_basis_row(order, s, row.data());
  return row;
}

}  // namespace odf
