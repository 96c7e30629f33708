#include "odfreg/reorient.hpp"

#include <cmath>
#include <string>

#include "odfreg/errors.hpp"
#include "odfreg/parallel.hpp"
#include "odfreg/sh_basis.hpp"

namespace odf {

namespace {

Eigen::Matrix3d checked_inverse(const Eigen::Matrix3d& a, double* det_out) {
  const double det = a.determinant();
  if (!(det > 1e-12))
    throw numeric_error(
        "reorientation needs an orientation-preserving invertible map, "
        "determinant is " + std::to_string(det));
  const Eigen::Matrix3d ainv = a.inverse();
  // Frobenius product bounds the spectral condition number from above.
  const double cond = a.norm() * ainv.norm() / 3.0;
  if (cond > 1e6)
    throw numeric_error("local map is near singular (condition estimate " +
                        std::to_string(cond) + ")");
  *det_out = det;
  return ainv;
}

}  // namespace

Eigen::Vector3d reorient_direction(const Eigen::Matrix3d& a,
                                   const Eigen::Vector3d& s) {
  double det = 0.0;
  const Eigen::Matrix3d ainv = checked_inverse(a, &det);
  const Eigen::Vector3d r = ainv * s;
  return r / r.norm();
}

Eigen::VectorXd affine_act(const SphereSampling& sp, const Eigen::Matrix3d& a,
                           Eigen::Ref<const Eigen::VectorXd> psi,
                           ReorientWork* work) {
  double det = 0.0;
  const Eigen::Matrix3d ainv = checked_inverse(a, &det);
  const double sqrt_det_ainv = 1.0 / std::sqrt(det);

  const int nd = sp.size();
  const Eigen::VectorXd coeffs = sp.sh_fit(psi);

  Eigen::Matrix3Xd shat(3, nd);
  Eigen::VectorXd n(nd), g(nd), f_pre(nd);
  for (int k = 0; k < nd; ++k) {
    const Eigen::Vector3d r = ainv * sp.directions().col(k);
    const double nk = r.norm();
    n[k] = nk;
    shat.col(k) = r / nk;
    g[k] = sh_eval(sp.sh_order(), coeffs, shat.col(k));
    f_pre[k] = sqrt_det_ainv * g[k] / (nk * std::sqrt(nk));
  }

  Eigen::VectorXd f = f_pre.cwiseMax(0.0);
  const double raw = sp.norm(f);
  if (raw < 1e-12)
    throw numeric_error("reoriented odf collapsed to zero");

  if (work) {
    work->coeffs = coeffs;
    work->shat = std::move(shat);
    work->n = std::move(n);
    work->g = std::move(g);
    work->gate = (f_pre.array() > 0.0).cast<double>();
    work->f_pre = std::move(f_pre);
    work->raw_norm = raw;
    work->sqrt_det_ainv = sqrt_det_ainv;
    work->ainv = ainv;
  }
  return f / raw;
}

ODFField affine_act_field(const ODFField& f, const Eigen::Matrix3d& a) {
  ODFField out;
  out.grid = f.grid;
  out.sampling = f.sampling;
  out.values.resize(f.values.rows(), f.values.cols());
  parallel_for(static_cast<int>(f.values.cols()), [&](int begin, int end) {
    for (int v = begin; v < end; ++v)
      out.values.col(v) = affine_act(*f.sampling, a, f.values.col(v));
  });
  return out;
}

double scaled_synth(int order, Eigen::Ref<const Eigen::VectorXd> coeffs,
                    const Eigen::Vector3d& x) {
  const double r = x.norm();
  return sh_eval(order, coeffs, x / r) / (r * std::sqrt(r));
}

Eigen::Vector3d scaled_synth_grad(int order,
                                  Eigen::Ref<const Eigen::VectorXd> coeffs,
                                  const Eigen::Vector3d& x, double h) {
  Eigen::Vector3d grad;
  for (int a = 0; a < 3; ++a) {
    Eigen::Vector3d lo = x, hi = x;
    lo[a] -= h;
    hi[a] += h;
    grad[a] =
        (scaled_synth(order, coeffs, hi) - scaled_synth(order, coeffs, lo)) /
        (2.0 * h);
  }
  return grad;
}

}  // namespace odf
