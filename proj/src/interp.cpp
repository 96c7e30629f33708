#include "odfreg/interp.hpp"

#include <algorithm>
#include <cmath>

#include "odfreg/sqrt_odf.hpp"

namespace odf {

namespace {

struct AxisWeight {
  int i0 = 0;      // low cell corner
  double t = 0.0;  // fractional position inside the cell
  double dt = 0.0; // d t / d p, zero when clamped or frozen
};

AxisWeight axis_weight(int n, double p) {
  if (n < 2) return {};
  const double c = std::clamp(p, 0.0, double(n - 1));
  const int i0 = std::min(static_cast<int>(std::floor(c)), n - 2);
  const bool inside = p > 0.0 && p < double(n - 1);
  return {i0, c - i0, inside ? 1.0 : 0.0};
}

struct CellStencil {
  AxisWeight ax[3];
  int base_voxel = 0;              // nearest voxel, log/exp base point
  int voxels[8];                   // corner linear indices
  double w[8];                     // trilinear weights
  double dw[8][3];                 // d w / d p per axis
  int count = 0;
};

CellStencil cell_stencil(const GridGeometry& g, const Eigen::Vector3d& p) {
  CellStencil s;
  int near[3];
  for (int a = 0; a < 3; ++a) {
    s.ax[a] = axis_weight(g.dims[a], p[a]);
    near[a] = s.ax[a].i0 + (s.ax[a].t > 0.5 ? 1 : 0);
  }
  s.base_voxel = g.linear(near[0], near[1], near[2]);
  for (int corner = 0; corner < 8; ++corner) {
    double w = 1.0;
    double dw[3];
    int idx[3];
    bool valid = true;
    for (int a = 0; a < 3; ++a) {
      const bool hi = corner & (1 << a);
      if (hi && g.dims[a] < 2) { valid = false; break; }
      idx[a] = s.ax[a].i0 + (hi ? 1 : 0);
      dw[a] = (hi ? 1.0 : -1.0) * s.ax[a].dt;
      w *= hi ? s.ax[a].t : 1.0 - s.ax[a].t;
    }
    if (!valid) continue;
    const int v = s.voxels[s.count] = g.linear(idx[0], idx[1], idx[2]);
    s.w[s.count] = w;
    for (int a = 0; a < 3; ++a) {
      // product-rule factor: replace this axis's weight by its derivative
      double d = dw[a];
      for (int b = 0; b < 3; ++b) {
        if (b == a) continue;
        const bool hi = corner & (1 << b);
        d *= hi ? s.ax[b].t : 1.0 - s.ax[b].t;
      }
      s.dw[s.count][a] = d;
    }
    (void)v;
    ++s.count;
  }
  return s;
}

}  // namespace

Eigen::VectorXd interp_odf(const ODFField& f, const Eigen::Vector3d& p) {
  const CellStencil s = cell_stencil(f.grid, p);
  const Eigen::VectorXd base = f.values.col(s.base_voxel);
  Eigen::VectorXd xi = Eigen::VectorXd::Zero(base.size());
  for (int j = 0; j < s.count; ++j) {
    if (s.w[j] == 0.0) continue;
    if (s.voxels[j] == s.base_voxel)
      continue;  // log at the base point is zero
    xi += s.w[j] * log_map(*f.sampling, base, f.values.col(s.voxels[j]));
  }
  return exp_map(*f.sampling, base, xi);
}

Eigen::Vector3d interp_backprop(const ODFField& f, const Eigen::Vector3d& p,
                                Eigen::Ref<const Eigen::VectorXd> cot) {
  const CellStencil s = cell_stencil(f.grid, p);
  const SphereSampling& sp = *f.sampling;
  const Eigen::VectorXd base = f.values.col(s.base_voxel);
  const int nd = static_cast<int>(base.size());

  Eigen::MatrixXd logs(nd, s.count);
  Eigen::VectorXd xi = Eigen::VectorXd::Zero(nd);
  for (int j = 0; j < s.count; ++j) {
    if (s.voxels[j] == s.base_voxel)
      logs.col(j).setZero();
    else
      logs.col(j) = log_map(sp, base, f.values.col(s.voxels[j]));
    xi += s.w[j] * logs.col(j);
  }

  const double theta = sp.norm(xi);
  Eigen::Vector3d grad = Eigen::Vector3d::Zero();
  for (int a = 0; a < 3; ++a) {
    Eigen::VectorXd dxi = Eigen::VectorXd::Zero(nd);
    for (int j = 0; j < s.count; ++j)
      if (s.dw[j][a] != 0.0) dxi += s.dw[j][a] * logs.col(j);

    Eigen::VectorXd dq;
    if (theta < 1e-6) {
      dq = dxi - sp.dot(xi, dxi) * base;
    } else {
      const Eigen::VectorXd u = xi / theta;
      const double dtheta = sp.dot(u, dxi);
      dq = (-std::sin(theta) * dtheta) * base +
           (std::cos(theta) * dtheta) * u +
           (std::sin(theta) / theta) * (dxi - dtheta * u);
    }
    grad[a] = cot.dot(dq);
  }
  return grad;
}

}  // namespace odf
