#include "odfreg/deformation.hpp"

#include <string>
#include <vector>

#include "odfreg/errors.hpp"
#include "odfreg/interp.hpp"
#include "odfreg/kernel_engine.hpp"
#include "odfreg/parallel.hpp"
#include "odfreg/reorient.hpp"
#include "odfreg/sqrt_odf.hpp"

namespace odf {

namespace {

Eigen::MatrixX3d gather_rows(const Eigen::MatrixX3d& all,
                             const std::vector<int>& idx) {
  Eigen::MatrixX3d out(static_cast<Eigen::Index>(idx.size()), 3);
  for (Eigen::Index r = 0; r < out.rows(); ++r) out.row(r) = all.row(idx[r]);
  return out;
}

void check_momentum(const MomentumBundle& m) {
  if (m.alpha.empty()) throw usage_error("momentum field has no timesteps");
  if (!(m.sigma > 0.0)) throw usage_error("momentum kernel sigma must be positive");
  const Eigen::Index ns = static_cast<Eigen::Index>(m.support.size());
  for (const auto& a : m.alpha)
    if (a.rows() != ns)
      throw usage_error("momentum slice rows do not match the support size");
  const int nvox = m.grid.nvox();
  for (int v : m.support)
    if (v < 0 || v >= nvox)
      throw usage_error("momentum support index outside the grid");
}

void check_trajectory(const MomentumBundle& m, const Trajectory& traj) {
  if (traj.points.size() != m.alpha.size() + 1)
    throw usage_error("trajectory timestep count does not match the momentum");
  for (const auto& p : traj.points)
    if (p.rows() != m.grid.nvox())
      throw usage_error("trajectory slice rows do not match the grid");
}

// Payload [A | P kron A]: column 3 + 3d + c carries P(:,c) * A(:,d), the
// source-position moments the kernel-gradient contraction needs.
Eigen::MatrixXd pack_moment_payload(const Eigen::MatrixX3d& p,
                                    const Eigen::MatrixX3d& a) {
  Eigen::MatrixXd out(p.rows(), 12);
  out.leftCols<3>() = a;
  for (int d = 0; d < 3; ++d)
    for (int c = 0; c < 3; ++c)
      out.col(3 + 3 * d + c) = p.col(c).cwiseProduct(a.col(d));
  return out;
}

// Contraction Σ_j grad_1 K(P_l, P_j) <a_l, payload_j> given the 12-column
// moments M of [payload | P kron payload] at the targets:
//   -1/σ² [ P_l Σ_d a_ld M_l[d]  -  Σ_d a_ld M_l(3+3d..3+3d+2) ].
Eigen::MatrixX3d kernel_grad_contract(const Eigen::MatrixX3d& p,
                                      const Eigen::MatrixX3d& a,
                                      const Eigen::MatrixXd& m,
                                      double sigma) {
  const Eigen::VectorXd s =
      (a.array() * m.leftCols<3>().array()).rowwise().sum();
  Eigen::MatrixX3d out = p.array().colwise() * s.array();
  for (int d = 0; d < 3; ++d)
    out -= (m.middleCols(3 + 3 * d, 3).array().colwise() * a.col(d).array())
               .matrix();
  return out * (-1.0 / (sigma * sigma));
}

}  // namespace

std::vector<int> foreground_support(const ODFField& a, const ODFField& b,
                                    double tol) {
  require_compatible(*a.sampling, *b.sampling, "foreground_support");
  if (!a.grid.same_shape(b.grid))
    throw usage_error("foreground_support: fields live on different grids");
  const Eigen::VectorXd uni = uniform_odf(a.sampling).values;
  const int nvox = a.grid.nvox();
  std::vector<int> out;
  for (int v = 0; v < nvox; ++v) {
    if (geodesic_distance(*a.sampling, a.values.col(v), uni) > tol ||
        geodesic_distance(*b.sampling, b.values.col(v), uni) > tol)
      out.push_back(v);
  }
  return out;
}

Trajectory flow_forward(const MomentumBundle& m) {
  check_momentum(m);
  const int steps = static_cast<int>(m.alpha.size());
  KernelEngine engine(m.sigma);

  Trajectory traj;
  traj.dt = 1.0 / steps;
  traj.points.reserve(steps + 1);
  traj.points.push_back(m.grid.positions());
  for (int k = 0; k < steps; ++k) {
    const Eigen::MatrixX3d& p = traj.points.back();
    const Eigen::MatrixX3d vel =
        engine.moments(p, gather_rows(p, m.support), m.alpha[k]);
    traj.points.push_back(p + traj.dt * vel);
  }
  return traj;
}

double path_energy(const MomentumBundle& m, const Trajectory& traj) {
  check_momentum(m);
  check_trajectory(m, traj);
  KernelEngine engine(m.sigma);
  double e = 0.0;
  for (size_t k = 0; k < m.alpha.size(); ++k) {
    const Eigen::MatrixX3d ps = gather_rows(traj.points[k], m.support);
    e += (m.alpha[k].array() * engine.moments(ps, ps, m.alpha[k]).array())
             .sum();
  }
  return traj.dt * e;
}

std::vector<Eigen::MatrixX3d> adjoint_backward(const MomentumBundle& m,
                                               const Trajectory& traj,
                                               const Eigen::MatrixX3d& seed) {
  check_momentum(m);
  check_trajectory(m, traj);
  if (seed.rows() != m.grid.nvox())
    throw usage_error("adjoint seed rows do not match the grid");

  const int steps = static_cast<int>(m.alpha.size());
  KernelEngine engine(m.sigma);
  std::vector<Eigen::MatrixX3d> etabar(steps + 1);
  etabar[steps] = seed;

  for (int k = steps - 1; k >= 0; --k) {
    const Eigen::MatrixX3d& p = traj.points[k];
    const Eigen::MatrixX3d ps = gather_rows(p, m.support);
    const Eigen::MatrixX3d& alpha = m.alpha[k];

    // c_i = etabar^{k+1}_i + alpha_i on support rows: the combined cotangent
    // of the velocity target role and the path-energy quadratic form.
    Eigen::MatrixX3d c = etabar[k + 1];
    for (size_t r = 0; r < m.support.size(); ++r)
      c.row(m.support[r]) += alpha.row(static_cast<Eigen::Index>(r));

    // l as kernel target: sources are the support momenta.
    const Eigen::MatrixXd mom_alpha =
        engine.moments(p, ps, pack_moment_payload(ps, alpha));
    Eigen::MatrixX3d bump = kernel_grad_contract(p, c, mom_alpha, m.sigma);

    // l as kernel source (support rows only): targets run over all nodes.
    const Eigen::MatrixXd mom_c =
        engine.moments(ps, p, pack_moment_payload(p, c));
    const Eigen::MatrixX3d bump_s =
        kernel_grad_contract(ps, alpha, mom_c, m.sigma);
    for (size_t r = 0; r < m.support.size(); ++r)
      bump.row(m.support[r]) += bump_s.row(static_cast<Eigen::Index>(r));

    etabar[k] = etabar[k + 1] + traj.dt * bump;
  }
  return etabar;
}

std::vector<Eigen::MatrixX3d> momentum_gradient(
    const MomentumBundle& m, const Trajectory& traj,
    const std::vector<Eigen::MatrixX3d>& etabar) {
  check_momentum(m);
  check_trajectory(m, traj);
  if (etabar.size() != m.alpha.size() + 1)
    throw usage_error("adjoint slice count does not match the momentum");

  KernelEngine engine(m.sigma);
  std::vector<Eigen::MatrixX3d> grad(m.alpha.size());
  for (size_t k = 0; k < m.alpha.size(); ++k) {
    const Eigen::MatrixX3d& p = traj.points[k];
    const Eigen::MatrixX3d ps = gather_rows(p, m.support);
    grad[k] = traj.dt * (2.0 * engine.moments(ps, ps, m.alpha[k]) +
                         engine.moments(ps, p, etabar[k + 1]));
  }
  return grad;
}

Eigen::MatrixX3d flow_backward(const MomentumBundle& m, const Trajectory& traj,
                               const Eigen::MatrixX3d& start) {
  check_momentum(m);
  check_trajectory(m, traj);
  KernelEngine engine(m.sigma);
  Eigen::MatrixX3d x = start;
  for (int k = static_cast<int>(m.alpha.size()) - 1; k >= 0; --k) {
    const Eigen::MatrixX3d ps = gather_rows(traj.points[k], m.support);
    x -= traj.dt * engine.moments(x, ps, m.alpha[k]);
  }
  return x;
}

DeformationBundle make_deformation(const MomentumBundle& m,
                                   const Trajectory& traj,
                                   InverseDiagnostics* diag) {
  check_momentum(m);
  check_trajectory(m, traj);
  const Eigen::MatrixX3d nodes = m.grid.positions();

  DeformationBundle out;
  out.grid = m.grid;
  out.phi = traj.points.back();
  out.phi_inv = flow_backward(m, traj, nodes);
  out.jac = grid_jacobians(m.grid, out.phi);

  const double residual =
      (flow_backward(m, traj, out.phi) - nodes).rowwise().norm().maxCoeff();
  if (diag) {
    diag->max_round_trip = residual;
    diag->warned = residual > 0.5;
  }
  if (residual > 2.0)
    throw numeric_error("inverse flow round trip off by " +
                        std::to_string(residual) +
                        " voxels; deformation too strong for the step count");
  return out;
}

ODFField group_action(const DeformationBundle& bundle, const ODFField& temp) {
  if (!bundle.grid.same_shape(temp.grid))
    throw usage_error("group_action: deformation and field grids differ");
  const GridGeometry& g = bundle.grid;
  const std::vector<Eigen::Matrix3d> jac_inv =
      grid_jacobians(g, bundle.phi_inv);

  ODFField out;
  out.grid = temp.grid;
  out.sampling = temp.sampling;
  out.values.resize(temp.values.rows(), temp.values.cols());

  parallel_for(g.nvox(), [&](std::int64_t lo, std::int64_t hi) {
    ReorientWork work;
    for (std::int64_t v = lo; v < hi; ++v) {
      const double det = jac_inv[v].determinant();
      if (det <= 1e-12) {
        const auto [i, j, k] = g.unravel(static_cast<int>(v));
        throw numeric_error("group_action: pullback Jacobian not invertible "
                            "at voxel (" + std::to_string(i) + ", " +
                            std::to_string(j) + ", " + std::to_string(k) +
                            ")");
      }
      const Eigen::VectorXd psi =
          interp_odf(temp, bundle.phi_inv.row(v).transpose());
      const Eigen::Matrix3d a_phys =
          physical_jacobian(jac_inv[v].inverse(), g.voxel_size);
      // Exactly rigid grids (identity, node-permuting rotations) keep the
      // interpolated values untouched instead of round-tripping through the
      // harmonic fit.
      if ((a_phys - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <
          1e-14) {
        out.values.col(v) = psi;
      } else {
        out.values.col(v) = affine_act(*temp.sampling, a_phys, psi, &work);
      }
    }
  });
  return out;
}

}  // namespace odf
