#include "odfreg/matching.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "odfreg/errors.hpp"
#include "odfreg/interp.hpp"
#include "odfreg/parallel.hpp"
#include "odfreg/reorient.hpp"
#include "odfreg/sqrt_odf.hpp"

namespace odf {

namespace {

void check_pair(const ODFField& temp, const ODFField& targ) {
  require_compatible(*temp.sampling, *targ.sampling, "matching");
  if (!temp.grid.same_shape(targ.grid))
    throw usage_error("matching: fields live on different grids");
}

double clamp_rho(double r) { return std::min(1.0, std::max(-1.0, r)); }

// d(theta^2)/drho with theta = arccos(rho); series once 1-rho underflows
// the chart-center guard.
double d_dsq_drho(double rho, double theta) {
  const double eps = 1.0 - rho;
  if (eps < 1e-9) return -2.0 * (1.0 + eps / 3.0);
  return -2.0 * theta / std::sqrt(1.0 - rho * rho);
}

[[noreturn]] void throw_fold(const GridGeometry& g, int v, double det) {
  const auto [i, j, k] = g.unravel(v);
  throw numeric_error("matching: folded deformation at voxel (" +
                      std::to_string(i) + ", " + std::to_string(j) + ", " +
                      std::to_string(k) + "), det = " + std::to_string(det));
}

double assemble(const ODFField& temp, const ODFField& targ,
                const Eigen::MatrixX3d& phi, Eigen::MatrixX3d* grad,
                MatchingStats* stats) {
  check_pair(temp, targ);
  const GridGeometry& g = temp.grid;
  const SphereSampling& sp = *temp.sampling;
  const int nvox = g.nvox();
  if (phi.rows() != nvox)
    throw usage_error("matching: phi rows do not match the grid");

  const std::vector<Eigen::Matrix3d> jacs = grid_jacobians(g, phi);
  const double vol = g.voxel_volume();
  const Eigen::VectorXd& w = sp.weights();
  const Eigen::Vector3d& vs = g.voxel_size;

  Eigen::VectorXd energy = Eigen::VectorXd::Zero(nvox);
  Eigen::VectorXd dets(nvox);
  Eigen::VectorXd drift = Eigen::VectorXd::Zero(nvox);
  std::vector<std::uint8_t> gated(nvox, 0);
  std::vector<Eigen::Matrix3d> wmat;
  if (grad) {
    grad->setZero(nvox, 3);
    wmat.assign(nvox, Eigen::Matrix3d::Zero());
  }

  parallel_for(nvox, [&](std::int64_t lo, std::int64_t hi) {
    ReorientWork work;
    for (std::int64_t v = lo; v < hi; ++v) {
      const Eigen::Matrix3d& a_idx = jacs[v];
      const double det = a_idx.determinant();
      dets[v] = det;
      if (det <= 0.0) throw_fold(g, static_cast<int>(v), det);

      const Eigen::Vector3d p = phi.row(v).transpose();
      if (!targ.grid.contains(p)) {
        gated[v] = 1;
        continue;
      }

      const Eigen::Matrix3d a_phys = physical_jacobian(a_idx, vs);
      const Eigen::VectorXd f = affine_act(sp, a_phys, temp.values.col(v), &work);
      drift[v] = std::abs(work.raw_norm - 1.0);
      const Eigen::VectorXd tval = interp_odf(targ, p);
      const double rho = clamp_rho(sp.dot(f, tval));
      const double theta = std::acos(rho);
      energy[v] = det * theta * theta * vol;
      if (!grad) continue;

      const double svol = det * vol * d_dsq_drho(rho, theta);

      // target-motion response: rho follows the interpolated sample
      const Eigen::VectorXd cot_interp = svol * w.cwiseProduct(f);
      grad->row(v) = interp_backprop(targ, p, cot_interp).transpose();

      // cotangent against the pre-clamp values: positivity gate, then the
      // renormalization projection
      const Eigen::ArrayXd cot =
          work.gate * (w.array() * (tval.array() - rho * f.array())) /
          work.raw_norm;
      const Eigen::Matrix3d ainv_t = work.ainv.transpose();
      Eigen::Matrix3d gp = Eigen::Matrix3d::Zero();
      double trace_coef = 0.0;
      for (int k = 0; k < sp.size(); ++k) {
        if (cot[k] == 0.0) continue;
        const Eigen::Vector3d x = work.shat.col(k) * work.n[k];
        const Eigen::Vector3d u =
            -work.sqrt_det_ainv *
            (ainv_t * scaled_synth_grad(sp.sh_order(), work.coeffs, x));
        gp.noalias() += (svol * cot[k]) * (u * x.transpose());
        trace_coef += cot[k] * work.f_pre[k];
      }
      gp -= (0.5 * svol * trace_coef) * ainv_t;

      // back to index coordinates, plus the volume-element response
      Eigen::Matrix3d gi;
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) gi(r, c) = gp(r, c) * vs[r] / vs[c];
      gi.noalias() +=
          (theta * theta * vol * det) * a_idx.inverse().transpose();
      wmat[v] = gi;
    }
  });

  if (grad) *grad += grid_jacobians_adjoint(g, wmat);

  // fixed-order reductions, independent of the thread split
  double e = 0.0;
  int ngated = 0;
  double min_det = std::numeric_limits<double>::infinity();
  double max_drift = 0.0;
  for (int v = 0; v < nvox; ++v) {
    e += energy[v];
    ngated += gated[v];
    min_det = std::min(min_det, dets[v]);
    max_drift = std::max(max_drift, drift[v]);
  }
  if (stats) {
    stats->energy = e;
    stats->gated = ngated;
    stats->min_det = min_det;
    stats->max_renorm_drift = max_drift;
  }
  return e;
}

}  // namespace

double matching_term(const ODFField& temp, const ODFField& targ,
                     const Eigen::MatrixX3d& phi, MatchingStats* stats) {
  return assemble(temp, targ, phi, nullptr, stats);
}

double matching_energy(const ODFField& temp, const ODFField& targ,
                       const Eigen::MatrixX3d& phi, double lambda) {
  if (!(lambda >= 0.0)) throw usage_error("matching weight must be non-negative");
  return lambda * matching_term(temp, targ, phi);
}

Eigen::MatrixX3d matching_gradient(const ODFField& temp, const ODFField& targ,
                                   const Eigen::MatrixX3d& phi,
                                   MatchingStats* stats) {
  Eigen::MatrixX3d grad;
  assemble(temp, targ, phi, &grad, stats);
  return grad;
}

Eigen::MatrixX3d term_a_gradient(const ODFField& temp, const ODFField& targ,
                                 const Eigen::MatrixX3d& phi) {
  check_pair(temp, targ);
  const GridGeometry& g = temp.grid;
  const SphereSampling& sp = *temp.sampling;
  const int nvox = g.nvox();
  if (phi.rows() != nvox)
    throw usage_error("matching: phi rows do not match the grid");

  const std::vector<Eigen::Matrix3d> jacs = grid_jacobians(g, phi);
  const Eigen::Vector3d& vs = g.voxel_size;

  // reorient in place first; the spatial log gradient reads this field
  ODFField reor;
  reor.grid = g;
  reor.sampling = temp.sampling;
  reor.values.resize(temp.values.rows(), nvox);
  parallel_for(nvox, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t v = lo; v < hi; ++v) {
      const double det = jacs[v].determinant();
      if (det <= 0.0) throw_fold(g, static_cast<int>(v), det);
      reor.values.col(v) =
          affine_act(sp, physical_jacobian(jacs[v], vs), temp.values.col(v));
    }
  });

  Eigen::MatrixX3d grad = Eigen::MatrixX3d::Zero(nvox, 3);
  parallel_for(nvox, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t v = lo; v < hi; ++v) {
      const Eigen::Vector3d p = phi.row(v).transpose();
      if (!targ.grid.contains(p)) continue;
      const Eigen::VectorXd l =
          log_map(sp, reor.values.col(v), interp_odf(targ, p));
      const Eigen::MatrixXd slg =
          spatial_log_gradient(reor, static_cast<int>(v));
      Eigen::Vector3d b;
      for (int i = 0; i < 3; ++i) b[i] = sp.dot(l, slg.col(i));
      grad.row(v) = (2.0 * jacs[v].determinant()) *
                    (jacs[v].inverse().transpose() * b).transpose();
    }
  });
  return grad;
}

Eigen::MatrixX3d term_b_gradient(const ODFField& temp, const ODFField& targ,
                                 const Eigen::MatrixX3d& phi) {
  check_pair(temp, targ);
  const GridGeometry& g = temp.grid;
  const SphereSampling& sp = *temp.sampling;
  const int nvox = g.nvox();
  if (phi.rows() != nvox)
    throw usage_error("matching: phi rows do not match the grid");

  const std::vector<Eigen::Matrix3d> jacs = grid_jacobians(g, phi);
  const Eigen::Vector3d& vs = g.voxel_size;

  // c[v].col(i) = <log_{F(v)} psi_targ(phi(v)), L^i> as a 3-vector;
  // gated voxels contribute zero, matching the energy gate.
  std::vector<Eigen::Matrix3d> c(nvox, Eigen::Matrix3d::Zero());
  parallel_for(nvox, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t v = lo; v < hi; ++v) {
      const double det = jacs[v].determinant();
      if (det <= 0.0) throw_fold(g, static_cast<int>(v), det);
      const Eigen::Vector3d p = phi.row(v).transpose();
      if (!targ.grid.contains(p)) continue;
      const Eigen::Matrix3d a_phys = physical_jacobian(jacs[v], vs);
      const Eigen::VectorXd f = affine_act(sp, a_phys, temp.values.col(v));
      const Eigen::VectorXd l = log_map(sp, f, interp_odf(targ, p));
      const std::vector<Eigen::Matrix3d> lm =
          l_matrix(sp, a_phys, temp.values.col(v));
      Eigen::Matrix3d acc = Eigen::Matrix3d::Zero();
      for (int k = 0; k < sp.size(); ++k)
        acc += (sp.weights()[k] * l[k]) * lm[k];
      c[v] = acc;
    }
  });

  // termB_i = div c^i by central differences, one-sided on faces
  Eigen::MatrixX3d grad = Eigen::MatrixX3d::Zero(nvox, 3);
  parallel_for(nvox, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t v = lo; v < hi; ++v) {
      const auto [i, j, k] = g.unravel(static_cast<int>(v));
      const int idx[3] = {i, j, k};
      Eigen::Vector3d div = Eigen::Vector3d::Zero();
      for (int a = 0; a < 3; ++a) {
        if (g.axis_frozen(a)) continue;
        const auto at = [&](int d) {
          int cc[3] = {i, j, k};
          cc[a] += d;
          return g.linear(cc[0], cc[1], cc[2]);
        };
        const bool lo_face = idx[a] == 0;
        const bool hi_face = idx[a] == g.dims[a] - 1;
        Eigen::Vector3d diff;
        if (lo_face)
          diff = (c[at(1)].row(a) - c[v].row(a)).transpose();
        else if (hi_face)
          diff = (c[v].row(a) - c[at(-1)].row(a)).transpose();
        else
          diff = 0.5 * (c[at(1)].row(a) - c[at(-1)].row(a)).transpose();
        div += diff / vs[a];
      }
      grad.row(v) = (2.0 * jacs[v].determinant()) * div.transpose();
    }
  });
  return grad;
}

Eigen::MatrixXd spatial_log_gradient(const ODFField& f, int voxel) {
  const GridGeometry& g = f.grid;
  if (voxel < 0 || voxel >= g.nvox())
    throw usage_error("spatial_log_gradient: voxel outside the grid");
  const auto [i, j, k] = g.unravel(voxel);
  const int idx[3] = {i, j, k};
  const SphereSampling& sp = *f.sampling;

  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(sp.size(), 3);
  const Eigen::VectorXd base = f.values.col(voxel);
  for (int a = 0; a < 3; ++a) {
    if (g.axis_frozen(a)) continue;
    const auto neighbour = [&](int d) {
      int c[3] = {i, j, k};
      c[a] += d;
      return f.values.col(g.linear(c[0], c[1], c[2]));
    };
    if (idx[a] == 0)
      out.col(a) = log_map(sp, base, neighbour(+1));
    else if (idx[a] == g.dims[a] - 1)
      out.col(a) = -log_map(sp, base, neighbour(-1));
    else
      out.col(a) = 0.5 * (log_map(sp, base, neighbour(+1)) -
                          log_map(sp, base, neighbour(-1)));
  }
  return out;
}

Eigen::Vector3d u_vector(const SphereSampling& sp, const Eigen::Matrix3d& a,
                         Eigen::Ref<const Eigen::VectorXd> psi,
                         const Eigen::Vector3d& s) {
  const double det = a.determinant();
  if (det <= 1e-12)
    throw numeric_error("u_vector: map must be orientation preserving");
  const Eigen::Matrix3d ainv = a.inverse();
  const Eigen::Vector3d x = ainv * s;
  if (x.norm() < 1e-8)
    throw numeric_error("u_vector: degenerate pullback direction");
  const Eigen::VectorXd coeffs = sp.sh_fit(psi);
  return -(1.0 / std::sqrt(det)) * ainv.transpose() *
         scaled_synth_grad(sp.sh_order(), coeffs, x);
}

std::vector<Eigen::Matrix3d> l_matrix(const SphereSampling& sp,
                                      const Eigen::Matrix3d& a,
                                      Eigen::Ref<const Eigen::VectorXd> psi) {
  ReorientWork work;
  affine_act(sp, a, psi, &work);
  const Eigen::Matrix3d ainv_t = work.ainv.transpose();

  std::vector<Eigen::Matrix3d> out(sp.size());
  for (int k = 0; k < sp.size(); ++k) {
    const Eigen::Vector3d x = work.shat.col(k) * work.n[k];
    const Eigen::Vector3d u =
        -work.sqrt_det_ainv *
        (ainv_t * scaled_synth_grad(sp.sh_order(), work.coeffs, x));
    Eigen::Matrix3d l;
    for (int i = 0; i < 3; ++i)
      l.col(i) = u[i] * x - 0.5 * work.f_pre[k] * work.ainv.col(i);
    out[k] = l;
  }
  return out;
}

}  // namespace odf
