#include "odfreg/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include "odfreg/errors.hpp"
#include "odfreg/kernel_engine.hpp"
#include "odfreg/matching.hpp"

namespace odf {

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0)) throw usage_error(std::string("config: ") + name +
                                    " must be positive");
}

Eigen::MatrixX3d gather_rows(const Eigen::MatrixX3d& all,
                             const std::vector<int>& rows) {
  Eigen::MatrixX3d out(static_cast<int>(rows.size()), 3);
  for (std::size_t r = 0; r < rows.size(); ++r)
    out.row(static_cast<int>(r)) = all.row(rows[r]);
  return out;
}

using Slices = std::vector<Eigen::MatrixX3d>;

double dot_slices(const Slices& a, const Slices& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k)
    s += (a[k].array() * b[k].array()).sum();
  return s;
}

struct GradientPack {
  Slices coord;    // dJ/dalpha^k on the support rows
  Slices precond;  // kernel-metric form 2 alpha^k + etabar^{k+1}|_S
  double norm = 0.0;
};

GradientPack compute_gradient(const MomentumBundle& m, const Trajectory& traj,
                              const ODFField& temp, const ODFField& targ,
                              double lambda, MatchingStats* stats) {
  const Eigen::MatrixX3d seed =
      lambda * matching_gradient(temp, targ, traj.points.back(), stats);
  const Slices etabar = adjoint_backward(m, traj, seed);
  GradientPack g;
  g.coord = momentum_gradient(m, traj, etabar);
  const int steps = static_cast<int>(m.alpha.size());
  g.precond.resize(steps);
  double sq = 0.0;
  for (int k = 0; k < steps; ++k) {
    g.precond[k] = 2.0 * m.alpha[k];
    for (std::size_t r = 0; r < m.support.size(); ++r)
      g.precond[k].row(static_cast<int>(r)) += etabar[k + 1].row(m.support[r]);
    sq += g.coord[k].squaredNorm();
  }
  g.norm = std::sqrt(sq);
  return g;
}

// Largest velocity magnitude the direction induces anywhere along the
// current trajectory; eps/speed then caps node displacement by eps.
double direction_speed(const MomentumBundle& m, const Trajectory& traj,
                       const Slices& dir) {
  const KernelEngine engine(m.sigma);
  double speed = 0.0;
  for (std::size_t k = 0; k < dir.size(); ++k) {
    const Eigen::MatrixXd vel = engine.moments(
        traj.points[k], gather_rows(traj.points[k], m.support), dir[k]);
    speed = std::max(speed, vel.rowwise().norm().maxCoeff());
  }
  return speed;
}

}  // namespace

void validate_config(const RegistrationConfig& cfg) {
  require_positive(cfg.sigma_v, "sigma_v");
  if (cfg.lambda < 0.0) throw usage_error("config: lambda must be >= 0");
  if (cfg.timesteps < 2) throw usage_error("config: timesteps must be >= 2");
  if (cfg.max_iterations < 0)
    throw usage_error("config: max_iterations must be >= 0");
  require_positive(cfg.gradient_tolerance, "gradient_tolerance");
  require_positive(cfg.ls_max_step, "ls_max_step");
  require_positive(cfg.ls_tolerance, "ls_tolerance");
  if (cfg.n_dirs < 1 || cfg.sh_order < 0 || cfg.sh_order % 2 != 0)
    throw usage_error("config: sampling wants n_dirs >= 1 and even sh_order");
  require_positive(cfg.foreground_tol, "foreground_tol");
}

JBreakdown evaluate_J(const MomentumBundle& m, const ODFField& temp,
                      const ODFField& targ, const RegistrationConfig& cfg) {
  validate_config(cfg);
  const Trajectory traj = flow_forward(m);
  JBreakdown out;
  out.energy = path_energy(m, traj);
  out.matching = cfg.lambda * matching_term(temp, targ, traj.points.back());
  out.total = out.energy + out.matching;
  return out;
}

LineSearchResult line_search_golden(const std::function<double(double)>& j,
                                    double j0, double hi, double tol) {
  if (!(hi > 0.0) || !(tol > 0.0))
    throw usage_error("line search: bracket and tolerance must be positive");
  constexpr double kInvPhi = 0.6180339887498949;

  LineSearchResult best;
  best.eps = 0.0;
  best.value = j0;
  bool any_finite = false;
  const auto consider = [&](double e, double f) {
    if (std::isfinite(f)) any_finite = true;
    if (f < best.value) {
      best.value = f;
      best.eps = e;
    }
  };

  double a = 0.0, b = hi;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = j(c), fd = j(d);
  consider(c, fc);
  consider(d, fd);
  while (b - a > tol * hi) {
    if (fc < fd) {  // ties move toward 0, where j0 is known finite
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = j(c);
      consider(c, fc);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = j(d);
      consider(d, fd);
    }
  }
  best.stalled = !any_finite;
  return best;
}

RegistrationResult register_fields(const ODFField& temp, const ODFField& targ,
                                   const RegistrationConfig& cfg) {
  validate_config(cfg);

  std::vector<int> support =
      foreground_support(temp, targ, cfg.foreground_tol);
  // an all-uniform pair has nothing to move; a token zero-momentum row
  // keeps the bundle well formed and the flow stays the identity
  if (support.empty()) support.push_back(0);

  MomentumBundle m;
  m.grid = temp.grid;
  m.sigma = cfg.sigma_v;
  m.support = std::move(support);
  m.alpha.assign(cfg.timesteps,
                 Eigen::MatrixX3d::Zero(static_cast<int>(m.support.size()), 3));

  RegistrationResult res;
  Trajectory traj = flow_forward(m);
  MatchingStats stats;
  GradientPack g = compute_gradient(m, traj, temp, targ, cfg.lambda, &stats);

  JBreakdown cur;
  cur.energy = path_energy(m, traj);
  cur.matching = cfg.lambda * stats.energy;
  cur.total = cur.energy + cur.matching;
  res.trace.push_back(cur);

  const double g0 = g.norm;
  const double gtol = cfg.gradient_tolerance * g0;
  constexpr double kFlatTol = 1e-6;
  constexpr int kFlatRuns = 3;

  std::string reason;
  if (g0 < 1e-14) reason = "gradient_tolerance";

  Slices dir = g.precond;
  bool steepest = true;
  if (dot_slices(dir, g.coord) <= 0.0) {
    dir = g.coord;  // preconditioner not descent-compatible here
  }

  int flat = 0;
  for (int iter = 1; reason.empty(); ++iter) {
    if (iter > cfg.max_iterations) {
      reason = "max_iterations";
      break;
    }

    const auto probe = [&](double eps) -> double {
      MomentumBundle mt = m;
      for (std::size_t k = 0; k < mt.alpha.size(); ++k)
        mt.alpha[k] -= eps * dir[k];
      try {
        const Trajectory tt = flow_forward(mt);
        return path_energy(mt, tt) +
               cfg.lambda * matching_term(temp, targ, tt.points.back());
      } catch (const numeric_error&) {
        return std::numeric_limits<double>::infinity();
      }
    };

    LineSearchResult ls{};
    for (int attempt = 0;; ++attempt) {
      const double speed = direction_speed(m, traj, dir);
      if (speed > 0.0)
        ls = line_search_golden(probe, cur.total, cfg.ls_max_step / speed,
                                cfg.ls_tolerance);
      if (ls.eps > 0.0 || steepest || attempt > 0) break;
      dir = g.precond;  // conjugate direction failed; retry steepest
      steepest = true;
      if (dot_slices(dir, g.coord) <= 0.0) dir = g.coord;
    }
    if (ls.eps <= 0.0) {
      // a stall with a rounding-level gradient is plain convergence
      reason = g.norm < 1e-6 * std::max(1.0, std::abs(cur.total))
                   ? "gradient_tolerance"
                   : "line_search_stalled";
      break;
    }

    for (std::size_t k = 0; k < m.alpha.size(); ++k)
      m.alpha[k] -= ls.eps * dir[k];
    traj = flow_forward(m);

    const GradientPack gn =
        compute_gradient(m, traj, temp, targ, cfg.lambda, &stats);
    const double prev = cur.total;
    cur.energy = path_energy(m, traj);
    cur.matching = cfg.lambda * stats.energy;
    cur.total = cur.energy + cur.matching;
    res.trace.push_back(cur);
    res.iterations = iter;

    if (gn.norm < gtol) {
      g = gn;
      reason = "gradient_tolerance";
      break;
    }
    const double rel =
        (prev - cur.total) / std::max(std::abs(prev), 1e-30);
    flat = rel < kFlatTol ? flat + 1 : 0;
    if (flat >= kFlatRuns) {
      g = gn;
      reason = "flat_objective";
      break;
    }

    // Polak-Ribiere with the kernel metric as preconditioner; restart to
    // steepest whenever the mixed direction loses descent
    double beta = 0.0;
    const double denom = dot_slices(g.precond, g.coord);
    if (denom > 0.0) {
      double num = dot_slices(gn.precond, gn.coord) -
                   dot_slices(gn.precond, g.coord);
      beta = std::max(0.0, num / denom);
    }
    Slices next(dir.size());
    for (std::size_t k = 0; k < dir.size(); ++k)
      next[k] = gn.precond[k] + beta * dir[k];
    g = gn;
    if (beta > 0.0 && dot_slices(next, g.coord) > 0.0) {
      dir = std::move(next);
      steepest = false;
    } else {
      dir = g.precond;
      steepest = true;
      if (dot_slices(dir, g.coord) <= 0.0) dir = g.coord;
    }
  }

  res.termination = reason;
  res.momentum = std::move(m);
  res.trajectory = std::move(traj);

  InverseDiagnostics idiag;
  make_deformation(res.momentum, res.trajectory, &idiag);
  res.diagnostics.min_det = stats.min_det;
  res.diagnostics.inverse_residual = idiag.max_round_trip;
  res.diagnostics.max_renorm_drift = stats.max_renorm_drift;
  return res;
}

}  // namespace odf
