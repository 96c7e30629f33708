#include "odfreg/phantom.hpp"

#include <cmath>
#include <set>

#include "odfreg/errors.hpp"
#include "odfreg/reorient.hpp"
#include "odfreg/sqrt_odf.hpp"

namespace odf {

Eigen::VectorXd make_watson(const SphereSampling& sp, const Eigen::Vector3d& mu,
                            double kappa) {
  if (!(kappa >= 0.0)) throw usage_error("watson concentration must be >= 0");
  const Eigen::Vector3d axis = mu.normalized();
  Eigen::VectorXd v(sp.size());
  for (int k = 0; k < sp.size(); ++k) {
    const double t = axis.dot(sp.directions().col(k));
    v[k] = std::exp(0.5 * kappa * t * t);  // sqrt of the density
  }
  return v / sp.norm(v);
}

Eigen::VectorXd make_single_fiber(const SphereSampling& sp, double theta,
                                  double kappa) {
  return make_watson(sp, {std::cos(theta), std::sin(theta), 0.0}, kappa);
}

Eigen::VectorXd make_crossing(const SphereSampling& sp, double theta1,
                              double theta2, double kappa, double mix) {
  // closed interval: the endpoints degenerate to a single fiber
  if (!(mix >= 0.0 && mix <= 1.0))
    throw usage_error("crossing mix weight must be in [0,1]");
  const Eigen::VectorXd a = make_watson(
      sp, {std::cos(theta1), std::sin(theta1), 0.0}, kappa);
  const Eigen::VectorXd b = make_watson(
      sp, {std::cos(theta2), std::sin(theta2), 0.0}, kappa);
  // mixture happens in density space, then back to the sqrt representation
  Eigen::VectorXd v =
      (mix * a.array().square() + (1.0 - mix) * b.array().square()).sqrt();
  return v / sp.norm(v);
}

PhantomSpec parse_phantom_spec(const Config& cfg) {
  static const std::set<std::string> known = {
      "kind",      "nx",         "ny",       "nz",         "voxel_x",
      "voxel_y",   "voxel_z",    "n_dirs",   "sh_order",   "radius",
      "radius_y",  "radius_z",   "theta_deg", "kappa",     "mix",
      "rotate_deg", "theta_z_deg", "rho_y",  "sigma_y"};
  for (const auto& [key, value] : cfg.entries())
    if (!known.count(key))
      throw usage_error("unknown phantom spec key '" + key + "'");

  PhantomSpec s;
  s.kind = cfg.get_string("kind");
  static const std::set<std::string> kinds = {
      "single-fiber", "crossing",    "circle-shape",
      "ellipse-shape", "rotated-odf", "affine-family"};
  if (!kinds.count(s.kind))
    throw usage_error("unknown phantom kind '" + s.kind + "'");
  s.dims = {cfg.get_int("nx", 32), cfg.get_int("ny", 32), cfg.get_int("nz", 1)};
  s.voxel_size = {cfg.get_double("voxel_x", 1.0), cfg.get_double("voxel_y", 1.0),
                  cfg.get_double("voxel_z", 1.0)};
  s.n_dirs = cfg.get_int("n_dirs", 162);
  s.sh_order = cfg.get_int("sh_order", 6);
  s.radius = cfg.get_double("radius", 10.0);
  s.radius_y = cfg.get_double("radius_y", -1.0);
  s.radius_z = cfg.get_double("radius_z", -1.0);
  const double deg = M_PI / 180.0;
  s.theta = cfg.get_double("theta_deg", 0.0) * deg;
  s.kappa = cfg.get_double("kappa", 8.0);
  s.mix = cfg.get_double("mix", 0.5);
  s.rotate = cfg.get_double("rotate_deg", 45.0) * deg;
  s.theta_z = cfg.get_double("theta_z_deg", 0.0) * deg;
  s.rho_y = cfg.get_double("rho_y", 0.0);
  s.sigma_y = cfg.get_double("sigma_y", 1.0);
  for (int a = 0; a < 3; ++a)
    if (s.dims[a] <= 0) throw usage_error("phantom dims must be positive");
  if (!(s.voxel_size.minCoeff() > 0.0))
    throw usage_error("phantom voxel size must be positive");
  if (!(s.kappa > 0.0)) throw usage_error("phantom kappa must be positive");
  return s;
}

namespace {

struct SupportShape {
  Eigen::Vector3d center;
  Eigen::Vector3d radii;
  bool everything = false;

  bool inside(int i, int j, int k, const std::array<int, 3>& dims) const {
    if (everything) return true;
    double q = 0.0;
    const double p[3] = {double(i), double(j), double(k)};
    for (int a = 0; a < 3; ++a) {
      if (dims[a] < 2) continue;  // flat axis carries no extent
      const double d = (p[a] - center[a]) / radii[a];
      q += d * d;
    }
    return q <= 1.0;
  }
};

SupportShape support_shape(const PhantomSpec& s) {
  SupportShape sh;
  sh.everything = s.kind == "single-fiber";
  sh.center = {0.5 * (s.dims[0] - 1), 0.5 * (s.dims[1] - 1),
               0.5 * (s.dims[2] - 1)};
  const double ry = s.radius_y < 0.0 ? s.radius : s.radius_y;
  const double rz = s.radius_z < 0.0 ? s.radius : s.radius_z;
  sh.radii = {s.radius, ry, rz};
  if (sh.everything) return sh;
  for (int a = 0; a < 3; ++a) {
    if (s.dims[a] < 2) continue;
    if (!(sh.radii[a] > 0.0))
      throw usage_error("phantom support radius must be positive");
    if (sh.radii[a] > sh.center[a])
      throw usage_error("phantom support exceeds the grid along axis " +
                        std::to_string(a));
  }
  return sh;
}

Eigen::VectorXd inside_odf(const PhantomSpec& s, const SphereSampling& sp) {
  if (s.kind == "crossing")
    return make_crossing(sp, s.theta, s.theta + M_PI / 2.0, s.kappa, s.mix);
  if (s.kind == "rotated-odf")
    return make_single_fiber(sp, s.theta + s.rotate, s.kappa);
  if (s.kind == "affine-family") {
    const double c = std::cos(s.theta_z), sn = std::sin(s.theta_z);
    Eigen::Matrix3d rot, shear, scale;
    rot << c, -sn, 0, sn, c, 0, 0, 0, 1;
    shear << 1, 0, 0, -s.rho_y, 1, 0, 0, 0, 1;
    scale << 1, 0, 0, 0, s.sigma_y, 0, 0, 0, 1;
    return affine_act(sp, rot * shear * scale,
                      sh_project(sp, make_single_fiber(sp, s.theta, s.kappa)));
  }
  // single-fiber, circle-shape, ellipse-shape
  return make_single_fiber(sp, s.theta, s.kappa);
}

}  // namespace

ODFField make_phantom(const PhantomSpec& spec) {
  const SamplingPtr sp = SphereSampling::icosphere(spec.n_dirs, spec.sh_order);
  const SupportShape shape = support_shape(spec);
  // stored band-limited so reorientation's fit/synthesize round trip is exact
  const Eigen::VectorXd fg = sh_project(*sp, inside_odf(spec, *sp));
  const Eigen::VectorXd bg = uniform_odf(sp).values;

  ODFField f;
  f.grid.dims = spec.dims;
  f.grid.voxel_size = spec.voxel_size;
  f.sampling = sp;
  f.values.resize(sp->size(), f.grid.nvox());
  int v = 0;
  for (int k = 0; k < spec.dims[2]; ++k)
    for (int j = 0; j < spec.dims[1]; ++j)
      for (int i = 0; i < spec.dims[0]; ++i, ++v)
        f.values.col(v) = shape.inside(i, j, k, spec.dims) ? fg : bg;
  return f;
}

std::vector<std::uint8_t> phantom_support(const PhantomSpec& spec) {
  const SupportShape shape = support_shape(spec);
  std::vector<std::uint8_t> mask(std::size_t(spec.dims[0]) * spec.dims[1] *
                                 spec.dims[2]);
  int v = 0;
  for (int k = 0; k < spec.dims[2]; ++k)
    for (int j = 0; j < spec.dims[1]; ++j)
      for (int i = 0; i < spec.dims[0]; ++i, ++v)
        mask[v] = shape.inside(i, j, k, spec.dims) ? 1 : 0;
  return mask;
}

}  // namespace odf
