#include "odfreg/sphere_sampling.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <vector>

#include "odfreg/errors.hpp"
#include "odfreg/sh_basis.hpp"

namespace odf {

namespace {

struct Mesh {
  std::vector<Eigen::Vector3d> verts;
  std::vector<std::array<int, 3>> faces;
};

Mesh icosahedron() {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  Mesh m;
  const double v[12][3] = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0},
                           {0, -1, t}, {0, 1, t},  {0, -1, -t}, {0, 1, -t},
                           {t, 0, -1}, {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : v)
    m.verts.push_back(Eigen::Vector3d(p[0], p[1], p[2]).normalized());
  m.faces = {{0, 11, 5},  {0, 5, 1},   {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
             {1, 5, 9},   {5, 11, 4},  {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
             {3, 9, 4},   {3, 4, 2},   {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
             {4, 9, 5},   {2, 4, 11},  {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  return m;
}

Mesh subdivide(const Mesh& in) {
  Mesh out;
  out.verts = in.verts;
  std::map<std::pair<int, int>, int> midpoint;
  auto mid = [&](int a, int b) {
    auto key = std::minmax(a, b);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    int id = static_cast<int>(out.verts.size());
    out.verts.push_back((in.verts[a] + in.verts[b]).normalized());
    midpoint.emplace(key, id);
    return id;
  };
  for (const auto& f : in.faces) {
    const int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
    out.faces.push_back({f[0], ab, ca});
    out.faces.push_back({f[1], bc, ab});
    out.faces.push_back({f[2], ca, bc});
    out.faces.push_back({ab, bc, ca});
  }
  return out;
}

// Spherical triangle area from vertex positions (l'Huilier).
double spherical_area(const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                      const Eigen::Vector3d& c) {
  auto side = [](const Eigen::Vector3d& u, const Eigen::Vector3d& v) {
    return 2.0 * std::asin(std::min(1.0, 0.5 * (u - v).norm()));
  };
  const double sa = side(b, c), sb = side(c, a), sc = side(a, b);
  const double s = 0.5 * (sa + sb + sc);
  const double t = std::tan(0.5 * s) * std::tan(0.5 * (s - sa)) *
                   std::tan(0.5 * (s - sb)) * std::tan(0.5 * (s - sc));
  return 4.0 * std::atan(std::sqrt(std::max(0.0, t)));
}

// Exact Voronoi cell areas for a spherical Delaunay mesh: inside each face
// the cell of vertex `a` is the geodesic quadrilateral (a, mid_ab, o,
// mid_ca) with o the face circumcenter.  Icosphere faces keep their
// circumcenters interior, so the quadrilaterals partition the face and the
// weights sum to the full sphere area.
Eigen::VectorXd voronoi_weights(const Mesh& m) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(m.verts.size());
  for (const auto& f : m.faces) {
    const Eigen::Vector3d &a = m.verts[f[0]], &b = m.verts[f[1]],
                          &c = m.verts[f[2]];
    Eigen::Vector3d o = (b - a).cross(c - a);
    o.normalize();
    if (o.dot(a + b + c) < 0.0) o = -o;
    const Eigen::Vector3d mab = (a + b).normalized();
    const Eigen::Vector3d mbc = (b + c).normalized();
    const Eigen::Vector3d mca = (c + a).normalized();
    w[f[0]] += spherical_area(a, mab, o) + spherical_area(a, o, mca);
    w[f[1]] += spherical_area(b, mbc, o) + spherical_area(b, o, mab);
    w[f[2]] += spherical_area(c, mca, o) + spherical_area(c, o, mbc);
  }
  return w;
}

}  // namespace

std::shared_ptr<const SphereSampling> SphereSampling::icosphere(int n_dirs,
                                                                int sh_order) {
  int level = -1;
  for (int l = 0, n = 12; l <= 4; ++l, n = (n - 2) * 4 + 2)
    if (n == n_dirs) level = l;
  if (level < 0)
    throw usage_error(
        "sampling size must be an icosphere count (12, 42, 162, 642, 2562), "
        "got " + std::to_string(n_dirs));
  const int nc = sh_coeff_count(sh_order);
  // Icosphere directions come in antipodal pairs, and every even-degree
  // harmonic takes equal values on a pair, so only n/2 samples are
  // independent for this basis. n >= nc alone leaves the fit rank-deficient.
  if (n_dirs < 2 * nc)
    throw usage_error("sampling with " + std::to_string(n_dirs) +
                      " directions (" + std::to_string(n_dirs / 2) +
                      " antipodal axes) cannot fit sh order " +
                      std::to_string(sh_order) + " (" + std::to_string(nc) +
                      " coefficients); use a larger sampling or lower order");

  Mesh mesh = icosahedron();
  for (int l = 0; l < level; ++l) mesh = subdivide(mesh);

  auto s = std::shared_ptr<SphereSampling>(new SphereSampling());
  const int n = static_cast<int>(mesh.verts.size());
  s->dirs_.resize(3, n);
  for (int i = 0; i < n; ++i) s->dirs_.col(i) = mesh.verts[i];
  s->weights_ = voronoi_weights(mesh);
  s->sh_order_ = sh_order;
  s->build_basis();
  return s;
}

std::shared_ptr<const SphereSampling> SphereSampling::from_samples(
    Eigen::Matrix3Xd dirs, Eigen::VectorXd weights, int sh_order) {
  const int n = static_cast<int>(dirs.cols());
  if (weights.size() != n || n == 0)
    throw data_error("sampling table is empty or direction/weight counts "
                     "disagree");
  for (int i = 0; i < n; ++i)
    if (std::abs(dirs.col(i).norm() - 1.0) > 1e-9)
      throw data_error("sampling direction " + std::to_string(i) +
                       " is not unit length");
  if (weights.minCoeff() <= 0.0)
    throw data_error("sampling weights must be positive");
  if (std::abs(weights.sum() - 4.0 * M_PI) > 1e-6)
    throw data_error("sampling weights sum to " +
                     std::to_string(weights.sum()) + ", expected 4*pi");
  sh_coeff_count(sh_order);  // validates the order itself
  auto s = std::shared_ptr<SphereSampling>(new SphereSampling());
  s->dirs_ = std::move(dirs);
  s->weights_ = std::move(weights);
  s->sh_order_ = sh_order;
  s->build_basis();
  return s;
}

void SphereSampling::build_basis() {
  const int n = size();
  const int nc = sh_coeff_count(sh_order_);
  basis_.resize(n, nc);
  double row[91];  // coeff count at the max supported order
  for (int i = 0; i < n; ++i) {
    sh_basis_row(sh_order_, dirs_.col(i), row);
    basis_.row(i) = Eigen::Map<const Eigen::VectorXd>(row, nc);
  }

  // Prefactor the weighted normal equations into an explicit fit operator.
  const Eigen::MatrixXd bw = basis_.transpose() * weights_.asDiagonal();
  const Eigen::MatrixXd gram = bw * basis_;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  const double dmax = ldlt.vectorD().maxCoeff();
  const double dmin = ldlt.vectorD().minCoeff();
  if (ldlt.info() != Eigen::Success || dmin <= dmax * 1e-12)
    throw numeric_error("sh basis is rank-deficient on this sampling");
  fit_solver_ = ldlt.solve(bw);
}

double SphereSampling::norm(Eigen::Ref<const Eigen::VectorXd> a) const {
  return std::sqrt(std::max(0.0, dot(a, a)));
}

Eigen::VectorXd SphereSampling::sh_fit(Eigen::Ref<const Eigen::VectorXd> values,
                                       double* residual) const {
  if (values.size() != size())
    throw usage_error("sh_fit: value count does not match sampling");
  Eigen::VectorXd coeffs = fit_solver_ * values;
  if (residual) {
    const Eigen::VectorXd r = values - basis_ * coeffs;
    *residual = std::sqrt((weights_.array() * r.array().square()).sum() /
                          (4.0 * M_PI));
  }
  return coeffs;
}

bool SphereSampling::compatible_with(const SphereSampling& other) const {
  if (this == &other) return true;
  if (size() != other.size() || sh_order_ != other.sh_order_) return false;
  return (dirs_ - other.dirs_).cwiseAbs().maxCoeff() < 1e-12;
}

double sh_eval(int order, Eigen::Ref<const Eigen::VectorXd> coeffs,
               const Eigen::Vector3d& s) {
  double row[91];  // coeff count at the max supported order
  sh_basis_row(order, s, row);
  const int nc = static_cast<int>(coeffs.size());
  double acc = 0.0;
  for (int i = 0; i < nc; ++i) acc += row[i] * coeffs[i];
  return acc;
}

void require_compatible(const SphereSampling& a, const SphereSampling& b,
                        const char* where) {
  if (!a.compatible_with(b))
    throw usage_error(std::string(where) +
                      ": operands use incompatible sphere samplings");
}

}  // namespace odf
