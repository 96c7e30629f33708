#include "odfreg/field.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "odfreg/errors.hpp"
#include "odfreg/parallel.hpp"
#include "odfreg/sqrt_odf.hpp"

namespace odf {

Eigen::MatrixX3d GridGeometry::positions() const {
  Eigen::MatrixX3d p(nvox(), 3);
  int v = 0;
  for (int k = 0; k < dims[2]; ++k)
    for (int j = 0; j < dims[1]; ++j)
      for (int i = 0; i < dims[0]; ++i, ++v)
        p.row(v) << double(i), double(j), double(k);
  return p;
}

namespace {

// One finite-difference row per line position: list of (offset, coefficient)
// pairs along the axis. Unit index spacing.
using StencilRow = std::array<std::pair<int, double>, 2>;

StencilRow stencil_row(int n, int i) {
  if (i == 0) return {{{0, -1.0}, {1, 1.0}}};
  if (i == n - 1) return {{{n - 2, -1.0}, {n - 1, 1.0}}};
  return {{{i - 1, -0.5}, {i + 1, 0.5}}};
}

// Transposed rows: contributions of line position x gathered from the rows
// that reference it. Derived from stencil_row so the transpose is exact.
std::vector<std::array<std::pair<int, double>, 3>> transpose_rows(int n) {
  std::vector<std::array<std::pair<int, double>, 3>> cols(
      n, {{{-1, 0.0}, {-1, 0.0}, {-1, 0.0}}});
  std::vector<int> fill(n, 0);
  for (int i = 0; i < n; ++i)
    for (const auto& [x, c] : stencil_row(n, i)) cols[x][fill[x]++] = {i, c};
  return cols;
}

}  // namespace

std::vector<Eigen::Matrix3d> grid_jacobians(const GridGeometry& g,
                                            const Eigen::MatrixX3d& phi) {
  if (phi.rows() != g.nvox())
    throw usage_error("field has " + std::to_string(phi.rows()) +
                      " rows, grid has " + std::to_string(g.nvox()) +
                      " voxels");
  std::vector<Eigen::Matrix3d> jac(g.nvox());
  const std::array<int, 3> stride = {1, g.dims[0], g.dims[0] * g.dims[1]};
  parallel_for(g.nvox(), [&](int begin, int end) {
    for (int v = begin; v < end; ++v) {
      const auto idx = g.unravel(v);
      Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
      for (int ax = 0; ax < 3; ++ax) {
        if (g.axis_frozen(ax)) {
          a(ax, ax) = 1.0;
          continue;
        }
        for (const auto& [x, c] : stencil_row(g.dims[ax], idx[ax]))
          a.col(ax) += c * phi.row(v + (x - idx[ax]) * stride[ax]).transpose();
      }
      jac[v] = a;
    }
  });
  return jac;
}

Eigen::MatrixX3d grid_jacobians_adjoint(const GridGeometry& g,
                                        const std::vector<Eigen::Matrix3d>& W) {
  if (static_cast<int>(W.size()) != g.nvox())
    throw usage_error("sensitivity count does not match grid");
  std::array<std::vector<std::array<std::pair<int, double>, 3>>, 3> cols;
  for (int ax = 0; ax < 3; ++ax)
    if (!g.axis_frozen(ax)) cols[ax] = transpose_rows(g.dims[ax]);

  Eigen::MatrixX3d out(g.nvox(), 3);
  const std::array<int, 3> stride = {1, g.dims[0], g.dims[0] * g.dims[1]};
  parallel_for(g.nvox(), [&](int begin, int end) {
    for (int v = begin; v < end; ++v) {
      const auto idx = g.unravel(v);
      Eigen::Vector3d acc = Eigen::Vector3d::Zero();
      for (int ax = 0; ax < 3; ++ax) {
        if (g.axis_frozen(ax)) continue;
        for (const auto& [i, c] : cols[ax][idx[ax]]) {
          if (i < 0) continue;
          acc += c * W[v + (i - idx[ax]) * stride[ax]].col(ax);
        }
      }
      out.row(v) = acc.transpose();
    }
  });
  return out;
}

Eigen::Matrix3d physical_jacobian(const Eigen::Matrix3d& a_index,
                                  const Eigen::Vector3d& voxel_size) {
  return voxel_size.asDiagonal() * a_index *
         voxel_size.cwiseInverse().asDiagonal();
}

ODFField uniform_field(const GridGeometry& grid, SamplingPtr sampling) {
  ODFField f;
  f.grid = grid;
  f.sampling = std::move(sampling);
  const Eigen::VectorXd u = uniform_odf(f.sampling).values;
  f.values = u.replicate(1, grid.nvox());
  return f;
}

void validate_field(const ODFField& f) {
  if (!f.sampling) throw data_error("field has no sampling");
  if (f.values.rows() != f.sampling->size() ||
      f.values.cols() != f.grid.nvox())
    throw data_error("field value matrix does not match grid and sampling");
  for (int v = 0; v < f.values.cols(); ++v) {
    if (f.values.col(v).minCoeff() < -1e-9)
      throw data_error("negative sqrt odf value at voxel " +
                       std::to_string(v));
    const double nrm = f.sampling->norm(f.values.col(v));
    if (std::abs(nrm - 1.0) > 1e-6)
      throw data_error("sqrt odf at voxel " + std::to_string(v) +
                       " has quadrature norm " + std::to_string(nrm));
  }
}

}  // namespace odf
