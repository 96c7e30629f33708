#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "odfreg/sphere_sampling.hpp"

namespace odf {

// Regular grid in voxel-index coordinates. Voxel centers sit at integer
// positions 0..dims[a]-1; physical size enters only through voxel_size
// (mm per index step). Linear order is x fastest, then y, then z.
struct GridGeometry {
  std::array<int, 3> dims{1, 1, 1};
  Eigen::Vector3d voxel_size{1.0, 1.0, 1.0};

  int nvox() const { return dims[0] * dims[1] * dims[2]; }
  double voxel_volume() const { return voxel_size.prod(); }

  // Size-1 axes carry no derivative information and stay rigid.
  bool axis_frozen(int a) const { return dims[a] < 2; }

  int linear(int i, int j, int k) const {
    return (k * dims[1] + j) * dims[0] + i;
  }
  std::array<int, 3> unravel(int v) const {
    const int i = v % dims[0];
    const int j = (v / dims[0]) % dims[1];
    const int k = v / (dims[0] * dims[1]);
    return {i, j, k};
  }

  // nvox x 3 voxel centers in index coordinates, grid linear order.
  Eigen::MatrixX3d positions() const;

  bool same_shape(const GridGeometry& o) const {
    return dims == o.dims && (voxel_size - o.voxel_size).norm() < 1e-12;
  }

  // Closed index box; frozen axes accept any coordinate.
  bool contains(const Eigen::Vector3d& p) const {
    for (int a = 0; a < 3; ++a)
      if (!axis_frozen(a) && (p[a] < 0.0 || p[a] > double(dims[a] - 1)))
        return false;
    return true;
  }
};

// Per-voxel Jacobians d(phi_c)/d(x_a) of a map sampled on the grid, in index
// coordinates (unit spacing). Central differences in the interior, one-sided
// on the faces; frozen axes get the identity column.
std::vector<Eigen::Matrix3d> grid_jacobians(const GridGeometry& g,
                                            const Eigen::MatrixX3d& phi);

// Exact transpose of grid_jacobians as a linear map. Given per-voxel
// sensitivities W_v = dF/dA_v, accumulates dF/dphi. Built from the same
// stencil rows as the forward pass so the pairing
//   sum_v <W_v, A_v> == sum_x <adjoint(W)_x, phi_x>
// holds to round-off.
Eigen::MatrixX3d grid_jacobians_adjoint(const GridGeometry& g,
                                        const std::vector<Eigen::Matrix3d>& W);

// Index-space Jacobian to physical space: S A S^{-1} with S = diag(voxel
// size). Shares the determinant with A.
Eigen::Matrix3d physical_jacobian(const Eigen::Matrix3d& a_index,
                                  const Eigen::Vector3d& voxel_size);

// A sqrt-ODF volume: one unit-norm sampled function per voxel.
struct ODFField {
  GridGeometry grid;
  SamplingPtr sampling;
  Eigen::MatrixXd values;  // n_dirs x nvox, column v = voxel v

  Eigen::VectorXd voxel(int v) const { return values.col(v); }
};

ODFField uniform_field(const GridGeometry& grid, SamplingPtr sampling);

// Checks column norms (1e-6) and nonnegativity (-1e-9 floor); throws
// data_error with the offending voxel index.
void validate_field(const ODFField& f);

}  // namespace odf
