#pragma once

#include <Eigen/Dense>

#include "odfreg/field.hpp"

namespace odf {

// Spatial interpolation of sqrt-ODF volumes. Values live on the unit Hilbert
// sphere, so trilinear blending happens in a tangent space: the base point is
// the nearest voxel, neighbours are pulled back with the log map, averaged
// with trilinear weights, and pushed forward with the exp map. Queries
// outside the grid clamp to the boundary.
Eigen::VectorXd interp_odf(const ODFField& f, const Eigen::Vector3d& p);

// Gradient of <cot, interp_odf(f, p)> with respect to p, with cot held
// fixed (plain coefficient pairing, no quadrature weights). Exact derivative
// of the interpolant above away from cell boundaries and the nearest-voxel
// switch; clamped queries have zero derivative along the clamped axis.
Eigen::Vector3d interp_backprop(const ODFField& f, const Eigen::Vector3d& p,
                                Eigen::Ref<const Eigen::VectorXd> cot);

}  // namespace odf
