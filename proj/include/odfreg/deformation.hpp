#pragma once

#include <vector>

#include <Eigen/Dense>

#include "odfreg/field.hpp"
#include "odfreg/io.hpp"

namespace odf {

// Grid-node positions along the flow: points[k] has one row per voxel,
// points[0] is the undeformed grid, points[T] the endpoint phi_1.
// Coordinates are voxel indices throughout.
struct Trajectory {
  double dt = 0.0;
  std::vector<Eigen::MatrixX3d> points;
};

// Voxels carrying Dirac momentum: those farther than tol from the uniform
// ODF in at least one of the two fields. Voxels uniform in both are skipped.
std::vector<int> foreground_support(const ODFField& a, const ODFField& b,
                                    double tol = 1e-3);

// Forward Euler flow of every grid node: P^{k+1}_i = P^k_i + dt Σ_j K(P^k_i,
// P^k_j) alpha^k_j with sources on the support rows. dt = 1/T.
Trajectory flow_forward(const MomentumBundle& m);

// dt Σ_k alpha^k · K(P^k_S) alpha^k over the support rows of the trajectory.
double path_energy(const MomentumBundle& m, const Trajectory& traj);

// Reverse sweep of the chain rule through the Euler recursion. seed pairs
// with perturbations of the endpoint P^T (matching gradient, lambda already
// applied). Returns etabar[k] for k = 0..T; etabar[k+1] is what the step-k
// momentum gradient needs.
std::vector<Eigen::MatrixX3d> adjoint_backward(const MomentumBundle& m,
                                               const Trajectory& traj,
                                               const Eigen::MatrixX3d& seed);

// Coordinate gradient dJ/dalpha^k on the support rows, path term included:
// dt (2 K_SS alpha^k + K_{S,all} etabar^{k+1}).
std::vector<Eigen::MatrixX3d> momentum_gradient(
    const MomentumBundle& m, const Trajectory& traj,
    const std::vector<Eigen::MatrixX3d>& etabar);

// Backward Euler pass through the frozen per-step velocity fields, started
// from arbitrary points: X^T = start, X^k = X^{k+1} - dt v_k(X^{k+1}).
Eigen::MatrixX3d flow_backward(const MomentumBundle& m, const Trajectory& traj,
                               const Eigen::MatrixX3d& start);

struct InverseDiagnostics {
  double max_round_trip = 0.0;  // voxels, grid -> phi -> backward flow
  bool warned = false;
};

// Endpoint map, its inverse (backward flow of the grid nodes) and the FD
// Jacobians of phi. The forward/backward round trip is checked against the
// grid: above 0.5 voxel sets the warning flag, above 2 voxels throws
// numeric_error.
DeformationBundle make_deformation(const MomentumBundle& m,
                                   const Trajectory& traj,
                                   InverseDiagnostics* diag = nullptr);

// Deformed template on the bundle's grid: each voxel is pulled back through
// phi_inv, the template interpolated there, then reoriented by the local
// forward Jacobian expressed in physical coordinates. A non-invertible
// pullback Jacobian throws numeric_error naming the voxel.
ODFField group_action(const DeformationBundle& bundle, const ODFField& temp);

}  // namespace odf
