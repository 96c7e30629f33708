#pragma once

#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "odfreg/field.hpp"
#include "odfreg/sphere_sampling.hpp"

namespace odf {

struct MatchingStats {
  double energy = 0.0;  // matching term, lambda not applied
  int gated = 0;        // voxels whose warped position left the target grid
  double min_det = std::numeric_limits<double>::infinity();
  double max_renorm_drift = 0.0;  // max |raw_norm - 1| over voxels
};

// Matching discrepancy in template coordinates:
//   F(phi) = sum_y gate_y det(D_y phi) d^2(R(D_y phi) psi_temp(y),
//            psi_targ(phi(y))) voxel_volume
// where R is the affine action of the local physical Jacobian and gate_y
// drops voxels whose warped position leaves the target grid. A non-positive
// Jacobian determinant anywhere throws numeric_error (folded map).
double matching_term(const ODFField& temp, const ODFField& targ,
                     const Eigen::MatrixX3d& phi,
                     MatchingStats* stats = nullptr);

// lambda * matching_term; zero iff the deformed template matches the target
// on every contributing voxel.
double matching_energy(const ODFField& temp, const ODFField& targ,
                       const Eigen::MatrixX3d& phi, double lambda);

// Exact derivative of matching_term with respect to phi: reverse mode
// through the harmonic synthesis at pulled-back directions, the scale law,
// the positivity clamp, the renormalization, the determinant and the
// Riemannian interpolation, finished by the Jacobian-stencil transpose.
// Rows of gated voxels are zero. stats, when given, receives the same
// numbers matching_term would report.
Eigen::MatrixX3d matching_gradient(const ODFField& temp, const ODFField& targ,
                                   const Eigen::MatrixX3d& phi,
                                   MatchingStats* stats = nullptr);

// The deformation-insensitive gradient of earlier ODF matching work, kept
// as a diagnostic only: per voxel 2 det (D phi)^{-T} [ <log_{F(y)}
// psi_targ(phi(y)), spatial_log_gradient_i(F, y)> ]_i with F the reoriented
// field y -> R(D_y phi) psi_temp(y). It reads spatial structure but never
// the reorientation response. On a pure in-place rotation of the ODFs it
// degenerates to a radial support-edge force with no tangential component,
// so gradient flow under it cannot rotate the image.
Eigen::MatrixX3d term_a_gradient(const ODFField& temp, const ODFField& targ,
                                 const Eigen::MatrixX3d& phi);

// Reorientation-sensitivity part of the analytic gradient decomposition:
// per voxel 2 det [ div <log_{F(y)} psi_targ(phi(y)), L^i> ]_i with the
// divergence taken by central differences of the three scalar fields
// (one-sided on grid faces). Diagnostic counterpart of term_a_gradient;
// the production matching_gradient differentiates the discrete energy
// exactly instead of sampling this continuum formula.
Eigen::MatrixX3d term_b_gradient(const ODFField& temp, const ODFField& targ,
                                 const Eigen::MatrixX3d& phi);

// Spatial derivative of a sqrt-ODF field at one voxel, as tangent vectors at
// psi(x): column a is the averaged central difference of log maps to the
// axis-a neighbours (one-sided on faces, zero on frozen axes).
Eigen::MatrixXd spatial_log_gradient(const ODFField& f, int voxel);

// u(s) = -sqrt(det A^{-1}) A^{-T} grad G(A^{-1} s) with G the degree -3/2
// extension of the band synthesis of psi; the reorientation response of one
// sampled value to a Jacobian perturbation.
Eigen::Vector3d u_vector(const SphereSampling& sp, const Eigen::Matrix3d& a,
                         Eigen::Ref<const Eigen::VectorXd> psi,
                         const Eigen::Vector3d& s);

// Per-direction collection L(s_k) with column i = u_i(s_k) (A^{-1} s_k)
// - 1/2 (A psi)(s_k) w^i, w^i the i-th column of A^{-1}.
std::vector<Eigen::Matrix3d> l_matrix(const SphereSampling& sp,
                                      const Eigen::Matrix3d& a,
                                      Eigen::Ref<const Eigen::VectorXd> psi);

}  // namespace odf
