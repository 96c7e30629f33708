#pragma once

#include <Eigen/Dense>

#include "odfreg/field.hpp"
#include "odfreg/sphere_sampling.hpp"

namespace odf {

// Direction a reoriented ODF samples from: the normalized pullback of s
// through A. Throws numeric_error when A is singular.
Eigen::Vector3d reorient_direction(const Eigen::Matrix3d& a,
                                   const Eigen::Vector3d& s);

// Intermediates of one affine action, kept for the energy gradient.
struct ReorientWork {
  Eigen::VectorXd coeffs;    // band representation of the input
  Eigen::Matrix3Xd shat;     // pulled-back unit directions
  Eigen::VectorXd n;         // pullback lengths |A^{-1} s_k|
  Eigen::VectorXd g;         // band synthesis at shat
  Eigen::VectorXd f_pre;     // scale-law values before the positivity clamp
  Eigen::ArrayXd gate;       // 1 where the clamp was inactive
  double raw_norm = 0.0;     // quadrature norm before renormalization
  double sqrt_det_ainv = 0.0;
  Eigen::Matrix3d ainv;
};

// Affine action on a single sqrt ODF: pull directions back through A,
// synthesize the band-limited input there, apply the volume-element scale
// law, clamp ringing below zero, renormalize to the sphere. A must be
// orientation preserving and decently conditioned (Frobenius condition
// estimate <= 1e6); otherwise numeric_error.
Eigen::VectorXd affine_act(const SphereSampling& sp, const Eigen::Matrix3d& a,
                           Eigen::Ref<const Eigen::VectorXd> psi,
                           ReorientWork* work = nullptr);

// Voxel-wise action of one global affine on a volume (no spatial motion).
ODFField affine_act_field(const ODFField& f, const Eigen::Matrix3d& a);

// Homogeneous degree -3/2 extension of a band synthesis:
//   G(x) = eval(coeffs, x/|x|) / |x|^(3/2).
// The reorientation scale law is f_k = sqrt(det A^{-1}) G(A^{-1} s_k).
double scaled_synth(int order, Eigen::Ref<const Eigen::VectorXd> coeffs,
                    const Eigen::Vector3d& x);

// Central-difference gradient of scaled_synth.
Eigen::Vector3d scaled_synth_grad(int order,
                                  Eigen::Ref<const Eigen::VectorXd> coeffs,
                                  const Eigen::Vector3d& x, double h = 1e-4);

}  // namespace odf
