#pragma once

#include <Eigen/Core>

#include "odfreg/sphere_sampling.hpp"

namespace odf {

// Square-root ODF: nonnegative samples of sqrt(p) on a sphere sampling,
// with unit quadrature norm.  These live on the positive orthant of the
// unit sphere in L2, where the Fisher-Rao metric reduces to the flat L2
// inner product and geodesics have the closed forms below.
struct SqrtOdf {
  SamplingPtr sampling;
  Eigen::VectorXd values;
};

// Tangent vector at a base point on the sphere.
struct TangentVector {
  SamplingPtr sampling;
  Eigen::VectorXd values;
  Eigen::VectorXd base;
};

// Validating constructor: checks direction count, nonnegativity (within
// 1e-9 slack for roundoff) and unit norm (within 1e-6).
SqrtOdf make_sqrt_odf(SamplingPtr sampling, Eigen::VectorXd values);

// The isotropic ODF, constant 1/sqrt(4*pi).
SqrtOdf uniform_odf(SamplingPtr sampling);

// --- core operations on raw sample vectors -------------------------------
// These are the hot-path forms; the SqrtOdf overloads below delegate here.

double inner(const SphereSampling& sp, Eigen::Ref<const Eigen::VectorXd> a,
             Eigen::Ref<const Eigen::VectorXd> b);

// arccos of the clamped inner product; in [0, pi/2] on the orthant.
double geodesic_distance(const SphereSampling& sp,
                         Eigen::Ref<const Eigen::VectorXd> a,
                         Eigen::Ref<const Eigen::VectorXd> b);

// Riemannian log of q at base p.  Requires <p,q> > 0 (same chart); returns
// the zero tangent when the points coincide within 1e-12.  The result is
// re-projected onto the tangent space of p to kill quadrature drift.
Eigen::VectorXd log_map(const SphereSampling& sp,
                        Eigen::Ref<const Eigen::VectorXd> p,
                        Eigen::Ref<const Eigen::VectorXd> q);

// Riemannian exponential at base p; requires |xi| <= pi/2 (the chart where
// the map is bijective), uses a series branch below 1e-8 to avoid 0/0.
Eigen::VectorXd exp_map(const SphereSampling& sp,
                        Eigen::Ref<const Eigen::VectorXd> p,
                        Eigen::Ref<const Eigen::VectorXd> xi);

// Removes the radial component of v at base p.
Eigen::VectorXd tangent_project(const SphereSampling& sp,
                                Eigen::Ref<const Eigen::VectorXd> p,
                                Eigen::Ref<const Eigen::VectorXd> v);

// Projects samples onto the even-degree SH space of the sampling, clamps
// negative lobes to zero and renormalizes: the canonical band-limited
// representative used by phantom generation.
Eigen::VectorXd sh_project(const SphereSampling& sp,
                           Eigen::Ref<const Eigen::VectorXd> values);

// --- wrapper overloads ----------------------------------------------------

double inner(const SqrtOdf& a, const SqrtOdf& b);
double geodesic_distance(const SqrtOdf& a, const SqrtOdf& b);
TangentVector log_map(const SqrtOdf& p, const SqrtOdf& q);
SqrtOdf exp_map(const SqrtOdf& p, const TangentVector& xi);

}  // namespace odf
