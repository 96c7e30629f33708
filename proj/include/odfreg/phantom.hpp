#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "odfreg/field.hpp"
#include "odfreg/io.hpp"

namespace odf {

// Watson-type fiber: density p(s) proportional to exp(kappa (mu's)^2),
// sampled, square-rooted, quadrature-normalized. Raw samples, not band
// limited; fields store the band-limited projection.
Eigen::VectorXd make_watson(const SphereSampling& sp, const Eigen::Vector3d& mu,
                            double kappa);

// Fiber axis at angle theta (radians) in the x-y plane.
Eigen::VectorXd make_single_fiber(const SphereSampling& sp, double theta,
                                  double kappa);

// Density mixture mix*watson(theta1) + (1-mix)*watson(theta2).
Eigen::VectorXd make_crossing(const SphereSampling& sp, double theta1,
                              double theta2, double kappa, double mix);

// Synthetic volume recipes. "circle-shape" and "ellipse-shape" fill an
// ellipsoidal support (a disc on single-slice grids) with one fiber;
// "rotated-odf" is circle-shape with the fiber axis turned by `rotate`;
// "crossing" fills the support with a two-fiber mixture whose axes sit at
// theta and theta + pi/2; "single-fiber" is a constant field with no shape;
// "affine-family" fills the support with affine_act(Rz(theta_z) *
// shear(rho_y) * scale(sigma_y), fiber). Voxels outside the support hold
// the uniform ODF.
struct PhantomSpec {
  std::string kind = "circle-shape";
  std::array<int, 3> dims{32, 32, 1};
  Eigen::Vector3d voxel_size{1.0, 1.0, 1.0};
  int n_dirs = 162;
  int sh_order = 6;
  double radius = 10.0;    // support radii, voxel units
  double radius_y = -1.0;  // <0: same as radius
  double radius_z = -1.0;
  double theta = 0.0;  // radians
  double kappa = 8.0;
  double mix = 0.5;
  double rotate = M_PI / 4.0;  // rotated-odf extra fiber angle
  double theta_z = 0.0;        // affine-family parameters
  double rho_y = 0.0;
  double sigma_y = 1.0;
};

// Reads the documented keys (angles in degrees: theta_deg, rotate_deg,
// theta_z_deg); unknown keys are usage errors naming the key.
PhantomSpec parse_phantom_spec(const Config& cfg);

ODFField make_phantom(const PhantomSpec& spec);

// The support mask the phantom was built with (1 inside).
std::vector<std::uint8_t> phantom_support(const PhantomSpec& spec);

}  // namespace odf
