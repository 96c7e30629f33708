#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "odfreg/deformation.hpp"
#include "odfreg/field.hpp"

namespace odf {

struct RegistrationConfig {
  double sigma_v = 5.0;  // kernel width, voxel units
  double lambda = 1.0;   // matching weight in J
  int timesteps = 10;    // Euler steps of the flow, >= 2
  int max_iterations = 100;
  double gradient_tolerance = 1e-4;  // relative to the iteration-0 norm
  double ls_max_step = 0.5;   // bracket cap: max node displacement, voxels
  double ls_tolerance = 0.2;  // stop when bracket < tol * initial width
  int n_dirs = 162;           // sphere sampling for phantoms / loaders
  int sh_order = 6;
  double foreground_tol = 1e-3;  // uniform-distance cutoff for support
};

// Positivity, T >= 2; throws usage_error naming the offending field.
void validate_config(const RegistrationConfig& cfg);

struct JBreakdown {
  double total = 0.0;
  double energy = 0.0;    // momentum path term
  double matching = 0.0;  // lambda already applied
};

struct RegistrationDiagnostics {
  double min_det = std::numeric_limits<double>::infinity();
  double inverse_residual = 0.0;   // worst forward/backward round trip
  double max_renorm_drift = 0.0;   // reorientation raw-norm deviation
};

struct RegistrationResult {
  MomentumBundle momentum;
  Trajectory trajectory;
  std::vector<JBreakdown> trace;  // [0] = initial state, then accepted steps
  int iterations = 0;
  std::string termination;
  RegistrationDiagnostics diagnostics;
};

// J = path_energy(m) + lambda * matching at the trajectory endpoint.
// A folded deformation anywhere throws numeric_error.
JBreakdown evaluate_J(const MomentumBundle& m, const ODFField& temp,
                      const ODFField& targ, const RegistrationConfig& cfg);

struct LineSearchResult {
  double eps = 0.0;
  double value = 0.0;  // objective at eps
  bool stalled = false;  // every nonzero probe was infeasible
};

// Golden-section minimization of j over [0, hi]. j returns +infinity for
// infeasible steps; j0 is the caller's value at 0. The returned eps is the
// best evaluated sample, 0 whenever no probe improves on j0.
LineSearchResult line_search_golden(const std::function<double(double)>& j,
                                    double j0, double hi, double tol);

// Polak-Ribiere conjugate gradient over the support momenta, kernel-metric
// preconditioned, with golden-section line search per step. The J trace is
// non-increasing; every accepted deformation is fold-free.
RegistrationResult register_fields(const ODFField& temp, const ODFField& targ,
                                   const RegistrationConfig& cfg);

}  // namespace odf
