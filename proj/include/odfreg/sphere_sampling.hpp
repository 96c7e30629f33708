#pragma once

#include <Eigen/Core>
#include <memory>

namespace odf {

// A fixed set of unit directions with quadrature weights, shared by every
// ODF discretized on it.  Directions come from icosahedron subdivision
// (42, 162 or 642 vertices; 12 and 2562 also work), weights are the exact
// spherical Voronoi cell areas of the subdivision and sum to 4*pi.
//
// The sampling also carries the even-degree spherical-harmonic basis used
// for angular interpolation, with a prefactored weighted least-squares
// solver for fitting coefficients to sampled values.
class SphereSampling {
 public:
  static std::shared_ptr<const SphereSampling> icosphere(int n_dirs,
                                                         int sh_order);

  // Rebuilds a sampling from stored directions and weights (file loading).
  // Checks unit directions, positive weights summing to 4*pi, and that the
  // SH fit is well posed; failures throw data_error.
  static std::shared_ptr<const SphereSampling> from_samples(
      Eigen::Matrix3Xd dirs, Eigen::VectorXd weights, int sh_order);

  int size() const { return static_cast<int>(dirs_.cols()); }
  int sh_order() const { return sh_order_; }
  int coeff_count() const { return static_cast<int>(basis_.cols()); }

  const Eigen::Matrix3Xd& directions() const { return dirs_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  // N x coeff_count matrix of basis values at the sampling directions.
  const Eigen::MatrixXd& sh_basis() const { return basis_; }

  // Quadrature inner product of two sampled functions.
  double dot(Eigen::Ref<const Eigen::VectorXd> a,
             Eigen::Ref<const Eigen::VectorXd> b) const {
    // Grouped so the product is symmetric in a and b down to the last bit.
    return (weights_.array() * (a.array() * b.array())).sum();
  }
  double norm(Eigen::Ref<const Eigen::VectorXd> a) const;

  // Weighted least-squares fit of sampled values; optionally reports the
  // weighted rms residual.  Throws numeric_error if the basis is
  // rank-deficient on this sampling.
  Eigen::VectorXd sh_fit(Eigen::Ref<const Eigen::VectorXd> values,
                         double* residual = nullptr) const;

  // Synthesis at the sampling directions.
  Eigen::VectorXd sh_synth(Eigen::Ref<const Eigen::VectorXd> coeffs) const {
    return basis_ * coeffs;
  }

  // True when two samplings can be mixed in one expression: either the same
  // object or equal direction sets.
  bool compatible_with(const SphereSampling& other) const;

 private:
  SphereSampling() = default;
  void build_basis();

  Eigen::Matrix3Xd dirs_;
  Eigen::VectorXd weights_;
  Eigen::MatrixXd basis_;
  Eigen::MatrixXd fit_solver_;  // (B^T W B)^-1 B^T W, coeff_count x N
  int sh_order_ = 0;
};

using SamplingPtr = std::shared_ptr<const SphereSampling>;

// Evaluates an even-degree SH expansion at an arbitrary unit direction.
double sh_eval(int order, Eigen::Ref<const Eigen::VectorXd> coeffs,
               const Eigen::Vector3d& s);

void require_compatible(const SphereSampling& a, const SphereSampling& b,
                        const char* where);

}  // namespace odf
