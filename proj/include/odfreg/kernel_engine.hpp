#pragma once

#include <Eigen/Dense>

namespace odf {

// Dense Gaussian kernel sums: out(i,:) = Σ_j exp(-|t_i - s_j|² / 2σ²) · payload(j,:).
// Blocked so the pair matrix never materializes. Threads split target rows
// only and each row accumulates its source blocks in a fixed order, so the
// output is bitwise independent of the thread count.
class KernelEngine {
 public:
  explicit KernelEngine(double sigma);

  double sigma() const { return sigma_; }

  Eigen::MatrixXd moments(const Eigen::MatrixX3d& targets,
                          const Eigen::MatrixX3d& sources,
                          const Eigen::MatrixXd& payload) const;

 private:
  double sigma_;
};

}  // namespace odf
