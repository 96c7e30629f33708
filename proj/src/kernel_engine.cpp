#include "odfreg/kernel_engine.hpp"

#include <algorithm>

#include "odfreg/errors.hpp"
#include "odfreg/parallel.hpp"

namespace odf {

namespace {

constexpr Eigen::Index kTargetBlock = 512;
constexpr Eigen::Index kSourceBlock = 512;

}  // namespace

KernelEngine::KernelEngine(double sigma) : sigma_(sigma) {
  if (!(sigma > 0.0)) throw usage_error("kernel sigma must be positive");
}

Eigen::MatrixXd KernelEngine::moments(const Eigen::MatrixX3d& targets,
                                      const Eigen::MatrixX3d& sources,
                                      const Eigen::MatrixXd& payload) const {
  if (sources.rows() != payload.rows())
    throw usage_error("kernel payload rows must match source count");

  const Eigen::Index nt = targets.rows();
  const Eigen::Index ns = sources.rows();
  const Eigen::Index m = payload.cols();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(nt, m);
  if (nt == 0 || ns == 0 || m == 0) return out;

  const double scale = -0.5 / (sigma_ * sigma_);
  const Eigen::VectorXd t2 = targets.rowwise().squaredNorm();
  const Eigen::VectorXd s2 = sources.rowwise().squaredNorm();

  const Eigen::Index nblocks = (nt + kTargetBlock - 1) / kTargetBlock;
  parallel_for(nblocks, [&](std::int64_t b0, std::int64_t b1) {
    Eigen::MatrixXd w(kTargetBlock, kSourceBlock);
    for (std::int64_t b = b0; b < b1; ++b) {
      const Eigen::Index r0 = b * kTargetBlock;
      const Eigen::Index rows = std::min(kTargetBlock, nt - r0);
      for (Eigen::Index c0 = 0; c0 < ns; c0 += kSourceBlock) {
        const Eigen::Index cols = std::min(kSourceBlock, ns - c0);
        auto wb = w.topLeftCorner(rows, cols);
        wb.noalias() = targets.middleRows(r0, rows) *
                       sources.middleRows(c0, cols).transpose() * -2.0;
        wb.colwise() += t2.segment(r0, rows);
        wb.rowwise() += s2.segment(c0, cols).transpose();
        wb = (scale * wb.array()).exp();
        out.middleRows(r0, rows).noalias() +=
            wb * payload.middleRows(c0, cols);
      }
    }
  });
  return out;
}

}  // namespace odf
