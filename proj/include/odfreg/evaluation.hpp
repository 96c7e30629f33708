#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "odfreg/field.hpp"
#include "odfreg/sphere_sampling.hpp"

namespace odf {

// Symmetrized Kullback-Leibler divergence between two sqrt-ODFs on a shared
// sampling. Densities are recovered as psi^2, floored at 1e-10 and
// renormalized to unit quadrature mass; the quadrature sum uses the
// per-direction form (p - q)(log p - log q), nonnegative term by term and
// exactly symmetric under argument swap.
double skl(const SphereSampling& sp, Eigen::Ref<const Eigen::VectorXd> a,
           Eigen::Ref<const Eigen::VectorXd> b);

struct SklReport {
  Eigen::VectorXd map;           // per voxel, zero outside the mask
  std::vector<std::uint8_t> mask;
  double mean = 0.0;             // arithmetic mean over the mask
  Eigen::VectorXd cdf_value;     // 256 evenly spaced thresholds, 0..max
  Eigen::VectorXd cdf_fraction;  // fraction of masked voxels <= threshold
};

// Per-voxel sKL of two fields over a mask (empty mask = every voxel),
// with the empirical cumulative distribution at 256 thresholds.
SklReport skl_map(const ODFField& a, const ODFField& b,
                  const std::vector<std::uint8_t>& mask = {});

// Dice overlap 2|A and B| / (|A| + |B|); two empty masks count as 1.
double dice(const std::vector<std::uint8_t>& a,
            const std::vector<std::uint8_t>& b);

// key: value lines (voxel counts, mean, cdf span); stable key set.
std::string skl_report_text(const SklReport& r);

// "value,fraction" CSV of the cumulative distribution samples.
std::string skl_cdf_csv(const SklReport& r);

}  // namespace odf
