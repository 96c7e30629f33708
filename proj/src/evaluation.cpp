#include "odfreg/evaluation.hpp"

#include <cmath>
#include <sstream>

#include "odfreg/errors.hpp"
#include "odfreg/parallel.hpp"

namespace odf {

namespace {

constexpr double kFloor = 1e-10;
constexpr int kCdfBins = 256;

// psi^2, floored, renormalized to unit quadrature mass
Eigen::VectorXd density(const SphereSampling& sp,
                        Eigen::Ref<const Eigen::VectorXd> psi) {
  Eigen::VectorXd p = psi.array().square().max(kFloor).matrix();
  p /= sp.weights().dot(p);
  return p;
}

}  // namespace

double skl(const SphereSampling& sp, Eigen::Ref<const Eigen::VectorXd> a,
           Eigen::Ref<const Eigen::VectorXd> b) {
  if (a.size() != sp.size() || b.size() != sp.size())
    throw usage_error("skl: value count does not match the sampling");
  const Eigen::VectorXd p = density(sp, a);
  const Eigen::VectorXd q = density(sp, b);
  double s = 0.0;
  for (int k = 0; k < sp.size(); ++k)
    s += sp.weights()[k] * (p[k] - q[k]) * (std::log(p[k]) - std::log(q[k]));
  return s;
}

SklReport skl_map(const ODFField& a, const ODFField& b,
                  const std::vector<std::uint8_t>& mask) {
  if (!a.grid.same_shape(b.grid))
    throw usage_error("skl_map: fields live on different grids");
  if (a.sampling->size() != b.sampling->size())
    throw usage_error("skl_map: fields use different samplings");
  const int nvox = a.grid.nvox();
  if (!mask.empty() && static_cast<int>(mask.size()) != nvox)
    throw usage_error("skl_map: mask size does not match the grid");

  SklReport r;
  r.mask = mask.empty() ? std::vector<std::uint8_t>(nvox, 1) : mask;
  r.map = Eigen::VectorXd::Zero(nvox);
  parallel_for(nvox, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t v = lo; v < hi; ++v)
      if (r.mask[v]) r.map[v] = skl(*a.sampling, a.values.col(v), b.values.col(v));
  });

  std::int64_t count = 0;
  double sum = 0.0, top = 0.0;
  for (int v = 0; v < nvox; ++v) {
    if (!r.mask[v]) continue;
    ++count;
    sum += r.map[v];
    top = std::max(top, r.map[v]);
  }
  r.mean = count ? sum / static_cast<double>(count) : 0.0;

  r.cdf_value.resize(kCdfBins);
  r.cdf_fraction.resize(kCdfBins);
  for (int i = 0; i < kCdfBins; ++i)
    r.cdf_value[i] = top * static_cast<double>(i) / (kCdfBins - 1);
  for (int i = 0; i < kCdfBins; ++i) {
    std::int64_t below = 0;
    for (int v = 0; v < nvox; ++v)
      if (r.mask[v] && r.map[v] <= r.cdf_value[i]) ++below;
    r.cdf_fraction[i] =
        count ? static_cast<double>(below) / static_cast<double>(count) : 1.0;
  }
  return r;
}

double dice(const std::vector<std::uint8_t>& a,
            const std::vector<std::uint8_t>& b) {
  if (a.size() != b.size())
    throw usage_error("dice: masks have different sizes");
  std::int64_t na = 0, nb = 0, nab = 0;
  for (std::size_t v = 0; v < a.size(); ++v) {
    na += a[v] != 0;
    nb += b[v] != 0;
    nab += (a[v] != 0) && (b[v] != 0);
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(nab) / static_cast<double>(na + nb);
}

std::string skl_report_text(const SklReport& r) {
  std::int64_t count = 0;
  for (const auto m : r.mask) count += m != 0;
  std::ostringstream os;
  os.precision(17);
  os << "voxels: " << r.mask.size() << "\n";
  os << "masked: " << count << "\n";
  os << "mean_skl: " << r.mean << "\n";
  os << "max_skl: " << (r.cdf_value.size() ? r.cdf_value[r.cdf_value.size() - 1]
                                           : 0.0)
     << "\n";
  os << "cdf_bins: " << r.cdf_value.size() << "\n";
  return os.str();
}

std::string skl_cdf_csv(const SklReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "value,fraction\n";
  for (Eigen::Index i = 0; i < r.cdf_value.size(); ++i)
    os << r.cdf_value[i] << "," << r.cdf_fraction[i] << "\n";
  return os.str();
}

}  // namespace odf
