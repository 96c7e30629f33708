#include "odfreg/sqrt_odf.hpp"

#include <cmath>

#include "odfreg/errors.hpp"

namespace odf {

SqrtOdf make_sqrt_odf(SamplingPtr sampling, Eigen::VectorXd values) {
  if (!sampling) throw usage_error("sqrt odf needs a sampling");
  if (values.size() != sampling->size())
    throw usage_error("sqrt odf value count does not match sampling");
  if (values.minCoeff() < -1e-9)
    throw usage_error("sqrt odf values must be nonnegative");
  const double n = sampling->norm(values);
  if (std::abs(n - 1.0) > 1e-6)
    throw usage_error("sqrt odf must have unit quadrature norm, got " +
                      std::to_string(n));
  return SqrtOdf{std::move(sampling), std::move(values)};
}

SqrtOdf uniform_odf(SamplingPtr sampling) {
  const double c = 1.0 / std::sqrt(4.0 * M_PI);
  Eigen::VectorXd v = Eigen::VectorXd::Constant(sampling->size(), c);
  return SqrtOdf{std::move(sampling), std::move(v)};
}

double inner(const SphereSampling& sp, Eigen::Ref<const Eigen::VectorXd> a,
             Eigen::Ref<const Eigen::VectorXd> b) {
  return sp.dot(a, b);
}

double geodesic_distance(const SphereSampling& sp,
                         Eigen::Ref<const Eigen::VectorXd> a,
                         Eigen::Ref<const Eigen::VectorXd> b) {
  double c = sp.dot(a, b);
  c = std::min(1.0, std::max(-1.0, c));
  return std::acos(c);
}

Eigen::VectorXd log_map(const SphereSampling& sp,
                        Eigen::Ref<const Eigen::VectorXd> p,
                        Eigen::Ref<const Eigen::VectorXd> q) {
  double c = sp.dot(p, q);
  c = std::min(1.0, std::max(-1.0, c));
  if (c <= 0.0)
    throw numeric_error("log_map: points are not in a common orthant chart");
  if (c > 1.0 - 1e-12) return Eigen::VectorXd::Zero(p.size());
  const double theta = std::acos(c);
  const double scale = theta / std::sqrt(1.0 - c * c);
  Eigen::VectorXd xi = scale * (q - c * p);
  // sampled p is only unit to quadrature accuracy; re-project for tangency
  xi -= sp.dot(xi, p) * p;
  return xi;
}

Eigen::VectorXd exp_map(const SphereSampling& sp,
                        Eigen::Ref<const Eigen::VectorXd> p,
                        Eigen::Ref<const Eigen::VectorXd> xi) {
  const double n = sp.norm(xi);
  if (n > M_PI / 2.0 + 1e-12)
    throw numeric_error("exp_map: tangent norm " + std::to_string(n) +
                        " exceeds the pi/2 chart");
  if (n < 1e-8) {
    // sin(n)/n to second order; exact enough at this scale
    return (1.0 - 0.5 * n * n) * p + (1.0 - n * n / 6.0) * xi;
  }
  return std::cos(n) * p + (std::sin(n) / n) * xi;
}

Eigen::VectorXd tangent_project(const SphereSampling& sp,
                                Eigen::Ref<const Eigen::VectorXd> p,
                                Eigen::Ref<const Eigen::VectorXd> v) {
  return v - sp.dot(v, p) * p;
}

Eigen::VectorXd sh_project(const SphereSampling& sp,
                           Eigen::Ref<const Eigen::VectorXd> values) {
  Eigen::VectorXd out = sp.sh_synth(sp.sh_fit(values));
  out = out.cwiseMax(0.0);
  const double n = sp.norm(out);
  if (n < 1e-12)
    throw numeric_error("sh_project: projection collapsed to zero");
  return out / n;
}

double inner(const SqrtOdf& a, const SqrtOdf& b) {
  require_compatible(*a.sampling, *b.sampling, "inner");
  return inner(*a.sampling, a.values, b.values);
}

double geodesic_distance(const SqrtOdf& a, const SqrtOdf& b) {
  require_compatible(*a.sampling, *b.sampling, "geodesic_distance");
  return geodesic_distance(*a.sampling, a.values, b.values);
}

TangentVector log_map(const SqrtOdf& p, const SqrtOdf& q) {
  require_compatible(*p.sampling, *q.sampling, "log_map");
  return TangentVector{p.sampling, log_map(*p.sampling, p.values, q.values),
                       p.values};
}

SqrtOdf exp_map(const SqrtOdf& p, const TangentVector& xi) {
  require_compatible(*p.sampling, *xi.sampling, "exp_map");
  return SqrtOdf{p.sampling, exp_map(*p.sampling, p.values, xi.values)};
}

}  // namespace odf
