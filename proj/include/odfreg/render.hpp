#pragma once

#include <string>

#include <Eigen/Dense>

#include "odfreg/field.hpp"
#include "odfreg/sphere_sampling.hpp"

namespace odf {

struct RenderOptions {
  int axis = 2;        // slice normal
  int index = 0;       // slice position along that axis
  double cell_px = 16.0;
  int glyph_samples = 64;  // polygon vertices per glyph
};

// In-plane glyph outline for one ODF: vertex t is radius p(u_t) along the
// unit direction u_t sweeping the plane normal to `axis`, with the radii
// scaled so the largest equals `scale`. p = psi^2 through the band-limited
// synthesis.
Eigen::MatrixX2d glyph_polygon(const SphereSampling& sp,
                               Eigen::Ref<const Eigen::VectorXd> psi, int axis,
                               int samples, double scale);

// Deterministic SVG of one slice, a glyph per voxel. Numbers are printed
// with shortest round-trip formatting, so equal inputs give equal bytes.
std::string render_svg(const ODFField& f, const RenderOptions& opt);

}  // namespace odf
