#include "odfreg/render.hpp"

#include <charconv>
#include <cmath>

#include "odfreg/errors.hpp"

namespace odf {

namespace {

void put_number(std::string& out, double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, end);
}

// the two in-plane axes, kept in ascending order; the second one is drawn
// upward (SVG y runs down, so it enters with a flipped sign)
std::pair<int, int> plane_axes(int axis) {
  switch (axis) {
    case 0: return {1, 2};
    case 1: return {0, 2};
    case 2: return {0, 1};
    default: throw usage_error("render: axis must be 0, 1 or 2");
  }
}

}  // namespace

Eigen::MatrixX2d glyph_polygon(const SphereSampling& sp,
                               Eigen::Ref<const Eigen::VectorXd> psi, int axis,
                               int samples, double scale) {
  if (samples < 3) throw usage_error("render: a polygon needs >= 3 samples");
  const auto [a1, a2] = plane_axes(axis);
  const Eigen::VectorXd coeffs = sp.sh_fit(psi);

  Eigen::VectorXd radii(samples);
  double top = 0.0;
  for (int t = 0; t < samples; ++t) {
    const double ang = 2.0 * M_PI * t / samples;
    Eigen::Vector3d u = Eigen::Vector3d::Zero();
    u[a1] = std::cos(ang);
    u[a2] = std::sin(ang);
    const double psi_u = sh_eval(sp.sh_order(), coeffs, u);
    radii[t] = psi_u * psi_u;
    top = std::max(top, radii[t]);
  }
  if (top > 0.0) radii *= scale / top;

  Eigen::MatrixX2d pts(samples, 2);
  for (int t = 0; t < samples; ++t) {
    const double ang = 2.0 * M_PI * t / samples;
    pts(t, 0) = radii[t] * std::cos(ang);
    pts(t, 1) = -radii[t] * std::sin(ang);
  }
  return pts;
}

std::string render_svg(const ODFField& f, const RenderOptions& opt) {
  const auto [a1, a2] = plane_axes(opt.axis);
  if (opt.index < 0 || opt.index >= f.grid.dims[opt.axis])
    throw usage_error("render: slice " + std::to_string(opt.index) +
                      " out of range along axis " + std::to_string(opt.axis));
  if (!(opt.cell_px > 0.0)) throw usage_error("render: cell size must be > 0");

  const int cols = f.grid.dims[a1];
  const int rows = f.grid.dims[a2];
  const double w = cols * opt.cell_px;
  const double h = rows * opt.cell_px;

  std::string svg;
  svg.reserve(static_cast<std::size_t>(cols) * rows * opt.glyph_samples * 16);
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"";
  put_number(svg, w);
  svg += "\" height=\"";
  put_number(svg, h);
  svg += "\" viewBox=\"0 0 ";
  put_number(svg, w);
  svg += " ";
  put_number(svg, h);
  svg += "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      int idx[3];
      idx[opt.axis] = opt.index;
      idx[a1] = c;
      idx[a2] = r;
      const int v = f.grid.linear(idx[0], idx[1], idx[2]);
      const Eigen::MatrixX2d pts =
          glyph_polygon(*f.sampling, f.values.col(v), opt.axis,
                        opt.glyph_samples, 0.45 * opt.cell_px);
      const double cx = (c + 0.5) * opt.cell_px;
      const double cy = (rows - 1 - r + 0.5) * opt.cell_px;
      svg += "<polygon fill=\"#4878a8\" stroke=\"#1c2e40\" "
             "stroke-width=\"0.4\" points=\"";
      for (int t = 0; t < pts.rows(); ++t) {
        if (t) svg += " ";
        put_number(svg, cx + pts(t, 0));
        svg += ",";
        put_number(svg, cy + pts(t, 1));
      }
      svg += "\"/>\n";
    }
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace odf
