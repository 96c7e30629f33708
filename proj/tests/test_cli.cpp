// End-to-end checks of the odfreg binary (exit codes, file outputs,
// determinism) plus the glyph geometry behind the render subcommand.
// ODFREG_CLI_PATH is injected by the build.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "odfreg/deformation.hpp"
#include "odfreg/errors.hpp"
#include "odfreg/evaluation.hpp"
#include "odfreg/field.hpp"
#include "odfreg/io.hpp"
#include "odfreg/phantom.hpp"
#include "odfreg/render.hpp"
#include "odfreg/sqrt_odf.hpp"
#include "odfreg/version.hpp"

namespace fs = std::filesystem;
using namespace odf;

namespace {

const char* kCli = ODFREG_CLI_PATH;

// Fresh working directory per test case, removed by the next run.
fs::path case_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "odfreg_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run(const std::string& args) {
  const std::string cmd = std::string(kCli) + " " + args;
  const int status = std::system(cmd.c_str());
  REQUIRE(status >= 0);
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void put(const fs::path& p, const std::string& text) {
  write_text_atomic(p, text);
}

const std::string kCircleSpec =
    "kind=circle-shape\nnx=12\nny=12\nnz=1\nn_dirs=42\nsh_order=4\n"
    "radius=3.5\nkappa=8\n";
const std::string kEllipseSpec =
    "kind=ellipse-shape\nnx=12\nny=12\nnz=1\nn_dirs=42\nsh_order=4\n"
    "radius=4.5\nradius_y=2.5\nkappa=8\n";
const std::string kRegConfig =
    "sigma_v=2.5\nlambda=1\ntimesteps=3\nmax_iterations=6\n";

// phantom + register circle onto ellipse inside dir; returns the out dir.
fs::path register_circle_ellipse(const fs::path& dir) {
  put(dir / "circ.cfg", kCircleSpec);
  put(dir / "ell.cfg", kEllipseSpec);
  put(dir / "reg.cfg", kRegConfig);
  REQUIRE(run("phantom --spec " + (dir / "circ.cfg").string() + " --out " +
              (dir / "circ.odff").string()) == 0);
  REQUIRE(run("phantom --spec " + (dir / "ell.cfg").string() + " --out " +
              (dir / "ell.odff").string()) == 0);
  REQUIRE(run("register --template " + (dir / "circ.odff").string() +
              " --target " + (dir / "ell.odff").string() + " --config " +
              (dir / "reg.cfg").string() + " --out-dir " +
              (dir / "reg").string()) == 0);
  return dir / "reg";
}

}  // namespace

TEST_CASE("glyph polygon of a uniform ODF is a circle") {
  const auto sp = SphereSampling::icosphere(42, 4);
  const Eigen::VectorXd psi = uniform_odf(sp).values;
  const Eigen::MatrixX2d pts = glyph_polygon(*sp, psi, 2, 64, 1.0);
  REQUIRE(pts.rows() == 64);
  const Eigen::VectorXd radii = pts.rowwise().norm();
  CHECK(radii.maxCoeff() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(radii.minCoeff() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("glyph polygon of a single fiber is elongated along its axis") {
  const auto sp = SphereSampling::icosphere(42, 4);
  const Eigen::VectorXd psi = sh_project(*sp, make_single_fiber(*sp, 0.0, 8.0));
  const Eigen::MatrixX2d pts = glyph_polygon(*sp, psi, 2, 128, 1.0);
  const double width = pts.col(0).maxCoeff() - pts.col(0).minCoeff();
  const double height = pts.col(1).maxCoeff() - pts.col(1).minCoeff();
  CHECK(width / height > 1.5);
}

TEST_CASE("render_svg is byte stable and rejects bad slices") {
  PhantomSpec spec;
  spec.dims = {6, 5, 1};
  spec.n_dirs = 42;
  spec.sh_order = 4;
  spec.radius = 1.5;
  const ODFField f = make_phantom(spec);
  RenderOptions opt;
  const std::string a = render_svg(f, opt);
  const std::string b = render_svg(f, opt);
  CHECK(a == b);
  CHECK(a.substr(0, 4) == "<svg");
  opt.index = 1;
  CHECK_THROWS_AS(render_svg(f, opt), usage_error);
  opt.index = 0;
  opt.axis = 0;
  CHECK_NOTHROW(render_svg(f, opt));
}

TEST_CASE("phantom writes a loadable field and is deterministic") {
  const fs::path dir = case_dir("phantom");
  put(dir / "spec.cfg",
      "kind=crossing\nnx=8\nny=7\nnz=1\nn_dirs=42\nsh_order=4\n"
      "radius=2.0\nkappa=8\nmix=0.5\n");
  REQUIRE(run("phantom --spec " + (dir / "spec.cfg").string() + " --out " +
              (dir / "a.odff").string()) == 0);
  REQUIRE(run("phantom --spec " + (dir / "spec.cfg").string() + " --out " +
              (dir / "b.odff").string()) == 0);

  const ODFField f = load_field(dir / "a.odff");
  CHECK(f.grid.dims[0] == 8);
  CHECK(f.grid.dims[1] == 7);
  CHECK(f.grid.dims[2] == 1);
  CHECK(f.sampling->size() == 42);
  CHECK(slurp(dir / "a.odff") == slurp(dir / "b.odff"));

  const nlohmann::json man =
      nlohmann::json::parse(slurp(dir / "a.odff.manifest.json"));
  CHECK(man.at("command") == "phantom");
  CHECK(man.at("version") == version_string);
  CHECK(man.at("config").at("kind") == "crossing");
  CHECK(man.at("diagnostics").at("support_voxels").get<int>() > 0);
  CHECK(man.contains("duration_seconds"));
}

TEST_CASE("phantom rejects bad specs with exit 2 and a stderr message") {
  const fs::path dir = case_dir("phantom_bad");
  put(dir / "unknown.cfg", "kind=circle-shape\nwobble=3\n");
  CHECK(run("phantom --spec " + (dir / "unknown.cfg").string() + " --out " +
            (dir / "x.odff").string() + " 2> " + (dir / "err1").string()) ==
        2);
  CHECK(slurp(dir / "err1").find("wobble") != std::string::npos);
  CHECK(!fs::exists(dir / "x.odff"));

  put(dir / "toobig.cfg",
      "kind=circle-shape\nnx=8\nny=8\nnz=1\nn_dirs=42\nsh_order=4\n"
      "radius=40\n");
  CHECK(run("phantom --spec " + (dir / "toobig.cfg").string() + " --out " +
            (dir / "y.odff").string() + " 2> " + (dir / "err2").string()) !=
        0);
  CHECK(!slurp(dir / "err2").empty());
  CHECK(!fs::exists(dir / "y.odff"));
}

TEST_CASE("register of identical fields converges immediately") {
  const fs::path dir = case_dir("register_self");
  put(dir / "circ.cfg", kCircleSpec);
  put(dir / "reg.cfg", kRegConfig);
  REQUIRE(run("phantom --spec " + (dir / "circ.cfg").string() + " --out " +
              (dir / "circ.odff").string()) == 0);
  REQUIRE(run("register --template " + (dir / "circ.odff").string() +
              " --target " + (dir / "circ.odff").string() + " --config " +
              (dir / "reg.cfg").string() + " --out-dir " +
              (dir / "out").string()) == 0);

  const ODFField in = load_field(dir / "circ.odff");
  const ODFField out = load_field(dir / "out" / "deformed.odff");
  CHECK((out.values - in.values).cwiseAbs().maxCoeff() < 1e-10);

  const nlohmann::json man =
      nlohmann::json::parse(slurp(dir / "out" / "manifest.json"));
  CHECK(man.at("diagnostics").at("iterations").get<int>() == 0);
  CHECK(man.at("diagnostics").at("termination") == "gradient_tolerance");
}

TEST_CASE("register produces the documented output set and reduces sKL") {
  const fs::path dir = case_dir("register_run");
  const fs::path reg = register_circle_ellipse(dir);
  for (const char* name : {"momentum.odfm", "deformation.odfd",
                           "deformed.odff", "trace.csv", "manifest.json"})
    CHECK(fs::exists(reg / name));

  const std::string trace = slurp(reg / "trace.csv");
  CHECK(trace.rfind("iteration,total,energy,matching\n", 0) == 0);

  const ODFField circ = load_field(dir / "circ.odff");
  const ODFField ell = load_field(dir / "ell.odff");
  const ODFField deformed = load_field(reg / "deformed.odff");
  CHECK(skl_map(deformed, ell).mean < skl_map(circ, ell).mean);

  const nlohmann::json man = nlohmann::json::parse(slurp(reg / "manifest.json"));
  CHECK(man.at("diagnostics").at("iterations").get<int>() >= 1);
  CHECK(man.at("diagnostics").at("min_det").get<double>() > 0.0);
  CHECK(man.at("diagnostics").at("final_matching").get<double>() <
        man.at("diagnostics").at("initial_matching").get<double>());
}

TEST_CASE("register reports a missing config key with exit 2") {
  const fs::path dir = case_dir("register_badcfg");
  put(dir / "circ.cfg", kCircleSpec);
  REQUIRE(run("phantom --spec " + (dir / "circ.cfg").string() + " --out " +
              (dir / "circ.odff").string()) == 0);
  put(dir / "reg.cfg", "sigma_v=2.5\ntimesteps=3\n");
  CHECK(run("register --template " + (dir / "circ.odff").string() +
            " --target " + (dir / "circ.odff").string() + " --config " +
            (dir / "reg.cfg").string() + " --out-dir " + (dir / "o").string() +
            " 2> " + (dir / "err").string()) == 2);
  CHECK(slurp(dir / "err").find("lambda") != std::string::npos);
}

TEST_CASE("apply with an identity bundle reproduces the input") {
  const fs::path dir = case_dir("apply_identity");
  put(dir / "circ.cfg", kCircleSpec);
  REQUIRE(run("phantom --spec " + (dir / "circ.cfg").string() + " --out " +
              (dir / "circ.odff").string()) == 0);
  const ODFField f = load_field(dir / "circ.odff");

  DeformationBundle id;
  id.grid = f.grid;
  id.phi = f.grid.positions();
  id.phi_inv = id.phi;
  id.jac = grid_jacobians(f.grid, id.phi);
  save_deformation(id, dir / "id.odfd");

  REQUIRE(run("apply --deformation " + (dir / "id.odfd").string() +
              " --field " + (dir / "circ.odff").string() + " --out " +
              (dir / "same.odff").string()) == 0);
  const ODFField out = load_field(dir / "same.odff");
  CHECK((out.values - f.values).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("apply matches the registration's own deformed output bitwise") {
  const fs::path dir = case_dir("apply_roundtrip");
  const fs::path reg = register_circle_ellipse(dir);
  REQUIRE(run("apply --deformation " + (reg / "deformation.odfd").string() +
              " --field " + (dir / "circ.odff").string() + " --out " +
              (dir / "applied.odff").string()) == 0);
  CHECK(slurp(dir / "applied.odff") == slurp(reg / "deformed.odff"));
}

TEST_CASE("applying the deformation and then its inverse is near identity") {
  const fs::path dir = case_dir("apply_inverse");
  const fs::path reg = register_circle_ellipse(dir);

  DeformationBundle fwd = load_deformation(reg / "deformation.odfd");
  DeformationBundle bwd;
  bwd.grid = fwd.grid;
  bwd.phi = fwd.phi_inv;
  bwd.phi_inv = fwd.phi;
  bwd.jac = grid_jacobians(bwd.grid, bwd.phi);
  save_deformation(bwd, dir / "inverse.odfd");

  // A fiber field whose angle drifts slowly across the slice. Full support
  // and smooth spatial variation keep the resampling error of the two passes
  // well below the motion the forward map introduces; a hard-edged phantom
  // would bury the round-trip signal in edge aliasing.
  const auto sp = SphereSampling::icosphere(42, 4);
  ODFField smooth = uniform_field(fwd.grid, sp);
  for (std::int64_t v = 0; v < fwd.grid.nvox(); ++v) {
    const auto idx = fwd.grid.unravel(v);
    const double theta = 0.9 * (idx[0] + 0.5 * idx[1]) / 12.0;
    smooth.values.col(v) = sh_project(*sp, make_single_fiber(*sp, theta, 4.0));
  }
  save_field(smooth, dir / "smooth.odff");

  REQUIRE(run("apply --deformation " + (reg / "deformation.odfd").string() +
              " --field " + (dir / "smooth.odff").string() + " --out " +
              (dir / "fwd.odff").string()) == 0);
  REQUIRE(run("apply --deformation " + (dir / "inverse.odfd").string() +
              " --field " + (dir / "fwd.odff").string() + " --out " +
              (dir / "round.odff").string()) == 0);

  const ODFField moved = load_field(dir / "fwd.odff");
  const ODFField round = load_field(dir / "round.odff");
  double sum_fwd = 0.0, sum_round = 0.0;
  for (std::int64_t v = 0; v < smooth.grid.nvox(); ++v) {
    sum_fwd += geodesic_distance(*sp, smooth.values.col(v),
                                 moved.values.col(v));
    sum_round += geodesic_distance(*sp, smooth.values.col(v),
                                   round.values.col(v));
  }
  const double mean_fwd = sum_fwd / static_cast<double>(smooth.grid.nvox());
  const double mean_round = sum_round / static_cast<double>(smooth.grid.nvox());
  CHECK(mean_round < 0.05);             // interpolation + numeric inverse
  CHECK(mean_round < 0.35 * mean_fwd);  // and well under the forward motion
}

TEST_CASE("apply rejects a grid mismatch") {
  const fs::path dir = case_dir("apply_mismatch");
  put(dir / "circ.cfg", kCircleSpec);
  REQUIRE(run("phantom --spec " + (dir / "circ.cfg").string() + " --out " +
              (dir / "circ.odff").string()) == 0);
  const ODFField f = load_field(dir / "circ.odff");

  GridGeometry other;
  other.dims = {5, 5, 1};
  other.voxel_size = f.grid.voxel_size;
  DeformationBundle id;
  id.grid = other;
  id.phi = other.positions();
  id.phi_inv = id.phi;
  id.jac = grid_jacobians(other, id.phi);
  save_deformation(id, dir / "small.odfd");

  CHECK(run("apply --deformation " + (dir / "small.odfd").string() +
            " --field " + (dir / "circ.odff").string() + " --out " +
            (dir / "x.odff").string() + " 2> " + (dir / "err").string()) == 2);
  CHECK(!slurp(dir / "err").empty());
}

TEST_CASE("evaluate matches library results and reports dice") {
  const fs::path dir = case_dir("evaluate");
  put(dir / "circ.cfg", kCircleSpec);
  put(dir / "ell.cfg", kEllipseSpec);
  REQUIRE(run("phantom --spec " + (dir / "circ.cfg").string() + " --out " +
              (dir / "a.odff").string()) == 0);
  REQUIRE(run("phantom --spec " + (dir / "ell.cfg").string() + " --out " +
              (dir / "b.odff").string()) == 0);
  REQUIRE(run("evaluate --a " + (dir / "a.odff").string() + " --b " +
              (dir / "b.odff").string() + " --out-dir " +
              (dir / "ev").string()) == 0);

  const ODFField a = load_field(dir / "a.odff");
  const ODFField b = load_field(dir / "b.odff");
  const SklReport ref = skl_map(a, b);

  const std::string report = slurp(dir / "ev" / "skl_report.txt");
  const std::string expected = skl_report_text(ref);
  REQUIRE(report.size() > expected.size());
  CHECK(report.substr(0, expected.size()) == expected);
  CHECK(report.substr(expected.size()).rfind("dice: ", 0) == 0);
  CHECK(slurp(dir / "ev" / "skl_cdf.csv") == skl_cdf_csv(ref));

  const nlohmann::json man =
      nlohmann::json::parse(slurp(dir / "ev" / "manifest.json"));
  CHECK(man.at("diagnostics").at("mean_skl").get<double>() ==
        doctest::Approx(ref.mean).epsilon(1e-15));
  const double d = man.at("diagnostics").at("dice").get<double>();
  CHECK(d >= 0.0);
  CHECK(d <= 1.0);
  CHECK(report.find("dice: ") != std::string::npos);
}

TEST_CASE("evaluate of a field against itself reports zero everywhere") {
  const fs::path dir = case_dir("evaluate_self");
  put(dir / "circ.cfg", kCircleSpec);
  REQUIRE(run("phantom --spec " + (dir / "circ.cfg").string() + " --out " +
              (dir / "a.odff").string()) == 0);
  REQUIRE(run("evaluate --a " + (dir / "a.odff").string() + " --b " +
              (dir / "a.odff").string() + " --out-dir " +
              (dir / "ev").string()) == 0);
  const nlohmann::json man =
      nlohmann::json::parse(slurp(dir / "ev" / "manifest.json"));
  CHECK(man.at("diagnostics").at("mean_skl").get<double>() == 0.0);
  CHECK(man.at("diagnostics").at("max_skl").get<double>() == 0.0);
  CHECK(man.at("diagnostics").at("dice").get<double>() == 1.0);
}

TEST_CASE("evaluate dice is zero for fields with disjoint supports") {
  const fs::path dir = case_dir("evaluate_disjoint");
  GridGeometry g;
  g.dims = {6, 6, 1};
  const auto sp = SphereSampling::icosphere(42, 4);
  const Eigen::VectorXd fiber =
      sh_project(*sp, make_single_fiber(*sp, 0.0, 8.0));

  ODFField a = uniform_field(g, sp);
  ODFField b = uniform_field(g, sp);
  a.values.col(g.linear(0, 0, 0)) = fiber;
  b.values.col(g.linear(5, 5, 0)) = fiber;
  save_field(a, dir / "a.odff");
  save_field(b, dir / "b.odff");

  REQUIRE(run("evaluate --a " + (dir / "a.odff").string() + " --b " +
              (dir / "b.odff").string() + " --out-dir " +
              (dir / "ev").string()) == 0);
  const nlohmann::json man =
      nlohmann::json::parse(slurp(dir / "ev" / "manifest.json"));
  CHECK(man.at("diagnostics").at("dice").get<double>() == 0.0);
}

TEST_CASE("render subcommand writes byte-identical SVGs across runs") {
  const fs::path dir = case_dir("render_cli");
  put(dir / "circ.cfg", kCircleSpec);
  REQUIRE(run("phantom --spec " + (dir / "circ.cfg").string() + " --out " +
              (dir / "f.odff").string()) == 0);
  REQUIRE(run("render --field " + (dir / "f.odff").string() + " --out " +
              (dir / "a.svg").string()) == 0);
  REQUIRE(run("render --field " + (dir / "f.odff").string() + " --out " +
              (dir / "b.svg").string()) == 0);
  CHECK(slurp(dir / "a.svg") == slurp(dir / "b.svg"));
  CHECK(run("render --field " + (dir / "f.odff").string() + " --out " +
            (dir / "oob.svg").string() + " --index 3 2> " +
            (dir / "err").string()) == 2);
  CHECK(slurp(dir / "err").find("out of range") != std::string::npos);
}

TEST_CASE("corrupt inputs exit 3 and usage mistakes exit 2") {
  const fs::path dir = case_dir("exit_codes");
  put(dir / "circ.cfg", kCircleSpec);
  REQUIRE(run("phantom --spec " + (dir / "circ.cfg").string() + " --out " +
              (dir / "f.odff").string()) == 0);

  const std::string whole = slurp(dir / "f.odff");
  put(dir / "trunc.odff", whole.substr(0, whole.size() / 2));
  CHECK(run("render --field " + (dir / "trunc.odff").string() + " --out " +
            (dir / "x.svg").string() + " 2> " + (dir / "err").string()) == 3);

  CHECK(run("render --field " + (dir / "f.odff").string() + " 2>/dev/null") ==
        2);
  CHECK(run("frobnicate 2>/dev/null") == 2);
  CHECK(run("--version > " + (dir / "v").string()) == 0);
  CHECK(slurp(dir / "v").find(version_string) != std::string::npos);
}
