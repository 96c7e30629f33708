// odfreg: phantom generation, ODF registration, deformation application,
// evaluation and glyph rendering over ODFF volumes.
//
// Exit codes: 0 success, 2 usage (bad arguments, bad config, incompatible
// inputs), 3 data format (unreadable or corrupt files), 4 numerical failure
// (folded deformation, line search stalled before convergence).

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "odfreg/deformation.hpp"
#include "odfreg/errors.hpp"
#include "odfreg/evaluation.hpp"
#include "odfreg/field.hpp"
#include "odfreg/io.hpp"
#include "odfreg/optimizer.hpp"
#include "odfreg/parallel.hpp"
#include "odfreg/phantom.hpp"
#include "odfreg/render.hpp"
#include "odfreg/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

json config_snapshot(const odf::Config& cfg) {
  json j = json::object();
  for (const auto& [key, value] : cfg.entries()) j[key] = value;
  return j;
}

// Written next to every output; duration_seconds is the only field that may
// differ between identical reruns.
void write_manifest(const fs::path& path, const std::string& command,
                    const json& config, const std::vector<fs::path>& inputs,
                    const std::vector<fs::path>& outputs, double duration,
                    const json& diagnostics) {
  json j;
  j["command"] = command;
  j["config"] = config;
  json in = json::array();
  for (const auto& p : inputs) in.push_back(p.generic_string());
  j["inputs"] = in;
  json out = json::array();
  for (const auto& p : outputs) out.push_back(p.generic_string());
  j["outputs"] = out;
  j["version"] = odf::version_string;
  j["duration_seconds"] = duration;
  j["diagnostics"] = diagnostics;
  odf::write_text_atomic(path, j.dump(2) + "\n");
}

fs::path sibling_manifest(const fs::path& out) {
  return out.parent_path() / (out.filename().string() + ".manifest.json");
}

// Env var wins over the config key so a pinned run script can be overridden
// without editing files.
void apply_thread_config(const odf::Config& cfg) {
  if (std::getenv("ODFREG_THREADS") != nullptr) return;
  if (cfg.has("threads")) odf::set_max_threads(cfg.get_int("threads"));
}

int run_phantom(const std::string& spec_path, const std::string& out_path) {
  const auto t0 = std::chrono::steady_clock::now();
  const odf::Config cfg = odf::Config::parse_file(spec_path);
  const odf::PhantomSpec spec = odf::parse_phantom_spec(cfg);
  const odf::ODFField field = odf::make_phantom(spec);
  const std::vector<std::uint8_t> support = odf::phantom_support(spec);
  std::int64_t inside = 0;
  for (std::uint8_t v : support) inside += v;

  const fs::path out(out_path);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  odf::save_field(field, out);
  write_manifest(sibling_manifest(out), "phantom", config_snapshot(cfg),
                 {fs::path(spec_path)}, {out}, seconds_since(t0),
                 {{"kind", spec.kind},
                  {"voxels", field.grid.nvox()},
                  {"support_voxels", inside},
                  {"n_dirs", field.sampling->size()}});
  return 0;
}

odf::RegistrationConfig parse_registration_config(const odf::Config& cfg) {
  static const std::set<std::string> known = {
      "sigma_v",        "lambda",       "timesteps",
      "max_iterations", "gradient_tolerance", "ls_max_step",
      "ls_tolerance",   "foreground_tol", "threads"};
  for (const auto& [key, value] : cfg.entries())
    if (!known.count(key))
      throw odf::usage_error("unknown registration config key '" + key + "'");

  odf::RegistrationConfig rc;
  rc.sigma_v = cfg.get_double("sigma_v");
  rc.lambda = cfg.get_double("lambda");
  rc.timesteps = cfg.get_int("timesteps");
  rc.max_iterations = cfg.get_int("max_iterations", rc.max_iterations);
  rc.gradient_tolerance =
      cfg.get_double("gradient_tolerance", rc.gradient_tolerance);
  rc.ls_max_step = cfg.get_double("ls_max_step", rc.ls_max_step);
  rc.ls_tolerance = cfg.get_double("ls_tolerance", rc.ls_tolerance);
  rc.foreground_tol = cfg.get_double("foreground_tol", rc.foreground_tol);
  odf::validate_config(rc);
  return rc;
}

std::string trace_csv(const std::vector<odf::JBreakdown>& trace) {
  std::string text = "iteration,total,energy,matching\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    text += std::to_string(i) + "," + format_double(trace[i].total) + "," +
            format_double(trace[i].energy) + "," +
            format_double(trace[i].matching) + "\n";
  }
  return text;
}

int run_register(const std::string& template_path,
                 const std::string& target_path,
                 const std::string& config_path, const std::string& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  const odf::Config cfg = odf::Config::parse_file(config_path);
  const odf::RegistrationConfig rc = parse_registration_config(cfg);
  apply_thread_config(cfg);

  const odf::ODFField temp = odf::load_field(template_path);
  const odf::ODFField targ = odf::load_field(target_path);
  odf::RegistrationResult res = odf::register_fields(temp, targ, rc);

  const fs::path dir(out_dir);
  fs::create_directories(dir);
  const odf::DeformationBundle bundle =
      odf::make_deformation(res.momentum, res.trajectory);
  const odf::ODFField deformed = odf::group_action(bundle, temp);

  odf::save_momentum(res.momentum, dir / "momentum.odfm");
  odf::save_deformation(bundle, dir / "deformation.odfd");
  odf::save_field(deformed, dir / "deformed.odff");
  odf::write_text_atomic(dir / "trace.csv", trace_csv(res.trace));

  const odf::JBreakdown& first = res.trace.front();
  const odf::JBreakdown& last = res.trace.back();
  write_manifest(
      dir / "manifest.json", "register", config_snapshot(cfg),
      {fs::path(template_path), fs::path(target_path), fs::path(config_path)},
      {dir / "momentum.odfm", dir / "deformation.odfd", dir / "deformed.odff",
       dir / "trace.csv"},
      seconds_since(t0),
      {{"iterations", res.iterations},
       {"termination", res.termination},
       {"initial_total", first.total},
       {"initial_matching", first.matching},
       {"final_total", last.total},
       {"final_matching", last.matching},
       {"min_det", res.diagnostics.min_det},
       {"inverse_residual", res.diagnostics.inverse_residual},
       {"max_renorm_drift", res.diagnostics.max_renorm_drift}});

  if (res.termination == "line_search_stalled") {
    std::cerr << "odfreg register: line search stalled before convergence;"
              << " best momentum after " << res.iterations
              << " iterations written to " << dir.generic_string() << "\n";
    return 4;
  }
  return 0;
}

int run_apply(const std::string& bundle_path, const std::string& field_path,
              const std::string& out_path) {
  const auto t0 = std::chrono::steady_clock::now();
  const odf::DeformationBundle bundle = odf::load_deformation(bundle_path);
  const odf::ODFField field = odf::load_field(field_path);
  const odf::ODFField deformed = odf::group_action(bundle, field);

  const fs::path out(out_path);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  odf::save_field(deformed, out);
  write_manifest(sibling_manifest(out), "apply", json::object(),
                 {fs::path(bundle_path), fs::path(field_path)}, {out},
                 seconds_since(t0),
                 {{"voxels", field.grid.nvox()},
                  {"n_dirs", field.sampling->size()}});
  return 0;
}

std::vector<std::uint8_t> foreground_mask(const odf::ODFField& f, double tol) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(f.grid.nvox()), 0);
  for (int v : odf::foreground_support(f, f, tol)) mask[v] = 1;
  return mask;
}

int run_evaluate(const std::string& a_path, const std::string& b_path,
                 const std::string& mask_path, const std::string& out_dir,
                 double foreground_tol) {
  const auto t0 = std::chrono::steady_clock::now();
  const odf::ODFField a = odf::load_field(a_path);
  const odf::ODFField b = odf::load_field(b_path);

  std::vector<std::uint8_t> mask;
  std::vector<fs::path> inputs = {fs::path(a_path), fs::path(b_path)};
  if (!mask_path.empty()) {
    const odf::ODFField m = odf::load_field(mask_path);
    if (!m.grid.same_shape(a.grid))
      throw odf::usage_error("mask grid does not match the compared fields");
    mask = foreground_mask(m, foreground_tol);
    inputs.push_back(fs::path(mask_path));
  }

  const odf::SklReport report = odf::skl_map(a, b, mask);
  const double overlap =
      odf::dice(foreground_mask(a, foreground_tol),
                foreground_mask(b, foreground_tol));

  const fs::path dir(out_dir);
  fs::create_directories(dir);
  std::string text = odf::skl_report_text(report);
  text += "dice: " + format_double(overlap) + "\n";
  odf::write_text_atomic(dir / "skl_report.txt", text);
  odf::write_text_atomic(dir / "skl_cdf.csv", odf::skl_cdf_csv(report));
  write_manifest(dir / "manifest.json", "evaluate",
                 {{"foreground_tol", foreground_tol}}, inputs,
                 {dir / "skl_report.txt", dir / "skl_cdf.csv"},
                 seconds_since(t0),
                 {{"mean_skl", report.mean},
                  {"max_skl", report.map.size() ? report.map.maxCoeff() : 0.0},
                  {"dice", overlap}});
  return 0;
}

int run_render(const std::string& field_path, const std::string& out_path,
               const odf::RenderOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  const odf::ODFField field = odf::load_field(field_path);
  const std::string svg = odf::render_svg(field, opt);

  const fs::path out(out_path);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  odf::write_text_atomic(out, svg);
  write_manifest(sibling_manifest(out), "render",
                 {{"axis", opt.axis},
                  {"index", opt.index},
                  {"cell_px", opt.cell_px},
                  {"glyph_samples", opt.glyph_samples}},
                 {fs::path(field_path)}, {out}, seconds_since(t0),
                 {{"bytes", svg.size()}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ODF volume registration by geodesic flows of diffeomorphisms"};
  app.set_version_flag("--version", odf::version_string);
  app.require_subcommand(1);
  app.footer(
      "Exit codes: 0 success, 2 usage error, 3 data format error,\n"
      "4 numerical failure (folded deformation or stalled line search).\n"
      "Worker threads: ODFREG_THREADS overrides the 'threads' config key;\n"
      "default is the available hardware parallelism.");

  std::string spec_path, out_path, template_path, target_path, config_path;
  std::string out_dir, bundle_path, field_path, a_path, b_path, mask_path;
  double foreground_tol = 1e-3;
  odf::RenderOptions ropt;

  CLI::App* phantom =
      app.add_subcommand("phantom", "Generate a synthetic ODF volume");
  phantom->add_option("--spec", spec_path, "Phantom spec file (key=value)")
      ->required();
  phantom->add_option("--out", out_path, "Output ODFF path")->required();

  CLI::App* reg = app.add_subcommand(
      "register", "Register a template ODF volume onto a target");
  reg->add_option("--template", template_path, "Template ODFF path")
      ->required();
  reg->add_option("--target", target_path, "Target ODFF path")->required();
  reg->add_option("--config", config_path,
                  "Registration config file; requires sigma_v, lambda, "
                  "timesteps")
      ->required();
  reg->add_option("--out-dir", out_dir,
                  "Directory for momentum.odfm, deformation.odfd, "
                  "deformed.odff, trace.csv, manifest.json")
      ->required();

  CLI::App* apply = app.add_subcommand(
      "apply", "Apply a saved deformation to an ODF volume");
  apply->add_option("--deformation", bundle_path, "Deformation bundle path")
      ->required();
  apply->add_option("--field", field_path, "Input ODFF path")->required();
  apply->add_option("--out", out_path, "Output ODFF path")->required();

  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "Per-voxel sKL report and support overlap of two volumes");
  evaluate->add_option("--a", a_path, "First ODFF path")->required();
  evaluate->add_option("--b", b_path, "Second ODFF path")->required();
  evaluate->add_option("--mask", mask_path,
                       "Optional ODFF volume whose non-uniform voxels define "
                       "the evaluation mask");
  evaluate->add_option("--out-dir", out_dir,
                       "Directory for skl_report.txt, skl_cdf.csv, "
                       "manifest.json")
      ->required();
  evaluate->add_option("--foreground-tol", foreground_tol,
                       "Distance-from-uniform cutoff for support masks");

  CLI::App* render = app.add_subcommand(
      "render", "Render one slice as an SVG grid of ODF glyphs");
  render->add_option("--field", field_path, "Input ODFF path")->required();
  render->add_option("--out", out_path, "Output SVG path")->required();
  render->add_option("--axis", ropt.axis, "Slice axis (0, 1 or 2)")
      ->check(CLI::Range(0, 2));
  render->add_option("--index", ropt.index, "Slice index along the axis");
  render->add_option("--cell-px", ropt.cell_px, "Cell edge in pixels");
  render->add_option("--samples", ropt.glyph_samples,
                     "Polygon vertices per glyph");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*phantom) return run_phantom(spec_path, out_path);
    if (*reg)
      return run_register(template_path, target_path, config_path, out_dir);
    if (*apply) return run_apply(bundle_path, field_path, out_path);
    if (*evaluate)
      return run_evaluate(a_path, b_path, mask_path, out_dir, foreground_tol);
    if (*render) return run_render(field_path, out_path, ropt);
  } catch (const odf::usage_error& e) {
    std::cerr << "odfreg: " << e.what() << "\n";
    return 2;
  } catch (const odf::data_error& e) {
    std::cerr << "odfreg: " << e.what() << "\n";
    return 3;
  } catch (const odf::numeric_error& e) {
    std::cerr << "odfreg: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "odfreg: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
