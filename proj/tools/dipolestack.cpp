#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "dipolestack/dipole.hpp"
#include "dipolestack/fitting.hpp"
#include "dipolestack/io.hpp"
#include "dipolestack/modes.hpp"
#include "dipolestack/optimize.hpp"
#include "dipolestack/tmm.hpp"

namespace fs = std::filesystem;
namespace ds = dipolestack;
using json = nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Common {
  std::vector<std::string> stacks;
  std::string out = ".";
  unsigned threads = 0;
  std::string materials_dir;
  std::optional<double> wavelength;
  std::optional<double> theta;
  std::vector<std::string> sets;
  double na = 0.8;
};

struct Run {
  std::string command;
  Common common;
  json manifest = json::object();
  std::vector<std::string> outputs;

  fs::path path(const std::string& name) {
    outputs.push_back(name);
    return fs::path(common.out) / name;
  }
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  return parts;
}

double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ds::ValidationError("bad number '" + s + "' in " + what);
  }
}

ds::Stack load_stack(const Common& c, const std::string& file) {
  ds::io::MaterialResolver resolver;
  if (!c.materials_dir.empty()) resolver.add_directory(c.materials_dir);
  ds::Stack s = ds::io::read_stack(file, resolver);
  if (c.wavelength) s.dipole.wavelength_nm = *c.wavelength;
  if (c.theta) s.dipole.polar_angle_deg = *c.theta;
  for (const auto& kv : c.sets) {
    const auto parts = split(kv, '=');
    if (parts.size() != 2) throw ds::ValidationError("--set expects name=value, got '" + kv + "'");
    ds::apply_param(s, ds::param_from_string(parts[0]), to_double(parts[1], "--set"));
  }
  ds::require_valid(s);
  return s;
}

ds::Stack single_stack(Run& run) {
  if (run.common.stacks.size() != 1) throw ds::ValidationError(run.command + " takes exactly one --stack");
  ds::Stack s = load_stack(run.common, run.common.stacks.front());
  run.manifest["stack"] = ds::io::stack_to_json(s);
  run.manifest["materials"] = ds::io::materials_used(s, s.dipole.wavelength_nm);
  return s;
}

ds::Polarization polarization_from(const std::string& s) {
  if (s == "s" || s == "S") return ds::Polarization::S;
  if (s == "p" || s == "P") return ds::Polarization::P;
  throw ds::ValidationError("polarization must be s or p");
}

void stack_meta(ds::io::CsvWriter& w, const ds::Stack& s) {
  w.meta("version", ds::kVersion);
  w.meta("wavelength_nm", s.dipole.wavelength_nm);
  w.meta("theta_deg", s.dipole.polar_angle_deg);
  w.meta("depth_nm", s.dipole.depth_nm);
  w.meta("t0_nm", s.host.thickness_nm);
}

// ---------------------------------------------------------------------------

struct ReflectanceOpts {
  double aoi_from = 0.0, aoi_to = 89.0, aoi_step = 0.5;
  std::optional<double> wl_from, wl_to;
  double wl_step = 1.0;
  double aoi = 0.0;
};

void cmd_reflectance(Run& run, const ReflectanceOpts& o) {
  const ds::Stack s = single_stack(run);
  const bool spectral = o.wl_from.has_value();
  if (spectral != o.wl_to.has_value()) throw ds::ValidationError("--wl-from and --wl-to go together");
  const auto grid = spectral ? ds::linspace_step(*o.wl_from, *o.wl_to, o.wl_step)
                             : ds::linspace_step(o.aoi_from, o.aoi_to, o.aoi_step);
  ds::io::CsvWriter w(run.path("reflectance.csv"));
  stack_meta(w, s);
  if (spectral) w.meta("angle_of_incidence_deg", o.aoi);
  w.header({spectral ? "wavelength_nm" : "angle_of_incidence_deg", "R_s", "T_s", "A_s", "R_p", "T_p", "A_p"});
  for (double x : grid) {
    const double wl = spectral ? x : s.dipole.wavelength_nm;
    const double aoi = spectral ? o.aoi : x;
    const auto ps = ds::tmm::stack_reflectance(s, wl, aoi, ds::Polarization::S);
    const auto pp = ds::tmm::stack_reflectance(s, wl, aoi, ds::Polarization::P);
    w.row({x, ps.R, ps.T, ps.A, pp.R, pp.T, pp.A});
  }
}

struct SpectrumOpts {
  std::optional<double> n_max;
  double step = 1e-3;
  double rel_tol = 1e-7;
};

ds::AngularSpectrum compute_spectrum(const ds::Stack& s, const SpectrumOpts& o) {
  ds::SpectrumGrid grid;
  grid.step = o.step;
  grid.rel_tol = o.rel_tol;
  const double n0 = s.host.material.index_at(s.dipole.wavelength_nm).n;
  return ds::angular_spectrum(s, o.n_max.value_or(1.5 * n0), grid);
}

void write_spectrum(Run& run, const ds::Stack& s, const ds::AngularSpectrum& sp) {
  ds::io::CsvWriter w(run.path("spectrum.csv"));
  stack_meta(w, s);
  w.meta("host_index", sp.host_index);
  w.meta("upper_index", sp.upper_index);
  w.meta("integral", sp.integral);
  w.meta("unresolved", static_cast<double>(sp.unresolved.size()));
  w.meta("negative_samples", static_cast<double>(sp.negative_samples));
  w.header({"n_eff", "p_s", "p_p"});
  for (std::size_t i = 0; i < sp.size(); ++i) w.row({sp.n_eff[i], sp.p_s[i], sp.p_p[i]});
  run.manifest["summary"] = {{"samples", sp.size()},
                             {"integral", sp.integral},
                             {"unresolved", sp.unresolved.size()},
                             {"negative_samples", sp.negative_samples}};
  if (!sp.unresolved.empty()) {
    std::cerr << "warning: " << sp.unresolved.size() << " spectrum panels hit the refinement limit\n";
  }
}

void cmd_spectrum(Run& run, const SpectrumOpts& o) {
  const ds::Stack s = single_stack(run);
  write_spectrum(run, s, compute_spectrum(s, o));
}

struct FarFieldOpts {
  double theta_step = 0.25;
  int phi_count = 360;
};

void cmd_farfield(Run& run, const FarFieldOpts& o) {
  const ds::Stack s = single_stack(run);
  if (!(o.theta_step > 0.0) || o.phi_count < 1) throw ds::ValidationError("need --theta-step > 0, --phi-count >= 1");
  const auto ff = ds::far_field(s, ds::default_theta_grid(o.theta_step), ds::default_phi_grid(o.phi_count));
  const double up = ds::upper_power(s);
  const double xi = ds::collection_factor(s, run.common.na);
  ds::io::CsvWriter w(run.path("farfield.csv"));
  stack_meta(w, s);
  w.meta("numerical_aperture", run.common.na);
  w.meta("xi", xi);
  w.meta("P_upper_over_P_hom", up);
  w.header({"theta_deg", "phi_deg", "intensity"});
  for (std::size_t i = 0; i < ff.theta_deg.size(); ++i)
    for (std::size_t j = 0; j < ff.phi_deg.size(); ++j) w.row({ff.theta_deg[i], ff.phi_deg[j], ff.at(i, j)});
  run.manifest["summary"] = {{"xi", xi}, {"P_upper_over_P_hom", up}};
}

void cmd_xi(Run& run) {
  if (run.common.stacks.empty()) throw ds::ValidationError("xi needs --stack");
  json results = json::array();
  json stacks = json::array();
  json mats = json::object();
  for (const auto& file : run.common.stacks) {
    const ds::Stack s = load_stack(run.common, file);
    json r;
    r["stack"] = file;
    r["numerical_aperture"] = run.common.na;
    r["xi"] = ds::collection_factor(s, run.common.na);
    r["P_tot_over_P_hom"] = ds::total_power(s);
    r["P_upper_over_P_hom"] = ds::upper_power(s);
    if (auto low = ds::lower_power(s)) r["P_lower_over_P_hom"] = *low;
    results.push_back(r);
    stacks.push_back(ds::io::stack_to_json(s));
    mats.update(ds::io::materials_used(s, s.dipole.wavelength_nm));
  }
  run.manifest["stack"] = stacks.size() == 1 ? stacks[0] : stacks;
  run.manifest["materials"] = mats;
  ds::io::write_json(run.path("xi.json"), results.size() == 1 ? results[0] : results);
  for (const auto& r : results) std::cout << r["stack"].get<std::string>() << ": xi = " << r["xi"].get<double>() << '\n';
}

struct ModesOpts {
  SpectrumOpts spectrum;
  double prominence = 3.0;
};

void cmd_modes(Run& run, const ModesOpts& o) {
  const ds::Stack s = single_stack(run);
  const auto sp = compute_spectrum(s, o.spectrum);
  write_spectrum(run, s, sp);
  ds::PeakOptions popt;
  popt.prominence_factor = o.prominence;
  const auto modes = ds::find_modes(sp, popt);
  auto [up, down] = ds::split_at_dipole(s);
  const double lambda = s.dipole.wavelength_nm;
  ds::io::CsvWriter w(run.path("modes.csv"));
  stack_meta(w, s);
  w.header({"n_eff", "pol", "kind", "peak_height", "prominence", "fwhm_n_eff", "theta_up_deg",
            "d_pen_upper_nm", "d_pen_lower_nm", "resonance_sum_nm", "order_q"});
  json list = json::array();
  for (const auto& m : modes) {
    double angle = kNaN, du = kNaN, dl = kNaN, sum = kNaN, q = kNaN;
    if (m.kind == ds::ModeKind::Leaky) angle = ds::leaky_to_angle(m.n_eff, sp.upper_index);
    if (m.n_eff < sp.host_index) {
      try {
        du = ds::penetration_depth(up, m.n_eff, lambda, m.polarization);
        dl = ds::penetration_depth(down, m.n_eff, lambda, m.polarization);
        const auto rc = ds::resonance_check(s.host.thickness_nm, sp.host_index, m.n_eff, du, dl, lambda);
        sum = rc.rhs_nm;
        q = rc.order_q;
      } catch (const ds::DomainError&) {
        du = dl = kNaN;
      }
    }
    using ds::io::format_number;
    w.cells({format_number(m.n_eff), ds::to_string(m.polarization), ds::to_string(m.kind), format_number(m.peak_height),
             format_number(m.prominence), format_number(m.fwhm_n_eff), format_number(angle), format_number(du),
             format_number(dl), format_number(sum), format_number(q)});
    list.push_back({{"n_eff", m.n_eff}, {"polarization", ds::to_string(m.polarization)}, {"kind", ds::to_string(m.kind)}});
  }
  run.manifest["modes"] = list;
  for (const auto& m : modes)
    std::cout << ds::to_string(m.kind) << ' ' << ds::to_string(m.polarization) << " n_eff = " << m.n_eff << '\n';
}

struct ResonanceOpts {
  double from = 560.0, to = 680.0, step = 1.0;
  std::vector<double> aoi{0.0};
  std::optional<double> dual;
  double t0_from = 50.0, t0_to = 800.0, t0_step = 1.0;
};

void cmd_resonance(Run& run, const ResonanceOpts& o) {
  const ds::Stack s = single_stack(run);
  const double na = run.common.na;
  if (o.dual) {
    const auto grid = ds::linspace_step(o.t0_from, o.t0_to, o.t0_step);
    const auto r = ds::dual_resonance(s, na, s.dipole.wavelength_nm, *o.dual, grid, run.common.threads);
    json j = {{"wavelength_a_nm", s.dipole.wavelength_nm}, {"wavelength_b_nm", *o.dual},
              {"t0_nm", r.t0_nm}, {"partner_t0_nm", r.partner_t0_nm}, {"tolerance_nm", r.tolerance_nm},
              {"resonances_a_nm", r.peaks_a}, {"resonances_b_nm", r.peaks_b}};
    ds::io::write_json(run.path("dual-resonance.json"), j);
    run.manifest["summary"] = {{"t0_nm", r.t0_nm}};
    std::cout << "dual resonance t0 = " << r.t0_nm << " nm\n";
    return;
  }
  const auto wl = ds::linspace_step(o.from, o.to, o.step);
  const auto g = ds::sweep(s, na, {{ds::Axis::Wavelength, wl}}, {ds::Polarization::S, run.common.threads, {}});
  std::vector<std::vector<double>> refl(o.aoi.size(), std::vector<double>(wl.size()));
  for (std::size_t a = 0; a < o.aoi.size(); ++a) {
    for (std::size_t i = 0; i < wl.size(); ++i) {
      const double rs = ds::tmm::stack_reflectance(s, wl[i], o.aoi[a], ds::Polarization::S).R;
      const double rp = ds::tmm::stack_reflectance(s, wl[i], o.aoi[a], ds::Polarization::P).R;
      refl[a][i] = 0.5 * (rs + rp);
    }
  }
  ds::io::CsvWriter w(run.path("resonance.csv"));
  stack_meta(w, s);
  w.meta("numerical_aperture", na);
  std::vector<std::string> cols{"wavelength_nm", "xi"};
  for (double a : o.aoi) cols.push_back("R_unpolarized_aoi_" + ds::io::format_number(a));
  w.header(cols);
  for (std::size_t i = 0; i < wl.size(); ++i) {
    std::vector<double> row{wl[i], g.values[i]};
    for (const auto& r : refl) row.push_back(r[i]);
    w.row(row);
  }
  const auto width = ds::half_maximum(wl, g.values);
  const double peak = *std::max_element(g.values.begin(), g.values.end());
  json j = {{"center_nm", width.center}, {"left_nm", width.left}, {"right_nm", width.right},
            {"fwhm_nm", width.width()}, {"xi_peak", peak}};
  ds::io::write_json(run.path("resonance.json"), j);
  run.manifest["summary"] = j;
  std::cout << "resonance FWHM = " << width.width() << " nm\n";
}

struct SweepOpts {
  std::vector<std::string> axes;
  std::string pol = "s";
};

ds::SweepAxis parse_axis(const std::string& spec) {
  const auto parts = split(spec, ':');
  if (parts.size() != 4) throw ds::ValidationError("--axis expects name:from:to:step, got '" + spec + "'");
  return {ds::axis_from_string(parts[0]),
          ds::linspace_step(to_double(parts[1], "--axis"), to_double(parts[2], "--axis"), to_double(parts[3], "--axis"))};
}

void cmd_sweep(Run& run, const SweepOpts& o) {
  const ds::Stack s = single_stack(run);
  std::vector<ds::SweepAxis> axes;
  for (const auto& a : o.axes) axes.push_back(parse_axis(a));
  const auto g = ds::sweep(s, run.common.na, axes, {polarization_from(o.pol), run.common.threads, {}});
  ds::io::CsvWriter w(run.path("sweep.csv"));
  stack_meta(w, s);
  w.meta("numerical_aperture", run.common.na);
  w.meta("quantity", g.quantity);
  std::vector<std::string> cols;
  for (const auto& a : axes) cols.push_back(ds::to_string(a.axis));
  cols.push_back(g.quantity);
  cols.push_back("feasible");
  w.header(cols);
  for (std::size_t f = 0; f < g.size(); ++f) {
    const auto idx = g.unflat(f);
    std::vector<double> row;
    for (std::size_t k = 0; k < axes.size(); ++k) row.push_back(axes[k].values[idx[k]]);
    row.push_back(g.values[f]);
    row.push_back(g.feasible[f] ? 1.0 : 0.0);
    w.row(row);
  }
  if (axes.size() == 2) {
    ds::io::CsvWriter m(run.path("sweep-matrix.csv"));
    stack_meta(m, s);
    m.meta("rows", ds::to_string(axes[0].axis));
    m.meta("columns", ds::to_string(axes[1].axis));
    std::vector<double> head{kNaN};
    head.insert(head.end(), axes[1].values.begin(), axes[1].values.end());
    m.row(head);
    for (std::size_t i = 0; i < axes[0].values.size(); ++i) {
      std::vector<double> row{axes[0].values[i]};
      for (std::size_t j = 0; j < axes[1].values.size(); ++j) row.push_back(g.values[i * axes[1].values.size() + j]);
      m.row(row);
    }
  }
  json sidecar;
  sidecar["quantity"] = g.quantity;
  sidecar["numerical_aperture"] = run.common.na;
  sidecar["axes"] = json::array();
  for (const auto& a : axes) sidecar["axes"].push_back({{"name", ds::to_string(a.axis)}, {"values", a.values}});
  sidecar["template"] = ds::io::stack_to_json(s);
  sidecar["materials"] = ds::io::materials_used(s, s.dipole.wavelength_nm);
  ds::io::write_json(run.path("sweep.json"), sidecar);
  const std::size_t best = std::max_element(g.values.begin(), g.values.end()) - g.values.begin();
  json at = json::object();
  const auto idx = g.unflat(best);
  for (std::size_t k = 0; k < axes.size(); ++k) at[ds::to_string(axes[k].axis)] = axes[k].values[idx[k]];
  run.manifest["summary"] = {{"points", g.size()}, {"max", g.values[best]}, {"argmax", at}};
}

struct OptimizeOpts {
  std::vector<std::string> free;
  int swarm = 50;
  int iterations = 200;
  std::uint64_t seed = 1;
  bool no_refine = false;
};

void cmd_optimize(Run& run, const OptimizeOpts& o) {
  const ds::Stack s = single_stack(run);
  ds::ParameterSpace space;
  space.base = s;
  space.numerical_aperture = run.common.na;
  const std::vector<std::string> defaults{"t0:50:150", "d:10:120", "t1:10:80", "t2:50:200"};
  for (const auto& f : o.free.empty() ? defaults : o.free) {
    const auto parts = split(f, ':');
    if (parts.size() != 3) throw ds::ValidationError("--free expects name:lower:upper, got '" + f + "'");
    space.free.push_back({ds::param_from_string(parts[0]), to_double(parts[1], "--free"), to_double(parts[2], "--free")});
  }
  space.check();
  ds::PsoConfig pcfg;
  pcfg.swarm_size = o.swarm;
  pcfg.iterations = o.iterations;
  pcfg.seed = o.seed;
  pcfg.threads = run.common.threads;
  const auto swarm = ds::pso(space, pcfg);
  std::vector<double> best = swarm.best;
  double value = swarm.best_value;
  json j;
  j["swarm"] = {{"xi", swarm.best_value}, {"evaluations", swarm.evaluations}};
  if (!o.no_refine) {
    const auto refined = ds::local_refine(swarm.best, space);
    best = refined.params;
    value = refined.value;
    j["refine"] = {{"xi", refined.value}, {"iterations", refined.iterations}, {"converged", refined.converged},
                   {"gradient_norm", refined.gradient_norm}};
  }
  json params = json::object();
  for (std::size_t i = 0; i < space.free.size(); ++i) params[ds::to_string(space.free[i].param)] = best[i];
  j["params_nm"] = params;
  j["xi"] = value;
  ds::io::write_json(run.path("optimize.json"), j);
  ds::io::write_json(run.path("optimized-stack.json"), ds::io::stack_to_json(space.build(best)));
  ds::io::CsvWriter w(run.path("trace.csv"));
  w.meta("version", ds::kVersion);
  w.meta("seed", static_cast<double>(o.seed));
  w.header({"iteration", "best_xi"});
  for (std::size_t i = 0; i < swarm.trace.size(); ++i) w.row({static_cast<double>(i), swarm.trace[i]});
  run.manifest["summary"] = j;
  std::cout << "xi = " << value << '\n';
}

void write_params(json& j, const char* key, double value, double error, bool fixed) {
  j[key] = {{"value", value}, {"error", error}, {"fixed", fixed}};
}

struct FitSatOpts {
  std::string data;
  bool fix_c = false;
  bool fit_dark = false;
  double dark = 500.0;
};

void cmd_fit_sat(Run& run, const FitSatOpts& o) {
  const auto rows = ds::io::read_csv_columns(o.data, 2);
  std::vector<ds::SaturationPoint> pts;
  for (const auto& r : rows) pts.push_back({r[0], r[1], r.size() > 2 ? std::optional<double>(r[2]) : std::nullopt});
  ds::SaturationOptions opt;
  opt.fix_c_to_zero = o.fix_c;
  opt.fixed_D_cps = o.fit_dark ? std::nullopt : std::optional<double>(o.dark);
  const auto fit = ds::fit_saturation(pts, opt);
  json j;
  write_params(j, "I_sat_cps", fit.params.I_sat_cps, fit.errors.I_sat_cps, false);
  write_params(j, "P_sat_mW", fit.params.P_sat_mW, fit.errors.P_sat_mW, false);
  write_params(j, "c_cps_per_mW", fit.params.c_cps_per_mW, fit.errors.c_cps_per_mW, fit.c_fixed);
  write_params(j, "D_cps", fit.params.D_cps, fit.errors.D_cps, fit.D_fixed);
  j["c_clamped"] = fit.c_clamped;
  j["residual_norm"] = fit.residual_norm;
  j["iterations"] = fit.iterations;
  ds::io::write_json(run.path("fit-sat.json"), j);
  run.manifest["summary"] = j;
  std::cout << "I_sat = " << fit.params.I_sat_cps << " cps, P_sat = " << fit.params.P_sat_mW << " mW\n";
}

std::vector<ds::SpectrumPoint> read_spectrum(const std::string& file) {
  std::vector<ds::SpectrumPoint> s;
  for (const auto& r : ds::io::read_csv_columns(file, 2)) s.push_back({r[0], r[1]});
  return s;
}

struct FitG2Opts {
  std::string data;
  double jitter = 0.0;
  std::string emitter_spectrum, background_spectrum;
  std::vector<double> window;
};

void cmd_fit_g2(Run& run, const FitG2Opts& o) {
  std::vector<ds::G2Point> pts;
  for (const auto& r : ds::io::read_csv_columns(o.data, 2)) pts.push_back({r[0], r[1]});
  const auto fit = ds::fit_g2(pts, o.jitter);
  json j;
  write_params(j, "rho", fit.params.rho, fit.errors.rho, false);
  write_params(j, "tau1_ns", fit.params.tau1_ns, fit.errors.tau1_ns, false);
  write_params(j, "a", fit.params.a, fit.errors.a, fit.a_fixed);
  write_params(j, "tau2_ns", fit.params.tau2_ns, fit.errors.tau2_ns, fit.a_fixed);
  j["g2_zero"] = fit.g2_zero;
  j["g2_zero_raw"] = fit.g2_zero_raw;
  j["jitter_sigma_ns"] = o.jitter;
  j["residual_norm"] = fit.residual_norm;
  j["iterations"] = fit.iterations;
  if (!o.emitter_spectrum.empty() || !o.background_spectrum.empty()) {
    if (o.emitter_spectrum.empty() || o.background_spectrum.empty() || o.window.size() != 2) {
      throw ds::ValidationError("spectral rho needs --emitter-spectrum, --background-spectrum and --window lo hi");
    }
    const auto em = read_spectrum(o.emitter_spectrum);
    const auto bg = read_spectrum(o.background_spectrum);
    const auto br = ds::background_ratio_from_spectra(em, bg, o.window[0], o.window[1]);
    j["rho_spectra"] = br.rho;
    j["rho_difference"] = br.rho - fit.params.rho;
    j["rho_clamped"] = br.clamped;
    if (!br.warning.empty()) std::cerr << "warning: " << br.warning << '\n';
  }
  ds::io::write_json(run.path("fit-g2.json"), j);
  run.manifest["summary"] = j;
  std::cout << "g2(0) = " << fit.g2_zero << ", rho = " << fit.params.rho << '\n';
}

struct ThicknessOpts {
  std::string data;
  double t0_min = 150.0, t0_max = 1000.0, step = 1.0;
};

void cmd_thickness(Run& run, const ThicknessOpts& o) {
  const ds::Stack s = single_stack(run);
  ds::ThicknessOptions opt;
  opt.step_nm = o.step;
  const auto fit = ds::thickness_from_reflectance(read_spectrum(o.data), s, o.t0_min, o.t0_max, opt);
  json j = {{"t0_nm", fit.t0_nm}, {"t0_error_nm", fit.t0_error_nm}, {"scale", fit.scale},
            {"offset", fit.offset}, {"chi2", fit.chi2}};
  ds::io::write_json(run.path("thickness.json"), j);
  ds::io::CsvWriter w(run.path("thickness-scan.csv"));
  w.meta("version", ds::kVersion);
  w.header({"t0_nm", "chi2"});
  for (std::size_t i = 0; i < fit.scan_t0.size(); ++i) w.row({fit.scan_t0[i], fit.scan_chi2[i]});
  run.manifest["summary"] = j;
  std::cout << "t0 = " << fit.t0_nm << " +- " << fit.t0_error_nm << " nm\n";
}

struct GradientOpts {
  double spot_nm = 800.0;
  double shift_nm = 6.0;
  ds::GradientOptions opt;
};

void cmd_gradient(Run& run, const GradientOpts& o) {
  const ds::Stack s = single_stack(run);
  const auto rep = ds::gradient_tolerance_report(s, run.common.na, o.spot_nm, o.shift_nm, o.opt);
  json j = {{"t0_nm", rep.t0_nm}, {"slope", rep.slope}, {"bound_nm_per_um", rep.bound_nm_per_um},
            {"spot_diameter_nm", o.spot_nm}, {"acceptable_shift_nm", o.shift_nm}};
  ds::io::write_json(run.path("gradient.json"), j);
  ds::io::CsvWriter w(run.path("gradient.csv"));
  stack_meta(w, s);
  w.header({"t0_nm", "resonance_nm"});
  for (std::size_t i = 0; i < rep.t0_samples.size(); ++i) w.row({rep.t0_samples[i], rep.resonance_nm[i]});
  run.manifest["summary"] = j;
  std::cout << "slope = " << rep.slope << ", bound = " << rep.bound_nm_per_um << " nm/um\n";
}

// Resolved option values of one subcommand, defaults included.
json options_of(const CLI::App* sub) {
  json j = json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_lnames().empty() ? opt->get_name() : opt->get_lnames().front();
    if (name == "help") continue;
    if (opt->count() > 0) {
      const auto& res = opt->results();
      if (opt->get_expected_max() > 1 || res.size() > 1) {
        j[name] = res;
      } else {
        j[name] = res.empty() ? std::string("true") : res.front();
      }
    } else if (!opt->get_default_str().empty()) {
      j[name] = opt->get_default_str();
    } else {
      j[name] = nullptr;
    }
  }
  return j;
}

void write_manifest(const Run& run, const CLI::App* sub, const std::string& status, const std::string& error) {
  if (!fs::is_directory(run.common.out)) return;
  json m = run.manifest;
  m["version"] = ds::kVersion;
  m["command"] = run.command;
  m["config"] = options_of(sub);
  m["threads"] = run.common.threads == 0 ? ds::default_threads() : run.common.threads;
  m["outputs"] = run.outputs;
  m["status"] = status;
  if (!error.empty()) m["error"] = error;
  ds::io::write_json(fs::path(run.common.out) / "manifest.json", m);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dipole emission in planar multilayer stacks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", ds::kVersion);

  Run run;
  Common& c = run.common;
  auto common = [&](CLI::App* sub, bool stack, bool na) {
    sub->add_option("--out", c.out, "Output directory")->capture_default_str();
    sub->add_option("--threads", c.threads, "Worker threads (0 = available cores)")->capture_default_str();
    if (stack) {
      sub->add_option("--stack", c.stacks, "Stack JSON file")->required()->check(CLI::ExistingFile);
      sub->add_option("--materials", c.materials_dir, "Material directory")->check(CLI::ExistingDirectory);
      sub->add_option("--lambda", c.wavelength, "Override the emission wavelength (nm)");
      sub->add_option("--theta", c.theta, "Override the dipole polar angle (deg)");
      sub->add_option("--set", c.sets, "Override a geometry parameter, e.g. t0=190");
    }
    if (na) sub->add_option("--na", c.na, "Numerical aperture")->capture_default_str();
  };

  ReflectanceOpts refl;
  auto* s_refl = app.add_subcommand("reflectance", "Plane-wave R, T, A from the upper half space");
  common(s_refl, true, false);
  s_refl->add_option("--aoi-from", refl.aoi_from)->capture_default_str();
  s_refl->add_option("--aoi-to", refl.aoi_to)->capture_default_str();
  s_refl->add_option("--aoi-step", refl.aoi_step)->capture_default_str();
  s_refl->add_option("--wl-from", refl.wl_from, "Spectral mode start (nm)");
  s_refl->add_option("--wl-to", refl.wl_to, "Spectral mode end (nm)");
  s_refl->add_option("--wl-step", refl.wl_step)->capture_default_str();
  s_refl->add_option("--aoi", refl.aoi, "Angle of incidence in spectral mode (deg)")->capture_default_str();

  SpectrumOpts spec;
  auto add_spectrum_opts = [](CLI::App* sub, SpectrumOpts& o) {
    sub->add_option("--n-max", o.n_max, "Upper n_eff (default 1.5 n0)");
    sub->add_option("--step", o.step, "Base panel width in n_eff")->capture_default_str();
    sub->add_option("--rel-tol", o.rel_tol)->capture_default_str();
  };
  auto* s_spec = app.add_subcommand("spectrum", "Angular power emission spectrum p(n_eff)");
  common(s_spec, true, false);
  add_spectrum_opts(s_spec, spec);

  FarFieldOpts ffo;
  auto* s_ff = app.add_subcommand("farfield", "Far-field intensity in the upper half space");
  common(s_ff, true, true);
  s_ff->add_option("--theta-step", ffo.theta_step)->capture_default_str();
  s_ff->add_option("--phi-count", ffo.phi_count)->capture_default_str();

  auto* s_xi = app.add_subcommand("xi", "Collection factor and power ratios");
  common(s_xi, true, true);

  ModesOpts mo;
  auto* s_modes = app.add_subcommand("modes", "Peaks of p(n_eff) with penetration depths");
  common(s_modes, true, false);
  add_spectrum_opts(s_modes, mo.spectrum);
  s_modes->add_option("--prominence", mo.prominence, "Prominence over local background")->capture_default_str();

  ResonanceOpts ro;
  auto* s_res = app.add_subcommand("resonance", "Wavelength resonance width, or dual-wavelength thickness");
  common(s_res, true, true);
  s_res->add_option("--from", ro.from)->capture_default_str();
  s_res->add_option("--to", ro.to)->capture_default_str();
  s_res->add_option("--step", ro.step)->capture_default_str();
  s_res->add_option("--aoi", ro.aoi, "Reflectance incidence angles (deg)")->capture_default_str();
  s_res->add_option("--dual", ro.dual, "Second wavelength (nm): search a common resonant t0");
  s_res->add_option("--t0-from", ro.t0_from)->capture_default_str();
  s_res->add_option("--t0-to", ro.t0_to)->capture_default_str();
  s_res->add_option("--t0-step", ro.t0_step)->capture_default_str();

  SweepOpts so;
  auto* s_sweep = app.add_subcommand("sweep", "xi (or reflectance) on a parameter grid");
  common(s_sweep, true, true);
  s_sweep->add_option("--axis", so.axes, "name:from:to:step (t0, d, t1, t2, lambda, theta, na, angle_of_incidence)")
      ->required();
  s_sweep->add_option("--pol", so.pol, "Polarization for reflectance sweeps")->capture_default_str();

  OptimizeOpts oo;
  auto* s_opt = app.add_subcommand("optimize", "Particle swarm plus local refinement of xi");
  common(s_opt, true, true);
  s_opt->add_option("--free", oo.free, "name:lower:upper (default t0:50:150 d:10:120 t1:10:80 t2:50:200)");
  s_opt->add_option("--swarm", oo.swarm)->capture_default_str();
  s_opt->add_option("--iterations", oo.iterations)->capture_default_str();
  s_opt->add_option("--seed", oo.seed)->capture_default_str();
  s_opt->add_flag("--no-refine", oo.no_refine);

  FitSatOpts fs_o;
  auto* s_fs = app.add_subcommand("fit-sat", "Fit a saturation curve (power_mW,rate_cps[,sigma])");
  common(s_fs, false, false);
  s_fs->add_option("--data", fs_o.data)->required()->check(CLI::ExistingFile);
  s_fs->add_flag("--fix-c", fs_o.fix_c, "Fix the linear term to 0");
  s_fs->add_flag("--fit-dark", fs_o.fit_dark, "Fit the dark count rate");
  s_fs->add_option("--dark", fs_o.dark, "Fixed dark count rate (cps)")->capture_default_str();

  FitG2Opts g2o;
  auto* s_g2 = app.add_subcommand("fit-g2", "Fit g2(tau) (delay_ns,g2)");
  common(s_g2, false, false);
  s_g2->add_option("--data", g2o.data)->required()->check(CLI::ExistingFile);
  s_g2->add_option("--jitter", g2o.jitter, "Detector jitter sigma (ns)")->capture_default_str();
  s_g2->add_option("--emitter-spectrum", g2o.emitter_spectrum)->check(CLI::ExistingFile);
  s_g2->add_option("--background-spectrum", g2o.background_spectrum)->check(CLI::ExistingFile);
  s_g2->add_option("--window", g2o.window, "Integration window lo hi (nm)")->expected(2);

  ThicknessOpts to;
  auto* s_th = app.add_subcommand("thickness", "Host thickness from a reflectance spectrum (lambda_nm,reflectance)");
  common(s_th, true, false);
  s_th->add_option("--data", to.data)->required()->check(CLI::ExistingFile);
  s_th->add_option("--t0-min", to.t0_min)->capture_default_str();
  s_th->add_option("--t0-max", to.t0_max)->capture_default_str();
  s_th->add_option("--step", to.step)->capture_default_str();

  GradientOpts go;
  auto* s_gr = app.add_subcommand("gradient-report", "Tolerable thickness gradient around the working point");
  common(s_gr, true, true);
  s_gr->add_option("--spot", go.spot_nm, "Spot diameter (nm)")->capture_default_str();
  s_gr->add_option("--shift", go.shift_nm, "Acceptable resonance shift (nm)")->capture_default_str();
  s_gr->add_option("--half-window", go.opt.half_window_nm)->capture_default_str();
  s_gr->add_option("--t0-step", go.opt.t0_step_nm)->capture_default_str();
  s_gr->add_option("--search", go.opt.search_half_width_nm)->capture_default_str();
  s_gr->add_option("--wl-step", go.opt.wavelength_step_nm)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  const CLI::App* sub = app.get_subcommands().front();
  run.command = sub->get_name();
  try {
    fs::create_directories(c.out);
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }

  auto fail = [&](const std::exception& e, int code) {
    std::cerr << "error: " << e.what() << '\n';
    try {
      write_manifest(run, sub, "error", e.what());
    } catch (const std::exception&) {
    }
    return code;
  };

  try {
    if (sub == s_refl) cmd_reflectance(run, refl);
    else if (sub == s_spec) cmd_spectrum(run, spec);
    else if (sub == s_ff) cmd_farfield(run, ffo);
    else if (sub == s_xi) cmd_xi(run);
    else if (sub == s_modes) cmd_modes(run, mo);
    else if (sub == s_res) cmd_resonance(run, ro);
    else if (sub == s_sweep) cmd_sweep(run, so);
    else if (sub == s_opt) cmd_optimize(run, oo);
    else if (sub == s_fs) cmd_fit_sat(run, fs_o);
    else if (sub == s_g2) cmd_fit_g2(run, g2o);
    else if (sub == s_th) cmd_thickness(run, to);
    else if (sub == s_gr) cmd_gradient(run, go);
    write_manifest(run, sub, "ok", "");
  } catch (const ds::ValidationError& e) {
    return fail(e, 1);
  } catch (const ds::ConvergenceError& e) {
    return fail(e, 2);
  } catch (const ds::AmbiguityError& e) {
    return fail(e, 2);
  } catch (const ds::Error& e) {
    return fail(e, 2);
  } catch (const std::exception& e) {
    return fail(e, 1);
  }
  return 0;
}
