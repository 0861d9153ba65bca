#include "mswave/cli_commands.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "mswave/msolver.hpp"
#include "mswave/reference.hpp"
#include "mswave/rom_archive.hpp"

namespace mswave {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json partition_to_json(const Staged& st) {
  json j;
  j["format"] = "mswave-partition";
  j["version"] = 1;
  j["num_nodes"] = st.partition.n_nodes;
  j["cells"] = st.partition.cells;
  json ifaces = json::array();
  for (const auto& f : st.partition.interfaces)
    ifaces.push_back({{"ci", f.ci}, {"cj", f.cj}, {"nodes", f.nodes}});
  j["interfaces"] = ifaces;
  json hanging = json::array();
  for (const auto& h : st.partition.hanging)
    hanging.push_back({{"id", h.id}, {"parent", h.parent}, {"ci", h.ci}, {"cj", h.cj}});
  j["hanging"] = hanging;
  j["skeleton"] = st.partition.skeleton;
  return j;
}

void verify_partition_artifact(const Staged& st, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open partition artifact: " + path);
  json stored;
  in >> stored;
  if (stored.value("format", "") != "mswave-partition")
    throw ConfigError("not a partition artifact: " + path);
  const json expect = partition_to_json(st);
  if (stored != expect)
    throw ConfigError("partition artifact does not match the config: " + path);
}

double pick_dt(const RunConfig& cfg, const SparsePencil& original) {
  if (cfg.solver.dt) return *cfg.solver.dt;
  return cfg.solver.safety * fine_cfl(original);
}

Wavelet pick_wavelet(const RunConfig& cfg) {
  Wavelet w = cfg.solver.wavelet;
  if (w.omega_cut <= 0.0) w.omega_cut = cfg.rom.omega_max;
  return w;
}

void write_metadata(const std::string& path, const RunConfig& cfg, double dt, long steps,
                    double wall_seconds, const json& extra) {
  json meta;
  meta["dt"] = dt;
  meta["steps"] = steps;
  meta["wall_seconds"] = wall_seconds;
  meta["seed"] = cfg.seed;
  meta["wavelet"] = {{"kind", Wavelet::to_string(cfg.solver.wavelet.kind)},
                     {"omega_cut", pick_wavelet(cfg).omega_cut},
                     {"width_factor", cfg.solver.wavelet.width_factor},
                     {"delay_factor", cfg.solver.wavelet.delay_factor}};
  meta.update(extra);
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write metadata: " + path);
  out << meta.dump(2) << "\n";
}

}  // namespace

std::string cmd_partition(const RunConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  Staged st = stage_partition(cfg);
  const std::string path = (fs::path(out_dir) / "partition.json").string();
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write partition artifact: " + path);
  out << partition_to_json(st).dump(2) << "\n";
  return path;
}

std::string cmd_build_rom(const RunConfig& cfg, const std::string& partition_file,
                          const std::string& out_dir, int threads) {
  Staged st = stage_partition(cfg);
  verify_partition_artifact(st, partition_file);

  BoundaryBasis basis = build_boundary_basis(st.pencil, st.partition, cfg.rom);
  SourceReceiver io = make_source(st.pencil, cfg.source,
                                  cfg.source_kind == "taper" ? SourceKind::Taper
                                  : cfg.source_kind == "unit_impulse" ? SourceKind::UnitImpulse
                                                                      : SourceKind::Point,
                                  cfg.taper_axis, cfg.taper_halfwidth);
  set_receiver(io, st.pencil, cfg.receiver);
  auto roms = build_all_roms(st.partition, st.splits, basis, io.g, io.q, cfg.rom, threads);
  write_rom_archive(out_dir, roms, basis, cfg.rom);
  return out_dir;
}

std::string cmd_simulate(const RunConfig& cfg, const std::string& rom_dir,
                         const std::string& out_dir) {
  fs::create_directories(out_dir);
  Staged st = stage_partition(cfg);
  RomArchive ar = read_rom_archive(rom_dir);
  if (static_cast<int>(ar.roms.size()) != st.partition.num_cells())
    throw ConfigError("ROM archive cell count does not match the partition");
  MultiscaleSystem sys =
      assemble_system(st.partition, ar.basis, std::move(ar.roms), st.pencil.B);

  const double dt = pick_dt(cfg, st.original_pencil);
  const Wavelet w = pick_wavelet(cfg);
  const long energy_stride =
      cfg.solver.energy_stride > 0 ? cfg.solver.energy_stride : 0;

  const auto t0 = std::chrono::steady_clock::now();
  RunResult res = run_simulation(sys, w, cfg.solver.t_final, dt,
                                 cfg.solver.corner_correction, energy_stride);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const std::string trace_path = (fs::path(out_dir) / "trace.csv").string();
  write_trace_csv(res.trace, trace_path);

  json extra;
  extra["kind"] = "multiscale";
  extra["m"] = cfg.rom.m;
  json kt = json::array();
  for (const auto& r : sys.roms) kt.push_back(r.ktilde);
  extra["ktilde_per_cell"] = kt;
  extra["reduced_dof"] = sys.reduced_dof();
  extra["fine_dof"] = st.original_pencil.n();
  extra["flops_per_step"] = sys.flops_per_step();
  extra["corner_correction"] = cfg.solver.corner_correction;
  extra["energy_times"] = res.energy_times;
  extra["energy_values"] = res.energy_values;
  write_metadata((fs::path(out_dir) / "trace.meta.json").string(), cfg, dt, res.steps, wall,
                 extra);
  return trace_path;
}

std::string cmd_reference(const RunConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  GridMedium medium = build_medium(cfg.medium);
  SparsePencil pencil = medium.ndim() == 1 ? assemble_1d(medium) : assemble_nd(medium);
  SourceReceiver io = make_source(pencil, cfg.source,
                                  cfg.source_kind == "taper" ? SourceKind::Taper
                                  : cfg.source_kind == "unit_impulse" ? SourceKind::UnitImpulse
                                                                      : SourceKind::Point,
                                  cfg.taper_axis, cfg.taper_halfwidth);
  set_receiver(io, pencil, cfg.receiver);

  const double dt = pick_dt(cfg, pencil);
  const Wavelet w = pick_wavelet(cfg);

  const auto t0 = std::chrono::steady_clock::now();
  Trace trace = fine_leapfrog(pencil, io.g, io.q, w, cfg.solver.t_final, dt);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const std::string trace_path = (fs::path(out_dir) / "reference.csv").string();
  write_trace_csv(trace, trace_path);
  json extra;
  extra["kind"] = "reference";
  extra["fine_dof"] = pencil.n();
  extra["flops_per_step"] = 2 * static_cast<long>(pencil.A.nonZeros()) + 4 * pencil.n();
  write_metadata((fs::path(out_dir) / "reference.meta.json").string(), cfg, dt,
                 static_cast<long>(trace.times.size()) - 1, wall, extra);
  return trace_path;
}

ComparisonReport cmd_compare(const std::string& trace_a, const std::string& trace_b,
                             const std::string& out_file) {
  Trace a = read_trace_csv(trace_a);
  Trace b = read_trace_csv(trace_b);
  ComparisonReport rep = compare_traces(a, b);

  json j;
  j["max_abs_error"] = rep.max_abs_error;
  j["rel_l2_error"] = rep.rel_l2_error;
  j["steps_a"] = rep.steps_a;
  j["steps_b"] = rep.steps_b;
  j["dt_a"] = rep.dt_a;
  j["dt_b"] = rep.dt_b;
  for (const auto& [name, path] : {std::pair{"meta_a", trace_a}, {"meta_b", trace_b}}) {
    const fs::path meta = fs::path(path).replace_extension(".meta.json");
    if (fs::exists(meta)) {
      std::ifstream in(meta);
      json m;
      in >> m;
      j[name] = {{"wall_seconds", m.value("wall_seconds", 0.0)},
                 {"kind", m.value("kind", "")},
                 {"fine_dof", m.value("fine_dof", 0L)},
                 {"reduced_dof", m.value("reduced_dof", 0L)}};
    }
  }
  if (!out_file.empty()) {
    std::ofstream out(out_file);
    if (!out) throw ConfigError("cannot write comparison report: " + out_file);
    out << j.dump(2) << "\n";
  }
  return rep;
}

std::string cmd_convergence(const RunConfig& cfg, const std::string& sweep,
                            const std::string& out_dir) {
  const auto eq = sweep.find('=');
  if (eq == std::string::npos) throw ConfigError("sweep must look like m=2:5 or basis=4:12:2");
  const std::string what = sweep.substr(0, eq);
  if (what != "m" && what != "basis") throw ConfigError("unknown sweep parameter: " + what);
  int lo = 0, hi = 0, step = 1;
  {
    std::string rest = sweep.substr(eq + 1);
    const auto c1 = rest.find(':');
    if (c1 == std::string::npos) {
      lo = hi = std::stoi(rest);
    } else {
      lo = std::stoi(rest.substr(0, c1));
      std::string tail = rest.substr(c1 + 1);
      const auto c2 = tail.find(':');
      hi = std::stoi(c2 == std::string::npos ? tail : tail.substr(0, c2));
      if (c2 != std::string::npos) step = std::stoi(tail.substr(c2 + 1));
    }
  }
  if (step < 1 || hi < lo) throw ConfigError("empty sweep range");

  fs::create_directories(out_dir);
  Staged st = stage_partition(cfg);
  SourceReceiver io = make_source(st.pencil, cfg.source);
  set_receiver(io, st.pencil, cfg.receiver);
  SourceReceiver io_fine = make_source(st.original_pencil, cfg.source);
  set_receiver(io_fine, st.original_pencil, cfg.receiver);

  const double dt = pick_dt(cfg, st.original_pencil);
  const Wavelet w = pick_wavelet(cfg);
  Trace ref = fine_leapfrog(st.original_pencil, io_fine.g, io_fine.q, w, cfg.solver.t_final, dt);

  // one shared Gramian basis per basis setting; m sweeps reuse it
  RomOptions base = cfg.rom;
  BoundaryBasis shared = build_boundary_basis(st.pencil, st.partition, base);

  const std::string path = (fs::path(out_dir) / ("convergence_" + what + ".csv")).string();
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write convergence table: " + path);
  out << what << ",max_abs_error,rel_l2_error,reduced_dof\n";

  for (int v = lo; v <= hi; v += step) {
    RomOptions opt = base;
    BoundaryBasis* basis = &shared;
    BoundaryBasis local;
    if (what == "m") {
      opt.m = v;
    } else {
      opt.max_basis_per_interface = v;
      local = build_boundary_basis(st.pencil, st.partition, opt);
      basis = &local;
    }
    auto roms = build_all_roms(st.partition, st.splits, *basis, io.g, io.q, opt);
    MultiscaleSystem sys = assemble_system(st.partition, *basis, std::move(roms), st.pencil.B);
    RunResult res = run_simulation(sys, w, cfg.solver.t_final, dt);
    ComparisonReport rep = compare_traces(res.trace, ref);
    out << v << "," << rep.max_abs_error << "," << rep.rel_l2_error << ","
        << sys.reduced_dof() << "\n";
  }
  return path;
}

}  // namespace mswave
