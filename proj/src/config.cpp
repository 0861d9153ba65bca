#include "mswave/config.hpp"

#include <fstream>

#include "json.hpp"

namespace mswave {

namespace {

using nlohmann::json;

std::array<int, 3> to_coord(const json& j) {
  std::array<int, 3> c{0, 0, 0};
  if (!j.is_array() || j.size() < 1 || j.size() > 3)
    throw ConfigError("coordinate must be an array of 1-3 integers");
  for (size_t i = 0; i < j.size(); ++i) c[i] = j[i].get<int>();
  return c;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }

  RunConfig cfg;
  const json& m = j.at("medium");
  cfg.medium.dims = m.at("dims").get<std::vector<int>>();
  cfg.medium.h = m.at("h").get<double>();
  cfg.medium.kind = m.value("kind", "homogeneous");
  cfg.medium.sigma = m.value("sigma", 1.0);
  cfg.medium.rho = m.value("rho", 1.0);
  if (m.contains("blocks")) {
    for (const auto& b : m["blocks"]) {
      MediumConfig::Block blk;
      blk.lo = to_coord(b.at("lo"));
      blk.hi = to_coord(b.at("hi"));
      blk.sigma = b.at("sigma").get<double>();
      cfg.medium.blocks.push_back(blk);
    }
  }
  cfg.medium.raw_sigma_path = m.value("raw_sigma", "");

  if (j.contains("partition")) {
    const json& p = j["partition"];
    cfg.partition.mode = p.value("mode", "regular");
    if (p.contains("cells_per_axis"))
      cfg.partition.cells_per_axis = p["cells_per_axis"].get<std::vector<int>>();
    cfg.partition.target_cell_size = p.value("target_cell_size", 0L);
    cfg.partition.remove_corners = p.value("remove_corners", true);
  }

  if (j.contains("rom")) {
    const json& r = j["rom"];
    cfg.rom.m = r.value("m", 4);
    cfg.rom.omega_max = r.value("omega_max", cfg.rom.omega_max);
    cfg.rom.epsilon_rel = r.value("epsilon_rel", 1e-6);
    cfg.rom.max_basis_per_interface = r.value("max_basis_per_interface", 0);
    cfg.rom.shift = r.value("shift", 0.0);
    cfg.rom.full_collar = r.value("full_collar", false);
  }

  if (j.contains("solver")) {
    const json& s = j["solver"];
    cfg.solver.safety = s.value("safety", 0.9);
    if (s.contains("dt")) cfg.solver.dt = s["dt"].get<double>();
    cfg.solver.t_final = s.value("t_final", 1.0);
    cfg.solver.corner_correction = s.value("corner_correction", false);
    cfg.solver.energy_stride = s.value("energy_stride", 0L);
    if (s.contains("wavelet")) {
      const json& w = s["wavelet"];
      cfg.solver.wavelet.kind =
          Wavelet::kind_from_string(w.value("kind", "gaussian_derivative"));
      cfg.solver.wavelet.omega_cut = w.value("omega_cut", cfg.rom.omega_max);
      cfg.solver.wavelet.width_factor = w.value("width_factor", 3.5);
      cfg.solver.wavelet.delay_factor = w.value("delay_factor", 6.0);
    } else {
      cfg.solver.wavelet.omega_cut = cfg.rom.omega_max;
    }
  } else {
    cfg.solver.wavelet.omega_cut = cfg.rom.omega_max;
  }

  cfg.source = to_coord(j.at("source").at("location"));
  cfg.receiver = to_coord(j.at("receiver").at("location"));
  if (j["source"].contains("kind")) cfg.source_kind = j["source"]["kind"].get<std::string>();
  cfg.taper_axis = j["source"].value("taper_axis", 0);
  cfg.taper_halfwidth = j["source"].value("taper_halfwidth", 3.0);
  cfg.seed = j.value("seed", 0u);

  if (cfg.rom.m < 1) throw ConfigError("rom.m must be >= 1");
  if (cfg.rom.omega_max <= 0.0) throw ConfigError("rom.omega_max must be positive");
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config(text);
}

GridMedium build_medium(const MediumConfig& cfg) {
  GridMedium medium = make_uniform_medium(cfg.dims, cfg.h, cfg.sigma, cfg.rho);
  if (cfg.kind == "homogeneous") return medium;

  if (cfg.kind == "blocks") {
    const int nd = medium.ndim();
    std::array<int, 3> c{0, 0, 0};
    std::function<void(int)> rec = [&](int a) {
      if (a == nd) {
        for (const auto& b : cfg.blocks) {
          bool inside = true;
          for (int d = 0; d < nd; ++d)
            if (c[d] < b.lo[d] || c[d] >= b.hi[d]) { inside = false; break; }
          if (inside) medium.sigma[medium.node_id(c)] = b.sigma;
        }
        return;
      }
      for (c[a] = 0; c[a] < medium.dims[a]; ++c[a]) rec(a + 1);
    };
    rec(0);
    return medium;
  }

  if (cfg.kind == "raw") {
    std::ifstream in(cfg.raw_sigma_path, std::ios::binary);
    if (!in) throw ConfigError("cannot open raw sigma grid: " + cfg.raw_sigma_path);
    in.read(reinterpret_cast<char*>(medium.sigma.data()),
            static_cast<std::streamsize>(sizeof(double) * medium.node_count()));
    if (in.gcount() != static_cast<std::streamsize>(sizeof(double) * medium.node_count()))
      throw ConfigError("raw sigma grid shorter than dims require");
    return medium;
  }

  throw ConfigError("unknown medium kind: " + cfg.kind);
}

Staged stage_partition(const RunConfig& cfg) {
  Staged st;
  const GridMedium medium = build_medium(cfg.medium);
  st.original_pencil = medium.ndim() == 1 ? assemble_1d(medium) : assemble_nd(medium);

  PartitionResult pr;
  if (cfg.partition.mode == "regular") {
    if (cfg.partition.cells_per_axis.empty())
      throw ConfigError("regular partition needs cells_per_axis");
    pr = regular_partition(st.original_pencil, cfg.partition.cells_per_axis);
  } else if (cfg.partition.mode == "divide_and_conquer") {
    if (cfg.partition.target_cell_size <= 0)
      throw ConfigError("divide_and_conquer needs target_cell_size");
    pr = divide_and_conquer(st.original_pencil, cfg.partition.target_cell_size);
  } else {
    throw ConfigError("unknown partition mode: " + cfg.partition.mode);
  }

  if (cfg.partition.remove_corners && !pr.partition.corner_set.empty()) {
    CornerRemovalResult crr = remove_corner_set(st.original_pencil, pr.partition, pr.splits);
    st.pencil = std::move(crr.pencil);
    st.partition = std::move(crr.partition);
    st.splits = std::move(crr.splits);
  } else {
    st.pencil = st.original_pencil;
    st.partition = std::move(pr.partition);
    st.splits = std::move(pr.splits);
  }
  return st;
}

}  // namespace mswave
