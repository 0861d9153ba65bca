#ifndef MSWAVE_CONFIG_HPP
#define MSWAVE_CONFIG_HPP

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "mswave/fine_grid.hpp"
#include "mswave/partition.hpp"
#include "mswave/romgen.hpp"
#include "mswave/wavelet.hpp"

namespace mswave {

struct MediumConfig {
  std::vector<int> dims;
  double h = 1.0;
  std::string kind = "homogeneous";  // homogeneous | blocks | raw
  double sigma = 1.0;
  double rho = 1.0;
  // kind == blocks: axis-aligned boxes [lo, hi) in node coordinates overriding sigma
  struct Block {
    std::array<int, 3> lo{0, 0, 0}, hi{0, 0, 0};
    double sigma = 1.0;
  };
  std::vector<Block> blocks;
  std::string raw_sigma_path;  // kind == raw: row-major float64-LE, one value per node
};

struct PartitionConfig {
  std::string mode = "regular";  // regular | divide_and_conquer
  std::vector<int> cells_per_axis;
  long target_cell_size = 0;
  bool remove_corners = true;
};

struct SolverConfig {
  double safety = 0.9;
  std::optional<double> dt;
  double t_final = 1.0;
  Wavelet wavelet;
  bool corner_correction = false;
  long energy_stride = 0;
};

struct RunConfig {
  MediumConfig medium;
  PartitionConfig partition;
  RomOptions rom;
  SolverConfig solver;
  std::array<int, 3> source{0, 0, 0};
  std::array<int, 3> receiver{0, 0, 0};
  std::string source_kind = "point";  // point | unit_impulse | taper
  int taper_axis = 0;
  double taper_halfwidth = 3.0;
  unsigned seed = 0;  // recorded in metadata; reserved for randomized media
};

RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& json_text);

GridMedium build_medium(const MediumConfig& cfg);

struct Staged {
  SparsePencil pencil;           // corner-modified when remove_corners is set
  Partition partition;
  std::vector<SubdomainSplit> splits;
  SparsePencil original_pencil;  // pre-removal pencil for the fine reference
};

// Deterministic medium -> pencil -> partition -> corner removal pipeline.
Staged stage_partition(const RunConfig& cfg);

}  // namespace mswave

#endif  // MSWAVE_CONFIG_HPP
