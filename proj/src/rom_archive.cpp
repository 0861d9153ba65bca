#include "mswave/rom_archive.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace mswave {

namespace {

constexpr char kMagic[8] = {'M', 'S', 'W', 'R', 'O', 'M', '1', '\0'};

void put_u64(std::FILE* f, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  std::fwrite(b, 1, 8, f);
}

std::uint64_t get_u64(std::FILE* f) {
  unsigned char b[8];
  if (std::fread(b, 1, 8, f) != 8) throw ConfigError("truncated ROM container");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

void put_doubles(std::FILE* f, const double* data, size_t count) {
  static_assert(sizeof(double) == 8);
  std::fwrite(data, sizeof(double), count, f);
}

void get_doubles(std::FILE* f, double* data, size_t count) {
  if (std::fread(data, sizeof(double), count, f) != count)
    throw ConfigError("truncated ROM container payload");
}

void put_mat(std::FILE* f, const Mat& m) {
  put_u64(f, m.rows());
  put_u64(f, m.cols());
  put_doubles(f, m.data(), static_cast<size_t>(m.size()));
}

Mat get_mat(std::FILE* f) {
  const auto rows = static_cast<long>(get_u64(f));
  const auto cols = static_cast<long>(get_u64(f));
  if (rows < 0 || cols < 0 || rows > (1L << 24) || cols > (1L << 24))
    throw ConfigError("implausible matrix dimensions in ROM container");
  Mat m(rows, cols);
  get_doubles(f, m.data(), static_cast<size_t>(m.size()));
  return m;
}

std::string cell_filename(int cell) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "cell_%04d.bin", cell);
  return buf;
}

}  // namespace

void write_rom_archive(const std::string& dir, const std::vector<SubdomainROM>& roms,
                       const BoundaryBasis& basis, const RomOptions& opt) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  nlohmann::json manifest;
  manifest["format"] = "mswave-rom-archive";
  manifest["version"] = 1;
  manifest["num_cells"] = roms.size();
  manifest["num_interfaces"] = basis.S.size();
  manifest["omega_max"] = basis.omega_max;
  manifest["epsilon"] = basis.epsilon;
  manifest["m"] = opt.m;
  manifest["max_basis_per_interface"] = opt.max_basis_per_interface;

  nlohmann::json cells = nlohmann::json::array();
  for (const auto& rom : roms) {
    nlohmann::json c;
    c["file"] = cell_filename(rom.cell);
    c["ktilde"] = rom.ktilde;
    c["m"] = rom.m;
    c["interfaces"] = rom.iface_ids;
    cells.push_back(c);

    const fs::path path = fs::path(dir) / cell_filename(rom.cell);
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw ConfigError("cannot write ROM container: " + path.string());
    std::fwrite(kMagic, 1, 8, f);
    put_u64(f, static_cast<std::uint64_t>(rom.cell));
    put_u64(f, static_cast<std::uint64_t>(rom.m));
    put_u64(f, static_cast<std::uint64_t>(rom.ktilde));
    put_u64(f, static_cast<std::uint64_t>(rom.iface_ids.size()));
    put_doubles(f, &rom.shift, 1);
    for (size_t li = 0; li < rom.iface_ids.size(); ++li) {
      put_u64(f, static_cast<std::uint64_t>(rom.iface_ids[li]));
      put_mat(f, basis.S[rom.iface_ids[li]]);
      put_u64(f, static_cast<std::uint64_t>(rom.g_proj[li].size()));
      put_doubles(f, rom.g_proj[li].data(), rom.g_proj[li].size());
      put_doubles(f, rom.q_proj[li].data(), rom.q_proj[li].size());
    }
    for (const Mat& m : rom.ladder_hat) put_mat(f, m);
    for (const Mat& m : rom.ladder) put_mat(f, m);
    std::fclose(f);
  }
  manifest["cells"] = cells;

  std::ofstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw ConfigError("cannot write ROM manifest in " + dir);
  mf << manifest.dump(2) << "\n";
}

RomArchive read_rom_archive(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw ConfigError("missing manifest.json in " + dir);
  nlohmann::json manifest;
  mf >> manifest;
  if (manifest.value("format", "") != "mswave-rom-archive")
    throw ConfigError("not a ROM archive: " + dir);

  RomArchive ar;
  ar.opt.m = manifest["m"].get<int>();
  ar.opt.omega_max = manifest["omega_max"].get<double>();
  ar.opt.epsilon_rel = manifest["epsilon"].get<double>();
  ar.opt.max_basis_per_interface = manifest.value("max_basis_per_interface", 0);
  ar.basis.omega_max = ar.opt.omega_max;
  ar.basis.epsilon = ar.opt.epsilon_rel;
  const size_t n_ifaces = manifest["num_interfaces"].get<size_t>();
  ar.basis.S.resize(n_ifaces);
  ar.basis.kept_eigs.resize(n_ifaces);
  ar.basis.tail.assign(n_ifaces, 0.0);

  for (const auto& c : manifest["cells"]) {
    const fs::path path = fs::path(dir) / c["file"].get<std::string>();
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw ConfigError("missing ROM container: " + path.string());
    char magic[8];
    if (std::fread(magic, 1, 8, f) != 8 || std::memcmp(magic, kMagic, 8) != 0) {
      std::fclose(f);
      throw ConfigError("bad magic in ROM container: " + path.string());
    }
    SubdomainROM rom;
    rom.cell = static_cast<int>(get_u64(f));
    rom.m = static_cast<int>(get_u64(f));
    rom.ktilde = static_cast<int>(get_u64(f));
    const auto nif = get_u64(f);
    get_doubles(f, &rom.shift, 1);
    rom.iface_offsets = {0};
    for (std::uint64_t i = 0; i < nif; ++i) {
      const int fid = static_cast<int>(get_u64(f));
      rom.iface_ids.push_back(fid);
      Mat S = get_mat(f);
      const auto glen = static_cast<long>(get_u64(f));
      Vec g(glen), q(glen);
      get_doubles(f, g.data(), glen);
      get_doubles(f, q.data(), glen);
      if (S.cols() != glen) {
        std::fclose(f);
        throw ConfigError("interface basis / projected I/O size mismatch in " + path.string());
      }
      if (ar.basis.S[fid].size() == 0) {
        ar.basis.S[fid] = S;
      } else if (ar.basis.S[fid].rows() != S.rows() || ar.basis.S[fid].cols() != S.cols() ||
                 std::memcmp(ar.basis.S[fid].data(), S.data(),
                             sizeof(double) * S.size()) != 0) {
        std::fclose(f);
        throw ConfigError("mismatched interface bases between neighbor cells (interface " +
                          std::to_string(fid) + ")");
      }
      rom.g_proj.push_back(std::move(g));
      rom.q_proj.push_back(std::move(q));
      rom.iface_offsets.push_back(rom.iface_offsets.back() + static_cast<int>(glen));
    }
    for (int k = 0; k < rom.m; ++k) rom.ladder_hat.push_back(get_mat(f));
    for (int k = 0; k < rom.m; ++k) rom.ladder.push_back(get_mat(f));
    std::fclose(f);

    if (rom.iface_offsets.back() != rom.ktilde)
      throw ConfigError("inconsistent ktilde in " + path.string());
    ar.roms.push_back(std::move(rom));
  }

  std::sort(ar.roms.begin(), ar.roms.end(),
            [](const SubdomainROM& a, const SubdomainROM& b) { return a.cell < b.cell; });
  return ar;
}

}  // namespace mswave
