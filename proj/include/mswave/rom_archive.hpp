#ifndef MSWAVE_ROM_ARCHIVE_HPP
#define MSWAVE_ROM_ARCHIVE_HPP

#include <string>
#include <vector>

#include "mswave/romgen.hpp"

namespace mswave {

// Off-line artifact: a manifest.json plus one binary container per cell
// (64-bit little-endian floats, explicit dimension headers) holding m,
// ktilde, shift, the coefficient ladders, interface bases and projected I/O.
void write_rom_archive(const std::string& dir, const std::vector<SubdomainROM>& roms,
                       const BoundaryBasis& basis, const RomOptions& opt);

struct RomArchive {
  std::vector<SubdomainROM> roms;
  BoundaryBasis basis;
  RomOptions opt;
};

// Reload; interface bases duplicated across neighbor cells must agree
// bit-exactly or the archive is rejected.
RomArchive read_rom_archive(const std::string& dir);

}  // namespace mswave

#endif  // MSWAVE_ROM_ARCHIVE_HPP
