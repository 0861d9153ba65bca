#ifndef MSWAVE_CLI_COMMANDS_HPP
#define MSWAVE_CLI_COMMANDS_HPP

#include <string>

#include "mswave/config.hpp"
#include "mswave/trace_io.hpp"

namespace mswave {

// Staged pipeline commands behind the CLI.  All artifacts are deterministic
// functions of the config and input files.

// Writes <out>/partition.json describing cells, interfaces and hanging nodes.
std::string cmd_partition(const RunConfig& cfg, const std::string& out_dir);

// Builds the per-cell ROM archive under <out>; verifies the partition
// artifact matches the config before building.
std::string cmd_build_rom(const RunConfig& cfg, const std::string& partition_file,
                          const std::string& out_dir, int threads = 1);

// On-line stage: loads the archive, time-steps the coupled system, writes
// <out>/trace.csv and <out>/trace.meta.json (wavelet, dt, energy log).
std::string cmd_simulate(const RunConfig& cfg, const std::string& rom_dir,
                         const std::string& out_dir);

// Full fine-grid reference run with the same wavelet and step policy.
std::string cmd_reference(const RunConfig& cfg, const std::string& out_dir);

// Error metrics between two traces; metadata sidecars are picked up when
// present.  Writes report JSON when out_file is nonempty.
ComparisonReport cmd_compare(const std::string& trace_a, const std::string& trace_b,
                             const std::string& out_file = "");

// Sweeps rom.m (sweep = "m=lo:hi") or the per-interface basis cap
// (sweep = "basis=lo:hi[:step]") and writes a CSV table of errors against the
// fine reference.
std::string cmd_convergence(const RunConfig& cfg, const std::string& sweep,
                            const std::string& out_dir);

}  // namespace mswave

#endif  // MSWAVE_CLI_COMMANDS_HPP
