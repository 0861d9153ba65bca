#ifndef MSWAVE_PARTITION_HPP
#define MSWAVE_PARTITION_HPP

#include <functional>
#include <utility>
#include <vector>

#include "mswave/fine_grid.hpp"
#include "mswave/types.hpp"

namespace mswave {

// Per-cell share of the split pencil, indexed by Partition::cells[i].
struct SubdomainSplit {
  SpMat A;
  Vec B;
};

struct Interface {
  int ci = -1, cj = -1;        // owning cells, ci < cj
  std::vector<long> nodes;     // sorted global node ids
};

struct HangingNode {
  long id = -1;      // global id of the copy
  long parent = -1;  // removed corner node
  int ci = -1, cj = -1;
};

struct Partition {
  long n_nodes = 0;
  std::vector<std::vector<long>> cells;      // sorted global ids, one list per cell
  std::vector<std::vector<long>> interiors;  // cells minus all interfaces
  std::vector<std::vector<long>> boundaries; // union of the cell's interfaces
  std::vector<Interface> interfaces;         // lexicographic by (ci, cj)
  std::vector<long> skeleton;                // union of interfaces, sorted
  std::vector<long> corner_set;              // nodes on >= 2 interfaces (empty after removal)
  std::vector<HangingNode> hanging;          // populated by remove_corner_set

  int num_cells() const { return static_cast<int>(cells.size()); }
  std::vector<int> cell_interfaces(int c) const;  // interface indices touching cell c
};

struct SeparatorSplit {
  std::vector<long> interior1, interior2, separator;
};

// Constructive two-way separator: interior2 = nodes not adjacent to the seed,
// interior1 = nodes not adjacent to interior2, separator = the rest.
SeparatorSplit find_separator(const SpMat& A, const std::vector<long>& seed_interior);

// Algorithm-style two-way operator split with interface weights alpha in
// [0,1] and mass weights beta in (0,1); side 1 receives alpha and beta.
std::pair<SubdomainSplit, SubdomainSplit> split_two(
    const SpMat& A, const Vec& B, const SeparatorSplit& sep,
    const std::function<double(long, long)>& alpha, const std::function<double(long)>& beta);

std::pair<SubdomainSplit, SubdomainSplit> split_two(const SpMat& A, const Vec& B,
                                                    const SeparatorSplit& sep,
                                                    double alpha = 0.5, double beta = 0.5);

struct PartitionResult {
  Partition partition;
  std::vector<SubdomainSplit> splits;
};

// Recursive two-way splitting until every cell has at most target_cell_size
// nodes or stops being splittable.  Seeds are axis-median half-sets when grid
// coordinates are available, BFS half-sets from a peripheral node otherwise.
PartitionResult divide_and_conquer(const SparsePencil& pencil, long target_cell_size);

// Regular Cartesian partition with cells_per_axis cells along each axis;
// adjacent cells share their skeleton line/face.  Interface off-diagonals,
// interface masses and tangential stiffness are split by shared-cell counts.
PartitionResult regular_partition(const SparsePencil& pencil, const std::vector<int>& cells_per_axis);

struct CornerRemovalResult {
  SparsePencil pencil;
  Partition partition;
  std::vector<SubdomainSplit> splits;
};

// Replaces every corner-set node by one hanging copy per surviving interface;
// after removal the interfaces are pairwise disjoint.  No-op when the corner
// set is empty.
CornerRemovalResult remove_corner_set(const SparsePencil& pencil, const Partition& partition,
                                      const std::vector<SubdomainSplit>& splits);

// Sum_i P_i (A_i + w2 B_i) P_i^T for identity checks.
CSpMat reassemble_pencil(const Partition& partition, const std::vector<SubdomainSplit>& splits,
                         Cpx w2);

// Max-abs deviation of the reassembled pencil from A + w2 B, relative to the
// max-abs entry of the target.
double splitting_identity_error(const SpMat& A, const Vec& B, const Partition& partition,
                                const std::vector<SubdomainSplit>& splits, Cpx w2);

}  // namespace mswave

#endif  // MSWAVE_PARTITION_HPP
