#include "mswave/partition.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <numeric>
#include <set>

namespace mswave {

namespace {

// Neighborhood of a node set: the set itself plus every node coupled to it.
std::vector<char> adjacency_mask(const SpMat& A, const std::vector<char>& in_set) {
  std::vector<char> adj(in_set.begin(), in_set.end());
  for (int col = 0; col < A.outerSize(); ++col) {
    if (!in_set[col]) continue;
    for (SpMat::InnerIterator it(A, col); it; ++it) adj[it.row()] = 1;
  }
  return adj;
}

std::vector<long> mask_to_list(const std::vector<char>& mask, char value) {
  std::vector<long> out;
  for (long i = 0; i < static_cast<long>(mask.size()); ++i)
    if (mask[i] == value) out.push_back(i);
  return out;
}

}  // namespace

std::vector<int> Partition::cell_interfaces(int c) const {
  std::vector<int> out;
  for (int f = 0; f < static_cast<int>(interfaces.size()); ++f)
    if (interfaces[f].ci == c || interfaces[f].cj == c) out.push_back(f);
  return out;
}

SeparatorSplit find_separator(const SpMat& A, const std::vector<long>& seed_interior) {
  const long n = A.rows();
  if (seed_interior.empty()) throw NumericalError("not splittable: empty seed");
  std::vector<char> seed(n, 0);
  for (long k : seed_interior) seed.at(k) = 1;

  const std::vector<char> adj_seed = adjacency_mask(A, seed);
  if (std::find(adj_seed.begin(), adj_seed.end(), 0) == adj_seed.end())
    throw NumericalError("not splittable: seed neighborhood covers the whole graph");

  std::vector<char> int2(n, 0);
  for (long i = 0; i < n; ++i) int2[i] = adj_seed[i] ? 0 : 1;
  const std::vector<char> adj2 = adjacency_mask(A, int2);

  SeparatorSplit out;
  out.interior2 = mask_to_list(int2, 1);
  for (long i = 0; i < n; ++i) {
    if (!adj2[i])
      out.interior1.push_back(i);
    else if (!int2[i])
      out.separator.push_back(i);
  }
  return out;
}

std::pair<SubdomainSplit, SubdomainSplit> split_two(
    const SpMat& A, const Vec& B, const SeparatorSplit& sep,
    const std::function<double(long, long)>& alpha, const std::function<double(long)>& beta) {
  const long n = A.rows();
  enum : char { kInt1, kInt2, kSep };
  std::vector<char> side(n, kSep);
  for (long k : sep.interior1) side.at(k) = kInt1;
  for (long k : sep.interior2) side.at(k) = kInt2;
  if (sep.interior1.size() + sep.interior2.size() + sep.separator.size() !=
      static_cast<size_t>(n))
    throw ConfigError("separator triple does not cover the node set");

  // Local node lists (sorted): cell i = interior_i + separator.
  std::vector<long> nodes1 = sep.interior1, nodes2 = sep.interior2;
  nodes1.insert(nodes1.end(), sep.separator.begin(), sep.separator.end());
  nodes2.insert(nodes2.end(), sep.separator.begin(), sep.separator.end());
  std::sort(nodes1.begin(), nodes1.end());
  std::sort(nodes2.begin(), nodes2.end());

  std::vector<long> loc1(n, -1), loc2(n, -1);
  for (long i = 0; i < static_cast<long>(nodes1.size()); ++i) loc1[nodes1[i]] = i;
  for (long i = 0; i < static_cast<long>(nodes2.size()); ++i) loc2[nodes2[i]] = i;

  std::vector<Triplet> t1, t2;
  Vec s1 = Vec::Zero(n), s2 = Vec::Zero(n);

  for (int col = 0; col < A.outerSize(); ++col) {
    for (SpMat::InnerIterator it(A, col); it; ++it) {
      const long k = it.row(), l = it.col();
      if (k == l) continue;
      const char sk = side[k], sl = side[l];
      if ((sk == kInt1 && sl == kInt2) || (sk == kInt2 && sl == kInt1))
        throw ConfigError("separator triple is not separating: interiors are coupled");
      if (sk == kInt1 || sl == kInt1) {
        t1.emplace_back(loc1[k], loc1[l], it.value());
        s1[k] += std::abs(it.value());
      } else if (sk == kInt2 || sl == kInt2) {
        t2.emplace_back(loc2[k], loc2[l], it.value());
        s2[k] += std::abs(it.value());
      } else {  // both on the separator
        const double a = alpha(std::min(k, l), std::max(k, l));
        if (a < 0.0 || a > 1.0) throw ConfigError("alpha weight outside [0,1]");
        if (a != 0.0) {
          t1.emplace_back(loc1[k], loc1[l], a * it.value());
          s1[k] += std::abs(a * it.value());
        }
        if (a != 1.0) {
          t2.emplace_back(loc2[k], loc2[l], (1.0 - a) * it.value());
          s2[k] += std::abs((1.0 - a) * it.value());
        }
      }
    }
  }

  SubdomainSplit c1, c2;
  c1.B = Vec::Zero(nodes1.size());
  c2.B = Vec::Zero(nodes2.size());

  for (long k = 0; k < n; ++k) {
    const double akk = A.coeff(k, k);
    switch (side[k]) {
      case kInt1:
        t1.emplace_back(loc1[k], loc1[k], akk);
        c1.B[loc1[k]] = B[k];
        break;
      case kInt2:
        t2.emplace_back(loc2[k], loc2[k], akk);
        c2.B[loc2[k]] = B[k];
        break;
      default: {
        const double s = s1[k] + s2[k];
        if (s == 0.0) {
          if (akk != 0.0)
            throw NumericalError("degenerate interface row: zero couplings on both sides");
        } else {
          t1.emplace_back(loc1[k], loc1[k], akk * s1[k] / s);
          t2.emplace_back(loc2[k], loc2[k], akk * s2[k] / s);
        }
        const double b = beta(k);
        if (b <= 0.0 || b >= 1.0) throw ConfigError("beta weight outside (0,1)");
        c1.B[loc1[k]] = b * B[k];
        c2.B[loc2[k]] = (1.0 - b) * B[k];
      }
    }
  }

  c1.A.resize(nodes1.size(), nodes1.size());
  c1.A.setFromTriplets(t1.begin(), t1.end());
  c2.A.resize(nodes2.size(), nodes2.size());
  c2.A.setFromTriplets(t2.begin(), t2.end());
  c1.A.makeCompressed();
  c2.A.makeCompressed();
  return {std::move(c1), std::move(c2)};
}

std::pair<SubdomainSplit, SubdomainSplit> split_two(const SpMat& A, const Vec& B,
                                                    const SeparatorSplit& sep, double alpha,
                                                    double beta) {
  return split_two(
      A, B, sep, [alpha](long, long) { return alpha; }, [beta](long) { return beta; });
}

namespace {

struct WorkCell {
  std::vector<long> gnodes;  // sorted global ids
  SpMat A;
  Vec B;
  bool unsplittable = false;
};

// BFS ordering from `start` over the graph of A; returns nodes in
// (depth, index) order.
std::vector<long> bfs_order(const SpMat& A, long start) {
  const long n = A.rows();
  std::vector<int> depth(n, -1);
  std::vector<long> order;
  order.reserve(n);
  std::deque<long> queue{start};
  depth[start] = 0;
  while (!queue.empty()) {
    const long u = queue.front();
    queue.pop_front();
    order.push_back(u);
    std::vector<long> next;
    for (SpMat::InnerIterator it(A, u); it; ++it) {
      const long v = it.row();
      if (v != u && depth[v] < 0) {
        depth[v] = depth[u] + 1;
        next.push_back(v);
      }
    }
    std::sort(next.begin(), next.end());
    for (long v : next) queue.push_back(v);
  }
  // Unreached nodes (disconnected components) go last, in index order.
  for (long v = 0; v < n; ++v)
    if (depth[v] < 0) order.push_back(v);
  return order;
}

// Candidate seed halves, most preferred first.
std::vector<std::vector<long>> seed_candidates(const WorkCell& cell, const SparsePencil& pencil) {
  std::vector<std::vector<long>> out;
  const long n = cell.A.rows();
  if (n < 3) return out;

  // Axis-median half when grid coordinates cover the cell: gives straight
  // separators on tensor grids.
  if (!pencil.coords.empty()) {
    int best_axis = -1;
    long best_extent = 0;
    std::array<int, 2> best_range{};
    for (int a = 0; a < pencil.ndim; ++a) {
      int lo = std::numeric_limits<int>::max(), hi = std::numeric_limits<int>::min();
      for (long g : cell.gnodes) {
        lo = std::min(lo, pencil.coords[g][a]);
        hi = std::max(hi, pencil.coords[g][a]);
      }
      if (hi - lo > best_extent) {
        best_extent = hi - lo;
        best_axis = a;
        best_range = {lo, hi};
      }
    }
    if (best_axis >= 0 && best_extent >= 2) {
      const int med = (best_range[0] + best_range[1]) / 2;
      std::vector<long> half;
      for (long i = 0; i < n; ++i)
        if (pencil.coords[cell.gnodes[i]][best_axis] < med) half.push_back(i);
      if (!half.empty() && static_cast<long>(half.size()) < n) out.push_back(std::move(half));
    }
  }

  // BFS half-set from a peripheral node (double sweep), shrinking prefixes.
  const long u0 = bfs_order(cell.A, 0).back();
  const std::vector<long> order = bfs_order(cell.A, u0);
  for (long take = n / 2; take >= 1; take /= 2)
    out.emplace_back(order.begin(), order.begin() + take);
  return out;
}

Partition build_partition(long n_nodes, const std::vector<std::vector<long>>& cells) {
  Partition part;
  part.n_nodes = n_nodes;
  part.cells = cells;

  std::vector<std::vector<int>> owners(n_nodes);
  for (int c = 0; c < static_cast<int>(cells.size()); ++c)
    for (long g : cells[c]) owners[g].push_back(c);

  std::map<std::pair<int, int>, std::vector<long>> iface_nodes;
  part.interiors.assign(cells.size(), {});
  part.boundaries.assign(cells.size(), {});
  for (long g = 0; g < n_nodes; ++g) {
    const auto& own = owners[g];
    if (own.size() <= 1) {
      if (own.size() == 1) part.interiors[own[0]].push_back(g);
      continue;
    }
    part.skeleton.push_back(g);
    for (int c : own) part.boundaries[c].push_back(g);
    for (size_t i = 0; i < own.size(); ++i)
      for (size_t j = i + 1; j < own.size(); ++j)
        iface_nodes[{own[i], own[j]}].push_back(g);
    if (own.size() >= 3) part.corner_set.push_back(g);
  }
  for (auto& [key, nodes] : iface_nodes) {
    Interface f;
    f.ci = key.first;
    f.cj = key.second;
    f.nodes = std::move(nodes);
    part.interfaces.push_back(std::move(f));
  }
  return part;
}

}  // namespace

PartitionResult divide_and_conquer(const SparsePencil& pencil, long target_cell_size) {
  if (target_cell_size < 1) throw ConfigError("target cell size must be positive");
  std::vector<WorkCell> work(1);
  work[0].gnodes.resize(pencil.n());
  std::iota(work[0].gnodes.begin(), work[0].gnodes.end(), 0L);
  work[0].A = pencil.A;
  work[0].B = pencil.B;

  for (;;) {
    int pick = -1;
    for (int i = 0; i < static_cast<int>(work.size()); ++i) {
      if (!work[i].unsplittable && static_cast<long>(work[i].gnodes.size()) > target_cell_size) {
        pick = i;
        break;
      }
    }
    if (pick < 0) break;

    WorkCell cell = std::move(work[pick]);
    work.erase(work.begin() + pick);

    bool split_done = false;
    for (const auto& seed : seed_candidates(cell, pencil)) {
      SeparatorSplit sep;
      try {
        sep = find_separator(cell.A, seed);
      } catch (const NumericalError&) {
        continue;
      }
      auto [s1, s2] = split_two(cell.A, cell.B, sep, 0.5, 0.5);

      auto make_child = [&](const std::vector<long>& interior, SubdomainSplit&& s) {
        WorkCell child;
        std::vector<long> locals = interior;
        locals.insert(locals.end(), sep.separator.begin(), sep.separator.end());
        std::sort(locals.begin(), locals.end());
        child.gnodes.reserve(locals.size());
        for (long l : locals) child.gnodes.push_back(cell.gnodes[l]);
        child.A = std::move(s.A);
        child.B = std::move(s.B);
        return child;
      };
      work.push_back(make_child(sep.interior1, std::move(s1)));
      work.push_back(make_child(sep.interior2, std::move(s2)));
      split_done = true;
      break;
    }
    if (!split_done) {
      cell.unsplittable = true;
      work.push_back(std::move(cell));
    }
  }

  std::sort(work.begin(), work.end(),
            [](const WorkCell& a, const WorkCell& b) { return a.gnodes.front() < b.gnodes.front(); });

  PartitionResult res;
  std::vector<std::vector<long>> cells;
  for (auto& w : work) {
    cells.push_back(w.gnodes);
    res.splits.push_back(SubdomainSplit{std::move(w.A), std::move(w.B)});
  }
  res.partition = build_partition(pencil.n(), cells);
  return res;
}

PartitionResult regular_partition(const SparsePencil& pencil,
                                  const std::vector<int>& cells_per_axis) {
  const int nd = pencil.ndim;
  if (static_cast<int>(cells_per_axis.size()) != nd)
    throw ConfigError("cells_per_axis must match the grid dimension");
  std::array<int, 3> len = {1, 1, 1};
  for (int a = 0; a < nd; ++a) {
    const int c = cells_per_axis[a];
    if (c < 1) throw ConfigError("cells per axis must be >= 1");
    if ((pencil.dims[a] - 1) % c != 0)
      throw ConfigError("cells per axis must divide the interval count of axis " +
                        std::to_string(a));
    len[a] = (pencil.dims[a] - 1) / c;
    if (c > 1 && len[a] < 2)
      throw ConfigError("coarse cells thinner than two fine intervals on axis " +
                        std::to_string(a));
  }

  const long n = pencil.n();
  auto cell_id = [&](const std::array<int, 3>& cc) {
    long id = 0;
    for (int a = 0; a < nd; ++a) id = id * cells_per_axis[a] + cc[a];
    return static_cast<int>(id);
  };

  // Owner cells per node; nodes on a skeleton line belong to both sides.
  std::vector<std::vector<int>> owners(n);
  for (long g = 0; g < n; ++g) {
    std::array<std::vector<int>, 3> axis_cells;
    for (int a = 0; a < nd; ++a) {
      const int x = pencil.coords[g][a];
      const int k = x / len[a];
      if (x % len[a] == 0) {
        if (k - 1 >= 0) axis_cells[a].push_back(k - 1);
        if (k <= cells_per_axis[a] - 1) axis_cells[a].push_back(k);
      } else {
        axis_cells[a].push_back(std::min(k, cells_per_axis[a] - 1));
      }
    }
    std::array<int, 3> cc = {0, 0, 0};
    std::function<void(int)> rec = [&](int a) {
      if (a == nd) {
        owners[g].push_back(cell_id(cc));
        return;
      }
      for (int c : axis_cells[a]) {
        cc[a] = c;
        rec(a + 1);
      }
    };
    rec(0);
    std::sort(owners[g].begin(), owners[g].end());
  }

  long n_cells = 1;
  for (int a = 0; a < nd; ++a) n_cells *= cells_per_axis[a];
  std::vector<std::vector<long>> cells(n_cells);
  for (long g = 0; g < n; ++g)
    for (int c : owners[g]) cells[c].push_back(g);

  // Split weights: every edge is divided by the number of cells containing
  // both endpoints, masses by the number of cells containing the node, and
  // interface diagonals proportionally to each side's absolute row sum.
  PartitionResult res;
  res.splits.resize(n_cells);
  for (int c = 0; c < n_cells; ++c) {
    const auto& nodes = cells[c];
    const long nc = static_cast<long>(nodes.size());
    std::vector<long> loc(n, -1);
    for (long i = 0; i < nc; ++i) loc[nodes[i]] = i;

    std::vector<Triplet> trips;
    Vec s_local = Vec::Zero(nc);
    SubdomainSplit split;
    split.B = Vec::Zero(nc);

    for (long i = 0; i < nc; ++i) {
      const long k = nodes[i];
      split.B[i] = pencil.B[k] / static_cast<double>(owners[k].size());
      for (SpMat::InnerIterator it(pencil.A, k); it; ++it) {
        const long l = it.row();
        if (l == k || loc[l] < 0) continue;
        std::vector<int> shared;
        std::set_intersection(owners[k].begin(), owners[k].end(), owners[l].begin(),
                              owners[l].end(), std::back_inserter(shared));
        const double w = it.value() / static_cast<double>(shared.size());
        trips.emplace_back(i, loc[l], w);
        s_local[i] += std::abs(w);
      }
    }
    for (long i = 0; i < nc; ++i) {
      const long k = nodes[i];
      const double akk = pencil.A.coeff(k, k);
      if (owners[k].size() == 1) {
        trips.emplace_back(i, i, akk);
      } else {
        double total = 0.0;
        for (SpMat::InnerIterator it(pencil.A, k); it; ++it)
          if (it.row() != k) total += std::abs(it.value());
        const double share = total > 0.0 ? s_local[i] / total
                                         : 1.0 / static_cast<double>(owners[k].size());
        trips.emplace_back(i, i, akk * share);
      }
    }
    split.A.resize(nc, nc);
    split.A.setFromTriplets(trips.begin(), trips.end());
    split.A.makeCompressed();
    res.splits[c] = std::move(split);
  }

  res.partition = build_partition(n, cells);
  return res;
}

CornerRemovalResult remove_corner_set(const SparsePencil& pencil, const Partition& partition,
                                      const std::vector<SubdomainSplit>& splits) {
  CornerRemovalResult out;
  if (partition.corner_set.empty()) {
    out.pencil = pencil;
    out.partition = partition;
    out.splits = splits;
    return out;
  }

  const long n = pencil.n();
  std::vector<char> is_corner(n, 0);
  for (long k : partition.corner_set) is_corner[k] = 1;

  // Interfaces that keep at least one regular node survive; interfaces made
  // entirely of corner nodes (e.g. diagonal cell pairs) disappear.
  const int n_ifaces = static_cast<int>(partition.interfaces.size());
  std::vector<char> survives(n_ifaces, 0);
  std::vector<std::vector<int>> ifaces_of(n);
  for (int f = 0; f < n_ifaces; ++f) {
    for (long g : partition.interfaces[f].nodes) {
      ifaces_of[g].push_back(f);
      if (!is_corner[g]) survives[f] = 1;
    }
  }

  // Removed corners are compacted out of the numbering; surviving nodes keep
  // their order, hanging copies go after them (corners ascending, then the
  // parent's surviving interfaces in lexicographic order).
  std::vector<long> compact(n, -1);
  long next_id = 0;
  for (long g = 0; g < n; ++g)
    if (!is_corner[g]) compact[g] = next_id++;

  std::map<std::pair<long, int>, long> copy_id;  // (corner, iface) -> new id
  std::vector<HangingNode> hanging;
  for (long k : partition.corner_set) {
    bool any = false;
    for (int f : ifaces_of[k]) {
      if (!survives[f]) continue;
      copy_id[{k, f}] = next_id++;
      hanging.push_back(HangingNode{copy_id[{k, f}], k, partition.interfaces[f].ci,
                                    partition.interfaces[f].cj});
      any = true;
    }
    if (!any)
      throw NumericalError("corner node " + std::to_string(k) + " has no surviving interface");
  }

  auto iface_touches = [&](int f, int cell) {
    return partition.interfaces[f].ci == cell || partition.interfaces[f].cj == cell;
  };
  auto iface_contains = [&](int f, long g) {
    const auto& v = partition.interfaces[f].nodes;
    return std::binary_search(v.begin(), v.end(), g);
  };

  // Per-cell rebuild: couplings of a corner row are redirected to the copy of
  // the interface that owns the edge; one-sided couplings into the cell
  // interior are divided over the cell's copies; the diagonal rebalances so
  // each copy row keeps the parent's dominance deficit share.
  std::vector<std::vector<long>> new_cells(partition.num_cells());
  out.splits.resize(partition.num_cells());

  for (int c = 0; c < partition.num_cells(); ++c) {
    const auto& gnodes = partition.cells[c];
    const long nc = static_cast<long>(gnodes.size());

    std::vector<long> new_gnodes;
    for (long g : gnodes)
      if (!is_corner[g]) new_gnodes.push_back(compact[g]);
    std::map<long, std::vector<int>> cell_copies;  // corner -> surviving iface ids for this cell
    for (long g : gnodes) {
      if (!is_corner[g]) continue;
      for (int f : ifaces_of[g])
        if (survives[f] && iface_touches(f, c)) cell_copies[g].push_back(f);
      if (cell_copies[g].empty())
        throw NumericalError("corner node " + std::to_string(g) +
                             " has no surviving interface in cell " + std::to_string(c));
      for (int f : cell_copies[g]) new_gnodes.push_back(copy_id.at({g, f}));
    }
    std::sort(new_gnodes.begin(), new_gnodes.end());
    new_cells[c] = new_gnodes;

    std::map<long, long> new_loc;
    for (long i = 0; i < static_cast<long>(new_gnodes.size()); ++i) new_loc[new_gnodes[i]] = i;

    const SubdomainSplit& old_split = splits[c];
    std::map<std::pair<long, long>, double> entries;  // (row,col) new-local, off-diagonal only
    auto add_sym = [&](long a, long b, double v) {
      entries[{a, b}] += v;
      entries[{b, a}] += v;
    };

    std::vector<double> off_sum(new_gnodes.size(), 0.0);
    std::vector<double> old_diag(nc, 0.0), old_off(nc, 0.0);

    for (long li = 0; li < nc; ++li) {
      const long gk = gnodes[li];
      for (SpMat::InnerIterator it(old_split.A, li); it; ++it) {
        const long lj = it.row();
        const long gl = gnodes[lj];
        if (lj == li) {
          old_diag[li] = it.value();
          continue;
        }
        old_off[li] += std::abs(it.value());
        if (gl < gk) continue;  // handle each unordered pair once
        const double v = it.value();
        if (!is_corner[gk] && !is_corner[gl]) {
          add_sym(new_loc.at(compact[gk]), new_loc.at(compact[gl]), v);
        } else if (is_corner[gk] != is_corner[gl]) {
          const long corner = is_corner[gk] ? gk : gl;
          const long other = is_corner[gk] ? gl : gk;
          const auto& copies = cell_copies.at(corner);
          int owner = -1;
          for (int f : copies)
            if (iface_contains(f, other)) { owner = f; break; }
          if (owner >= 0) {
            add_sym(new_loc.at(copy_id.at({corner, owner})), new_loc.at(compact[other]), v);
          } else {
            const double share = v / static_cast<double>(copies.size());
            for (int f : copies)
              add_sym(new_loc.at(copy_id.at({corner, f})), new_loc.at(compact[other]), share);
          }
        } else {
          // Both corners: duplicate the cell's share per interface that holds
          // both endpoints, so each hanging chain keeps the full coupling.
          bool placed = false;
          for (int f : cell_copies.at(gk)) {
            if (!iface_contains(f, gl)) continue;
            add_sym(new_loc.at(copy_id.at({gk, f})), new_loc.at(copy_id.at({gl, f})), v);
            placed = true;
          }
          if (!placed)
            throw NumericalError("adjacent corner nodes " + std::to_string(gk) + "," +
                                 std::to_string(gl) + " share no surviving interface");
        }
      }
    }
    for (const auto& [key, v] : entries) off_sum[key.first] += std::abs(v);

    std::vector<Triplet> trips;
    for (const auto& [key, v] : entries)
      trips.emplace_back(static_cast<int>(key.first), static_cast<int>(key.second), v);

    SubdomainSplit ns;
    ns.B = Vec::Zero(new_gnodes.size());
    for (long li = 0; li < nc; ++li) {
      const long gk = gnodes[li];
      if (!is_corner[gk]) {
        const long i = new_loc.at(compact[gk]);
        trips.emplace_back(static_cast<int>(i), static_cast<int>(i), old_diag[li]);
        ns.B[i] = old_split.B[li];
      } else {
        const auto& copies = cell_copies.at(gk);
        const double deficit = old_diag[li] + old_off[li];  // <= 0 for dominant rows
        for (int f : copies) {
          const long i = new_loc.at(copy_id.at({gk, f}));
          trips.emplace_back(static_cast<int>(i), static_cast<int>(i),
                             -off_sum[i] + deficit / static_cast<double>(copies.size()));
          ns.B[i] = old_split.B[li];
        }
      }
    }
    ns.A.resize(new_gnodes.size(), new_gnodes.size());
    ns.A.setFromTriplets(trips.begin(), trips.end());
    ns.A.makeCompressed();
    out.splits[c] = std::move(ns);
  }

  // Modified global pencil = sum of the rebuilt cell shares.
  out.partition = build_partition(next_id, new_cells);
  out.partition.hanging = std::move(hanging);
  if (!out.partition.corner_set.empty())
    throw NumericalError("corner removal left a nonempty corner set");

  out.pencil.ndim = pencil.ndim;
  out.pencil.dims = pencil.dims;
  out.pencil.coords.resize(next_id);
  for (long g = 0; g < n; ++g)
    if (compact[g] >= 0) out.pencil.coords[compact[g]] = pencil.coords[g];
  for (const auto& hn : out.partition.hanging) out.pencil.coords[hn.id] = pencil.coords[hn.parent];

  std::vector<Triplet> gt;
  Vec gB = Vec::Zero(next_id);
  for (int c = 0; c < partition.num_cells(); ++c) {
    const auto& nodes = new_cells[c];
    for (long i = 0; i < static_cast<long>(nodes.size()); ++i) {
      gB[nodes[i]] += out.splits[c].B[i];
      for (SpMat::InnerIterator it(out.splits[c].A, i); it; ++it)
        gt.emplace_back(static_cast<int>(nodes[it.row()]), static_cast<int>(nodes[it.col()]),
                        it.value());
    }
  }
  out.pencil.A.resize(next_id, next_id);
  out.pencil.A.setFromTriplets(gt.begin(), gt.end());
  out.pencil.A.makeCompressed();
  out.pencil.B = gB;
  return out;
}

CSpMat reassemble_pencil(const Partition& partition, const std::vector<SubdomainSplit>& splits,
                         Cpx w2) {
  std::vector<Eigen::Triplet<Cpx>> trips;
  for (int c = 0; c < partition.num_cells(); ++c) {
    const auto& nodes = partition.cells[c];
    for (long i = 0; i < static_cast<long>(nodes.size()); ++i) {
      for (SpMat::InnerIterator it(splits[c].A, i); it; ++it)
        trips.emplace_back(static_cast<int>(nodes[it.row()]), static_cast<int>(nodes[it.col()]),
                           Cpx(it.value(), 0.0));
      trips.emplace_back(static_cast<int>(nodes[i]), static_cast<int>(nodes[i]),
                         w2 * splits[c].B[i]);
    }
  }
  CSpMat M(partition.n_nodes, partition.n_nodes);
  M.setFromTriplets(trips.begin(), trips.end());
  M.makeCompressed();
  return M;
}

double splitting_identity_error(const SpMat& A, const Vec& B, const Partition& partition,
                                const std::vector<SubdomainSplit>& splits, Cpx w2) {
  CSpMat sum = reassemble_pencil(partition, splits, w2);
  CSpMat target = A.cast<Cpx>();
  for (long k = 0; k < B.size(); ++k) target.coeffRef(k, k) += w2 * B[k];
  target.makeCompressed();
  CSpMat diff = sum - target;
  double num = 0.0, den = 0.0;
  for (int col = 0; col < diff.outerSize(); ++col)
    for (CSpMat::InnerIterator it(diff, col); it; ++it) num = std::max(num, std::abs(it.value()));
  for (int col = 0; col < target.outerSize(); ++col)
    for (CSpMat::InnerIterator it(target, col); it; ++it)
      den = std::max(den, std::abs(it.value()));
  return den > 0.0 ? num / den : num;
}

}  // namespace mswave
