#pragma once

// Periodic pixel geometry: D-dimensional torus grids, convolutional patches
// given as explicit offset sets, and the index tables used by the kernel
// recursion and the finite-width forward pass.

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace nngpcert {

struct PixelGrid {
  std::vector<int> dims;  // torus extents h_1..h_D, each >= 1

  PixelGrid() = default;
  explicit PixelGrid(std::vector<int> d) : dims(std::move(d)) {}

  int rank() const { return static_cast<int>(dims.size()); }

  int size() const {
    int s = 1;
    for (int h : dims) s *= h;
    return s;
  }

  // Row-major flat index of a coordinate, wrapped onto the torus.
  int flatten(const std::vector<int>& coord) const {
    int idx = 0;
    for (size_t d = 0; d < dims.size(); ++d) {
      int c = coord[d] % dims[d];
      if (c < 0) c += dims[d];
      idx = idx * dims[d] + c;
    }
    return idx;
  }

  std::vector<int> unflatten(int idx) const {
    std::vector<int> coord(dims.size());
    for (int d = rank() - 1; d >= 0; --d) {
      coord[d] = idx % dims[d];
      idx /= dims[d];
    }
    return coord;
  }

  // Flat index of pixel `idx` shifted by `offset` (periodic).
  int shift(int idx, const std::vector<int>& offset) const {
    std::vector<int> c = unflatten(idx);
    for (size_t d = 0; d < c.size(); ++d) c[d] += offset[d];
    return flatten(c);
  }

  bool operator==(const PixelGrid&) const = default;
};

struct Patch {
  std::vector<std::vector<int>> offsets;

  Patch() = default;
  explicit Patch(std::vector<std::vector<int>> offs) : offsets(std::move(offs)) { canonicalize(); }

  // Centered hyper-rectangular patch with odd extents, e.g. {3,3} -> 3x3.
  static Patch centered(const std::vector<int>& extents) {
    for (int e : extents)
      if (e < 1 || e % 2 == 0)
        throw std::invalid_argument("centered patch extents must be odd and positive");
    std::vector<std::vector<int>> offs{{}};
    for (int e : extents) {
      std::vector<std::vector<int>> next;
      for (const auto& o : offs)
        for (int v = -(e / 2); v <= e / 2; ++v) {
          auto c = o;
          c.push_back(v);
          next.push_back(std::move(c));
        }
      offs = std::move(next);
    }
    return Patch(std::move(offs));
  }

  int size() const { return static_cast<int>(offsets.size()); }

  bool symmetric() const {
    for (const auto& o : offsets) {
      std::vector<int> neg(o.size());
      for (size_t d = 0; d < o.size(); ++d) neg[d] = -o[d];
      if (!std::binary_search(offsets.begin(), offsets.end(), neg)) return false;
    }
    return true;
  }

  bool has_duplicates() const {
    return std::adjacent_find(offsets.begin(), offsets.end()) != offsets.end();
  }

  void canonicalize() { std::sort(offsets.begin(), offsets.end()); }

  bool operator==(const Patch&) const = default;
};

// shift_table[q][a] = index of pixel a shifted by sign*offsets[q].
inline std::vector<std::vector<int>> shift_tables(const PixelGrid& grid, const Patch& patch,
                                                  int sign) {
  std::vector<std::vector<int>> tables(patch.size(), std::vector<int>(grid.size()));
  for (int q = 0; q < patch.size(); ++q) {
    std::vector<int> off = patch.offsets[q];
    for (auto& v : off) v *= sign;
    for (int a = 0; a < grid.size(); ++a) tables[q][a] = grid.shift(a, off);
  }
  return tables;
}

// Partition of `grid` into equal axis-aligned cells of the given per-dimension
// factors. cells[A] lists the fine pixels of coarse pixel A, A indexed on the
// coarse grid (dims[d] / cell[d]).
struct PoolPartition {
  PixelGrid coarse;
  std::vector<std::vector<int>> cells;
};

inline PoolPartition pool_partition(const PixelGrid& grid, const std::vector<int>& cell) {
  if (static_cast<int>(cell.size()) != grid.rank())
    throw std::invalid_argument("pool cell rank does not match grid rank");
  std::vector<int> coarse_dims(grid.dims.size());
  for (size_t d = 0; d < cell.size(); ++d) {
    if (cell[d] < 1) throw std::invalid_argument("pool cell factor must be >= 1");
    if (grid.dims[d] % cell[d] != 0)
      throw std::invalid_argument("pool cell factor " + std::to_string(cell[d]) +
                                  " does not divide grid extent " + std::to_string(grid.dims[d]));
    coarse_dims[d] = grid.dims[d] / cell[d];
  }
  PoolPartition part;
  part.coarse = PixelGrid(coarse_dims);
  part.cells.resize(part.coarse.size());
  for (int a = 0; a < grid.size(); ++a) {
    std::vector<int> c = grid.unflatten(a);
    std::vector<int> cc(c.size());
    for (size_t d = 0; d < c.size(); ++d) cc[d] = c[d] / cell[d];
    part.cells[part.coarse.flatten(cc)].push_back(a);
  }
  return part;
}

}  // namespace nngpcert
