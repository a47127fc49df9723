#pragma once

#include "gaussgrid/core.hpp"
#include "gaussgrid/kernels.hpp"

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace gaussgrid {

enum class Mode { dense, sparse };

struct GenOptions {
  Mode mode = Mode::sparse;
  /// Axis values below this are skipped by the sparse path. Unset: only
  /// values that saturated to exactly zero are skipped.
  std::optional<double> threshold;
  /// Scan the finished grid for GenStats::nonzero_voxels.
  bool count_nonzero = true;
};

struct GenStats {
  std::int64_t voxel_writes = 0;
  std::int64_t erf_evals = 0;
  std::int64_t nonzero_voxels = 0;
  std::chrono::nanoseconds elapsed{0};

  double elapsed_ms() const { return std::chrono::duration<double, std::milli>(elapsed).count(); }

  GenStats& operator+=(const GenStats& o) {
    voxel_writes += o.voxel_writes;
    erf_evals += o.erf_evals;
    nonzero_voxels += o.nonzero_voxels;
    elapsed += o.elapsed;
    return *this;
  }
};

/// The three axis tables of one particle on one grid.
template <typename Scalar>
struct ParticleTables {
  std::array<AxisTable<Scalar>, 3> axes;

  const AxisTable<Scalar>& operator[](int a) const { return axes[a]; }
  bool empty() const { return axes[0].empty() || axes[1].empty() || axes[2].empty(); }
  std::int64_t support_volume() const {
    return empty() ? 0 : axes[0].support_size() * axes[1].support_size() * axes[2].support_size();
  }
};

/// Builds the x, y, z tables for a particle at `position`, honoring the
/// spec's periodic cell when present.
template <typename Scalar>
ParticleTables<Scalar> particle_tables(const GridSpec& spec, const Vec3& position,
                                       std::optional<double> threshold = std::nullopt) {
  const Vec3 delta = spec.voxel_size();
  ParticleTables<Scalar> t;
  for (int a = 0; a < 3; ++a) {
    if (spec.periodic) {
      t.axes[a] = axis_table_periodic<Scalar>(position(a) - spec.box.origin(a), spec.periodic->edges(a), delta(a),
                                              spec.shape(a), spec.sigma, threshold);
    } else {
      t.axes[a] = axis_table<Scalar>(position(a), spec.box.origin(a), delta(a), spec.shape(a), spec.sigma, threshold);
    }
  }
  return t;
}

/// erf evaluations needed for one particle's tables.
inline std::int64_t erf_evals_per_particle(const GridSpec& spec) {
  const std::int64_t images = spec.periodic ? 3 : 1;
  return images * ((spec.shape + 1).sum());
}

namespace detail {

/// grid[c] += (x[i] * y[j]) * z[k] over [lo, hi) of each axis. The dense and
/// sparse paths share this expression so they round identically.
template <typename Scalar>
std::int64_t accumulate(Grid<Scalar>& grid, int channel, const ParticleTables<Scalar>& t, const Index3& lo,
                        const Index3& hi) {
  const auto& x = t[0].values;
  const auto& y = t[1].values;
  const auto& z = t[2].values;
  const Eigen::Index nk = hi(2) - lo(2);
  if (nk <= 0) return 0;
  std::int64_t writes = 0;
  for (Eigen::Index i = lo(0); i < hi(0); ++i) {
    const Scalar xi = x(i);
    for (Eigen::Index j = lo(1); j < hi(1); ++j) {
      const Scalar xy = xi * y(j);
      grid.row(channel, i, j).segment(lo(2), nk) += xy * z.segment(lo(2), nk);
      writes += nk;
    }
  }
  return writes;
}

}  // namespace detail

/// Adds one particle's per-voxel Gaussian integrals into `channel`. Dense mode
/// visits all H*W*D voxels; sparse mode only the product of the axis supports.
template <typename Scalar>
GenStats splat_atom(Grid<Scalar>& grid, int channel, const Vec3& position, const GenOptions& options = {}) {
  const GridSpec& spec = grid.spec();
  if (channel < 0 || channel >= spec.channels) throw Error("particle channel out of range");
  if (!position.allFinite()) throw Error("particle position is not finite");

  const auto tables = particle_tables<Scalar>(spec, position, options.threshold);
  GenStats stats;
  stats.erf_evals = erf_evals_per_particle(spec);
  if (options.mode == Mode::dense) {
    stats.voxel_writes = detail::accumulate(grid, channel, tables, Index3::Zero(), spec.shape);
  } else if (!tables.empty()) {
    const Index3 lo(tables[0].lo, tables[1].lo, tables[2].lo);
    const Index3 hi(tables[0].hi, tables[1].hi, tables[2].hi);
    stats.voxel_writes = detail::accumulate(grid, channel, tables, lo, hi);
  }
  return stats;
}

/// Sum of splat_atom over the particles, in index order.
template <typename Scalar>
std::pair<Grid<Scalar>, GenStats> generate_grid(const ParticleSet& points, const GridSpec& spec,
                                                const GenOptions& options = {}) {
  const auto start = std::chrono::steady_clock::now();
  spec.validate();
  if (points.lattice && !(spec.periodic && *points.lattice == *spec.periodic))
    throw Error("particle lattice does not match the grid's periodic cell");

  Grid<Scalar> grid(spec);
  GenStats stats;
  for (const auto& p : points.particles) {
    Vec3 pos = p.position;
    if (spec.periodic) {
      for (int a = 0; a < 3; ++a)
        pos(a) = spec.box.origin(a) + detail::wrap_into_cell(pos(a) - spec.box.origin(a), spec.periodic->edges(a));
    }
    stats += splat_atom(grid, p.channel, pos, options);
  }
  if (options.count_nonzero) stats.nonzero_voxels = grid.count_nonzero();
  stats.elapsed = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start);
  return {std::move(grid), stats};
}

/// How each molecule of a batch gets its grid geometry.
struct SpecPolicy {
  enum class Kind { fixed, per_molecule_bbox };

  Kind kind = Kind::fixed;
  /// The shared spec, or (per-molecule) the template whose box is replaced.
  GridSpec spec;
  double padding_sigmas = 4.0;

  /// Spec used for `points`.
  GridSpec resolve(const ParticleSet& points) const;
};

struct BatchItem {
  std::optional<Grid<float>> grid;
  GenStats stats;
  std::string error;

  bool ok() const { return grid.has_value(); }
};

/// generate_grid over many molecules with `parallelism` worker threads.
/// Each grid is built by one thread in particle order, so results do not
/// depend on the parallelism level. Failures are reported per item.
std::vector<BatchItem> generate_batch(std::span<const ParticleSet> point_sets, const SpecPolicy& policy,
                                      int parallelism = 1, const GenOptions& options = {});

}  // namespace gaussgrid
