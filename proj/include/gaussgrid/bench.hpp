#pragma once

#include "gaussgrid/core.hpp"
#include "gaussgrid/gridgen.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace gaussgrid {

struct CorpusOptions {
  int molecules = 100;
  int min_atoms = 8;
  int max_atoms = 40;
  /// Edge of the cubic box [0, box_scale)^3 the molecules are centered in.
  double box_scale = 32.0;
  std::uint64_t seed = 7;
};

/// Reproducible random "molecules": branched chains of H/C/N/O atoms grown with
/// bond lengths in [1.0, 1.6] and no two atoms closer than 1.0, centered in the
/// box. Channels follow atomic number order (H=0, C=1, N=2, O=3).
std::vector<ParticleSet> synth_corpus(const CorpusOptions& options);

inline constexpr int kSynthChannels = 4;

/// Loads every *.xyz file of `dir` (sorted by name) with one shared channel
/// map over all elements present, each molecule centered in the box.
std::vector<ParticleSet> load_xyz_corpus(const std::filesystem::path& dir, double box_scale, int* channels = nullptr);

struct BenchConfig {
  std::vector<int> sizes{16, 32, 64, 128};
  std::vector<double> variances{0.05, 0.1, 0.25, 0.5};
  int repeats = 10;
  CorpusOptions corpus;
  std::optional<std::filesystem::path> corpus_dir;
  /// Worker threads for the additional batch-throughput measurement; 1 skips it.
  int jobs = 1;

  void validate() const;
};

struct BenchCell {
  int size = 0;
  double variance = 0.0;
  Mode mode = Mode::dense;
  double mean_seconds = 0.0;  // per molecule
  double throughput = 0.0;    // molecules / s
  double nonzero_fraction = 0.0;
  double speedup = 1.0;  // dense mean time / this mode's mean time
  std::optional<double> batch_throughput;
};

struct BenchReport {
  std::vector<BenchCell> cells;
  int molecules = 0;
  int channels = 0;
  double box_scale = 0.0;
  int repeats = 0;
  int jobs = 1;

  const BenchCell* find(int size, double variance, Mode mode) const;
  std::string to_json() const;
  std::string to_table() const;
};

/// Times dense and sparse generation for every (size, variance) on `corpus`.
/// One untimed warm-up pass precedes `repeats` timed passes.
BenchReport run_benchmark(const BenchConfig& config, const std::vector<ParticleSet>& corpus, int channels);

/// As above, building the corpus from the config first (not timed).
BenchReport run_benchmark(const BenchConfig& config);

/// Fraction of spatial cells that are nonzero in at least one channel.
double nonzero_cell_fraction(const Grid<float>& grid);

}  // namespace gaussgrid
