#include "gaussgrid/bench.hpp"

#include "gaussgrid/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace gaussgrid {

namespace {

// H, C, N, O with rough organic abundances.
constexpr int kElementChannel[] = {0, 1, 2, 3};
constexpr double kElementWeight[] = {0.45, 0.38, 0.08, 0.09};

ParticleSet grow_molecule(std::mt19937_64& rng, int atoms) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> bond(1.0, 1.6);
  std::discrete_distribution<int> element(std::begin(kElementWeight), std::end(kElementWeight));

  std::vector<Vec3> pos{Vec3::Zero()};
  while (static_cast<int>(pos.size()) < atoms) {
    std::uniform_int_distribution<std::size_t> pick(0, pos.size() - 1);
    Vec3 candidate;
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      Vec3 dir(normal(rng), normal(rng), normal(rng));
      if (dir.norm() < 1e-9) continue;
      candidate = pos[pick(rng)] + bond(rng) * dir.normalized();
      placed = std::all_of(pos.begin(), pos.end(), [&](const Vec3& q) { return (q - candidate).norm() >= 1.0; });
    }
    if (!placed) throw Error("could not place atom in synthetic molecule");
    pos.push_back(candidate);
  }
  ParticleSet ps;
  for (const auto& p : pos) ps.particles.push_back({kElementChannel[element(rng)], p});
  return ps;
}

void center_in_box(ParticleSet& ps, double box_scale) {
  if (ps.empty()) return;
  Vec3 lo = ps.particles.front().position, hi = lo;
  for (const auto& p : ps.particles) {
    lo = lo.cwiseMin(p.position);
    hi = hi.cwiseMax(p.position);
  }
  const Vec3 shift = Vec3::Constant(0.5 * box_scale) - 0.5 * (lo + hi);
  for (auto& p : ps.particles) p.position += shift;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const char* mode_name(Mode m) { return m == Mode::dense ? "dense" : "sparse"; }

}  // namespace

std::vector<ParticleSet> synth_corpus(const CorpusOptions& o) {
  if (o.molecules < 1) throw Error("corpus size must be at least 1");
  if (o.min_atoms < 1 || o.max_atoms < o.min_atoms) throw Error("invalid atom count range");
  if (!(o.box_scale > 0.0)) throw Error("box scale must be positive");
  std::mt19937_64 rng(o.seed);
  std::uniform_int_distribution<int> count(o.min_atoms, o.max_atoms);
  std::vector<ParticleSet> corpus;
  corpus.reserve(static_cast<std::size_t>(o.molecules));
  for (int m = 0; m < o.molecules; ++m) {
    ParticleSet ps = grow_molecule(rng, count(rng));
    center_in_box(ps, o.box_scale);
    corpus.push_back(std::move(ps));
  }
  return corpus;
}

std::vector<ParticleSet> load_xyz_corpus(const std::filesystem::path& dir, double box_scale, int* channels) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".xyz") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error("no .xyz files in " + dir.string());

  std::vector<MoleculeFile> mols;
  std::set<int> elements;
  for (const auto& f : files) {
    try {
      mols.push_back(parse_xyz(read_text_file(f)));
    } catch (const Error& e) {
      throw Error(f.string() + ": " + e.what());
    }
    elements.insert(mols.back().atomic_numbers.begin(), mols.back().atomic_numbers.end());
  }
  std::map<int, int> channel_of;
  for (const int z : elements) channel_of.emplace(z, static_cast<int>(channel_of.size()));
  if (channels) *channels = std::max<int>(1, static_cast<int>(channel_of.size()));

  std::vector<ParticleSet> corpus;
  for (const auto& mol : mols) {
    ParticleSet ps;
    for (std::size_t i = 0; i < mol.size(); ++i)
      ps.particles.push_back({channel_of.at(mol.atomic_numbers[i]), mol.positions[i]});
    center_in_box(ps, box_scale);
    corpus.push_back(std::move(ps));
  }
  return corpus;
}

void BenchConfig::validate() const {
  if (sizes.empty() || variances.empty()) throw Error("benchmark needs at least one size and one variance");
  for (const int s : sizes)
    if (s < 8) throw Error("benchmark grid sizes must be at least 8");
  for (const double v : variances)
    if (!(v > 0.0)) throw Error("benchmark variances must be positive");
  if (repeats < 1) throw Error("repeats must be at least 1");
  if (jobs < 1) throw Error("jobs must be at least 1");
  if (!(corpus.box_scale > 0.0)) throw Error("box scale must be positive");
}

double nonzero_cell_fraction(const Grid<float>& grid) {
  const auto& spec = grid.spec();
  const Eigen::Index cells = spec.voxels_per_channel();
  Eigen::Array<bool, Eigen::Dynamic, 1> any = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(cells, false);
  for (int c = 0; c < spec.channels; ++c) any = any || (grid.channel(c) != 0.0f);
  return static_cast<double>(any.count()) / static_cast<double>(cells);
}

BenchReport run_benchmark(const BenchConfig& config, const std::vector<ParticleSet>& corpus, int channels) {
  config.validate();
  if (corpus.empty()) throw Error("benchmark corpus is empty");
  BenchReport report;
  report.molecules = static_cast<int>(corpus.size());
  report.channels = channels;
  report.box_scale = config.corpus.box_scale;
  report.repeats = config.repeats;
  report.jobs = config.jobs;

  BoundingBox box;
  box.origin = Vec3::Zero();
  box.extents = Vec3::Constant(config.corpus.box_scale);

  for (const int size : config.sizes) {
    for (const double variance : config.variances) {
      const GridSpec spec = GridSpec::cubic(size, channels, box, variance);
      double dense_mean = 0.0;
      for (const Mode mode : {Mode::dense, Mode::sparse}) {
        GenOptions opt;
        opt.mode = mode;
        opt.count_nonzero = false;

        // Warm-up pass, also used for the (timing independent) sparsity figure.
        double nonzero = 0.0;
        for (const auto& ps : corpus) nonzero += nonzero_cell_fraction(generate_grid<float>(ps, spec, opt).first);

        volatile float sink = 0.0f;
        const auto t0 = std::chrono::steady_clock::now();
        for (int r = 0; r < config.repeats; ++r)
          for (const auto& ps : corpus) sink = sink + generate_grid<float>(ps, spec, opt).first.data()(0);
        const double total = seconds_since(t0);

        BenchCell cell;
        cell.size = size;
        cell.variance = variance;
        cell.mode = mode;
        cell.mean_seconds = total / (static_cast<double>(config.repeats) * static_cast<double>(corpus.size()));
        cell.throughput = 1.0 / cell.mean_seconds;
        cell.nonzero_fraction = nonzero / static_cast<double>(corpus.size());
        if (mode == Mode::dense) dense_mean = cell.mean_seconds;
        cell.speedup = dense_mean / cell.mean_seconds;

        if (config.jobs > 1) {
          SpecPolicy policy;
          policy.spec = spec;
          const auto b0 = std::chrono::steady_clock::now();
          for (int r = 0; r < config.repeats; ++r) generate_batch(corpus, policy, config.jobs, opt);
          cell.batch_throughput =
              static_cast<double>(config.repeats) * static_cast<double>(corpus.size()) / seconds_since(b0);
        }
        report.cells.push_back(cell);
      }
    }
  }
  return report;
}

BenchReport run_benchmark(const BenchConfig& config) {
  config.validate();
  if (config.corpus_dir) {
    int channels = 1;
    const auto corpus = load_xyz_corpus(*config.corpus_dir, config.corpus.box_scale, &channels);
    return run_benchmark(config, corpus, channels);
  }
  return run_benchmark(config, synth_corpus(config.corpus), kSynthChannels);
}

const BenchCell* BenchReport::find(int size, double variance, Mode mode) const {
  for (const auto& c : cells)
    if (c.size == size && c.variance == variance && c.mode == mode) return &c;
  return nullptr;
}

std::string BenchReport::to_json() const {
  nlohmann::json j;
  j["molecules"] = molecules;
  j["channels"] = channels;
  j["box_scale"] = box_scale;
  j["repeats"] = repeats;
  j["jobs"] = jobs;
  j["cells"] = nlohmann::json::array();
  for (const auto& c : cells) {
    nlohmann::json cj = {{"size", c.size},
                         {"variance", c.variance},
                         {"mode", mode_name(c.mode)},
                         {"mean_ms_per_molecule", c.mean_seconds * 1e3},
                         {"throughput", c.throughput},
                         {"nonzero_fraction", c.nonzero_fraction},
                         {"speedup", c.speedup}};
    if (c.batch_throughput) cj["batch_throughput"] = *c.batch_throughput;
    j["cells"].push_back(cj);
  }
  return j.dump(2);
}

std::string BenchReport::to_table() const {
  std::ostringstream os;
  os << std::setw(6) << "size" << std::setw(10) << "variance" << std::setw(8) << "mode" << std::setw(14) << "ms/molecule"
     << std::setw(14) << "molecules/s" << std::setw(11) << "nonzero%" << std::setw(9) << "speedup";
  if (jobs > 1) os << std::setw(16) << "batch mol/s";
  os << '\n';
  os << std::fixed;
  for (const auto& c : cells) {
    os << std::setw(6) << c.size << std::setw(10) << std::setprecision(2) << c.variance << std::setw(8)
       << mode_name(c.mode) << std::setw(14) << std::setprecision(4) << c.mean_seconds * 1e3 << std::setw(14)
       << std::setprecision(1) << c.throughput << std::setw(11) << std::setprecision(3) << c.nonzero_fraction * 100.0
       << std::setw(9) << std::setprecision(2) << c.speedup;
    if (c.batch_throughput) os << std::setw(16) << std::setprecision(1) << *c.batch_throughput;
    os << '\n';
  }
  return os.str();
}

}  // namespace gaussgrid
