#include "gaussgrid/gridgen.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>

namespace gaussgrid {

GridSpec SpecPolicy::resolve(const ParticleSet& points) const {
  if (kind == Kind::fixed || points.empty()) return spec;
  GridSpec s = spec;
  s.periodic.reset();
  s.box = bounding_box_of(points, spec.sigma, padding_sigmas);
  return s;
}

std::vector<BatchItem> generate_batch(std::span<const ParticleSet> point_sets, const SpecPolicy& policy,
                                      int parallelism, const GenOptions& options) {
  if (parallelism < 1) throw Error("parallelism must be at least 1");
  std::vector<BatchItem> out(point_sets.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < point_sets.size(); i = next++) {
      try {
        auto [grid, stats] = generate_grid<float>(point_sets[i], policy.resolve(point_sets[i]), options);
        out[i].grid = std::move(grid);
        out[i].stats = stats;
      } catch (const std::exception& e) {
        out[i].error = e.what();
      }
    }
  };

  const auto threads = static_cast<std::size_t>(parallelism) < point_sets.size()
                           ? static_cast<std::size_t>(parallelism)
                           : point_sets.size();
  if (threads <= 1) {
    worker();
    return out;
  }
  {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  return out;
}

}  // namespace gaussgrid
