#pragma once

// Grid -> coordinates. Peaks of each channel are found as the 0-dimensional
// classes of the superlevel-set filtration (union-find over the 26-connected
// voxel graph); their voxel centers seed a gradient descent on the grid-space
// mean squared error.

#include "gaussgrid/core.hpp"
#include "gaussgrid/gridgen.hpp"
#include "gaussgrid/kernels.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace gaussgrid {

/// One 0-dimensional class of the superlevel filtration. `birth_index` is the
/// linear (i, j, k) index of the voxel that created the component.
struct PersistencePair {
  Eigen::Index birth_index = 0;
  double birth = 0.0;
  double death = 0.0;  // 0 for the class that never merges
  bool essential = false;

  double persistence() const { return birth - death; }
};

namespace detail {

inline Index3 unravel(Eigen::Index idx, const Index3& shape) {
  return Index3(idx / (shape(1) * shape(2)), (idx / shape(2)) % shape(1), idx % shape(2));
}

template <typename F>
void for_each_neighbor26(Eigen::Index idx, const Index3& shape, F&& f) {
  const Index3 p = unravel(idx, shape);
  for (int di = -1; di <= 1; ++di)
    for (int dj = -1; dj <= 1; ++dj)
      for (int dk = -1; dk <= 1; ++dk) {
        if (di == 0 && dj == 0 && dk == 0) continue;
        const Index3 q = p + Index3(di, dj, dk);
        if ((q < 0).any() || (q >= shape).any()) continue;
        f((q(0) * shape(1) + q(1)) * shape(2) + q(2));
      }
}

}  // namespace detail

/// Voxels with value > 0 in descending value order, ties by ascending index.
template <typename Derived>
std::vector<Eigen::Index> filtration_order(const Eigen::DenseBase<Derived>& values) {
  std::vector<Eigen::Index> order;
  for (Eigen::Index i = 0; i < values.size(); ++i)
    if (values(i) > 0) order.push_back(i);
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return values(a) != values(b) ? values(a) > values(b) : a < b;
  });
  return order;
}

/// All 0-dimensional persistence pairs of one channel (values laid out as
/// [H][W][D]). Elder rule: on a merge the component born earlier in the
/// filtration order survives.
template <typename Derived>
std::vector<PersistencePair> superlevel_persistence(const Eigen::DenseBase<Derived>& values, const Index3& shape) {
  if (values.size() != shape.prod()) throw Error("channel size does not match shape");
  const auto order = filtration_order(values);
  std::vector<Eigen::Index> parent(static_cast<std::size_t>(values.size()), -1);
  std::vector<Eigen::Index> rank(static_cast<std::size_t>(values.size()), 0);
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = static_cast<Eigen::Index>(r);

  auto find = [&](Eigen::Index x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };

  // Roots are always the birth voxel of their component.
  std::vector<PersistencePair> pairs;
  std::vector<Eigen::Index> roots;
  for (const Eigen::Index v : order) {
    roots.clear();
    detail::for_each_neighbor26(v, shape, [&](Eigen::Index nb) {
      if (parent[nb] < 0) return;
      const Eigen::Index r = find(nb);
      if (std::find(roots.begin(), roots.end(), r) == roots.end()) roots.push_back(r);
    });
    if (roots.empty()) {
      parent[v] = v;
      continue;
    }
    const Eigen::Index elder = *std::min_element(roots.begin(), roots.end(),
                                                 [&](Eigen::Index a, Eigen::Index b) { return rank[a] < rank[b]; });
    for (const Eigen::Index r : roots) {
      if (r == elder) continue;
      pairs.push_back({r, static_cast<double>(values(r)), static_cast<double>(values(v)), false});
      parent[r] = elder;
    }
    parent[v] = elder;
  }
  for (const Eigen::Index v : order)
    if (parent[v] == v) pairs.push_back({v, static_cast<double>(values(v)), 0.0, true});
  return pairs;
}

struct Peak {
  int channel = 0;
  Index3 voxel = Index3::Zero();
  double value = 0.0;
  double persistence = 0.0;
  Vec3 seed = Vec3::Zero();  // voxel center in world coordinates
};

struct PeakSet {
  std::vector<Peak> peaks;

  std::size_t size() const { return peaks.size(); }
  bool empty() const { return peaks.empty(); }
  std::size_t count_on(int c) const {
    return static_cast<std::size_t>(
        std::count_if(peaks.begin(), peaks.end(), [c](const Peak& p) { return p.channel == c; }));
  }
  std::vector<Particle> seeds() const {
    std::vector<Particle> out;
    out.reserve(peaks.size());
    for (const auto& p : peaks) out.push_back({p.channel, p.seed});
    return out;
  }
};

/// Peaks whose persistence is at least `threshold` times the channel maximum.
/// The global maximum of every nonzero channel is always reported.
template <typename Scalar>
PeakSet detect_peaks(const Grid<Scalar>& grid, double threshold) {
  if (!(threshold >= 0.0 && threshold < 1.0)) throw Error("persistence threshold must lie in [0, 1)");
  const GridSpec& spec = grid.spec();
  PeakSet out;
  for (int c = 0; c < spec.channels; ++c) {
    const auto values = grid.channel(c);
    if ((values < Scalar(0)).any()) throw Error("peak detection requires a nonnegative grid");
    const double top = static_cast<double>(values.maxCoeff());
    if (!(top > 0.0)) continue;
    auto pairs = superlevel_persistence(values, spec.shape);
    std::sort(pairs.begin(), pairs.end(), [](const PersistencePair& a, const PersistencePair& b) {
      return a.persistence() != b.persistence() ? a.persistence() > b.persistence() : a.birth_index < b.birth_index;
    });
    for (const auto& pr : pairs) {
      if (!(pr.persistence() > 0.0) || pr.persistence() < threshold * top) continue;
      Peak p;
      p.channel = c;
      p.voxel = detail::unravel(pr.birth_index, spec.shape);
      p.value = pr.birth;
      p.persistence = pr.persistence();
      p.seed = voxel_center(spec, p.voxel);
      out.peaks.push_back(p);
    }
  }
  return out;
}

/// Grid regenerated from candidate coordinates on the reference geometry.
template <typename Scalar>
Grid<Scalar> render(const GridSpec& spec, std::span<const Particle> theta) {
  ParticleSet ps;
  ps.particles.assign(theta.begin(), theta.end());
  if (spec.periodic) ps.lattice = spec.periodic;
  GenOptions opt;
  opt.count_nonzero = false;
  return generate_grid<Scalar>(ps, spec, opt).first;
}

namespace detail {

template <typename Scalar>
void check_candidates(const GridSpec& spec, std::span<const Particle> theta) {
  for (const auto& p : theta) {
    if (p.channel < 0 || p.channel >= spec.channels) throw Error("candidate channel does not exist in reference grid");
    if (!p.position.allFinite()) throw Error("candidate coordinate is not finite");
  }
}

template <typename Scalar>
Eigen::ArrayXd axis_derivative(const GridSpec& spec, int a, double mu) {
  const double delta = spec.voxel_size()(a);
  if (spec.periodic)
    return axis_gradient_periodic<Scalar>(mu - spec.box.origin(a), spec.periodic->edges(a), delta, spec.shape(a),
                                          spec.sigma)
        .template cast<double>();
  return axis_gradient<Scalar>(mu, spec.box.origin(a), delta, spec.shape(a), spec.sigma).template cast<double>();
}

}  // namespace detail

/// Mean squared voxel difference between `reference` and the grid rendered
/// from `theta`, accumulated in double.
template <typename Scalar>
double loss(const Grid<Scalar>& reference, std::span<const Particle> theta) {
  detail::check_candidates<Scalar>(reference.spec(), theta);
  const Grid<Scalar> rendered = render<Scalar>(reference.spec(), theta);
  return (rendered.data().template cast<double>() - reference.data().template cast<double>()).square().mean();
}

/// Analytic gradient of `loss` with respect to every candidate coordinate
/// (one row per candidate). Each row only touches the candidate's support box.
template <typename Scalar>
Eigen::MatrixX3d loss_gradient(const Grid<Scalar>& reference, std::span<const Particle> theta) {
  const GridSpec& spec = reference.spec();
  detail::check_candidates<Scalar>(spec, theta);
  const Grid<Scalar> rendered = render<Scalar>(spec, theta);
  const Eigen::ArrayXd residual = rendered.data().template cast<double>() - reference.data().template cast<double>();
  const double scale = 2.0 / static_cast<double>(reference.size());

  Eigen::MatrixX3d grad = Eigen::MatrixX3d::Zero(static_cast<Eigen::Index>(theta.size()), 3);
  for (std::size_t p = 0; p < theta.size(); ++p) {
    const auto tables = particle_tables<Scalar>(spec, theta[p].position);
    if (tables.empty()) continue;
    const Eigen::ArrayXd vx = tables[0].values.template cast<double>();
    const Eigen::ArrayXd vy = tables[1].values.template cast<double>();
    const Eigen::ArrayXd vz = tables[2].values.template cast<double>();
    const Eigen::ArrayXd dx = detail::axis_derivative<Scalar>(spec, 0, theta[p].position(0));
    const Eigen::ArrayXd dy = detail::axis_derivative<Scalar>(spec, 1, theta[p].position(1));
    const Eigen::ArrayXd dz = detail::axis_derivative<Scalar>(spec, 2, theta[p].position(2));
    const Eigen::Index klo = tables[2].lo;
    const Eigen::Index nk = tables[2].support_size();

    double gx = 0.0, gy = 0.0, gz = 0.0;
    for (Eigen::Index i = tables[0].lo; i < tables[0].hi; ++i) {
      for (Eigen::Index j = tables[1].lo; j < tables[1].hi; ++j) {
        const auto r = residual.segment(reference.offset(theta[p].channel, i, j, 0) + klo, nk);
        const double s0 = (r * vz.segment(klo, nk)).sum();
        const double s1 = (r * dz.segment(klo, nk)).sum();
        gx += dx(i) * vy(j) * s0;
        gy += vx(i) * dy(j) * s0;
        gz += vx(i) * vy(j) * s1;
      }
    }
    grad.row(static_cast<Eigen::Index>(p)) << scale * gx, scale * gy, scale * gz;
  }
  return grad;
}

/// Largest diagonal Gauss-Newton curvature (2/N) sum (dF/dmu)^2 over the
/// candidates' coordinates. Separable, so it costs three 1D sums per axis.
template <typename Scalar>
double gauss_newton_scale(const GridSpec& spec, std::span<const Particle> theta) {
  const double n = static_cast<double>(spec.total_voxels());
  double best = 0.0;
  for (const auto& p : theta) {
    const auto tables = particle_tables<Scalar>(spec, p.position);
    Eigen::Array3d mass2, slope2;
    for (int a = 0; a < 3; ++a) {
      mass2(a) = tables[a].values.template cast<double>().square().sum();
      slope2(a) = detail::axis_derivative<Scalar>(spec, a, p.position(a)).square().sum();
    }
    for (int a = 0; a < 3; ++a) best = std::max(best, 2.0 / n * slope2(a) * mass2.prod() / mass2(a));
  }
  return best;
}

struct ReversalConfig {
  /// Step size. With normalize_step it is a fraction of the inverse
  /// Gauss-Newton curvature at the seeds; otherwise the raw step.
  double learning_rate = 0.5;
  bool normalize_step = true;
  /// Stop once loss <= tolerance * mean(reference^2).
  double tolerance = 1e-6;
  int max_iters = 5000;
  double persistence_threshold = 0.05;
  /// Halvings tried before a step is declared stalled.
  int max_backoff = 10;

  void validate() const {
    if (!(learning_rate > 0.0)) throw Error("learning rate must be positive");
    if (!(tolerance > 0.0)) throw Error("tolerance must be positive");
    if (max_iters < 1) throw Error("max_iters must be positive");
    if (!(persistence_threshold > 0.0 && persistence_threshold < 1.0))
      throw Error("persistence threshold must lie in (0, 1)");
    if (max_backoff < 0) throw Error("max_backoff must be nonnegative");
  }
};

enum class ReversalStatus { converged, max_iters, stalled, diverged };

inline const char* to_string(ReversalStatus s) {
  switch (s) {
    case ReversalStatus::converged: return "converged";
    case ReversalStatus::max_iters: return "max_iters";
    case ReversalStatus::stalled: return "stalled";
    case ReversalStatus::diverged: return "diverged";
  }
  return "?";
}

struct ReversalState {
  std::vector<Particle> theta;
  double loss = 0.0;
  double initial_loss = 0.0;
  int iterations = 0;
  ReversalStatus status = ReversalStatus::max_iters;
  std::vector<double> history;  // loss after each accepted step, starting with the seed loss
};

/// Gradient descent theta <- theta - lambda dL/dtheta from `seeds` until the
/// relative loss drops below the tolerance. A step that raises the loss is
/// halved up to max_backoff times; the returned state is the best one seen.
template <typename Scalar>
ReversalState refine_coords(const Grid<Scalar>& reference, std::vector<Particle> seeds, const ReversalConfig& config) {
  config.validate();
  if (seeds.empty()) throw Error("refinement needs at least one seed");
  const GridSpec& spec = reference.spec();

  ReversalState state;
  state.theta = std::move(seeds);
  state.loss = state.initial_loss = loss(reference, std::span<const Particle>(state.theta));
  state.history.push_back(state.loss);
  const double target = config.tolerance * reference.data().template cast<double>().square().mean();
  if (state.loss <= target) {
    state.status = ReversalStatus::converged;
    return state;
  }

  double step = config.learning_rate;
  if (config.normalize_step) {
    const double h = gauss_newton_scale<Scalar>(spec, state.theta);
    if (!(h > 0.0)) {
      state.status = ReversalStatus::stalled;
      return state;
    }
    step /= h;
  }

  std::vector<Particle> candidate = state.theta;
  for (int it = 1; it <= config.max_iters; ++it) {
    const Eigen::MatrixX3d g = loss_gradient(reference, std::span<const Particle>(state.theta));
    if (!g.allFinite()) {
      state.status = ReversalStatus::diverged;
      return state;
    }
    bool accepted = false;
    double s = step;
    for (int b = 0; b <= config.max_backoff; ++b, s *= 0.5) {
      for (std::size_t p = 0; p < candidate.size(); ++p)
        candidate[p].position = state.theta[p].position - s * g.row(static_cast<Eigen::Index>(p)).transpose();
      const double l = loss(reference, std::span<const Particle>(candidate));
      if (!std::isfinite(l)) {
        state.status = ReversalStatus::diverged;
        return state;
      }
      if (l < state.loss) {
        state.theta = candidate;
        state.loss = l;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      state.status = ReversalStatus::stalled;
      return state;
    }
    state.iterations = it;
    state.history.push_back(state.loss);
    if (state.loss <= target) {
      state.status = ReversalStatus::converged;
      return state;
    }
  }
  state.status = ReversalStatus::max_iters;
  return state;
}

template <typename Scalar>
ReversalState refine_coords(const Grid<Scalar>& reference, const PeakSet& seeds, const ReversalConfig& config) {
  return refine_coords(reference, seeds.seeds(), config);
}

/// Copy of channel `c` as a single-channel grid.
template <typename Scalar>
Grid<Scalar> extract_channel(const Grid<Scalar>& grid, int c) {
  GridSpec spec = grid.spec();
  if (c < 0 || c >= spec.channels) throw Error("channel out of range");
  spec.channels = 1;
  return Grid<Scalar>(spec, grid.channel(c));
}

struct ReversalResult {
  ParticleSet particles;
  std::vector<std::string> warnings;
  std::vector<ReversalState> channels;  // one per channel that had peaks
};

/// detect_peaks -> refine_coords, independently per channel.
template <typename Scalar>
ReversalResult reverse_grid(const Grid<Scalar>& grid, const ReversalConfig& config = {}) {
  config.validate();
  const GridSpec& spec = grid.spec();
  ReversalResult result;
  result.particles.lattice = spec.periodic;
  for (int c = 0; c < spec.channels; ++c) {
    const Grid<Scalar> single = extract_channel(grid, c);
    const PeakSet peaks = detect_peaks(single, config.persistence_threshold);
    const double mass = single.sum();
    const auto expected = static_cast<long long>(std::llround(mass));
    if (expected != static_cast<long long>(peaks.size())) {
      result.warnings.push_back("channel " + std::to_string(c) + ": grid mass " + std::to_string(mass) +
                                " suggests " + std::to_string(expected) + " particles but " +
                                std::to_string(peaks.size()) + " peaks were found; using the peak count");
    }
    if (peaks.empty()) continue;
    ReversalState state = refine_coords(single, peaks, config);
    if (state.status == ReversalStatus::diverged)
      result.warnings.push_back("channel " + std::to_string(c) + ": refinement diverged; returning best coordinates");
    for (const auto& p : state.theta) result.particles.particles.push_back({c, p.position});
    result.channels.push_back(std::move(state));
  }
  result.particles.canonicalize();
  return result;
}

}  // namespace gaussgrid
