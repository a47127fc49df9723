#include "gaussgrid/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gaussgrid {

void BoundingBox::validate() const {
  if (!origin.allFinite() || !extents.allFinite()) throw Error("bounding box is not finite");
  if ((extents.array() <= 0.0).any()) throw Error("bounding box extents must be positive");
}

void LatticeCell::validate() const {
  if (!edges.allFinite() || (edges.array() <= 0.0).any())
    throw Error("lattice cell edges must be positive and finite");
}

void GridSpec::validate() const {
  if ((shape < 1).any()) throw Error("grid shape must be at least 1 along every axis");
  if (channels < 1) throw Error("channel count must be at least 1");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw Error("sigma must be positive");
  box.validate();
  if (periodic) {
    periodic->validate();
    const double tol = 1e-9 * periodic->edges.maxCoeff();
    if (((box.extents - periodic->edges).array().abs() > tol).any())
      throw Error("periodic grids require box extents equal to the cell edges");
  }
}

GridSpec GridSpec::cubic(Eigen::Index n, int channels, const BoundingBox& box, double sigma) {
  GridSpec spec;
  spec.shape = Index3::Constant(n);
  spec.channels = channels;
  spec.box = box;
  spec.sigma = sigma;
  spec.validate();
  return spec;
}

bool operator==(const BoundingBox& a, const BoundingBox& b) {
  return a.origin == b.origin && a.extents == b.extents;
}

bool operator==(const LatticeCell& a, const LatticeCell& b) { return a.edges == b.edges; }

bool operator==(const GridSpec& a, const GridSpec& b) {
  return (a.shape == b.shape).all() && a.channels == b.channels && a.box == b.box &&
         a.sigma == b.sigma && a.periodic == b.periodic;
}

int ParticleSet::channel_count() const {
  int n = 0;
  for (const auto& p : particles) n = std::max(n, p.channel + 1);
  return n;
}

std::size_t ParticleSet::count_on(int c) const {
  return static_cast<std::size_t>(
      std::count_if(particles.begin(), particles.end(), [c](const Particle& p) { return p.channel == c; }));
}

void ParticleSet::canonicalize() {
  if (!lattice) return;
  for (auto& p : particles) {
    for (int a = 0; a < 3; ++a) {
      const double edge = lattice->edges(a);
      double x = p.position(a) - std::floor(p.position(a) / edge) * edge;
      if (x >= edge) x -= edge;  // floor rounding can land exactly on edge
      if (x < 0.0) x = 0.0;
      p.position(a) = x;
    }
  }
}

BoundingBox bounding_box_of(const ParticleSet& points, double sigma, double padding_sigmas,
                            std::optional<double> min_extent) {
  if (points.empty()) throw Error("cannot bound an empty point set");
  if (!(padding_sigmas >= 0.0)) throw Error("padding_sigmas must be nonnegative");
  if (!(sigma > 0.0)) throw Error("sigma must be positive");

  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& p : points.particles) {
    if (!p.position.allFinite()) throw Error("non-finite particle position");
    lo = lo.cwiseMin(p.position);
    hi = hi.cwiseMax(p.position);
  }
  const double pad = padding_sigmas * sigma;
  const double floor_extent = min_extent.value_or(2.0 * pad);

  BoundingBox box;
  box.origin = lo.array() - pad;
  box.extents = (hi - lo).array() + 2.0 * pad;
  for (int a = 0; a < 3; ++a) {
    if (box.extents(a) < floor_extent) {
      const double grow = 0.5 * (floor_extent - box.extents(a));
      box.origin(a) -= grow;
      box.extents(a) = floor_extent;
    }
  }
  if ((box.extents.array() <= 0.0).any())
    throw Error("degenerate bounding box: an axis has zero extent and no floor was given");
  return box;
}

Vec3 voxel_to_world(const GridSpec& spec, const Index3& index) {
  if ((index < 0).any() || (index >= spec.shape).any()) throw Error("voxel index out of range");
  return spec.box.origin.array() + index.cast<double>() * spec.voxel_size().array();
}

Vec3 voxel_center(const GridSpec& spec, const Index3& index) {
  return voxel_to_world(spec, index) + 0.5 * spec.voxel_size();
}

Index3 world_to_voxel(const GridSpec& spec, const Vec3& p) {
  const Eigen::Array3d rel = (p - spec.box.origin).array() / spec.voxel_size().array();
  Index3 idx = rel.floor().cast<Eigen::Index>();
  if (!rel.allFinite() || (idx < 0).any() || (idx >= spec.shape).any())
    throw Error("point lies outside the grid box");
  return idx;
}

}  // namespace gaussgrid
