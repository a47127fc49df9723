#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gaussgrid {

using Vec3 = Eigen::Vector3d;
using Index3 = Eigen::Array<Eigen::Index, 3, 1>;

/// Raised for invalid arguments and violated preconditions.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BoundingBox {
  Vec3 origin = Vec3::Zero();
  Vec3 extents = Vec3::Ones();

  Vec3 upper() const { return origin + extents; }
  void validate() const;
};

/// Orthorhombic periodic cell with edges (a, b, c).
struct LatticeCell {
  Vec3 edges = Vec3::Ones();

  void validate() const;
};

/// Geometry of a voxel grid. shape(0..2) are the voxel counts along x, y, z
/// (written H, W, D in the tensor layout [channels][H][W][D]).
struct GridSpec {
  Index3 shape = Index3::Constant(32);
  int channels = 1;
  BoundingBox box;
  double sigma = 0.05;
  std::optional<LatticeCell> periodic;

  Vec3 voxel_size() const { return box.extents.array() / shape.cast<double>(); }
  Eigen::Index voxels_per_channel() const { return shape.prod(); }
  Eigen::Index total_voxels() const { return voxels_per_channel() * channels; }

  /// Throws Error when any invariant is violated.
  void validate() const;

  /// Cubic N^3 grid over `box`.
  static GridSpec cubic(Eigen::Index n, int channels, const BoundingBox& box, double sigma);
};

bool operator==(const BoundingBox& a, const BoundingBox& b);
bool operator==(const LatticeCell& a, const LatticeCell& b);
bool operator==(const GridSpec& a, const GridSpec& b);

struct Particle {
  int channel = 0;
  Vec3 position = Vec3::Zero();
};

struct ParticleSet {
  std::vector<Particle> particles;
  std::optional<LatticeCell> lattice;

  std::size_t size() const { return particles.size(); }
  bool empty() const { return particles.empty(); }

  /// One past the largest channel index (0 when empty).
  int channel_count() const;

  /// Number of particles on channel `c`.
  std::size_t count_on(int c) const;

  /// Wraps every position into [0, edge) per axis. No-op without a lattice.
  void canonicalize();
};

/// Dense channel-major density grid [channels][H][W][D], row-contiguous in D.
template <typename Scalar>
class Grid {
 public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using Row = Eigen::Map<Array>;
  using ConstRow = Eigen::Map<const Array>;

  Grid() = default;

  explicit Grid(GridSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    data_ = Array::Zero(spec_.total_voxels());
  }

  Grid(GridSpec spec, Array data) : spec_(std::move(spec)), data_(std::move(data)) {
    spec_.validate();
    if (data_.size() != spec_.total_voxels()) throw Error("grid data size does not match spec");
  }

  const GridSpec& spec() const { return spec_; }
  Eigen::Index size() const { return data_.size(); }

  Array& data() { return data_; }
  const Array& data() const { return data_; }

  Eigen::Index offset(int c, Eigen::Index i, Eigen::Index j, Eigen::Index k) const {
    const auto& s = spec_.shape;
    return ((c * s(0) + i) * s(1) + j) * s(2) + k;
  }

  Scalar& operator()(int c, Eigen::Index i, Eigen::Index j, Eigen::Index k) {
    return data_(offset(c, i, j, k));
  }
  Scalar operator()(int c, Eigen::Index i, Eigen::Index j, Eigen::Index k) const {
    return data_(offset(c, i, j, k));
  }

  /// The D-contiguous row at (c, i, j).
  Row row(int c, Eigen::Index i, Eigen::Index j) {
    return Row(data_.data() + offset(c, i, j, 0), spec_.shape(2));
  }
  ConstRow row(int c, Eigen::Index i, Eigen::Index j) const {
    return ConstRow(data_.data() + offset(c, i, j, 0), spec_.shape(2));
  }

  Row channel(int c) {
    return Row(data_.data() + offset(c, 0, 0, 0), spec_.voxels_per_channel());
  }
  ConstRow channel(int c) const {
    return ConstRow(data_.data() + offset(c, 0, 0, 0), spec_.voxels_per_channel());
  }

  /// Sum accumulated in double.
  double sum() const { return data_.template cast<double>().sum(); }
  double channel_sum(int c) const { return channel(c).template cast<double>().sum(); }

  Eigen::Index count_nonzero() const { return (data_ != Scalar(0)).count(); }

  template <typename Other>
  Grid<Other> cast() const {
    return Grid<Other>(spec_, data_.template cast<Other>());
  }

 private:
  GridSpec spec_;
  Array data_;
};

/// Axis-aligned box around `points` grown by padding_sigmas * sigma on each face.
/// Axes thinner than `min_extent` are widened symmetrically to `min_extent`;
/// by default that floor is 2 * padding_sigmas * sigma.
BoundingBox bounding_box_of(const ParticleSet& points, double sigma, double padding_sigmas = 4.0,
                            std::optional<double> min_extent = std::nullopt);

/// Left endpoint (x_i, y_j, z_k) of voxel (i, j, k).
Vec3 voxel_to_world(const GridSpec& spec, const Index3& index);

/// Center of voxel (i, j, k).
Vec3 voxel_center(const GridSpec& spec, const Index3& index);

/// Voxel whose half-open cell contains p. Throws when p lies outside the box.
Index3 world_to_voxel(const GridSpec& spec, const Vec3& p);

}  // namespace gaussgrid
