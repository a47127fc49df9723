#include <doctest.h>

#include "gaussgrid/gridgen.hpp"
#include "oracles.hpp"

#include <random>

using namespace gaussgrid;

namespace {

GenOptions in(Mode m) {
  GenOptions o;
  o.mode = m;
  return o;
}

GridSpec unit_spec(Eigen::Index n, int channels, double sigma) {
  return GridSpec::cubic(n, channels, BoundingBox{}, sigma);
}

// particles kept 4 sigma away from every face of [0, 1)^3
ParticleSet random_inside(std::mt19937_64& rng, int count, int channels, double sigma) {
  std::uniform_real_distribution<double> u(4 * sigma, 1.0 - 4 * sigma);
  std::uniform_int_distribution<int> ch(0, channels - 1);
  ParticleSet s;
  for (int i = 0; i < count; ++i) s.particles.push_back({ch(rng), Vec3(u(rng), u(rng), u(rng))});
  return s;
}

}  // namespace

TEST_CASE("octants of a centred particle") {
  Grid<float> g(unit_spec(2, 1, 0.02));
  splat_atom(g, 0, Vec3::Constant(0.5));
  for (Eigen::Index i = 0; i < 8; ++i) CHECK(std::abs(g.data()(i) - 0.125f) < 1e-4f);
}

TEST_CASE("a single particle adds unit mass") {
  Grid<float> g(unit_spec(32, 2, 0.05));
  splat_atom(g, 1, Vec3(0.31, 0.5, 0.62));
  CHECK(std::abs(g.channel_sum(1) - 1.0) < 1e-3);
  CHECK(g.channel_sum(0) == 0.0);
}

TEST_CASE("splat_atom argument checks") {
  Grid<float> g(unit_spec(8, 2, 0.05));
  CHECK_THROWS_AS(splat_atom(g, 2, Vec3::Constant(0.5)), Error);
  CHECK_THROWS_AS(splat_atom(g, -1, Vec3::Constant(0.5)), Error);
  CHECK_THROWS_AS(splat_atom(g, 0, Vec3(0.5, NAN, 0.5)), Error);
}

TEST_CASE("sparse visits a small neighbourhood and matches dense") {
  // 32-unit box at 64^3 (voxel 0.5 = sigma)
  const auto spec = GridSpec::cubic(64, 1, BoundingBox{Vec3::Zero(), Vec3::Constant(32.0)}, 0.5);
  Grid<float> dense(spec), sparse(spec);
  const Vec3 p(16.13, 15.77, 16.4);
  const auto sd = splat_atom(dense, 0, p, in(Mode::dense));
  const auto ss = splat_atom(sparse, 0, p, in(Mode::sparse));
  CHECK(sd.voxel_writes == 64 * 64 * 64);
  CHECK(static_cast<double>(ss.voxel_writes) / sd.voxel_writes < 0.05);
  CHECK((dense.data() == sparse.data()).all());
  CHECK(sd.erf_evals == 3 * 65);
  CHECK(ss.erf_evals == 3 * 65);
}

TEST_CASE("saturation support on a 12-unit box") {
  // about +-3.9 sigma sqrt 2 per side survives float saturation, i.e. roughly
  // 30 of 64 voxels per axis at this resolution
  const auto spec = GridSpec::cubic(64, 1, BoundingBox{Vec3::Zero(), Vec3::Constant(12.0)}, 0.5);
  Grid<float> dense(spec), sparse(spec);
  const Vec3 p = Vec3::Constant(6.01);
  const auto ss = splat_atom(sparse, 0, p);
  splat_atom(dense, 0, p, in(Mode::dense));
  const double frac = static_cast<double>(ss.voxel_writes) / (64.0 * 64 * 64);
  CHECK(frac < 0.2);
  CHECK((dense.data() == sparse.data()).all());
  CHECK(sparse.count_nonzero() == ss.voxel_writes);
}

TEST_CASE("every voxel equals the per-voxel product formula") {
  std::mt19937_64 rng(21);
  GridSpec spec;
  spec.shape = Index3(9, 12, 7);
  spec.box = BoundingBox{Vec3(-1, 0.5, 2), Vec3(2.0, 3.0, 1.5)};
  spec.sigma = 0.2;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 5; ++rep) {
    const Vec3 p = spec.box.origin + spec.box.extents.cwiseProduct(Vec3(u(rng), u(rng), u(rng)));
    Grid<double> g(spec);
    splat_atom(g, 0, p, in(Mode::dense));
    for (Eigen::Index i = 0; i < 9; ++i)
      for (Eigen::Index j = 0; j < 12; ++j)
        for (Eigen::Index k = 0; k < 7; ++k)
          CHECK(g(0, i, j, k) == doctest::Approx(oracle::direct_voxel(spec, p, Index3(i, j, k))).epsilon(1e-12).scale(1e-300));
  }
}

TEST_CASE("generate_grid: empty set and normalization") {
  const auto spec = unit_spec(32, 3, 0.03);
  const auto [empty, es] = generate_grid<float>(ParticleSet{}, spec);
  CHECK(empty.count_nonzero() == 0);
  CHECK(es.voxel_writes == 0);

  std::mt19937_64 rng(8);
  const auto pts = random_inside(rng, 10, 3, 0.03);
  const auto [g, st] = generate_grid<float>(pts, spec);
  CHECK(std::abs(g.sum() - 10.0) < 1e-2);
  for (int c = 0; c < 3; ++c) CHECK(std::abs(g.channel_sum(c) - static_cast<double>(pts.count_on(c))) < 1e-3 * 10);
  CHECK(st.nonzero_voxels == g.count_nonzero());
  CHECK(st.nonzero_voxels <= spec.total_voxels());
  CHECK(st.erf_evals == 10 * 3 * 33);
}

TEST_CASE("sparse and dense agree bitwise on random sets") {
  std::mt19937_64 rng(99);
  for (double sigma : {0.02, 0.05}) {
    const auto spec = unit_spec(32, 2, sigma);
    for (int rep = 0; rep < 5; ++rep) {
      std::uniform_real_distribution<double> u(-0.1, 1.1);  // some particles outside the box
      ParticleSet s;
      for (int i = 0; i < 20; ++i) s.particles.push_back({i % 2, Vec3(u(rng), u(rng), u(rng))});
      const auto [d, ds] = generate_grid<float>(s, spec, in(Mode::dense));
      const auto [p, ps] = generate_grid<float>(s, spec, in(Mode::sparse));
      CHECK((d.data() == p.data()).all());
      CHECK(ps.voxel_writes <= ds.voxel_writes);
    }
  }
}

TEST_CASE("threshold truncation stays within the bound") {
  std::mt19937_64 rng(4);
  const auto spec = unit_spec(32, 1, 0.05);
  const auto pts = random_inside(rng, 5, 1, 0.05);
  GenOptions thr;
  thr.threshold = 1e-8;
  const auto [d, ds] = generate_grid<float>(pts, spec, in(Mode::dense));
  const auto [t, ts] = generate_grid<float>(pts, spec, thr);
  CHECK((d.data() - t.data()).abs().maxCoeff() <= 1e-8f * 3 * 5);
}

TEST_CASE("translation of particles and box together leaves the grid unchanged") {
  // dyadic coordinates and shifts keep every subtraction exact
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> q(64, 192);
  GridSpec spec = GridSpec::cubic(24, 1, BoundingBox{Vec3::Zero(), Vec3::Constant(6.0)}, 0.25);
  ParticleSet s;
  for (int i = 0; i < 6; ++i) s.particles.push_back({0, Vec3(q(rng), q(rng), q(rng)) / 32.0});
  const auto [g0, s0] = generate_grid<float>(s, spec);
  for (const Vec3& shift : {Vec3(1.5, -2.25, 0.125), Vec3(-64.0, 8.0, 1024.5)}) {
    GridSpec moved = spec;
    moved.box.origin += shift;
    ParticleSet t = s;
    for (auto& p : t.particles) p.position += shift;
    const auto [g1, s1] = generate_grid<float>(t, moved);
    CHECK((g0.data() == g1.data()).all());
  }
}

TEST_CASE("periodic grids conserve mass at the cell faces") {
  GridSpec spec = unit_spec(20, 1, 0.05);
  spec.periodic = LatticeCell{Vec3::Ones()};
  for (const Vec3& p : {Vec3(0, 0, 0), Vec3(0.999, 0.5, 0.0), Vec3(1.0, 1.0, 1.0), Vec3(-0.3, 2.7, 0.02)}) {
    ParticleSet s;
    s.lattice = spec.periodic;
    s.particles.push_back({0, p});
    const auto [g, st] = generate_grid<float>(s, spec);
    CHECK(std::abs(g.sum() - 1.0) < 1e-3);
    CHECK(st.erf_evals == 3 * 3 * 21);
  }
  ParticleSet wrong;
  wrong.lattice = LatticeCell{Vec3::Constant(2.0)};
  CHECK_THROWS_AS(generate_grid<float>(wrong, spec), Error);
}

TEST_CASE("batch: single item equals generate_grid") {
  std::mt19937_64 rng(1);
  const auto spec = unit_spec(16, 2, 0.05);
  std::vector<ParticleSet> batch{random_inside(rng, 7, 2, 0.05)};
  SpecPolicy pol;
  pol.spec = spec;
  const auto out = generate_batch(batch, pol, 1);
  REQUIRE(out.size() == 1);
  REQUIRE(out[0].ok());
  const auto [g, st] = generate_grid<float>(batch[0], spec);
  CHECK((out[0].grid->data() == g.data()).all());
}

TEST_CASE("batch output does not depend on parallelism") {
  std::mt19937_64 rng(2);
  std::vector<ParticleSet> batch;
  for (int i = 0; i < 24; ++i) batch.push_back(random_inside(rng, 3 + i % 9, 2, 0.05));
  for (auto kind : {SpecPolicy::Kind::fixed, SpecPolicy::Kind::per_molecule_bbox}) {
    SpecPolicy pol;
    pol.kind = kind;
    pol.spec = unit_spec(16, 2, 0.05);
    const auto a = generate_batch(batch, pol, 1);
    const auto b = generate_batch(batch, pol, 8);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      REQUIRE(a[i].ok());
      REQUIRE(b[i].ok());
      CHECK(a[i].grid->spec() == b[i].grid->spec());
      CHECK((a[i].grid->data() == b[i].grid->data()).all());
    }
  }
}

TEST_CASE("per-molecule boxes hold the whole mass") {
  std::mt19937_64 rng(6);
  SpecPolicy pol;
  pol.kind = SpecPolicy::Kind::per_molecule_bbox;
  pol.spec = unit_spec(32, 1, 0.4);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int rep = 0; rep < 5; ++rep) {
    ParticleSet s;
    for (int i = 0; i < 6; ++i) s.particles.push_back({0, Vec3(u(rng), u(rng), u(rng))});
    const GridSpec r = pol.resolve(s);
    const auto [g, st] = generate_grid<float>(s, r);
    CHECK(std::abs(g.sum() - 6.0) < 6e-3);
  }
}

TEST_CASE("batch reports failures per item") {
  SpecPolicy pol;
  pol.spec = unit_spec(8, 1, 0.05);
  std::vector<ParticleSet> batch(3);
  batch[0].particles.push_back({0, Vec3::Constant(0.5)});
  batch[1].particles.push_back({5, Vec3::Constant(0.5)});  // bad channel
  batch[2].particles.push_back({0, Vec3::Constant(0.25)});
  const auto out = generate_batch(batch, pol, 2);
  CHECK(out[0].ok());
  CHECK_FALSE(out[1].ok());
  CHECK(out[1].error.find("channel") != std::string::npos);
  CHECK(out[2].ok());
  CHECK_THROWS_AS(generate_batch(batch, pol, 0), Error);
}
