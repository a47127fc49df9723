#include "gaussgrid/cli.hpp"

#include "gaussgrid/bench.hpp"
#include "gaussgrid/gridgen.hpp"
#include "gaussgrid/io.hpp"
#include "gaussgrid/reversal.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

namespace gaussgrid {

namespace {

using nlohmann::json;

Vec3 vec3_from(const std::vector<double>& v, const char* what) {
  if (v.size() == 1) return Vec3::Constant(v[0]);
  if (v.size() == 3) return Vec3(v[0], v[1], v[2]);
  throw Error(std::string(what) + " takes 1 or 3 comma-separated values");
}

std::string lower_extension(const std::string& path) {
  std::string ext = std::filesystem::path(path).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error("error writing " + path.string());
}

json vec_json(const Vec3& v) { return json::array({v(0), v(1), v(2)}); }

Vec3 vec_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw Error("stats file: expected a 3-element array");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

struct GridArgs {
  std::string input;
  std::string format = "auto";
  std::vector<long> grid_size{32};
  double variance = 0.05;
  std::string channels = "auto";
  double padding_sigmas = 4.0;
  std::vector<double> periodic;
  std::vector<double> origin;
  std::vector<double> extent;
  std::string mode = "sparse";
  double threshold = 0.0;
  std::string output;
  std::string stats;
};

int run_grid(const GridArgs& a, bool padding_given, bool threshold_given, std::ostream& out) {
  if (a.grid_size.size() != 1 && a.grid_size.size() != 3) throw Error("--grid-size takes N or N,N,N");
  if (!a.periodic.empty() && (padding_given || !a.origin.empty() || !a.extent.empty()))
    throw Error("--periodic fixes the box to the cell; it cannot be combined with --padding-sigmas, --origin or --extent");
  if (!a.extent.empty() && padding_given) throw Error("--padding-sigmas only applies to automatic boxes, not --extent");
  if (!a.origin.empty() && a.extent.empty()) throw Error("--origin requires --extent");
  if (a.mode != "dense" && a.mode != "sparse") throw Error("--mode must be dense or sparse");

  std::string format = a.format;
  if (format == "auto") {
    const auto ext = lower_extension(a.input);
    format = ext == ".xyz" ? "xyz" : ext == ".csv" ? "csv" : "";
    if (format.empty()) throw Error("cannot infer input format from '" + a.input + "'; pass --format xyz|csv");
  }
  const std::string text = read_text_file(a.input);
  const ChannelPolicy policy = ChannelPolicy::parse(a.channels);

  ParticleSet points;
  int channels = 1;
  std::vector<int> legend;
  if (format == "xyz") {
    auto assigned = assign_channels(parse_xyz(text), policy);
    points = std::move(assigned.particles);
    channels = assigned.channels;
    legend = std::move(assigned.legend);
  } else if (format == "csv") {
    points = parse_points_csv(text);
    const int used = points.channel_count();
    switch (policy.kind) {
      case ChannelPolicy::Kind::automatic: channels = std::max(1, used); break;
      case ChannelPolicy::Kind::single:
        for (auto& p : points.particles) p.channel = 0;
        channels = 1;
        break;
      case ChannelPolicy::Kind::fixed:
        if (used > policy.channels)
          throw Error("input uses channel " + std::to_string(used - 1) + " but --channels is " +
                      std::to_string(policy.channels));
        channels = policy.channels;
        break;
    }
  } else {
    throw Error("--format must be auto, xyz or csv");
  }

  GridSpec spec;
  spec.shape = a.grid_size.size() == 1 ? Index3::Constant(a.grid_size[0])
                                       : Index3(a.grid_size[0], a.grid_size[1], a.grid_size[2]);
  spec.channels = channels;
  spec.sigma = a.variance;
  if (!a.periodic.empty()) {
    LatticeCell cell{vec3_from(a.periodic, "--periodic")};
    spec.periodic = cell;
    spec.box.origin = Vec3::Zero();
    spec.box.extents = cell.edges;
    points.lattice = cell;
    points.canonicalize();
  } else if (!a.extent.empty()) {
    spec.box.extents = vec3_from(a.extent, "--extent");
    spec.box.origin = a.origin.empty() ? Vec3::Zero() : vec3_from(a.origin, "--origin");
  } else {
    if (points.empty()) throw Error("input has no particles; pass --extent to define the box");
    spec.box = bounding_box_of(points, a.variance, a.padding_sigmas);
  }
  spec.validate();

  GenOptions opt;
  opt.mode = a.mode == "dense" ? Mode::dense : Mode::sparse;
  if (threshold_given) opt.threshold = a.threshold;
  const auto [grid, stats] = generate_grid<float>(points, spec, opt);
  write_npy(a.output, grid);

  json per_channel = json::array();
  for (int c = 0; c < spec.channels; ++c) per_channel.push_back(grid.channel_sum(c));
  if (!a.stats.empty()) {
    json j;
    j["sum"] = grid.sum();
    j["per_channel_sums"] = per_channel;
    j["nonzero_voxels"] = stats.nonzero_voxels;
    j["erf_evals"] = stats.erf_evals;
    j["elapsed_ms"] = stats.elapsed_ms();
    j["voxel_writes"] = stats.voxel_writes;
    j["particles"] = points.size();
    j["shape"] = json::array({spec.channels, spec.shape(0), spec.shape(1), spec.shape(2)});
    j["sigma"] = spec.sigma;
    j["box"] = {{"origin", vec_json(spec.box.origin)}, {"extents", vec_json(spec.box.extents)}};
    j["periodic"] = spec.periodic ? vec_json(spec.periodic->edges) : json(nullptr);
    j["mode"] = a.mode;
    json elements = json::array();
    for (const int z : legend) elements.push_back(std::string(element_symbol(z)));
    j["channel_elements"] = elements;
    write_file(a.stats, j.dump(2) + "\n");
  }
  out << "wrote " << a.output << ": shape (" << spec.channels << ", " << spec.shape(0) << ", " << spec.shape(1) << ", "
      << spec.shape(2) << "), sum " << grid.sum() << " for " << points.size() << " particles\n";
  return 0;
}

struct ReverseArgs {
  std::string input;
  std::string stats;
  double variance = 0.0;
  std::vector<double> origin;
  std::vector<double> extent;
  std::vector<double> periodic;
  ReversalConfig config;
  std::string output;
};

int run_reverse(const ReverseArgs& a, bool variance_given, std::ostream& out, std::ostream& err) {
  GridSpec spec;
  spec.box.origin = Vec3::Zero();
  spec.box.extents = Vec3::Ones();
  bool have_sigma = false;
  if (!a.stats.empty()) {
    json j;
    try {
      j = json::parse(read_text_file(a.stats));
      spec.sigma = j.at("sigma").get<double>();
      spec.box.origin = vec_from_json(j.at("box").at("origin"));
      spec.box.extents = vec_from_json(j.at("box").at("extents"));
      if (j.contains("periodic") && !j["periodic"].is_null()) spec.periodic = LatticeCell{vec_from_json(j["periodic"])};
    } catch (const json::exception& e) {
      throw Error("invalid stats file " + a.stats + ": " + e.what());
    }
    have_sigma = true;
  }
  if (variance_given) {
    spec.sigma = a.variance;
    have_sigma = true;
  }
  if (!have_sigma) throw Error("reverse needs --variance (or --stats from the grid run)");
  if (!a.extent.empty()) spec.box.extents = vec3_from(a.extent, "--extent");
  if (!a.origin.empty()) spec.box.origin = vec3_from(a.origin, "--origin");
  if (!a.periodic.empty()) {
    spec.periodic = LatticeCell{vec3_from(a.periodic, "--periodic")};
    spec.box.origin = Vec3::Zero();
    spec.box.extents = spec.periodic->edges;
  }

  const Grid<float> grid = to_grid(read_npy(a.input), spec);
  const ReversalResult result = reverse_grid(grid, a.config);
  for (const auto& w : result.warnings) err << "warning: " << w << '\n';

  std::ostringstream csv;
  csv << "channel,x,y,z\n" << std::setprecision(9);
  for (const auto& p : result.particles.particles)
    csv << p.channel << ',' << p.position(0) << ',' << p.position(1) << ',' << p.position(2) << '\n';
  write_file(a.output, csv.str());
  out << "wrote " << a.output << ": " << result.particles.size() << " particles\n";
  return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gaussian density voxel grids for typed point clouds", "gaussgrid"};
  app.require_subcommand(1);

  GridArgs g;
  auto* grid_cmd = app.add_subcommand("grid", "Voxelize an .xyz or (channel,x,y,z) .csv file into an .npy grid");
  grid_cmd->add_option("--input", g.input, "Input .xyz or .csv file")->required();
  grid_cmd->add_option("--format", g.format, "auto, xyz or csv")->capture_default_str();
  grid_cmd->add_option("--grid-size", g.grid_size, "Voxels per axis: N or N,N,N")->delimiter(',')->capture_default_str();
  grid_cmd->add_option("--variance", g.variance, "Gaussian width sigma")->capture_default_str();
  grid_cmd->add_option("--channels", g.channels, "auto, single or a channel count")->capture_default_str();
  auto* padding_opt =
      grid_cmd->add_option("--padding-sigmas", g.padding_sigmas, "Box padding around the particles, in sigmas")
          ->capture_default_str();
  grid_cmd->add_option("--periodic", g.periodic, "Orthorhombic cell edges a,b,c")->delimiter(',');
  grid_cmd->add_option("--origin", g.origin, "Box origin x,y,z (with --extent)")->delimiter(',');
  grid_cmd->add_option("--extent", g.extent, "Box extents A or A,B,C")->delimiter(',');
  grid_cmd->add_option("--mode", g.mode, "dense or sparse")->capture_default_str();
  auto* threshold_opt = grid_cmd->add_option("--threshold", g.threshold, "Skip axis values below this (sparse mode)");
  grid_cmd->add_option("--output", g.output, "Output .npy file")->required();
  grid_cmd->add_option("--stats", g.stats, "Write generation statistics as JSON");

  ReverseArgs r;
  auto* rev_cmd = app.add_subcommand("reverse", "Recover particle coordinates from an .npy grid");
  rev_cmd->add_option("--input", r.input, "Input .npy grid")->required();
  auto* variance_opt = rev_cmd->add_option("--variance", r.variance, "Gaussian width sigma used to build the grid");
  rev_cmd->add_option("--stats", r.stats, "Stats JSON from `grid` (supplies sigma, box and cell)");
  rev_cmd->add_option("--origin", r.origin, "Box origin x,y,z (default 0,0,0)")->delimiter(',');
  rev_cmd->add_option("--extent", r.extent, "Box extents A or A,B,C (default 1)")->delimiter(',');
  rev_cmd->add_option("--periodic", r.periodic, "Orthorhombic cell edges a,b,c")->delimiter(',');
  rev_cmd->add_option("--learning-rate", r.config.learning_rate, "Step size (fraction of inverse curvature)")
      ->capture_default_str();
  rev_cmd->add_option("--tolerance", r.config.tolerance, "Stop when loss <= tolerance * mean(grid^2)")
      ->capture_default_str();
  rev_cmd->add_option("--max-iters", r.config.max_iters, "Iteration cap")->capture_default_str();
  rev_cmd->add_option("--persistence-threshold", r.config.persistence_threshold,
                      "Minimum peak persistence as a fraction of the channel maximum")
      ->capture_default_str();
  rev_cmd->add_option("--output", r.output, "Output (channel,x,y,z) .csv")->required();

  BenchConfig b;
  std::string corpus_dir;
  std::string report_path;
  auto* bench_cmd = app.add_subcommand("bench", "Time dense vs sparse generation over a molecule corpus");
  bench_cmd->add_option("--sizes", b.sizes, "Grid sizes")->delimiter(',')->capture_default_str();
  bench_cmd->add_option("--variances", b.variances, "Gaussian widths")->delimiter(',')->capture_default_str();
  bench_cmd->add_option("--repeats", b.repeats, "Timed passes over the corpus")->capture_default_str();
  bench_cmd->add_option("--corpus", corpus_dir, "Directory of .xyz molecules (default: synthetic corpus)");
  bench_cmd->add_option("--molecules", b.corpus.molecules, "Synthetic corpus size")->capture_default_str();
  bench_cmd->add_option("--seed", b.corpus.seed, "Synthetic corpus seed")->capture_default_str();
  bench_cmd->add_option("--box-scale", b.corpus.box_scale, "Edge of the cubic box molecules are centered in")
      ->capture_default_str();
  bench_cmd->add_option("--jobs", b.jobs, "Threads for the batch throughput measurement")->capture_default_str();
  bench_cmd->add_option("--output", report_path, "Write the report as JSON");

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*grid_cmd) return run_grid(g, padding_opt->count() > 0, threshold_opt->count() > 0, out);
    if (*rev_cmd) return run_reverse(r, variance_opt->count() > 0, out, err);
    if (*bench_cmd) {
      if (!corpus_dir.empty()) b.corpus_dir = corpus_dir;
      const BenchReport report = run_benchmark(b);
      out << report.to_table();
      if (!report_path.empty()) write_file(report_path, report.to_json() + "\n");
      return 0;
    }
  } catch (const std::exception& e) {
    err << "gaussgrid: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

int cli_main(int argc, const char* const* argv) {
  std::vector<std::string> args(argv, argv + argc);
  if (args.empty()) args.emplace_back("gaussgrid");
  return cli_main(args, std::cout, std::cerr);
}

}  // namespace gaussgrid
