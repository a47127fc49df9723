#pragma once

#include "gaussgrid/core.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gaussgrid {

/// Input error located at a 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Atomic number (1..118) of an element symbol, case-insensitive; nullopt if unknown.
std::optional<int> atomic_number(std::string_view symbol);

/// Canonical symbol for an atomic number in 1..118.
std::string_view element_symbol(int z);

struct MoleculeFile {
  std::string comment;
  std::vector<int> atomic_numbers;
  std::vector<Vec3> positions;

  std::size_t size() const { return positions.size(); }
};

/// How element symbols become channels.
struct ChannelPolicy {
  enum class Kind { automatic, single, fixed };

  Kind kind = Kind::automatic;
  int channels = 0;  // for Kind::fixed

  /// "auto", "single" or a positive integer.
  static ChannelPolicy parse(std::string_view text);
};

struct ChannelAssignment {
  ParticleSet particles;
  int channels = 1;
  std::vector<int> legend;  // atomic number per channel; empty in single mode
};

/// Distinct elements sorted by atomic number map to channels 0..C-1; `single`
/// puts every atom on channel 0; `fixed` K requires at most K distinct elements.
ChannelAssignment assign_channels(const MoleculeFile& mol, const ChannelPolicy& policy = {});

/// Standard XYZ: atom count, comment line, then "Symbol x y z" rows.
MoleculeFile parse_xyz(std::string_view text);

/// Rows of "channel,x,y,z" with an optional header row.
ParticleSet parse_points_csv(std::string_view text);

std::string read_text_file(const std::filesystem::path& path);

/// Contents of an .npy file: little-endian float32, C order.
struct NpyArray {
  std::vector<std::int64_t> shape;
  std::vector<float> data;
};

/// Serializes as NPY v1.0 '<f4', C-contiguous.
std::string encode_npy(std::span<const std::int64_t> shape, std::span<const float> data);
NpyArray decode_npy(std::string_view bytes);

void write_npy(const std::filesystem::path& path, std::span<const std::int64_t> shape, std::span<const float> data);
void write_npy(const std::filesystem::path& path, const Grid<float>& grid);
NpyArray read_npy(const std::filesystem::path& path);

/// Wraps a 4D (channels, H, W, D) array as a grid with the given geometry;
/// spec.shape and spec.channels are taken from the array.
Grid<float> to_grid(NpyArray array, GridSpec spec);

}  // namespace gaussgrid
