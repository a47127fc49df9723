#include "gaussgrid/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

namespace gaussgrid {

static_assert(std::endian::native == std::endian::little, "NPY I/O assumes a little-endian host");

namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

std::string_view trim(std::string_view s) {
  const auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; };
  while (!s.empty() && ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && ws(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::optional<double> to_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<long long> to_integer(std::string_view s) {
  s = trim(s);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// RFC 4180 subset: comma separated, optional double quotes, "" escapes a quote.
std::optional<std::vector<std::string>> split_csv(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"' && trim(cur).empty() && !was_quoted) {
      quoted = was_quoted = true;
      cur.clear();
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
      was_quoted = false;
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) return std::nullopt;
  fields.push_back(std::move(cur));
  return fields;
}

}  // namespace

ChannelPolicy ChannelPolicy::parse(std::string_view text) {
  if (text == "auto") return {Kind::automatic, 0};
  if (text == "single") return {Kind::single, 1};
  const auto k = to_integer(text);
  if (!k || *k < 1 || *k > 1024) throw Error("channels must be 'auto', 'single' or a positive integer");
  return {Kind::fixed, static_cast<int>(*k)};
}

ChannelAssignment assign_channels(const MoleculeFile& mol, const ChannelPolicy& policy) {
  ChannelAssignment out;
  if (policy.kind == ChannelPolicy::Kind::single) {
    out.channels = 1;
    for (const auto& p : mol.positions) out.particles.particles.push_back({0, p});
    return out;
  }
  const std::set<int> distinct(mol.atomic_numbers.begin(), mol.atomic_numbers.end());
  out.legend.assign(distinct.begin(), distinct.end());
  std::map<int, int> channel_of;
  for (std::size_t c = 0; c < out.legend.size(); ++c) channel_of[out.legend[c]] = static_cast<int>(c);
  if (policy.kind == ChannelPolicy::Kind::fixed) {
    if (static_cast<int>(out.legend.size()) > policy.channels)
      throw Error("molecule has " + std::to_string(out.legend.size()) + " distinct elements but only " +
                  std::to_string(policy.channels) + " channels were requested");
    out.channels = policy.channels;
  } else {
    out.channels = std::max<int>(1, static_cast<int>(out.legend.size()));
  }
  for (std::size_t i = 0; i < mol.positions.size(); ++i)
    out.particles.particles.push_back({channel_of.at(mol.atomic_numbers[i]), mol.positions[i]});
  return out;
}

MoleculeFile parse_xyz(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty() || trim(lines[0]).empty()) throw ParseError(1, "missing atom count");
  const auto count = to_integer(lines[0]);
  if (!count || *count < 0) throw ParseError(1, "atom count is not a nonnegative integer");

  MoleculeFile mol;
  if (lines.size() > 1) mol.comment = std::string(lines[1]);
  std::size_t row = 0;
  std::size_t ln = 2;  // 0-based index of the first atom line
  for (; ln < lines.size(); ++ln) {
    const auto tokens = split_ws(lines[ln]);
    if (tokens.empty()) {
      if (static_cast<long long>(row) >= *count) continue;  // trailing blank lines
      throw ParseError(ln + 1, "blank line inside the atom block");
    }
    if (static_cast<long long>(row) >= *count)
      throw ParseError(ln + 1, "atom count mismatch: header says " + std::to_string(*count) + " but more rows follow");
    if (tokens.size() < 4) throw ParseError(ln + 1, "expected 'symbol x y z'");
    std::optional<int> z = atomic_number(tokens[0]);
    if (!z) {
      const auto zi = to_integer(tokens[0]);
      if (zi && *zi >= 1 && *zi <= 118) z = static_cast<int>(*zi);
    }
    if (!z) throw ParseError(ln + 1, "unknown element symbol '" + std::string(tokens[0]) + "'");
    Vec3 p;
    for (int a = 0; a < 3; ++a) {
      const auto v = to_double(tokens[static_cast<std::size_t>(a) + 1]);
      if (!v) throw ParseError(ln + 1, "malformed coordinate '" + std::string(tokens[static_cast<std::size_t>(a) + 1]) + "'");
      p(a) = *v;
    }
    mol.atomic_numbers.push_back(*z);
    mol.positions.push_back(p);
    ++row;
  }
  if (static_cast<long long>(row) != *count)
    throw ParseError(std::max<std::size_t>(lines.size(), 1), "atom count mismatch: header says " +
                                                               std::to_string(*count) + " but found " +
                                                               std::to_string(row) + " rows");
  return mol;
}

ParticleSet parse_points_csv(std::string_view text) {
  ParticleSet out;
  const auto lines = split_lines(text);
  bool first = true;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (trim(lines[ln]).empty()) continue;
    const auto fields = split_csv(lines[ln]);
    if (!fields) throw ParseError(ln + 1, "unterminated quoted field");
    const bool header = first && !to_double((*fields)[0]);
    first = false;
    if (header) continue;
    if (fields->size() != 4)
      throw ParseError(ln + 1, "expected 4 columns (channel,x,y,z), got " + std::to_string(fields->size()));
    const auto ch = to_double((*fields)[0]);
    if (!ch || *ch < 0.0 || *ch != std::floor(*ch) || *ch > 1e6)
      throw ParseError(ln + 1, "channel must be a nonnegative integer, got '" + (*fields)[0] + "'");
    Vec3 p;
    for (int a = 0; a < 3; ++a) {
      const auto v = to_double((*fields)[static_cast<std::size_t>(a) + 1]);
      if (!v) throw ParseError(ln + 1, "malformed coordinate '" + (*fields)[static_cast<std::size_t>(a) + 1] + "'");
      p(a) = *v;
    }
    out.particles.push_back({static_cast<int>(*ch), p});
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error("error reading " + path.string());
  return ss.str();
}

std::string encode_npy(std::span<const std::int64_t> shape, std::span<const float> data) {
  std::int64_t count = 1;
  for (const auto d : shape) {
    if (d < 0) throw Error("negative dimension");
    count *= d;
  }
  if (count != static_cast<std::int64_t>(data.size())) throw Error("NPY shape does not match data size");

  std::string dims;
  for (const auto d : shape) dims += std::to_string(d) + ", ";
  if (shape.size() > 1) dims.resize(dims.size() - 2);
  else if (shape.size() == 1) dims.resize(dims.size() - 1);
  std::string header = "{'descr': '<f4', 'fortran_order': False, 'shape': (" + dims + "), }";
  const std::size_t prefix = 10;  // magic(6) + version(2) + header length(2)
  const std::size_t total = (prefix + header.size() + 1 + 63) / 64 * 64;
  header.append(total - prefix - header.size() - 1, ' ');
  header.push_back('\n');
  if (header.size() > 0xFFFF) throw Error("NPY header too long");

  std::string out;
  out.reserve(total + data.size() * sizeof(float));
  out.append("\x93NUMPY", 6);
  out.push_back('\x01');
  out.push_back('\x00');
  out.push_back(static_cast<char>(header.size() & 0xFF));
  out.push_back(static_cast<char>((header.size() >> 8) & 0xFF));
  out += header;
  out.append(reinterpret_cast<const char*>(data.data()), data.size() * sizeof(float));
  return out;
}

NpyArray decode_npy(std::string_view bytes) {
  if (bytes.size() < 10 || bytes.substr(0, 6) != std::string_view("\x93NUMPY", 6)) throw Error("not an NPY file");
  const auto major = static_cast<unsigned char>(bytes[6]);
  std::size_t header_len = 0;
  std::size_t offset = 0;
  const auto byte = [&](std::size_t i) { return static_cast<std::size_t>(static_cast<unsigned char>(bytes[i])); };
  if (major == 1) {
    header_len = byte(8) | (byte(9) << 8);
    offset = 10;
  } else if (major == 2 || major == 3) {
    if (bytes.size() < 12) throw Error("truncated NPY header");
    header_len = byte(8) | (byte(9) << 8) | (byte(10) << 16) | (byte(11) << 24);
    offset = 12;
  } else {
    throw Error("unsupported NPY version " + std::to_string(major));
  }
  if (bytes.size() < offset + header_len) throw Error("truncated NPY header");
  const std::string header(bytes.substr(offset, header_len));

  std::smatch m;
  if (!std::regex_search(header, m, std::regex(R"('descr'\s*:\s*'([^']*)')")))
    throw Error("NPY header has no descr");
  if (m[1] != "<f4") throw Error("unsupported NPY dtype '" + m[1].str() + "' (only little-endian float32 '<f4')");
  if (!std::regex_search(header, m, std::regex(R"('fortran_order'\s*:\s*(True|False))")))
    throw Error("NPY header has no fortran_order");
  if (m[1] == "True") throw Error("unsupported NPY layout: fortran_order arrays are not accepted, use C order");
  if (!std::regex_search(header, m, std::regex(R"('shape'\s*:\s*\(([^)]*)\))"))) throw Error("NPY header has no shape");

  NpyArray out;
  const std::string dims = m[1];
  std::int64_t count = 1;
  std::size_t pos = 0;
  while (pos < dims.size()) {
    std::size_t end = dims.find(',', pos);
    if (end == std::string::npos) end = dims.size();
    const auto tok = trim(std::string_view(dims).substr(pos, end - pos));
    if (!tok.empty()) {
      const auto d = to_integer(tok);
      if (!d || *d < 0 || *d > (std::int64_t{1} << 40)) throw Error("malformed NPY shape");
      out.shape.push_back(*d);
      count *= *d;
      if (count > (std::int64_t{1} << 40)) throw Error("NPY array too large");
    }
    pos = end + 1;
  }
  const std::size_t data_bytes = static_cast<std::size_t>(count) * sizeof(float);
  if (bytes.size() - offset - header_len != data_bytes) throw Error("NPY data size does not match its shape");
  out.data.resize(static_cast<std::size_t>(count));
  std::memcpy(out.data.data(), bytes.data() + offset + header_len, data_bytes);
  return out;
}

void write_npy(const std::filesystem::path& path, std::span<const std::int64_t> shape, std::span<const float> data) {
  const std::string bytes = encode_npy(shape, data);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("error writing " + path.string());
}

void write_npy(const std::filesystem::path& path, const Grid<float>& grid) {
  const auto& s = grid.spec();
  const std::int64_t shape[4] = {s.channels, s.shape(0), s.shape(1), s.shape(2)};
  write_npy(path, shape, std::span<const float>(grid.data().data(), static_cast<std::size_t>(grid.size())));
}

NpyArray read_npy(const std::filesystem::path& path) { return decode_npy(read_text_file(path)); }

Grid<float> to_grid(NpyArray array, GridSpec spec) {
  if (array.shape.size() != 4) throw Error("expected a 4D (channels, H, W, D) array");
  spec.channels = static_cast<int>(array.shape[0]);
  spec.shape = Index3(array.shape[1], array.shape[2], array.shape[3]);
  Grid<float>::Array data =
      Eigen::Map<const Grid<float>::Array>(array.data.data(), static_cast<Eigen::Index>(array.data.size()));
  return Grid<float>(std::move(spec), std::move(data));
}

}  // namespace gaussgrid
