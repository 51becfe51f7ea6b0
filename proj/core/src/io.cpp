#include "fpsrm/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <vector>

namespace fpsrm::io {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

template <typename T>
void put_le(std::vector<unsigned char>& buf, T value) {
  auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  buf.insert(buf.end(), bytes.begin(), bytes.end());
}

template <typename T>
T get_le(const unsigned char* p) {
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > std::numeric_limits<std::uint32_t>::max()) throw FormatError(std::string(what) + " too large for header");
  return static_cast<std::uint32_t>(v);
}

void write_header(std::ostream& out, const BinaryHeader& h) {
  std::vector<unsigned char> buf(h.magic, h.magic + 8);
  put_le(buf, h.version);
  put_le(buf, h.count);
  put_le(buf, h.dim_a);
  put_le(buf, h.dim_b);
  put_le(buf, h.dt);
  put_le(buf, h.domain.x_min);
  put_le(buf, h.domain.x_max);
  put_le(buf, h.domain.y_min);
  put_le(buf, h.domain.y_max);
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

BinaryHeader parse_header(std::istream& in, const std::filesystem::path& path) {
  std::array<unsigned char, kHeaderBytes> buf{};
  if (!in.read(reinterpret_cast<char*>(buf.data()), kHeaderBytes))
    throw FormatError(path.string() + ": truncated header");
  BinaryHeader h;
  std::memcpy(h.magic, buf.data(), 8);
  h.version = get_le<std::uint32_t>(buf.data() + 8);
  h.count = get_le<std::uint32_t>(buf.data() + 12);
  h.dim_a = get_le<std::uint32_t>(buf.data() + 16);
  h.dim_b = get_le<std::uint32_t>(buf.data() + 20);
  h.dt = get_le<double>(buf.data() + 24);
  h.domain.x_min = get_le<double>(buf.data() + 32);
  h.domain.x_max = get_le<double>(buf.data() + 40);
  h.domain.y_min = get_le<double>(buf.data() + 48);
  h.domain.y_max = get_le<double>(buf.data() + 56);
  return h;
}

void expect(const BinaryHeader& h, const char* magic, const std::filesystem::path& path) {
  if (std::memcmp(h.magic, magic, 8) != 0)
    throw FormatError(path.string() + ": unexpected file type (magic '" + std::string(h.magic, 8) + "', expected '" +
                      std::string(magic, 8) + "')");
  if (h.version != kFormatVersion)
    throw FormatError(path.string() + ": unsupported format version " + std::to_string(h.version));
}

void write_doubles(std::ostream& out, std::span<const double> values) {
  std::vector<unsigned char> buf;
  buf.reserve(values.size() * 8);
  for (double v : values) put_le(buf, v);
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

std::vector<double> read_doubles(std::istream& in, std::size_t n, const std::filesystem::path& path) {
  std::vector<unsigned char> buf(n * 8);
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
    throw FormatError(path.string() + ": truncated payload");
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = get_le<double>(buf.data() + 8 * k);
  return out;
}

BinaryHeader make_header(const char* magic) {
  BinaryHeader h;
  std::memcpy(h.magic, magic, 8);
  return h;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

BinaryHeader read_header(const std::filesystem::path& path) {
  auto in = open_in(path);
  return parse_header(in, path);
}

void save_frames(const TrajectoryFrames& frames, const std::filesystem::path& path) {
  if (frames.frames.empty()) throw std::invalid_argument("save_frames: no frames");
  const std::size_t np = frames.frames.front().size();
  BinaryHeader h = make_header(kFramesMagic);
  h.count = checked_u32(frames.size(), "frame count");
  h.dim_a = checked_u32(np, "particle count");
  h.dim_b = 2;
  h.dt = frames.dt;
  h.domain = frames.domain;
  auto out = open_out(path);
  write_header(out, h);
  std::vector<double> buf(2 * np);
  for (const ParticleEnsemble& e : frames.frames) {
    if (e.size() != np) throw std::invalid_argument("save_frames: particle count varies between frames");
    for (std::size_t k = 0; k < np; ++k) {
      buf[2 * k] = e.positions[k].x;
      buf[2 * k + 1] = e.positions[k].y;
    }
    write_doubles(out, buf);
  }
  finish(out, path);
}

TrajectoryFrames load_frames(const std::filesystem::path& path) {
  auto in = open_in(path);
  const BinaryHeader h = parse_header(in, path);
  expect(h, kFramesMagic, path);
  if (h.dim_b != 2) throw FormatError(path.string() + ": particle files must have dim_b = 2");
  TrajectoryFrames out;
  out.dt = h.dt;
  out.domain = h.domain;
  out.frames.resize(h.count);
  for (ParticleEnsemble& e : out.frames) {
    const auto v = read_doubles(in, 2 * std::size_t{h.dim_a}, path);
    e.positions.resize(h.dim_a);
    for (std::size_t k = 0; k < h.dim_a; ++k) {
      e.positions[k] = {v[2 * k], v[2 * k + 1]};
      if (!h.domain.contains(v[2 * k], v[2 * k + 1]))
        throw FormatError(path.string() + ": particle position outside the header domain");
    }
  }
  return out;
}

void save_density(const FrameSequence& density, const std::filesystem::path& path) {
  BinaryHeader h = make_header(kDensityMagic);
  h.count = checked_u32(density.size(), "frame count");
  h.dim_a = checked_u32(density.grid.nx(), "nx");
  h.dim_b = checked_u32(density.grid.ny(), "ny");
  h.dt = density.dt;
  h.domain = density.grid.domain();
  auto out = open_out(path);
  write_header(out, h);
  for (const ScalarField& f : density.frames) write_doubles(out, f.values());
  finish(out, path);
}

FrameSequence load_density(const std::filesystem::path& path) {
  auto in = open_in(path);
  const BinaryHeader h = parse_header(in, path);
  expect(h, kDensityMagic, path);
  FrameSequence out;
  out.grid = Grid2D(h.domain, h.dim_a, h.dim_b);
  out.dt = h.dt;
  out.frames.reserve(h.count);
  for (std::uint32_t l = 0; l < h.count; ++l)
    out.frames.emplace_back(out.grid, read_doubles(in, out.grid.size(), path));
  return out;
}

void save_field(const ScalarField& field, const std::filesystem::path& path) {
  BinaryHeader h = make_header(kFieldMagic);
  h.count = 1;
  h.dim_a = checked_u32(field.grid().nx(), "nx");
  h.dim_b = checked_u32(field.grid().ny(), "ny");
  h.domain = field.grid().domain();
  auto out = open_out(path);
  write_header(out, h);
  write_doubles(out, field.values());
  finish(out, path);
}

ScalarField load_field(const std::filesystem::path& path) {
  auto in = open_in(path);
  const BinaryHeader h = parse_header(in, path);
  expect(h, kFieldMagic, path);
  if (h.count != 1) throw FormatError(path.string() + ": field files hold exactly one frame");
  Grid2D grid(h.domain, h.dim_a, h.dim_b);
  return ScalarField(grid, read_doubles(in, grid.size(), path));
}

// ---------------------------------------------------------------------------
// PGM

namespace {

struct PgmImage {
  std::size_t width = 0;
  std::size_t height = 0;
  unsigned max_gray = 0;
  std::vector<unsigned> pixels;  // row-major, row 0 at the top
};

// Next whitespace-delimited header token, skipping '#' comments.
std::string pnm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

std::size_t parse_positive(const std::string& tok, const std::filesystem::path& path) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(tok, &pos);
    if (pos != tok.size() || v <= 0) throw std::invalid_argument(tok);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw FormatError(path.string() + ": malformed PGM header value '" + tok + "'");
  }
}

PgmImage read_pgm(const std::filesystem::path& path) {
  auto in = open_in(path);
  char magic[2] = {};
  if (!in.read(magic, 2)) throw FormatError(path.string() + ": empty file");
  if (static_cast<unsigned char>(magic[0]) == 0x89 && magic[1] == 'P')
    throw FormatError(path.string() + ": PNG is not supported; convert to PGM");
  if (magic[0] != 'P') throw FormatError(path.string() + ": not a PNM image");
  if (magic[1] == '3' || magic[1] == '6')
    throw FormatError(path.string() + ": color images are not supported; provide a grayscale PGM");
  if (magic[1] != '2' && magic[1] != '5') throw FormatError(path.string() + ": unsupported PNM variant P" + magic[1]);
  const bool binary = magic[1] == '5';

  PgmImage img;
  img.width = parse_positive(pnm_token(in), path);
  img.height = parse_positive(pnm_token(in), path);
  const std::size_t maxval = parse_positive(pnm_token(in), path);
  if (maxval > 65535) throw FormatError(path.string() + ": max gray value above 65535");
  img.max_gray = static_cast<unsigned>(maxval);
  const std::size_t n = img.width * img.height;
  img.pixels.resize(n);

  if (binary) {
    const std::size_t bpp = maxval < 256 ? 1 : 2;
    std::vector<unsigned char> raw(n * bpp);
    if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size())))
      throw FormatError(path.string() + ": truncated PGM pixel data");
    for (std::size_t k = 0; k < n; ++k)
      img.pixels[k] = bpp == 1 ? raw[k] : (unsigned{raw[2 * k]} << 8) | raw[2 * k + 1];
  } else {
    for (std::size_t k = 0; k < n; ++k) {
      const std::string tok = pnm_token(in);
      if (tok.empty()) throw FormatError(path.string() + ": truncated PGM pixel data");
      img.pixels[k] = static_cast<unsigned>(std::stoul(tok));
    }
  }
  for (unsigned v : img.pixels)
    if (v > img.max_gray) throw FormatError(path.string() + ": pixel above the declared max gray value");
  return img;
}

}  // namespace

ScalarField load_potential_image(const std::filesystem::path& path, const Domain& domain) {
  const PgmImage img = read_pgm(path);
  Grid2D grid(domain, img.width, img.height);
  ScalarField out(grid);
  const double scale = 1.0 / static_cast<double>(img.max_gray);
  for (std::size_t r = 0; r < img.height; ++r)
    for (std::size_t c = 0; c < img.width; ++c)
      out(c, img.height - 1 - r) = static_cast<double>(img.pixels[r * img.width + c]) * scale;
  return out;
}

bool save_field_image(const ScalarField& field, const std::filesystem::path& path, ImageScale mode,
                      std::uint16_t max_gray) {
  if (max_gray == 0) throw std::invalid_argument("save_field_image: max_gray must be positive");
  if (!field.all_finite()) throw std::invalid_argument("save_field_image: non-finite values");
  const Grid2D& g = field.grid();
  bool degenerate = false;
  std::vector<double> unit(field.size());
  if (mode == ImageScale::MinMax) {
    ScaledField s = min_max_scale(field);
    degenerate = s.degenerate;
    for (std::size_t k = 0; k < unit.size(); ++k) unit[k] = degenerate ? 0.5 : s.field[k];
  } else {
    for (std::size_t k = 0; k < unit.size(); ++k) unit[k] = std::clamp(field[k], 0.0, 1.0);
  }

  auto out = open_out(path);
  out << "P5\n" << g.nx() << ' ' << g.ny() << '\n' << max_gray << '\n';
  const bool wide = max_gray > 255;
  std::vector<unsigned char> raw;
  raw.reserve(g.size() * (wide ? 2 : 1));
  for (std::size_t r = 0; r < g.ny(); ++r) {
    const std::size_t j = g.ny() - 1 - r;
    for (std::size_t i = 0; i < g.nx(); ++i) {
      const auto v = static_cast<unsigned>(std::lround(unit[g.index(i, j)] * max_gray));
      if (wide) raw.push_back(static_cast<unsigned char>(v >> 8));
      raw.push_back(static_cast<unsigned char>(v & 0xff));
    }
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  finish(out, path);
  return degenerate;
}

ScalarField load_field_or_image(const std::filesystem::path& path, const Domain& domain) {
  char magic[8] = {};
  {
    auto in = open_in(path);
    in.read(magic, 8);
  }
  if (std::memcmp(magic, kFieldMagic, 8) == 0) return load_field(path);
  return load_potential_image(path, domain);
}

}  // namespace fpsrm::io
