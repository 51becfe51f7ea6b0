#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "fpsrm/binning.hpp"
#include "fpsrm/field.hpp"
#include "fpsrm/sde.hpp"

namespace fpsrm::io {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::size_t kHeaderBytes = 64;

/// Fixed 64-byte little-endian header shared by all binary files:
///
///   offset  size  field
///        0     8  magic ("FPSRFRM1", "FPSRDEN1" or "FPSRFLD1")
///        8     4  version (uint32)
///       12     4  count: frames (uint32)
///       16     4  dim_a: particles, or nx (uint32)
///       20     4  dim_b: 2 for particle files, or ny (uint32)
///       24     8  dt in seconds (float64)
///       32    32  x_min, x_max, y_min, y_max (float64 each)
///
/// The payload is count * dim_a * dim_b float64 values, little-endian. For
/// particle files each frame is N_p interleaved (x, y) pairs; for density and
/// field files each frame is nx * ny values, row j = 0 at y_min.
struct BinaryHeader {
  char magic[8] = {};
  std::uint32_t version = kFormatVersion;
  std::uint32_t count = 0;
  std::uint32_t dim_a = 0;
  std::uint32_t dim_b = 0;
  double dt = 0.0;
  Domain domain{};
};

inline constexpr char kFramesMagic[9] = "FPSRFRM1";
inline constexpr char kDensityMagic[9] = "FPSRDEN1";
inline constexpr char kFieldMagic[9] = "FPSRFLD1";

BinaryHeader read_header(const std::filesystem::path& path);

void save_frames(const TrajectoryFrames& frames, const std::filesystem::path& path);
TrajectoryFrames load_frames(const std::filesystem::path& path);

void save_density(const FrameSequence& density, const std::filesystem::path& path);
FrameSequence load_density(const std::filesystem::path& path);

void save_field(const ScalarField& field, const std::filesystem::path& path);
ScalarField load_field(const std::filesystem::path& path);

/// Grayscale PGM (P5 or P2, 8- or 16-bit) mapped linearly to [0, 1] on a
/// grid with one cell per pixel over `domain`. Image row 0 is the top of the
/// domain. Color and non-PGM images are rejected.
ScalarField load_potential_image(const std::filesystem::path& path, const Domain& domain = {});

enum class ImageScale {
  Unit,    ///< clamp values to [0, 1]
  MinMax,  ///< stretch [min, max] to the full gray range
};

/// Writes a binary PGM (P5). Returns true if MinMax scaling met a constant
/// field, in which case the image is uniform mid-gray.
bool save_field_image(const ScalarField& field, const std::filesystem::path& path, ImageScale mode,
                      std::uint16_t max_gray = 255);

/// Loads a field file or a PGM image, chosen by the file's leading bytes.
ScalarField load_field_or_image(const std::filesystem::path& path, const Domain& domain = {});

}  // namespace fpsrm::io
