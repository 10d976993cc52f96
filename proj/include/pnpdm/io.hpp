#pragma once

#include <filesystem>
#include <iosfwd>

#include "pnpdm/image.hpp"

namespace pnpdm::io {

// Float raster: "IMGF32 <width> <height>\n" then width*height little-endian IEEE-754
// binary32 values, row-major.
void write_raster(std::ostream& out, const ImageGrid& img);
ImageGrid read_raster(std::istream& in);
void write_raster(const std::filesystem::path& path, const ImageGrid& img);
ImageGrid read_raster(const std::filesystem::path& path);

/// Binary PGM (P5). [0,1] maps linearly onto [0, maxval] with round-half-to-even;
/// values outside [0,1] are clamped first. 16-bit samples are big-endian per the PGM format.
enum class PgmDepth { u8 = 8, u16 = 16 };
void write_pgm(std::ostream& out, const ImageGrid& img, PgmDepth depth = PgmDepth::u8);
ImageGrid read_pgm(std::istream& in);
void write_pgm(const std::filesystem::path& path, const ImageGrid& img, PgmDepth depth = PgmDepth::u8);
ImageGrid read_pgm(const std::filesystem::path& path);

/// Dispatches on extension: .pgm → PGM, anything else → float raster.
ImageGrid read_image(const std::filesystem::path& path);

} // namespace pnpdm::io
