#pragma once

#include <filesystem>

#include "afp/core/image.hpp"

namespace afp {

// Minimal PNG codec for 8-bit RGB images (zlib-backed). Writing always
// emits filter-0 scanlines and a fixed compression level so output files
// are byte-stable for a given image.
void write_png_rgb8(const std::filesystem::path& path, const ImageU8& img);
ImageU8 read_png_rgb8(const std::filesystem::path& path);

}  // namespace afp
