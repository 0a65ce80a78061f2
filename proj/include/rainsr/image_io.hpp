#pragma once

#include <filesystem>

#include "rainsr/image.hpp"

namespace rainsr {

// 8-bit RGB PNG, no alpha, no interlacing. Values are quantized by round(255 v).
void write_png(const std::filesystem::path& path, const Image& img);

// Reads any libpng-decodable raster and converts it to 8-bit RGB.
// Throws IngestError naming the file when it cannot be opened or decoded.
Image read_png(const std::filesystem::path& path);

// Baseline/progressive JPEG via libjpeg, converted to RGB.
Image read_jpeg(const std::filesystem::path& path);

// Dispatches on the file signature (PNG or JPEG).
Image read_image(const std::filesystem::path& path);

// round(255 v) / 255, the value an image takes after a PNG round trip.
Image quantize8(const Image& img);

}  // namespace rainsr
