#include "rainsr/image_io.hpp"

#include <jpeglib.h>
#include <png.h>

#include <csetjmp>

#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

#include "rainsr/error.hpp"

namespace rainsr {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::uint8_t quantize(float v) {
  const float c = std::isnan(v) ? 0.0f : std::fmin(std::fmax(v, 0.0f), 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

}  // namespace

Image quantize8(const Image& img) {
  Image out = img;
  for (float& v : out.data) v = static_cast<float>(quantize(v)) / 255.0f;
  return out;
}

void write_png(const std::filesystem::path& path, const Image& img) {
  FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw IoError("cannot open for writing: " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  std::vector<std::uint8_t> rows(static_cast<std::size_t>(img.height) * img.width * 3);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = quantize(img.data[i]);
  std::vector<png_bytep> row_ptrs(static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) row_ptrs[static_cast<std::size_t>(y)] = &rows[static_cast<std::size_t>(y) * img.width * 3];

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed writing PNG: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, row_ptrs.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(fp.get()) != 0) throw IoError("failed flushing PNG: " + path.string());
}

Image read_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw IngestError("cannot open image: " + path.string());
  std::uint8_t sig[8] = {};
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw IngestError("not a PNG file: " + path.string());
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IngestError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IngestError("png_create_info_struct failed");
  }
  // Declared before setjmp so longjmp does not skip their construction.
  std::vector<std::uint8_t> rows;
  std::vector<png_bytep> row_ptrs;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IngestError("corrupt PNG: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);

  if (png_get_rowbytes(png, info) != width * 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IngestError("unsupported PNG layout: " + path.string());
  }
  rows.resize(static_cast<std::size_t>(height) * width * 3);
  row_ptrs.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) row_ptrs[y] = &rows[static_cast<std::size_t>(y) * width * 3];
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Image img(static_cast<int>(height), static_cast<int>(width));
  for (std::size_t i = 0; i < rows.size(); ++i) img.data[i] = static_cast<float>(rows[i]) / 255.0f;
  return img;
}

namespace {

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  std::longjmp(err->jump, 1);
}

}  // namespace

Image read_jpeg(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw IngestError("cannot open image: " + path.string());
  jpeg_decompress_struct cinfo{};
  JpegErrorManager jerr{};
  cinfo.err = jpeg_std_error(&jerr.base);
  jerr.base.error_exit = jpeg_error_exit;
  std::vector<std::uint8_t> pixels;
  if (setjmp(jerr.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw IngestError("corrupt JPEG: " + path.string());
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, fp.get());
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  const auto width = static_cast<int>(cinfo.output_width);
  const auto height = static_cast<int>(cinfo.output_height);
  pixels.resize(static_cast<std::size_t>(width) * height * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = &pixels[static_cast<std::size_t>(cinfo.output_scanline) * width * 3];
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);

  Image img(height, width);
  for (std::size_t i = 0; i < pixels.size(); ++i) img.data[i] = static_cast<float>(pixels[i]) / 255.0f;
  return img;
}

Image read_image(const std::filesystem::path& path) {
  std::uint8_t sig[8] = {};
  std::size_t got = 0;
  {
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) throw IngestError("cannot open image: " + path.string());
    got = std::fread(sig, 1, 8, fp.get());
  }
  if (got == 8 && png_sig_cmp(sig, 0, 8) == 0) return read_png(path);
  if (got >= 3 && sig[0] == 0xFF && sig[1] == 0xD8 && sig[2] == 0xFF) return read_jpeg(path);
  throw IngestError("unrecognized image format: " + path.string());
}

}  // namespace rainsr
