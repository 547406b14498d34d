#pragma once

#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "coopsteer/errors.hpp"

namespace coopsteer {

// 8-bit RGB raster, row-major HWC.
struct image_u8 {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  std::size_t byte_size() const { return pixels.size(); }
  std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c) {
    return pixels[(y * width + x) * 3 + c];
  }
  std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const {
    return pixels[(y * width + x) * 3 + c];
  }
};

namespace detail {

struct jpeg_error_trap {
  jpeg_error_mgr mgr;
  std::jmp_buf env;
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
  auto* trap = reinterpret_cast<jpeg_error_trap*>(cinfo->err);
  std::longjmp(trap->env, 1);
}

inline bool has_png_signature(const unsigned char* buf) {
  return png_sig_cmp(buf, 0, 8) == 0;
}

inline bool has_jpeg_signature(const unsigned char* buf) {
  return buf[0] == 0xff && buf[1] == 0xd8;
}

}  // namespace detail

// Quick readability probe: the file exists and starts with a PNG or JPEG
// signature. Used at ingest time so bad rows fail fast without paying for
// a full decode.
inline bool sniff_image(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) return false;
  unsigned char buf[8] = {};
  const std::size_t n = std::fread(buf, 1, sizeof(buf), f);
  std::fclose(f);
  if (n < 8) return false;
  return detail::has_png_signature(buf) || detail::has_jpeg_signature(buf);
}

inline image_u8 load_png(const std::string& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str()))
    throw ingestion_error("png read failed: " + path + " (" + img.message + ")");
  img.format = PNG_FORMAT_RGB;
  image_u8 out;
  out.width = img.width;
  out.height = img.height;
  out.pixels.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
    png_image_free(&img);
    throw ingestion_error("png decode failed: " + path + " (" + img.message + ")");
  }
  return out;
}

inline image_u8 load_jpeg(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw ingestion_error("cannot open " + path);
  jpeg_decompress_struct cinfo{};
  detail::jpeg_error_trap trap{};
  cinfo.err = jpeg_std_error(&trap.mgr);
  trap.mgr.error_exit = detail::jpeg_error_exit;
  if (setjmp(trap.env)) {
    jpeg_destroy_decompress(&cinfo);
    std::fclose(f);
    throw ingestion_error("jpeg decode failed: " + path);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, f);
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  image_u8 out;
  out.width = cinfo.output_width;
  out.height = cinfo.output_height;
  out.pixels.resize(out.width * out.height * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = out.pixels.data() + std::size_t(cinfo.output_scanline) * out.width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  std::fclose(f);
  return out;
}

inline image_u8 load_image(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw ingestion_error("cannot open " + path);
  unsigned char buf[8] = {};
  const std::size_t n = std::fread(buf, 1, sizeof(buf), f);
  std::fclose(f);
  if (n >= 8 && detail::has_png_signature(buf)) return load_png(path);
  if (n >= 2 && detail::has_jpeg_signature(buf)) return load_jpeg(path);
  throw ingestion_error("unsupported image format: " + path);
}

inline void save_png(const image_u8& img, const std::string& path) {
  png_image out{};
  out.version = PNG_IMAGE_VERSION;
  out.width = static_cast<png_uint_32>(img.width);
  out.height = static_cast<png_uint_32>(img.height);
  out.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&out, path.c_str(), 0, img.pixels.data(), 0, nullptr))
    throw io_error("png write failed: " + path + " (" + out.message + ")");
}

inline void save_jpeg(const image_u8& img, const std::string& path, int quality = 95) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw io_error("cannot open for write: " + path);
  jpeg_compress_struct cinfo{};
  detail::jpeg_error_trap trap{};
  cinfo.err = jpeg_std_error(&trap.mgr);
  trap.mgr.error_exit = detail::jpeg_error_exit;
  if (setjmp(trap.env)) {
    jpeg_destroy_compress(&cinfo);
    std::fclose(f);
    throw io_error("jpeg encode failed: " + path);
  }
  jpeg_create_compress(&cinfo);
  jpeg_stdio_dest(&cinfo, f);
  cinfo.image_width = static_cast<JDIMENSION>(img.width);
  cinfo.image_height = static_cast<JDIMENSION>(img.height);
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  std::vector<std::uint8_t> rowbuf(img.width * 3);
  while (cinfo.next_scanline < cinfo.image_height) {
    std::copy_n(img.pixels.data() + std::size_t(cinfo.next_scanline) * img.width * 3,
                img.width * 3, rowbuf.data());
    JSAMPROW row = rowbuf.data();
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  std::fclose(f);
}

}  // namespace coopsteer
