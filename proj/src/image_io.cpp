#include "cornerforge/image_io.hpp"

#include <jpeglib.h>
#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

namespace cornerforge {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool is_png(const std::vector<std::uint8_t>& bytes) {
  return bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0;
}

bool is_jpeg(const std::vector<std::uint8_t>& bytes) {
  return bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF;
}

void png_error_fn(png_structp png, png_const_charp msg) {
  auto* out = static_cast<std::string*>(png_get_error_ptr(png));
  if (out) *out = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

// libpng progressive reads need a cursor over the in-memory buffer.
struct ReadCursor {
  const std::vector<std::uint8_t>* bytes;
  std::size_t offset;
};

void png_read_fn(png_structp png, png_bytep out, png_size_t n) {
  auto* cursor = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cursor->offset + n > cursor->bytes->size()) png_error(png, "truncated PNG");
  std::memcpy(out, cursor->bytes->data() + cursor->offset, n);
  cursor->offset += n;
}

void png_write_fn(png_structp png, png_bytep data, png_size_t n) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + n);
}

void png_flush_fn(png_structp) {}

// Decodes to RGBA8 rows so the caller can choose how to treat alpha.
struct Rgba8 {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> data;
};

Rgba8 decode_png_rgba(const std::vector<std::uint8_t>& bytes, bool header_only) {
  std::string message = "malformed PNG";
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, png_error_fn, png_warning_fn);
  if (!png) throw Error(ErrorCode::IoError, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  Rgba8 out;
  ReadCursor cursor{&bytes, 0};
  std::vector<png_bytep> rows;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::ParseError, message);
  }
  png_set_read_fn(png, &cursor, png_read_fn);
  png_read_info(png, info);
  out.width = png_get_image_width(png, info);
  out.height = png_get_image_height(png, info);
  if (!header_only) {
    const int color_type = png_get_color_type(png, info);
    const int bit_depth = png_get_bit_depth(png, info);
    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    png_set_filler(png, 0xFF, PNG_FILLER_AFTER);
    png_read_update_info(png, info);

    out.data.resize(static_cast<std::size_t>(out.width) * out.height * 4);
    rows.resize(out.height);
    for (std::uint32_t y = 0; y < out.height; ++y) {
      rows[y] = out.data.data() + static_cast<std::size_t>(y) * out.width * 4;
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

ImageBuffer decode_jpeg(const std::vector<std::uint8_t>& bytes, ImageDims* dims_only) {
  jpeg_decompress_struct cinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  std::vector<Rgb> pixels;
  std::vector<std::uint8_t> row;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw Error(ErrorCode::ParseError, std::string("malformed JPEG: ") + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  if (dims_only) {
    *dims_only = {cinfo.image_width, cinfo.image_height};
    jpeg_destroy_decompress(&cinfo);
    return ImageBuffer(1, 1);
  }
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  const std::uint32_t w = cinfo.output_width, h = cinfo.output_height;
  pixels.resize(static_cast<std::size_t>(w) * h);
  row.resize(static_cast<std::size_t>(w) * 3);
  while (cinfo.output_scanline < h) {
    const std::uint32_t y = cinfo.output_scanline;
    JSAMPROW rowp = row.data();
    jpeg_read_scanlines(&cinfo, &rowp, 1);
    for (std::uint32_t x = 0; x < w; ++x) {
      pixels[static_cast<std::size_t>(y) * w + x] = {row[x * 3], row[x * 3 + 1], row[x * 3 + 2]};
    }
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return ImageBuffer(w, h, std::move(pixels));
}

ImageBuffer flatten(const Rgba8& rgba) {
  if (rgba.width == 0 || rgba.height == 0) throw Error(ErrorCode::ParseError, "PNG has zero size");
  std::vector<Rgb> pixels(static_cast<std::size_t>(rgba.width) * rgba.height);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const std::uint8_t* p = rgba.data.data() + i * 4;
    const unsigned a = p[3];
    auto over_black = [a](std::uint8_t c) { return static_cast<std::uint8_t>((c * a + 127) / 255); };
    pixels[i] = a == 255 ? Rgb{p[0], p[1], p[2]} : Rgb{over_black(p[0]), over_black(p[1]), over_black(p[2])};
  }
  return ImageBuffer(rgba.width, rgba.height, std::move(pixels));
}

std::vector<std::uint8_t> encode_png_raw(std::uint32_t width, std::uint32_t height, int color_type, int channels,
                                         const std::uint8_t* data) {
  std::string message = "PNG encode failed";
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, png_error_fn, png_warning_fn);
  if (!png) throw Error(ErrorCode::IoError, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  std::vector<std::uint8_t> out;
  std::vector<png_bytep> rows(height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::IoError, message);
  }
  png_set_write_fn(png, &out, png_write_fn, png_flush_fn);
  // Fixed settings keep the byte stream a pure function of the pixels.
  png_set_compression_level(png, 1);
  png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::uint32_t y = 0; y < height; ++y) {
    rows[y] = const_cast<png_bytep>(data + static_cast<std::size_t>(y) * width * channels);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

}  // namespace

ImageBuffer decode_png(const std::vector<std::uint8_t>& bytes) {
  if (!is_png(bytes)) throw Error(ErrorCode::ParseError, "not a PNG stream");
  return flatten(decode_png_rgba(bytes, false));
}

std::vector<std::uint8_t> encode_png(const ImageBuffer& image) {
  static_assert(sizeof(Rgb) == 3);
  return encode_png_raw(image.width(), image.height(), PNG_COLOR_TYPE_RGB, 3,
                        reinterpret_cast<const std::uint8_t*>(image.pixels().data()));
}

ImageBuffer read_image(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  if (is_png(bytes)) return flatten(decode_png_rgba(bytes, false));
  if (is_jpeg(bytes)) return decode_jpeg(bytes, nullptr);
  throw Error(ErrorCode::ParseError, path.string() + " is neither PNG nor JPEG");
}

ImageDims read_image_dims(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  if (is_png(bytes)) {
    auto header = decode_png_rgba(bytes, true);
    return {header.width, header.height};
  }
  if (is_jpeg(bytes)) {
    ImageDims dims;
    decode_jpeg(bytes, &dims);
    return dims;
  }
  throw Error(ErrorCode::ParseError, path.string() + " is neither PNG nor JPEG");
}

void write_png(const std::filesystem::path& path, const ImageBuffer& image) {
  write_bytes(path, encode_png(image));
}

BinaryMask read_mask(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  if (!is_png(bytes)) throw Error(ErrorCode::ParseError, path.string() + " is not a PNG mask");
  try {
    const auto rgba = decode_png_rgba(bytes, false);
    BinaryMask mask(rgba.width, rgba.height);
    for (std::uint32_t y = 0; y < rgba.height; ++y) {
      for (std::uint32_t x = 0; x < rgba.width; ++x) {
        if (rgba.data[(static_cast<std::size_t>(y) * rgba.width + x) * 4] >= 128) mask.set(x, y);
      }
    }
    return mask;
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write_mask(const std::filesystem::path& path, const BinaryMask& mask) {
  write_bytes(path, encode_mask_png(mask));
}

std::vector<std::uint8_t> encode_mask_png(const BinaryMask& mask) {
  std::vector<std::uint8_t> gray(static_cast<std::size_t>(mask.width()) * mask.height());
  for (std::uint32_t y = 0; y < mask.height(); ++y) {
    for (std::uint32_t x = 0; x < mask.width(); ++x) {
      gray[static_cast<std::size_t>(y) * mask.width() + x] = mask.test(x, y) ? 255 : 0;
    }
  }
  return encode_png_raw(mask.width(), mask.height(), PNG_COLOR_TYPE_GRAY, 1, gray.data());
}

}  // namespace cornerforge
