// Copyright 2026 The cystrack Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cystrack/image_io.hpp"

#include <openssl/evp.h>
#include <png.h>
#include <tiffio.h>
#include <zlib.h>

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <regex>

namespace cystrack::io {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void input_error(const std::string& path, const std::string& message) {
  throw IoError(ErrorCategory::input, path, message);
}

struct PngReadSource {
  std::span<const std::uint8_t> bytes;
  std::size_t offset = 0;
};

void png_read_callback(png_structp png, png_bytep out, png_size_t count) {
  auto* src = static_cast<PngReadSource*>(png_get_io_ptr(png));
  if (src->offset + count > src->bytes.size()) png_error(png, "truncated PNG stream");
  std::memcpy(out, src->bytes.data() + src->offset, count);
  src->offset += count;
}

void png_write_callback(png_structp png, png_bytep data, png_size_t count) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + count);
}

void png_flush_callback(png_structp) {}

void png_error_callback(png_structp png, png_const_charp message) {
  auto* msg = static_cast<std::string*>(png_get_error_ptr(png));
  if (msg) *msg = message;
  png_longjmp(png, 1);
}

void png_warning_callback(png_structp, png_const_charp) {}

}  // namespace

GrayImage decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) input_error("<png>", "not a PNG stream");

  std::string message;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, png_error_callback, png_warning_callback);
  png_infop info = png_create_info_struct(png);
  PngReadSource src{bytes, 0};
  GrayImage out;
  std::vector<png_bytep> rows;
  std::vector<std::uint8_t> buffer;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    input_error("<png>", "PNG decode failed: " + message);
  }
  png_set_read_fn(png, &src, png_read_callback);
  png_read_info(png, info);

  const int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE)
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  if (depth == 16) png_set_swap(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buffer.resize(rowbytes * h);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = buffer.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  out.bit_depth = depth == 16 ? 16 : 8;
  out.pixels.resize(h, w);
  for (png_uint_32 y = 0; y < h; ++y)
    for (png_uint_32 x = 0; x < w; ++x) {
      if (depth == 16) {
        std::uint16_t v;
        std::memcpy(&v, rows[y] + 2 * x, 2);
        out.pixels(y, x) = v;
      } else {
        out.pixels(y, x) = rows[y][x];
      }
    }
  return out;
}

namespace {

std::vector<std::uint8_t> encode_png_rows(int width, int height, int bit_depth, int color_type,
                                          const std::vector<std::uint8_t>& buffer, std::size_t rowbytes) {
  std::vector<std::uint8_t> out;
  std::string message;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, png_error_callback, png_warning_callback);
  png_infop info = png_create_info_struct(png);
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) rows[std::size_t(y)] = const_cast<png_bytep>(buffer.data() + std::size_t(y) * rowbytes);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError(ErrorCategory::output, "<png>", "PNG encode failed: " + message);
  }
  png_set_write_fn(png, &out, png_write_callback, png_flush_callback);
  png_set_IHDR(png, info, png_uint_32(width), png_uint_32(height), bit_depth, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const Frame& pixels, int bit_depth) {
  const int w = int(pixels.cols()), h = int(pixels.rows());
  const bool wide = bit_depth == 16;
  const std::size_t rowbytes = std::size_t(w) * (wide ? 2 : 1);
  std::vector<std::uint8_t> buffer(rowbytes * std::size_t(h));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::uint16_t v = pixels(y, x);
      if (wide) std::memcpy(&buffer[std::size_t(y) * rowbytes + 2 * std::size_t(x)], &v, 2);
      else buffer[std::size_t(y) * rowbytes + std::size_t(x)] = std::uint8_t(std::min<std::uint16_t>(v, 255));
    }
  return encode_png_rows(w, h, wide ? 16 : 8, PNG_COLOR_TYPE_GRAY, buffer, rowbytes);
}

namespace {

std::vector<std::uint8_t> interleave(const RgbImage& image) {
  const int w = image.width(), h = image.height();
  std::vector<std::uint8_t> buffer(std::size_t(w) * std::size_t(h) * 3);
  std::size_t i = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) buffer[i++] = image.planes[std::size_t(c)](y, x);
  return buffer;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const RgbImage& image) {
  return encode_png_rows(image.width(), image.height(), 8, PNG_COLOR_TYPE_RGB, interleave(image),
                         std::size_t(image.width()) * 3);
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(std::uint8_t(v >> 24));
  out.push_back(std::uint8_t(v >> 16));
  out.push_back(std::uint8_t(v >> 8));
  out.push_back(std::uint8_t(v));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(std::uint8_t(v >> 8));
  out.push_back(std::uint8_t(v));
}

void put_chunk(std::vector<std::uint8_t>& out, const char type[4], const std::vector<std::uint8_t>& data) {
  put_u32(out, std::uint32_t(data.size()));
  const std::size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const uLong crc = crc32(0L, out.data() + start, uInt(out.size() - start));
  put_u32(out, std::uint32_t(crc));
}

std::vector<std::uint8_t> deflate_scanlines(const RgbImage& image) {
  const std::vector<std::uint8_t> pixels = interleave(image);
  const std::size_t rowbytes = std::size_t(image.width()) * 3;
  std::vector<std::uint8_t> raw;
  raw.reserve((rowbytes + 1) * std::size_t(image.height()));
  for (int y = 0; y < image.height(); ++y) {
    raw.push_back(0);  // filter: none
    raw.insert(raw.end(), pixels.begin() + std::ptrdiff_t(std::size_t(y) * rowbytes),
               pixels.begin() + std::ptrdiff_t(std::size_t(y + 1) * rowbytes));
  }
  uLongf size = compressBound(uLong(raw.size()));
  std::vector<std::uint8_t> packed(size);
  if (compress2(packed.data(), &size, raw.data(), uLong(raw.size()), 6) != Z_OK)
    throw IoError(ErrorCategory::output, "<apng>", "zlib compression failed");
  packed.resize(size);
  return packed;
}

}  // namespace

std::vector<std::uint8_t> encode_apng(std::span<const RgbImage> frames, int delay_ms) {
  if (frames.empty()) throw IoError(ErrorCategory::output, "<apng>", "animation needs at least one frame");
  const int w = frames[0].width(), h = frames[0].height();
  for (const RgbImage& f : frames)
    if (f.width() != w || f.height() != h)
      throw IoError(ErrorCategory::output, "<apng>", "animation frames differ in size");

  std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  std::vector<std::uint8_t> ihdr;
  put_u32(ihdr, std::uint32_t(w));
  put_u32(ihdr, std::uint32_t(h));
  ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0});  // 8-bit RGB, deflate, no filter method, no interlace
  put_chunk(out, "IHDR", ihdr);

  std::vector<std::uint8_t> actl;
  put_u32(actl, std::uint32_t(frames.size()));
  put_u32(actl, 0);  // loop forever
  put_chunk(out, "acTL", actl);

  std::uint32_t sequence = 0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    std::vector<std::uint8_t> fctl;
    put_u32(fctl, sequence++);
    put_u32(fctl, std::uint32_t(w));
    put_u32(fctl, std::uint32_t(h));
    put_u32(fctl, 0);
    put_u32(fctl, 0);
    put_u16(fctl, std::uint16_t(std::clamp(delay_ms, 0, 65535)));
    put_u16(fctl, 1000);
    fctl.push_back(0);  // dispose: none
    fctl.push_back(0);  // blend: source
    put_chunk(out, "fcTL", fctl);

    std::vector<std::uint8_t> data = deflate_scanlines(frames[i]);
    if (i == 0) {
      put_chunk(out, "IDAT", data);
    } else {
      std::vector<std::uint8_t> fdat;
      put_u32(fdat, sequence++);
      fdat.insert(fdat.end(), data.begin(), data.end());
      put_chunk(out, "fdAT", fdat);
    }
  }
  put_chunk(out, "IEND", {});
  return out;
}

namespace {

struct TiffCloser {
  void operator()(TIFF* t) const { TIFFClose(t); }
};

void silent_tiff_handler(const char*, const char*, va_list) {}

GrayImage read_tiff(const fs::path& path) {
  TIFFSetWarningHandler(silent_tiff_handler);
  TIFFSetErrorHandler(silent_tiff_handler);
  std::unique_ptr<TIFF, TiffCloser> tif(TIFFOpen(path.string().c_str(), "r"));
  if (!tif) input_error(path.string(), "cannot open TIFF " + path.string());
  std::uint32_t w = 0, h = 0;
  std::uint16_t bits = 8, spp = 1, planar = PLANARCONFIG_CONTIG;
  TIFFGetField(tif.get(), TIFFTAG_IMAGEWIDTH, &w);
  TIFFGetField(tif.get(), TIFFTAG_IMAGELENGTH, &h);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_BITSPERSAMPLE, &bits);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLESPERPIXEL, &spp);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_PLANARCONFIG, &planar);
  if ((bits != 8 && bits != 16) || spp < 1 || (spp > 1 && planar != PLANARCONFIG_CONTIG))
    input_error(path.string(), "unsupported TIFF layout in " + path.string() + " (need 8/16-bit grayscale)");

  GrayImage out;
  out.bit_depth = bits;
  out.pixels.resize(h, w);
  std::vector<std::uint8_t> line(std::size_t(TIFFScanlineSize(tif.get())));
  for (std::uint32_t y = 0; y < h; ++y) {
    if (TIFFReadScanline(tif.get(), line.data(), y, 0) < 0) input_error(path.string(), "TIFF read failed");
    for (std::uint32_t x = 0; x < w; ++x) {
      if (bits == 16) {
        std::uint16_t v;
        std::memcpy(&v, line.data() + 2 * std::size_t(x) * spp, 2);
        out.pixels(y, x) = v;
      } else {
        out.pixels(y, x) = line[std::size_t(x) * spp];
      }
    }
  }
  return out;
}

std::string lower_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return char(std::tolower(c)); });
  return ext;
}

}  // namespace

GrayImage read_gray(const fs::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".tif" || ext == ".tiff") return read_tiff(path);
  const std::vector<std::uint8_t> bytes = read_file(path);
  try {
    return decode_png(bytes);
  } catch (const IoError& e) {
    input_error(path.string(), std::string(e.what()) + " (" + path.string() + ")");
  }
}

std::string frame_file_name(int index, std::string_view extension) {
  char name[32];
  std::snprintf(name, sizeof name, "frame_%04d", index);
  return std::string(name) + "." + std::string(extension);
}

bool is_frame_file_name(const std::string& name) {
  static const std::regex pattern(R"(frame_\d{4,}\.(png|PNG|tif|TIF|tiff|TIFF))");
  return std::regex_match(name, pattern);
}

FrameSequence load_frame_directory(const fs::path& dir) {
  if (!fs::is_directory(dir)) input_error(dir.string(), "frames directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const fs::directory_entry& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && is_frame_file_name(e.path().filename().string())) files.push_back(e.path());
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
  if (files.empty()) input_error(dir.string(), "no frame_NNNN.png/.tif files in " + dir.string());

  FrameSequence seq;
  for (std::size_t i = 0; i < files.size(); ++i) {
    GrayImage img = read_gray(files[i]);
    if (i == 0) seq.bit_depth = img.bit_depth;
    else if (img.bit_depth != seq.bit_depth)
      input_error(files[i].string(), "mixed bit depths in frame directory " + dir.string());
    if (i > 0 && (img.pixels.cols() != seq.frames[0].cols() || img.pixels.rows() != seq.frames[0].rows()))
      input_error(files[i].string(), "frame " + files[i].filename().string() + " differs in size from the first frame");
    seq.frames.push_back(std::move(img.pixels));
    seq.source_ids.push_back(files[i].filename().string());
  }
  return seq;
}

std::vector<fs::path> save_frame_directory(const FrameSequence& frames, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(ErrorCategory::output, dir.string(), "cannot create " + dir.string() + ": " + ec.message());
  std::vector<fs::path> written;
  for (int i = 0; i < frames.size(); ++i) {
    const fs::path p = dir / frame_file_name(i);
    write_file(p, encode_png(frames.frames[std::size_t(i)], frames.bit_depth));
    written.push_back(p);
  }
  return written;
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) input_error(path.string(), "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(ErrorCategory::output, path.string(), "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw IoError(ErrorCategory::output, path.string(), "write failed for " + path.string());
}

void write_file(const fs::path& path, std::string_view text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(), int(bytes.size()));
  out.resize(std::size_t(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw TrackingError("ProtocolError", "base64", "base64 length is not a multiple of 4");
  std::vector<std::uint8_t> out(3 * (text.size() / 4));
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()), int(text.size()));
  if (n < 0) throw TrackingError("ProtocolError", "base64", "invalid base64 payload");
  std::size_t size = std::size_t(n);
  // EVP_DecodeBlock keeps the bytes produced by '=' padding.
  if (!text.empty() && text.back() == '=') --size;
  if (text.size() > 1 && text[text.size() - 2] == '=') --size;
  out.resize(size);
  return out;
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

std::string sha256_hex(std::string_view text) {
  return sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace cystrack::io
