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

#pragma once

#include "cystrack/image.hpp"
#include "cystrack/tracking.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cystrack::io {

struct GrayImage {
  Frame pixels;
  int bit_depth = 8;
};

/// Reads a grayscale PNG or TIFF (8 or 16 bit). Colour PNGs are converted
/// to luminance. Throws IoError(input).
GrayImage read_gray(const std::filesystem::path& path);
GrayImage decode_png(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_png(const Frame& pixels, int bit_depth);
std::vector<std::uint8_t> encode_png(const RgbImage& image);

/// Animated PNG with a fixed per-frame delay; all frames must share a size.
std::vector<std::uint8_t> encode_apng(std::span<const RgbImage> frames, int delay_ms);

/// Frames named frame_NNNN.{png,tif,tiff} in lexicographic order. Throws
/// IoError(input) when the directory is missing, empty, or mixes depths.
FrameSequence load_frame_directory(const std::filesystem::path& dir);

/// Writes frame_NNNN.png files. Returns the written paths.
std::vector<std::filesystem::path> save_frame_directory(const FrameSequence& frames,
                                                         const std::filesystem::path& dir);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file(const std::filesystem::path& path, std::string_view text);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);

/// "frame_0003.png" for index 3.
std::string frame_file_name(int index, std::string_view extension = "png");

/// True for names like frame_0003.png.
bool is_frame_file_name(const std::string& name);

}  // namespace cystrack::io
