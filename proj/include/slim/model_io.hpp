// Copyright 2026 The slim Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "slim/model.hpp"

namespace slim {

// Model file layout, all integers and reals little-endian:
//
//   offset 0   "SLIM"
//          4   u32 format version
//          8   u32 input channels, height, width
//         20   u32 class count
//         24   u32 layer count L
//         28   L records of 8 u32 words:
//                kind, in_channels, out_channels, kernel_h, kernel_w, stride, padding, aux
//              batchnorm stores f32 bit patterns of stabilizer and momentum in
//              kernel_h / kernel_w; maxpool stores its window in aux.
//   28+32L     f32 parameters in declaration order:
//                conv weight (out,in,kh,kw) then bias; batchnorm scale, shift,
//                running mean, running variance; linear weight (out,in) then bias
//   end-4      u32 CRC-32 of every preceding byte
inline constexpr std::size_t kModelHeaderBytes = 28;
inline constexpr std::size_t kLayerRecordBytes = 32;

std::vector<std::uint8_t> serialize_model(const ModelGraph& model);
ModelGraph deserialize_model(std::span<const std::uint8_t> bytes);

/// Exact byte count serialize_model() produces.
std::uint64_t serialized_size(const ModelGraph& model);

/// Byte offset of the first parameter of `layer` within the file.
std::uint64_t parameter_offset(const ModelGraph& model, std::size_t layer);

void save_model(const ModelGraph& model, const std::filesystem::path& path);
ModelGraph load_model(const std::filesystem::path& path);

/// CRC-32 of the serialized model; identifies the exact weights a prune plan
/// was computed against.
std::uint32_t model_hash(const ModelGraph& model);

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes);

}  // namespace slim
