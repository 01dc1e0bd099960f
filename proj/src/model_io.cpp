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

#include "slim/model_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "slim/errors.hpp"

namespace slim {

namespace {

constexpr std::array<std::uint8_t, 4> kMagic{'S', 'L', 'I', 'M'};

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void reals(const float* data, Index n) {
    for (Index i = 0; i < n; ++i) f32(data[i]);
  }
  void raw(std::span<const std::uint8_t> b) { bytes_.insert(bytes_.end(), b.begin(), b.end()); }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  void reals(float* out, Index n) {
    for (Index i = 0; i < n; ++i) out[i] = f32();
  }
  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) {
      throw FormatError(FormatErrorKind::kTruncated,
                        "file ends at byte " + std::to_string(bytes_.size()) + ", needed " + std::to_string(pos_ + n));
    }
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

struct LayerRecord {
  std::array<std::uint32_t, 8> words{};
};

std::uint32_t u32_of(Index v) { return static_cast<std::uint32_t>(v); }

LayerRecord record_of(const Layer& layer) {
  LayerRecord r;
  r.words[0] = static_cast<std::uint32_t>(kind_of(layer));
  r.words[1] = u32_of(in_channels(layer));
  r.words[2] = u32_of(out_channels(layer));
  if (const auto* c = std::get_if<ConvLayer>(&layer)) {
    r.words[3] = u32_of(c->params.kernel_h());
    r.words[4] = u32_of(c->params.kernel_w());
    r.words[5] = u32_of(c->params.stride);
    r.words[6] = u32_of(c->params.padding);
  } else if (const auto* b = std::get_if<BatchNormLayer>(&layer)) {
    r.words[3] = std::bit_cast<std::uint32_t>(b->params.stabilizer);
    r.words[4] = std::bit_cast<std::uint32_t>(b->params.momentum);
  } else if (const auto* p = std::get_if<MaxPoolLayer>(&layer)) {
    r.words[7] = u32_of(p->extent);
  }
  return r;
}

std::uint64_t record_param_count(const LayerRecord& r) {
  const std::uint64_t in = r.words[1], out = r.words[2];
  switch (static_cast<LayerKind>(r.words[0])) {
    case LayerKind::kConv: return out * in * r.words[3] * r.words[4] + out;
    case LayerKind::kBatchNorm: return 4 * in;
    case LayerKind::kLinear: return out * in + out;
    default: return 0;
  }
}

/// Guards allocation against absurd extents in corrupted tables.
constexpr std::uint64_t kMaxReals = std::uint64_t{1} << 32;

Layer layer_from_record(const LayerRecord& r, Reader& in, std::size_t index) {
  const Index ci = r.words[1], co = r.words[2];
  const auto malformed = [&](const std::string& msg) {
    return FormatError(FormatErrorKind::kMalformed, "layer " + std::to_string(index) + ": " + msg);
  };
  switch (static_cast<LayerKind>(r.words[0])) {
    case LayerKind::kConv: {
      ConvParams<float> p;
      p.weight = Tensorf({co, ci, static_cast<Index>(r.words[3]), static_cast<Index>(r.words[4])});
      p.bias = Vector<float>(co);
      p.stride = r.words[5];
      p.padding = r.words[6];
      in.reals(p.weight.data(), p.weight.size());
      in.reals(p.bias.data(), p.bias.size());
      return ConvLayer{std::move(p)};
    }
    case LayerKind::kBatchNorm: {
      if (ci != co) throw malformed("batchnorm channel counts differ");
      BNParams<float> p;
      p.stabilizer = std::bit_cast<float>(r.words[3]);
      p.momentum = std::bit_cast<float>(r.words[4]);
      for (Vector<float>* v : {&p.scale, &p.shift, &p.running_mean, &p.running_var}) {
        v->resize(ci);
        in.reals(v->data(), ci);
      }
      return BatchNormLayer{std::move(p)};
    }
    case LayerKind::kRelu:
      if (ci != co) throw malformed("relu channel counts differ");
      return ReluLayer{ci};
    case LayerKind::kMaxPool:
      if (ci != co) throw malformed("maxpool channel counts differ");
      return MaxPoolLayer{static_cast<Index>(r.words[7]), ci};
    case LayerKind::kGlobalAvgPool:
      if (ci != co) throw malformed("globalavgpool channel counts differ");
      return GlobalAvgPoolLayer{ci};
    case LayerKind::kLinear: {
      LinearParams<float> p;
      p.weight = Tensorf({co, ci});
      p.bias = Vector<float>(co);
      in.reals(p.weight.data(), p.weight.size());
      in.reals(p.bias.data(), p.bias.size());
      return LinearLayer{std::move(p)};
    }
  }
  throw malformed("unknown layer kind " + std::to_string(r.words[0]));
}

}  // namespace

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t done = 0;
  while (done < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - done, 1u << 30));
    crc = crc32(crc, bytes.data() + done, chunk);
    done += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> serialize_model(const ModelGraph& model) {
  model.validate();
  Writer w;
  w.raw(kMagic);
  w.u32(model.format_version);
  w.u32(u32_of(model.input.channels));
  w.u32(u32_of(model.input.height));
  w.u32(u32_of(model.input.width));
  w.u32(u32_of(model.num_classes));
  w.u32(static_cast<std::uint32_t>(model.layers.size()));
  for (const Layer& layer : model.layers) {
    for (std::uint32_t word : record_of(layer).words) w.u32(word);
  }
  for (const Layer& layer : model.layers) {
    if (const auto* c = std::get_if<ConvLayer>(&layer)) {
      w.reals(c->params.weight.data(), c->params.weight.size());
      w.reals(c->params.bias.data(), c->params.bias.size());
    } else if (const auto* b = std::get_if<BatchNormLayer>(&layer)) {
      for (const Vector<float>* v : {&b->params.scale, &b->params.shift, &b->params.running_mean,
                                     &b->params.running_var}) {
        w.reals(v->data(), v->size());
      }
    } else if (const auto* l = std::get_if<LinearLayer>(&layer)) {
      w.reals(l->params.weight.data(), l->params.weight.size());
      w.reals(l->params.bias.data(), l->params.bias.size());
    }
  }
  w.u32(crc32_of(w.bytes()));
  return std::move(w.bytes());
}

ModelGraph deserialize_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kMagic.size()) {
    throw FormatError(FormatErrorKind::kTruncated, "file shorter than the magic number");
  }
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw FormatError(FormatErrorKind::kBadMagic, "expected \"SLIM\"");
  }
  Reader in(bytes.subspan(kMagic.size()));
  ModelGraph model;
  model.format_version = in.u32();
  if (model.format_version != kModelFormatVersion) {
    throw FormatError(FormatErrorKind::kUnsupportedVersion, "version " + std::to_string(model.format_version) +
                                                                ", this build reads " +
                                                                std::to_string(kModelFormatVersion));
  }
  model.input.channels = in.u32();
  model.input.height = in.u32();
  model.input.width = in.u32();
  model.num_classes = in.u32();
  const std::uint32_t layer_count = in.u32();
  if (std::uint64_t{layer_count} * kLayerRecordBytes > bytes.size()) {
    throw FormatError(FormatErrorKind::kTruncated, "layer table of " + std::to_string(layer_count) +
                                                       " records exceeds file size");
  }
  std::vector<LayerRecord> records(layer_count);
  std::uint64_t reals = 0;
  for (auto& r : records) {
    for (auto& word : r.words) word = in.u32();
    reals += record_param_count(r);
    if (reals > kMaxReals) throw FormatError(FormatErrorKind::kMalformed, "implausible parameter count");
  }
  const std::uint64_t expected = kModelHeaderBytes + std::uint64_t{layer_count} * kLayerRecordBytes + 4 * reals + 4;
  if (bytes.size() < expected) {
    throw FormatError(FormatErrorKind::kTruncated, "file has " + std::to_string(bytes.size()) +
                                                       " bytes, layer table implies " + std::to_string(expected));
  }
  if (bytes.size() > expected) {
    throw FormatError(FormatErrorKind::kMalformed, std::to_string(bytes.size() - expected) + " trailing bytes");
  }
  const std::uint32_t stored_crc = Reader(bytes.subspan(bytes.size() - 4)).u32();
  const std::uint32_t actual_crc = crc32_of(bytes.first(bytes.size() - 4));
  if (stored_crc != actual_crc) {
    throw FormatError(FormatErrorKind::kChecksumMismatch, "stored " + std::to_string(stored_crc) + ", computed " +
                                                              std::to_string(actual_crc));
  }
  model.layers.reserve(layer_count);
  for (std::size_t i = 0; i < records.size(); ++i) model.layers.push_back(layer_from_record(records[i], in, i));
  try {
    model.validate();
  } catch (const Error& e) {
    throw FormatError(FormatErrorKind::kMalformed, e.what());
  }
  return model;
}

std::uint64_t serialized_size(const ModelGraph& model) {
  std::uint64_t reals = 0;
  for (const Layer& layer : model.layers) reals += record_param_count(record_of(layer));
  return kModelHeaderBytes + model.layers.size() * kLayerRecordBytes + 4 * reals + 4;
}

std::uint64_t parameter_offset(const ModelGraph& model, std::size_t layer) {
  if (layer >= model.layers.size()) throw ArgumentError("layer index out of range");
  std::uint64_t offset = kModelHeaderBytes + model.layers.size() * kLayerRecordBytes;
  for (std::size_t i = 0; i < layer; ++i) offset += 4 * record_param_count(record_of(model.layers[i]));
  return offset;
}

void save_model(const ModelGraph& model, const std::filesystem::path& path) {
  const auto bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write model file " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

ModelGraph load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read model file " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return deserialize_model(bytes);
}

std::uint32_t model_hash(const ModelGraph& model) {
  const auto bytes = serialize_model(model);
  return crc32_of(std::span<const std::uint8_t>(bytes).first(bytes.size() - 4));
}

}  // namespace slim
