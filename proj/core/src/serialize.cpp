// Copyright 2026 The dcac Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dcac/serialize.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "dcac/error.hpp"

namespace dcac {

namespace {

constexpr char kTensorMagic[4] = {'D', 'C', 'T', '1'};
constexpr char kBundleMagic[4] = {'D', 'C', 'B', '1'};

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw IoError("truncated stream while reading u32");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_u16(std::ostream& os, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

std::uint16_t read_u16(std::istream& is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  if (!is) throw IoError("truncated stream while reading u16");
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

void write_f32(std::ostream& os, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_u32(os, bits);
}

float read_f32(std::istream& is) {
  const std::uint32_t bits = read_u32(is);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace

void write_tensor(std::ostream& os, const Tensor& t) {
  os.write(kTensorMagic, 4);
  const auto rank = static_cast<unsigned char>(t.rank());
  os.write(reinterpret_cast<const char*>(&rank), 1);
  for (const auto d : t.shape()) write_u32(os, static_cast<std::uint32_t>(d));
  for (const double v : t.values()) write_f32(os, static_cast<float>(v));
  if (!os) throw IoError("failed to write tensor record");
}

Tensor read_tensor(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kTensorMagic, 4) != 0) {
    throw IoError("bad tensor magic (expected DCT1)");
  }
  unsigned char rank = 0;
  is.read(reinterpret_cast<char*>(&rank), 1);
  if (!is) throw IoError("truncated tensor header");
  Shape shape(rank);
  for (auto& d : shape) d = static_cast<std::int64_t>(read_u32(is));
  const std::int64_t n = shape_numel(shape);
  std::vector<double> values(static_cast<std::size_t>(n));
  for (auto& v : values) v = static_cast<double>(read_f32(is));
  return Tensor::from_data(std::move(shape), std::move(values));
}

void save_tensor(const std::string& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  write_tensor(os, t);
}

Tensor load_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path);
  return read_tensor(is);
}

void save_bundle(const std::string& path, const TensorBundle& bundle) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os.write(kBundleMagic, 4);
  write_u32(os, static_cast<std::uint32_t>(bundle.size()));
  for (const auto& [name, tensor] : bundle) {
    if (name.size() > 0xffff) throw IoError("bundle entry name too long: " + name);
    write_u16(os, static_cast<std::uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_tensor(os, tensor);
  }
  if (!os) throw IoError("failed to write bundle: " + path);
}

TensorBundle load_bundle(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kBundleMagic, 4) != 0) {
    throw IoError("bad bundle magic in " + path);
  }
  const std::uint32_t count = read_u32(is);
  TensorBundle bundle;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t len = read_u16(is);
    std::string name(len, '\0');
    is.read(name.data(), len);
    if (!is) throw IoError("truncated bundle entry name in " + path);
    bundle.emplace(std::move(name), read_tensor(is));
  }
  return bundle;
}

}  // namespace dcac
