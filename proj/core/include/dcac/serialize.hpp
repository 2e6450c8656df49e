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

#ifndef DCAC_SERIALIZE_HPP_
#define DCAC_SERIALIZE_HPP_

#include <iosfwd>
#include <map>
#include <string>

#include "dcac/tensor.hpp"

namespace dcac {

// Single-tensor format: magic "DCT1", u8 rank, rank x u32 little-endian
// extents, float32 little-endian payload.  Storage downcasts to f32; loading
// upcasts back to f64.
void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);

void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

// A bundle is a flat archive of named tensor records: magic "DCB1",
// u32 count, then per entry u16 name length, name bytes, one DCT1 record.
using TensorBundle = std::map<std::string, Tensor>;

void save_bundle(const std::string& path, const TensorBundle& bundle);
TensorBundle load_bundle(const std::string& path);

}  // namespace dcac

#endif  // DCAC_SERIALIZE_HPP_
