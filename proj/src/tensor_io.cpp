// Copyright 2026 The DragScene Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dragscene/tensor_io.hpp"

#include <bit>
#include <fstream>
#include <iterator>
#include <limits>

#include "dragscene/errors.hpp"

namespace dragscene {

namespace {

constexpr char kMagic[4] = {'D', 'S', 'T', 'N'};

void PutU32(std::string* out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out->push_back(static_cast<char>((v >> (8 * k)) & 0xFFu));
}

class Cursor {
 public:
  explicit Cursor(std::string_view bytes) : bytes_(bytes) {}

  std::uint8_t U8(const char* field) {
    Need(1, field);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::uint32_t U32(const char* field) {
    Need(4, field);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) {
      v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes_[pos_ + k])) << (8 * k);
    }
    pos_ += 4;
    return v;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::string_view Take(std::size_t n, const char* field) {
    Need(n, field);
    const std::string_view s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void Need(std::size_t n, const char* field) {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("tensor truncated in field '") + field + "'");
    }
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

TensorHeader DecodeHeader(Cursor* cur) {
  const std::string_view magic = cur->Take(4, "magic");
  if (magic != std::string_view(kMagic, 4)) throw FormatError("tensor field 'magic' is not DSTN");
  TensorHeader h;
  h.version = cur->U32("version");
  if (h.version != kTensorVersion) {
    throw FormatError("tensor field 'version' is " + std::to_string(h.version) + ", expected 1");
  }
  h.dtype = cur->U8("dtype");
  if (h.dtype != kDtypeFloat32) {
    throw FormatError("tensor field 'dtype' is " + std::to_string(h.dtype) + ", expected 1");
  }
  const std::uint8_t ndim = cur->U8("ndim");
  for (int k = 0; k < ndim; ++k) h.dims.push_back(cur->U32("dims"));
  return h;
}

}  // namespace

std::size_t Tensor::NumElements() const {
  std::size_t n = 1;
  for (std::uint32_t d : dims) n *= d;
  return n;
}

std::string EncodeTensor(const Tensor& tensor) {
  if (tensor.dims.size() > std::numeric_limits<std::uint8_t>::max()) {
    throw FormatError("tensor field 'ndim' exceeds 255");
  }
  if (tensor.NumElements() != tensor.data.size()) {
    throw FormatError("tensor field 'payload' does not match its dims");
  }
  std::string out(kMagic, 4);
  PutU32(&out, kTensorVersion);
  out.push_back(static_cast<char>(kDtypeFloat32));
  out.push_back(static_cast<char>(tensor.dims.size()));
  for (std::uint32_t d : tensor.dims) PutU32(&out, d);
  out.reserve(out.size() + 4 * tensor.data.size());
  for (float f : tensor.data) PutU32(&out, std::bit_cast<std::uint32_t>(f));
  return out;
}

Tensor DecodeTensor(std::string_view bytes) {
  Cursor cur(bytes);
  TensorHeader h = DecodeHeader(&cur);
  std::uint64_t count = 1;
  for (std::uint32_t d : h.dims) {
    if (d != 0 && count > std::numeric_limits<std::uint64_t>::max() / 4 / d) {
      throw FormatError("tensor field 'dims' overflows the payload size");
    }
    count *= d;
  }
  if (cur.remaining() != count * 4) {
    throw FormatError("tensor field 'payload' has " + std::to_string(cur.remaining()) +
                      " bytes, expected " + std::to_string(count * 4));
  }
  Tensor t;
  t.dims = std::move(h.dims);
  t.data.resize(static_cast<std::size_t>(count));
  for (float& f : t.data) f = std::bit_cast<float>(cur.U32("payload"));
  return t;
}

std::string ReadFileBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void WriteFileBytes(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("failed writing " + path.string());
}

void WriteTensor(const std::filesystem::path& path, const Tensor& tensor) {
  WriteFileBytes(path, EncodeTensor(tensor));
}

Tensor ReadTensor(const std::filesystem::path& path) {
  try {
    return DecodeTensor(ReadFileBytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

TensorHeader ReadTensorHeader(const std::filesystem::path& path) {
  const std::string bytes = ReadFileBytes(path);
  Cursor cur(bytes);
  return DecodeHeader(&cur);
}

Tensor FieldToTensor(const Field& field) {
  Tensor t;
  t.dims = {static_cast<std::uint32_t>(field.height()), static_cast<std::uint32_t>(field.width()),
            static_cast<std::uint32_t>(field.channels())};
  t.data.assign(field.data().begin(), field.data().end());
  return t;
}

Field TensorToField(const Tensor& tensor) {
  if (tensor.dims.size() != 3) throw FormatError("expected a 3-d tensor (H x W x C)");
  Field f(static_cast<int>(tensor.dims[0]), static_cast<int>(tensor.dims[1]),
          static_cast<int>(tensor.dims[2]));
  std::copy(tensor.data.begin(), tensor.data.end(), f.data().begin());
  return f;
}

Tensor MaskToTensor(const MaskGrid& mask) {
  Tensor t;
  t.dims = {static_cast<std::uint32_t>(mask.height()), static_cast<std::uint32_t>(mask.width())};
  t.data.assign(mask.data().begin(), mask.data().end());
  return t;
}

MaskGrid TensorToMask(const Tensor& tensor) {
  if (tensor.dims.size() != 2) throw FormatError("expected a 2-d tensor (H x W)");
  MaskGrid m(static_cast<int>(tensor.dims[0]), static_cast<int>(tensor.dims[1]));
  std::copy(tensor.data.begin(), tensor.data.end(), m.data().begin());
  return m;
}

Tensor PointsToTensor(const std::vector<Vec3>& points) {
  Tensor t;
  t.dims = {static_cast<std::uint32_t>(points.size()), 3};
  for (const Vec3& p : points) {
    for (int k = 0; k < 3; ++k) t.data.push_back(static_cast<float>(p[k]));
  }
  return t;
}

}  // namespace dragscene
