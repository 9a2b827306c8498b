#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace eaaslab::npy {

// Minimal NPY v1.0 container support for the dtypes the datasets use.
// Arrays are C-contiguous; shape is carried alongside the flat buffer.

struct Array {
  std::string dtype;            // "|u1", "<i4" or "<f4"
  std::vector<size_t> shape;    // row-major
  std::vector<uint8_t> raw;     // payload bytes

  size_t count() const {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    return n;
  }
};

Array load(const std::filesystem::path& path);

void save_u8(const std::filesystem::path& path, const std::vector<size_t>& shape,
             const uint8_t* data);
void save_i32(const std::filesystem::path& path, const std::vector<size_t>& shape,
              const int32_t* data);
void save_f32(const std::filesystem::path& path, const std::vector<size_t>& shape,
              const float* data);

}  // namespace eaaslab::npy
