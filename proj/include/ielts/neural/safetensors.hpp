#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace ielts::neural {

enum class DType { f16, bf16, f32, f64 };

struct Tensor {
    DType dtype = DType::f32;
    std::vector<std::int64_t> shape;
    std::vector<std::uint8_t> bytes;  // little-endian, row-major

    std::size_t numel() const;
    std::vector<double> to_double() const;
    std::vector<float> to_float() const;

    static Tensor from_float(const float* data, std::vector<std::int64_t> shape);
    static Tensor from_double(const double* data, std::vector<std::int64_t> shape);
};

struct SafetensorsFile {
    std::map<std::string, Tensor> tensors;
    std::map<std::string, std::string> metadata;
};

// Safetensors container: 8-byte header length, JSON header, raw data.
SafetensorsFile read_safetensors(const std::filesystem::path& path);
SafetensorsFile parse_safetensors(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> serialize_safetensors(const SafetensorsFile& file);
void write_safetensors(const std::filesystem::path& path, const SafetensorsFile& file);

}  // namespace ielts::neural
