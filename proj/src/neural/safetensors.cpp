#include "ielts/neural/safetensors.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "ielts/common/error.hpp"

static_assert(std::endian::native == std::endian::little, "safetensors I/O assumes a little-endian host");

namespace ielts::neural {

namespace {

using nlohmann::json;

std::size_t dtype_size(DType d) {
    switch (d) {
        case DType::f16:
        case DType::bf16: return 2;
        case DType::f32: return 4;
        case DType::f64: return 8;
    }
    return 0;
}

const char* dtype_name(DType d) {
    switch (d) {
        case DType::f16: return "F16";
        case DType::bf16: return "BF16";
        case DType::f32: return "F32";
        case DType::f64: return "F64";
    }
    return "?";
}

DType dtype_from(const std::string& s) {
    if (s == "F16") return DType::f16;
    if (s == "BF16") return DType::bf16;
    if (s == "F32") return DType::f32;
    if (s == "F64") return DType::f64;
    throw InvalidInput("unsupported safetensors dtype " + s);
}

float half_to_float(std::uint16_t h) {
    const std::uint32_t sign = (h & 0x8000u) << 16;
    std::uint32_t exp = (h >> 10) & 0x1F;
    std::uint32_t mant = h & 0x3FF;
    std::uint32_t bits;
    if (exp == 0) {
        if (mant == 0) {
            bits = sign;
        } else {
            exp = 127 - 15 + 1;
            while ((mant & 0x400) == 0) {
                mant <<= 1;
                --exp;
            }
            bits = sign | (exp << 23) | ((mant & 0x3FF) << 13);
        }
    } else if (exp == 31) {
        bits = sign | 0x7F800000u | (mant << 13);
    } else {
        bits = sign | ((exp + 127 - 15) << 23) | (mant << 13);
    }
    return std::bit_cast<float>(bits);
}

}  // namespace

std::size_t Tensor::numel() const {
    std::size_t n = 1;
    for (auto d : shape) n *= static_cast<std::size_t>(d);
    return n;
}

std::vector<double> Tensor::to_double() const {
    const std::size_t n = numel();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        switch (dtype) {
            case DType::f64: {
                double v;
                std::memcpy(&v, bytes.data() + 8 * i, 8);
                out[i] = v;
                break;
            }
            case DType::f32: {
                float v;
                std::memcpy(&v, bytes.data() + 4 * i, 4);
                out[i] = v;
                break;
            }
            case DType::f16: {
                std::uint16_t h;
                std::memcpy(&h, bytes.data() + 2 * i, 2);
                out[i] = half_to_float(h);
                break;
            }
            case DType::bf16: {
                std::uint16_t h;
                std::memcpy(&h, bytes.data() + 2 * i, 2);
                out[i] = std::bit_cast<float>(static_cast<std::uint32_t>(h) << 16);
                break;
            }
        }
    }
    return out;
}

std::vector<float> Tensor::to_float() const {
    if (dtype == DType::f32) {
        std::vector<float> out(numel());
        std::memcpy(out.data(), bytes.data(), out.size() * 4);
        return out;
    }
    const auto d = to_double();
    return std::vector<float>(d.begin(), d.end());
}

Tensor Tensor::from_float(const float* data, std::vector<std::int64_t> shape) {
    Tensor t;
    t.dtype = DType::f32;
    t.shape = std::move(shape);
    t.bytes.resize(t.numel() * 4);
    std::memcpy(t.bytes.data(), data, t.bytes.size());
    return t;
}

Tensor Tensor::from_double(const double* data, std::vector<std::int64_t> shape) {
    Tensor t;
    t.dtype = DType::f64;
    t.shape = std::move(shape);
    t.bytes.resize(t.numel() * 8);
    std::memcpy(t.bytes.data(), data, t.bytes.size());
    return t;
}

SafetensorsFile parse_safetensors(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 8) throw InvalidInput("safetensors file too short");
    std::uint64_t header_len;
    std::memcpy(&header_len, bytes.data(), 8);
    if (header_len > bytes.size() - 8) throw InvalidInput("safetensors header length exceeds file size");
    json header;
    try {
        header = json::parse(bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(header_len));
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("invalid safetensors header: ") + e.what());
    }
    const std::size_t data_start = 8 + header_len;
    const std::size_t data_size = bytes.size() - data_start;

    SafetensorsFile file;
    for (const auto& [name, entry] : header.items()) {
        if (name == "__metadata__") {
            for (const auto& [k, v] : entry.items()) file.metadata[k] = v.get<std::string>();
            continue;
        }
        Tensor t;
        t.dtype = dtype_from(entry.at("dtype").get<std::string>());
        t.shape = entry.at("shape").get<std::vector<std::int64_t>>();
        const auto offsets = entry.at("data_offsets").get<std::vector<std::size_t>>();
        if (offsets.size() != 2 || offsets[0] > offsets[1] || offsets[1] > data_size) {
            throw InvalidInput("bad data_offsets for tensor " + name);
        }
        if (offsets[1] - offsets[0] != t.numel() * dtype_size(t.dtype)) {
            throw InvalidInput("tensor " + name + " byte size does not match its shape");
        }
        t.bytes.assign(bytes.begin() + static_cast<std::ptrdiff_t>(data_start + offsets[0]),
                       bytes.begin() + static_cast<std::ptrdiff_t>(data_start + offsets[1]));
        file.tensors.emplace(name, std::move(t));
    }
    return file;
}

SafetensorsFile read_safetensors(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_safetensors(bytes);
}

std::vector<std::uint8_t> serialize_safetensors(const SafetensorsFile& file) {
    json header = json::object();
    if (!file.metadata.empty()) header["__metadata__"] = file.metadata;
    std::size_t offset = 0;
    for (const auto& [name, t] : file.tensors) {
        header[name] = {{"dtype", dtype_name(t.dtype)}, {"shape", t.shape}, {"data_offsets", {offset, offset + t.bytes.size()}}};
        offset += t.bytes.size();
    }
    std::string h = header.dump();
    while ((h.size() + 8) % 8 != 0) h.push_back(' ');
    std::vector<std::uint8_t> out(8 + h.size());
    const std::uint64_t len = h.size();
    std::memcpy(out.data(), &len, 8);
    std::memcpy(out.data() + 8, h.data(), h.size());
    out.reserve(out.size() + offset);
    for (const auto& [name, t] : file.tensors) out.insert(out.end(), t.bytes.begin(), t.bytes.end());
    return out;
}

void write_safetensors(const std::filesystem::path& path, const SafetensorsFile& file) {
    const auto bytes = serialize_safetensors(file);
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("short write to " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace ielts::neural
