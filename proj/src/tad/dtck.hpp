#pragma once

#include "tad/tensor.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace detours::tad {

// Named-tensor container. Layout: magic "DTCK", version u32, count u32,
// then per tensor: name length u32 + bytes, dtype u8 (0=f32, 1=f64),
// rank u8, dims u32[rank], little-endian payload.
inline constexpr uint32_t kDtckVersion = 1;

struct TensorRecord {
    std::string name;
    uint8_t dtype = 0;
    std::vector<int> shape;
    std::vector<float> f32;
    std::vector<double> f64;

    static TensorRecord from(const std::string& name, const Tensor<float>& t) {
        return TensorRecord{name, 0, t.shape, t.data, {}};
    }
    static TensorRecord from(const std::string& name, const Tensor<double>& t) {
        return TensorRecord{name, 1, t.shape, {}, t.data};
    }

    Tensor<float> as_f32() const;
    Tensor<double> as_f64() const;
};

void write_dtck(const std::filesystem::path& path, const std::vector<TensorRecord>& records);
std::vector<TensorRecord> read_dtck(const std::filesystem::path& path);

} // namespace detours::tad
