#include "tad/dtck.hpp"

#include "core/errors.hpp"

#include <cstring>
#include <fstream>

namespace detours::tad {

namespace {

void put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

} // namespace

Tensor<float> TensorRecord::as_f32() const {
    if (dtype != 0) throw FormatError("tensor '" + name + "' is not f32");
    return Tensor<float>(shape, f32);
}

Tensor<double> TensorRecord::as_f64() const {
    if (dtype != 1) throw FormatError("tensor '" + name + "' is not f64");
    return Tensor<double>(shape, f64);
}

void write_dtck(const std::filesystem::path& path, const std::vector<TensorRecord>& records) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path.string());
    os.write("DTCK", 4);
    put_u32(os, kDtckVersion);
    put_u32(os, static_cast<uint32_t>(records.size()));
    for (const auto& r : records) {
        put_u32(os, static_cast<uint32_t>(r.name.size()));
        os.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
        os.put(static_cast<char>(r.dtype));
        os.put(static_cast<char>(r.shape.size()));
        for (int d : r.shape) put_u32(os, static_cast<uint32_t>(d));
        if (r.dtype == 0)
            os.write(reinterpret_cast<const char*>(r.f32.data()),
                     static_cast<std::streamsize>(r.f32.size() * sizeof(float)));
        else
            os.write(reinterpret_cast<const char*>(r.f64.data()),
                     static_cast<std::streamsize>(r.f64.size() * sizeof(double)));
    }
    if (!os) throw IoError("short write: " + path.string());
}

std::vector<TensorRecord> read_dtck(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path.string());
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "DTCK", 4) != 0)
        throw FormatError("not a DTCK file: " + path.string());
    const uint32_t version = get_u32(is);
    if (version != kDtckVersion)
        throw FormatError("unsupported DTCK version " + std::to_string(version));
    const uint32_t count = get_u32(is);
    std::vector<TensorRecord> out;
    out.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        TensorRecord r;
        const uint32_t name_len = get_u32(is);
        r.name.resize(name_len);
        is.read(r.name.data(), name_len);
        r.dtype = static_cast<uint8_t>(is.get());
        const int rank = is.get();
        size_t numel = 1;
        for (int d = 0; d < rank; ++d) {
            r.shape.push_back(static_cast<int>(get_u32(is)));
            numel *= static_cast<size_t>(r.shape.back());
        }
        if (r.dtype == 0) {
            r.f32.resize(numel);
            is.read(reinterpret_cast<char*>(r.f32.data()),
                    static_cast<std::streamsize>(numel * sizeof(float)));
        } else if (r.dtype == 1) {
            r.f64.resize(numel);
            is.read(reinterpret_cast<char*>(r.f64.data()),
                    static_cast<std::streamsize>(numel * sizeof(double)));
        } else {
            throw FormatError("unknown dtype in DTCK record '" + r.name + "'");
        }
        if (!is) throw FormatError("truncated DTCK record '" + r.name + "'");
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace detours::tad
