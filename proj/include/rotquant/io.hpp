#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rotquant {

// 64-bit FNV-1a, used for config, model and dataset fingerprints.
class Fnv1a {
public:
    Fnv1a& update(const void* data, std::size_t size);
    Fnv1a& update(std::string_view text) { return update(text.data(), text.size()); }
    template <class T>
    Fnv1a& update_value(const T& v) {
        return update(&v, sizeof(T));
    }
    std::uint64_t value() const { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::uint64_t fnv1a64(std::string_view text);
std::string hex64(std::uint64_t v);

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file and renames it over `path`.
void atomic_write(const std::filesystem::path& path, std::string_view contents);

// Tensor file: "RQT1", u8 dtype (0 = f32, 1 = i32), u8 rank, u64 dims[rank],
// then the row-major payload, all little-endian.
enum class DType : std::uint8_t { f32 = 0, i32 = 1 };

struct TensorRecord {
    DType dtype = DType::f32;
    std::vector<std::size_t> shape;
    std::vector<double> values;  // i32 payloads are widened losslessly
};

std::string encode_tensor(const TensorRecord& t);
TensorRecord decode_tensor(std::string_view bytes);

void write_tensor_file(const std::filesystem::path& path, const TensorRecord& t);
TensorRecord read_tensor_file(const std::filesystem::path& path);

}  // namespace rotquant
