#include "rotquant/io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

#include "rotquant/error.hpp"

static_assert(std::endian::native == std::endian::little, "tensor and token files assume a little-endian host");

namespace rotquant {

Fnv1a& Fnv1a::update(const void* data, std::size_t size) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
        state_ ^= p[i];
        state_ *= 0x100000001b3ULL;
    }
    return *this;
}

std::uint64_t fnv1a64(std::string_view text) { return Fnv1a().update(text).value(); }

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read failed for '" + path.string() + "'");
    return ss.str();
}

void atomic_write(const std::filesystem::path& path, std::string_view contents) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out) throw IoError("write failed for '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot move output into place at '" + path.string() + "'");
    }
}

namespace {

template <class T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <class T>
T take(std::string_view bytes, std::size_t& pos) {
    if (bytes.size() - pos < sizeof(T)) throw DataError("tensor file is truncated");
    T v;
    std::memcpy(&v, bytes.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

}  // namespace

std::string encode_tensor(const TensorRecord& t) {
    const std::size_t count =
        std::accumulate(t.shape.begin(), t.shape.end(), std::size_t{1}, std::multiplies<>());
    if (count != t.values.size()) throw ShapeError("tensor shape does not match its value count");
    if (t.shape.size() > 255) throw ShapeError("tensor rank exceeds 255");
    std::string out = "RQT1";
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.dtype));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.shape.size()));
    for (std::size_t d : t.shape) put<std::uint64_t>(out, d);
    out.reserve(out.size() + 4 * count);
    for (double v : t.values) {
        if (t.dtype == DType::f32) {
            put<float>(out, static_cast<float>(v));
        } else {
            if (v != std::trunc(v) || v < std::numeric_limits<std::int32_t>::min() ||
                v > std::numeric_limits<std::int32_t>::max()) {
                throw DataError("value does not fit an i32 tensor");
            }
            put<std::int32_t>(out, static_cast<std::int32_t>(v));
        }
    }
    return out;
}

TensorRecord decode_tensor(std::string_view bytes) {
    if (bytes.substr(0, 4) != "RQT1") throw DataError("not a tensor file (bad magic)");
    std::size_t pos = 4;
    TensorRecord t;
    const auto dtype = take<std::uint8_t>(bytes, pos);
    if (dtype > 1) throw DataError("unknown tensor dtype " + std::to_string(dtype));
    t.dtype = static_cast<DType>(dtype);
    const auto rank = take<std::uint8_t>(bytes, pos);
    std::size_t count = 1;
    for (unsigned i = 0; i < rank; ++i) {
        const auto d = take<std::uint64_t>(bytes, pos);
        if (d != 0 && count > (bytes.size() / 4) / d) throw DataError("tensor dims exceed the payload");
        count *= d;
        t.shape.push_back(d);
    }
    if (bytes.size() - pos != 4 * count) throw DataError("tensor payload size does not match its dims");
    t.values.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        t.values[i] = t.dtype == DType::f32 ? static_cast<double>(take<float>(bytes, pos))
                                            : static_cast<double>(take<std::int32_t>(bytes, pos));
    }
    return t;
}

void write_tensor_file(const std::filesystem::path& path, const TensorRecord& t) { atomic_write(path, encode_tensor(t)); }

TensorRecord read_tensor_file(const std::filesystem::path& path) { return decode_tensor(read_file(path)); }

}  // namespace rotquant
