#include "rotquant/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "rotquant/error.hpp"

namespace rotquant {

std::string to_string(Scheme s) { return s == Scheme::symmetric ? "symmetric" : "asymmetric"; }
std::string to_string(Granularity g) { return g == Granularity::per_tensor ? "per_tensor" : "per_token"; }
std::string to_string(LevelFormula f) { return f == LevelFormula::full_range ? "full_range" : "signed"; }

Scheme parse_scheme(const std::string& text) {
    if (text == "symmetric") return Scheme::symmetric;
    if (text == "asymmetric") return Scheme::asymmetric;
    throw ArgumentError("unknown scheme '" + text + "'");
}

Granularity parse_granularity(const std::string& text) {
    if (text == "per_tensor") return Granularity::per_tensor;
    if (text == "per_token") return Granularity::per_token;
    throw ArgumentError("unknown granularity '" + text + "'");
}

LevelFormula parse_level_formula(const std::string& text) {
    if (text == "full_range") return LevelFormula::full_range;
    if (text == "signed") return LevelFormula::signed_levels;
    throw ArgumentError("unknown level formula '" + text + "'");
}

namespace {

void check_bits(int bits) {
    if (bits < 2 || bits > 30) throw ArgumentError("bits must be in [2, 30], got " + std::to_string(bits));
}

std::int64_t level_count(int bits, LevelFormula f) {
    return f == LevelFormula::full_range ? (std::int64_t{1} << bits) - 1 : (std::int64_t{1} << (bits - 1)) - 1;
}

void check_finite(const Tensor& x) {
    if (x.values.empty()) throw DataError("cannot quantize an empty tensor");
    if (x.values.size() != x.size()) throw ShapeError("tensor shape does not match its value count");
    for (double v : x.values) {
        if (!std::isfinite(v)) throw DataError("tensor contains non-finite values");
    }
}

}  // namespace

void QuantizerSpec::validate() const {
    check_bits(bits);
    if (!(clip_ratio > 0.0 && clip_ratio <= 1.0)) {
        throw ArgumentError("clip ratio must be in (0, 1], got " + std::to_string(clip_ratio));
    }
    if (group_size) {
        if (scheme != Scheme::asymmetric) throw ArgumentError("group size only applies to asymmetric quantization");
        if (*group_size == 0) throw ArgumentError("group size must be positive");
    }
    if (level_formula == LevelFormula::signed_levels && bits < 2) throw ArgumentError("signed levels need bits >= 2");
}

std::int64_t QuantizerSpec::levels() const { return level_count(bits, level_formula); }

std::size_t Tensor::size() const {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::size_t Tensor::rows() const { return shape.size() <= 1 ? 1 : shape.front(); }

std::size_t Tensor::cols() const {
    const std::size_t r = rows();
    return r == 0 ? 0 : size() / r;
}

std::size_t Tensor::last_axis() const { return shape.empty() ? 1 : shape.back(); }

std::int64_t round_clamp(double value, std::int64_t lo, std::int64_t hi) {
    const double r = std::round(value);
    if (r < static_cast<double>(lo)) return lo;
    if (r > static_cast<double>(hi)) return hi;
    return static_cast<std::int64_t>(r);
}

double symmetric_scale(std::span<const double> values, int bits, double clip_ratio, LevelFormula formula) {
    double max_abs = 0.0;
    for (double v : values) max_abs = std::max(max_abs, std::abs(v));
    if (max_abs == 0.0) return 1.0;
    return clip_ratio * max_abs / static_cast<double>(level_count(bits, formula));
}

QuantizedTensor quantize_symmetric(const Tensor& x, const QuantizerSpec& spec) {
    spec.validate();
    if (spec.scheme != Scheme::symmetric) throw ArgumentError("quantize_symmetric needs a symmetric spec");
    check_finite(x);

    const std::int64_t levels = spec.levels();
    const std::size_t blocks = spec.granularity == Granularity::per_token ? x.rows() : 1;
    const std::size_t block_len = x.values.size() / blocks;

    QuantizedTensor q;
    q.shape = x.shape;
    q.scheme = Scheme::symmetric;
    q.granularity = spec.granularity;
    q.bits = spec.bits;
    q.codes.resize(x.values.size());
    q.scales.resize(blocks);
    for (std::size_t b = 0; b < blocks; ++b) {
        std::span<const double> block(x.values.data() + b * block_len, block_len);
        const double delta = symmetric_scale(block, spec.bits, spec.clip_ratio, spec.level_formula);
        q.scales[b] = delta;
        for (std::size_t i = 0; i < block_len; ++i) {
            q.codes[b * block_len + i] = static_cast<std::int32_t>(round_clamp(block[i] / delta, -levels, levels));
        }
    }
    return q;
}

QuantizedTensor quantize_asymmetric_grouped(const Tensor& x, int bits, std::size_t group_size) {
    check_bits(bits);
    check_finite(x);
    if (group_size == 0) throw ArgumentError("group size must be positive");
    const std::size_t last = x.last_axis();
    if (last % group_size != 0) {
        throw ShapeError("last axis " + std::to_string(last) + " is not divisible by group size " +
                         std::to_string(group_size));
    }
    const std::int64_t top = (std::int64_t{1} << bits) - 1;
    const std::size_t groups = x.values.size() / group_size;

    QuantizedTensor q;
    q.shape = x.shape;
    q.scheme = Scheme::asymmetric;
    q.granularity = Granularity::per_token;
    q.group_size = group_size;
    q.bits = bits;
    q.codes.resize(x.values.size());
    q.scales.resize(groups);
    q.zero_points.resize(groups);
    for (std::size_t g = 0; g < groups; ++g) {
        const double* v = x.values.data() + g * group_size;
        const auto [lo_it, hi_it] = std::minmax_element(v, v + group_size);
        const double lo = *lo_it;
        const double hi = *hi_it;
        double delta = 1.0;
        double zero = -lo;
        if (hi > lo) {
            delta = (hi - lo) / static_cast<double>(top);
            zero = std::round(-lo / delta);
        }
        q.scales[g] = delta;
        q.zero_points[g] = zero;
        for (std::size_t i = 0; i < group_size; ++i) {
            q.codes[g * group_size + i] = static_cast<std::int32_t>(round_clamp(v[i] / delta + zero, 0, top));
        }
    }
    return q;
}

QuantizedTensor quantize(const Tensor& x, const QuantizerSpec& spec) {
    spec.validate();
    if (spec.scheme == Scheme::symmetric) return quantize_symmetric(x, spec);
    return quantize_asymmetric_grouped(x, spec.bits, spec.group_size.value_or(x.last_axis()));
}

Tensor dequantize(const QuantizedTensor& q) {
    Tensor out;
    out.shape = q.shape;
    out.values.resize(q.codes.size());
    if (q.scales.empty()) throw DataError("quantized tensor has no scales");
    if (q.codes.size() % q.scales.size() != 0) throw DataError("scale count does not divide code count");
    const std::size_t block = q.codes.size() / q.scales.size();
    const bool asym = q.scheme == Scheme::asymmetric;
    if (asym && q.zero_points.size() != q.scales.size()) throw DataError("zero point count mismatch");
    for (std::size_t i = 0; i < q.codes.size(); ++i) {
        const std::size_t b = i / block;
        const double code = static_cast<double>(q.codes[i]);
        out.values[i] = asym ? (code - q.zero_points[b]) * q.scales[b] : code * q.scales[b];
    }
    return out;
}

QuantizationError quantization_error(const Tensor& x, const Tensor& approx) {
    if (x.shape != approx.shape || x.values.size() != approx.values.size()) {
        throw ShapeError("quantization_error: shape mismatch");
    }
    QuantizationError e;
    if (x.values.empty()) return e;
    double sq = 0.0;
    for (std::size_t i = 0; i < x.values.size(); ++i) {
        const double d = std::abs(x.values[i] - approx.values[i]);
        e.max_abs_err = std::max(e.max_abs_err, d);
        sq += d * d;
    }
    e.mse = sq / static_cast<double>(x.values.size());
    return e;
}

QuantizationError quantization_error(const Tensor& x, const QuantizedTensor& q) {
    return quantization_error(x, dequantize(q));
}

void fake_quantize_symmetric(std::span<double> values, int bits, double clip_ratio, LevelFormula formula) {
    const double delta = symmetric_scale(values, bits, clip_ratio, formula);
    const std::int64_t levels = level_count(bits, formula);
    for (double& v : values) v = static_cast<double>(round_clamp(v / delta, -levels, levels)) * delta;
}

void fake_quantize_asymmetric(std::span<double> values, int bits, std::size_t group_size) {
    if (group_size == 0 || values.size() % group_size != 0) {
        throw ShapeError("fake_quantize_asymmetric: length not divisible by group size");
    }
    const std::int64_t top = (std::int64_t{1} << bits) - 1;
    for (std::size_t off = 0; off < values.size(); off += group_size) {
        auto g = values.subspan(off, group_size);
        const auto [lo_it, hi_it] = std::minmax_element(g.begin(), g.end());
        const double lo = *lo_it;
        const double hi = *hi_it;
        if (!(hi > lo)) continue;  // constant group reproduces exactly
        const double delta = (hi - lo) / static_cast<double>(top);
        const double zero = std::round(-lo / delta);
        for (double& v : g) v = (static_cast<double>(round_clamp(v / delta + zero, 0, top)) - zero) * delta;
    }
}

}  // namespace rotquant
