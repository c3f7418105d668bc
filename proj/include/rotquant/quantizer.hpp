#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rotquant {

enum class Scheme { symmetric, asymmetric };
enum class Granularity { per_tensor, per_token };

// `full_range` uses L = 2^b - 1 levels on each side of zero; `signed_levels` uses
// the conventional signed range L = 2^(b-1) - 1.
enum class LevelFormula { full_range, signed_levels };

std::string to_string(Scheme s);
std::string to_string(Granularity g);
std::string to_string(LevelFormula f);
Scheme parse_scheme(const std::string& text);
Granularity parse_granularity(const std::string& text);
LevelFormula parse_level_formula(const std::string& text);

struct QuantizerSpec {
    int bits = 4;
    double clip_ratio = 1.0;
    Scheme scheme = Scheme::symmetric;
    Granularity granularity = Granularity::per_token;
    std::optional<std::size_t> group_size;  // asymmetric only
    LevelFormula level_formula = LevelFormula::full_range;

    void validate() const;
    std::int64_t levels() const;
};

// Dense row-major tensor. The leading axis is the token axis; the last axis
// is the one asymmetric groups are cut along.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> values;

    std::size_t size() const;
    std::size_t rows() const;  // leading axis (1 for rank <= 1)
    std::size_t cols() const;  // product of the remaining axes
    std::size_t last_axis() const;
};

struct QuantizedTensor {
    std::vector<std::size_t> shape;
    std::vector<std::int32_t> codes;
    std::vector<double> scales;       // 1 (per tensor), rows (per token) or rows * groups
    std::vector<double> zero_points;  // asymmetric only, parallel to scales
    Scheme scheme = Scheme::symmetric;
    Granularity granularity = Granularity::per_tensor;
    std::size_t group_size = 0;
    int bits = 0;
};

QuantizedTensor quantize_symmetric(const Tensor& x, const QuantizerSpec& spec);
QuantizedTensor quantize_asymmetric_grouped(const Tensor& x, int bits, std::size_t group_size);

// Dispatches on spec.scheme; asymmetric uses spec.group_size (default: whole last axis).
QuantizedTensor quantize(const Tensor& x, const QuantizerSpec& spec);

Tensor dequantize(const QuantizedTensor& q);

struct QuantizationError {
    double max_abs_err = 0.0;
    double mse = 0.0;
};

QuantizationError quantization_error(const Tensor& x, const Tensor& approx);
QuantizationError quantization_error(const Tensor& x, const QuantizedTensor& q);

// Symmetric scale for one block of values: clip * max|x| / L, or 1 for an
// all-zero block.
double symmetric_scale(std::span<const double> values, int bits, double clip_ratio, LevelFormula formula);

// Round-half-away-from-zero then clamp to [lo, hi].
std::int64_t round_clamp(double value, std::int64_t lo, std::int64_t hi);

// In-place quantize -> dequantize, used on activations inside the forward pass.
void fake_quantize_symmetric(std::span<double> values, int bits, double clip_ratio, LevelFormula formula);
void fake_quantize_asymmetric(std::span<double> values, int bits, std::size_t group_size);

}  // namespace rotquant
