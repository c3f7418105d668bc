#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rotquant {

// Describes how a Hadamard matrix is built: Sylvester doubling (order 2^k),
// Paley from a prime p = 3 (mod 4) (order p + 1), or a Kronecker product of
// two recipes.
class ConstructionRecipe {
public:
    enum class Kind { sylvester, paley, kronecker };

    static ConstructionRecipe sylvester(unsigned exponent);
    static ConstructionRecipe paley(std::uint64_t prime);
    static ConstructionRecipe kronecker(ConstructionRecipe left, ConstructionRecipe right);

    // Accepts the format produced by to_string(), e.g.
    // "kron(paley(11),sylvester(7))".
    static ConstructionRecipe parse(std::string_view text);

    Kind kind() const { return kind_; }
    unsigned exponent() const { return exponent_; }
    std::uint64_t prime() const { return prime_; }
    const ConstructionRecipe& left() const { return *left_; }
    const ConstructionRecipe& right() const { return *right_; }

    std::size_t order() const { return order_; }
    std::size_t factor_count() const;
    std::string to_string() const;

    friend bool operator==(const ConstructionRecipe& a, const ConstructionRecipe& b);

private:
    ConstructionRecipe() = default;

    Kind kind_ = Kind::sylvester;
    unsigned exponent_ = 0;
    std::uint64_t prime_ = 0;
    std::size_t order_ = 1;
    std::shared_ptr<const ConstructionRecipe> left_;
    std::shared_ptr<const ConstructionRecipe> right_;
};

// Integer +/-1 matrix with H * H^T = n * I. Immutable once built; entries are
// stored row-major and never normalized.
class HadamardMatrix {
public:
    std::size_t order() const { return order_; }
    const ConstructionRecipe& recipe() const { return recipe_; }

    int operator()(std::size_t row, std::size_t col) const { return entries_[row * order_ + col]; }
    std::span<const std::int8_t> row(std::size_t r) const {
        return {entries_.data() + r * order_, order_};
    }
    std::span<const std::int8_t> entries() const { return entries_; }

    // Exact integer check of H * H^T == n * I (bit-packed, O(n^3 / 64)).
    bool is_orthogonal() const;

    // Row-major dense copy, optionally scaled by 1/sqrt(n).
    std::vector<double> dense(bool normalized) const;

    // y = H x (or H x / sqrt(n)), dense O(n^2).
    void apply(std::span<const double> x, std::span<double> y, bool normalized) const;

private:
    friend HadamardMatrix sylvester(unsigned);
    friend HadamardMatrix paley(std::uint64_t);
    friend HadamardMatrix kronecker(const HadamardMatrix&, const HadamardMatrix&);

    HadamardMatrix(ConstructionRecipe recipe, std::vector<std::int8_t> entries);

    ConstructionRecipe recipe_;
    std::size_t order_;
    std::vector<std::int8_t> entries_;
};

// Largest order this library will materialize as a dense matrix.
inline constexpr std::size_t max_dense_order = std::size_t{1} << 14;

bool is_prime(std::uint64_t value);
bool is_power_of_two(std::size_t value);

HadamardMatrix sylvester(unsigned exponent);

// Euler's criterion: a^((p-1)/2) mod p mapped to {-1, 0, +1}.
int legendre_symbol(std::int64_t a, std::uint64_t p);

// Quadratic-residue table for one prime, filled once by Euler's criterion.
class LegendreTable {
public:
    explicit LegendreTable(std::uint64_t p);
    std::uint64_t prime() const { return prime_; }
    int operator()(std::int64_t a) const;

private:
    std::uint64_t prime_;
    std::vector<std::int8_t> symbols_;
};

HadamardMatrix paley(std::uint64_t prime);
HadamardMatrix kronecker(const HadamardMatrix& a, const HadamardMatrix& b);
HadamardMatrix build(const ConstructionRecipe& recipe);

// Recipe for exactly `order`, if one exists among Sylvester, Paley and
// Kronecker products of them. Among several, the one with the fewest factors,
// then the largest power-of-two part, then the smallest primes.
std::optional<ConstructionRecipe> exact_recipe(std::size_t order);

// Smallest constructible order m >= n, as a recipe. Search is bounded by the
// next power of two, which always succeeds.
ConstructionRecipe find_constructible_order(std::size_t n);

// Largest constructible order <= n, or nullopt for n == 0.
std::optional<ConstructionRecipe> previous_constructible_order(std::size_t n);

// In-place fast Walsh-Hadamard transform in Sylvester (natural) ordering.
void fht(std::span<double> x, bool normalized = false);
std::vector<double> fht(std::span<const double> x, bool normalized = false);

// Applies `block` to each consecutive chunk of x.
std::vector<double> grouped_rotate(std::span<const double> x, const HadamardMatrix& block,
                                   bool normalized);

// Applies the matrix described by a recipe without materializing it: Sylvester
// factors go through fht, Paley factors are dense, Kronecker products are
// applied factor by factor.
class HadamardOperator {
public:
    explicit HadamardOperator(const ConstructionRecipe& recipe);

    std::size_t order() const { return order_; }
    const ConstructionRecipe& recipe() const { return recipe_; }

    void apply(std::span<double> x, bool normalized) const;

private:
    struct Factor {
        std::size_t order;
        std::optional<HadamardMatrix> dense;  // empty for Sylvester factors
    };

    void apply_unnormalized(std::span<double> x) const;

    ConstructionRecipe recipe_;
    std::size_t order_;
    std::vector<Factor> factors_;
};

}  // namespace rotquant
