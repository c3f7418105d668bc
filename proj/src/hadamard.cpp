#include "rotquant/hadamard.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>
#include <tuple>

#include "rotquant/error.hpp"

namespace rotquant {

// ---------------------------------------------------------------------------
// ConstructionRecipe

ConstructionRecipe ConstructionRecipe::sylvester(unsigned exponent) {
    if (exponent >= 63) {
        throw SizeError("sylvester exponent " + std::to_string(exponent) + " overflows the order");
    }
    ConstructionRecipe r;
    r.kind_ = Kind::sylvester;
    r.exponent_ = exponent;
    r.order_ = std::size_t{1} << exponent;
    return r;
}

ConstructionRecipe ConstructionRecipe::paley(std::uint64_t prime) {
    if (!is_prime(prime) || prime % 4 != 3) {
        throw UnsupportedOrderError("paley construction needs a prime p = 3 (mod 4), got " +
                                    std::to_string(prime));
    }
    ConstructionRecipe r;
    r.kind_ = Kind::paley;
    r.prime_ = prime;
    r.order_ = static_cast<std::size_t>(prime + 1);
    return r;
}

ConstructionRecipe ConstructionRecipe::kronecker(ConstructionRecipe left, ConstructionRecipe right) {
    if (left.order_ != 0 && right.order_ > SIZE_MAX / left.order_) {
        throw SizeError("kronecker order overflows");
    }
    ConstructionRecipe r;
    r.kind_ = Kind::kronecker;
    r.order_ = left.order_ * right.order_;
    r.left_ = std::make_shared<const ConstructionRecipe>(std::move(left));
    r.right_ = std::make_shared<const ConstructionRecipe>(std::move(right));
    return r;
}

std::size_t ConstructionRecipe::factor_count() const {
    if (kind_ == Kind::kronecker) return left_->factor_count() + right_->factor_count();
    return 1;
}

std::string ConstructionRecipe::to_string() const {
    switch (kind_) {
        case Kind::sylvester:
            return "sylvester(" + std::to_string(exponent_) + ")";
        case Kind::paley:
            return "paley(" + std::to_string(prime_) + ")";
        case Kind::kronecker:
            return "kron(" + left_->to_string() + "," + right_->to_string() + ")";
    }
    return {};
}

bool operator==(const ConstructionRecipe& a, const ConstructionRecipe& b) {
    if (a.kind_ != b.kind_) return false;
    switch (a.kind_) {
        case ConstructionRecipe::Kind::sylvester:
            return a.exponent_ == b.exponent_;
        case ConstructionRecipe::Kind::paley:
            return a.prime_ == b.prime_;
        case ConstructionRecipe::Kind::kronecker:
            return *a.left_ == *b.left_ && *a.right_ == *b.right_;
    }
    return false;
}

namespace {

class RecipeParser {
public:
    explicit RecipeParser(std::string_view text) : text_(text) {}

    ConstructionRecipe parse_all() {
        ConstructionRecipe r = parse_one();
        skip_space();
        if (pos_ != text_.size()) fail("trailing characters");
        return r;
    }

private:
    ConstructionRecipe parse_one() {
        skip_space();
        std::string name;
        while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) {
            name += text_[pos_++];
        }
        expect('(');
        ConstructionRecipe result = [&] {
            if (name == "sylvester") return ConstructionRecipe::sylvester(static_cast<unsigned>(number()));
            if (name == "paley") return ConstructionRecipe::paley(number());
            if (name == "kron") {
                ConstructionRecipe left = parse_one();
                expect(',');
                ConstructionRecipe right = parse_one();
                return ConstructionRecipe::kronecker(std::move(left), std::move(right));
            }
            fail("unknown construction '" + name + "'");
        }();
        expect(')');
        return result;
    }

    std::uint64_t number() {
        skip_space();
        std::uint64_t value = 0;
        auto [ptr, ec] = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), value);
        if (ec != std::errc{}) fail("expected a number");
        pos_ = static_cast<std::size_t>(ptr - text_.data());
        return value;
    }

    void expect(char c) {
        skip_space();
        if (pos_ >= text_.size() || text_[pos_] != c) fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    void skip_space() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw ArgumentError("bad recipe '" + std::string(text_) + "' at offset " +
                            std::to_string(pos_) + ": " + msg);
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

}  // namespace

ConstructionRecipe ConstructionRecipe::parse(std::string_view text) {
    return RecipeParser(text).parse_all();
}

// ---------------------------------------------------------------------------
// number theory helpers

bool is_prime(std::uint64_t value) {
    if (value < 2) return false;
    if (value % 2 == 0) return value == 2;
    for (std::uint64_t d = 3; d <= value / d; d += 2) {
        if (value % d == 0) return false;
    }
    return true;
}

bool is_power_of_two(std::size_t value) { return value != 0 && (value & (value - 1)) == 0; }

namespace {

std::uint64_t mul_mod(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(a) * b) % m);
}

std::uint64_t pow_mod(std::uint64_t base, std::uint64_t exp, std::uint64_t m) {
    std::uint64_t result = 1 % m;
    base %= m;
    while (exp > 0) {
        if (exp & 1) result = mul_mod(result, base, m);
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    return result;
}

std::uint64_t reduce(std::int64_t a, std::uint64_t p) {
    const auto sp = static_cast<std::int64_t>(p);
    std::int64_t r = a % sp;
    if (r < 0) r += sp;
    return static_cast<std::uint64_t>(r);
}

int euler_criterion(std::uint64_t residue, std::uint64_t p) {
    if (residue == 0) return 0;
    const std::uint64_t e = pow_mod(residue, (p - 1) / 2, p);
    return e == 1 ? 1 : -1;
}

void require_odd_prime(std::uint64_t p) {
    if (p < 3 || !is_prime(p)) {
        throw ArgumentError("legendre symbol needs an odd prime, got " + std::to_string(p));
    }
}

}  // namespace

int legendre_symbol(std::int64_t a, std::uint64_t p) {
    require_odd_prime(p);
    return euler_criterion(reduce(a, p), p);
}

LegendreTable::LegendreTable(std::uint64_t p) : prime_(p) {
    require_odd_prime(p);
    symbols_.resize(p);
    for (std::uint64_t a = 0; a < p; ++a) {
        symbols_[a] = static_cast<std::int8_t>(euler_criterion(a, p));
    }
}

int LegendreTable::operator()(std::int64_t a) const { return symbols_[reduce(a, prime_)]; }

// ---------------------------------------------------------------------------
// HadamardMatrix

HadamardMatrix::HadamardMatrix(ConstructionRecipe recipe, std::vector<std::int8_t> entries)
    : recipe_(std::move(recipe)), order_(recipe_.order()), entries_(std::move(entries)) {}

bool HadamardMatrix::is_orthogonal() const {
    const std::size_t n = order_;
    const std::size_t words = (n + 63) / 64;
    std::vector<std::uint64_t> bits(n * words, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const int v = entries_[i * n + j];
            if (v != 1 && v != -1) return false;
            if (v == -1) bits[i * words + j / 64] |= std::uint64_t{1} << (j % 64);
        }
    }
    // <r_i, r_j> = n - 2 * (number of positions where signs differ)
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t* ri = &bits[i * words];
        for (std::size_t j = i + 1; j < n; ++j) {
            const std::uint64_t* rj = &bits[j * words];
            std::size_t differ = 0;
            for (std::size_t w = 0; w < words; ++w) differ += std::popcount(ri[w] ^ rj[w]);
            if (2 * differ != n) return false;
        }
    }
    return true;
}

std::vector<double> HadamardMatrix::dense(bool normalized) const {
    const double s = normalized ? 1.0 / std::sqrt(static_cast<double>(order_)) : 1.0;
    std::vector<double> out(entries_.size());
    std::transform(entries_.begin(), entries_.end(), out.begin(),
                   [s](std::int8_t v) { return s * v; });
    return out;
}

void HadamardMatrix::apply(std::span<const double> x, std::span<double> y, bool normalized) const {
    if (x.size() != order_ || y.size() != order_) {
        throw ShapeError("hadamard apply: vector length " + std::to_string(x.size()) +
                         " does not match order " + std::to_string(order_));
    }
    const double root = normalized ? std::sqrt(static_cast<double>(order_)) : 1.0;
    for (std::size_t i = 0; i < order_; ++i) {
        const std::int8_t* r = &entries_[i * order_];
        double acc = 0.0;
        for (std::size_t j = 0; j < order_; ++j) acc += r[j] * x[j];
        y[i] = acc / root;
    }
}

namespace {

void check_dense_order(std::size_t order) {
    if (order > max_dense_order) {
        throw SizeError("order " + std::to_string(order) + " exceeds the dense limit " +
                        std::to_string(max_dense_order));
    }
}

}  // namespace

HadamardMatrix sylvester(unsigned exponent) {
    auto recipe = ConstructionRecipe::sylvester(exponent);
    const std::size_t n = recipe.order();
    check_dense_order(n);
    std::vector<std::int8_t> h(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            h[i * n + j] = (std::popcount(i & j) % 2 == 0) ? 1 : -1;
        }
    }
    return HadamardMatrix(std::move(recipe), std::move(h));
}

HadamardMatrix paley(std::uint64_t prime) {
    auto recipe = ConstructionRecipe::paley(prime);
    const std::size_t n = recipe.order();
    check_dense_order(n);
    const LegendreTable chi(prime);

    std::vector<std::int8_t> h(n * n, 1);
    for (std::size_t i = 1; i < n; ++i) {
        h[i * n] = -1;
        h[i] = -1;
        for (std::size_t j = 1; j < n; ++j) {
            if (i == j) {
                h[i * n + j] = -1;
            } else {
                const auto diff = static_cast<std::int64_t>(i - 1) - static_cast<std::int64_t>(j - 1);
                h[i * n + j] = static_cast<std::int8_t>(chi(diff));
            }
        }
    }
    HadamardMatrix result(std::move(recipe), std::move(h));
    if (!result.is_orthogonal()) {
        throw ConstructionError("paley(" + std::to_string(prime) + ") failed the H*H^T check");
    }
    return result;
}

HadamardMatrix kronecker(const HadamardMatrix& a, const HadamardMatrix& b) {
    auto recipe = ConstructionRecipe::kronecker(a.recipe(), b.recipe());
    const std::size_t na = a.order();
    const std::size_t nb = b.order();
    const std::size_t n = recipe.order();
    check_dense_order(n);
    std::vector<std::int8_t> h(n * n);
    for (std::size_t i = 0; i < na; ++i) {
        for (std::size_t k = 0; k < nb; ++k) {
            std::int8_t* out = &h[(i * nb + k) * n];
            for (std::size_t j = 0; j < na; ++j) {
                const int aij = a(i, j);
                for (std::size_t l = 0; l < nb; ++l) {
                    out[j * nb + l] = static_cast<std::int8_t>(aij * b(k, l));
                }
            }
        }
    }
    return HadamardMatrix(std::move(recipe), std::move(h));
}

HadamardMatrix build(const ConstructionRecipe& recipe) {
    switch (recipe.kind()) {
        case ConstructionRecipe::Kind::sylvester:
            return sylvester(recipe.exponent());
        case ConstructionRecipe::Kind::paley:
            return paley(recipe.prime());
        case ConstructionRecipe::Kind::kronecker:
            return kronecker(build(recipe.left()), build(recipe.right()));
    }
    throw ArgumentError("unknown recipe kind");
}

// ---------------------------------------------------------------------------
// recipe search

namespace {

// 2^exponent * prod(primes[i] + 1); exponent < 0 means no Sylvester factor.
struct Decomposition {
    int exponent = -1;
    std::vector<std::uint64_t> primes;  // ascending

    std::size_t factors() const { return primes.size() + (exponent >= 0 ? 1 : 0); }
};

bool better(const Decomposition& a, const Decomposition& b) {
    if (a.factors() != b.factors()) return a.factors() < b.factors();
    if (a.exponent != b.exponent) return a.exponent > b.exponent;
    return a.primes < b.primes;
}

bool paley_order(std::size_t m) { return m >= 4 && m % 4 == 0 && is_prime(m - 1); }

class DecompositionSearch {
public:
    std::optional<Decomposition> best(std::size_t m) {
        if (auto it = memo_.find(m); it != memo_.end()) return it->second;
        std::optional<Decomposition> result;
        auto consider = [&](Decomposition d) {
            if (!result || better(d, *result)) result = std::move(d);
        };
        if (is_power_of_two(m)) {
            consider({std::countr_zero(m), {}});
        }
        if (paley_order(m)) {
            consider({-1, {m - 1}});
        }
        // Peel off one Paley factor d and decompose the cofactor.
        std::vector<std::size_t> divisors;
        for (std::size_t i = 1; i <= m / i; ++i) {
            if (m % i != 0) continue;
            divisors.push_back(i);
            if (i != m / i) divisors.push_back(m / i);
        }
        for (std::size_t d : divisors) {
            if (d >= m || !paley_order(d)) continue;
            auto rest = best(m / d);
            if (!rest) continue;
            Decomposition combined = *rest;
            combined.primes.push_back(d - 1);
            std::sort(combined.primes.begin(), combined.primes.end());
            consider(std::move(combined));
        }
        memo_.emplace(m, result);
        return result;
    }

private:
    std::map<std::size_t, std::optional<Decomposition>> memo_;
};

ConstructionRecipe to_recipe(const Decomposition& d) {
    std::vector<ConstructionRecipe> factors;
    for (auto p : d.primes) factors.push_back(ConstructionRecipe::paley(p));
    if (d.exponent >= 0) factors.push_back(ConstructionRecipe::sylvester(static_cast<unsigned>(d.exponent)));
    ConstructionRecipe r = factors.back();
    for (std::size_t i = factors.size() - 1; i-- > 0;) {
        r = ConstructionRecipe::kronecker(factors[i], std::move(r));
    }
    return r;
}

}  // namespace

std::optional<ConstructionRecipe> exact_recipe(std::size_t order) {
    if (order == 0) return std::nullopt;
    // Orders other than 1 and 2 must be multiples of 4.
    if (order > 2 && order % 4 != 0) return std::nullopt;
    DecompositionSearch search;
    auto d = search.best(order);
    if (!d) return std::nullopt;
    return to_recipe(*d);
}

ConstructionRecipe find_constructible_order(std::size_t n) {
    if (n == 0) throw ArgumentError("order must be positive");
    if (n > (std::size_t{1} << 62)) throw SizeError("order too large");
    const std::size_t limit = std::bit_ceil(n);
    DecompositionSearch search;
    for (std::size_t m = n; m <= limit; ++m) {
        if (m > 2 && m % 4 != 0) continue;
        if (auto d = search.best(m)) return to_recipe(*d);
    }
    return ConstructionRecipe::sylvester(static_cast<unsigned>(std::countr_zero(limit)));
}

std::optional<ConstructionRecipe> previous_constructible_order(std::size_t n) {
    DecompositionSearch search;
    for (std::size_t m = n; m >= 1; --m) {
        if (m > 2 && m % 4 != 0) continue;
        if (auto d = search.best(m)) return to_recipe(*d);
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// transforms

void fht(std::span<double> x, bool normalized) {
    const std::size_t n = x.size();
    if (!is_power_of_two(n)) {
        throw ShapeError("fht needs a power-of-two length, got " + std::to_string(n));
    }
    for (std::size_t h = 1; h < n; h *= 2) {
        for (std::size_t i = 0; i < n; i += 2 * h) {
            for (std::size_t j = i; j < i + h; ++j) {
                const double a = x[j];
                const double b = x[j + h];
                x[j] = a + b;
                x[j + h] = a - b;
            }
        }
    }
    if (normalized) {
        const double root = std::sqrt(static_cast<double>(n));
        for (double& v : x) v /= root;
    }
}

std::vector<double> fht(std::span<const double> x, bool normalized) {
    std::vector<double> y(x.begin(), x.end());
    fht(std::span<double>(y), normalized);
    return y;
}

std::vector<double> grouped_rotate(std::span<const double> x, const HadamardMatrix& block,
                                   bool normalized) {
    const std::size_t g = block.order();
    if (x.size() % g != 0) {
        throw ShapeError("grouped_rotate: length " + std::to_string(x.size()) +
                         " is not divisible by block order " + std::to_string(g));
    }
    const bool fast = block.recipe().kind() == ConstructionRecipe::Kind::sylvester;
    std::vector<double> y(x.size());
    for (std::size_t off = 0; off < x.size(); off += g) {
        auto in = x.subspan(off, g);
        auto out = std::span<double>(y).subspan(off, g);
        if (fast) {
            std::copy(in.begin(), in.end(), out.begin());
            fht(out, normalized);
        } else {
            block.apply(in, out, normalized);
        }
    }
    return y;
}

// ---------------------------------------------------------------------------
// HadamardOperator

namespace {

void flatten(const ConstructionRecipe& r, std::vector<const ConstructionRecipe*>& out) {
    if (r.kind() == ConstructionRecipe::Kind::kronecker) {
        flatten(r.left(), out);
        flatten(r.right(), out);
    } else {
        out.push_back(&r);
    }
}

}  // namespace

HadamardOperator::HadamardOperator(const ConstructionRecipe& recipe)
    : recipe_(recipe), order_(recipe.order()) {
    std::vector<const ConstructionRecipe*> leaves;
    flatten(recipe_, leaves);
    for (const auto* leaf : leaves) {
        if (leaf->kind() == ConstructionRecipe::Kind::sylvester) {
            factors_.push_back({leaf->order(), std::nullopt});
        } else {
            factors_.push_back({leaf->order(), paley(leaf->prime())});
        }
    }
}

void HadamardOperator::apply(std::span<double> x, bool normalized) const {
    if (x.size() != order_) {
        throw ShapeError("hadamard operator: vector length " + std::to_string(x.size()) +
                         " does not match order " + std::to_string(order_));
    }
    apply_unnormalized(x);
    if (normalized) {
        const double root = std::sqrt(static_cast<double>(order_));
        for (double& v : x) v /= root;
    }
}

void HadamardOperator::apply_unnormalized(std::span<double> x) const {
    // x is viewed as a row-major tensor with one axis per factor.
    std::size_t inner = order_;
    std::vector<double> in, out;
    for (const Factor& f : factors_) {
        const std::size_t outer = order_ / inner;
        inner /= f.order;
        if (f.order == 1) continue;
        in.resize(f.order);
        out.resize(f.order);
        if (inner == 1 && !f.dense) {
            for (std::size_t o = 0; o < outer; ++o) fht(x.subspan(o * f.order, f.order), false);
            continue;
        }
        for (std::size_t o = 0; o < outer; ++o) {
            const std::size_t base = o * f.order * inner;
            for (std::size_t s = 0; s < inner; ++s) {
                for (std::size_t t = 0; t < f.order; ++t) in[t] = x[base + t * inner + s];
                if (f.dense) {
                    f.dense->apply(in, out, false);
                } else {
                    std::copy(in.begin(), in.end(), out.begin());
                    fht(std::span<double>(out), false);
                }
                for (std::size_t t = 0; t < f.order; ++t) x[base + t * inner + s] = out[t];
            }
        }
    }
}

}  // namespace rotquant
