#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "doctest.h"
#include "rotquant/error.hpp"
#include "rotquant/hadamard.hpp"

using namespace rotquant;

namespace {

// Naive integer H * H^T, independent of the bit-packed check.
std::vector<long long> gram(const HadamardMatrix& h) {
    const std::size_t n = h.order();
    std::vector<long long> g(n * n, 0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            long long acc = 0;
            for (std::size_t k = 0; k < n; ++k) acc += h(i, k) * h(j, k);
            g[i * n + j] = acc;
        }
    return g;
}

bool gram_is_scaled_identity(const HadamardMatrix& h) {
    const std::size_t n = h.order();
    auto g = gram(h);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (g[i * n + j] != (i == j ? static_cast<long long>(n) : 0)) return false;
    return true;
}

int legendre_by_squares(long long a, long long p) {
    long long r = ((a % p) + p) % p;
    if (r == 0) return 0;
    for (long long x = 1; x < p; ++x)
        if ((x * x) % p == r) return 1;
    return -1;
}

bool trial_prime(std::size_t v) {
    if (v < 2) return false;
    for (std::size_t d = 2; d * d <= v; ++d)
        if (v % d == 0) return false;
    return true;
}

// Every order reachable as a product of base orders (2^k or p+1), up to limit.
std::set<std::size_t> reachable_orders(std::size_t limit) {
    std::set<std::size_t> base;
    for (std::size_t k = 1; k <= limit; k *= 2) base.insert(k);
    for (std::size_t p = 3; p + 1 <= limit; ++p)
        if (p % 4 == 3 && trial_prime(p)) base.insert(p + 1);
    std::set<std::size_t> reach = base;
    bool grew = true;
    while (grew) {
        grew = false;
        for (auto a : std::vector<std::size_t>(reach.begin(), reach.end()))
            for (auto b : base)
                if (a * b <= limit && reach.insert(a * b).second) grew = true;
    }
    return reach;
}

std::vector<double> dense_multiply(const HadamardMatrix& h, const std::vector<double>& x, bool normalized) {
    const std::size_t n = h.order();
    std::vector<double> y(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) y[i] += h(i, j) * x[j];
    if (normalized)
        for (double& v : y) v /= std::sqrt(static_cast<double>(n));
    return y;
}

}  // namespace

TEST_SUITE("hadamard") {
    TEST_CASE("sylvester small orders match the doubling recursion") {
        auto h0 = sylvester(0);
        CHECK(h0.order() == 1);
        CHECK(h0(0, 0) == 1);

        auto h1 = sylvester(1);
        CHECK(std::vector<int>{h1(0, 0), h1(0, 1), h1(1, 0), h1(1, 1)} == std::vector<int>{1, 1, 1, -1});

        const int h4[4][4] = {{1, 1, 1, 1}, {1, -1, 1, -1}, {1, 1, -1, -1}, {1, -1, -1, 1}};
        auto h2 = sylvester(2);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) CHECK(h2(i, j) == h4[i][j]);

        // H_{2n} = [[H, H], [H, -H]]
        auto a = sylvester(4), b = sylvester(5);
        for (std::size_t i = 0; i < 16; ++i)
            for (std::size_t j = 0; j < 16; ++j) {
                CHECK(b(i, j) == a(i, j));
                CHECK(b(i, j + 16) == a(i, j));
                CHECK(b(i + 16, j) == a(i, j));
                CHECK(b(i + 16, j + 16) == -a(i, j));
            }
    }

    TEST_CASE("sylvester size guard") {
        CHECK_THROWS_AS(sylvester(40), SizeError);
        CHECK_THROWS_AS(ConstructionRecipe::sylvester(70), SizeError);
    }

    TEST_CASE("legendre symbol") {
        CHECK(legendre_symbol(0, 7) == 0);
        CHECK(legendre_symbol(2, 7) == 1);
        CHECK(legendre_symbol(3, 7) == -1);
        CHECK(legendre_symbol(-1, 7) == -1);
        CHECK(legendre_symbol(14, 7) == 0);
        for (long long p : {3, 5, 7, 11, 13, 19, 23, 101})
            for (long long a = -30; a < 60; ++a) CHECK(legendre_symbol(a, p) == legendre_by_squares(a, p));

        CHECK_THROWS_AS(legendre_symbol(1, 2), ArgumentError);
        CHECK_THROWS_AS(legendre_symbol(1, 9), ArgumentError);
        CHECK_THROWS_AS(legendre_symbol(1, 1), ArgumentError);

        LegendreTable t(23);
        for (long long a = -50; a < 50; ++a) CHECK(t(a) == legendre_by_squares(a, 23));
    }

    TEST_CASE("paley follows the printed construction and is orthogonal") {
        auto h3 = paley(3);
        CHECK(h3.order() == 4);
        CHECK(gram_is_scaled_identity(h3));

        auto h11 = paley(11);
        CHECK(h11.order() == 12);
        CHECK(gram_is_scaled_identity(h11));

        for (std::uint64_t p : {3u, 7u, 11u, 19u, 23u, 31u, 43u}) {
            auto h = paley(p);
            const std::size_t n = h.order();
            CHECK(h(0, 0) == 1);
            for (std::size_t i = 1; i < n; ++i) {
                CHECK(h(i, 0) == -1);
                CHECK(h(0, i) == -1);
                CHECK(h(i, i) == -1);
                for (std::size_t j = 1; j < n; ++j)
                    if (i != j)
                        CHECK(h(i, j) == legendre_by_squares(static_cast<long long>(i) - static_cast<long long>(j),
                                                             static_cast<long long>(p)));
            }
            CHECK(gram_is_scaled_identity(h));
        }
    }

    TEST_CASE("paley rejects primes that are 1 mod 4 and composites") {
        CHECK_THROWS_AS(paley(13), UnsupportedOrderError);
        CHECK_THROWS_AS(paley(5), UnsupportedOrderError);
        CHECK_THROWS_AS(paley(15), UnsupportedOrderError);
    }

    TEST_CASE("kronecker composition") {
        auto h2 = sylvester(1);
        auto k = kronecker(h2, h2);
        auto h4 = sylvester(2);
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 4; ++j) CHECK(k(i, j) == h4(i, j));

        auto x = paley(11);
        auto id = kronecker(sylvester(0), x);
        CHECK(id.order() == 12);
        for (std::size_t i = 0; i < 12; ++i)
            for (std::size_t j = 0; j < 12; ++j) CHECK(id(i, j) == x(i, j));

        auto h24 = kronecker(h2, paley(11));
        CHECK(h24.order() == 24);
        CHECK(gram_is_scaled_identity(h24));
        CHECK(h24.recipe().to_string() == "kron(sylvester(1),paley(11))");
    }

    TEST_CASE("bit-packed orthogonality check agrees with the integer gram") {
        for (const char* r : {"sylvester(6)", "paley(59)", "kron(paley(7),paley(3))", "kron(paley(19),sylvester(2))"}) {
            auto h = build(ConstructionRecipe::parse(r));
            CHECK(h.is_orthogonal());
            CHECK(gram_is_scaled_identity(h));
        }
    }

    TEST_CASE("recipe text round trip and parse errors") {
        auto r = ConstructionRecipe::parse(" kron( paley(11) , sylvester(7) ) ");
        CHECK(r.order() == 1536);
        CHECK(r.factor_count() == 2);
        CHECK(ConstructionRecipe::parse(r.to_string()) == r);
        CHECK_THROWS_AS(ConstructionRecipe::parse("paley(11"), ArgumentError);
        CHECK_THROWS_AS(ConstructionRecipe::parse("householder(3)"), ArgumentError);
        CHECK_THROWS_AS(ConstructionRecipe::parse("paley(13)"), UnsupportedOrderError);
    }

    TEST_CASE("find_constructible_order matches recipe enumeration") {
        CHECK(find_constructible_order(4096) == ConstructionRecipe::sylvester(12));
        auto r5 = find_constructible_order(5);
        CHECK(r5 == ConstructionRecipe::sylvester(3));
        CHECK(find_constructible_order(1) == ConstructionRecipe::sylvester(0));
        CHECK(find_constructible_order(3) == ConstructionRecipe::sylvester(2));  // paley(3) also has order 4
        CHECK(find_constructible_order(12) == ConstructionRecipe::paley(11));
        CHECK(find_constructible_order(6).order() == 8);

        auto r1536 = find_constructible_order(1536);
        CHECK(r1536.order() == 1536);
        CHECK(r1536.factor_count() == 2);
        CHECK(r1536.to_string() == "kron(paley(11),sylvester(7))");

        CHECK(find_constructible_order(36).order() == 40);
        CHECK(find_constructible_order(1541).order() == 1544);

        auto reach = reachable_orders(2 * 3000);
        for (std::size_t n = 1; n <= 3000; n += (n < 200 ? 1 : 37)) {
            const std::size_t expected = *reach.lower_bound(n);
            CAPTURE(n);
            CHECK(find_constructible_order(n).order() == expected);
        }
        CHECK_THROWS_AS(find_constructible_order(0), ArgumentError);
    }

    TEST_CASE("exact and previous recipes") {
        CHECK_FALSE(exact_recipe(6).has_value());
        CHECK_FALSE(exact_recipe(36).has_value());
        CHECK(exact_recipe(24).value() == ConstructionRecipe::paley(23));
        CHECK(exact_recipe(2).value() == ConstructionRecipe::sylvester(1));
        CHECK(previous_constructible_order(6)->order() == 4);
        CHECK(previous_constructible_order(1)->order() == 1);
    }

    TEST_CASE("fht") {
        std::vector<double> e{1.0, 0.0};
        CHECK(fht(std::span<const double>(e)) == std::vector<double>{1.0, 1.0});

        const double c = 200.0;
        std::vector<double> spike(64, 0.0);
        spike[0] = c;
        for (double v : fht(std::span<const double>(spike), true)) CHECK(std::abs(v) == doctest::Approx(c / 8.0));

        std::mt19937_64 rng(7);
        std::normal_distribution<double> nd;
        std::vector<double> x(8);
        for (double& v : x) v = nd(rng);
        auto fast = fht(std::span<const double>(x));
        auto slow = dense_multiply(sylvester(3), x, false);
        for (std::size_t i = 0; i < 8; ++i) CHECK(std::abs(fast[i] - slow[i]) < 1e-12);

        std::vector<double> bad(6, 1.0);
        CHECK_THROWS_AS(fht(std::span<const double>(bad)), ShapeError);
    }

    TEST_CASE("fht property: dense equivalence and length preservation") {
        std::mt19937_64 rng(11);
        std::normal_distribution<double> nd;
        for (unsigned k = 0; k <= 10; ++k) {
            auto h = sylvester(k);
            for (int rep = 0; rep < 3; ++rep) {
                std::vector<double> x(h.order());
                for (double& v : x) v = nd(rng);
                auto fast = fht(std::span<const double>(x), true);
                auto slow = dense_multiply(h, x, true);
                double num = 0, den = 0, nx = 0, ny = 0;
                for (std::size_t i = 0; i < x.size(); ++i) {
                    num += (fast[i] - slow[i]) * (fast[i] - slow[i]);
                    den += slow[i] * slow[i];
                    nx += x[i] * x[i];
                    ny += fast[i] * fast[i];
                }
                CHECK(std::sqrt(num / den) < 1e-10);
                CHECK(std::abs(std::sqrt(ny) - std::sqrt(nx)) < 1e-10 * std::sqrt(nx));
            }
        }
    }

    TEST_CASE("grouped rotation") {
        std::mt19937_64 rng(3);
        std::normal_distribution<double> nd;
        std::vector<double> x(8);
        for (double& v : x) v = nd(rng);
        auto h4 = sylvester(2);
        auto y = grouped_rotate(x, h4, false);
        for (int blk = 0; blk < 2; ++blk) {
            std::vector<double> part(x.begin() + 4 * blk, x.begin() + 4 * blk + 4);
            auto ref = dense_multiply(h4, part, false);
            for (int i = 0; i < 4; ++i) CHECK(y[4 * blk + i] == doctest::Approx(ref[i]).epsilon(1e-14));
        }

        auto whole = grouped_rotate(x, sylvester(3), true);
        auto single = fht(std::span<const double>(x), true);
        for (int i = 0; i < 8; ++i) CHECK(whole[i] == doctest::Approx(single[i]).epsilon(1e-14));

        std::vector<double> e1(12, 0.0);
        e1[0] = 1.0;
        auto z = grouped_rotate(e1, h4, true);
        for (int i = 0; i < 4; ++i) CHECK(std::abs(z[i]) == 0.5);
        for (int i = 4; i < 12; ++i) CHECK(z[i] == 0.0);

        // Non power-of-two blocks take the dense path.
        auto p12 = paley(11);
        std::vector<double> w(24);
        for (double& v : w) v = nd(rng);
        auto gw = grouped_rotate(w, p12, false);
        std::vector<double> second(w.begin() + 12, w.end());
        auto ref = dense_multiply(p12, second, false);
        for (int i = 0; i < 12; ++i) CHECK(gw[12 + i] == doctest::Approx(ref[i]).epsilon(1e-13));

        std::vector<double> bad(10, 0.0);
        CHECK_THROWS_AS(grouped_rotate(bad, h4, false), ShapeError);
    }

    TEST_CASE("structured operator equals the dense matrix") {
        std::mt19937_64 rng(5);
        std::normal_distribution<double> nd;
        for (const char* r : {"sylvester(5)", "paley(11)", "kron(paley(11),sylvester(3))",
                              "kron(sylvester(2),paley(7))", "kron(paley(3),kron(paley(7),sylvester(1)))"}) {
            auto recipe = ConstructionRecipe::parse(r);
            auto dense = build(recipe);
            HadamardOperator op(recipe);
            std::vector<double> x(recipe.order());
            for (double& v : x) v = nd(rng);
            auto ref = dense_multiply(dense, x, true);
            auto y = x;
            op.apply(y, true);
            CAPTURE(r);
            for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(y[i] - ref[i]) < 1e-12);
        }
    }

    TEST_CASE("normalized hadamard attains the 1/sqrt(n) max-entry bound") {
        for (const char* r : {"sylvester(4)", "paley(19)", "kron(sylvester(1),paley(11))"}) {
            auto h = build(ConstructionRecipe::parse(r));
            auto d = h.dense(true);
            const double expected = 1.0 / std::sqrt(static_cast<double>(h.order()));
            for (double v : d) CHECK(std::abs(v) == expected);
        }
    }
}
