#include <limits>
#include <random>

#include "doctest.h"
#include "rotquant/error.hpp"
#include "rotquant/expansion.hpp"

using namespace rotquant;

namespace {

Eigen::MatrixXd dense(const HadamardMatrix& h) {
    const auto n = static_cast<Eigen::Index>(h.order());
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) m(i, j) = h(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    return m;
}

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
    return m;
}

}  // namespace

TEST_SUITE("expansion") {
    TEST_CASE("bitops") {
        CHECK(bitops(1, 1, 1, 1) == 1);
        CHECK(bitops(2, 3, 5, 4) == 2ULL * 9 * 5 * 16);
        CHECK(bitops(4096, 4096, 4096, 4) == (1ULL << 48) * 16);
        CHECK_THROWS_AS(bitops(1ULL << 20, 1ULL << 20, 1ULL << 20, 16), SizeError);
        CHECK_THROWS_AS(bitops(std::numeric_limits<std::uint64_t>::max(), 2, 1, 1), SizeError);
        CHECK(bitops(std::numeric_limits<std::uint64_t>::max(), 1, 1, 1) == std::numeric_limits<std::uint64_t>::max());
    }

    TEST_CASE("expansion limit") {
        CHECK(expansion_limit(4096, 4, 3) == 1365);
        CHECK(expansion_limit(4096, 4, 4) == 0);
        CHECK(expansion_limit(4096, 16, 4) == 12288);
        CHECK_THROWS_AS(expansion_limit(4096, 3, 4), ArgumentError);
        CHECK_THROWS_AS(expansion_limit(4096, 0, 0), ArgumentError);
    }

    TEST_CASE("property: limit is the largest width that keeps bitops within budget") {
        std::mt19937_64 rng(3);
        for (int trial = 0; trial < 500; ++trial) {
            const std::size_t n = 1 + rng() % 5000;
            const int b = 2 + static_cast<int>(rng() % 15);
            const int b2 = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(b));
            const std::size_t d = expansion_limit(n, b, b2);
            CHECK((n + d) * b2 <= n * b);
            CHECK((n + d + 1) * b2 > n * b);
            CHECK(bitops(n, n + d, n, b2) <= bitops(n, n, n, b));
            CHECK(bitops(n, n + d + 1, n, b2) > bitops(n, n, n, b));
        }
    }

    TEST_CASE("inner dimension growth against the budget") {
        const std::uint64_t budget = bitops(4096, 4096, 4096, 4);
        CHECK(bitops(4096, 5461, 4096, 3) <= budget);
        CHECK(bitops(4096, 5462, 4096, 3) > budget);
        CHECK(4096 + expansion_limit(4096, 4, 3) == 5461);
    }

    TEST_CASE("worked example on the input side") {
        Eigen::MatrixXd w(2, 2);
        w << 1, 2, 3, 4;
        auto out = expand_and_fuse(w, sylvester(2), Side::input, false);
        Eigen::MatrixXd expected(4, 2);
        expected << 4, 6, -2, -2, 4, 6, -2, -2;
        CHECK(out == expected);
        CHECK(expand_and_fuse(w, sylvester(2), Side::input, true) == expected / 2.0);
    }

    TEST_CASE("output side is the transposed input side") {
        auto w = random_matrix(5, 6, 1);
        auto h = paley(7);
        Eigen::MatrixXd in = expand_and_fuse(Eigen::MatrixXd(w.transpose()), h, Side::input, true);
        Eigen::MatrixXd out = expand_and_fuse(w, h, Side::output, true);
        CHECK((out - in.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    }

    TEST_CASE("no expansion is a plain rotation") {
        auto w = random_matrix(8, 3, 2);
        auto h = sylvester(3);
        CHECK((expand_and_fuse(w, h, Side::input, true) - dense(h) * w / std::sqrt(8.0)).cwiseAbs().maxCoeff() < 1e-12);
        CHECK_THROWS_AS(expand_and_fuse(random_matrix(9, 3, 0), h, Side::input), ShapeError);
        CHECK_THROWS_AS(expand_and_fuse(random_matrix(3, 9, 0), h, Side::output), ShapeError);
    }

    TEST_CASE("expanded products reproduce the original function") {
        const auto h = paley(11);  // n = 9 padded to 12
        const Eigen::MatrixXd H = dense(h) / std::sqrt(12.0);
        auto x = random_matrix(4, 9, 3);
        auto w_in = random_matrix(9, 5, 4);
        Eigen::MatrixXd xpad = Eigen::MatrixXd::Zero(4, 12);
        xpad.leftCols(9) = x;
        Eigen::MatrixXd xr = xpad * H.transpose();
        CHECK((xr * expand_and_fuse(w_in, h, Side::input) - x * w_in).cwiseAbs().maxCoeff() < 1e-10);

        auto w_out = random_matrix(5, 9, 5);
        auto z = random_matrix(4, 5, 6);
        Eigen::MatrixXd back = z * expand_and_fuse(w_out, h, Side::output) * H;
        CHECK((back.leftCols(9) - z * w_out).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(back.rightCols(3).cwiseAbs().maxCoeff() < 1e-10);
    }

    TEST_CASE("smallest plans") {
        for (std::size_t n : {1536u, 4096u, 3584u}) {
            auto p = plan_expansion(n, 4, 3);
            CHECK(p.d == 0);
            CHECK(p.recipe.order() == n);
        }
        auto p = plan_expansion(1541, 4, 3);
        CHECK(p.d == 3);
        CHECK(p.target() == 1544);
        CHECK(build(p.recipe).order() == 1544);
        CHECK(p.within_budget);
        CHECK(p.limit == 513);
        CHECK(p.bitops_before == bitops(1541, 1541, 1541, 4));
        CHECK(p.bitops_after == bitops(1541, 1544, 1541, 3));
        CHECK(plan_expansion(36, 4, 3).target() == 40);

        auto j = p.to_json();
        CHECK(j["d"] == 3);
        CHECK(j["target"] == 1544);
        CHECK(j["recipe"] == p.recipe.to_string());
    }

    TEST_CASE("property: zero padding exactly when the order is constructible") {
        for (std::size_t n = 1; n <= 400; ++n) {
            const auto p = plan_expansion(n, 4, 4);
            CHECK((p.d == 0) == exact_recipe(n).has_value());
            CHECK(exact_recipe(p.target()).has_value());
            for (std::size_t m = n; m < p.target(); ++m) CHECK(!exact_recipe(m).has_value());
        }
    }

    TEST_CASE("budget_max plans") {
        auto p = plan_expansion(1541, 4, 3, ExpansionStrategy::budget_max);
        CHECK(p.d <= p.limit);
        CHECK(p.target() > 1544);
        CHECK(exact_recipe(p.target()).has_value());
        for (std::size_t m = p.target() + 1; m <= 1541 + p.limit; ++m) CHECK(!exact_recipe(m).has_value());

        auto tight = plan_expansion(1541, 4, 4, ExpansionStrategy::budget_max);
        CHECK(tight.target() == 1544);
        CHECK(!tight.within_budget);
        CHECK(parse_expansion_strategy("budget_max") == ExpansionStrategy::budget_max);
        CHECK_THROWS_AS(parse_expansion_strategy("largest"), ArgumentError);
    }

    TEST_CASE("padded model keeps its function and accepts a rotation") {
        ModelConfig c;
        c.dim = 36;
        c.heads = 3;
        c.ffn_dim = 72;
        c.vocab = 64;
        c.seed = 5;
        c.spike_fraction = 0.05;
        c.spike_factor = 10.0;
        auto m = build_toy_model(c);
        CHECK_THROWS_AS(fuse_rotations(m), UnsupportedOrderError);

        auto plan = plan_expansion(36, 4, 4);
        auto big = expand_model(m, plan.target());
        CHECK(big.model_dim == 40);
        auto data = model_corpus(m, 16, 6, 1);
        const double base = evaluate_perplexity(m, data, {}, -1, 4).ppl;
        CHECK(std::abs(evaluate_perplexity(big, data, {}, -1, 4).ppl - base) / base < 1e-12);

        auto fused = fuse_rotations(big, plan.recipe);
        CHECK(std::abs(evaluate_perplexity(fused, data, {}, -1, 4).ppl - base) / base < 1e-4);
        std::vector<std::uint32_t> tokens{1, 5, 9, 33};
        CHECK((forward_logits(fused, tokens) - forward_logits(m, tokens)).cwiseAbs().maxCoeff() < 1e-8);

        CHECK_THROWS_AS(expand_model(m, 30), ShapeError);
        CHECK_THROWS_AS(expand_model(fused, 48), ArgumentError);
        CHECK(expand_model(m, 36).hash() == m.hash());
    }
}
