#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "json.hpp"
#include "rotquant/hadamard.hpp"
#include "rotquant/model.hpp"

namespace rotquant {

// Cost of an (m x n) by (n x p) product at b bits: m * n^2 * p * b^2.
// SizeError when the result does not fit 64 bits.
std::uint64_t bitops(std::uint64_t m, std::uint64_t n, std::uint64_t p, std::uint64_t b);

// Largest d with (n + d) * b' <= n * b, i.e. floor(n (b - b') / b').
std::size_t expansion_limit(std::size_t n, int b, int b_after);

enum class ExpansionStrategy { smallest, budget_max };
std::string to_string(ExpansionStrategy s);
ExpansionStrategy parse_expansion_strategy(const std::string& text);

// Costs are for a square multiply (m = p = n) in which only the shared
// dimension grows to n + d.
struct ExpansionPlan {
    std::size_t n = 0;
    std::size_t d = 0;
    ConstructionRecipe recipe = ConstructionRecipe::sylvester(0);
    int bits_before = 0;
    int bits_after = 0;
    std::size_t limit = 0;
    std::uint64_t bitops_before = 0;
    std::uint64_t bitops_after = 0;
    bool within_budget = false;
    ExpansionStrategy strategy = ExpansionStrategy::smallest;

    std::size_t target() const { return n + d; }
    nlohmann::json to_json() const;
};

// smallest: least d >= 0 with n + d constructible. budget_max: largest
// constructible n + d with d <= limit, or the smallest one when none fits.
ExpansionPlan plan_expansion(std::size_t n, int b, int b_after,
                             ExpansionStrategy strategy = ExpansionStrategy::smallest);

enum class Side { input, output };

// input: W is n x p, returns H * [W; 0]; output: W is p x n, returns
// [W 0] * H^T. Scaled by 1/sqrt(order) when normalized.
Eigen::MatrixXd expand_and_fuse(const Eigen::MatrixXd& w, const HadamardMatrix& h, Side side, bool normalized = true);

// Zero-pads the residual stream of an unrotated model to target_dim.
ProjectionGraph expand_model(const ProjectionGraph& model, std::size_t target_dim);

}  // namespace rotquant
