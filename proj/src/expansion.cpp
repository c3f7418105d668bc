#include "rotquant/expansion.hpp"

#include <limits>

#include "rotquant/error.hpp"

namespace rotquant {

std::uint64_t bitops(std::uint64_t m, std::uint64_t n, std::uint64_t p, std::uint64_t b) {
    if (m == 0 || n == 0 || p == 0 || b == 0) throw ArgumentError("bitops operands must be positive");
    unsigned __int128 acc = 1;
    for (std::uint64_t f : {m, n, n, p, b, b}) {
        acc *= f;
        if (acc > std::numeric_limits<std::uint64_t>::max()) throw SizeError("bitops overflows 64 bits");
    }
    return static_cast<std::uint64_t>(acc);
}

std::size_t expansion_limit(std::size_t n, int b, int b_after) {
    if (b < 1 || b_after < 1) throw ArgumentError("bit widths must be at least 1");
    if (b_after > b) {
        throw ArgumentError("bits after expansion (" + std::to_string(b_after) + ") exceed bits before (" +
                            std::to_string(b) + ")");
    }
    return n * static_cast<std::size_t>(b - b_after) / static_cast<std::size_t>(b_after);
}

std::string to_string(ExpansionStrategy s) { return s == ExpansionStrategy::smallest ? "smallest" : "budget_max"; }

ExpansionStrategy parse_expansion_strategy(const std::string& text) {
    if (text == "smallest") return ExpansionStrategy::smallest;
    if (text == "budget_max") return ExpansionStrategy::budget_max;
    throw ArgumentError("unknown expansion strategy '" + text + "'");
}

nlohmann::json ExpansionPlan::to_json() const {
    return {{"n", n},
            {"d", d},
            {"target", target()},
            {"recipe", recipe.to_string()},
            {"bits_before", bits_before},
            {"bits_after", bits_after},
            {"limit", limit},
            {"bitops_before", bitops_before},
            {"bitops_after", bitops_after},
            {"within_budget", within_budget},
            {"strategy", to_string(strategy)}};
}

ExpansionPlan plan_expansion(std::size_t n, int b, int b_after, ExpansionStrategy strategy) {
    if (n == 0) throw ArgumentError("dimension must be positive");
    ExpansionPlan plan;
    plan.n = n;
    plan.bits_before = b;
    plan.bits_after = b_after;
    plan.strategy = strategy;
    plan.limit = expansion_limit(n, b, b_after);

    std::optional<ConstructionRecipe> chosen;
    if (strategy == ExpansionStrategy::budget_max) {
        auto best = previous_constructible_order(n + plan.limit);
        if (best && best->order() >= n) chosen = best;
    }
    if (!chosen) chosen = find_constructible_order(n);
    plan.recipe = *chosen;
    plan.d = chosen->order() - n;
    plan.bitops_before = bitops(n, n, n, static_cast<std::uint64_t>(b));
    plan.bitops_after = bitops(n, n + plan.d, n, static_cast<std::uint64_t>(b_after));
    plan.within_budget = plan.d <= plan.limit;
    return plan;
}

Eigen::MatrixXd expand_and_fuse(const Eigen::MatrixXd& w, const HadamardMatrix& h, Side side, bool normalized) {
    const auto order = static_cast<Eigen::Index>(h.order());
    const Eigen::Index n = side == Side::input ? w.rows() : w.cols();
    if (n > order) {
        throw ShapeError("weight dimension " + std::to_string(n) + " exceeds Hadamard order " +
                         std::to_string(order));
    }
    const auto dense = h.dense(normalized);
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> hm(dense.data(),
                                                                                                     order, order);
    // Only the first n columns of H (or rows of H^T) meet non-zero padding.
    if (side == Side::input) return hm.leftCols(n) * w;
    return w * hm.leftCols(n).transpose();
}

ProjectionGraph expand_model(const ProjectionGraph& model, std::size_t target_dim) {
    if (model.rotation != RotationState::none) throw ArgumentError("expand the model before fusing rotations");
    if (target_dim < model.model_dim) {
        throw ShapeError("target dim " + std::to_string(target_dim) + " is smaller than model dim " +
                         std::to_string(model.model_dim));
    }
    const auto n = static_cast<Eigen::Index>(model.model_dim);
    const auto big = static_cast<Eigen::Index>(target_dim);
    ProjectionGraph out = model;
    out.model_dim = target_dim;
    out.embedding = Eigen::MatrixXd::Zero(model.embedding.rows(), big);
    out.embedding.leftCols(n) = model.embedding;
    for (auto& p : out.projections) {
        if (reads_residual(p.kind)) {
            Eigen::MatrixXd w = Eigen::MatrixXd::Zero(big, p.weight.cols());
            w.topRows(n) = p.weight;
            p.weight = std::move(w);
        } else {
            Eigen::MatrixXd w = Eigen::MatrixXd::Zero(p.weight.rows(), big);
            w.leftCols(n) = p.weight;
            p.weight = std::move(w);
        }
    }
    return out;
}

}  // namespace rotquant
