#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "rotquant/dataset.hpp"
#include "rotquant/hadamard.hpp"
#include "rotquant/quantizer.hpp"

namespace rotquant {

struct ModelConfig {
    std::size_t dim = 64;
    std::size_t layers = 2;
    std::size_t heads = 4;
    std::size_t ffn_dim = 128;
    std::size_t vocab = 256;
    std::uint64_t seed = 0;
    double spike_fraction = 0.0;  // share of residual channels that carry outliers
    double spike_factor = 1.0;
    double logit_scale = 3.0;  // std of the head logits for a unit-RMS input

    std::size_t head_dim() const { return dim / heads; }
    std::size_t spike_count() const;
    void validate() const;  // ConfigError

    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
};

// q, k, v, gate, up and head read the residual stream; o and down write to it.
enum class ProjKind { q, k, v, o, gate, up, down, head };
std::string to_string(ProjKind k);
bool reads_residual(ProjKind k);

// Row-vector convention: y = x W, with W of shape in x out.
struct Projection {
    std::string name;
    ProjKind kind = ProjKind::q;
    std::size_t layer = 0;
    Eigen::MatrixXd weight;
    std::optional<QuantizerSpec> weight_quant;  // per output channel
    std::optional<QuantizerSpec> act_quant;     // per token on the input

    std::size_t in_dim() const { return static_cast<std::size_t>(weight.rows()); }
    std::size_t out_dim() const { return static_cast<std::size_t>(weight.cols()); }
};

enum class RotationState { none, fused };

// Pre-norm decoder: per layer, attention (q, k, v, o) then a SiLU-gated MLP
// (gate, up, down); a final norm and the head. Norms carry no gain. The
// residual stream may be wider than config.dim after zero-padding; norms
// always divide by config.dim so padding does not change the function.
struct ProjectionGraph {
    ModelConfig config;
    std::size_t model_dim = 0;
    Eigen::MatrixXd embedding;  // vocab x model_dim
    std::vector<Projection> projections;
    std::vector<std::size_t> spike_channels;

    RotationState rotation = RotationState::none;
    std::optional<ConstructionRecipe> residual_recipe;  // offline, residual stream
    std::optional<ConstructionRecipe> head_recipe;      // offline on v/o, online on q/k
    std::optional<ConstructionRecipe> ffn_recipe;       // online before down

    std::size_t size() const { return projections.size(); }
    std::size_t index_of(const std::string& name) const;
    std::uint64_t hash() const;
};

ProjectionGraph build_toy_model(const ModelConfig& config);

// Folds orthogonal Hadamard rotations into the weights. The residual rotation
// uses `residual`, whose order must equal model_dim; per-head and MLP
// rotations use exact recipes for head_dim and ffn_dim.
ProjectionGraph fuse_rotations(const ProjectionGraph& model, const ConstructionRecipe& residual);
// Same, with the recipe looked up for model_dim.
ProjectionGraph fuse_rotations(const ProjectionGraph& model);

// Marks projection i for weight (clip 1) and activation quantization with spec.
void quantize_proj(ProjectionGraph& model, std::size_t i, const QuantizerSpec& act_spec);
void clear_quantization(ProjectionGraph& model);

struct PerplexityScore {
    double ppl = 0.0;
    double mean_ce = 0.0;  // nats per predicted token
    std::size_t tokens = 0;
};

struct EvalOptions {
    bool kv_cache = true;  // quantize k/v activations when their projection is quantized
    std::size_t kv_group = 128;  // truncated to head_dim
    unsigned threads = 1;
};

// Uses the quantizer slots stored on the projections.
PerplexityScore evaluate_marked(const ProjectionGraph& model, const EvalDataset& data, const EvalOptions& opts = {});

// Activation clip per projection; nullopt leaves the projection full precision.
PerplexityScore evaluate_clips(const ProjectionGraph& model, const EvalDataset& data,
                               std::span<const std::optional<double>> clips, int bits,
                               const EvalOptions& opts = {});

// Projections 0..quantized_upto run quantized at `bits` with clip_ratios[i];
// -1 evaluates the full-precision model.
PerplexityScore evaluate_perplexity(const ProjectionGraph& model, const EvalDataset& data,
                                    std::span<const double> clip_ratios, long quantized_upto, int bits,
                                    const EvalOptions& opts = {});

// logits: T x V; targets: T next-token ids.
PerplexityScore perplexity_from_logits(const Eigen::MatrixXd& logits, std::span<const std::uint32_t> targets);

// Full-precision logits for one sequence (T x vocab).
Eigen::MatrixXd forward_logits(const ProjectionGraph& model, std::span<const std::uint32_t> tokens);

// Max |a| / median |a| over the inputs of the first q projection.
double activation_outlier_ratio(const ProjectionGraph& model, std::span<const std::uint32_t> tokens);

// Sequences sampled token by token from the full-precision model, so the
// model is the true source of its own evaluation data. The first token is
// uniform.
EvalDataset model_corpus(const ProjectionGraph& model, std::size_t seq_len, std::size_t sequences,
                         std::uint64_t seed, double temperature = 1.0);

}  // namespace rotquant
