#include "rotquant/model.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <exception>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include "rotquant/error.hpp"
#include "rotquant/io.hpp"

namespace rotquant {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr double norm_eps = 1e-6;

}  // namespace

std::size_t ModelConfig::spike_count() const {
    if (spike_fraction <= 0.0) return 0;
    const auto k = static_cast<std::size_t>(std::llround(spike_fraction * static_cast<double>(dim)));
    return std::clamp<std::size_t>(k, 1, dim);
}

void ModelConfig::validate() const {
    if (dim == 0 || layers == 0 || heads == 0 || ffn_dim == 0) throw ConfigError("model dims must be positive");
    if (vocab < 2) throw ConfigError("vocabulary must have at least two tokens");
    if (dim % heads != 0) {
        throw ConfigError("dim " + std::to_string(dim) + " is not divisible by heads " + std::to_string(heads));
    }
    if (!(spike_fraction >= 0.0 && spike_fraction <= 1.0)) throw ConfigError("spike_fraction must be in [0, 1]");
    if (!(spike_factor > 0.0) || !std::isfinite(spike_factor)) throw ConfigError("spike_factor must be positive");
    if (!(logit_scale > 0.0) || !std::isfinite(logit_scale)) throw ConfigError("logit_scale must be positive");
}

nlohmann::json ModelConfig::to_json() const {
    return {{"dim", dim},
            {"layers", layers},
            {"heads", heads},
            {"ffn_dim", ffn_dim},
            {"vocab", vocab},
            {"seed", seed},
            {"spike_fraction", spike_fraction},
            {"spike_factor", spike_factor},
            {"logit_scale", logit_scale}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("model config must be a JSON object");
    static const std::vector<std::string> known{"dim",  "layers",         "heads",        "ffn_dim",    "vocab",
                                                "seed", "spike_fraction", "spike_factor", "logit_scale"};
    for (const auto& [key, _] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ConfigError("unknown model config key '" + key + "'");
        }
    }
    ModelConfig c;
    try {
        auto size_field = [&j](const char* key, std::size_t& out) {
            if (!j.contains(key)) return;
            const auto& v = j.at(key);
            if (!v.is_number_integer() || v.get<long long>() < 0) {
                throw ConfigError(std::string("model config '") + key + "' must be a non-negative integer");
            }
            out = v.get<std::size_t>();
        };
        size_field("dim", c.dim);
        size_field("layers", c.layers);
        size_field("heads", c.heads);
        size_field("ffn_dim", c.ffn_dim);
        size_field("vocab", c.vocab);
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("spike_fraction")) c.spike_fraction = j.at("spike_fraction").get<double>();
        if (j.contains("spike_factor")) c.spike_factor = j.at("spike_factor").get<double>();
        if (j.contains("logit_scale")) c.logit_scale = j.at("logit_scale").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad model config: ") + e.what());
    }
    c.validate();
    return c;
}

std::string to_string(ProjKind k) {
    switch (k) {
        case ProjKind::q: return "q";
        case ProjKind::k: return "k";
        case ProjKind::v: return "v";
        case ProjKind::o: return "o";
        case ProjKind::gate: return "gate";
        case ProjKind::up: return "up";
        case ProjKind::down: return "down";
        case ProjKind::head: return "head";
    }
    return "?";
}

bool reads_residual(ProjKind k) { return k != ProjKind::o && k != ProjKind::down; }

std::size_t ProjectionGraph::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < projections.size(); ++i)
        if (projections[i].name == name) return i;
    throw ArgumentError("no projection named '" + name + "'");
}

std::uint64_t ProjectionGraph::hash() const {
    Fnv1a h;
    h.update(config.to_json().dump());
    h.update_value(static_cast<std::uint64_t>(model_dim));
    h.update_value(static_cast<int>(rotation));
    for (const auto* r : {&residual_recipe, &head_recipe, &ffn_recipe}) h.update(*r ? (*r)->to_string() : "-");
    h.update(embedding.data(), static_cast<std::size_t>(embedding.size()) * sizeof(double));
    for (const auto& p : projections) {
        h.update(p.name);
        h.update_value(static_cast<std::uint64_t>(p.weight.rows()));
        h.update_value(static_cast<std::uint64_t>(p.weight.cols()));
        h.update(p.weight.data(), static_cast<std::size_t>(p.weight.size()) * sizeof(double));
    }
    return h.value();
}

ProjectionGraph build_toy_model(const ModelConfig& config) {
    config.validate();
    ProjectionGraph g;
    g.config = config;
    g.model_dim = config.dim;

    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal;
    auto gaussian = [&](std::size_t rows, std::size_t cols, double std) {
        Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = std * normal(rng);
        return m;
    };

    const std::size_t d = config.dim;
    const std::size_t f = config.ffn_dim;
    const double sd = 1.0 / std::sqrt(static_cast<double>(d));
    const double sf = 1.0 / std::sqrt(static_cast<double>(f));

    g.embedding = gaussian(config.vocab, d, 1.0);
    for (std::size_t l = 0; l < config.layers; ++l) {
        auto add = [&](ProjKind k, Eigen::MatrixXd w) {
            g.projections.push_back({"layers." + std::to_string(l) + "." + to_string(k), k, l, std::move(w), {}, {}});
        };
        add(ProjKind::q, gaussian(d, d, sd));
        add(ProjKind::k, gaussian(d, d, sd));
        add(ProjKind::v, gaussian(d, d, sd));
        add(ProjKind::o, gaussian(d, d, sd));
        add(ProjKind::gate, gaussian(d, f, sd));
        add(ProjKind::up, gaussian(d, f, sd));
        add(ProjKind::down, gaussian(f, d, sf));
    }
    g.projections.push_back({"head", ProjKind::head, config.layers, gaussian(d, config.vocab, config.logit_scale * sd),
                             {}, {}});

    std::vector<std::size_t> channels(d);
    std::iota(channels.begin(), channels.end(), std::size_t{0});
    std::shuffle(channels.begin(), channels.end(), rng);
    channels.resize(config.spike_count());
    std::sort(channels.begin(), channels.end());
    g.spike_channels = channels;
    if (channels.empty()) return g;
    // Outlier channels behave like massive activations: a large, nearly
    // constant value in the residual stream for every token. Norm gains folded
    // into the readers of the residual stream rescale the ordinary channels by
    // the RMS inflation and damp the spiked ones by sqrt(s), so the network
    // keeps using every channel and still leans on the spike.
    const double s = config.spike_factor;
    for (std::size_t c : channels) {
        auto col = g.embedding.col(static_cast<Eigen::Index>(c));
        col = (s * (1.0 + 0.1 * col.array())).matrix();
    }
    const double k = static_cast<double>(channels.size());
    const double gain = std::sqrt((static_cast<double>(d) - k + k * s * s) / static_cast<double>(d));
    const double damp = std::sqrt(s);
    for (auto& p : g.projections) {
        if (!reads_residual(p.kind)) continue;
        p.weight *= gain;
        for (std::size_t c : channels) p.weight.row(static_cast<Eigen::Index>(c)) /= damp;
    }
    return g;
}

namespace {

// y <- H y / sqrt(n) for every row (or column) of w, optionally in chunks.
void rotate_rows(Eigen::MatrixXd& w, const HadamardOperator& op) {
    const std::size_t n = op.order();
    if (static_cast<std::size_t>(w.cols()) % n != 0) throw ShapeError("rotation order does not divide row length");
    std::vector<double> buf(n);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
        for (Eigen::Index start = 0; start < w.cols(); start += static_cast<Eigen::Index>(n)) {
            for (std::size_t t = 0; t < n; ++t) buf[t] = w(r, start + static_cast<Eigen::Index>(t));
            op.apply(buf, true);
            for (std::size_t t = 0; t < n; ++t) w(r, start + static_cast<Eigen::Index>(t)) = buf[t];
        }
    }
}

void rotate_cols(Eigen::MatrixXd& w, const HadamardOperator& op) {
    const std::size_t n = op.order();
    if (static_cast<std::size_t>(w.rows()) % n != 0) throw ShapeError("rotation order does not divide column length");
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
        double* col = w.col(c).data();
        for (std::size_t start = 0; start < static_cast<std::size_t>(w.rows()); start += n) {
            op.apply(std::span<double>(col + start, n), true);
        }
    }
}

ConstructionRecipe require_recipe(std::size_t order, const char* what) {
    auto r = exact_recipe(order);
    if (!r) {
        throw UnsupportedOrderError(std::string("no Hadamard construction for ") + what + " " + std::to_string(order) +
                                    "; nearest constructible order is " +
                                    std::to_string(find_constructible_order(order).order()) +
                                    " (plan a zero-padding expansion with expand-plan)");
    }
    return *r;
}

}  // namespace

ProjectionGraph fuse_rotations(const ProjectionGraph& model, const ConstructionRecipe& residual) {
    if (model.rotation == RotationState::fused) throw ArgumentError("rotation state already fused");
    if (residual.order() != model.model_dim) {
        throw ShapeError("rotation order " + std::to_string(residual.order()) + " does not match model dim " +
                         std::to_string(model.model_dim));
    }
    const auto head = require_recipe(model.config.head_dim(), "head dim");
    const auto ffn = require_recipe(model.config.ffn_dim, "ffn dim");
    const HadamardOperator r1(residual), rh(head), rf(ffn);

    ProjectionGraph out = model;
    rotate_rows(out.embedding, r1);
    for (auto& p : out.projections) {
        if (reads_residual(p.kind)) {
            rotate_cols(p.weight, r1);
        } else {
            rotate_rows(p.weight, r1);
        }
        if (p.kind == ProjKind::v) rotate_rows(p.weight, rh);
        if (p.kind == ProjKind::o) rotate_cols(p.weight, rh);
        if (p.kind == ProjKind::down) rotate_cols(p.weight, rf);
    }
    out.rotation = RotationState::fused;
    out.residual_recipe = residual;
    out.head_recipe = head;
    out.ffn_recipe = ffn;
    return out;
}

ProjectionGraph fuse_rotations(const ProjectionGraph& model) {
    if (model.rotation == RotationState::fused) throw ArgumentError("rotation state already fused");
    return fuse_rotations(model, require_recipe(model.model_dim, "model dim"));
}

void quantize_proj(ProjectionGraph& model, std::size_t i, const QuantizerSpec& act_spec) {
    if (i >= model.size()) {
        throw ArgumentError("projection index " + std::to_string(i) + " out of range [0, " +
                            std::to_string(model.size()) + ")");
    }
    act_spec.validate();
    if (act_spec.scheme != Scheme::symmetric) throw ArgumentError("activation quantizer must be symmetric");
    QuantizerSpec w;
    w.bits = act_spec.bits;
    w.clip_ratio = 1.0;
    w.level_formula = act_spec.level_formula;
    model.projections[i].weight_quant = w;
    model.projections[i].act_quant = act_spec;
}

void clear_quantization(ProjectionGraph& model) {
    for (auto& p : model.projections) {
        p.weight_quant.reset();
        p.act_quant.reset();
    }
}

namespace {

struct Slots {
    std::optional<QuantizerSpec> weight;
    std::optional<QuantizerSpec> act;
};

class Runtime {
public:
    Runtime(const ProjectionGraph& m, std::vector<Slots> slots, const EvalOptions& opts)
        : m_(m), slots_(std::move(slots)), opts_(opts) {
        if (slots_.size() != m.size()) throw ArgumentError("one quantizer slot per projection is required");
        const std::size_t expected = 7 * m.config.layers + 1;
        if (m.size() != expected) throw ShapeError("projection graph does not match its layer count");
        weights_.resize(m.size());
        for (std::size_t i = 0; i < m.size(); ++i) {
            const auto& w = slots_[i].weight;
            if (!w) {
                weights_[i] = &m.projections[i].weight;
                continue;
            }
            w->validate();
            Eigen::MatrixXd q = m.projections[i].weight;
            for (Eigen::Index c = 0; c < q.cols(); ++c) {
                fake_quantize_symmetric(std::span<double>(q.col(c).data(), static_cast<std::size_t>(q.rows())),
                                        w->bits, w->clip_ratio, w->level_formula);
            }
            owned_.push_back(std::move(q));
            weights_[i] = &owned_.back();
        }
        for (const auto& s : slots_)
            if (s.act) s.act->validate();
        if (m.rotation == RotationState::fused) {
            head_op_.emplace(*m.head_recipe);
            ffn_op_.emplace(*m.ffn_recipe);
        }
        kv_group_ = std::min(opts_.kv_group, m.config.head_dim());
        if (kv_group_ == 0 || m.config.dim % kv_group_ != 0) throw ShapeError("kv group does not divide the head dims");
    }

    RowMat forward(std::span<const std::uint32_t> tokens, RowMat* first_q_input = nullptr) const {
        const auto T = static_cast<Eigen::Index>(tokens.size());
        const auto N = static_cast<Eigen::Index>(m_.model_dim);
        RowMat h(T, N);
        for (Eigen::Index t = 0; t < T; ++t) {
            if (tokens[t] >= m_.config.vocab) throw DataError("token id outside the model vocabulary");
            h.row(t) = m_.embedding.row(tokens[t]);
        }
        std::size_t idx = 0;
        for (std::size_t l = 0; l < m_.config.layers; ++l, idx += 7) {
            RowMat a = rms_norm(h);
            if (l == 0 && first_q_input) *first_q_input = a;
            RowMat q = linear(a, idx + 0);
            RowMat k = linear(a, idx + 1);
            RowMat v = linear(a, idx + 2);
            if (head_op_) {
                rotate_row_chunks(q, *head_op_);
                rotate_row_chunks(k, *head_op_);
            }
            if (opts_.kv_cache) {
                if (slots_[idx + 1].act) kv_quantize(k, slots_[idx + 1].act->bits);
                if (slots_[idx + 2].act) kv_quantize(v, slots_[idx + 2].act->bits);
            }
            h += linear(attention(q, k, v), idx + 3);

            a = rms_norm(h);
            RowMat gate = linear(a, idx + 4);
            RowMat up = linear(a, idx + 5);
            RowMat z = (gate.array() / (1.0 + (-gate.array()).exp()) * up.array()).matrix();
            if (ffn_op_) rotate_row_chunks(z, *ffn_op_);
            h += linear(z, idx + 6);
        }
        return linear(rms_norm(h), idx);
    }

private:
    RowMat rms_norm(const RowMat& h) const {
        RowMat out(h.rows(), h.cols());
        const double dim = static_cast<double>(m_.config.dim);
        for (Eigen::Index t = 0; t < h.rows(); ++t) {
            const double rms = std::sqrt(h.row(t).squaredNorm() / dim + norm_eps);
            out.row(t) = h.row(t) / rms;
        }
        return out;
    }

    RowMat linear(const RowMat& x, std::size_t i) const {
        const auto& act = slots_[i].act;
        if (!act) return x * *weights_[i];
        RowMat xq = x;
        if (act->granularity == Granularity::per_tensor) {
            fake_quantize_symmetric(std::span<double>(xq.data(), static_cast<std::size_t>(xq.size())), act->bits,
                                    act->clip_ratio, act->level_formula);
        } else {
            for (Eigen::Index t = 0; t < xq.rows(); ++t) {
                fake_quantize_symmetric(std::span<double>(xq.row(t).data(), static_cast<std::size_t>(xq.cols())),
                                        act->bits, act->clip_ratio, act->level_formula);
            }
        }
        return xq * *weights_[i];
    }

    void kv_quantize(RowMat& x, int bits) const {
        for (Eigen::Index t = 0; t < x.rows(); ++t) {
            fake_quantize_asymmetric(std::span<double>(x.row(t).data(), static_cast<std::size_t>(x.cols())), bits,
                                     kv_group_);
        }
    }

    static void rotate_row_chunks(RowMat& x, const HadamardOperator& op) {
        const std::size_t n = op.order();
        for (Eigen::Index t = 0; t < x.rows(); ++t) {
            double* row = x.row(t).data();
            for (std::size_t s = 0; s < static_cast<std::size_t>(x.cols()); s += n) op.apply({row + s, n}, true);
        }
    }

    RowMat attention(const RowMat& q, const RowMat& k, const RowMat& v) const {
        const auto T = q.rows();
        const auto hd = static_cast<Eigen::Index>(m_.config.head_dim());
        const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
        RowMat ctx(T, q.cols());
        for (Eigen::Index h = 0; h < static_cast<Eigen::Index>(m_.config.heads); ++h) {
            const auto qh = q.middleCols(h * hd, hd);
            const auto kh = k.middleCols(h * hd, hd);
            const auto vh = v.middleCols(h * hd, hd);
            RowMat s = (qh * kh.transpose()) * scale;
            for (Eigen::Index t = 0; t < T; ++t) {
                const double top = s.row(t).head(t + 1).maxCoeff();
                double sum = 0.0;
                for (Eigen::Index u = 0; u <= t; ++u) {
                    s(t, u) = std::exp(s(t, u) - top);
                    sum += s(t, u);
                }
                for (Eigen::Index u = 0; u <= t; ++u) s(t, u) /= sum;
                for (Eigen::Index u = t + 1; u < T; ++u) s(t, u) = 0.0;
            }
            ctx.middleCols(h * hd, hd) = s * vh;
        }
        return ctx;
    }

    const ProjectionGraph& m_;
    std::vector<Slots> slots_;
    EvalOptions opts_;
    std::vector<const Eigen::MatrixXd*> weights_;
    std::deque<Eigen::MatrixXd> owned_;
    std::optional<HadamardOperator> head_op_, ffn_op_;
    std::size_t kv_group_ = 1;
};

double sequence_ce(const RowMat& logits, std::span<const std::uint32_t> tokens) {
    double total = 0.0;
    for (Eigen::Index t = 0; t + 1 < logits.rows(); ++t) {
        const double top = logits.row(t).maxCoeff();
        const double lse = top + std::log((logits.row(t).array() - top).exp().sum());
        total += lse - logits(t, tokens[static_cast<std::size_t>(t) + 1]);
    }
    return total;
}

PerplexityScore evaluate_slots(const ProjectionGraph& model, const EvalDataset& data, std::vector<Slots> slots,
                               const EvalOptions& opts) {
    data.validate();
    if (data.vocab > model.config.vocab) throw DataError("dataset vocabulary exceeds the model vocabulary");
    const Runtime rt(model, std::move(slots), opts);
    const std::size_t n = data.sequences.size();
    std::vector<double> ce(n, 0.0);
    auto work = [&](std::size_t first, std::size_t stride) {
        for (std::size_t s = first; s < n; s += stride) ce[s] = sequence_ce(rt.forward(data.sequences[s]), data.sequences[s]);
    };
    const std::size_t threads = std::clamp<std::size_t>(opts.threads, 1, n);
    if (threads == 1) {
        work(0, 1);
    } else {
        std::vector<std::jthread> pool;
        std::vector<std::exception_ptr> errors(threads);
        for (std::size_t w = 0; w < threads; ++w) {
            pool.emplace_back([&, w] {
                try {
                    work(w, threads);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        pool.clear();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }
    PerplexityScore score;
    score.tokens = n * (data.seq_len - 1);
    double total = 0.0;
    for (double v : ce) total += v;
    score.mean_ce = total / static_cast<double>(score.tokens);
    score.ppl = std::exp(score.mean_ce);
    return score;
}

Slots slots_for(const QuantizerSpec& act) {
    QuantizerSpec w;
    w.bits = act.bits;
    w.clip_ratio = 1.0;
    w.level_formula = act.level_formula;
    return {w, act};
}

}  // namespace

PerplexityScore evaluate_marked(const ProjectionGraph& model, const EvalDataset& data, const EvalOptions& opts) {
    std::vector<Slots> slots;
    for (const auto& p : model.projections) slots.push_back({p.weight_quant, p.act_quant});
    return evaluate_slots(model, data, std::move(slots), opts);
}

PerplexityScore evaluate_clips(const ProjectionGraph& model, const EvalDataset& data,
                               std::span<const std::optional<double>> clips, int bits, const EvalOptions& opts) {
    if (clips.size() != model.size()) {
        throw ArgumentError("expected " + std::to_string(model.size()) + " clip entries, got " +
                            std::to_string(clips.size()));
    }
    std::vector<Slots> slots(model.size());
    for (std::size_t i = 0; i < clips.size(); ++i) {
        if (!clips[i]) continue;
        QuantizerSpec act;
        act.bits = bits;
        act.clip_ratio = *clips[i];
        slots[i] = slots_for(act);
    }
    return evaluate_slots(model, data, std::move(slots), opts);
}

PerplexityScore evaluate_perplexity(const ProjectionGraph& model, const EvalDataset& data,
                                    std::span<const double> clip_ratios, long quantized_upto, int bits,
                                    const EvalOptions& opts) {
    if (quantized_upto < -1 || quantized_upto >= static_cast<long>(model.size())) {
        throw ArgumentError("quantized_upto " + std::to_string(quantized_upto) + " out of range [-1, " +
                            std::to_string(model.size()) + ")");
    }
    const auto count = static_cast<std::size_t>(quantized_upto + 1);
    if (clip_ratios.size() < count) throw ArgumentError("fewer clip ratios than quantized projections");
    std::vector<std::optional<double>> clips(model.size());
    for (std::size_t i = 0; i < count; ++i) clips[i] = clip_ratios[i];
    return evaluate_clips(model, data, clips, bits, opts);
}

PerplexityScore perplexity_from_logits(const Eigen::MatrixXd& logits, std::span<const std::uint32_t> targets) {
    if (static_cast<std::size_t>(logits.rows()) != targets.size() || targets.empty()) {
        throw ShapeError("one target per logit row is required");
    }
    double total = 0.0;
    for (Eigen::Index t = 0; t < logits.rows(); ++t) {
        if (targets[t] >= logits.cols()) throw DataError("target id outside the logit width");
        const double top = logits.row(t).maxCoeff();
        const double lse = top + std::log((logits.row(t).array() - top).exp().sum());
        total += lse - logits(t, targets[t]);
    }
    PerplexityScore s;
    s.tokens = targets.size();
    s.mean_ce = total / static_cast<double>(s.tokens);
    s.ppl = std::exp(s.mean_ce);
    return s;
}

Eigen::MatrixXd forward_logits(const ProjectionGraph& model, std::span<const std::uint32_t> tokens) {
    if (tokens.empty()) throw DataError("empty token sequence");
    const Runtime rt(model, std::vector<Slots>(model.size()), EvalOptions{});
    return rt.forward(tokens);
}

double activation_outlier_ratio(const ProjectionGraph& model, std::span<const std::uint32_t> tokens) {
    if (tokens.empty()) throw DataError("empty token sequence");
    const Runtime rt(model, std::vector<Slots>(model.size()), EvalOptions{});
    RowMat a;
    rt.forward(tokens, &a);
    std::vector<double> mags(static_cast<std::size_t>(a.size()));
    for (Eigen::Index i = 0; i < a.size(); ++i) mags[static_cast<std::size_t>(i)] = std::abs(a.data()[i]);
    const double top = *std::max_element(mags.begin(), mags.end());
    auto mid = mags.begin() + static_cast<std::ptrdiff_t>(mags.size() / 2);
    std::nth_element(mags.begin(), mid, mags.end());
    return *mid > 0.0 ? top / *mid : std::numeric_limits<double>::infinity();
}

EvalDataset model_corpus(const ProjectionGraph& model, std::size_t seq_len, std::size_t sequences,
                         std::uint64_t seed, double temperature) {
    if (seq_len < 2 || sequences == 0) throw ArgumentError("corpus needs sequences of length >= 2");
    if (!(temperature > 0.0)) throw ArgumentError("sampling temperature must be positive");
    const Runtime rt(model, std::vector<Slots>(model.size()), EvalOptions{});
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    EvalDataset d;
    d.vocab = model.config.vocab;
    d.seq_len = seq_len;
    for (std::size_t s = 0; s < sequences; ++s) {
        std::vector<std::uint32_t> seq{static_cast<std::uint32_t>(rng() % d.vocab)};
        while (seq.size() < seq_len) {
            const RowMat logits = rt.forward(seq);
            const auto last = logits.row(logits.rows() - 1);
            Eigen::RowVectorXd p = ((last.array() - last.maxCoeff()) / temperature).exp();
            const double u = unit(rng) * p.sum();
            double acc = 0.0;
            std::uint32_t next = static_cast<std::uint32_t>(d.vocab - 1);
            for (Eigen::Index v = 0; v < p.size(); ++v) {
                acc += p(v);
                if (u < acc) {
                    next = static_cast<std::uint32_t>(v);
                    break;
                }
            }
            seq.push_back(next);
        }
        d.sequences.push_back(std::move(seq));
    }
    return d;
}

}  // namespace rotquant
