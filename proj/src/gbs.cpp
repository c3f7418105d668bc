#include "rotquant/gbs.hpp"

#include <algorithm>
#include <cmath>

#include "rotquant/error.hpp"
#include "rotquant/io.hpp"

namespace rotquant {

std::string to_string(StartMode m) { return m == StartMode::fp16_start ? "fp16_start" : "quantized_start"; }

StartMode parse_start_mode(const std::string& text) {
    if (text == "fp16_start" || text == "fp16") return StartMode::fp16_start;
    if (text == "quantized_start" || text == "quantized") return StartMode::quantized_start;
    throw ArgumentError("unknown start mode '" + text + "'");
}

SyntheticObjective::SyntheticObjective(std::vector<double> targets) : targets_(std::move(targets)) {
    if (targets_.empty()) throw ArgumentError("synthetic objective needs at least one projection");
}

double SyntheticObjective::evaluate(std::span<const std::optional<double>> clips, std::size_t current) {
    ++calls_;
    if (current >= targets_.size() || clips.size() != targets_.size() || !clips[current]) {
        throw ArgumentError("synthetic objective called without a ratio for the current projection");
    }
    const double d = *clips[current] - targets_[current];
    return d * d + 1.0;
}

std::uint64_t SyntheticObjective::hash() const {
    Fnv1a h;
    h.update("synthetic");
    h.update(targets_.data(), targets_.size() * sizeof(double));
    return h.value();
}

ModelObjective::ModelObjective(const ProjectionGraph& model, const EvalDataset& data, int bits, EvalOptions opts)
    : model_(model), data_(data), bits_(bits), opts_(opts) {
    data_.validate();
    if (model_.size() == 0) throw ArgumentError("model has no projections");
}

double ModelObjective::evaluate(std::span<const std::optional<double>> clips, std::size_t) {
    return evaluate_clips(model_, data_, clips, bits_, opts_).ppl;
}

std::uint64_t ModelObjective::hash() const {
    Fnv1a h;
    h.update_value(model_.hash());
    h.update_value(data_.hash());
    h.update_value(bits_);
    h.update_value(opts_.kv_cache);
    h.update_value(static_cast<std::uint64_t>(opts_.kv_group));
    return h.value();
}

void GbsConfig::validate(std::size_t projections) const {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ArgumentError("epsilon must be in (0, 1)");
    if (projections == 0) throw ArgumentError("nothing to search: no projections");
    if (bits < 2 || bits > 30) throw ArgumentError("bits must be in [2, 30]");
    if (max_iterations == 0) throw ArgumentError("max_iterations must be positive");
    if (order.empty()) return;
    if (order.size() != projections) throw ArgumentError("projection order must list every projection once");
    std::vector<bool> seen(projections, false);
    for (std::size_t i : order) {
        if (i >= projections || seen[i]) throw ArgumentError("projection order is not a permutation");
        seen[i] = true;
    }
}

std::vector<std::size_t> GbsConfig::resolved_order(std::size_t projections) const {
    if (!order.empty()) return order;
    std::vector<std::size_t> o(projections);
    for (std::size_t i = 0; i < projections; ++i) o[i] = i;
    return o;
}

nlohmann::json GbsConfig::to_json() const {
    return {{"epsilon", epsilon},
            {"start_mode", to_string(start_mode)},
            {"bits", bits},
            {"order", order},
            {"max_iterations", max_iterations}};
}

GbsConfig GbsConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("search config must be a JSON object");
    GbsConfig c;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "epsilon") {
                c.epsilon = value.get<double>();
            } else if (key == "start_mode") {
                c.start_mode = parse_start_mode(value.get<std::string>());
            } else if (key == "bits") {
                c.bits = value.get<int>();
            } else if (key == "order") {
                c.order = value.get<std::vector<std::size_t>>();
            } else if (key == "max_iterations") {
                c.max_iterations = value.get<std::size_t>();
            } else {
                throw ConfigError("unknown search config key '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad search config: ") + e.what());
    } catch (const ArgumentError& e) {
        throw ConfigError(e.what());
    }
    return c;
}

std::uint64_t GbsConfig::hash(std::size_t projections) const {
    auto j = to_json();
    j["order"] = resolved_order(projections);
    return fnv1a64(j.dump());
}

std::vector<std::optional<double>> GbsResult::clips(std::size_t projections) const {
    std::vector<std::optional<double>> c(projections);
    for (std::size_t k = 0; k < ratios.size(); ++k) c.at(order.at(k)) = ratios[k];
    return c;
}

nlohmann::json GbsResult::to_json() const {
    nlohmann::json traces_json = nlohmann::json::array();
    for (const auto& t : traces) {
        nlohmann::json pts = nlohmann::json::array();
        for (const auto& p : t.points) pts.push_back({p.ratio, p.value});
        traces_json.push_back({{"projection", t.projection}, {"points", pts}});
    }
    nlohmann::json j{{"order", order},
                     {"ratios", ratios},
                     {"traces", traces_json},
                     {"config_hash", config_hash},
                     {"objective_hash", objective_hash},
                     {"complete", complete}};
    j["train_ppl"] = train_ppl ? nlohmann::json(*train_ppl) : nlohmann::json(nullptr);
    j["heldout_ppl"] = heldout_ppl ? nlohmann::json(*heldout_ppl) : nlohmann::json(nullptr);
    return j;
}

GbsResult GbsResult::from_json(const nlohmann::json& j) {
    GbsResult r;
    try {
        r.order = j.at("order").get<std::vector<std::size_t>>();
        r.ratios = j.at("ratios").get<std::vector<double>>();
        for (const auto& t : j.at("traces")) {
            ProjectionTrace pt;
            pt.projection = t.at("projection").get<std::size_t>();
            for (const auto& p : t.at("points")) pt.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
            r.traces.push_back(std::move(pt));
        }
        r.config_hash = j.at("config_hash").get<std::string>();
        r.objective_hash = j.at("objective_hash").get<std::string>();
        r.complete = j.at("complete").get<bool>();
        if (j.contains("train_ppl") && !j.at("train_ppl").is_null()) r.train_ppl = j.at("train_ppl").get<double>();
        if (j.contains("heldout_ppl") && !j.at("heldout_ppl").is_null()) {
            r.heldout_ppl = j.at("heldout_ppl").get<double>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed search result: ") + e.what());
    }
    if (r.ratios.size() > r.order.size() || r.traces.size() != r.ratios.size()) {
        throw DataError("malformed search result: ratio, trace and order lengths disagree");
    }
    return r;
}

std::vector<std::optional<double>> gbs_clips(const GbsResult& partial, std::size_t projections, StartMode mode) {
    auto c = partial.clips(projections);
    if (mode == StartMode::quantized_start) {
        for (auto& v : c)
            if (!v) v = 1.0;
    }
    return c;
}

namespace {

ProjectionTrace search_one(Objective& objective, std::vector<std::optional<double>>& clips, std::size_t projection,
                           const GbsConfig& config, double& ratio) {
    ProjectionTrace trace;
    trace.projection = projection;
    auto eval = [&](double x) {
        clips[projection] = x;
        const double f = objective.evaluate(clips, projection);
        trace.points.push_back({x, f});
        return f;
    };

    double a = 0.0, b = 1.0, m = 0.5;
    double fm = eval(m);
    for (std::size_t it = 0; b - a > config.epsilon && it < config.max_iterations; ++it) {
        const double x = (it % 2 == 0) ? (a + m) / 2.0 : (b + m) / 2.0;
        const double fx = eval(x);
        if (fx < fm) {
            if (x < m) {
                b = m;
            } else {
                a = m;
            }
            m = x;
            fm = fx;
        } else if (x < m) {
            a = x;
        } else {
            b = x;
        }
    }
    clips[projection] = m;
    ratio = m;
    return trace;
}

}  // namespace

GbsResult gbs_resume(const GbsResult& partial, Objective& objective, const GbsConfig& config,
                     const GbsCheckpoint& checkpoint) {
    const std::size_t n = objective.projection_count();
    config.validate(n);
    if (partial.config_hash != hex64(config.hash(n))) {
        throw IntegrityError("search configuration does not match the checkpoint");
    }
    if (partial.objective_hash != hex64(objective.hash())) {
        throw IntegrityError("model or dataset does not match the checkpoint");
    }
    if (partial.order != config.resolved_order(n)) throw IntegrityError("projection order does not match the checkpoint");
    if (partial.complete) return partial;

    GbsResult result = partial;
    result.train_ppl.reset();
    result.heldout_ppl.reset();
    for (std::size_t k = result.ratios.size(); k < n; ++k) {
        auto clips = gbs_clips(result, n, config.start_mode);
        double ratio = 0.0;
        try {
            auto trace = search_one(objective, clips, result.order[k], config, ratio);
            result.traces.push_back(std::move(trace));
            result.ratios.push_back(ratio);
        } catch (...) {
            if (checkpoint) checkpoint(result);
            throw;
        }
        result.complete = result.ratios.size() == n;
        if (checkpoint) checkpoint(result);
    }
    result.complete = true;
    return result;
}

GbsResult gbs_run(Objective& objective, const GbsConfig& config, const GbsCheckpoint& checkpoint) {
    const std::size_t n = objective.projection_count();
    config.validate(n);
    GbsResult start;
    start.order = config.resolved_order(n);
    start.config_hash = hex64(config.hash(n));
    start.objective_hash = hex64(objective.hash());
    return gbs_resume(start, objective, config, checkpoint);
}

std::vector<std::pair<double, double>> clip_sweep(Objective& objective, const GbsResult& result, std::size_t position,
                                                  std::span<const double> grid, StartMode mode) {
    const std::size_t n = objective.projection_count();
    if (grid.empty()) throw ArgumentError("sweep grid is empty");
    if (position >= n) throw ArgumentError("sweep position out of range");
    if (result.ratios.size() < position) throw ArgumentError("projections before the sweep position are not searched yet");
    for (double r : grid)
        if (!(r > 0.0 && r <= 1.0)) throw ArgumentError("sweep ratios must be in (0, 1]");
    const auto order = result.order.empty() ? GbsConfig{}.resolved_order(n) : result.order;

    GbsResult frozen;
    frozen.order = order;
    frozen.ratios.assign(result.ratios.begin(), result.ratios.begin() + static_cast<std::ptrdiff_t>(position));
    auto clips = gbs_clips(frozen, n, mode);
    std::vector<std::pair<double, double>> out;
    for (double r : grid) {
        clips[order[position]] = r;
        out.emplace_back(r, objective.evaluate(clips, order[position]));
    }
    return out;
}

void gbs_finalize(GbsResult& result, const ProjectionGraph& model, const EvalDataset& train,
                  const EvalDataset* heldout, int bits, const EvalOptions& opts) {
    if (!result.complete) throw ArgumentError("search result is incomplete");
    const auto clips = result.clips(model.size());
    result.train_ppl = evaluate_clips(model, train, clips, bits, opts).ppl;
    if (heldout) result.heldout_ppl = evaluate_clips(model, *heldout, clips, bits, opts).ppl;
}

}  // namespace rotquant
