#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "rotquant/dataset.hpp"
#include "rotquant/model.hpp"

namespace rotquant {

// fp16_start keeps unprocessed projections full precision; quantized_start
// runs them quantized with clip 1.
enum class StartMode { fp16_start, quantized_start };
std::string to_string(StartMode m);
StartMode parse_start_mode(const std::string& text);

// Something to minimize over per-projection clip ratios. `clips` has one
// entry per projection (nullopt = full precision); `current` is the
// projection whose ratio is being searched.
class Objective {
public:
    virtual ~Objective() = default;
    virtual std::size_t projection_count() const = 0;
    virtual double evaluate(std::span<const std::optional<double>> clips, std::size_t current) = 0;
    virtual std::uint64_t hash() const = 0;
};

// f(x) = (x - target_i)^2 + 1 for the projection being searched.
class SyntheticObjective : public Objective {
public:
    explicit SyntheticObjective(std::vector<double> targets);
    std::size_t projection_count() const override { return targets_.size(); }
    double evaluate(std::span<const std::optional<double>> clips, std::size_t current) override;
    std::uint64_t hash() const override;
    std::size_t calls() const { return calls_; }

private:
    std::vector<double> targets_;
    std::size_t calls_ = 0;
};

// Wraps any callable; the hash is supplied by the caller.
class FunctionObjective : public Objective {
public:
    using Fn = std::function<double(std::span<const std::optional<double>>, std::size_t)>;
    FunctionObjective(std::size_t n, Fn fn, std::uint64_t hash = 0) : n_(n), fn_(std::move(fn)), hash_(hash) {}
    std::size_t projection_count() const override { return n_; }
    double evaluate(std::span<const std::optional<double>> clips, std::size_t current) override {
        return fn_(clips, current);
    }
    std::uint64_t hash() const override { return hash_; }

private:
    std::size_t n_;
    Fn fn_;
    std::uint64_t hash_;
};

// Perplexity of a model on a fixed dataset at a given bit width.
class ModelObjective : public Objective {
public:
    ModelObjective(const ProjectionGraph& model, const EvalDataset& data, int bits, EvalOptions opts = {});
    std::size_t projection_count() const override { return model_.size(); }
    double evaluate(std::span<const std::optional<double>> clips, std::size_t current) override;
    std::uint64_t hash() const override;

private:
    const ProjectionGraph& model_;
    const EvalDataset& data_;
    int bits_;
    EvalOptions opts_;
};

struct GbsConfig {
    double epsilon = 0.01;
    StartMode start_mode = StartMode::fp16_start;
    int bits = 4;
    std::vector<std::size_t> order;  // empty = 0..n-1
    std::size_t max_iterations = 200;  // per projection, guards against a stuck interval

    void validate(std::size_t projections) const;  // ArgumentError
    std::vector<std::size_t> resolved_order(std::size_t projections) const;
    nlohmann::json to_json() const;
    static GbsConfig from_json(const nlohmann::json& j);  // ConfigError
    std::uint64_t hash(std::size_t projections) const;
};

struct TracePoint {
    double ratio = 0.0;
    double value = 0.0;
};

struct ProjectionTrace {
    std::size_t projection = 0;
    std::vector<TracePoint> points;  // the first point is the initial m = 0.5
};

struct GbsResult {
    std::vector<std::size_t> order;
    std::vector<double> ratios;  // ratios[k] belongs to projection order[k]
    std::vector<ProjectionTrace> traces;
    std::string config_hash;
    std::string objective_hash;
    std::optional<double> train_ppl;
    std::optional<double> heldout_ppl;
    bool complete = false;

    // Ratio per projection index, nullopt for projections not yet processed.
    std::vector<std::optional<double>> clips(std::size_t projections) const;

    nlohmann::json to_json() const;
    static GbsResult from_json(const nlohmann::json& j);
};

// Called after every finished projection, and with the partial result before
// an evaluator error is rethrown.
using GbsCheckpoint = std::function<void(const GbsResult&)>;

GbsResult gbs_run(Objective& objective, const GbsConfig& config, const GbsCheckpoint& checkpoint = {});

// Continues a partial result; IntegrityError if it was produced by a different
// configuration or objective.
GbsResult gbs_resume(const GbsResult& partial, Objective& objective, const GbsConfig& config,
                     const GbsCheckpoint& checkpoint = {});

// Full clip vector used while searching position k of the order.
std::vector<std::optional<double>> gbs_clips(const GbsResult& partial, std::size_t projections, StartMode mode);

// Value of the objective with projections before position k frozen at their
// ratios and the projection at position k set to each grid value.
std::vector<std::pair<double, double>> clip_sweep(Objective& objective, const GbsResult& result, std::size_t position,
                                                  std::span<const double> grid, StartMode mode = StartMode::fp16_start);

// Sets final train (and optionally held-out) perplexity with every projection
// quantized at the found ratios.
void gbs_finalize(GbsResult& result, const ProjectionGraph& model, const EvalDataset& train,
                  const EvalDataset* heldout, int bits, const EvalOptions& opts = {});

}  // namespace rotquant
