#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "rotquant/dataset.hpp"
#include "rotquant/error.hpp"
#include "rotquant/expansion.hpp"
#include "rotquant/gbs.hpp"
#include "rotquant/hadamard.hpp"
#include "rotquant/io.hpp"
#include "rotquant/model.hpp"
#include "rotquant/quantizer.hpp"
#include "rotquant/random_rotation.hpp"

#ifndef ROTQUANT_VERSION
#define ROTQUANT_VERSION "unknown"
#endif

namespace rotquant::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_json(const fs::path& path, const json& j) { atomic_write(path, j.dump(2) + "\n"); }

json load_json(const fs::path& path) {
    const std::string text = read_file(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

std::string manifest_name(const fs::path& primary) { return primary.filename().string() + ".manifest.json"; }

// Records one command invocation. Outputs point back to it by file name.
class Manifest {
public:
    explicit Manifest(std::string command)
        : command_(std::move(command)), started_(std::chrono::steady_clock::now()), started_at_(utc_now()) {}

    void set_config(json config) { config_ = std::move(config); }
    void add_seed(const std::string& name, std::uint64_t value) { seeds_[name] = value; }
    void add_input(const fs::path& p) { inputs_.push_back(fs::absolute(p).string()); }
    void add_output(const fs::path& p) { outputs_.push_back(fs::absolute(p).string()); }

    void write(const fs::path& path) const {
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
        write_json(path, {{"command", command_},
                          {"config", config_},
                          {"config_hash", hex64(fnv1a64(config_.dump()))},
                          {"seeds", seeds_},
                          {"inputs", inputs_},
                          {"outputs", outputs_},
                          {"tool_version", ROTQUANT_VERSION},
                          {"started_at", started_at_},
                          {"wall_clock_seconds", seconds}});
    }

private:
    std::string command_;
    std::chrono::steady_clock::time_point started_;
    std::string started_at_;
    json config_ = json::object();
    json seeds_ = json::object();
    std::vector<std::string> inputs_;
    std::vector<std::string> outputs_;
};

std::string number(double v) {
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
}

// ---------------------------------------------------------------- hadamard

struct HadamardArgs {
    std::size_t order = 0;
    std::string recipe;
    std::string out;
    bool normalized = false;
    bool text = false;
};

ConstructionRecipe recipe_for_order(std::size_t n) {
    if (n == 0) throw ArgumentError("order must be positive");
    if (auto r = exact_recipe(n)) return *r;
    const auto above = find_constructible_order(n);
    std::string msg = "no Hadamard construction for order " + std::to_string(n) +
                      "; nearest constructible orders: " + std::to_string(above.order()) + " (" + above.to_string() +
                      ")";
    if (auto below = previous_constructible_order(n)) {
        msg += ", " + std::to_string(below->order()) + " (" + below->to_string() + ")";
    }
    throw UnsupportedOrderError(msg);
}

int cmd_hadamard(const HadamardArgs& a, std::ostream& out) {
    const ConstructionRecipe recipe = a.recipe.empty() ? recipe_for_order(a.order) : ConstructionRecipe::parse(a.recipe);
    if (recipe.order() > max_dense_order) {
        throw SizeError("order " + std::to_string(recipe.order()) + " exceeds the dense limit " +
                        std::to_string(max_dense_order));
    }
    Manifest manifest("hadamard");
    manifest.set_config({{"recipe", recipe.to_string()},
                         {"order", recipe.order()},
                         {"normalized", a.normalized},
                         {"format", a.text ? "text" : "binary"}});

    const HadamardMatrix h = build(recipe);
    const std::size_t n = h.order();
    const fs::path path = a.out;
    if (a.text) {
        const double scale = a.normalized ? 1.0 / std::sqrt(static_cast<double>(n)) : 1.0;
        std::string text;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (j) text += ' ';
                text += a.normalized ? number(h(i, j) * scale) : std::to_string(h(i, j));
            }
            text += '\n';
        }
        atomic_write(path, text);
    } else {
        TensorRecord t;
        t.dtype = a.normalized ? DType::f32 : DType::i32;
        t.shape = {n, n};
        t.values = h.dense(a.normalized);
        write_tensor_file(path, t);
    }
    const fs::path sidecar = a.out + ".json";
    write_json(sidecar, {{"order", n},
                         {"recipe", recipe.to_string()},
                         {"normalized", a.normalized},
                         {"format", a.text ? "text" : "binary"},
                         {"manifest", manifest_name(path)}});
    manifest.add_output(path);
    manifest.add_output(sidecar);
    manifest.write(a.out + ".manifest.json");
    out << "order " << n << " " << recipe.to_string() << " -> " << a.out << "\n";
    return 0;
}

// ----------------------------------------------------------- outlier-sweep

struct SweepArgs {
    std::vector<std::size_t> dims{16, 32, 64, 128, 256, 512, 1024, 2048, 4096};
    double peak = 200.0;
    double sigma = 0.1;
    std::size_t trials = 100;
    std::uint64_t seed = 0;
    std::string out;
};

int cmd_outlier_sweep(const SweepArgs& a, std::ostream& out) {
    Manifest manifest("outlier-sweep");
    manifest.set_config({{"dims", a.dims}, {"peak", a.peak}, {"sigma", a.sigma}, {"trials", a.trials}});
    manifest.add_seed("sweep", a.seed);
    const auto reports = reduction_sweep(a.dims, a.peak, a.sigma, a.trials, a.seed);
    std::ostringstream csv;
    write_sweep_csv(csv, reports);
    atomic_write(a.out, csv.str());
    manifest.add_output(a.out);
    manifest.write(a.out + ".manifest.json");
    out << reports.size() << " dimensions -> " << a.out << "\n";
    return 0;
}

// ---------------------------------------------------------------- quantize

struct QuantizeArgs {
    std::string in;
    std::string out;
    std::string dequant;
    int bits = 4;
    double clip = 1.0;
    std::string scheme = "symmetric";
    std::string granularity = "per_token";
    std::size_t group_size = 0;
    std::string level_formula = "full_range";
};

int cmd_quantize(const QuantizeArgs& a, std::ostream& out) {
    QuantizerSpec spec;
    spec.bits = a.bits;
    spec.clip_ratio = a.clip;
    spec.scheme = parse_scheme(a.scheme);
    spec.granularity = parse_granularity(a.granularity);
    spec.level_formula = parse_level_formula(a.level_formula);
    if (a.group_size) spec.group_size = a.group_size;
    spec.validate();

    Manifest manifest("quantize");
    const TensorRecord in = read_tensor_file(a.in);
    manifest.add_input(a.in);
    const Tensor x{in.shape, in.values};
    const QuantizedTensor q = quantize(x, spec);
    const auto err = quantization_error(x, q);

    json config = {{"bits", spec.bits},
                   {"clip_ratio", spec.clip_ratio},
                   {"scheme", to_string(spec.scheme)},
                   {"granularity", to_string(spec.granularity)},
                   {"level_formula", to_string(spec.level_formula)},
                   {"group_size", q.group_size}};
    manifest.set_config(config);

    write_tensor_file(a.out, TensorRecord{DType::i32, q.shape, std::vector<double>(q.codes.begin(), q.codes.end())});
    manifest.add_output(a.out);
    if (!a.dequant.empty()) {
        write_tensor_file(a.dequant, TensorRecord{DType::f32, q.shape, dequantize(q).values});
        manifest.add_output(a.dequant);
    }
    json report = config;
    report["shape"] = q.shape;
    report["scale_count"] = q.scales.size();
    report["scales_per_row"] = q.scales.size() / std::max<std::size_t>(1, x.rows());
    report["scales"] = q.scales;
    if (!q.zero_points.empty()) report["zero_points"] = q.zero_points;
    report["max_abs_err"] = err.max_abs_err;
    report["mse"] = err.mse;
    report["manifest"] = manifest_name(a.out);
    const std::string report_path = a.out + ".json";
    write_json(report_path, report);
    manifest.add_output(report_path);
    manifest.write(a.out + ".manifest.json");
    out << q.scales.size() << " scales, max_abs_err " << number(err.max_abs_err) << " -> " << a.out << "\n";
    return 0;
}

// ----------------------------------------------------------------- dataset

struct DatasetArgs {
    std::string model_config;
    bool markov = false;
    std::size_t vocab = 256;
    double sharpness = 2.0;
    std::size_t seq_len = 64;
    std::size_t sequences = 32;
    std::uint64_t seed = 0;
    double temperature = 1.0;
    std::size_t split = 0;
    std::string heldout_out;
    std::string out;
};

int cmd_dataset(const DatasetArgs& a, std::ostream& out) {
    Manifest manifest("dataset");
    json config = {{"seq_len", a.seq_len}, {"sequences", a.sequences}};
    EvalDataset data;
    if (a.markov) {
        config["source"] = "markov";
        config["vocab"] = a.vocab;
        config["sharpness"] = a.sharpness;
        data = markov_corpus(a.vocab, a.seq_len, a.sequences, a.seed, a.sharpness);
    } else {
        const auto mc = ModelConfig::from_json(load_json(a.model_config));
        manifest.add_input(a.model_config);
        manifest.add_seed("model", mc.seed);
        config["source"] = "model";
        config["model"] = mc.to_json();
        config["temperature"] = a.temperature;
        data = model_corpus(build_toy_model(mc), a.seq_len, a.sequences, a.seed, a.temperature);
    }
    manifest.add_seed("corpus", a.seed);
    if (a.split) {
        config["split"] = a.split;
        auto [first, rest] = split(data, a.split);
        write_token_file(a.out, first);
        write_token_file(a.heldout_out, rest);
        manifest.add_output(a.out);
        manifest.add_output(a.heldout_out);
        out << first.sequences.size() << " + " << rest.sequences.size() << " sequences -> " << a.out << ", "
            << a.heldout_out << "\n";
    } else {
        write_token_file(a.out, data);
        manifest.add_output(a.out);
        out << data.sequences.size() << " sequences (hash " << hex64(data.hash()) << ") -> " << a.out << "\n";
    }
    manifest.set_config(config);
    manifest.write(a.out + ".manifest.json");
    return 0;
}

// ------------------------------------------------------------- expand-plan

struct ExpandArgs {
    std::size_t n = 0;
    int b = 4;
    int bp = 3;
    std::string strategy = "smallest";
    std::size_t d = 0;
    bool has_d = false;
    std::string out;
};

int cmd_expand_plan(const ExpandArgs& a, std::ostream& out) {
    if (a.n == 0) throw ArgumentError("n must be positive");
    const auto plan = plan_expansion(a.n, a.b, a.bp, parse_expansion_strategy(a.strategy));
    json j = plan.to_json();
    if (a.has_d) {
        const std::size_t target = a.n + a.d;
        const auto recipe = exact_recipe(target);
        j["check"] = {{"d", a.d},
                      {"target", target},
                      {"bitops_after", bitops(a.n, target, a.n, static_cast<std::uint64_t>(a.bp))},
                      {"within_budget", a.d <= plan.limit},
                      {"constructible", recipe.has_value()},
                      {"recipe", recipe ? json(recipe->to_string()) : json(nullptr)}};
    }
    if (!a.out.empty()) {
        Manifest manifest("expand-plan");
        manifest.set_config({{"n", a.n}, {"b", a.b}, {"bp", a.bp}, {"strategy", a.strategy}});
        j["manifest"] = manifest_name(a.out);
        write_json(a.out, j);
        manifest.add_output(a.out);
        manifest.write(a.out + ".manifest.json");
    }
    out << j.dump(2) << "\n";
    return 0;
}

// --------------------------------------------------------------------- gbs

struct GbsArgs {
    std::string model_config;
    std::string search_config;
    std::string dataset;
    std::string heldout;
    std::size_t seq_len = 64;
    int bits = 4;
    double epsilon = 0.01;
    std::string start_mode = "fp16_start";
    std::size_t max_iterations = 200;
    bool rotate = false;
    bool expand = false;
    bool no_kv_cache = false;
    std::size_t kv_group = 128;
    unsigned threads = 1;
    std::string out_dir;
    std::string resume;
};

// Effective settings of a run, stored in run.json so --resume needs only the
// directory.
json gbs_settings(const GbsArgs& a, const CLI::App& sub) {
    GbsConfig search;
    if (!a.search_config.empty()) search = GbsConfig::from_json(load_json(a.search_config));
    if (sub.count("--bits") || a.search_config.empty()) search.bits = a.bits;
    if (sub.count("--epsilon") || a.search_config.empty()) search.epsilon = a.epsilon;
    if (sub.count("--start-mode") || a.search_config.empty()) search.start_mode = parse_start_mode(a.start_mode);
    if (sub.count("--max-iterations") || a.search_config.empty()) search.max_iterations = a.max_iterations;
    const auto model = ModelConfig::from_json(load_json(a.model_config));
    model.validate();
    search.validate(7 * model.layers + 1);
    return {{"model", model.to_json()},
            {"search", search.to_json()},
            {"dataset", fs::absolute(a.dataset).string()},
            {"heldout", a.heldout.empty() ? json(nullptr) : json(fs::absolute(a.heldout).string())},
            {"seq_len", a.seq_len},
            {"rotate", a.rotate},
            {"expand", a.expand},
            {"kv_cache", !a.no_kv_cache},
            {"kv_group", a.kv_group}};
}

ProjectionGraph prepare_model(const json& run, int bits) {
    auto model = build_toy_model(ModelConfig::from_json(run.at("model")));
    if (!run.at("rotate").get<bool>()) return model;
    if (run.at("expand").get<bool>() && !exact_recipe(model.model_dim)) {
        model = expand_model(model, plan_expansion(model.model_dim, bits, bits).target());
    }
    return fuse_rotations(model);
}

void write_trace_csv(const fs::path& path, const GbsResult& r, const ProjectionGraph& model) {
    std::ostringstream csv;
    csv << "projection,name,step,ratio,ppl\n" << std::setprecision(17);
    for (const auto& t : r.traces) {
        for (std::size_t s = 0; s < t.points.size(); ++s) {
            csv << t.projection << ',' << model.projections[t.projection].name << ',' << s << ','
                << t.points[s].ratio << ',' << t.points[s].value << '\n';
        }
    }
    atomic_write(path, csv.str());
}

int execute_gbs(const json& run, const fs::path& dir, unsigned threads, bool resumed, std::ostream& out) {
    Manifest manifest(resumed ? "gbs --resume" : "gbs");
    manifest.set_config(run);
    GbsConfig search;
    try {
        search = GbsConfig::from_json(run.at("search"));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad run settings: ") + e.what());
    }
    const auto model = prepare_model(run, search.bits);
    manifest.add_seed("model", model.config.seed);

    const std::size_t seq_len = run.at("seq_len").get<std::size_t>();
    const EvalDataset train = read_token_file(run.at("dataset").get<std::string>(), seq_len);
    manifest.add_input(run.at("dataset").get<std::string>());
    std::optional<EvalDataset> heldout;
    if (!run.at("heldout").is_null()) {
        heldout = read_token_file(run.at("heldout").get<std::string>(), seq_len);
        manifest.add_input(run.at("heldout").get<std::string>());
    }

    EvalOptions opts;
    opts.kv_cache = run.at("kv_cache").get<bool>();
    opts.kv_group = run.at("kv_group").get<std::size_t>();
    opts.threads = threads;

    const fs::path checkpoint_path = dir / "checkpoint.json";
    auto save = [&](const GbsResult& r) {
        auto j = r.to_json();
        j["manifest"] = "manifest.json";
        write_json(checkpoint_path, j);
    };

    ModelObjective objective(model, train, search.bits, opts);
    GbsResult result;
    if (resumed && fs::exists(checkpoint_path)) {
        const auto partial = GbsResult::from_json(load_json(checkpoint_path));
        result = gbs_resume(partial, objective, search, save);
    } else {
        result = gbs_run(objective, search, save);
    }
    save(result);
    gbs_finalize(result, model, train, heldout ? &*heldout : nullptr, search.bits, opts);

    const std::vector<std::optional<double>> ones(model.size(), 1.0);
    json baselines = {{"train_fp", evaluate_clips(model, train, std::vector<std::optional<double>>(model.size()),
                                                  search.bits, opts)
                                       .ppl},
                      {"train_all_ones", evaluate_clips(model, train, ones, search.bits, opts).ppl}};
    if (heldout) {
        baselines["heldout_fp"] =
            evaluate_clips(model, *heldout, std::vector<std::optional<double>>(model.size()), search.bits, opts).ppl;
        baselines["heldout_all_ones"] = evaluate_clips(model, *heldout, ones, search.bits, opts).ppl;
    }
    std::vector<std::string> names;
    for (std::size_t i : result.order) names.push_back(model.projections[i].name);

    json j = result.to_json();
    j["projection_names"] = names;
    j["rotation"] = model.rotation == RotationState::fused ? "fused" : "none";
    j["model_dim"] = model.model_dim;
    j["baselines"] = baselines;
    j["manifest"] = "manifest.json";
    write_json(dir / "result.json", j);
    write_trace_csv(dir / "trace.csv", result, model);
    for (const char* f : {"run.json", "checkpoint.json", "result.json", "trace.csv"}) manifest.add_output(dir / f);
    manifest.write(dir / "manifest.json");

    out << "train ppl " << number(*result.train_ppl) << " (all-ones " << number(baselines["train_all_ones"])
        << ")";
    if (heldout) {
        out << ", held-out ppl " << number(*result.heldout_ppl) << " (all-ones "
            << number(baselines["heldout_all_ones"]) << ")";
    }
    out << " -> " << dir.string() << "\n";
    return 0;
}

int cmd_gbs(const GbsArgs& a, const CLI::App& sub, std::ostream& out) {
    if (!a.resume.empty()) {
        const fs::path dir = a.resume;
        return execute_gbs(load_json(dir / "run.json"), dir, a.threads, true, out);
    }
    if (a.model_config.empty() || a.dataset.empty() || a.out_dir.empty()) {
        throw ArgumentError("gbs needs --model-config, --dataset and --out-dir (or --resume DIR)");
    }
    const fs::path dir = a.out_dir;
    if (fs::exists(dir / "checkpoint.json") || fs::exists(dir / "result.json")) {
        throw ArgumentError("'" + dir.string() + "' already holds a search; pass --resume to continue it");
    }
    const json run = gbs_settings(a, sub);
    fs::create_directories(dir);
    write_json(dir / "run.json", run);
    return execute_gbs(run, dir, a.threads, false, out);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Rotation-based low-bit quantization toolkit", "rotquant"};
    app.set_version_flag("--version", ROTQUANT_VERSION);
    app.require_subcommand(1);

    HadamardArgs had;
    auto* h = app.add_subcommand("hadamard", "Construct a Hadamard matrix and write it to a file");
    auto* h_order = h->add_option("--order", had.order, "Matrix order");
    auto* h_recipe = h->add_option("--recipe", had.recipe, "Construction recipe, e.g. kron(paley(11),sylvester(7))");
    h_order->excludes(h_recipe);
    h->add_option("--out", had.out, "Output path")->required();
    h->add_flag("--normalized", had.normalized, "Scale by 1/sqrt(n)");
    h->add_flag("--text", had.text, "Write whitespace-separated text instead of a tensor file");

    SweepArgs sw;
    auto* s = app.add_subcommand("outlier-sweep", "Max |x| after Hadamard and Haar rotations across dimensions");
    s->add_option("--dims", sw.dims, "Comma-separated dimensions")->delimiter(',');
    s->add_option("--peak", sw.peak, "Outlier magnitude c");
    s->add_option("--sigma", sw.sigma, "Noise standard deviation");
    s->add_option("--trials", sw.trials, "Haar samples per dimension");
    s->add_option("--seed", sw.seed, "Base seed");
    s->add_option("--out", sw.out, "CSV output path")->required();

    QuantizeArgs qa;
    auto* q = app.add_subcommand("quantize", "Quantize a tensor file");
    q->add_option("--in", qa.in, "Input tensor file")->required();
    q->add_option("--out", qa.out, "Output code tensor")->required();
    q->add_option("--dequant", qa.dequant, "Also write the dequantized tensor here");
    q->add_option("--bits", qa.bits, "Bit width");
    q->add_option("--clip", qa.clip, "Clipping ratio in (0, 1]");
    q->add_option("--scheme", qa.scheme, "symmetric or asymmetric");
    q->add_option("--granularity", qa.granularity, "per_tensor or per_token (symmetric only)");
    q->add_option("--group-size", qa.group_size, "Group size along the last axis (asymmetric only)");
    q->add_option("--level-formula", qa.level_formula, "full_range (2^b - 1) or signed (2^(b-1) - 1)");

    DatasetArgs da;
    auto* d = app.add_subcommand("dataset", "Write a token file sampled from a toy model or a Markov chain");
    auto* d_model = d->add_option("--model-config", da.model_config, "Model config JSON to sample from");
    auto* d_markov = d->add_flag("--markov", da.markov, "Sample a random Markov chain instead");
    d_model->excludes(d_markov);
    d->add_option("--vocab", da.vocab, "Vocabulary size (Markov only)");
    d->add_option("--sharpness", da.sharpness, "Transition sharpness (Markov only)");
    d->add_option("--seq-len", da.seq_len, "Tokens per sequence");
    d->add_option("--sequences", da.sequences, "Number of sequences");
    d->add_option("--seed", da.seed, "Sampling seed");
    d->add_option("--temperature", da.temperature, "Sampling temperature (model only)");
    auto* d_split = d->add_option("--split", da.split, "Write the first N sequences to --out, the rest to --heldout-out");
    auto* d_held = d->add_option("--heldout-out", da.heldout_out, "Held-out token file");
    d_split->needs(d_held);
    d_held->needs(d_split);
    d->add_option("--out", da.out, "Token file path")->required();

    ExpandArgs ea;
    auto* e = app.add_subcommand("expand-plan", "Plan a zero-pad expansion to a constructible Hadamard order");
    e->add_option("--n", ea.n, "Current dimension")->required();
    e->add_option("--b", ea.b, "Bits before expansion");
    e->add_option("--bp", ea.bp, "Bits after expansion");
    e->add_option("--strategy", ea.strategy, "smallest or budget_max");
    auto* e_d = e->add_option("--d", ea.d, "Also check this expansion width against the budget");
    e->add_option("--out", ea.out, "Write the plan JSON here");

    GbsArgs ga;
    auto* g = app.add_subcommand("gbs", "Gradual binary search for per-projection clipping ratios");
    auto* g_model = g->add_option("--model-config", ga.model_config, "Model config JSON");
    g->add_option("--search-config", ga.search_config, "Search config JSON (flags given explicitly override it)");
    auto* g_data = g->add_option("--dataset", ga.dataset, "Token file to search on");
    auto* g_held = g->add_option("--heldout", ga.heldout, "Held-out token file for the final report");
    g->add_option("--seq-len", ga.seq_len, "Sequence length used to cut token files");
    g->add_option("--bits", ga.bits, "Bit width");
    g->add_option("--epsilon", ga.epsilon, "Search interval tolerance");
    g->add_option("--start-mode", ga.start_mode, "fp16_start or quantized_start");
    g->add_option("--max-iterations", ga.max_iterations, "Per-projection iteration cap");
    auto* g_rot = g->add_flag("--rotate", ga.rotate, "Fuse Hadamard rotations before searching");
    auto* g_exp = g->add_flag("--expand", ga.expand, "Zero-pad the residual stream to a constructible order first");
    g_exp->needs(g_rot);
    g->add_flag("--no-kv-cache", ga.no_kv_cache, "Leave k/v activations unquantized beyond their projection");
    g->add_option("--kv-group", ga.kv_group, "KV-cache quantization group size");
    g->add_option("--threads", ga.threads, "Worker threads for evaluation");
    auto* g_out = g->add_option("--out-dir", ga.out_dir, "Output directory");
    auto* g_resume = g->add_option("--resume", ga.resume, "Continue the search stored in this directory");
    for (auto* o : {g_model, g_data, g_held, g_out, g_rot}) g_resume->excludes(o);

    std::vector<const char*> argv{"rotquant"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
        ea.has_d = e_d->count() > 0;
    } catch (const CLI::ParseError& ex) {
        const int code = app.exit(ex, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (h->parsed()) {
            if (!h_order->count() && !h_recipe->count()) throw ArgumentError("hadamard needs --order or --recipe");
            return cmd_hadamard(had, out);
        }
        if (s->parsed()) return cmd_outlier_sweep(sw, out);
        if (q->parsed()) return cmd_quantize(qa, out);
        if (d->parsed()) {
            if (!da.markov && da.model_config.empty()) throw ArgumentError("dataset needs --model-config or --markov");
            return cmd_dataset(da, out);
        }
        if (e->parsed()) return cmd_expand_plan(ea, out);
        if (g->parsed()) return cmd_gbs(ga, *g, out);
    } catch (const Error& ex) {
        err << "error: " << ex.what() << "\n";
        return ex.exit_code();
    } catch (const fs::filesystem_error& ex) {
        err << "error: " << ex.what() << "\n";
        return 3;
    } catch (const nlohmann::json::exception& ex) {
        err << "error: malformed settings: " << ex.what() << "\n";
        return 2;
    }
    return 2;
}

}  // namespace rotquant::cli
