#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rotquant/error.hpp"
#include "rotquant/expansion.hpp"
#include "rotquant/gbs.hpp"
#include "rotquant/hadamard.hpp"
#include "rotquant/model.hpp"
#include "rotquant/quantizer.hpp"
#include "rotquant/random_rotation.hpp"

namespace py = pybind11;
using namespace rotquant;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

py::object to_python(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json from_python(const py::object& o) {
    return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

py::array_t<std::int8_t> matrix_array(const HadamardMatrix& h) {
    const auto n = static_cast<py::ssize_t>(h.order());
    py::array_t<std::int8_t> out({n, n});
    std::copy(h.entries().begin(), h.entries().end(), out.mutable_data());
    return out;
}

Tensor to_tensor(const DoubleArray& x) {
    Tensor t;
    for (py::ssize_t i = 0; i < x.ndim(); ++i) t.shape.push_back(static_cast<std::size_t>(x.shape(i)));
    t.values.assign(x.data(), x.data() + x.size());
    return t;
}

template <typename T>
py::array_t<T> make_array(const std::vector<std::size_t>& shape, const std::vector<T>& values) {
    py::array_t<T> out(std::vector<py::ssize_t>(shape.begin(), shape.end()));
    std::copy(values.begin(), values.end(), out.mutable_data());
    return out;
}

class ToyModel {
public:
    explicit ToyModel(const py::dict& config)
        : graph_(build_toy_model(ModelConfig::from_json(from_python(config)))) {}
    explicit ToyModel(ProjectionGraph g) : graph_(std::move(g)) {}

    ToyModel fused() const { return ToyModel(fuse_rotations(graph_)); }
    ToyModel expanded(std::size_t dim) const { return ToyModel(expand_model(graph_, dim)); }
    std::size_t size() const { return graph_.size(); }
    std::size_t model_dim() const { return graph_.model_dim; }
    std::vector<std::string> names() const {
        std::vector<std::string> n;
        for (const auto& p : graph_.projections) n.push_back(p.name);
        return n;
    }

    std::vector<std::vector<std::uint32_t>> corpus(std::size_t seq_len, std::size_t sequences, std::uint64_t seed) const {
        return model_corpus(graph_, seq_len, sequences, seed).sequences;
    }

    double perplexity(const std::vector<std::vector<std::uint32_t>>& sequences,
                      const std::optional<std::vector<std::optional<double>>>& clips, int bits) const {
        const auto data = dataset(sequences);
        const auto c = clips.value_or(std::vector<std::optional<double>>(graph_.size()));
        return evaluate_clips(graph_, data, c, bits).ppl;
    }

    py::object search(const std::vector<std::vector<std::uint32_t>>& sequences, int bits, double epsilon,
                      const std::string& start_mode) const {
        const auto data = dataset(sequences);
        ModelObjective objective(graph_, data, bits);
        GbsConfig cfg;
        cfg.bits = bits;
        cfg.epsilon = epsilon;
        cfg.start_mode = parse_start_mode(start_mode);
        auto r = gbs_run(objective, cfg);
        gbs_finalize(r, graph_, data, nullptr, bits);
        return to_python(r.to_json());
    }

private:
    EvalDataset dataset(const std::vector<std::vector<std::uint32_t>>& sequences) const {
        EvalDataset d;
        d.vocab = graph_.config.vocab;
        d.seq_len = sequences.empty() ? 0 : sequences.front().size();
        d.sequences = sequences;
        return d;
    }

    ProjectionGraph graph_;
};

}  // namespace

PYBIND11_MODULE(_rotquant, m) {
    m.doc() = "Hadamard rotations, clipping-ratio search and low-bit quantization";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ArgumentError>(m, "ArgumentError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<DataError>(m, "DataError", base.ptr());
    py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
    py::register_exception<SizeError>(m, "SizeError", base.ptr());
    py::register_exception<IoError>(m, "IoError", base.ptr());
    py::register_exception<UnsupportedOrderError>(m, "UnsupportedOrderError", base.ptr());
    py::register_exception<ConstructionError>(m, "ConstructionError", base.ptr());
    py::register_exception<IntegrityError>(m, "IntegrityError", base.ptr());

    m.def("hadamard", [](const std::string& recipe) { return matrix_array(build(ConstructionRecipe::parse(recipe))); },
          py::arg("recipe"), "Integer +/-1 matrix for a recipe such as 'kron(paley(11),sylvester(7))'.");
    m.def(
        "exact_recipe",
        [](std::size_t n) -> std::optional<std::string> {
            auto r = exact_recipe(n);
            return r ? std::optional<std::string>(r->to_string()) : std::nullopt;
        },
        py::arg("order"));
    m.def(
        "find_constructible_order",
        [](std::size_t n) {
            auto r = find_constructible_order(n);
            return py::make_tuple(r.order(), r.to_string());
        },
        py::arg("n"));
    m.def(
        "fht",
        [](const DoubleArray& x, bool normalized) {
            if (x.ndim() != 1) throw ShapeError("fht expects a 1-D array");
            auto y = fht(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())), normalized);
            return make_array<double>({y.size()}, y);
        },
        py::arg("x"), py::arg("normalized") = false);

    m.def("sample_orthogonal", [](std::size_t n, std::uint64_t seed) { return Eigen::MatrixXd(sample_orthogonal(n, seed)); },
          py::arg("n"), py::arg("seed"));
    m.def(
        "max_abs_after",
        [](const std::string& transform, std::size_t n, double peak, double sigma, std::uint64_t seed,
           std::uint64_t rotation_seed) {
            Transform t;
            if (transform == "hadamard") {
                t = Transform::hadamard;
            } else if (transform == "rotation") {
                t = Transform::rotation;
            } else {
                throw ArgumentError("transform must be 'hadamard' or 'rotation'");
            }
            return max_abs_after(t, OutlierVector{n, peak, sigma, seed}, rotation_seed);
        },
        py::arg("transform"), py::arg("n"), py::arg("peak") = 200.0, py::arg("sigma") = 0.0, py::arg("seed") = 0,
        py::arg("rotation_seed") = 0);
    m.def(
        "reduction_sweep",
        [](const std::vector<std::size_t>& dims, double peak, double sigma, std::size_t trials, std::uint64_t seed) {
            py::list rows;
            for (const auto& r : reduction_sweep(dims, peak, sigma, trials, seed)) {
                py::dict d;
                d["n"] = r.n;
                d["theory_h"] = r.theory_hadamard;
                d["theory_q"] = r.theory_rotation;
                d["emp_h"] = r.empirical_max_hadamard;
                d["emp_q_mean"] = r.empirical_max_rotation;
                d["emp_q_std"] = r.empirical_rotation_std;
                d["trials"] = r.trials;
                rows.append(d);
            }
            return rows;
        },
        py::arg("dims"), py::arg("peak") = 200.0, py::arg("sigma") = 0.1, py::arg("trials") = 100, py::arg("seed") = 0);

    m.def(
        "quantize",
        [](const DoubleArray& x, int bits, double clip_ratio, const std::string& scheme, const std::string& granularity,
           std::optional<std::size_t> group_size, const std::string& level_formula) {
            QuantizerSpec spec;
            spec.bits = bits;
            spec.clip_ratio = clip_ratio;
            spec.scheme = parse_scheme(scheme);
            spec.granularity = parse_granularity(granularity);
            spec.group_size = group_size;
            spec.level_formula = parse_level_formula(level_formula);
            const Tensor t = to_tensor(x);
            const auto q = quantize(t, spec);
            const auto err = quantization_error(t, q);
            const auto deq = dequantize(q);
            py::dict out;
            out["codes"] = make_array(q.shape, q.codes);
            out["dequantized"] = make_array(q.shape, deq.values);
            out["scales"] = q.scales;
            out["zero_points"] = q.zero_points;
            out["max_abs_err"] = err.max_abs_err;
            out["mse"] = err.mse;
            return out;
        },
        py::arg("x"), py::arg("bits") = 4, py::arg("clip_ratio") = 1.0, py::arg("scheme") = "symmetric",
        py::arg("granularity") = "per_token", py::arg("group_size") = py::none(), py::arg("level_formula") = "full_range");

    m.def("bitops", &bitops, py::arg("m"), py::arg("n"), py::arg("p"), py::arg("bits"));
    m.def("expansion_limit", &expansion_limit, py::arg("n"), py::arg("bits"), py::arg("bits_after"));
    m.def(
        "plan_expansion",
        [](std::size_t n, int b, int b_after, const std::string& strategy) {
            return to_python(plan_expansion(n, b, b_after, parse_expansion_strategy(strategy)).to_json());
        },
        py::arg("n"), py::arg("bits"), py::arg("bits_after"), py::arg("strategy") = "smallest");
    m.def(
        "expand_and_fuse",
        [](const Eigen::MatrixXd& w, const std::string& recipe, const std::string& side, bool normalized) {
            Side s;
            if (side == "input") {
                s = Side::input;
            } else if (side == "output") {
                s = Side::output;
            } else {
                throw ArgumentError("side must be 'input' or 'output'");
            }
            return Eigen::MatrixXd(expand_and_fuse(w, build(ConstructionRecipe::parse(recipe)), s, normalized));
        },
        py::arg("w"), py::arg("recipe"), py::arg("side") = "input", py::arg("normalized") = true);

    m.def(
        "search_synthetic",
        [](const std::vector<double>& targets, double epsilon) {
            SyntheticObjective objective(targets);
            GbsConfig cfg;
            cfg.epsilon = epsilon;
            return to_python(gbs_run(objective, cfg).to_json());
        },
        py::arg("targets"), py::arg("epsilon") = 0.01,
        "Search on f(x) = (x - target)^2 + 1 for each projection.");

    py::class_<ToyModel>(m, "ToyModel")
        .def(py::init<const py::dict&>(), py::arg("config"))
        .def("fused", &ToyModel::fused)
        .def("expanded", &ToyModel::expanded, py::arg("dim"))
        .def_property_readonly("size", &ToyModel::size)
        .def_property_readonly("model_dim", &ToyModel::model_dim)
        .def_property_readonly("names", &ToyModel::names)
        .def("corpus", &ToyModel::corpus, py::arg("seq_len"), py::arg("sequences"), py::arg("seed"))
        .def("perplexity", &ToyModel::perplexity, py::arg("sequences"), py::arg("clips") = py::none(),
             py::arg("bits") = 4)
        .def("search", &ToyModel::search, py::arg("sequences"), py::arg("bits") = 4, py::arg("epsilon") = 0.01,
             py::arg("start_mode") = "fp16_start");
}
