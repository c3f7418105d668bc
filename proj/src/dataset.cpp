#include "rotquant/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

#include "rotquant/error.hpp"
#include "rotquant/io.hpp"

namespace rotquant {

void EvalDataset::validate() const {
    if (vocab == 0) throw DataError("dataset vocabulary is empty");
    if (sequences.empty() || seq_len < 2) throw DataError("dataset needs at least one sequence of length >= 2");
    for (const auto& s : sequences) {
        if (s.size() != seq_len) throw DataError("dataset sequences must all have length " + std::to_string(seq_len));
        for (auto t : s) {
            if (t >= vocab) {
                throw DataError("token id " + std::to_string(t) + " is outside the vocabulary of " +
                                std::to_string(vocab));
            }
        }
    }
}

std::uint64_t EvalDataset::hash() const {
    Fnv1a h;
    h.update_value(static_cast<std::uint64_t>(vocab));
    h.update_value(static_cast<std::uint64_t>(seq_len));
    for (const auto& s : sequences) h.update(s.data(), s.size() * sizeof(std::uint32_t));
    return h.value();
}

Eigen::MatrixXd random_transitions(std::size_t vocab, double sharpness, std::uint64_t seed) {
    if (vocab == 0) throw ArgumentError("vocabulary must be non-empty");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    const auto v = static_cast<Eigen::Index>(vocab);
    Eigen::MatrixXd p(v, v);
    for (Eigen::Index r = 0; r < v; ++r) {
        for (Eigen::Index c = 0; c < v; ++c) p(r, c) = sharpness * normal(rng);
        const double top = p.row(r).maxCoeff();
        p.row(r) = (p.row(r).array() - top).exp();
        p.row(r) /= p.row(r).sum();
    }
    return p;
}

EvalDataset sample_markov(const Eigen::MatrixXd& transitions, std::size_t seq_len, std::size_t sequences,
                          std::uint64_t seed) {
    if (transitions.rows() == 0 || transitions.rows() != transitions.cols()) {
        throw ShapeError("transition matrix must be square and non-empty");
    }
    const auto vocab = static_cast<std::size_t>(transitions.rows());
    std::vector<std::vector<double>> cdf(vocab, std::vector<double>(vocab));
    for (std::size_t r = 0; r < vocab; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < vocab; ++c) {
            acc += transitions(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
            cdf[r][c] = acc;
        }
        if (!(std::abs(acc - 1.0) < 1e-9)) throw DataError("transition row " + std::to_string(r) + " does not sum to 1");
        cdf[r].back() = 1.0;
    }

    EvalDataset d;
    d.vocab = vocab;
    d.seq_len = seq_len;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t s = 0; s < sequences; ++s) {
        std::vector<std::uint32_t> seq(seq_len);
        std::uint32_t cur = static_cast<std::uint32_t>(rng() % vocab);
        for (std::size_t t = 0; t < seq_len; ++t) {
            seq[t] = cur;
            const double u = unit(rng);
            const auto& row = cdf[cur];
            cur = static_cast<std::uint32_t>(std::upper_bound(row.begin(), row.end(), u) - row.begin());
            cur = std::min<std::uint32_t>(cur, static_cast<std::uint32_t>(vocab - 1));
        }
        d.sequences.push_back(std::move(seq));
    }
    return d;
}

EvalDataset markov_corpus(std::size_t vocab, std::size_t seq_len, std::size_t sequences, std::uint64_t seed,
                          double sharpness) {
    return sample_markov(random_transitions(vocab, sharpness, seed), seq_len, sequences, seed ^ 0x5eedULL);
}

std::pair<EvalDataset, EvalDataset> split(const EvalDataset& d, std::size_t count) {
    if (count > d.sequences.size()) throw ArgumentError("split point beyond the dataset");
    EvalDataset a{d.vocab, d.seq_len, {d.sequences.begin(), d.sequences.begin() + static_cast<std::ptrdiff_t>(count)}};
    EvalDataset b{d.vocab, d.seq_len, {d.sequences.begin() + static_cast<std::ptrdiff_t>(count), d.sequences.end()}};
    return {std::move(a), std::move(b)};
}

void write_token_file(const std::filesystem::path& path, const EvalDataset& d) {
    std::string out = "TOKS";
    auto put = [&out](const auto& v) {
        char buf[sizeof v];
        std::memcpy(buf, &v, sizeof v);
        out.append(buf, sizeof v);
    };
    put(static_cast<std::uint32_t>(d.vocab));
    put(static_cast<std::uint64_t>(d.token_count()));
    for (const auto& s : d.sequences)
        for (std::uint32_t t : s) put(t);
    atomic_write(path, out);
}

EvalDataset read_token_file(const std::filesystem::path& path, std::size_t seq_len) {
    if (seq_len < 2) throw ArgumentError("sequence length must be at least 2");
    const std::string bytes = read_file(path);
    if (bytes.size() < 16 || bytes.compare(0, 4, "TOKS") != 0) {
        throw DataError("'" + path.string() + "' is not a token file (bad magic)");
    }
    std::uint32_t vocab;
    std::uint64_t count;
    std::memcpy(&vocab, bytes.data() + 4, 4);
    std::memcpy(&count, bytes.data() + 8, 8);
    if ((bytes.size() - 16) / 4 != count || (bytes.size() - 16) % 4 != 0) {
        throw DataError("token file payload does not match its header count");
    }
    EvalDataset d;
    d.vocab = vocab;
    d.seq_len = seq_len;
    const char* p = bytes.data() + 16;
    for (std::uint64_t start = 0; start + seq_len <= count; start += seq_len) {
        std::vector<std::uint32_t> seq(seq_len);
        std::memcpy(seq.data(), p + 4 * start, 4 * seq_len);
        d.sequences.push_back(std::move(seq));
    }
    d.validate();
    return d;
}

}  // namespace rotquant
