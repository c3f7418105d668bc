#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

namespace rotquant {

// Token sequences of equal length over a fixed vocabulary.
struct EvalDataset {
    std::size_t vocab = 0;
    std::size_t seq_len = 0;
    std::vector<std::vector<std::uint32_t>> sequences;

    std::size_t token_count() const { return sequences.size() * seq_len; }
    void validate() const;  // DataError on empty data or out-of-range ids
    std::uint64_t hash() const;
};

// Samples sequences from a row-stochastic transition matrix (vocab x vocab);
// the first token of every sequence is uniform.
EvalDataset sample_markov(const Eigen::MatrixXd& transitions, std::size_t seq_len, std::size_t sequences,
                          std::uint64_t seed);

// Random chain: each row is softmax(sharpness * N(0, 1)) over the vocabulary.
Eigen::MatrixXd random_transitions(std::size_t vocab, double sharpness, std::uint64_t seed);

EvalDataset markov_corpus(std::size_t vocab, std::size_t seq_len, std::size_t sequences, std::uint64_t seed,
                          double sharpness = 2.0);

// Splits off the first `count` sequences.
std::pair<EvalDataset, EvalDataset> split(const EvalDataset& d, std::size_t count);

// Token file: "TOKS", u32 vocab, u64 count, u32 tokens, little-endian.
// Reading cuts the stream into seq_len chunks and drops the remainder.
void write_token_file(const std::filesystem::path& path, const EvalDataset& d);
EvalDataset read_token_file(const std::filesystem::path& path, std::size_t seq_len);

}  // namespace rotquant
