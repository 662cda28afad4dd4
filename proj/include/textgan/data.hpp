#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "textgan/layers.hpp"
#include "textgan/tensor.hpp"

namespace textgan {

// Reserved token ids shared by every model and corpus.
constexpr int kPadId = 0;
constexpr int kBosId = 1;
constexpr int kEosId = 2;
constexpr int kUnkId = 3;
constexpr int kReservedTokens = 4;

// Token <-> id map with the four reserved ids up front. Regular ids are
// assigned by descending frequency, ties broken lexicographically.
class Vocabulary {
public:
    Vocabulary() = default;

    // Most frequent (max_size - 4) tokens are kept; everything else encodes
    // to unk. Lines are whitespace-tokenized and lowercased by the caller.
    static Vocabulary build(const std::vector<std::string>& lines, int max_size);
    // Synthetic vocabulary w4..w{size-1} used by oracle corpora.
    static Vocabulary synthetic(int size);
    // Rebuild from the non-reserved tokens in id order (checkpoint loading).
    static Vocabulary from_tokens(const std::vector<std::string>& regular_tokens);

    int size() const { return static_cast<int>(id_to_token_.size()); }
    bool is_synthetic() const { return synthetic_; }
    int token_id(const std::string& token) const;  // kUnkId when unseen
    const std::string& token(int id) const;

    // Content ids truncated to max_len-1 tokens, then eos appended.
    std::vector<int> encode(const std::string& sentence, int max_len) const;
    // Inverse: reserved ids stripped, decoding stops at eos/pad.
    std::string decode(const std::vector<int>& ids) const;

    const std::vector<std::string>& tokens() const { return id_to_token_; }

private:
    std::vector<std::string> id_to_token_;
    std::vector<std::pair<std::string, int>> sorted_lookup_;  // token -> id
    bool synthetic_ = false;

    void rebuild_lookup();
};

// Padded integer token matrix [b x L]; row i holds lengths[i] content tokens,
// then eos when there is room, then pad.
struct SequenceBatch {
    std::vector<int> tokens;   // row-major b x L
    std::vector<int> lengths;  // content lengths, eos excluded
    int batch = 0;
    int max_len = 0;

    static SequenceBatch empty(int max_len);
    static SequenceBatch from_rows(const std::vector<std::vector<int>>& content_rows, int max_len);

    int at(int row, int t) const { return tokens[static_cast<size_t>(row) * max_len + t]; }
    int& at(int row, int t) { return tokens[static_cast<size_t>(row) * max_len + t]; }
    int length(int row) const { return lengths[static_cast<size_t>(row)]; }
    // Content tokens of one row (no eos, no pad).
    std::vector<int> content_row(int row) const;
    SequenceBatch rows(const std::vector<int>& indices) const;
    SequenceBatch take(int begin, int count) const;

    // Checks the type invariants; throws ContractError/IndexError on violation.
    void validate(int vocab_size) const;
};

// Fixed random-parameter LSTM language model used as a synthetic data source.
// Same seed means identical parameters and identical sampled corpora.
struct OracleSpec {
    uint64_t seed = 1;
    int vocab_size = 5000;
    int seq_len = 20;
    int d_model = 32;
};

class Oracle {
public:
    explicit Oracle(const OracleSpec& spec);

    const OracleSpec& spec() const { return spec_; }

    // n sequences of exactly seq_len content tokens; reserved ids are never
    // emitted and no eos is produced.
    SequenceBatch generate(int n) const;

    // Mean per-sentence negative log-likelihood of the batch under the oracle's
    // reserved-masked next-token distribution.
    double nll(const SequenceBatch& batch) const;

private:
    std::vector<double> step_log_probs(const std::vector<int>& prefix) const;

    OracleSpec spec_;
    Tensor embedding_;
    layers::LstmParams lstm_;
    Tensor head_w_, head_b_;
};

struct EmbeddingLoadResult {
    Tensor table;          // [V x d]
    double coverage = 0.0; // in-file fraction of non-reserved vocabulary
    int loaded = 0;
};

// Text format: optional "count dim" header, then one entry per line:
// token followed by d decimal numbers. Tokens absent from the file are
// initialized N(0, 0.1^2) from rng; reserved rows are zero.
EmbeddingLoadResult load_embeddings(std::istream& in, const Vocabulary& vocab, int d, Rng& rng);
EmbeddingLoadResult load_embeddings_file(const std::string& path, const Vocabulary& vocab,
                                         int d, Rng& rng);

// Epoch-shuffled minibatch stream over a dataset; the final partial batch is
// included. skip() fast-forwards deterministically for run resumption.
class BatchIterator {
public:
    BatchIterator(const SequenceBatch& data, int batch_size, uint64_t seed);

    SequenceBatch next();
    void skip(int64_t batches);
    int batches_per_epoch() const;

private:
    void reshuffle();

    const SequenceBatch* data_;
    int batch_size_;
    Rng rng_;
    std::vector<int> order_;
    size_t cursor_ = 0;
};

// Reads a corpus file: UTF-8 text, one sentence per line, lowercased.
std::vector<std::string> read_corpus_lines(const std::string& path);

// Encodes lines with the vocabulary into a padded batch.
SequenceBatch encode_corpus(const Vocabulary& vocab, const std::vector<std::string>& lines,
                            int max_len);

}  // namespace textgan
