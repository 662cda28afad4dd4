#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "textgan/data.hpp"
#include "textgan/layers.hpp"
#include "textgan/tensor.hpp"

namespace textgan {

// The experiment axis: the LSTM baseline plus one tag per transformer drop-in
// variant. Lstm and EncDecShiftedTarget are causal; EncoderOnly is non-causal
// by construction; EncDecEmptyTarget decodes from a constant target.
enum class VariantTag {
    Lstm,
    EncoderOnly,
    EncDecEmptyTarget,
    EncDecShiftedTarget,
};

const char* variant_name(VariantTag tag);
VariantTag variant_from_name(const std::string& name);
bool variant_is_causal(VariantTag tag);
bool variant_samples_parallel(VariantTag tag);
bool variant_has_encoder(VariantTag tag);

struct SamplerOptions {
    // Diagnostic temperature->0 limit: deterministic argmax instead of
    // multinomial draws.
    bool argmax = false;
};

struct SampleOutput {
    SequenceBatch tokens;
    // [b x L]; log probability of each emitted content token under the full
    // unmasked softmax. Slots at or past the emitted eos are zero and carry no
    // weight downstream.
    Tensor per_token_log_prob;
    // Random-token latent consumed by the encoder of encoder-bearing variants;
    // batch == 0 for the LSTM.
    SequenceBatch source;

    int length(int row) const { return tokens.length(row); }
    bool all_empty() const;
};

class Generator {
public:
    Generator(VariantTag tag, const ModelDims& dims, uint64_t init_seed);

    VariantTag tag() const { return tag_; }
    const ModelDims& dims() const { return dims_; }

    // Stable-ordered parameter registry (shared handles, not copies).
    NamedTensors parameters() const;
    // Overwrites the token embedding table values (pretrained embeddings).
    void set_embedding_table(const Tensor& table);

    // Teacher-forced logits [b x L x V]; the slot at position t predicts
    // teacher token t given the variant's view of the prefix and source.
    //   Lstm              : unroll over bos + teacher shifted right
    //   EncoderOnly       : one unmasked encoder pass over the same stream
    //   EncDecEmptyTarget : encoder over source, decoder over the empty target
    //   EncDecShiftedTarget: encoder over source, causal decoder over
    //                        bos + teacher shifted right
    Tensor forward_teacher(const SequenceBatch& source, const SequenceBatch& teacher,
                           const LayerRuntime& rt = {}) const;
    // Standard training entry: source and teacher are the same real batch.
    Tensor forward_mle(const SequenceBatch& batch, const LayerRuntime& rt = {}) const;

    // Per-token log probabilities [b x L] of seqs on the scoring path, slots
    // past each row's content zeroed. Self-conditioned (source = seqs).
    Tensor log_prob(const SequenceBatch& seqs) const;
    // Scoring with an explicit encoder source (recorded sampling noise).
    Tensor log_prob_with_source(const SequenceBatch& seqs, const SequenceBatch& source) const;

private:
    friend SampleOutput sample_parallel(const Generator&, int, Rng&, const SamplerOptions&);
    friend SampleOutput sample_autoregressive(const Generator&, int, Rng&, const SamplerOptions&);

    // Logits [eff x V] for one teacher row; source_row indexes into source.
    Tensor sentence_logits(const SequenceBatch& source, int source_row,
                           const std::vector<int>& teacher_slots, const LayerRuntime& rt) const;
    Tensor encode_memory(const SequenceBatch& source, int row, const LayerRuntime& rt) const;
    Tensor embed_with_positions(const std::vector<int>& ids, const LayerRuntime& rt) const;
    Tensor head(const Tensor& h) const;
    SequenceBatch draw_noise(int n, Rng& rng) const;

    VariantTag tag_;
    ModelDims dims_;
    Tensor embedding_;  // [V x d_model]
    Tensor pe_;         // constant [max_len x d_model]
    Tensor head_w_, head_b_;
    std::vector<layers::EncoderLayerParams> encoder_;
    std::vector<layers::DecoderLayerParams> decoder_;
    layers::LstmParams lstm_;
};

// One forward pass over a noise source; every position drawn independently by
// multinomial sampling from its softmax row. Requires a parallel-sampling
// variant; causal variants must use sample_autoregressive.
SampleOutput sample_parallel(const Generator& g, int n, Rng& rng,
                             const SamplerOptions& opts = {});

// Left-to-right generation feeding previously drawn tokens back (LSTM state or
// decoder target prefix); stops at eos or max_len.
SampleOutput sample_autoregressive(const Generator& g, int n, Rng& rng,
                                   const SamplerOptions& opts = {});

// Dispatches on the variant's sampling regime.
SampleOutput sample(const Generator& g, int n, Rng& rng, const SamplerOptions& opts = {});

}  // namespace textgan
