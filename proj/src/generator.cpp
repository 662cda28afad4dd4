#include "textgan/generator.hpp"

#include <algorithm>
#include <cmath>

namespace textgan {

const char* variant_name(VariantTag tag) {
    switch (tag) {
        case VariantTag::Lstm: return "lstm";
        case VariantTag::EncoderOnly: return "encoder-only";
        case VariantTag::EncDecEmptyTarget: return "encdec-empty";
        case VariantTag::EncDecShiftedTarget: return "encdec-shifted";
    }
    return "?";
}

VariantTag variant_from_name(const std::string& name) {
    if (name == "lstm") return VariantTag::Lstm;
    if (name == "encoder-only") return VariantTag::EncoderOnly;
    if (name == "encdec-empty") return VariantTag::EncDecEmptyTarget;
    if (name == "encdec-shifted") return VariantTag::EncDecShiftedTarget;
    throw ConfigError("unknown generator variant: " + name);
}

bool variant_is_causal(VariantTag tag) {
    return tag == VariantTag::Lstm || tag == VariantTag::EncDecShiftedTarget;
}

bool variant_samples_parallel(VariantTag tag) {
    return tag == VariantTag::EncoderOnly || tag == VariantTag::EncDecEmptyTarget;
}

bool variant_has_encoder(VariantTag tag) { return tag != VariantTag::Lstm; }

bool SampleOutput::all_empty() const {
    for (int len : tokens.lengths) {
        if (len > 0) return false;
    }
    return true;
}

namespace {

// Prediction slots of one row: content tokens plus the eos when there is room.
std::vector<int> teacher_slot_tokens(const SequenceBatch& b, int row) {
    const int eff = std::min(b.length(row) + 1, b.max_len);
    std::vector<int> out(static_cast<size_t>(eff));
    for (int t = 0; t < eff; ++t) out[static_cast<size_t>(t)] = b.at(row, t);
    return out;
}

// bos-prefixed, right-shifted input stream for the teacher slots.
std::vector<int> shifted_stream(const std::vector<int>& slots) {
    std::vector<int> x(slots.size());
    x[0] = kBosId;
    for (size_t t = 1; t < slots.size(); ++t) x[t] = slots[t - 1];
    return x;
}

struct Draw {
    int token = 0;
    float log_prob = 0.0f;
};

// Draws from the softmax of one logits row with pad/bos excluded from the
// candidate set; the recorded log probability is taken from the full unmasked
// distribution so that the scoring path reproduces it exactly.
Draw draw_token(const float* logits, int vocab, Rng& rng, bool argmax_mode) {
    double mx = logits[0];
    for (int i = 1; i < vocab; ++i) mx = std::max(mx, static_cast<double>(logits[i]));
    double denom = 0.0;
    for (int i = 0; i < vocab; ++i) denom += std::exp(static_cast<double>(logits[i]) - mx);
    const double lse = mx + std::log(denom);

    Draw d;
    if (argmax_mode) {
        int best = kEosId;
        for (int i = kEosId; i < vocab; ++i) {
            if (logits[i] > logits[best]) best = i;
        }
        d.token = best;
    } else {
        std::vector<float> probs(static_cast<size_t>(vocab), 0.0f);
        for (int i = kEosId; i < vocab; ++i) {
            probs[static_cast<size_t>(i)] =
                static_cast<float>(std::exp(static_cast<double>(logits[i]) - lse));
        }
        d.token = ops::multinomial_sample(probs, rng);
    }
    d.log_prob = static_cast<float>(static_cast<double>(logits[d.token]) - lse);
    return d;
}

}  // namespace

Generator::Generator(VariantTag tag, const ModelDims& dims, uint64_t init_seed)
    : tag_(tag), dims_(dims) {
    dims_.validate();
    Rng rng = Rng::derive(init_seed, "generator-init");

    embedding_ = Tensor::randn({dims_.vocab_size, dims_.d_model}, rng, 0.1f, true);
    for (int i = 0; i < dims_.d_model; ++i) embedding_.at(kPadId, i) = 0.0f;
    pe_ = layers::positional_encoding(dims_.max_len, dims_.d_model);
    // Small head init keeps the untrained model near the uniform distribution.
    head_w_ = Tensor::randn({dims_.d_model, dims_.vocab_size}, rng, 0.02f, true);
    head_b_ = Tensor::zeros({dims_.vocab_size}, true);

    if (variant_has_encoder(tag_)) {
        for (int l = 0; l < dims_.n_layers; ++l) {
            encoder_.push_back(layers::EncoderLayerParams::init(dims_, rng));
        }
    }
    if (tag_ == VariantTag::EncDecEmptyTarget || tag_ == VariantTag::EncDecShiftedTarget) {
        for (int l = 0; l < dims_.n_layers; ++l) {
            decoder_.push_back(layers::DecoderLayerParams::init(dims_, rng));
        }
    }
    if (tag_ == VariantTag::Lstm) {
        lstm_ = layers::LstmParams::init(dims_.d_model, dims_.d_model, rng);
    }
}

NamedTensors Generator::parameters() const {
    NamedTensors out;
    out.emplace_back("embedding", embedding_);
    for (size_t l = 0; l < encoder_.size(); ++l) {
        encoder_[l].collect("enc." + std::to_string(l), out);
    }
    for (size_t l = 0; l < decoder_.size(); ++l) {
        decoder_[l].collect("dec." + std::to_string(l), out);
    }
    if (tag_ == VariantTag::Lstm) lstm_.collect("lstm", out);
    out.emplace_back("head.w", head_w_);
    out.emplace_back("head.b", head_b_);
    return out;
}

void Generator::set_embedding_table(const Tensor& table) {
    if (table.shape() != embedding_.shape()) {
        throw ShapeError("set_embedding_table: " + shape_str(table.shape()) + " vs " +
                         shape_str(embedding_.shape()));
    }
    embedding_.data() = table.data();
}

Tensor Generator::head(const Tensor& h) const {
    return ops::add_bias(ops::matmul(h, head_w_), head_b_);
}

Tensor Generator::embed_with_positions(const std::vector<int>& ids, const LayerRuntime& rt) const {
    (void)rt;
    Tensor emb = ops::embedding_rows(embedding_, ids);
    Tensor pos = ops::slice(pe_, 0, 0, static_cast<int>(ids.size()));
    return ops::add(emb, pos);
}

Tensor Generator::encode_memory(const SequenceBatch& source, int row, const LayerRuntime& rt) const {
    const std::vector<int> src = teacher_slot_tokens(source, row);
    Tensor x = embed_with_positions(src, rt);
    const AttentionMask mask = AttentionMask::full(static_cast<int>(src.size()),
                                                   static_cast<int>(src.size()));
    for (const auto& layer : encoder_) {
        x = layers::transformer_encoder_layer(x, mask, layer, dims_.n_heads, rt);
    }
    return x;
}

Tensor Generator::sentence_logits(const SequenceBatch& source, int source_row,
                                  const std::vector<int>& teacher_slots,
                                  const LayerRuntime& rt) const {
    const int eff = static_cast<int>(teacher_slots.size());
    switch (tag_) {
        case VariantTag::Lstm: {
            const std::vector<int> stream = shifted_stream(teacher_slots);
            layers::LstmState state = layers::LstmState::zero(dims_.d_model);
            std::vector<Tensor> rows;
            rows.reserve(static_cast<size_t>(eff));
            for (int t = 0; t < eff; ++t) {
                Tensor x_t = ops::embedding_rows(embedding_, {stream[static_cast<size_t>(t)]});
                state = layers::lstm_step(x_t, state, lstm_);
                rows.push_back(state.h);
            }
            return head(ops::concat(rows, 0));
        }
        case VariantTag::EncoderOnly: {
            Tensor x = embed_with_positions(shifted_stream(teacher_slots), rt);
            const AttentionMask mask = AttentionMask::full(eff, eff);
            for (const auto& layer : encoder_) {
                x = layers::transformer_encoder_layer(x, mask, layer, dims_.n_heads, rt);
            }
            return head(x);
        }
        case VariantTag::EncDecEmptyTarget: {
            Tensor memory = encode_memory(source, source_row, rt);
            // The empty target: a zero embedding matrix carrying only positions.
            Tensor target = ops::slice(pe_, 0, 0, eff);
            const AttentionMask causal = AttentionMask::causal(eff);
            const AttentionMask mem_mask = AttentionMask::full(eff, memory.dim(0));
            Tensor h = target;
            for (const auto& layer : decoder_) {
                h = layers::transformer_decoder_layer(h, memory, causal, mem_mask, layer,
                                                      dims_.n_heads, rt);
            }
            return head(h);
        }
        case VariantTag::EncDecShiftedTarget: {
            Tensor memory = encode_memory(source, source_row, rt);
            Tensor target = embed_with_positions(shifted_stream(teacher_slots), rt);
            const AttentionMask causal = AttentionMask::causal(eff);
            const AttentionMask mem_mask = AttentionMask::full(eff, memory.dim(0));
            Tensor h = target;
            for (const auto& layer : decoder_) {
                h = layers::transformer_decoder_layer(h, memory, causal, mem_mask, layer,
                                                      dims_.n_heads, rt);
            }
            return head(h);
        }
    }
    throw ContractError("sentence_logits: unreachable");
}

Tensor Generator::forward_teacher(const SequenceBatch& source, const SequenceBatch& teacher,
                                  const LayerRuntime& rt) const {
    if (teacher.batch < 1) throw ContractError("forward_teacher: empty batch");
    if (variant_has_encoder(tag_) && tag_ != VariantTag::EncoderOnly &&
        source.batch != teacher.batch) {
        throw ContractError("forward_teacher: source/teacher batch mismatch");
    }
    const int L = teacher.max_len;
    std::vector<Tensor> parts;
    parts.reserve(static_cast<size_t>(teacher.batch) * 2);
    for (int r = 0; r < teacher.batch; ++r) {
        const std::vector<int> slots = teacher_slot_tokens(teacher, r);
        Tensor logits = sentence_logits(source, r, slots, rt);
        parts.push_back(logits);
        const int eff = static_cast<int>(slots.size());
        if (eff < L) parts.push_back(Tensor::zeros({L - eff, dims_.vocab_size}));
    }
    Tensor flat = ops::concat(parts, 0);
    return ops::reshape(flat, {teacher.batch, L, dims_.vocab_size});
}

Tensor Generator::forward_mle(const SequenceBatch& batch, const LayerRuntime& rt) const {
    return forward_teacher(batch, batch, rt);
}

Tensor Generator::log_prob_with_source(const SequenceBatch& seqs,
                                       const SequenceBatch& source) const {
    if (seqs.batch < 1) throw ContractError("log_prob: empty batch");
    if (variant_has_encoder(tag_) && source.batch != seqs.batch) {
        throw ContractError("log_prob_with_source: source/sequence batch mismatch");
    }
    const int L = seqs.max_len;
    const LayerRuntime rt{};  // eval mode
    std::vector<Tensor> parts;
    parts.reserve(static_cast<size_t>(seqs.batch) * 2);
    for (int r = 0; r < seqs.batch; ++r) {
        const std::vector<int> slots = teacher_slot_tokens(seqs, r);
        const int eff = static_cast<int>(slots.size());
        Tensor lp_row;
        if (tag_ == VariantTag::EncoderOnly) {
            // The encoder-only stream is the source itself; scoring rebuilds
            // the generation-time distribution over the full source length and
            // gathers the scored tokens on its leading rows.
            const std::vector<int> src_slots = teacher_slot_tokens(source, r);
            if (eff > static_cast<int>(src_slots.size())) {
                throw ContractError("log_prob_with_source: source row shorter than sequence");
            }
            Tensor logits = sentence_logits(source, r, src_slots, rt);
            lp_row = ops::log_softmax_gather(ops::slice(logits, 0, 0, eff), slots);
        } else {
            Tensor logits = sentence_logits(source, r, slots, rt);
            lp_row = ops::log_softmax_gather(logits, slots);
        }
        parts.push_back(lp_row);
        if (eff < L) parts.push_back(Tensor::zeros({L - eff}));
    }
    return ops::reshape(ops::concat(parts, 0), {seqs.batch, L});
}

Tensor Generator::log_prob(const SequenceBatch& seqs) const {
    return log_prob_with_source(seqs, seqs);
}

SequenceBatch Generator::draw_noise(int n, Rng& rng) const {
    std::vector<std::vector<int>> rows;
    rows.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        std::vector<int> row(static_cast<size_t>(dims_.max_len));
        for (int& id : row) id = rng.uniform_int(kReservedTokens, dims_.vocab_size);
        rows.push_back(std::move(row));
    }
    return SequenceBatch::from_rows(rows, dims_.max_len);
}

SampleOutput sample_parallel(const Generator& g, int n, Rng& rng, const SamplerOptions& opts) {
    if (!variant_samples_parallel(g.tag())) {
        throw ContractError(std::string("sample_parallel: variant '") + variant_name(g.tag()) +
                            "' is causal; use sample_autoregressive");
    }
    if (n < 1) throw ContractError("sample_parallel: n must be >= 1");
    const int L = g.dims().max_len;
    const int V = g.dims().vocab_size;
    const LayerRuntime rt{};

    SampleOutput out;
    out.source = g.draw_noise(n, rng);
    out.per_token_log_prob = Tensor::zeros({n, L});
    std::vector<std::vector<int>> content_rows;
    content_rows.reserve(static_cast<size_t>(n));
    for (int r = 0; r < n; ++r) {
        const std::vector<int> slots = teacher_slot_tokens(out.source, r);
        Tensor logits = g.sentence_logits(out.source, r, slots, rt);
        std::vector<int> drawn(static_cast<size_t>(L));
        std::vector<float> lps(static_cast<size_t>(L));
        for (int t = 0; t < L; ++t) {
            const Draw d = draw_token(logits.data().data() + static_cast<size_t>(t) * V, V, rng,
                                      opts.argmax);
            drawn[static_cast<size_t>(t)] = d.token;
            lps[static_cast<size_t>(t)] = d.log_prob;
        }
        int len = L;
        for (int t = 0; t < L; ++t) {
            if (drawn[static_cast<size_t>(t)] == kEosId) {
                len = t;
                break;
            }
        }
        content_rows.emplace_back(drawn.begin(), drawn.begin() + len);
        for (int t = 0; t < len; ++t) out.per_token_log_prob.at(r, t) = lps[static_cast<size_t>(t)];
    }
    out.tokens = SequenceBatch::from_rows(content_rows, L);
    return out;
}

SampleOutput sample_autoregressive(const Generator& g, int n, Rng& rng,
                                   const SamplerOptions& opts) {
    if (variant_samples_parallel(g.tag())) {
        throw ContractError(std::string("sample_autoregressive: variant '") +
                            variant_name(g.tag()) + "' samples in parallel; use sample_parallel");
    }
    if (n < 1) throw ContractError("sample_autoregressive: n must be >= 1");
    const int L = g.dims().max_len;
    const int V = g.dims().vocab_size;
    const LayerRuntime rt{};

    SampleOutput out;
    if (variant_has_encoder(g.tag())) out.source = g.draw_noise(n, rng);
    out.per_token_log_prob = Tensor::zeros({n, L});
    std::vector<std::vector<int>> content_rows;
    content_rows.reserve(static_cast<size_t>(n));

    for (int r = 0; r < n; ++r) {
        std::vector<int> generated;
        if (g.tag() == VariantTag::Lstm) {
            layers::LstmState state = layers::LstmState::zero(g.dims().d_model);
            int prev = kBosId;
            for (int t = 0; t < L; ++t) {
                Tensor x_t = ops::embedding_rows(g.embedding_, {prev});
                state = layers::lstm_step(x_t, state, g.lstm_);
                Tensor logits = g.head(state.h);
                const Draw d = draw_token(logits.data().data(), V, rng, opts.argmax);
                if (d.token == kEosId) break;
                out.per_token_log_prob.at(r, t) = d.log_prob;
                generated.push_back(d.token);
                prev = d.token;
            }
        } else {
            Tensor memory = g.encode_memory(out.source, r, rt);
            for (int t = 0; t < L; ++t) {
                // Decoder pass over bos + everything generated so far.
                std::vector<int> stream(generated.size() + 1);
                stream[0] = kBosId;
                std::copy(generated.begin(), generated.end(), stream.begin() + 1);
                Tensor target = g.embed_with_positions(stream, rt);
                const int cur = static_cast<int>(stream.size());
                const AttentionMask causal = AttentionMask::causal(cur);
                const AttentionMask mem_mask = AttentionMask::full(cur, memory.dim(0));
                Tensor h = target;
                for (const auto& layer : g.decoder_) {
                    h = layers::transformer_decoder_layer(h, memory, causal, mem_mask, layer,
                                                          g.dims().n_heads, rt);
                }
                Tensor logits = g.head(ops::slice(h, 0, cur - 1, cur));
                const Draw d = draw_token(logits.data().data(), V, rng, opts.argmax);
                if (d.token == kEosId) break;
                out.per_token_log_prob.at(r, t) = d.log_prob;
                generated.push_back(d.token);
            }
        }
        content_rows.push_back(std::move(generated));
    }
    out.tokens = SequenceBatch::from_rows(content_rows, L);
    return out;
}

SampleOutput sample(const Generator& g, int n, Rng& rng, const SamplerOptions& opts) {
    return variant_samples_parallel(g.tag()) ? sample_parallel(g, n, rng, opts)
                                             : sample_autoregressive(g, n, rng, opts);
}

}  // namespace textgan
