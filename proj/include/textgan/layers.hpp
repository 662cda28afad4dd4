#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "textgan/tensor.hpp"

namespace textgan {

// Model geometry. d_head is decoupled from d_model: the configured default
// (4 heads of size 64 on a width-32 model) is dimensionally asymmetric on
// purpose, so every projection carries an explicit output side.
struct ModelDims {
    int d_model = 32;
    int n_layers = 2;
    int n_heads = 4;
    int d_head = 64;
    int d_ff = 128;
    int max_len = 20;
    int vocab_size = 0;

    void validate() const;
};

// Boolean attendability matrix [L_q x L_k]; true = the query may read the key.
class AttentionMask {
public:
    static AttentionMask full(int l_q, int l_k);
    static AttentionMask causal(int len);
    // Shared key validity across all query rows (padding masks).
    static AttentionMask key_padding(int l_q, const std::vector<uint8_t>& key_ok);

    int l_q() const { return l_q_; }
    int l_k() const { return l_k_; }
    bool allowed(int q, int k) const { return allow_[static_cast<size_t>(q) * l_k_ + k] != 0; }

    // Additive pre-softmax bias: 0 where attendable, a large negative
    // constant where not.
    const std::vector<float>& bias() const { return bias_; }

    // Throws ContractError if some query row has no attendable key.
    void require_attendable() const;

private:
    AttentionMask(int l_q, int l_k);
    int l_q_ = 0;
    int l_k_ = 0;
    std::vector<uint8_t> allow_;
    std::vector<float> bias_;
};

// Dropout/eval context threaded through the layers. Null rng or training=false
// makes every dropout an identity.
struct LayerRuntime {
    bool training = false;
    float dropout = 0.1f;
    Rng* rng = nullptr;

    bool dropout_active() const { return training && rng != nullptr && dropout > 0.0f; }
};

namespace layers {

// Sinusoidal table: PE[pos, 2i] = sin(pos / 10000^(2i/d)), PE[pos, 2i+1] = cos(...).
Tensor positional_encoding(int max_len, int d_model);

// softmax(q k^T / sqrt(d) + mask bias) v
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const AttentionMask& mask, const LayerRuntime& rt = {});

struct AttentionParams {
    Tensor w_q, w_k, w_v;  // [d_model x n_heads*d_head]
    Tensor w_o;            // [n_heads*d_head x d_model]

    static AttentionParams init(const ModelDims& dims, Rng& rng);
    void collect(const std::string& prefix, NamedTensors& out) const;
};

Tensor multi_head_attention(const Tensor& q_in, const Tensor& k_in, const Tensor& v_in,
                            const AttentionMask& mask, const AttentionParams& p,
                            int n_heads, const LayerRuntime& rt = {});

struct FeedForwardParams {
    Tensor w1, b1;  // [d_model x d_ff], [d_ff]
    Tensor w2, b2;  // [d_ff x d_model], [d_model]

    static FeedForwardParams init(const ModelDims& dims, Rng& rng);
    void collect(const std::string& prefix, NamedTensors& out) const;
};

struct LayerNormParams {
    Tensor gain, bias;

    static LayerNormParams init(int d, Rng& rng);
    void collect(const std::string& prefix, NamedTensors& out) const;
};

struct EncoderLayerParams {
    AttentionParams self_attn;
    FeedForwardParams ff;
    LayerNormParams ln1, ln2;

    static EncoderLayerParams init(const ModelDims& dims, Rng& rng);
    void collect(const std::string& prefix, NamedTensors& out) const;
};

// Post-norm encoder layer: self-attention -> add&norm -> feed-forward -> add&norm.
// Self-attention is unmasked except for key padding, so outputs may depend on
// future positions.
Tensor transformer_encoder_layer(const Tensor& x, const AttentionMask& pad_mask,
                                 const EncoderLayerParams& p, int n_heads,
                                 const LayerRuntime& rt = {});

struct DecoderLayerParams {
    AttentionParams self_attn, cross_attn;
    FeedForwardParams ff;
    LayerNormParams ln1, ln2, ln3;

    static DecoderLayerParams init(const ModelDims& dims, Rng& rng);
    void collect(const std::string& prefix, NamedTensors& out) const;
};

// Post-norm decoder layer: masked self-attention on the target, cross-attention
// over the encoder memory, then feed-forward, each with add&norm.
Tensor transformer_decoder_layer(const Tensor& target, const Tensor& memory,
                                 const AttentionMask& causal_mask,
                                 const AttentionMask& memory_mask,
                                 const DecoderLayerParams& p, int n_heads,
                                 const LayerRuntime& rt = {});

struct LstmParams {
    Tensor w_ih;  // [d_in x 4*hidden], gate order i, f, g, o
    Tensor w_hh;  // [hidden x 4*hidden]
    Tensor bias;  // [4*hidden]

    int hidden() const { return w_hh.dim(0); }
    static LstmParams init(int d_in, int hidden, Rng& rng);
    void collect(const std::string& prefix, NamedTensors& out) const;
};

struct LstmState {
    Tensor h, c;  // [1 x hidden]

    static LstmState zero(int hidden);
};

// Standard LSTM cell: sigmoid input/forget/output gates, tanh candidate.
LstmState lstm_step(const Tensor& x_t, const LstmState& state, const LstmParams& p);

// Xavier-uniform init for a [fan_in x fan_out] weight.
Tensor xavier_uniform(int fan_in, int fan_out, Rng& rng);

}  // namespace layers
}  // namespace textgan
