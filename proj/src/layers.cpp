#include "textgan/layers.hpp"

#include <cmath>

namespace textgan {

void ModelDims::validate() const {
    auto positive = [](int v, const char* name) {
        if (v < 1) throw ContractError(std::string("ModelDims: ") + name + " must be >= 1");
    };
    positive(d_model, "d_model");
    positive(n_layers, "n_layers");
    positive(n_heads, "n_heads");
    positive(d_head, "d_head");
    positive(d_ff, "d_ff");
    positive(vocab_size, "vocab_size");
    if (max_len < 2) throw ContractError("ModelDims: max_len must be >= 2");
}

namespace {
constexpr float kMaskBias = -1e30f;
}

AttentionMask::AttentionMask(int l_q, int l_k) : l_q_(l_q), l_k_(l_k) {
    if (l_q < 1 || l_k < 1) throw ContractError("AttentionMask: empty axis");
    allow_.assign(static_cast<size_t>(l_q) * l_k, 1);
    bias_.assign(static_cast<size_t>(l_q) * l_k, 0.0f);
}

AttentionMask AttentionMask::full(int l_q, int l_k) { return AttentionMask(l_q, l_k); }

AttentionMask AttentionMask::causal(int len) {
    AttentionMask m(len, len);
    for (int q = 0; q < len; ++q) {
        for (int k = q + 1; k < len; ++k) {
            m.allow_[static_cast<size_t>(q) * len + k] = 0;
            m.bias_[static_cast<size_t>(q) * len + k] = kMaskBias;
        }
    }
    return m;
}

AttentionMask AttentionMask::key_padding(int l_q, const std::vector<uint8_t>& key_ok) {
    AttentionMask m(l_q, static_cast<int>(key_ok.size()));
    for (int q = 0; q < l_q; ++q) {
        for (int k = 0; k < m.l_k_; ++k) {
            if (!key_ok[static_cast<size_t>(k)]) {
                m.allow_[static_cast<size_t>(q) * m.l_k_ + k] = 0;
                m.bias_[static_cast<size_t>(q) * m.l_k_ + k] = kMaskBias;
            }
        }
    }
    return m;
}

void AttentionMask::require_attendable() const {
    for (int q = 0; q < l_q_; ++q) {
        bool any = false;
        for (int k = 0; k < l_k_; ++k) {
            if (allow_[static_cast<size_t>(q) * l_k_ + k]) {
                any = true;
                break;
            }
        }
        if (!any) {
            throw ContractError("attention: no attendable key for query " + std::to_string(q));
        }
    }
}

namespace layers {

Tensor xavier_uniform(int fan_in, int fan_out, Rng& rng) {
    const float bound = std::sqrt(6.0f / static_cast<float>(fan_in + fan_out));
    return Tensor::rand_uniform({fan_in, fan_out}, rng, -bound, bound, /*requires_grad=*/true);
}

Tensor positional_encoding(int max_len, int d_model) {
    if (d_model % 2 != 0) throw ContractError("positional_encoding: d_model must be even");
    Tensor pe = Tensor::zeros({max_len, d_model});
    for (int pos = 0; pos < max_len; ++pos) {
        for (int i = 0; i < d_model / 2; ++i) {
            const double freq = std::pow(10000.0, -2.0 * i / d_model);
            pe.at(pos, 2 * i) = static_cast<float>(std::sin(pos * freq));
            pe.at(pos, 2 * i + 1) = static_cast<float>(std::cos(pos * freq));
        }
    }
    return pe;
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const AttentionMask& mask, const LayerRuntime& rt) {
    if (q.ndim() != 2 || k.ndim() != 2 || v.ndim() != 2) {
        throw ShapeError("scaled_dot_attention: expects 2-d q/k/v");
    }
    if (q.dim(1) != k.dim(1)) {
        throw ShapeError("scaled_dot_attention: q width " + shape_str(q.shape()) +
                         " vs k width " + shape_str(k.shape()));
    }
    if (k.dim(0) != v.dim(0)) {
        throw ShapeError("scaled_dot_attention: key/value row mismatch");
    }
    if (mask.l_q() != q.dim(0) || mask.l_k() != k.dim(0)) {
        throw ShapeError("scaled_dot_attention: mask " + std::to_string(mask.l_q()) + "x" +
                         std::to_string(mask.l_k()) + " does not cover " +
                         std::to_string(q.dim(0)) + "x" + std::to_string(k.dim(0)));
    }
    mask.require_attendable();

    const float inv_sqrt_d = 1.0f / std::sqrt(static_cast<float>(q.dim(1)));
    Tensor scores = ops::scale(ops::matmul_nt(q, k), inv_sqrt_d);
    Tensor probs = ops::softmax(ops::add_const(scores, mask.bias()));
    if (rt.dropout_active()) probs = ops::dropout(probs, rt.dropout, *rt.rng, true);
    return ops::matmul(probs, v);
}

AttentionParams AttentionParams::init(const ModelDims& dims, Rng& rng) {
    AttentionParams p;
    const int width = dims.n_heads * dims.d_head;
    p.w_q = xavier_uniform(dims.d_model, width, rng);
    p.w_k = xavier_uniform(dims.d_model, width, rng);
    p.w_v = xavier_uniform(dims.d_model, width, rng);
    p.w_o = xavier_uniform(width, dims.d_model, rng);
    return p;
}

void AttentionParams::collect(const std::string& prefix, NamedTensors& out) const {
    out.emplace_back(prefix + ".w_q", w_q);
    out.emplace_back(prefix + ".w_k", w_k);
    out.emplace_back(prefix + ".w_v", w_v);
    out.emplace_back(prefix + ".w_o", w_o);
}

Tensor multi_head_attention(const Tensor& q_in, const Tensor& k_in, const Tensor& v_in,
                            const AttentionMask& mask, const AttentionParams& p,
                            int n_heads, const LayerRuntime& rt) {
    const int width = p.w_q.dim(1);
    if (width % n_heads != 0) {
        throw ShapeError("multi_head_attention: projection width " + std::to_string(width) +
                         " not divisible by " + std::to_string(n_heads) + " heads");
    }
    const int d_head = width / n_heads;
    Tensor q = ops::matmul(q_in, p.w_q);
    Tensor k = ops::matmul(k_in, p.w_k);
    Tensor v = ops::matmul(v_in, p.w_v);

    std::vector<Tensor> heads;
    heads.reserve(static_cast<size_t>(n_heads));
    for (int h = 0; h < n_heads; ++h) {
        Tensor qh = ops::slice(q, 1, h * d_head, (h + 1) * d_head);
        Tensor kh = ops::slice(k, 1, h * d_head, (h + 1) * d_head);
        Tensor vh = ops::slice(v, 1, h * d_head, (h + 1) * d_head);
        heads.push_back(scaled_dot_attention(qh, kh, vh, mask, rt));
    }
    return ops::matmul(ops::concat(heads, 1), p.w_o);
}

FeedForwardParams FeedForwardParams::init(const ModelDims& dims, Rng& rng) {
    FeedForwardParams p;
    p.w1 = xavier_uniform(dims.d_model, dims.d_ff, rng);
    p.b1 = Tensor::zeros({dims.d_ff}, true);
    p.w2 = xavier_uniform(dims.d_ff, dims.d_model, rng);
    p.b2 = Tensor::zeros({dims.d_model}, true);
    return p;
}

void FeedForwardParams::collect(const std::string& prefix, NamedTensors& out) const {
    out.emplace_back(prefix + ".w1", w1);
    out.emplace_back(prefix + ".b1", b1);
    out.emplace_back(prefix + ".w2", w2);
    out.emplace_back(prefix + ".b2", b2);
}

LayerNormParams LayerNormParams::init(int d, Rng& rng) {
    (void)rng;
    LayerNormParams p;
    p.gain = Tensor::full({d}, 1.0f);
    p.gain.set_requires_grad(true);
    p.bias = Tensor::zeros({d}, true);
    return p;
}

void LayerNormParams::collect(const std::string& prefix, NamedTensors& out) const {
    out.emplace_back(prefix + ".gain", gain);
    out.emplace_back(prefix + ".bias", bias);
}

namespace {

Tensor feed_forward(const Tensor& x, const FeedForwardParams& p, const LayerRuntime& rt) {
    Tensor hidden = ops::relu(ops::add_bias(ops::matmul(x, p.w1), p.b1));
    if (rt.dropout_active()) hidden = ops::dropout(hidden, rt.dropout, *rt.rng, true);
    return ops::add_bias(ops::matmul(hidden, p.w2), p.b2);
}

}  // namespace

EncoderLayerParams EncoderLayerParams::init(const ModelDims& dims, Rng& rng) {
    EncoderLayerParams p;
    p.self_attn = AttentionParams::init(dims, rng);
    p.ff = FeedForwardParams::init(dims, rng);
    p.ln1 = LayerNormParams::init(dims.d_model, rng);
    p.ln2 = LayerNormParams::init(dims.d_model, rng);
    return p;
}

void EncoderLayerParams::collect(const std::string& prefix, NamedTensors& out) const {
    self_attn.collect(prefix + ".attn", out);
    ff.collect(prefix + ".ff", out);
    ln1.collect(prefix + ".ln1", out);
    ln2.collect(prefix + ".ln2", out);
}

Tensor transformer_encoder_layer(const Tensor& x, const AttentionMask& pad_mask,
                                 const EncoderLayerParams& p, int n_heads,
                                 const LayerRuntime& rt) {
    Tensor attn = multi_head_attention(x, x, x, pad_mask, p.self_attn, n_heads, rt);
    Tensor h = ops::layer_norm(ops::add(x, attn), p.ln1.gain, p.ln1.bias);
    Tensor ff = feed_forward(h, p.ff, rt);
    return ops::layer_norm(ops::add(h, ff), p.ln2.gain, p.ln2.bias);
}

DecoderLayerParams DecoderLayerParams::init(const ModelDims& dims, Rng& rng) {
    DecoderLayerParams p;
    p.self_attn = AttentionParams::init(dims, rng);
    p.cross_attn = AttentionParams::init(dims, rng);
    p.ff = FeedForwardParams::init(dims, rng);
    p.ln1 = LayerNormParams::init(dims.d_model, rng);
    p.ln2 = LayerNormParams::init(dims.d_model, rng);
    p.ln3 = LayerNormParams::init(dims.d_model, rng);
    return p;
}

void DecoderLayerParams::collect(const std::string& prefix, NamedTensors& out) const {
    self_attn.collect(prefix + ".self_attn", out);
    cross_attn.collect(prefix + ".cross_attn", out);
    ff.collect(prefix + ".ff", out);
    ln1.collect(prefix + ".ln1", out);
    ln2.collect(prefix + ".ln2", out);
    ln3.collect(prefix + ".ln3", out);
}

Tensor transformer_decoder_layer(const Tensor& target, const Tensor& memory,
                                 const AttentionMask& causal_mask,
                                 const AttentionMask& memory_mask,
                                 const DecoderLayerParams& p, int n_heads,
                                 const LayerRuntime& rt) {
    Tensor self_attn =
        multi_head_attention(target, target, target, causal_mask, p.self_attn, n_heads, rt);
    Tensor h1 = ops::layer_norm(ops::add(target, self_attn), p.ln1.gain, p.ln1.bias);
    Tensor cross =
        multi_head_attention(h1, memory, memory, memory_mask, p.cross_attn, n_heads, rt);
    Tensor h2 = ops::layer_norm(ops::add(h1, cross), p.ln2.gain, p.ln2.bias);
    Tensor ff = feed_forward(h2, p.ff, rt);
    return ops::layer_norm(ops::add(h2, ff), p.ln3.gain, p.ln3.bias);
}

LstmParams LstmParams::init(int d_in, int hidden, Rng& rng) {
    const float bound = 1.0f / std::sqrt(static_cast<float>(hidden));
    LstmParams p;
    p.w_ih = Tensor::rand_uniform({d_in, 4 * hidden}, rng, -bound, bound, true);
    p.w_hh = Tensor::rand_uniform({hidden, 4 * hidden}, rng, -bound, bound, true);
    p.bias = Tensor::zeros({4 * hidden}, true);
    return p;
}

void LstmParams::collect(const std::string& prefix, NamedTensors& out) const {
    out.emplace_back(prefix + ".w_ih", w_ih);
    out.emplace_back(prefix + ".w_hh", w_hh);
    out.emplace_back(prefix + ".bias", bias);
}

LstmState LstmState::zero(int hidden) {
    return LstmState{Tensor::zeros({1, hidden}), Tensor::zeros({1, hidden})};
}

LstmState lstm_step(const Tensor& x_t, const LstmState& state, const LstmParams& p) {
    if (x_t.ndim() != 2 || x_t.dim(0) != 1 || x_t.dim(1) != p.w_ih.dim(0)) {
        throw ShapeError("lstm_step: input " + shape_str(x_t.shape()) + " vs weight " +
                         shape_str(p.w_ih.shape()));
    }
    const int hidden = p.hidden();
    Tensor gates = ops::add_bias(
        ops::add(ops::matmul(x_t, p.w_ih), ops::matmul(state.h, p.w_hh)), p.bias);
    Tensor i_gate = ops::sigmoid(ops::slice(gates, 1, 0, hidden));
    Tensor f_gate = ops::sigmoid(ops::slice(gates, 1, hidden, 2 * hidden));
    Tensor g_cand = ops::tanh(ops::slice(gates, 1, 2 * hidden, 3 * hidden));
    Tensor o_gate = ops::sigmoid(ops::slice(gates, 1, 3 * hidden, 4 * hidden));
    Tensor c_next = ops::add(ops::mul(f_gate, state.c), ops::mul(i_gate, g_cand));
    Tensor h_next = ops::mul(o_gate, ops::tanh(c_next));
    return LstmState{h_next, c_next};
}

}  // namespace layers
}  // namespace textgan
