#include "textgan/adversary.hpp"

#include <algorithm>
#include <cmath>

namespace textgan {

DiscriminatorLM::DiscriminatorLM(const ModelDims& dims, uint64_t init_seed) : dims_(dims) {
    dims_.validate();
    Rng rng = Rng::derive(init_seed, "discriminator-init");
    embedding_ = Tensor::randn({dims_.vocab_size, dims_.d_model}, rng, 0.1f, true);
    for (int i = 0; i < dims_.d_model; ++i) embedding_.at(kPadId, i) = 0.0f;
    lstm_ = layers::LstmParams::init(dims_.d_model, dims_.d_model, rng);
    head_w_ = Tensor::randn({dims_.d_model, dims_.vocab_size}, rng, 0.02f, true);
    head_b_ = Tensor::zeros({dims_.vocab_size}, true);
}

NamedTensors DiscriminatorLM::parameters() const {
    NamedTensors out;
    out.emplace_back("embedding", embedding_);
    lstm_.collect("lstm", out);
    out.emplace_back("head.w", head_w_);
    out.emplace_back("head.b", head_b_);
    return out;
}

Tensor DiscriminatorLM::log_likelihood(const SequenceBatch& seqs) const {
    if (seqs.batch < 1) throw ContractError("DiscriminatorLM::log_likelihood: empty batch");
    const int L = seqs.max_len;
    std::vector<Tensor> parts;
    parts.reserve(static_cast<size_t>(seqs.batch) * 2);
    for (int r = 0; r < seqs.batch; ++r) {
        const int len = seqs.length(r);
        if (len == 0) {
            parts.push_back(Tensor::zeros({L}));
            continue;
        }
        layers::LstmState state = layers::LstmState::zero(dims_.d_model);
        int prev = kBosId;
        std::vector<Tensor> rows;
        std::vector<int> targets;
        rows.reserve(static_cast<size_t>(len));
        targets.reserve(static_cast<size_t>(len));
        for (int t = 0; t < len; ++t) {
            state = layers::lstm_step(ops::embedding_rows(embedding_, {prev}), state, lstm_);
            rows.push_back(state.h);
            targets.push_back(seqs.at(r, t));
            prev = seqs.at(r, t);
        }
        Tensor logits = ops::add_bias(ops::matmul(ops::concat(rows, 0), head_w_), head_b_);
        parts.push_back(ops::log_softmax_gather(logits, targets));
        if (len < L) parts.push_back(Tensor::zeros({L - len}));
    }
    return ops::reshape(ops::concat(parts, 0), {seqs.batch, L});
}

RewardBatch compute_rewards(const DiscriminatorLM& d, const SampleOutput& samples,
                            const RewardConfig& cfg, BaselineTracker& baseline) {
    if (cfg.mix.word < 0.0f || cfg.mix.sentence < 0.0f ||
        std::fabs(cfg.mix.word + cfg.mix.sentence - 1.0f) > 1e-6f) {
        throw ContractError("compute_rewards: reward mix must be nonnegative and sum to 1");
    }
    const SequenceBatch& toks = samples.tokens;
    RewardBatch rb;
    rb.mix = cfg.mix;
    rb.batch = toks.batch;
    rb.max_len = toks.max_len;
    rb.word_reward.assign(static_cast<size_t>(toks.batch) * toks.max_len, 0.0f);
    rb.sentence_reward.assign(static_cast<size_t>(toks.batch), 0.0f);

    Tensor lp = d.log_likelihood(toks);
    for (int r = 0; r < toks.batch; ++r) {
        for (int t = 0; t < toks.length(r); ++t) {
            float w = lp.at(r, t);
            if (cfg.clip) w = std::max(w, cfg.floor);
            rb.word_reward[static_cast<size_t>(r) * toks.max_len + t] = w;
        }
    }

    if (cfg.normalize) {
        // Standardize word rewards over effective tokens.
        double sum = 0.0, sq = 0.0;
        int64_t count = 0;
        for (int r = 0; r < toks.batch; ++r) {
            for (int t = 0; t < toks.length(r); ++t) {
                const double w = rb.word(r, t);
                sum += w;
                sq += w * w;
                ++count;
            }
        }
        if (count > 0) {
            const double mean = sum / static_cast<double>(count);
            const double var = std::max(sq / static_cast<double>(count) - mean * mean, 0.0);
            const double inv_std = 1.0 / std::max(std::sqrt(var), 1e-6);
            for (int r = 0; r < toks.batch; ++r) {
                for (int t = 0; t < toks.length(r); ++t) {
                    float& w = rb.word_reward[static_cast<size_t>(r) * toks.max_len + t];
                    w = static_cast<float>((w - mean) * inv_std);
                }
            }
        }
    }

    int non_empty = 0;
    double mean_sum = 0.0;
    for (int r = 0; r < toks.batch; ++r) {
        const int len = toks.length(r);
        if (len == 0) continue;
        double s = 0.0;
        for (int t = 0; t < len; ++t) s += rb.word(r, t);
        rb.sentence_reward[static_cast<size_t>(r)] = static_cast<float>(s / len);
        mean_sum += s / len;
        ++non_empty;
    }
    if (non_empty > 0) baseline.update(mean_sum / non_empty);
    rb.baseline = static_cast<float>(baseline.value);
    return rb;
}

Tensor policy_gradient_loss(const Generator& g, const SampleOutput& samples,
                            const RewardBatch& rewards) {
    const SequenceBatch& toks = samples.tokens;
    if (toks.batch != rewards.batch || toks.max_len != rewards.max_len) {
        throw ShapeError("policy_gradient_loss: sample/reward shape mismatch");
    }
    int64_t effective = 0;
    for (int r = 0; r < toks.batch; ++r) effective += toks.length(r);
    if (effective == 0) return Tensor::scalar(0.0f);  // all-empty batch: no signal

    Tensor lp = samples.source.batch > 0 ? g.log_prob_with_source(toks, samples.source)
                                         : g.log_prob(toks);
    std::vector<float> weights(static_cast<size_t>(toks.batch) * toks.max_len, 0.0f);
    const float inv = -1.0f / static_cast<float>(effective);
    for (int r = 0; r < toks.batch; ++r) {
        for (int t = 0; t < toks.length(r); ++t) {
            weights[static_cast<size_t>(r) * toks.max_len + t] =
                inv * (rewards.signal(r, t) - rewards.baseline);
        }
    }
    Tensor loss = ops::dot_const(ops::reshape(lp, {toks.batch * toks.max_len}), weights);
    if (!std::isfinite(loss.item())) throw NumericError("policy_gradient_loss: non-finite loss");
    return loss;
}

float train_discriminator_step(DiscriminatorLM& d, const SequenceBatch& real,
                               const SequenceBatch& fake, Adam& opt, float lr, float floor) {
    if (real.batch < 1 || fake.batch < 1) {
        throw ContractError("train_discriminator_step: empty batch");
    }
    auto content_weights = [](const SequenceBatch& b, float sign) {
        std::vector<float> w(static_cast<size_t>(b.batch) * b.max_len, 0.0f);
        int64_t effective = 0;
        for (int r = 0; r < b.batch; ++r) effective += b.length(r);
        if (effective == 0) return w;
        const float v = sign / static_cast<float>(effective);
        for (int r = 0; r < b.batch; ++r) {
            for (int t = 0; t < b.length(r); ++t) {
                w[static_cast<size_t>(r) * b.max_len + t] = v;
            }
        }
        return w;
    };

    Tape tape;
    float loss_value = 0.0f;
    {
        TapeScope scope(tape);
        Tensor lp_real = d.log_likelihood(real);
        Tensor real_term = ops::dot_const(ops::reshape(lp_real, {real.batch * real.max_len}),
                                          content_weights(real, -1.0f));
        Tensor lp_fake = ops::clamp_min(d.log_likelihood(fake), floor);
        Tensor fake_term = ops::dot_const(ops::reshape(lp_fake, {fake.batch * fake.max_len}),
                                          content_weights(fake, 1.0f));
        Tensor loss = ops::add(real_term, fake_term);
        loss_value = loss.item();
        if (!std::isfinite(loss_value)) {
            throw NumericError("train_discriminator_step: non-finite loss");
        }
        opt.zero_grad();
        tape.backward(loss);
    }
    opt.step(lr);
    return loss_value;
}

}  // namespace textgan
