#pragma once

#include <cstdint>
#include <vector>

#include "textgan/generator.hpp"
#include "textgan/optim.hpp"

namespace textgan {

// Language-model discriminator: a depth-1 LSTM of width d_model over the
// shared vocabulary. Its per-token log-likelihood is the reward signal.
class DiscriminatorLM {
public:
    DiscriminatorLM(const ModelDims& dims, uint64_t init_seed);

    const ModelDims& dims() const { return dims_; }
    NamedTensors parameters() const;

    // Teacher-forced per-token log D(y_t | y_<t) over content tokens, [b x L];
    // slots at or past each row's content are zero.
    Tensor log_likelihood(const SequenceBatch& seqs) const;

private:
    ModelDims dims_;
    Tensor embedding_;
    layers::LstmParams lstm_;
    Tensor head_w_, head_b_;
};

struct RewardMix {
    float word = 0.5f;
    float sentence = 0.5f;
};

struct RewardConfig {
    RewardMix mix;
    bool clip = true;        // clamp per-token rewards at the floor
    float floor = -10.0f;
    bool normalize = false;  // standardize word rewards per batch
};

// Exponential moving average of batch mean sentence reward; the first update
// seeds the average with the observed mean.
struct BaselineTracker {
    double value = 0.0;
    bool initialized = false;
    double decay = 0.95;

    void update(double batch_mean) {
        value = initialized ? decay * value + (1.0 - decay) * batch_mean : batch_mean;
        initialized = true;
    }
};

// Per-token and per-sentence rewards for one sampled batch. Rewards are plain
// constants: no gradient flows from the generator update into the
// discriminator.
struct RewardBatch {
    std::vector<float> word_reward;      // flat b x L, zero past content
    std::vector<float> sentence_reward;  // b, mean of word rewards per row
    float baseline = 0.0f;
    RewardMix mix;
    int batch = 0;
    int max_len = 0;

    float word(int r, int t) const {
        return word_reward[static_cast<size_t>(r) * max_len + t];
    }
    // The per-token training signal: mixed word- and sentence-level reward.
    float signal(int r, int t) const {
        return mix.word * word(r, t) + mix.sentence * sentence_reward[static_cast<size_t>(r)];
    }
};

RewardBatch compute_rewards(const DiscriminatorLM& d, const SampleOutput& samples,
                            const RewardConfig& cfg, BaselineTracker& baseline);

// REINFORCE surrogate: -mean over effective tokens of
// (signal - baseline) * log_prob, signal treated as a constant. Scores the
// samples on the generator's scoring path under the active tape.
Tensor policy_gradient_loss(const Generator& g, const SampleOutput& samples,
                            const RewardBatch& rewards);

// One step on L_D = -mean log D(real) + mean max(log D(fake), floor).
// Returns the loss; throws NumericError if it is not finite.
float train_discriminator_step(DiscriminatorLM& d, const SequenceBatch& real,
                               const SequenceBatch& fake, Adam& opt, float lr,
                               float floor = -10.0f);

}  // namespace textgan
