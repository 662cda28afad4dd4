#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "textgan/adversary.hpp"

using namespace textgan;
using testutil::random_content_batch;
using testutil::small_dims;

namespace {

RewardBatch constant_rewards(const SequenceBatch& toks, float value, float baseline) {
    RewardBatch rb;
    rb.mix = RewardMix{0.5f, 0.5f};
    rb.batch = toks.batch;
    rb.max_len = toks.max_len;
    rb.baseline = baseline;
    rb.word_reward.assign(static_cast<size_t>(toks.batch) * toks.max_len, 0.0f);
    rb.sentence_reward.assign(static_cast<size_t>(toks.batch), value);
    for (int r = 0; r < toks.batch; ++r) {
        for (int t = 0; t < toks.length(r); ++t) {
            rb.word_reward[static_cast<size_t>(r) * toks.max_len + t] = value;
        }
    }
    return rb;
}

float max_abs_grad(const NamedTensors& params) {
    float worst = 0.0f;
    for (const auto& [name, t] : params) {
        (void)name;
        if (!t.grad_allocated()) continue;
        for (float g : t.grad()) worst = std::max(worst, std::fabs(g));
    }
    return worst;
}

}  // namespace

TEST_CASE("fresh discriminator sits near the uniform language model") {
    const ModelDims dims = small_dims(10);
    DiscriminatorLM d(dims, 3);
    SequenceBatch batch = SequenceBatch::from_rows({{4, 5, 6}, {7, 8, 9}}, dims.max_len);
    Tensor lp = d.log_likelihood(batch);
    for (int r = 0; r < 2; ++r) {
        for (int t = 0; t < 3; ++t) {
            CHECK(lp.at(r, t) <= 0.0f);
            CHECK(lp.at(r, t) == doctest::Approx(-std::log(10.0)).epsilon(0.05));
        }
        for (int t = 3; t < dims.max_len; ++t) CHECK(lp.at(r, t) == 0.0f);
    }
    Tensor lp2 = d.log_likelihood(batch);
    CHECK(lp.data() == lp2.data());

    CHECK_THROWS_AS(d.log_likelihood(SequenceBatch::empty(dims.max_len)), ContractError);
}

TEST_CASE("discriminator step on identical batches is a fixed point") {
    const ModelDims dims = small_dims(12);
    DiscriminatorLM d(dims, 5);
    Rng rng(6);
    SequenceBatch batch = random_content_batch(4, 5, 12, dims.max_len, rng);
    Adam opt(d.parameters());
    const float loss = train_discriminator_step(d, batch, batch, opt, /*lr=*/0.0f);
    CHECK(std::fabs(loss) <= 1e-5f);
    CHECK(max_abs_grad(d.parameters()) <= 1e-5f);
}

TEST_CASE("discriminator separates two disjoint toy languages") {
    const ModelDims dims = small_dims(10);
    DiscriminatorLM d(dims, 7);
    Adam opt(d.parameters());
    Rng rng(8);

    auto sample_language = [&rng, &dims](int lo, int hi, int n) {
        std::vector<std::vector<int>> rows;
        for (int i = 0; i < n; ++i) {
            std::vector<int> row(6);
            for (int& id : row) id = rng.uniform_int(lo, hi);
            rows.push_back(std::move(row));
        }
        return SequenceBatch::from_rows(rows, dims.max_len);
    };

    for (int step = 0; step < 50; ++step) {
        SequenceBatch real = sample_language(4, 6, 8);   // ids {4,5}
        SequenceBatch fake = sample_language(6, 8, 8);   // ids {6,7}
        train_discriminator_step(d, real, fake, opt, 0.01f);
    }

    SequenceBatch real_eval = sample_language(4, 6, 16);
    SequenceBatch fake_eval = sample_language(6, 8, 16);
    auto mean_lp = [](const Tensor& lp, const SequenceBatch& b) {
        double sum = 0.0;
        int64_t n = 0;
        for (int r = 0; r < b.batch; ++r) {
            for (int t = 0; t < b.length(r); ++t) {
                sum += lp.at(r, t);
                ++n;
            }
        }
        return sum / static_cast<double>(n);
    };
    CHECK(mean_lp(d.log_likelihood(real_eval), real_eval) >
          mean_lp(d.log_likelihood(fake_eval), fake_eval));
}

TEST_CASE("discriminator loss stays finite on all-empty fakes") {
    const ModelDims dims = small_dims(10);
    DiscriminatorLM d(dims, 9);
    Adam opt(d.parameters());
    SequenceBatch real = SequenceBatch::from_rows({{4, 5}, {6, 7}}, dims.max_len);
    SequenceBatch fakes = SequenceBatch::from_rows({{}, {}}, dims.max_len);
    const float loss = train_discriminator_step(d, real, fakes, opt, 0.01f);
    CHECK(std::isfinite(loss));
}

TEST_CASE("reward mixing, floors and the EMA baseline") {
    const ModelDims dims = small_dims(12);
    DiscriminatorLM d(dims, 11);
    Generator g(VariantTag::Lstm, dims, 12);
    Rng rng(13);
    SampleOutput s = sample_autoregressive(g, 6, rng);

    SUBCASE("word-only mix equals the word rewards") {
        RewardConfig cfg;
        cfg.mix = RewardMix{1.0f, 0.0f};
        BaselineTracker tracker;
        RewardBatch rb = compute_rewards(d, s, cfg, tracker);
        for (int r = 0; r < rb.batch; ++r) {
            for (int t = 0; t < s.length(r); ++t) {
                CHECK(rb.signal(r, t) == doctest::Approx(rb.word(r, t)));
            }
        }
    }
    SUBCASE("sentence-only mix broadcasts one value per row") {
        RewardConfig cfg;
        cfg.mix = RewardMix{0.0f, 1.0f};
        BaselineTracker tracker;
        RewardBatch rb = compute_rewards(d, s, cfg, tracker);
        for (int r = 0; r < rb.batch; ++r) {
            for (int t = 1; t < s.length(r); ++t) {
                CHECK(rb.signal(r, t) == doctest::Approx(rb.signal(r, 0)));
            }
        }
    }
    SUBCASE("first batch seeds the baseline with its own mean") {
        RewardConfig cfg;
        BaselineTracker tracker;
        RewardBatch rb = compute_rewards(d, s, cfg, tracker);
        double mean = 0.0;
        int n = 0;
        for (int r = 0; r < rb.batch; ++r) {
            if (s.length(r) == 0) continue;
            mean += rb.sentence_reward[static_cast<size_t>(r)];
            ++n;
        }
        mean /= n;
        CHECK(rb.baseline == doctest::Approx(mean).epsilon(1e-6));

        // Second batch moves by the EMA rule.
        BaselineTracker t2 = tracker;
        RewardBatch rb2 = compute_rewards(d, s, cfg, t2);
        CHECK(rb2.baseline == doctest::Approx(0.95 * mean + 0.05 * mean).epsilon(1e-6));
    }
    SUBCASE("rewards are floored and finite") {
        RewardConfig cfg;
        BaselineTracker tracker;
        RewardBatch rb = compute_rewards(d, s, cfg, tracker);
        for (float w : rb.word_reward) {
            CHECK(std::isfinite(w));
            CHECK(w >= -10.0f);
        }
        CHECK(std::fabs(rb.sentence_reward[0] -
                        [&] {
                            double m = 0.0;
                            for (int t = 0; t < s.length(0); ++t) m += rb.word(0, t);
                            return m / std::max(s.length(0), 1);
                        }()) <= 1e-6f);
    }
    SUBCASE("zero-length samples carry no reward weight") {
        Generator rigged(VariantTag::Lstm, dims, 14);
        for (auto& [name, t] : rigged.parameters()) {
            if (name == "head.b") t.data()[kEosId] = 50.0f;
        }
        Rng r2(15);
        SampleOutput empty = sample_autoregressive(rigged, 3, r2);
        REQUIRE(empty.all_empty());
        RewardConfig cfg;
        BaselineTracker tracker;
        RewardBatch rb = compute_rewards(d, empty, cfg, tracker);
        CHECK_FALSE(tracker.initialized);
        for (float w : rb.word_reward) CHECK(w == 0.0f);
        Tape tape;
        TapeScope scope(tape);
        Tensor loss = policy_gradient_loss(rigged, empty, rb);
        CHECK(loss.item() == 0.0f);
    }
}

TEST_CASE("policy gradient reduces to cross entropy under unit rewards") {
    const ModelDims dims = small_dims(20);
    Generator g(VariantTag::Lstm, dims, 16);
    Rng rng(17);
    SampleOutput s = sample_autoregressive(g, 5, rng);
    REQUIRE_FALSE(s.all_empty());

    RewardBatch unit = constant_rewards(s.tokens, 1.0f, 0.0f);
    Tape tape;
    TapeScope scope(tape);
    Tensor pg = policy_gradient_loss(g, s, unit);

    // Cross entropy of the sampled content tokens on the same scoring path.
    std::vector<int> targets(static_cast<size_t>(s.tokens.batch) * s.tokens.max_len, kPadId);
    for (int r = 0; r < s.tokens.batch; ++r) {
        for (int t = 0; t < s.length(r); ++t) {
            targets[static_cast<size_t>(r) * s.tokens.max_len + t] = s.tokens.at(r, t);
        }
    }
    Tensor logits = g.forward_mle(s.tokens);
    Tensor ce = ops::cross_entropy(
        ops::reshape(logits, {s.tokens.batch * s.tokens.max_len, dims.vocab_size}), targets,
        kPadId);
    CHECK(pg.item() == doctest::Approx(ce.item()).epsilon(1e-6));
}

TEST_CASE("centered rewards produce zero loss and zero gradients") {
    const ModelDims dims = small_dims(20);
    Generator g(VariantTag::Lstm, dims, 18);
    Rng rng(19);
    SampleOutput s = sample_autoregressive(g, 4, rng);
    RewardBatch centered = constant_rewards(s.tokens, 0.7f, 0.7f);

    Tape tape;
    {
        TapeScope scope(tape);
        Tensor loss = policy_gradient_loss(g, s, centered);
        CHECK(loss.item() == 0.0f);
        tape.backward(loss);
    }
    CHECK(max_abs_grad(g.parameters()) == 0.0f);
}

TEST_CASE("policy gradient loss is linear in the advantage") {
    const ModelDims dims = small_dims(20);
    Generator g(VariantTag::Lstm, dims, 20);
    Rng rng(21);
    SampleOutput s = sample_autoregressive(g, 4, rng);
    RewardBatch one = constant_rewards(s.tokens, 1.0f, 0.0f);
    RewardBatch two = constant_rewards(s.tokens, 2.0f, 0.0f);

    Tape tape;
    TapeScope scope(tape);
    Tensor l1 = policy_gradient_loss(g, s, one);
    Tensor l2 = policy_gradient_loss(g, s, two);
    CHECK(l2.item() == doctest::Approx(2.0 * l1.item()).epsilon(1e-6));
}

TEST_CASE("no gradient crosses between generator and discriminator") {
    const ModelDims dims = small_dims(16);
    Generator g(VariantTag::Lstm, dims, 22);
    DiscriminatorLM d(dims, 23);
    Rng rng(24);
    SampleOutput s = sample_autoregressive(g, 4, rng);
    REQUIRE_FALSE(s.all_empty());

    // Rewards are computed outside any tape; a generator update must leave the
    // discriminator untouched.
    RewardConfig cfg;
    BaselineTracker tracker;
    RewardBatch rb = compute_rewards(d, s, cfg, tracker);
    Tape tape;
    {
        TapeScope scope(tape);
        Tensor loss = policy_gradient_loss(g, s, rb);
        tape.backward(loss);
    }
    CHECK(max_abs_grad(d.parameters()) == 0.0f);
    CHECK(max_abs_grad(g.parameters()) > 0.0f);

    // And a discriminator step accumulates nothing on the generator.
    for (auto& [name, t] : g.parameters()) {
        (void)name;
        t.zero_grad();
    }
    Adam opt(d.parameters());
    train_discriminator_step(d, s.tokens, s.tokens, opt, 0.01f);
    CHECK(max_abs_grad(g.parameters()) == 0.0f);
}
