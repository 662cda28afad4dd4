#include <doctest.h>

#include <cmath>
#include <map>
#include <optional>

#include "test_util.hpp"
#include "textgan/metrics.hpp"

using namespace textgan;
using metrics::bleu_n;
using metrics::collapse_report;
using metrics::self_bleu_n;
using testutil::small_dims;

namespace {

// ---------------------------------------------------------------------------
// Brute-force reference implementation, kept deliberately naive and separate
// from the library code path: per-candidate statistics are rebuilt from raw
// loops every time.
// ---------------------------------------------------------------------------

std::map<TokenSeq, int> bf_ngrams(const TokenSeq& s, int k) {
    std::map<TokenSeq, int> m;
    for (int i = 0; i + k <= static_cast<int>(s.size()); ++i) {
        TokenSeq g;
        for (int j = 0; j < k; ++j) g.push_back(s[static_cast<size_t>(i + j)]);
        m[g] += 1;
    }
    return m;
}

double bf_sentence_bleu(const TokenSeq& cand, const std::vector<TokenSeq>& refs, int n) {
    double log_p = 0.0;
    for (int k = 1; k <= n; ++k) {
        auto cand_counts = bf_ngrams(cand, k);
        int clipped = 0, total = 0;
        for (const auto& [gram, count] : cand_counts) {
            total += count;
            int best = 0;
            for (const TokenSeq& ref : refs) {
                auto rc = bf_ngrams(ref, k);
                auto it = rc.find(gram);
                if (it != rc.end()) best = std::max(best, it->second);
            }
            clipped += std::min(count, best);
        }
        double num = clipped > 0 ? static_cast<double>(clipped) : 0.1;
        double den = total > 0 ? static_cast<double>(total) : 1.0;
        log_p += std::log(num / den);
    }
    const int c = static_cast<int>(cand.size());
    int r = static_cast<int>(refs[0].size());
    for (const TokenSeq& ref : refs) {
        const int rl = static_cast<int>(ref.size());
        if (std::abs(rl - c) < std::abs(r - c) || (std::abs(rl - c) == std::abs(r - c) && rl < r)) {
            r = rl;
        }
    }
    const double bp = c < r ? std::exp(1.0 - static_cast<double>(r) / c) : 1.0;
    return bp * std::exp(log_p / n);
}

std::optional<double> bf_bleu(const std::vector<TokenSeq>& cands,
                              const std::vector<TokenSeq>& refs, int n) {
    std::vector<TokenSeq> live_refs;
    for (const auto& r : refs) {
        if (!r.empty()) live_refs.push_back(r);
    }
    double total = 0.0;
    int counted = 0;
    for (const TokenSeq& cand : cands) {
        if (cand.empty()) continue;
        total += bf_sentence_bleu(cand, live_refs, n);
        ++counted;
    }
    if (counted == 0) return std::nullopt;
    return total / counted;
}

std::optional<double> bf_self_bleu(const std::vector<TokenSeq>& samples, int n) {
    std::vector<TokenSeq> live;
    for (const auto& s : samples) {
        if (!s.empty()) live.push_back(s);
    }
    if (live.size() < 2) return std::nullopt;
    double total = 0.0;
    for (size_t i = 0; i < live.size(); ++i) {
        std::vector<TokenSeq> others;
        for (size_t j = 0; j < live.size(); ++j) {
            if (j != i) others.push_back(live[j]);
        }
        total += bf_sentence_bleu(live[i], others, n);
    }
    return total / static_cast<double>(live.size());
}

std::vector<TokenSeq> random_corpus(Rng& rng, int sentences, int max_tokens, int vocab) {
    std::vector<TokenSeq> out;
    for (int i = 0; i < sentences; ++i) {
        TokenSeq s(static_cast<size_t>(rng.uniform_int(1, max_tokens + 1)));
        for (int& t : s) t = rng.uniform_int(4, vocab);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace

TEST_CASE("bleu hand cases") {
    // Perfect match scores 1 for every order.
    TokenSeq x = {4, 5, 6, 7};
    for (int n = 1; n <= 4; ++n) {
        CHECK(*bleu_n({x}, {x}, n) == doctest::Approx(1.0).epsilon(1e-9));
    }

    // "a b c" vs "a b d": p1 = 2/3, p2 = 1/2, BP = 1.
    TokenSeq abc = {10, 11, 12}, abd = {10, 11, 13};
    CHECK(*bleu_n({abc}, {abd}, 2) == doctest::Approx(0.57735).epsilon(1e-5));

    // All candidates empty -> undefined marker.
    CHECK_FALSE(bleu_n({TokenSeq{}, TokenSeq{}}, {abd}, 2).has_value());

    // Empty reference set -> contract error.
    CHECK_THROWS_AS(bleu_n({abc}, {}, 2), ContractError);
    CHECK_THROWS_AS(bleu_n({abc}, {TokenSeq{}}, 2), ContractError);
}

TEST_CASE("bleu is monotone non-increasing in n while precisions stay positive") {
    TokenSeq cand = {4, 5, 6, 7, 8};
    TokenSeq ref = {4, 5, 6, 7, 9};
    double prev = 2.0;
    for (int n = 1; n <= 4; ++n) {
        const double v = *bleu_n({cand}, {ref}, n);
        CHECK(v <= prev + 1e-12);
        prev = v;
    }
}

TEST_CASE("bleu and self-bleu match the brute-force oracle on random corpora") {
    Rng rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        auto cands = random_corpus(rng, 5, 8, 12);
        auto refs = random_corpus(rng, 6, 8, 12);
        for (int n = 2; n <= 4; ++n) {
            auto got = bleu_n(cands, refs, n);
            auto want = bf_bleu(cands, refs, n);
            REQUIRE(got.has_value() == want.has_value());
            if (got) CHECK(*got == doctest::Approx(*want).epsilon(1e-9));
        }
    }
    for (int trial = 0; trial < 5; ++trial) {
        auto samples = random_corpus(rng, 4, 8, 10);
        for (int n = 2; n <= 4; ++n) {
            auto got = self_bleu_n(samples, n);
            auto want = bf_self_bleu(samples, n);
            REQUIRE(got.has_value());
            CHECK(*got == doctest::Approx(*want).epsilon(1e-9));
        }
    }
}

TEST_CASE("self-bleu degenerate and disjoint cases") {
    // All identical samples: complete overlap.
    std::vector<TokenSeq> same(4, TokenSeq{4, 5, 6, 7});
    CHECK(*self_bleu_n(same, 2) == doctest::Approx(1.0).epsilon(1e-9));

    // Pairwise-disjoint tokens: every clipped count is zero, so each order
    // contributes its smoothing floor 0.1/total.
    std::vector<TokenSeq> disjoint = {{4, 5, 6, 7}, {8, 9, 10, 11}, {12, 13, 14, 15}};
    const double expected = std::sqrt((0.1 / 4.0) * (0.1 / 3.0));
    CHECK(*self_bleu_n(disjoint, 2) == doctest::Approx(expected).epsilon(1e-9));

    // Fewer than two non-empty samples: undefined.
    CHECK_FALSE(self_bleu_n({TokenSeq{4, 5}, TokenSeq{}}, 2).has_value());
    CHECK_THROWS_AS(self_bleu_n({TokenSeq{4, 5}}, 2), ContractError);
}

TEST_CASE("self-bleu is permutation invariant") {
    Rng rng(7);
    auto samples = random_corpus(rng, 5, 6, 10);
    const double base = *self_bleu_n(samples, 3);
    std::vector<TokenSeq> shuffled = {samples[3], samples[0], samples[4], samples[1], samples[2]};
    CHECK(*self_bleu_n(shuffled, 3) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("nll_gen closed form and batch-partition invariance") {
    const ModelDims dims = small_dims(10, 8);
    Generator g(VariantTag::Lstm, dims, 1);
    for (auto& [name, t] : g.parameters()) {
        if (name == "head.w" || name == "head.b") {
            std::fill(t.data().begin(), t.data().end(), 0.0f);
        }
    }
    std::vector<std::vector<int>> rows(6, std::vector<int>{4, 5, 6, 7, 8});
    SequenceBatch batch = SequenceBatch::from_rows(rows, dims.max_len);
    const double nll = metrics::nll_gen(g, batch);
    CHECK(nll == doctest::Approx(5.0 * std::log(10.0)).epsilon(1e-3));

    // Same value sentence by sentence.
    double by_one = 0.0;
    for (int r = 0; r < batch.batch; ++r) by_one += metrics::nll_gen(g, batch.take(r, 1));
    CHECK(by_one / batch.batch == doctest::Approx(nll).epsilon(1e-4));

    CHECK_THROWS_AS(metrics::nll_gen(g, SequenceBatch::empty(8)), ContractError);
}

TEST_CASE("a random generator scores oracle data worse than the oracle itself") {
    OracleSpec spec;
    spec.seed = 3;
    spec.vocab_size = 40;
    spec.seq_len = 8;
    Oracle oracle(spec);
    SequenceBatch corpus = oracle.generate(30);

    ModelDims dims = small_dims(40, 8);
    Generator random_g(VariantTag::Lstm, dims, 5);
    CHECK(oracle.nll(corpus) < metrics::nll_gen(random_g, corpus));
}

TEST_CASE("nll_div limits: collapsed, uniform and all-empty") {
    const ModelDims dims = small_dims(10, 5);

    SUBCASE("near-deterministic generator scores its own output near zero") {
        Generator g(VariantTag::Lstm, dims, 2);
        for (auto& [name, t] : g.parameters()) {
            if (name == "head.b") t.data()[5] = 50.0f;  // always emits token 5
        }
        Rng rng(11);
        auto v = metrics::nll_div(g, 8, rng);
        REQUIRE(v.has_value());
        CHECK(*v == doctest::Approx(0.0).epsilon(1e-4));
    }
    SUBCASE("uniform generator matches length times log V") {
        Generator g(VariantTag::Lstm, dims, 3);
        for (auto& [name, t] : g.parameters()) {
            if (name == "head.w" || name == "head.b") {
                std::fill(t.data().begin(), t.data().end(), 0.0f);
            }
        }
        Rng r1(21), r2(21);
        auto v = metrics::nll_div(g, 32, r1);
        SampleOutput s = sample(g, 32, r2);
        double mean_len = 0.0;
        int live = 0;
        for (int r = 0; r < 32; ++r) {
            if (s.length(r) > 0) {
                mean_len += s.length(r);
                ++live;
            }
        }
        mean_len /= live;
        REQUIRE(v.has_value());
        CHECK(*v == doctest::Approx(mean_len * std::log(10.0)).epsilon(1e-4));

        Rng r3(21);
        auto again = metrics::nll_div(g, 32, r3);
        CHECK(*again == *v);  // fixed seed, reproducible value
    }
    SUBCASE("all-empty samples are undefined") {
        Generator g(VariantTag::Lstm, dims, 4);
        for (auto& [name, t] : g.parameters()) {
            if (name == "head.b") t.data()[kEosId] = 50.0f;
        }
        Rng rng(31);
        CHECK_FALSE(metrics::nll_div(g, 8, rng).has_value());
    }
}

TEST_CASE("collapse report probes") {
    SUBCASE("all-empty sample set") {
        auto rep = collapse_report({TokenSeq{}, TokenSeq{}, TokenSeq{}});
        CHECK(rep.empty_fraction == doctest::Approx(1.0));
        CHECK(rep.flagged);
        CHECK(rep.distinct1 == 0.0);
    }
    SUBCASE("identical non-empty samples flag through self-bleu") {
        std::vector<TokenSeq> same(6, TokenSeq{4, 5, 4, 5});
        auto rep = collapse_report(same);
        CHECK(rep.flagged);
        REQUIRE(rep.self_bleu2.has_value());
        CHECK(*rep.self_bleu2 > 0.95);
        CHECK(rep.distinct1 == doctest::Approx(2.0 / 24.0));
        CHECK(rep.empty_fraction == 0.0);
    }
    SUBCASE("iid uniform corpora stay unflagged across seeds") {
        for (uint64_t seed = 1; seed <= 10; ++seed) {
            Rng rng(seed);
            std::vector<TokenSeq> samples;
            for (int i = 0; i < 24; ++i) {
                TokenSeq s(10);
                for (int& t : s) t = rng.uniform_int(4, 200);
                samples.push_back(std::move(s));
            }
            CHECK_FALSE(collapse_report(samples).flagged);
        }
    }
    CHECK_THROWS_AS(collapse_report({}), ContractError);
}

TEST_CASE("metrics csv format pins columns and nan serialization") {
    CHECK(metrics_csv_header() ==
          "phase,iteration,nll_gen,nll_div,bleu2,bleu3,bleu4,bleu5,"
          "sbleu2,sbleu3,sbleu4,distinct1,distinct2,empty_fraction");

    MetricsRecord rec;
    rec.phase = "adversarial";
    rec.iteration = 7;
    rec.nll_gen = 11.512925;
    rec.nll_div = std::nullopt;
    for (int n = 2; n <= 5; ++n) rec.bleu[n] = std::nullopt;
    for (int n = 2; n <= 4; ++n) rec.self_bleu[n] = std::nullopt;
    rec.distinct1 = 0.5;
    rec.distinct2 = std::nullopt;
    rec.empty_fraction = 1.0;
    CHECK(metrics_csv_row(rec) ==
          "adversarial,7,11.512925,nan,nan,nan,nan,nan,nan,nan,nan,0.500000,nan,1.000000");

    // Same record serializes to identical bytes every time.
    CHECK(metrics_csv_row(rec) == metrics_csv_row(rec));
}
