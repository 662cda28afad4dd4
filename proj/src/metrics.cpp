#include "textgan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

namespace textgan {

namespace {

std::string format_cell(const std::optional<double>& v) {
    if (!v.has_value()) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", *v);
    return buf;
}

}  // namespace

std::string metrics_csv_header() {
    return "phase,iteration,nll_gen,nll_div,bleu2,bleu3,bleu4,bleu5,"
           "sbleu2,sbleu3,sbleu4,distinct1,distinct2,empty_fraction";
}

std::string metrics_csv_row(const MetricsRecord& rec) {
    std::string row = rec.phase + "," + std::to_string(rec.iteration);
    row += "," + format_cell(rec.nll_gen);
    row += "," + format_cell(rec.nll_div);
    for (int n = 2; n <= 5; ++n) {
        auto it = rec.bleu.find(n);
        row += "," + format_cell(it == rec.bleu.end() ? std::nullopt : it->second);
    }
    for (int n = 2; n <= 4; ++n) {
        auto it = rec.self_bleu.find(n);
        row += "," + format_cell(it == rec.self_bleu.end() ? std::nullopt : it->second);
    }
    row += "," + format_cell(rec.distinct1);
    row += "," + format_cell(rec.distinct2);
    row += "," + format_cell(rec.empty_fraction);
    return row;
}

std::vector<TokenSeq> batch_token_rows(const SequenceBatch& b) {
    std::vector<TokenSeq> rows;
    rows.reserve(static_cast<size_t>(b.batch));
    for (int r = 0; r < b.batch; ++r) rows.push_back(b.content_row(r));
    return rows;
}

namespace metrics {

double nll_gen(const Generator& g, const SequenceBatch& held_out) {
    if (held_out.batch < 1) throw ContractError("nll_gen: empty evaluation set");
    constexpr int kChunk = 64;
    double total = 0.0;
    for (int begin = 0; begin < held_out.batch; begin += kChunk) {
        const int count = std::min(kChunk, held_out.batch - begin);
        SequenceBatch chunk = held_out.take(begin, count);
        Tensor lp = g.log_prob(chunk);
        for (int r = 0; r < count; ++r) {
            double sentence = 0.0;
            for (int t = 0; t < chunk.length(r); ++t) sentence -= lp.at(r, t);
            total += sentence;
        }
    }
    return total / held_out.batch;
}

std::optional<double> nll_div(const Generator& g, int n_samples, Rng& rng) {
    if (n_samples < 1) throw ContractError("nll_div: n_samples must be >= 1");
    SampleOutput s = sample(g, n_samples, rng);
    double total = 0.0;
    int counted = 0;
    for (int r = 0; r < n_samples; ++r) {
        const int len = s.length(r);
        if (len == 0) continue;
        double sentence = 0.0;
        for (int t = 0; t < len; ++t) sentence -= s.per_token_log_prob.at(r, t);
        total += sentence;
        ++counted;
    }
    if (counted == 0) return std::nullopt;
    return total / counted;
}

namespace {

using NgramCounts = std::map<TokenSeq, int>;

NgramCounts count_ngrams(const TokenSeq& seq, int k) {
    NgramCounts counts;
    if (static_cast<int>(seq.size()) < k) return counts;
    for (size_t i = 0; i + k <= seq.size(); ++i) {
        ++counts[TokenSeq(seq.begin() + static_cast<int64_t>(i),
                          seq.begin() + static_cast<int64_t>(i + k))];
    }
    return counts;
}

// Closest reference length to c; equal distances resolve to the shorter one.
int closest_ref_length(const std::vector<int>& ref_lengths, int c) {
    int best = ref_lengths[0];
    for (int r : ref_lengths) {
        const int d = std::abs(r - c), bd = std::abs(best - c);
        if (d < bd || (d == bd && r < best)) best = r;
    }
    return best;
}

struct RefStats {
    std::vector<NgramCounts> max_counts;  // index k-1
    std::vector<int> lengths;
};

RefStats build_ref_stats(const std::vector<const TokenSeq*>& refs, int n) {
    RefStats stats;
    stats.max_counts.resize(static_cast<size_t>(n));
    for (const TokenSeq* ref : refs) {
        stats.lengths.push_back(static_cast<int>(ref->size()));
        for (int k = 1; k <= n; ++k) {
            for (const auto& [gram, count] : count_ngrams(*ref, k)) {
                int& slot = stats.max_counts[static_cast<size_t>(k - 1)][gram];
                slot = std::max(slot, count);
            }
        }
    }
    return stats;
}

// Sentence BLEU against precomputed reference statistics. max_count_of may
// exclude one reference (the self-BLEU case).
template <typename MaxCountFn>
double sentence_bleu(const TokenSeq& cand, const std::vector<int>& ref_lengths,
                     MaxCountFn&& max_count_of, int n) {
    const int c = static_cast<int>(cand.size());
    double log_p = 0.0;
    for (int k = 1; k <= n; ++k) {
        const NgramCounts cand_counts = count_ngrams(cand, k);
        int total = std::max(c - k + 1, 0);
        int clipped = 0;
        for (const auto& [gram, count] : cand_counts) {
            clipped += std::min(count, max_count_of(k, gram));
        }
        const double numerator = clipped > 0 ? static_cast<double>(clipped) : 0.1;
        const double denominator = std::max(total, 1);
        log_p += std::log(numerator / denominator);
    }
    const int r = closest_ref_length(ref_lengths, c);
    const double bp = c < r ? std::exp(1.0 - static_cast<double>(r) / c) : 1.0;
    return bp * std::exp(log_p / n);
}

}  // namespace

std::optional<double> bleu_n(const std::vector<TokenSeq>& candidates,
                             const std::vector<TokenSeq>& references, int n) {
    if (n < 1) throw ContractError("bleu_n: order must be >= 1");
    std::vector<const TokenSeq*> refs;
    for (const TokenSeq& ref : references) {
        if (!ref.empty()) refs.push_back(&ref);
    }
    if (refs.empty()) throw ContractError("bleu_n: empty reference set");

    const RefStats stats = build_ref_stats(refs, n);
    auto max_count = [&stats](int k, const TokenSeq& gram) {
        const auto& m = stats.max_counts[static_cast<size_t>(k - 1)];
        auto it = m.find(gram);
        return it == m.end() ? 0 : it->second;
    };

    double total = 0.0;
    int counted = 0;
    for (const TokenSeq& cand : candidates) {
        if (cand.empty()) continue;
        total += sentence_bleu(cand, stats.lengths, max_count, n);
        ++counted;
    }
    if (counted == 0) return std::nullopt;
    return total / counted;
}

std::optional<double> self_bleu_n(const std::vector<TokenSeq>& samples, int n) {
    if (n < 1) throw ContractError("self_bleu_n: order must be >= 1");
    if (samples.size() < 2) throw ContractError("self_bleu_n: need at least 2 samples");
    std::vector<const TokenSeq*> live;
    std::vector<int> live_index;
    for (size_t i = 0; i < samples.size(); ++i) {
        if (!samples[i].empty()) {
            live.push_back(&samples[i]);
            live_index.push_back(static_cast<int>(i));
        }
    }
    if (live.size() < 2) return std::nullopt;

    // Top-2 counts per gram allow "max over all references except one" in a
    // single pass instead of rebuilding statistics per candidate.
    struct Top2 {
        int best = 0, second = 0, best_owner = -1;
    };
    std::vector<std::map<TokenSeq, Top2>> tops(static_cast<size_t>(n));
    std::vector<int> lengths;
    for (size_t i = 0; i < live.size(); ++i) {
        lengths.push_back(static_cast<int>(live[i]->size()));
        for (int k = 1; k <= n; ++k) {
            for (const auto& [gram, count] : count_ngrams(*live[i], k)) {
                Top2& t = tops[static_cast<size_t>(k - 1)][gram];
                if (count > t.best) {
                    t.second = t.best;
                    t.best = count;
                    t.best_owner = static_cast<int>(i);
                } else if (count > t.second) {
                    t.second = count;
                }
            }
        }
    }

    double total = 0.0;
    for (size_t i = 0; i < live.size(); ++i) {
        std::vector<int> other_lengths;
        for (size_t j = 0; j < live.size(); ++j) {
            if (j != i) other_lengths.push_back(lengths[j]);
        }
        auto max_count = [&tops, i](int k, const TokenSeq& gram) {
            const auto& m = tops[static_cast<size_t>(k - 1)];
            auto it = m.find(gram);
            if (it == m.end()) return 0;
            return it->second.best_owner == static_cast<int>(i) ? it->second.second
                                                                : it->second.best;
        };
        total += sentence_bleu(*live[i], other_lengths, max_count, n);
    }
    return total / static_cast<double>(live.size());
}

CollapseReport collapse_report(const std::vector<TokenSeq>& samples) {
    if (samples.empty()) throw ContractError("collapse_report: need at least one sample");
    CollapseReport rep;
    int empties = 0;
    for (int k = 1; k <= 2; ++k) {
        std::map<TokenSeq, int> seen;
        int64_t total = 0;
        for (const TokenSeq& s : samples) {
            if (s.empty()) continue;
            for (const auto& [gram, count] : count_ngrams(s, k)) {
                seen[gram] += count;
                total += count;
            }
        }
        const double ratio = total > 0 ? static_cast<double>(seen.size()) / total : 0.0;
        (k == 1 ? rep.distinct1 : rep.distinct2) = ratio;
    }
    for (const TokenSeq& s : samples) {
        if (s.empty()) ++empties;
    }
    rep.empty_fraction = static_cast<double>(empties) / samples.size();
    if (samples.size() >= 2) rep.self_bleu2 = self_bleu_n(samples, 2);
    rep.flagged = rep.empty_fraction > 0.5 ||
                  (rep.self_bleu2.has_value() && *rep.self_bleu2 > 0.95);
    return rep;
}

}  // namespace metrics
}  // namespace textgan
