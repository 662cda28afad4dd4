#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "textgan/generator.hpp"

namespace textgan {

using TokenSeq = std::vector<int>;

// One evaluation snapshot. Undefined values (metrics over an all-empty sample
// set) stay disengaged and serialize as the literal "nan".
struct MetricsRecord {
    std::string phase;  // "pretrain" or "adversarial"
    int iteration = 0;
    std::optional<double> nll_gen;  // nats per sentence
    std::optional<double> nll_div;
    std::map<int, std::optional<double>> bleu;       // orders 2..5
    std::map<int, std::optional<double>> self_bleu;  // orders 2..4
    std::optional<double> distinct1, distinct2, empty_fraction;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRecord& rec);

// Content token rows of a batch (eos and padding stripped).
std::vector<TokenSeq> batch_token_rows(const SequenceBatch& b);

namespace metrics {

// Mean over sentences of the summed content-token negative log-likelihood
// under the generator; invariant to how the set is batched.
double nll_gen(const Generator& g, const SequenceBatch& held_out);

// Draws n_samples from g and returns their mean sentence NLL under g itself
// (the diversity probe: low values mean the generator concentrates).
// Undefined when every sample is empty.
std::optional<double> nll_div(const Generator& g, int n_samples, Rng& rng);

// Mean sentence-level BLEU with uniform 1/n weights over orders 1..n, clipped
// modified precision, brevity penalty exp(1 - r/c) for c < r against the
// closest reference length. A zero clipped count is smoothed by replacing the
// numerator with 0.1. Empty candidates are excluded; undefined when all
// candidates are empty.
std::optional<double> bleu_n(const std::vector<TokenSeq>& candidates,
                             const std::vector<TokenSeq>& references, int n);

// Mean over samples of BLEU-n against all other samples; high = low
// diversity. Undefined with fewer than two non-empty samples.
std::optional<double> self_bleu_n(const std::vector<TokenSeq>& samples, int n);

struct CollapseReport {
    double distinct1 = 0.0;
    double distinct2 = 0.0;
    double empty_fraction = 0.0;
    std::optional<double> self_bleu2;
    bool flagged = false;
};

// Mode-collapse probes: distinct k-gram ratios over non-empty samples, the
// empty fraction, and the flag (empty_fraction > 0.5 or self-BLEU-2 > 0.95).
CollapseReport collapse_report(const std::vector<TokenSeq>& samples);

}  // namespace metrics
}  // namespace textgan
