#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "textgan/generator.hpp"

namespace textgan::testutil {

inline ModelDims small_dims(int vocab, int max_len = 10, int n_layers = 1) {
    ModelDims dims;
    dims.d_model = 8;
    dims.n_layers = n_layers;
    dims.n_heads = 2;
    dims.d_head = 4;
    dims.d_ff = 16;
    dims.max_len = max_len;
    dims.vocab_size = vocab;
    return dims;
}

inline SequenceBatch random_content_batch(int n, int len, int vocab, int max_len, Rng& rng) {
    std::vector<std::vector<int>> rows;
    for (int i = 0; i < n; ++i) {
        std::vector<int> row(static_cast<size_t>(len));
        for (int& id : row) id = rng.uniform_int(kReservedTokens, vocab);
        rows.push_back(std::move(row));
    }
    return SequenceBatch::from_rows(rows, max_len);
}

// Perturbs teacher tokens at positions > t while holding the encoder source
// fixed and reports the largest change over logits slots 0..t. Causal
// variants must report ~0; the encoder-only variant is expected to leak.
inline float causality_probe(const Generator& g, uint64_t seed, int t) {
    Rng rng(seed);
    const int L = g.dims().max_len;
    const int V = g.dims().vocab_size;
    SequenceBatch teacher = random_content_batch(1, L - 1, V, L, rng);
    SequenceBatch perturbed = teacher;
    for (int j = t + 1; j < teacher.length(0); ++j) {
        int fresh = rng.uniform_int(kReservedTokens, V);
        if (fresh == perturbed.at(0, j)) fresh = kReservedTokens + (fresh + 1 - kReservedTokens) % (V - kReservedTokens);
        perturbed.at(0, j) = fresh;
    }
    Tensor base = g.forward_teacher(teacher, teacher);
    Tensor bumped = g.forward_teacher(teacher, perturbed);
    float worst = 0.0f;
    for (int slot = 0; slot <= t; ++slot) {
        for (int v = 0; v < V; ++v) {
            const size_t idx = static_cast<size_t>(slot) * V + v;
            worst = std::max(worst, std::fabs(base.data()[idx] - bumped.data()[idx]));
        }
    }
    return worst;
}

}  // namespace textgan::testutil
