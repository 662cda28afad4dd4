#pragma once

#include <cstdint>
#include <istream>
#include <string>

#include "textgan/layers.hpp"

namespace textgan {

// Complete description of one run. Serialized as "key = value" pairs under
// named sections; every field is addressable from the config file.
struct RunConfig {
    // [run]
    std::string variant = "lstm";
    uint64_t seed = 42;
    std::string out_dir = "runs/out";

    // [dims] (vocab_size is derived from the data source)
    int d_model = 32;
    int n_layers = 2;
    int n_heads = 4;
    int d_head = 64;
    int d_ff = 128;
    int max_len = 20;

    // [data]
    std::string source = "oracle";  // "oracle" or "corpus"
    uint64_t oracle_seed = 1;
    int oracle_vocab = 5000;
    int oracle_seq_len = 20;
    int train_size = 2000;
    int heldout_size = 500;
    std::string corpus_path;
    int max_vocab = 5000;
    double heldout_fraction = 0.1;
    std::string embedding_path;

    // [train]
    int pretrain_iters = 120;
    int adv_iters = 120;
    int g_steps = 1;
    int d_steps = 3;
    int batch_size = 64;
    int batches_per_iter = 8;
    double lr_mle = 0.0;  // 0 = variant default: 1e-2 for lstm, 1e-3 for transformers
    double lr_adv_g = 1e-4;
    double lr_d = 1e-3;
    double lambda_word = 0.5;
    double lambda_sentence = 0.5;
    bool reward_clip = true;
    double reward_floor = -10.0;
    bool reward_normalize = false;
    bool nan_guard = true;
    bool lr_warmup = false;  // exposed but off: the experiments run without schedulers
    int warmup_iters = 0;
    double dropout = 0.1;

    // [eval]
    int eval_every = 10;
    int eval_samples = 200;
    int bleu_refs_cap = 5000;
    int checkpoint_every = 30;
    int sample_table_size = 10;

    ModelDims model_dims(int vocab_size) const;
    double effective_lr_mle() const;
    void validate() const;
};

RunConfig parse_config(std::istream& in);
RunConfig parse_config_file(const std::string& path);
std::string serialize_config(const RunConfig& cfg);

}  // namespace textgan
