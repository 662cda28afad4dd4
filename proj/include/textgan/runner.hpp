#pragma once

#include <optional>
#include <string>
#include <vector>

#include "textgan/adversary.hpp"
#include "textgan/checkpoint.hpp"
#include "textgan/config.hpp"
#include "textgan/metrics.hpp"
#include "textgan/report.hpp"

namespace textgan {

struct RunDataset {
    Vocabulary vocab;
    SequenceBatch train;
    SequenceBatch heldout;
};

// Builds the run's data: a seeded synthetic-oracle corpus or a text corpus
// with a deterministic held-out split.
RunDataset prepare_dataset(const RunConfig& cfg);
// Same, but encoding with a fixed vocabulary (checkpoint resumption).
RunDataset prepare_dataset(const RunConfig& cfg, const Vocabulary& vocab);

struct RunResult {
    std::vector<MetricsRecord> records;   // records emitted by this call
    std::string final_checkpoint;
    bool collapse_flagged = false;        // any evaluation tripped the collapse flag
};

// Teacher-forced maximum-likelihood phase. Emits the iteration-0 record, then
// evaluates every eval_every iterations and at the end; checkpoints every
// checkpoint_every iterations and at the end. A non-finite loss dumps a
// diagnostic checkpoint, leaves the partial CSV behind and rethrows.
RunResult run_pretrain(const RunConfig& cfg, const std::string& resume_from = "");

// Adversarial phase from a pretrained checkpoint: g_steps policy-gradient
// generator updates then d_steps discriminator updates per iteration.
// Degenerate (all-empty) generator output never crashes the run; undefined
// metrics serialize as "nan".
RunResult run_adversarial(const RunConfig& cfg, const std::string& pretrained_ckpt);

// Canned configurations reproducing the three experiments at either scale;
// baseline selects the LSTM twin run.
RunConfig experiment_config(int id, const std::string& scale, const std::string& data_dir,
                            const std::string& out_root, uint64_t seed, bool baseline);

struct ExperimentResult {
    std::string baseline_dir;
    std::string variant_dir;
};

// Runs the experiment variant and its LSTM baseline under the identical
// budget, emits per-run reports and paired comparison charts.
ExperimentResult run_experiment(int id, const std::string& scale, const std::string& data_dir,
                                const std::string& out_root, uint64_t seed);

// Restores a generator (and its vocabulary) from a checkpoint.
struct RestoredGenerator {
    Generator generator;
    Vocabulary vocab;
    RunConfig config;
    CheckpointMeta meta;
};
RestoredGenerator restore_generator(const std::string& ckpt_path);

}  // namespace textgan
