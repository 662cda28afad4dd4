#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "textgan/config.hpp"
#include "textgan/data.hpp"
#include "textgan/tensor.hpp"

namespace textgan {

struct CheckpointMeta {
    std::string phase = "pretrain";
    int iteration = 0;
    std::string variant = "lstm";
    double baseline = 0.0;
    bool baseline_init = false;
    int64_t adam_steps_g = 0;
    int64_t adam_steps_d = 0;
};

struct LoadedCheckpoint {
    RunConfig config;
    CheckpointMeta meta;
    Vocabulary vocab;
    std::map<std::string, Tensor> tensors;

    const Tensor& tensor(const std::string& name) const;
    bool has(const std::string& name) const { return tensors.count(name) != 0; }
};

// Single file: a structured text manifest (run config, training state,
// vocabulary, tensor index with shapes and float offsets) followed by one
// contiguous little-endian float32 payload. Round trips are bit-exact.
void save_checkpoint(const std::string& path, const RunConfig& cfg, const CheckpointMeta& meta,
                     const Vocabulary& vocab, const NamedTensors& tensors);

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace textgan
