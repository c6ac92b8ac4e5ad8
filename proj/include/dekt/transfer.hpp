#pragma once

#include <string>

#include "dekt/model.hpp"
#include "dekt/training.hpp"

namespace dekt {

struct CheckpointConfig {
    int d_k = 0;
    int bins = 0;
    std::string variant = "full";
};

// File pair <base>.manifest.json + <base>.blob; the blob is the raw
// little-endian double data of every entry in manifest order.
void save_checkpoint(const ParameterStore& params, const CheckpointConfig& config,
                     const std::string& base_path);

struct Checkpoint {
    ParameterStore params;
    CheckpointConfig config;
};

Checkpoint load_checkpoint(const std::string& base_path);

// Copies the emotion embedding tables, fusion layer and emotion decoder from
// the source and freezes them; everything else is freshly seeded.
ParameterStore transfer_init(const Checkpoint& source, const ModelConfig& target, Rng& rng);

// Names frozen by transfer_init.
std::vector<std::string> transfer_frozen_names();

// Self-loop training on an emotionless dataset, response loss only.
TrainResult train_transfer(const Checkpoint& source, const TrainConfig& cfg, const Dataset& data,
                           const FoldSplit& fold);

} // namespace dekt
