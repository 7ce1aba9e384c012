#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>

#include "fewgan/config.hpp"
#include "fewgan/generators.hpp"
#include "fewgan/prior.hpp"

namespace fewgan {

inline constexpr uint32_t kCheckpointVersion = 1;

// Container layout (little-endian):
//   "FEWGANCK" | u32 version | u32 section count
//   per section: u32 name length | name | u64 payload length | payload
//   u64 FNV-1a digest of every preceding byte
// Sections: config, specs, status, model, and optionally prior + prior_tag.
struct Checkpoint {
  TrainConfig config;
  PyramidModel model{nullptr};
  AutoregressivePrior prior{nullptr};
  // Codebook tag the prior was trained against.
  uint64_t prior_codebook_tag = 0;
};

// Atomic (temp file + rename). Refuses to write non-finite parameters.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

// Throws UnsupportedVersion, CorruptCheckpoint or CodebookMismatch.
Checkpoint load_checkpoint(const std::filesystem::path& path);

ModelOptions model_options(const TrainConfig& cfg);
PriorOptions prior_options(const TrainConfig& cfg);

// FNV-1a over parameter and buffer names and raw bytes, in registration order.
uint64_t parameter_hash(const torch::nn::Module& module);
uint64_t parameter_hash(const std::vector<torch::Tensor>& tensors);

// Identifies a codebook's exact contents.
uint64_t codebook_tag(const CodebookImpl& codebook);

bool all_finite(const torch::nn::Module& module);

}  // namespace fewgan
