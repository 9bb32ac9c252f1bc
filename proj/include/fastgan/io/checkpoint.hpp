#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fastgan/training/trainer.hpp"

namespace fastgan::io {

inline constexpr int kCheckpointVersion = 1;

struct ManifestEntry {
  std::string name;
  Shape shape;
  std::uint64_t offset = 0;  // bytes into params.bin
  std::uint64_t length = 0;  // bytes
};

struct CheckpointManifest {
  int format_version = kCheckpointVersion;
  ModelConfig model;
  train::TrainConfig train;
  std::int64_t step = 0;
  std::string rng_state;
  std::int64_t opt_g_step = 0;
  std::int64_t opt_d_step = 0;
  std::vector<ManifestEntry> entries;

  // Offsets sorted, non-overlapping, contiguous from 0; lengths match shapes.
  void validate() const;
};

// Writes <dir>/manifest.json and <dir>/params.bin (little-endian f32).
void save_checkpoint(const std::filesystem::path& dir, train::Trainer& trainer);

CheckpointManifest read_manifest(const std::filesystem::path& dir);

// Rebuilds the trainer stored in `dir`. `train_override` replaces the stored
// TrainConfig (e.g. a longer iteration budget on resume).
std::unique_ptr<train::Trainer> load_checkpoint(
    const std::filesystem::path& dir, const std::optional<train::TrainConfig>& train_override = {});

}  // namespace fastgan::io
