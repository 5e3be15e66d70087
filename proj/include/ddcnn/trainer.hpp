#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "ddcnn/manifest.hpp"
#include "ddcnn/model.hpp"
#include "ddcnn/rng.hpp"

namespace ddcnn {

enum class Phase { Initial, Reduced, Finetune };
std::string_view phase_name(Phase phase) noexcept;

struct EpochRecord {
  int epoch = 0;
  Phase phase = Phase::Initial;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_psnr = 0.0;
};

struct TrainConfig {
  int patch_size = 128;
  int batch_size = 128;
  double lr_initial = 1e-3;
  double lr_reduced = 1e-4;
  double lr_finetune = 1e-6;
  /// Epochs without a relative validation-loss improvement above
  /// plateau_threshold that end a phase.
  int plateau_epochs = 5;
  double plateau_threshold = 1e-3;
  int finetune_epochs = 50;
  /// 0 means 4 patches per training pair.
  int patches_per_epoch = 0;
  std::uint64_t seed = 0;
  /// Hard cap on epochs across all phases.
  int epochs_max = 1000;
  /// Hard cap on optimiser steps; 0 means none.
  std::int64_t max_steps = 0;
  /// Epochs whose loss is NaN or above divergence_factor x the initial
  /// validation loss, this many in a row, abort training.
  int divergence_epochs = 3;
  double divergence_factor = 10.0;
  ModelConfig model;
  /// Re-synthesize distorted inputs from clean image + spec instead of reading
  /// the 8-bit distorted files, so training sees unquantized data.
  bool regenerate_distorted = true;
  /// When set, the best model is written here and the report next to it (.csv).
  std::filesystem::path checkpoint_path;

  /// Called after each completed epoch.
  std::function<void(const EpochRecord&)> on_epoch;
  /// Called before each epoch with the model being trained.
  std::function<void(DenoiserModel&, int epoch)> before_epoch;

  /// The scaled-down profile: 6 layers, 16 channels, 32 px patches, batch 16.
  static TrainConfig desk();
  /// Throws InvalidArgument naming the broken rule.
  void validate() const;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  double initial_val_loss = 0.0;
  double initial_val_psnr = 0.0;
  /// 0 when the initial model was never beaten.
  int best_epoch = 0;
  double best_val_loss = 0.0;
  double best_val_psnr = 0.0;
  std::int64_t steps = 0;
  double wall_seconds = 0.0;
  std::filesystem::path best_checkpoint;
};

/// epoch,phase,lr,train_loss,val_loss,val_psnr
void write_report_csv(const TrainReport& report, const std::filesystem::path& path);

struct TrainingPair {
  Image clean;
  Image distorted;
  float level = 0.0f;
};

/// In-memory pairs for one split, optionally restricted to one distortion type.
struct TrainingSet {
  std::vector<TrainingPair> pairs;

  static TrainingSet load(const PairManifest& manifest, std::optional<DistortionType> dtype, Split split,
                          bool regenerate_distorted);
};

/// Where one batch entry came from.
struct PatchOrigin {
  std::size_t pair = 0;
  int top = 0;
  int left = 0;
  int mode = 0;
};

struct Batch {
  Tensor4<float> noisy;  // (N, C, P, P)
  Tensor4<float> clean;  // (N, C, P, P)
  std::vector<float> levels;
  std::vector<PatchOrigin> origins;
};

/// Random aligned patch pairs: each entry uses one crop window and one
/// augmentation mode for both its distorted and clean patch.
Batch sample_batch(const TrainingSet& set, int patch_size, int batch_size, Rng& rng);

/// (N, 4C+1, P/2, P/2) network input: unshuffled noisy patches plus level channel.
Tensor4<float> network_input(const Batch& batch);

struct TrainResult {
  DenoiserModel model;
  TrainReport report;
};

/// Trains one specialist on the train split (dtype filter, or every type when
/// empty), validating on the val split after each epoch. Returns the
/// checkpoint with the best validation PSNR.
TrainResult train(const PairManifest& manifest, std::optional<DistortionType> dtype, const TrainConfig& config);

}  // namespace ddcnn
