#include "ddcnn/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "ddcnn/error.hpp"
#include "ddcnn/metrics.hpp"
#include "ddcnn/parallel.hpp"

namespace fs = std::filesystem;

namespace ddcnn {
namespace {

struct Validation {
  double loss = 0.0;
  double psnr = 0.0;
};

Validation validate_model(const DenoiserModel& model, const TrainingSet& val) {
  std::vector<Validation> per(val.pairs.size());
  parallel_for(val.pairs.size(), [&](std::size_t i) {
    const auto& p = val.pairs[i];
    const Image restored = restore_image(model, p.distorted, LevelMap::from_value(p.level));
    per[i].loss = mse(p.clean, restored);
    per[i].psnr = psnr(p.clean, restored);
  });
  Validation v;
  for (const auto& x : per) {
    v.loss += x.loss;
    v.psnr += x.psnr;
  }
  v.loss /= static_cast<double>(per.size());
  v.psnr /= static_cast<double>(per.size());
  return v;
}

bool is_bad_loss(double loss, double reference, double factor) {
  return !std::isfinite(loss) || loss > factor * reference;
}

std::string format_value(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string_view phase_name(Phase phase) noexcept {
  switch (phase) {
    case Phase::Initial: return "initial";
    case Phase::Reduced: return "reduced";
    case Phase::Finetune: return "finetune";
  }
  return "initial";
}

TrainConfig TrainConfig::desk() {
  TrainConfig cfg;
  cfg.model.layers = 6;
  cfg.model.hidden_channels = 16;
  cfg.patch_size = 32;
  cfg.batch_size = 16;
  return cfg;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(Errc::InvalidArgument, "train config: " + what); };
  if (patch_size % 2 != 0 || patch_size < 2 * model.kernel) fail("patch size must be even and at least 2x the kernel");
  if (batch_size < 1) fail("batch size must be at least 1");
  if (!(lr_initial > lr_reduced && lr_reduced > lr_finetune && lr_finetune > 0.0)) {
    fail("learning rates must be positive and strictly decreasing across phases");
  }
  if (plateau_epochs < 1) fail("plateau epochs must be at least 1");
  if (finetune_epochs < 0) fail("finetune epochs must be non-negative");
  if (patches_per_epoch < 0) fail("patches per epoch must be non-negative");
  if (epochs_max < 0) fail("epochs_max must be non-negative");
  if (max_steps < 0) fail("max_steps must be non-negative");
  if (divergence_epochs < 1) fail("divergence epochs must be at least 1");
}

void write_report_csv(const TrainReport& report, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << "epoch,phase,lr,train_loss,val_loss,val_psnr\n";
  for (const auto& e : report.epochs) {
    out << e.epoch << ',' << phase_name(e.phase) << ',' << format_value(e.lr) << ',' << format_value(e.train_loss)
        << ',' << format_value(e.val_loss) << ',' << format_psnr(e.val_psnr) << '\n';
  }
  if (!out) throw Error(Errc::IoError, "failed writing " + path.string());
}

TrainingSet TrainingSet::load(const PairManifest& manifest, std::optional<DistortionType> dtype, Split split,
                              bool regenerate_distorted) {
  const auto records = manifest.select(split, dtype);
  TrainingSet set;
  set.pairs.resize(records.size());
  parallel_for(records.size(), [&](std::size_t i) {
    const auto& r = records[i];
    TrainingPair& p = set.pairs[i];
    p.clean = load_image(manifest.clean_file(r));
    p.distorted = regenerate_distorted ? apply_distortion(p.clean, r.spec) : load_image(manifest.distorted_file(r));
    if (!p.clean.same_shape(p.distorted)) {
      throw Error(Errc::ShapeMismatch, "clean and distorted images differ in shape for " + r.distorted_path);
    }
    p.level = level_norm(r.spec.level);
  });
  return set;
}

Batch sample_batch(const TrainingSet& set, int patch_size, int batch_size, Rng& rng) {
  if (set.pairs.empty()) throw Error(Errc::EmptyTrainSet, "no training pairs to sample from");
  const int channels = set.pairs.front().clean.channels();
  Batch batch{Tensor4<float>(batch_size, channels, patch_size, patch_size),
              Tensor4<float>(batch_size, channels, patch_size, patch_size), {}, {}};
  for (int n = 0; n < batch_size; ++n) {
    PatchOrigin origin;
    origin.pair = static_cast<std::size_t>(rng.below(set.pairs.size()));
    const auto& pair = set.pairs[origin.pair];
    if (pair.clean.channels() != channels) throw Error(Errc::ShapeMismatch, "training pairs mix channel counts");
    if (pair.clean.height() < patch_size || pair.clean.width() < patch_size) {
      throw Error(Errc::InvalidArgument, "training image smaller than the patch size");
    }
    origin.top = static_cast<int>(rng.below(static_cast<std::uint64_t>(pair.clean.height() - patch_size + 1)));
    origin.left = static_cast<int>(rng.below(static_cast<std::uint64_t>(pair.clean.width() - patch_size + 1)));
    origin.mode = static_cast<int>(rng.below(kAugmentModes));
    const Image noisy = augment(crop_patch(pair.distorted, origin.top, origin.left, patch_size), origin.mode);
    const Image clean = augment(crop_patch(pair.clean, origin.top, origin.left, patch_size), origin.mode);
    for (int c = 0; c < channels; ++c) {
      for (int y = 0; y < patch_size; ++y) {
        for (int x = 0; x < patch_size; ++x) {
          batch.noisy(n, c, y, x) = noisy.at(y, x, c);
          batch.clean(n, c, y, x) = clean.at(y, x, c);
        }
      }
    }
    batch.levels.push_back(pair.level);
    batch.origins.push_back(origin);
  }
  return batch;
}

Tensor4<float> network_input(const Batch& batch) {
  const Tensor4<float> sub = space_to_depth(batch.noisy);
  Tensor4<float> input(sub.n(), sub.c() + 1, sub.h(), sub.w());
  for (int n = 0; n < sub.n(); ++n) {
    for (int c = 0; c < sub.c(); ++c) std::copy_n(sub.plane_ptr(n, c), sub.plane(), input.plane_ptr(n, c));
    std::fill_n(input.plane_ptr(n, sub.c()), input.plane(), batch.levels[static_cast<std::size_t>(n)]);
  }
  return input;
}

TrainResult train(const PairManifest& manifest, std::optional<DistortionType> dtype, const TrainConfig& config) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  const std::string label = dtype ? std::string(distortion_name(*dtype)) : std::string("any type");

  if (manifest.select(Split::Train, dtype).empty()) {
    throw Error(Errc::EmptyTrainSet, "no train-split pairs for " + label);
  }
  if (manifest.select(Split::Val, dtype).empty()) {
    throw Error(Errc::EmptyTrainSet, "no val-split pairs for " + label);
  }
  const TrainingSet train_set = TrainingSet::load(manifest, dtype, Split::Train, config.regenerate_distorted);
  const TrainingSet val_set = TrainingSet::load(manifest, dtype, Split::Val, config.regenerate_distorted);

  ModelConfig model_config = config.model;
  model_config.image_channels = train_set.pairs.front().clean.channels();
  DenoiserModel model =
      DenoiserModel::create(dtype.value_or(DistortionType::GaussianNoise), model_config, derive_seed(config.seed, {0}));

  TrainReport report;
  const Validation initial = validate_model(model, val_set);
  report.initial_val_loss = initial.loss;
  report.initial_val_psnr = initial.psnr;
  report.best_val_loss = initial.loss;
  report.best_val_psnr = initial.psnr;
  DenoiserModel best = model;

  const int patches =
      config.patches_per_epoch > 0 ? config.patches_per_epoch : 4 * static_cast<int>(train_set.pairs.size());
  const int batches_per_epoch = (patches + config.batch_size - 1) / config.batch_size;

  Phase phase = Phase::Initial;
  AdamState adam;
  adam.lr = config.lr_initial;
  double phase_best = std::numeric_limits<double>::infinity();
  int stale_epochs = 0;
  int finetune_done = 0;
  int bad_epochs = 0;

  for (int epoch = 1; epoch <= config.epochs_max; ++epoch) {
    if (config.max_steps > 0 && report.steps >= config.max_steps) break;
    if (phase == Phase::Finetune && finetune_done >= config.finetune_epochs) break;
    if (config.before_epoch) config.before_epoch(model, epoch);

    double loss_sum = 0.0;
    int loss_count = 0;
    bool non_finite = false;
    try {
      for (int b = 0; b < batches_per_epoch; ++b) {
        if (config.max_steps > 0 && report.steps >= config.max_steps) break;
        Rng rng(derive_seed(config.seed, {1, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(b)}));
        const Batch batch = sample_batch(train_set, config.patch_size, config.batch_size, rng);
        ForwardTrace<float> trace;
        const auto prediction = model.net.forward(network_input(batch), Mode::Train, &trace);
        const auto loss = mse_loss(prediction, space_to_depth(batch.clean));
        const auto grads = model.net.backward(trace, loss.grad);
        const auto refs = param_refs(model.net, grads);
        adam_step(std::span<const ParamRef<float>>(refs), adam);
        ++report.steps;
        loss_sum += loss.loss;
        ++loss_count;
      }
    } catch (const Error& e) {
      if (e.code() != Errc::NonFinite) throw;
      non_finite = true;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.phase = phase;
    record.lr = adam.lr;
    record.train_loss = non_finite || loss_count == 0 ? std::numeric_limits<double>::quiet_NaN() : loss_sum / loss_count;
    Validation v{std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    if (!non_finite) {
      try {
        v = validate_model(model, val_set);
      } catch (const Error& e) {
        if (e.code() != Errc::NonFinite) throw;
      }
    }
    record.val_loss = v.loss;
    record.val_psnr = v.psnr;
    report.epochs.push_back(record);
    if (config.on_epoch) config.on_epoch(record);

    const bool bad = is_bad_loss(record.train_loss, initial.loss, config.divergence_factor) ||
                     is_bad_loss(record.val_loss, initial.loss, config.divergence_factor);
    bad_epochs = bad ? bad_epochs + 1 : 0;
    if (bad_epochs >= config.divergence_epochs) {
      throw Error(Errc::DivergenceDetected, "training diverged: " + std::to_string(bad_epochs) +
                                                " consecutive epochs with NaN or exploding loss (last epoch " +
                                                std::to_string(epoch) + ")");
    }
    if (bad) continue;

    // Never hand back something worse than the initial model.
    if (v.psnr > report.best_val_psnr && v.loss <= initial.loss) {
      best = model;
      report.best_epoch = epoch;
      report.best_val_psnr = v.psnr;
      report.best_val_loss = v.loss;
    }

    if (phase == Phase::Finetune) {
      ++finetune_done;
      continue;
    }
    if (v.loss < phase_best * (1.0 - config.plateau_threshold)) {
      phase_best = v.loss;
      stale_epochs = 0;
    } else if (++stale_epochs >= config.plateau_epochs) {
      stale_epochs = 0;
      phase_best = v.loss;
      if (phase == Phase::Initial) {
        phase = Phase::Reduced;
        adam.lr = config.lr_reduced;
      } else {
        phase = Phase::Finetune;
        model = fold_batchnorm(model);
        adam = AdamState{};
        adam.lr = config.lr_finetune;
      }
    }
  }

  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  if (!config.checkpoint_path.empty()) {
    save_model(best, config.checkpoint_path);
    report.best_checkpoint = config.checkpoint_path;
    fs::path csv = config.checkpoint_path;
    csv.replace_extension(".csv");
    write_report_csv(report, csv);
  }
  return TrainResult{std::move(best), std::move(report)};
}

}  // namespace ddcnn
