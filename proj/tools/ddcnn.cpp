// ddcnn command-line front end: synth, train, restore, eval, report.

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ddcnn/dispatcher.hpp"
#include "ddcnn/error.hpp"
#include "ddcnn/image.hpp"
#include "ddcnn/manifest.hpp"
#include "ddcnn/metrics.hpp"
#include "ddcnn/parallel.hpp"
#include "ddcnn/trainer.hpp"

namespace fs = std::filesystem;
using namespace ddcnn;

namespace {

constexpr int kExitUsage = 2;

int exit_code(Errc code) {
  switch (code) {
    case Errc::InvalidArgument:
    case Errc::InvalidSpec:
      return kExitUsage;
    case Errc::FileNotFound:
    case Errc::IoError:
      return 3;
    case Errc::EmptyInput: return 4;
    case Errc::EmptyTrainSet: return 5;
    case Errc::DivergenceDetected: return 6;
    case Errc::NoSpecialist: return 7;
    case Errc::MissingRestoredFile: return 8;
    case Errc::EmptyScores: return 9;
    case Errc::UnsupportedFormat: return 10;
    case Errc::CorruptData: return 11;
    case Errc::ParseError: return 12;
    case Errc::TagMismatch: return 13;
    case Errc::FormatVersionMismatch: return 14;
    case Errc::ChecksumMismatch: return 15;
    case Errc::InvalidDimensions:
    case Errc::InvalidShape:
    case Errc::ShapeMismatch:
    case Errc::OddDimensions:
    case Errc::BadChannelCount:
      return 16;
    case Errc::TooSmall: return 17;
    case Errc::NonFinite: return 18;
    case Errc::DegenerateBatch: return 19;
    case Errc::AlreadyFolded:
    case Errc::UnpopulatedStats:
      return 20;
    case Errc::OutOfBounds:
    case Errc::InvalidMode:
      return 21;
  }
  return 1;
}

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string valid_type_list() {
  std::string out;
  for (const auto t : all_distortion_types()) {
    if (!out.empty()) out += ", ";
    out += distortion_name(t);
  }
  return out;
}

DistortionType parse_dtype(const std::string& name) {
  const auto t = parse_distortion_name(name);
  if (!t) throw UsageError("unknown distortion type '" + name + "'; valid types: " + valid_type_list());
  return *t;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_number(const std::string& text, const std::string& flag) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw UsageError(flag + ": '" + text + "' is not a number");
}

std::string fmt(double v, int digits = 4) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::vector<fs::path> png_inputs(const fs::path& input) {
  std::error_code ec;
  if (fs::is_regular_file(input, ec)) return {input};
  if (!fs::is_directory(input, ec)) throw Error(Errc::FileNotFound, "input not found: " + input.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(input)) {
    if (!e.is_regular_file()) continue;
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(Errc::EmptyInput, "no PNG files in " + input.string());
  return files;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::IoError, "cannot create directory " + dir.string() + ": " + ec.message());
}

// --- synth ---------------------------------------------------------------

struct SynthArgs {
  std::string input_dir, output_dir, types, levels, split = "0.8,0.1,0.1";
  int per_image = 50;
  std::uint64_t seed = 0;
  int size = 0;
};

void add_synth(CLI::App& app, SynthArgs& a) {
  auto* cmd = app.add_subcommand("synth", "Synthesize distorted/clean pairs and manifest.jsonl from clean PNGs");
  cmd->add_option("--input-dir", a.input_dir, "Directory of clean PNG images")->required();
  cmd->add_option("--output-dir", a.output_dir, "Dataset output directory (clean/, distorted/, manifest.jsonl)")
      ->required();
  cmd->add_option("--per-image", a.per_image, "Distorted variants per clean image (>= 1)")->capture_default_str();
  cmd->add_option("--seed", a.seed, "Dataset seed")->capture_default_str();
  cmd->add_option("--types", a.types, "Comma-separated distortion types (default: all twelve)");
  cmd->add_option("--levels", a.levels, "Comma-separated severity levels 1..5 (default: all five)");
  cmd->add_option("--split", a.split, "Train,val,test fractions summing to 1")->capture_default_str();
  cmd->add_option("--size", a.size, "Centre-crop to square and resize to this side (0 keeps native size)")
      ->capture_default_str();
}

int run_synth(const SynthArgs& a) {
  if (a.per_image < 1) throw UsageError("--per-image must be at least 1");
  if (a.size < 0) throw UsageError("--size must be non-negative");
  SynthConfig cfg;
  cfg.per_image = a.per_image;
  cfg.seed = a.seed;
  cfg.canonical_size = a.size;
  for (const auto& name : split_list(a.types)) cfg.types.push_back(parse_dtype(name));
  for (const auto& l : split_list(a.levels)) {
    const double v = parse_number(l, "--levels");
    if (v != std::floor(v) || v < kMinLevel || v > kMaxLevel) throw UsageError("--levels: '" + l + "' is not in 1..5");
    cfg.levels.push_back(static_cast<int>(v));
  }
  const auto fractions = split_list(a.split);
  if (fractions.size() != 3) throw UsageError("--split needs three comma-separated fractions");
  for (int i = 0; i < 3; ++i) cfg.split_fractions[i] = parse_number(fractions[i], "--split");

  const auto manifest = synthesize_dataset(a.input_dir, a.output_dir, cfg);
  std::size_t counts[3] = {0, 0, 0};
  for (const auto& r : manifest.records) ++counts[static_cast<int>(r.split)];
  std::cout << manifest.records.size() << " pairs written (train " << counts[0] << ", val " << counts[1]
            << ", test " << counts[2] << ") to " << a.output_dir << "\n";
  return 0;
}

// --- train ---------------------------------------------------------------

struct TrainArgs {
  std::string manifest, dtype, out, registry;
  int patch = 128, batch = 128, epochs_max = 1000, channels = 64, layers = 17, kernel = 3;
  double lr = 1e-3;
  std::int64_t max_steps = 0;
  std::uint64_t seed = 0;
  bool desk = false;
  CLI::App* cmd = nullptr;
};

void add_train(CLI::App& app, TrainArgs& a) {
  auto* cmd = app.add_subcommand("train", "Train one specialist denoiser on a manifest's train split");
  a.cmd = cmd;
  cmd->add_option("--manifest", a.manifest, "Path to manifest.jsonl")->required();
  cmd->add_option("--dtype", a.dtype, "Distortion type to specialise on")->required();
  cmd->add_option("--out", a.out, "Checkpoint path; the epoch log is written next to it as .csv")->required();
  cmd->add_option("--patch", a.patch, "Training patch size (even)")->capture_default_str();
  cmd->add_option("--batch", a.batch, "Mini-batch size")->capture_default_str();
  cmd->add_option("--lr", a.lr, "Initial learning rate")->capture_default_str();
  cmd->add_option("--epochs-max", a.epochs_max, "Epoch cap across all phases (0 saves the initialized model)")
      ->capture_default_str();
  cmd->add_option("--max-steps", a.max_steps, "Optimizer step cap (0 for none)")->capture_default_str();
  cmd->add_option("--channels", a.channels, "Hidden feature channels")->capture_default_str();
  cmd->add_option("--layers", a.layers, "Convolution layers")->capture_default_str();
  cmd->add_option("--kernel", a.kernel, "Convolution kernel size")->capture_default_str();
  cmd->add_option("--seed", a.seed, "Initialization and sampling seed")->capture_default_str();
  cmd->add_flag("--desk", a.desk, "Desk profile: channels 16, layers 6, patch 32, batch 16 (explicit flags win)");
  cmd->add_option("--registry", a.registry, "Also register the checkpoint in this registry.json (created if absent)");
}

int run_train(const TrainArgs& a) {
  const DistortionType dtype = parse_dtype(a.dtype);
  TrainConfig cfg = a.desk ? TrainConfig::desk() : TrainConfig{};
  const auto given = [&](const char* flag) { return !a.desk || a.cmd->count(flag) > 0; };
  if (given("--patch")) cfg.patch_size = a.patch;
  if (given("--batch")) cfg.batch_size = a.batch;
  if (given("--channels")) cfg.model.hidden_channels = a.channels;
  if (given("--layers")) cfg.model.layers = a.layers;
  if (given("--kernel")) cfg.model.kernel = a.kernel;
  cfg.lr_initial = a.lr;
  cfg.epochs_max = a.epochs_max;
  cfg.max_steps = a.max_steps;
  cfg.seed = a.seed;
  cfg.checkpoint_path = a.out;
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  cfg.on_epoch = [](const EpochRecord& r) {
    std::cerr << "epoch " << r.epoch << " [" << phase_name(r.phase) << "] lr " << r.lr << " train " << fmt(r.train_loss, 6)
              << " val " << fmt(r.val_loss, 6) << " psnr " << fmt(r.val_psnr, 3) << "\n";
  };

  const auto manifest = load_manifest(a.manifest);
  if (fs::path(a.out).has_parent_path()) ensure_dir(fs::path(a.out).parent_path());
  const auto result = train(manifest, dtype, cfg);
  const auto& rep = result.report;
  std::cout << "trained " << distortion_name(dtype) << " specialist: " << rep.epochs.size() << " epochs, " << rep.steps
            << " steps; val PSNR " << fmt(rep.initial_val_psnr, 3) << " dB -> best " << fmt(rep.best_val_psnr, 3)
            << " dB (epoch " << rep.best_epoch << "); saved " << a.out << "\n";

  if (!a.registry.empty()) {
    const fs::path reg_path = a.registry;
    std::error_code ec;
    DenoiserRegistry reg = fs::exists(reg_path, ec) ? DenoiserRegistry::load(reg_path) : DenoiserRegistry{};
    fs::path ckpt = fs::absolute(a.out);
    const fs::path base = reg_path.has_parent_path() ? fs::absolute(reg_path.parent_path()) : fs::current_path();
    reg.register_specialist(dtype, ckpt.lexically_relative(base).empty() ? ckpt : ckpt.lexically_relative(base));
    reg.save(reg_path);
    std::cout << "registered in " << a.registry << "\n";
  }
  return 0;
}

// --- restore -------------------------------------------------------------

struct RestoreArgs {
  std::string registry, input, dtype, output, manifest, split = "test";
  int level = 0;
};

void add_restore(CLI::App& app, RestoreArgs& a) {
  auto* cmd = app.add_subcommand("restore", "Restore images with the registered specialist for their distortion type");
  cmd->add_option("--registry", a.registry, "registry.json mapping distortion types to checkpoints")->required();
  cmd->add_option("--output", a.output, "Output directory; files keep their input names")->required();
  cmd->add_option("--input", a.input, "Input PNG or directory of PNGs (single-type mode)");
  cmd->add_option("--dtype", a.dtype, "Declared distortion type of --input");
  cmd->add_option("--level", a.level, "Declared severity level 1..5 of --input");
  cmd->add_option("--manifest", a.manifest, "Restore every record of a manifest split using its own spec");
  cmd->add_option("--split", a.split, "Manifest split to restore (train, val, test)")->capture_default_str();
}

int run_restore(const RestoreArgs& a) {
  const bool manifest_mode = !a.manifest.empty();
  if (manifest_mode == !a.input.empty()) throw UsageError("give exactly one of --input or --manifest");
  const auto registry = DenoiserRegistry::load(a.registry);
  const fs::path out_dir = a.output;
  std::size_t written = 0;

  if (manifest_mode) {
    const auto split = parse_split(a.split);
    if (!split) throw UsageError("--split must be train, val or test");
    const auto manifest = load_manifest(a.manifest);
    const auto records = manifest.select(*split);
    for (const auto& r : records) {
      if (!registry.contains(r.spec.dtype)) {
        throw Error(Errc::NoSpecialist,
                    "no specialist registered for " + std::string(distortion_name(r.spec.dtype)));
      }
    }
    ensure_dir(out_dir);
    for (const auto& r : records) {
      const fs::path src = manifest.distorted_file(r);
      const Image restored = registry.restore(load_image(src), r.spec);
      save_image(restored, out_dir / src.filename());
      ++written;
    }
  } else {
    if (a.dtype.empty()) throw UsageError("--dtype is required with --input");
    if (a.level < kMinLevel || a.level > kMaxLevel) throw UsageError("--level must be in 1..5");
    DistortionSpec spec;
    spec.dtype = parse_dtype(a.dtype);
    spec.level = a.level;
    const auto files = png_inputs(a.input);
    if (!registry.contains(spec.dtype)) {
      throw Error(Errc::NoSpecialist, "no specialist registered for " + std::string(distortion_name(spec.dtype)));
    }
    ensure_dir(out_dir);
    for (const auto& f : files) {
      save_image(registry.restore(load_image(f), spec), out_dir / f.filename());
      ++written;
    }
  }
  std::cout << written << " images restored to " << a.output << "\n";
  return 0;
}

// --- eval / report -------------------------------------------------------

struct EvalArgs {
  std::string manifest, restored_dir, out, split = "test";
  double max_value = 1.0;
};

void add_eval(CLI::App& app, EvalArgs& a) {
  auto* cmd = app.add_subcommand("eval", "Score restored images against their clean references");
  cmd->add_option("--manifest", a.manifest, "Path to manifest.jsonl")->required();
  cmd->add_option("--restored-dir", a.restored_dir, "Directory holding restored images named like the distorted ones")
      ->required();
  cmd->add_option("--out", a.out, "Scores CSV (image_id,psnr_db,ssim,mse)")->required();
  cmd->add_option("--max", a.max_value, "Peak signal value (1.0, or 255 to score on the 8-bit scale)")
      ->capture_default_str();
  cmd->add_option("--split", a.split, "Manifest split to score (train, val, test)")->capture_default_str();
}

int run_eval(const EvalArgs& a) {
  if (!(a.max_value > 0.0)) throw UsageError("--max must be positive");
  const auto split = parse_split(a.split);
  if (!split) throw UsageError("--split must be train, val or test");
  const auto manifest = load_manifest(a.manifest);
  const auto scores = evaluate_manifest(manifest, a.restored_dir, a.max_value, *split);
  if (scores.empty()) throw Error(Errc::EmptyScores, "no " + a.split + " records to score");
  if (fs::path(a.out).has_parent_path()) ensure_dir(fs::path(a.out).parent_path());
  write_scores_csv(scores, a.out);
  double psnr_sum = 0.0, ssim_sum = 0.0;
  for (const auto& s : scores) {
    psnr_sum += s.psnr_db;
    ssim_sum += s.ssim;
  }
  const double n = static_cast<double>(scores.size());
  std::cout << scores.size() << " images scored: mean PSNR " << fmt(psnr_sum / n) << " dB, mean SSIM "
            << fmt(ssim_sum / n) << "\n";
  return 0;
}

struct ReportArgs {
  std::string scores, out_dir;
  bool svg = false;
};

void add_report(CLI::App& app, ReportArgs& a) {
  auto* cmd = app.add_subcommand("report", "Build histogram, line and scatter datasets from a scores CSV");
  cmd->add_option("--scores", a.scores, "Scores CSV written by eval")->required();
  cmd->add_option("--out-dir", a.out_dir, "Directory for histogram.csv, line.csv, scatter.csv")->required();
  cmd->add_flag("--svg", a.svg, "Also write simple SVG charts");
}

int run_report(const ReportArgs& a) {
  const auto scores = read_scores_csv(a.scores);
  const auto report = report_datasets(scores);
  ensure_dir(a.out_dir);
  const auto files = write_report(report, a.out_dir, a.svg);
  std::cout << "report over " << scores.size() << " scores (" << report.histogram.size() << " bins, "
            << report.infinite_count << " infinite) written to " << a.out_dir << "\n";
  for (const auto& f : files) std::cout << "  " << f.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distortion-specific denoising: dataset synthesis, training, restoration and evaluation"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: $DDCNN_THREADS, else all cores)");

  SynthArgs synth;
  TrainArgs train_args;
  RestoreArgs restore;
  EvalArgs eval;
  ReportArgs report;
  add_synth(app, synth);
  add_train(app, train_args);
  add_restore(app, restore);
  add_eval(app, eval);
  add_report(app, report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (threads == 0) {
      if (const char* env = std::getenv("DDCNN_THREADS"); env && *env) {
        const double v = parse_number(env, "DDCNN_THREADS");
        if (v < 1 || v != std::floor(v)) throw UsageError("DDCNN_THREADS must be a positive integer");
        threads = static_cast<int>(v);
      }
    } else if (threads < 0) {
      throw UsageError("--threads must be positive");
    }
    if (threads > 0) set_num_threads(threads);

    if (app.got_subcommand("synth")) return run_synth(synth);
    if (app.got_subcommand("train")) return run_train(train_args);
    if (app.got_subcommand("restore")) return run_restore(restore);
    if (app.got_subcommand("eval")) return run_eval(eval);
    if (app.got_subcommand("report")) return run_report(report);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error [" << errc_name(e.code()) << "]: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitUsage;
}
