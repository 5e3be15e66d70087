#pragma once

#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "ddcnn/image.hpp"
#include "ddcnn/manifest.hpp"

namespace ddcnn {

/// PSNR of identical images.
inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

struct QualityScore {
  std::string image_id;
  double psnr_db = 0.0;
  double ssim = 0.0;
  double mse = 0.0;
};

/// Mean squared difference over all H*W*C samples.
double mse(const Image& gt, const Image& d);

/// 10 log10(max^2 / mse) in dB; kInfinitePsnr when mse is 0. Samples are
/// scaled by max_value first, so max_value = 255 scores 8-bit values.
double psnr(const Image& gt, const Image& d, double max_value = 1.0);

/// Mean SSIM over all valid 11x11 Gaussian windows (sigma 1.5) with
/// C1 = (0.01 L)^2 and C2 = (0.03 L)^2, L = max_value. RGB is averaged over
/// channels. Needs min(H, W) >= 11.
double ssim(const Image& gt, const Image& d, double max_value = 1.0);

/// Scores, for each record of `split`, restored_dir/<distorted file name>
/// against the record's clean image. Output is in manifest order.
std::vector<QualityScore> evaluate_manifest(const PairManifest& manifest, const std::filesystem::path& restored_dir,
                                            double max_value = 1.0, Split split = Split::Test);

struct HistogramBin {
  double low = 0.0;
  double high = 0.0;
  std::size_t count = 0;
};

struct LinePoint {
  std::size_t index = 0;
  std::string image_id;
  double psnr_db = 0.0;
};

struct ScatterPoint {
  double psnr_db = 0.0;
  double ssim = 0.0;
};

/// Plot-ready datasets. Infinite PSNRs are kept in the line series, left out
/// of the histogram and scatter, and counted in infinite_count.
struct ReportDatasets {
  std::vector<HistogramBin> histogram;
  std::vector<LinePoint> line;
  std::vector<ScatterPoint> scatter;
  std::size_t infinite_count = 0;
};

/// Histogram bins are 1 dB wide on integer boundaries spanning the finite data.
ReportDatasets report_datasets(const std::vector<QualityScore>& scores);

/// "inf" for the infinite sentinel, otherwise shortest round-trip decimal.
std::string format_psnr(double psnr_db);

void write_scores_csv(const std::vector<QualityScore>& scores, const std::filesystem::path& path);
std::vector<QualityScore> read_scores_csv(const std::filesystem::path& path);

/// Writes histogram.csv, line.csv and scatter.csv into out_dir; with svg also
/// histogram.svg, line.svg and scatter.svg. Returns the paths written.
std::vector<std::filesystem::path> write_report(const ReportDatasets& report, const std::filesystem::path& out_dir,
                                                bool svg);

}  // namespace ddcnn
