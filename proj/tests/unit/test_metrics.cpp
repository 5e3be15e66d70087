#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "ddcnn/rng.hpp"
#include "ddcnn/error.hpp"
#include "ddcnn/metrics.hpp"
#include "textures.hpp"

using namespace ddcnn;
namespace fs = std::filesystem;

namespace {

double mse_oracle(const Image& a, const Image& b) {
  double acc = 0.0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x)
      for (int c = 0; c < a.channels(); ++c) {
        const double d = double(a.at(y, x, c)) - double(b.at(y, x, c));
        acc += d * d;
      }
  return acc / (a.height() * a.width() * a.channels());
}

// Direct 11x11 windowed SSIM with a 2-D Gaussian built from scratch.
double ssim_oracle(const Image& a, const Image& b, double L = 1.0) {
  double win[11][11];
  double norm = 0.0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) {
      win[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2 * 1.5 * 1.5));
      norm += win[i][j];
    }
  const double c1 = std::pow(0.01 * L, 2), c2 = std::pow(0.03 * L, 2);
  double total = 0.0;
  int windows = 0;
  for (int c = 0; c < a.channels(); ++c)
    for (int y = 0; y + 11 <= a.height(); ++y)
      for (int x = 0; x + 11 <= a.width(); ++x) {
        double mx = 0, my = 0;
        for (int i = 0; i < 11; ++i)
          for (int j = 0; j < 11; ++j) {
            const double w = win[i][j] / norm;
            mx += w * a.at(y + i, x + j, c) * L;
            my += w * b.at(y + i, x + j, c) * L;
          }
        double sx = 0, sy = 0, sxy = 0;
        for (int i = 0; i < 11; ++i)
          for (int j = 0; j < 11; ++j) {
            const double w = win[i][j] / norm;
            const double dx = a.at(y + i, x + j, c) * L - mx;
            const double dy = b.at(y + i, x + j, c) * L - my;
            sx += w * dx * dx;
            sy += w * dy * dy;
            sxy += w * dx * dy;
          }
        total += (2 * mx * my + c1) * (2 * sxy + c2) / ((mx * mx + my * my + c1) * (sx + sy + c2));
        ++windows;
      }
  return total / windows;
}

Image noisy_copy(const Image& img, double sigma, std::uint64_t seed) {
  Image out = img;
  Rng rng(seed);
  for (float& s : out.samples()) s = static_cast<float>(s + sigma * rng.normal());
  out.clamp();
  return out;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ddcnn_test_metrics_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Mse, Cases) {
  const Image a = fixtures::random_image(16, 16, 3, 1);
  EXPECT_EQ(mse(a, a), 0.0);
  const Image lo(8, 8, 3, 0.2f), hi(8, 8, 3, 0.3f);
  EXPECT_NEAR(mse(lo, hi), 0.01, 1e-8);
  const Image b = fixtures::random_image(16, 16, 3, 2);
  EXPECT_NEAR(mse(a, b), mse_oracle(a, b), 1e-12);
  EXPECT_THROW(mse(a, Image(16, 16, 1)), Error);
}

TEST(Psnr, ClosedForms) {
  const Image a = fixtures::random_image(8, 8, 1, 3);
  EXPECT_EQ(psnr(a, a), kInfinitePsnr);
  // Grid images differing by exactly one 8-bit step: mse = 1 on the 255 scale.
  Image b = a;
  for (float& s : b.samples()) s = s >= 0.5f ? s - 1.0f / 255.0f : s + 1.0f / 255.0f;
  EXPECT_NEAR(psnr(a, b, 255.0), 48.1308, 5e-5);
  const Image lo(8, 8, 3, 0.0f), hi(8, 8, 3, 0.1f);
  EXPECT_NEAR(psnr(lo, hi), 20.0, 1e-5);
}

TEST(Psnr, MatchesOracleFormula) {
  for (std::uint64_t i = 0; i < 10; ++i) {
    const Image a = fixtures::random_image(32, 32, 3, i);
    const Image b = noisy_copy(a, 0.05, 100 + i);
    EXPECT_NEAR(psnr(a, b), 10.0 * std::log10(1.0 / mse_oracle(a, b)), 1e-6);
  }
}

TEST(Ssim, IdenticalIsExactlyOne) {
  for (std::uint64_t i = 0; i < 5; ++i) {
    const Image a = fixtures::random_image(11 + i, 13 + 2 * i, i % 2 ? 3 : 1, i);
    EXPECT_EQ(ssim(a, a), 1.0);
    EXPECT_EQ(ssim(a, a, 255.0), 1.0);
  }
}

TEST(Ssim, BlackVersusWhiteCollapsesToLuminanceTerm) {
  const Image black(16, 16, 1, 0.0f), white(16, 16, 1, 1.0f);
  EXPECT_NEAR(ssim(black, white), 1e-4 / (1.0 + 1e-4), 1e-12);
}

TEST(Ssim, MatchesWindowedOracle) {
  for (std::uint64_t i = 0; i < 10; ++i) {
    const Image a = fixtures::random_image(32, 32, 3, i);
    const Image b = noisy_copy(a, 0.1, 50 + i);
    EXPECT_NEAR(ssim(a, b), ssim_oracle(a, b), 1e-6);
  }
}

TEST(Ssim, TooSmall) {
  try {
    ssim(Image(10, 20, 1), Image(10, 20, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::TooSmall);
  }
}

TEST(MetricsProperty, Symmetry) {
  for (std::uint64_t i = 0; i < 5; ++i) {
    const Image a = fixtures::random_image(20, 24, 3, i);
    const Image b = fixtures::random_image(20, 24, 3, i + 10);
    EXPECT_EQ(psnr(a, b), psnr(b, a));
    EXPECT_EQ(ssim(a, b), ssim(b, a));
  }
}

TEST(MetricsProperty, PsnrDecreasesWithMse) {
  const Image gt(8, 8, 1, 0.5f);
  double prev = kInfinitePsnr;
  for (int k = 1; k <= 20; ++k) {
    const Image d(8, 8, 1, 0.5f + k * 0.02f);
    const double p = psnr(gt, d);
    EXPECT_LT(p, prev);
    prev = p;
  }
}

TEST(MetricsProperty, UniformShiftAddsSquare) {
  // Samples on a dyadic grid keep the float arithmetic exact.
  Image a(12, 12, 3);
  Rng rng(4);
  for (float& s : a.samples()) s = 0.25f + static_cast<float>(rng.below(64)) / 128.0f;
  for (float shift : {0.0625f, -0.125f, 0.1875f}) {
    Image b = a;
    for (float& s : b.samples()) s += shift;
    EXPECT_EQ(mse(a, b), double(shift) * double(shift));
  }
}

TEST(EvaluateManifest, CleanCopiesScorePerfect) {
  const auto dir = fresh_dir("perfect");
  fixtures::write_texture_corpus(dir / "in", 4, 16, 1);
  SynthConfig cfg;
  cfg.per_image = 3;
  cfg.split_fractions = {0.0, 0.0, 1.0};
  const auto m = synthesize_dataset(dir / "in", dir / "ds", cfg);
  fs::create_directories(dir / "restored");
  for (const auto& r : m.records) {
    fs::copy_file(m.clean_file(r), dir / "restored" / fs::path(r.distorted_path).filename());
  }
  const auto scores = evaluate_manifest(m, dir / "restored");
  ASSERT_EQ(scores.size(), 12u);
  for (const auto& s : scores) {
    EXPECT_EQ(s.psnr_db, kInfinitePsnr);
    EXPECT_EQ(s.ssim, 1.0);
  }
  const auto rep = report_datasets(scores);
  EXPECT_EQ(rep.infinite_count, 12u);
  EXPECT_EQ(rep.line.size(), 12u);
  EXPECT_TRUE(rep.scatter.empty());
}

TEST(EvaluateManifest, MissingFileIsNamed) {
  const auto dir = fresh_dir("missing");
  fixtures::write_texture_corpus(dir / "in", 2, 16, 2);
  SynthConfig cfg;
  cfg.per_image = 1;
  cfg.split_fractions = {0.0, 0.0, 1.0};
  const auto m = synthesize_dataset(dir / "in", dir / "ds", cfg);
  fs::create_directories(dir / "restored");
  fs::copy_file(m.clean_file(m.records[0]), dir / "restored" / fs::path(m.records[0].distorted_path).filename());
  try {
    evaluate_manifest(m, dir / "restored");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MissingRestoredFile);
    EXPECT_NE(std::string(e.what()).find(fs::path(m.records[1].distorted_path).filename().string()), std::string::npos);
  }
}

TEST(EvaluateManifest, ScoringDistortedMatchesDirectCalls) {
  const auto dir = fresh_dir("direct");
  fixtures::write_texture_corpus(dir / "in", 3, 16, 3);
  SynthConfig cfg;
  cfg.per_image = 4;
  cfg.split_fractions = {0.0, 0.0, 1.0};
  const auto m = synthesize_dataset(dir / "in", dir / "ds", cfg);
  const auto scores = evaluate_manifest(m, dir / "ds" / "distorted", 255.0);
  ASSERT_EQ(scores.size(), m.records.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const Image clean = load_image(m.clean_file(m.records[i]));
    const Image dist = load_image(m.distorted_file(m.records[i]));
    EXPECT_EQ(scores[i].psnr_db, psnr(clean, dist, 255.0));
    EXPECT_EQ(scores[i].ssim, ssim(clean, dist, 255.0));
    EXPECT_EQ(scores[i].image_id, fs::path(m.records[i].distorted_path).filename().string());
  }
}

TEST(Report, SingleScoreOccupiesOneBin) {
  const auto rep = report_datasets({{"a", 28.81, 0.7926, 0.0}});
  ASSERT_EQ(rep.histogram.size(), 1u);
  EXPECT_EQ(rep.histogram[0].low, 28.0);
  EXPECT_EQ(rep.histogram[0].high, 29.0);
  EXPECT_EQ(rep.histogram[0].count, 1u);
}

TEST(Report, IdenticalScoresOneBin) {
  std::vector<QualityScore> s(7, QualityScore{"x", 31.5, 0.9, 0.0});
  const auto rep = report_datasets(s);
  ASSERT_EQ(rep.histogram.size(), 1u);
  EXPECT_EQ(rep.histogram[0].count, 7u);
}

TEST(ReportProperty, CountsAreConserved) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<QualityScore> scores;
    const int n = 1 + static_cast<int>(rng.below(40));
    std::size_t infinite = 0;
    for (int i = 0; i < n; ++i) {
      const bool inf = rng.uniform() < 0.1;
      infinite += inf;
      scores.push_back({"img" + std::to_string(i), inf ? kInfinitePsnr : rng.uniform(10.0, 45.0), rng.uniform(), 0.0});
    }
    const auto rep = report_datasets(scores);
    std::size_t binned = 0;
    for (std::size_t b = 0; b < rep.histogram.size(); ++b) {
      binned += rep.histogram[b].count;
      EXPECT_EQ(rep.histogram[b].high - rep.histogram[b].low, 1.0);
      EXPECT_EQ(rep.histogram[b].low, std::floor(rep.histogram[b].low));
      if (b > 0) EXPECT_EQ(rep.histogram[b].low, rep.histogram[b - 1].high);
    }
    EXPECT_EQ(binned, n - infinite);
    EXPECT_EQ(rep.scatter.size(), n - infinite);
    EXPECT_EQ(rep.line.size(), static_cast<std::size_t>(n));
    EXPECT_EQ(rep.infinite_count, infinite);
  }
}

TEST(Report, EmptyScores) {
  try {
    report_datasets({});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyScores);
  }
}

TEST(ScoresCsv, RoundTripIncludingInfinity) {
  const auto dir = fresh_dir("csv");
  const std::vector<QualityScore> scores = {{"a.png", 28.81, 0.7926, 0.0013}, {"b.png", kInfinitePsnr, 1.0, 0.0}};
  write_scores_csv(scores, dir / "s.csv");
  const auto back = read_scores_csv(dir / "s.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].image_id, "a.png");
  EXPECT_EQ(back[0].psnr_db, 28.81);
  EXPECT_EQ(back[0].ssim, 0.7926);
  EXPECT_EQ(back[1].psnr_db, kInfinitePsnr);
  EXPECT_EQ(format_psnr(kInfinitePsnr), "inf");
}

TEST(WriteReport, CsvRowCounts) {
  const auto dir = fresh_dir("write");
  const std::vector<QualityScore> scores = {{"a", 20.2, 0.5, 0}, {"b", 22.7, 0.6, 0}, {"c", kInfinitePsnr, 1.0, 0}};
  const auto files = write_report(report_datasets(scores), dir, true);
  EXPECT_EQ(files.size(), 6u);
  auto rows = [](const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    int n = -1;
    while (std::getline(in, line)) ++n;
    return n;
  };
  EXPECT_EQ(rows(dir / "histogram.csv"), 3);  // bins 20, 21, 22
  EXPECT_EQ(rows(dir / "line.csv"), 3);
  EXPECT_EQ(rows(dir / "scatter.csv"), 2);
  EXPECT_TRUE(fs::exists(dir / "scatter.svg"));
}
