#include "ddcnn/metrics.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ddcnn/error.hpp"
#include "ddcnn/parallel.hpp"

namespace fs = std::filesystem;

namespace ddcnn {
namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;

void require_same_shape(const Image& a, const Image& b) {
  if (!a.same_shape(b)) {
    throw Error(Errc::ShapeMismatch, "image shapes differ: " + std::to_string(a.height()) + "x" +
                                         std::to_string(a.width()) + "x" + std::to_string(a.channels()) + " vs " +
                                         std::to_string(b.height()) + "x" + std::to_string(b.width()) + "x" +
                                         std::to_string(b.channels()));
  }
}

std::array<double, kSsimWindow> ssim_taps() {
  std::array<double, kSsimWindow> taps{};
  double total = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - kSsimWindow / 2;
    taps[i] = std::exp(-(d * d) / (2.0 * kSsimSigma * kSsimSigma));
    total += taps[i];
  }
  for (double& t : taps) t /= total;
  return taps;
}

// Valid-mode separable filtering of a H x W plane.
std::vector<double> filter_valid(const std::vector<double>& plane, int h, int w,
                                 const std::array<double, kSsimWindow>& taps) {
  const int oh = h - kSsimWindow + 1;
  const int ow = w - kSsimWindow + 1;
  std::vector<double> horizontal(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) acc += taps[k] * plane[static_cast<std::size_t>(y) * w + x + k];
      horizontal[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) acc += taps[k] * horizontal[static_cast<std::size_t>(y + k) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  return out;
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return ec == std::errc() ? std::string(buf.data(), ptr) : std::to_string(v);
}

double parse_double(const std::string& text, std::size_t line_number, const char* field) {
  if (text == "inf") return kInfinitePsnr;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(Errc::ParseError,
                "line " + std::to_string(line_number) + ": invalid " + field + " value '" + text + "'");
  }
  return v;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(Errc::IoError, "failed writing " + path.string());
}

std::string fixed(double v, int digits = 2) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

// Minimal deterministic SVG chart frame: 640x400, 60px margins.
struct Frame {
  double x_lo, x_hi, y_lo, y_hi;
  static constexpr double kW = 640, kH = 400, kM = 60;
  double px(double x) const { return kM + (x_hi > x_lo ? (x - x_lo) / (x_hi - x_lo) : 0.5) * (kW - 2 * kM); }
  double py(double y) const { return kH - kM - (y_hi > y_lo ? (y - y_lo) / (y_hi - y_lo) : 0.5) * (kH - 2 * kM); }
};

std::string svg_open(const Frame& f, const std::string& title, const std::string& x_label, const std::string& y_label) {
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" viewBox=\"0 0 640 400\">\n"
     << "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n"
     << "<text x=\"320\" y=\"30\" text-anchor=\"middle\" font-size=\"16\">" << title << "</text>\n"
     << "<line x1=\"60\" y1=\"340\" x2=\"580\" y2=\"340\" stroke=\"black\"/>\n"
     << "<line x1=\"60\" y1=\"60\" x2=\"60\" y2=\"340\" stroke=\"black\"/>\n"
     << "<text x=\"320\" y=\"380\" text-anchor=\"middle\" font-size=\"12\">" << x_label << "</text>\n"
     << "<text x=\"20\" y=\"200\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 20 200)\">" << y_label
     << "</text>\n"
     << "<text x=\"60\" y=\"356\" text-anchor=\"middle\" font-size=\"10\">" << fixed(f.x_lo) << "</text>\n"
     << "<text x=\"580\" y=\"356\" text-anchor=\"middle\" font-size=\"10\">" << fixed(f.x_hi) << "</text>\n"
     << "<text x=\"54\" y=\"344\" text-anchor=\"end\" font-size=\"10\">" << fixed(f.y_lo) << "</text>\n"
     << "<text x=\"54\" y=\"64\" text-anchor=\"end\" font-size=\"10\">" << fixed(f.y_hi) << "</text>\n";
  return os.str();
}

std::string histogram_svg(const std::vector<HistogramBin>& bins) {
  std::size_t peak = 1;
  for (const auto& b : bins) peak = std::max(peak, b.count);
  const Frame f{bins.empty() ? 0.0 : bins.front().low, bins.empty() ? 1.0 : bins.back().high, 0.0,
                static_cast<double>(peak)};
  std::ostringstream os;
  os << svg_open(f, "Histogram of PSNR values", "PSNR (dB)", "count");
  for (const auto& b : bins) {
    const double x0 = f.px(b.low);
    const double x1 = f.px(b.high);
    const double y = f.py(static_cast<double>(b.count));
    os << "<rect x=\"" << fixed(x0) << "\" y=\"" << fixed(y) << "\" width=\"" << fixed(x1 - x0) << "\" height=\""
       << fixed(f.py(0.0) - y) << "\" fill=\"steelblue\" stroke=\"white\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string line_svg(const std::vector<LinePoint>& line) {
  double lo = kInfinitePsnr, hi = -kInfinitePsnr;
  for (const auto& p : line) {
    if (std::isfinite(p.psnr_db)) {
      lo = std::min(lo, p.psnr_db);
      hi = std::max(hi, p.psnr_db);
    }
  }
  if (!(lo <= hi)) lo = hi = 0.0;
  const Frame f{0.0, line.size() > 1 ? static_cast<double>(line.size() - 1) : 1.0, std::floor(lo), std::floor(hi) + 1};
  std::ostringstream os;
  os << svg_open(f, "PSNR per test image", "image index", "PSNR (dB)");
  os << "<polyline fill=\"none\" stroke=\"steelblue\" points=\"";
  bool first = true;
  for (const auto& p : line) {
    if (!std::isfinite(p.psnr_db)) continue;
    os << (first ? "" : " ") << fixed(f.px(static_cast<double>(p.index))) << "," << fixed(f.py(p.psnr_db));
    first = false;
  }
  os << "\"/>\n</svg>\n";
  return os.str();
}

std::string scatter_svg(const std::vector<ScatterPoint>& points) {
  double x_lo = kInfinitePsnr, x_hi = -kInfinitePsnr, y_lo = 1.0, y_hi = 0.0;
  for (const auto& p : points) {
    x_lo = std::min(x_lo, p.psnr_db);
    x_hi = std::max(x_hi, p.psnr_db);
    y_lo = std::min(y_lo, p.ssim);
    y_hi = std::max(y_hi, p.ssim);
  }
  if (points.empty()) x_lo = x_hi = y_lo = y_hi = 0.0;
  const Frame f{std::floor(x_lo), std::floor(x_hi) + 1, std::min(0.0, y_lo), 1.0};
  std::ostringstream os;
  os << svg_open(f, "PSNR vs SSIM", "PSNR (dB)", "SSIM");
  for (const auto& p : points) {
    os << "<circle cx=\"" << fixed(f.px(p.psnr_db)) << "\" cy=\"" << fixed(f.py(p.ssim))
       << "\" r=\"3\" fill=\"steelblue\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace

double mse(const Image& gt, const Image& d) {
  require_same_shape(gt, d);
  const auto a = gt.samples();
  const auto b = d.samples();
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sum += diff * diff;
  }
  return a.empty() ? 0.0 : sum / static_cast<double>(a.size());
}

double psnr(const Image& gt, const Image& d, double max_value) {
  if (!(max_value > 0.0)) throw Error(Errc::InvalidArgument, "PSNR max value must be positive");
  const double m = mse(gt, d) * max_value * max_value;
  if (m == 0.0) return kInfinitePsnr;
  return 10.0 * std::log10(max_value * max_value / m);
}

double ssim(const Image& gt, const Image& d, double max_value) {
  require_same_shape(gt, d);
  if (!(max_value > 0.0)) throw Error(Errc::InvalidArgument, "SSIM max value must be positive");
  const int h = gt.height();
  const int w = gt.width();
  if (std::min(h, w) < kSsimWindow) {
    throw Error(Errc::TooSmall, "SSIM needs images of at least 11x11, got " + std::to_string(h) + "x" + std::to_string(w));
  }
  const double c1 = (0.01 * max_value) * (0.01 * max_value);
  const double c2 = (0.03 * max_value) * (0.03 * max_value);
  const auto taps = ssim_taps();
  const std::size_t pixels = static_cast<std::size_t>(h) * w;

  double total = 0.0;
  for (int c = 0; c < gt.channels(); ++c) {
    std::vector<double> x(pixels), y(pixels), xx(pixels), yy(pixels), xy(pixels);
    for (int r = 0; r < h; ++r) {
      for (int col = 0; col < w; ++col) {
        const std::size_t i = static_cast<std::size_t>(r) * w + col;
        x[i] = gt.at(r, col, c) * max_value;
        y[i] = d.at(r, col, c) * max_value;
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
      }
    }
    const auto mu_x = filter_valid(x, h, w, taps);
    const auto mu_y = filter_valid(y, h, w, taps);
    const auto e_xx = filter_valid(xx, h, w, taps);
    const auto e_yy = filter_valid(yy, h, w, taps);
    const auto e_xy = filter_valid(xy, h, w, taps);
    double channel_sum = 0.0;
    for (std::size_t i = 0; i < mu_x.size(); ++i) {
      const double mx = mu_x[i];
      const double my = mu_y[i];
      const double sx = e_xx[i] - mx * mx;
      const double sy = e_yy[i] - my * my;
      const double sxy = e_xy[i] - mx * my;
      const double num = (2.0 * mx * my + c1) * (2.0 * sxy + c2);
      const double den = (mx * mx + my * my + c1) * (sx + sy + c2);
      channel_sum += num / den;
    }
    total += channel_sum / static_cast<double>(mu_x.size());
  }
  return total / gt.channels();
}

std::vector<QualityScore> evaluate_manifest(const PairManifest& manifest, const fs::path& restored_dir,
                                            double max_value, Split split) {
  const auto records = manifest.select(split);
  for (const auto& r : records) {
    const fs::path restored = restored_dir / fs::path(r.distorted_path).filename();
    std::error_code ec;
    if (!fs::is_regular_file(restored, ec)) {
      throw Error(Errc::MissingRestoredFile,
                  "no restored file for record '" + r.distorted_path + "': expected " + restored.string());
    }
  }
  std::vector<QualityScore> scores(records.size());
  parallel_for(records.size(), [&](std::size_t i) {
    const auto& r = records[i];
    const fs::path restored_path = restored_dir / fs::path(r.distorted_path).filename();
    const Image clean = load_image(manifest.clean_file(r));
    const Image restored = load_image(restored_path);
    QualityScore& s = scores[i];
    s.image_id = fs::path(r.distorted_path).filename().string();
    s.mse = mse(clean, restored) * max_value * max_value;
    s.psnr_db = psnr(clean, restored, max_value);
    s.ssim = ssim(clean, restored, max_value);
  });
  return scores;
}

ReportDatasets report_datasets(const std::vector<QualityScore>& scores) {
  if (scores.empty()) throw Error(Errc::EmptyScores, "no scores to report");
  ReportDatasets report;
  double lo = kInfinitePsnr;
  double hi = -kInfinitePsnr;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& s = scores[i];
    report.line.push_back({i, s.image_id, s.psnr_db});
    if (std::isinf(s.psnr_db) && s.psnr_db > 0) {
      ++report.infinite_count;
      continue;
    }
    if (!std::isfinite(s.psnr_db)) throw Error(Errc::InvalidArgument, "score '" + s.image_id + "' has invalid PSNR");
    report.scatter.push_back({s.psnr_db, s.ssim});
    lo = std::min(lo, s.psnr_db);
    hi = std::max(hi, s.psnr_db);
  }
  if (!report.scatter.empty()) {
    const double first = std::floor(lo);
    const auto bins = static_cast<std::size_t>(std::floor(hi) - first) + 1;
    for (std::size_t b = 0; b < bins; ++b) {
      report.histogram.push_back({first + static_cast<double>(b), first + static_cast<double>(b) + 1.0, 0});
    }
    for (const auto& p : report.scatter) {
      report.histogram[static_cast<std::size_t>(std::floor(p.psnr_db) - first)].count++;
    }
  }
  return report;
}

std::string format_psnr(double psnr_db) {
  if (std::isinf(psnr_db) && psnr_db > 0) return "inf";
  return format_double(psnr_db);
}

void write_scores_csv(const std::vector<QualityScore>& scores, const fs::path& path) {
  std::ostringstream os;
  os << "image_id,psnr_db,ssim,mse\n";
  for (const auto& s : scores) {
    os << s.image_id << ',' << format_psnr(s.psnr_db) << ',' << format_double(s.ssim) << ',' << format_double(s.mse)
       << '\n';
  }
  write_text(path, os.str());
}

std::vector<QualityScore> read_scores_csv(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw Error(Errc::FileNotFound, "scores file not found: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::string line;
  std::size_t line_number = 0;
  std::vector<QualityScore> scores;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_number == 1) {
      if (line != "image_id,psnr_db,ssim,mse") {
        throw Error(Errc::ParseError, "line 1: expected header image_id,psnr_db,ssim,mse");
      }
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 4) {
      throw Error(Errc::ParseError, "line " + std::to_string(line_number) + ": expected 4 fields");
    }
    scores.push_back({fields[0], parse_double(fields[1], line_number, "psnr_db"),
                      parse_double(fields[2], line_number, "ssim"), parse_double(fields[3], line_number, "mse")});
  }
  return scores;
}

std::vector<fs::path> write_report(const ReportDatasets& report, const fs::path& out_dir, bool svg) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(Errc::IoError, "cannot create " + out_dir.string() + ": " + ec.message());

  std::vector<fs::path> written;
  std::ostringstream hist;
  hist << "bin_low,bin_high,count\n";
  for (const auto& b : report.histogram) hist << format_double(b.low) << ',' << format_double(b.high) << ',' << b.count << '\n';
  written.push_back(out_dir / "histogram.csv");
  write_text(written.back(), hist.str());

  std::ostringstream line;
  line << "index,image_id,psnr_db\n";
  for (const auto& p : report.line) line << p.index << ',' << p.image_id << ',' << format_psnr(p.psnr_db) << '\n';
  written.push_back(out_dir / "line.csv");
  write_text(written.back(), line.str());

  std::ostringstream scatter;
  scatter << "psnr_db,ssim\n";
  for (const auto& p : report.scatter) scatter << format_double(p.psnr_db) << ',' << format_double(p.ssim) << '\n';
  written.push_back(out_dir / "scatter.csv");
  write_text(written.back(), scatter.str());

  if (svg) {
    written.push_back(out_dir / "histogram.svg");
    write_text(written.back(), histogram_svg(report.histogram));
    written.push_back(out_dir / "line.svg");
    write_text(written.back(), line_svg(report.line));
    written.push_back(out_dir / "scatter.svg");
    write_text(written.back(), scatter_svg(report.scatter));
  }
  return written;
}

}  // namespace ddcnn
