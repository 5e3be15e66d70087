#include "ddcnn/layers.hpp"

#include <functional>
#include <numeric>

namespace ddcnn {

std::vector<double> orthogonal_init(std::span<const int> shape, std::uint64_t seed) {
  if (shape.empty()) throw Error(Errc::InvalidShape, "orthogonal_init needs at least one dimension");
  for (int d : shape) {
    if (d < 1) throw Error(Errc::InvalidShape, "orthogonal_init dimensions must be positive");
  }
  const std::size_t rows = static_cast<std::size_t>(shape[0]);
  const std::size_t cols = std::accumulate(shape.begin() + 1, shape.end(), std::size_t{1},
                                           [](std::size_t a, int d) { return a * static_cast<std::size_t>(d); });

  // Orthonormalise the shorter side: vectors of length `dim`, `count` of them.
  const bool by_rows = rows <= cols;
  const std::size_t count = by_rows ? rows : cols;
  const std::size_t dim = by_rows ? cols : rows;

  Rng rng(seed);
  std::vector<std::vector<double>> vecs(count, std::vector<double>(dim));
  for (auto& v : vecs) {
    for (double& x : v) x = rng.normal();
  }

  // Modified Gram-Schmidt, run twice for numerical orthogonality.
  for (std::size_t i = 0; i < count; ++i) {
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t j = 0; j < i; ++j) {
        const double dot = std::inner_product(vecs[i].begin(), vecs[i].end(), vecs[j].begin(), 0.0);
        for (std::size_t k = 0; k < dim; ++k) vecs[i][k] -= dot * vecs[j][k];
      }
    }
    const double norm = std::sqrt(std::inner_product(vecs[i].begin(), vecs[i].end(), vecs[i].begin(), 0.0));
    if (norm < 1e-12) throw Error(Errc::InvalidShape, "orthogonal_init produced a degenerate vector");
    for (double& x : vecs[i]) x /= norm;
  }

  std::vector<double> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = by_rows ? vecs[r][c] : vecs[c][r];
  }
  return out;
}

}  // namespace ddcnn
