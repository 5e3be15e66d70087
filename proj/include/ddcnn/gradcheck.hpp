#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "ddcnn/network.hpp"

namespace ddcnn {

struct GradCheckOptions {
  double epsilon = 1e-3;
  double tolerance = 1e-5;
  /// Parameter entries to probe. Arrays smaller than this are checked exhaustively.
  std::size_t samples = 64;
  std::uint64_t seed = 0;
  /// Denominator floor for the relative error, so entries with a vanishing
  /// gradient are judged on absolute error instead.
  double magnitude_floor = 1e-7;
  /// Also probe entries of the input tensor (network checks only).
  bool check_input = false;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  /// Probes dropped because the perturbation flipped a ReLU.
  std::size_t skipped_kinks = 0;
  bool passed = false;
};

/// Loss at the current parameter values plus a signature of the ReLU
/// activation pattern; a changed signature marks a kink crossing.
struct ProbeResult {
  double loss = 0.0;
  std::uint64_t pattern = 0;
};
using Probe = std::function<ProbeResult()>;

/// Compares analytic gradients of `params` against central finite
/// differences of `probe`, perturbing entries in place and restoring them.
GradCheckReport check_gradients(std::span<const std::span<double>> params, const ParamGrads<double>& analytic,
                                const Probe& probe, const GradCheckOptions& options);

/// Gradient check of `net` under MSE against `target`. Train mode uses batch
/// statistics without touching the running statistics.
GradCheckReport grad_check(Network<double>& net, const Tensor4<double>& input, const Tensor4<double>& target,
                           Mode mode, const GradCheckOptions& options);

/// Hash of the sign pattern of every ReLU output in a trace.
std::uint64_t activation_pattern(const Network<double>& net, const ForwardTrace<double>& trace);

}  // namespace ddcnn
