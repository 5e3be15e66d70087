#include "ddcnn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

namespace ddcnn {
namespace {

std::vector<std::pair<std::size_t, std::size_t>> pick_entries(std::span<const std::span<double>> params,
                                                              std::size_t samples, Rng& rng) {
  std::size_t total = 0;
  for (const auto& p : params) total += p.size();
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (total <= samples) {
    for (std::size_t a = 0; a < params.size(); ++a) {
      for (std::size_t i = 0; i < params[a].size(); ++i) out.emplace_back(a, i);
    }
    return out;
  }
  // Every array gets at least one probe, the rest are spread uniformly.
  std::set<std::pair<std::size_t, std::size_t>> chosen;
  for (std::size_t a = 0; a < params.size(); ++a) {
    if (!params[a].empty()) chosen.emplace(a, rng.below(params[a].size()));
  }
  while (chosen.size() < samples) {
    std::size_t flat = rng.below(total);
    std::size_t a = 0;
    while (flat >= params[a].size()) flat -= params[a++].size();
    chosen.emplace(a, flat);
  }
  out.assign(chosen.begin(), chosen.end());
  return out;
}

}  // namespace

GradCheckReport check_gradients(std::span<const std::span<double>> params, const ParamGrads<double>& analytic,
                                const Probe& probe, const GradCheckOptions& options) {
  if (analytic.size() != params.size()) throw Error(Errc::ShapeMismatch, "analytic gradients do not match params");
  for (std::size_t a = 0; a < params.size(); ++a) {
    if (analytic[a].size() != params[a].size()) {
      throw Error(Errc::ShapeMismatch, "analytic gradient array " + std::to_string(a) + " has the wrong size");
    }
  }

  GradCheckReport report;
  Rng rng(options.seed);
  const std::uint64_t base_pattern = probe().pattern;
  for (const auto& [a, i] : pick_entries(params, options.samples, rng)) {
    double& value = params[a][i];
    const double saved = value;
    value = saved + options.epsilon;
    const ProbeResult plus = probe();
    value = saved - options.epsilon;
    const ProbeResult minus = probe();
    value = saved;
    if (plus.pattern != base_pattern || minus.pattern != base_pattern) {
      ++report.skipped_kinks;
      continue;
    }
    const double numeric = (plus.loss - minus.loss) / (2.0 * options.epsilon);
    const double exact = analytic[a][i];
    const double denom = std::max({std::abs(numeric), std::abs(exact), options.magnitude_floor});
    report.max_rel_error = std::max(report.max_rel_error, std::abs(numeric - exact) / denom);
    ++report.checked;
  }
  report.passed = report.checked > 0 && report.max_rel_error < options.tolerance;
  return report;
}

std::uint64_t activation_pattern(const Network<double>& net, const ForwardTrace<double>& trace) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (std::size_t b = 0; b < net.blocks().size() && b < trace.outputs.size(); ++b) {
    if (!net.blocks()[b].relu) continue;
    for (double v : trace.outputs[b].values()) h = (h ^ (v > 0.0 ? 1u : 0u)) * 0x100000001B3ULL;
  }
  return h;
}

GradCheckReport grad_check(Network<double>& net, const Tensor4<double>& input, const Tensor4<double>& target,
                           Mode mode, const GradCheckOptions& options) {
  Tensor4<double> x = input;
  ForwardTrace<double> trace;
  const auto out = net.forward(x, mode, &trace, false);
  const auto loss = mse_loss(out, target);
  Tensor4<double> grad_x;
  ParamGrads<double> analytic = net.backward(trace, loss.grad, &grad_x);

  auto params = net.parameters();
  if (options.check_input) {
    params.emplace_back(x.values());
    analytic.emplace_back(grad_x.values().begin(), grad_x.values().end());
  }

  const Probe probe = [&] {
    ForwardTrace<double> t;
    const auto y = net.forward(x, mode, &t, false);
    return ProbeResult{mse_loss(y, target).loss, activation_pattern(net, t)};
  };
  return check_gradients(params, analytic, probe, options);
}

}  // namespace ddcnn
