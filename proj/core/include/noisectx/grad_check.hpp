#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "noisectx/frontend.hpp"
#include "noisectx/graph.hpp"

namespace noisectx {

struct GradCheckOptions {
  double step = 1e-5;
  /// Scalars compared per parameter tensor; smaller tensors are checked in full.
  std::size_t samples_per_tensor = 20;
  std::uint64_t seed = 7;
  double tolerance = 1e-4;
  /// Broken-backward fixture: scales the upstream gradient of ops named
  /// `fault_op` by `fault_scale` in the analytic pass.
  std::string fault_op;
  double fault_scale = 1.0;
};

struct BlockError {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<BlockError> blocks;
  double max_rel_error = 0.0;
  std::vector<std::string> failing;

  bool passed() const { return failing.empty(); }
};

/// |a - n| / max(|a|, |n|, 1e-8)
double relative_error(double analytic, double numeric);

/// Builds the scalar loss on a graph bound to the (possibly perturbed) parameters.
using LossBuilder = std::function<Var<double>(Graph<double>&)>;

/// Compares reverse-mode gradients with central differences on a sample of
/// scalars from every parameter tensor.
GradCheckReport grad_check(const NamedTensors<double>& params, const LossBuilder& loss,
                           const GradCheckOptions& options = {});

/// Per-element contributions whose plain sum is the loss. Central differences
/// are then summed term by term, so they resolve gradients far below the
/// rounding step of the total.
using LossTermsBuilder = std::function<TensorD(Graph<double>&)>;

GradCheckReport grad_check(const NamedTensors<double>& params, const LossBuilder& loss,
                           const LossTermsBuilder& terms, const GradCheckOptions& options = {});

struct GradCheckInputs {
  TensorD noisy;                   // [T x F]
  std::optional<TensorD> context;  // [S x F]
  TensorD target;                  // [T x F], in (0, 1)
};

/// Random log-Mel-scaled inputs and targets; no context for E0.
GradCheckInputs random_grad_check_inputs(const FrontendConfig& config, std::size_t frames,
                                         std::size_t context_frames, std::uint64_t seed);

/// Checks the frontend's training loss.
GradCheckReport grad_check_frontend(const Frontend& model, const NamedTensors<double>& params,
                                    const GradCheckInputs& inputs, const GradCheckOptions& options = {});

/// d = 8, 2 heads, one layer per encoder and two cross layers.
FrontendConfig tiny_config(Variant variant);

}  // namespace noisectx
