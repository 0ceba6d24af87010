#include "noisectx/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "noisectx/errors.hpp"
#include "noisectx/ops.hpp"
#include "noisectx/parameters.hpp"

namespace noisectx {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

namespace {

GradCheckReport run_check(const NamedTensors<double>& params, const LossBuilder& loss,
                          const LossTermsBuilder* terms, const GradCheckOptions& options) {
  if (!(options.step > 0.0)) throw ConfigError("grad_check: step must be positive");
  NamedTensors<double> work = params;

  NamedTensors<double> analytic;
  {
    Graph<double> g(&work);
    if (!options.fault_op.empty()) g.inject_backward_fault(options.fault_op, options.fault_scale);
    analytic = g.backward(loss(g));
  }
  auto evaluate = [&]() {
    Graph<double> g(&work);
    if (terms) return (*terms)(g);
    Var<double> l = loss(g);
    if (l.value().size() != 1) throw ContractError("grad_check: loss must be scalar");
    return l.value();
  };
  auto difference = [](const TensorD& up, const TensorD& down) {
    if (up.size() != down.size()) throw ContractError("grad_check: loss terms changed size");
    long double total = 0;
    for (std::size_t i = 0; i < up.size(); ++i) total += static_cast<long double>(up[i]) - down[i];
    return static_cast<double>(total);
  };

  std::mt19937_64 rng(options.seed);
  GradCheckReport report;
  for (auto& [name, tensor] : work) {
    std::vector<std::size_t> indices(tensor.size());
    std::iota(indices.begin(), indices.end(), 0);
    if (indices.size() > options.samples_per_tensor) {
      std::vector<std::size_t> picked;
      std::sample(indices.begin(), indices.end(), std::back_inserter(picked), options.samples_per_tensor, rng);
      indices = std::move(picked);
    }
    BlockError block{name, indices.size(), 0.0};
    const TensorD& a = analytic.at(name);
    for (std::size_t i : indices) {
      const double original = tensor[i];
      tensor[i] = original + options.step;
      const TensorD up = evaluate();
      tensor[i] = original - options.step;
      const TensorD down = evaluate();
      tensor[i] = original;
      const double numeric = difference(up, down) / (2.0 * options.step);
      block.max_rel_error = std::max(block.max_rel_error, relative_error(a[i], numeric));
    }
    report.max_rel_error = std::max(report.max_rel_error, block.max_rel_error);
    if (!(block.max_rel_error < options.tolerance)) report.failing.push_back(name);
    report.blocks.push_back(std::move(block));
  }
  return report;
}

}  // namespace

GradCheckReport grad_check(const NamedTensors<double>& params, const LossBuilder& loss,
                           const GradCheckOptions& options) {
  return run_check(params, loss, nullptr, options);
}

GradCheckReport grad_check(const NamedTensors<double>& params, const LossBuilder& loss,
                           const LossTermsBuilder& terms, const GradCheckOptions& options) {
  return run_check(params, loss, &terms, options);
}

GradCheckInputs random_grad_check_inputs(const FrontendConfig& config, std::size_t frames,
                                         std::size_t context_frames, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit_uniform(rng()); };
  GradCheckInputs in;
  in.noisy = TensorD({frames, config.feature_dim});
  for (auto& v : in.noisy.values()) v = uniform(-4.0, 1.0);
  in.target = TensorD({frames, config.feature_dim});
  for (auto& v : in.target.values()) v = uniform(0.05, 0.95);
  if (config.uses_context()) {
    in.context = TensorD({context_frames, config.feature_dim});
    for (auto& v : in.context->values()) v = uniform(-4.0, 1.0);
  }
  return in;
}

GradCheckReport grad_check_frontend(const Frontend& model, const NamedTensors<double>& params,
                                    const GradCheckInputs& inputs, const GradCheckOptions& options) {
  auto estimate = [&](Graph<double>& g) {
    std::optional<Var<double>> ctx;
    if (inputs.context) ctx = g.constant(*inputs.context);
    return model.forward(g, g.constant(inputs.noisy), ctx);
  };
  auto loss = [&](Graph<double>& g) { return l1_l2_loss(estimate(g), inputs.target, inputs.target.rows()); };
  auto terms = [&](Graph<double>& g) {
    TensorD out = estimate(g).value();
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double diff = inputs.target[i] - out[i];
      out[i] = std::abs(diff) + diff * diff;
    }
    return out;
  };
  return grad_check(params, loss, LossTermsBuilder(terms), options);
}

FrontendConfig tiny_config(Variant variant) {
  FrontendConfig c = FrontendConfig::for_variant(variant);
  c.d = 8;
  c.heads = 2;
  c.speech_layers = 1;
  c.noise_layers = 1;
  c.cross_layers = 2;
  return c;
}

}  // namespace noisectx
