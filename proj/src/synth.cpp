#include "texturesmith/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "texturesmith/error.hpp"
#include "texturesmith/random.hpp"

namespace texturesmith {

void SynthesisConfig::validate() const {
  if (!(step_size >= 0.0) || !std::isfinite(step_size)) throw ConfigError(ConfigErrc::InvalidValue, "step size must be >= 0");
  if (max_iterations < 1) throw ConfigError(ConfigErrc::InvalidValue, "max iterations must be >= 1");
  if (!(convergence_tol >= 0.0)) throw ConfigError(ConfigErrc::InvalidValue, "convergence tolerance must be >= 0");
  if (!(clamp_lo < clamp_hi)) throw ConfigError(ConfigErrc::InvalidValue, "clamp range must satisfy lo < hi");
  if (!layer_weights.empty() && layer_weights.size() != layer_indices.size()) {
    throw ConfigError(ConfigErrc::InvalidValue, "layer weights must match the layer list");
  }
  for (float w : layer_weights) {
    if (!(w >= 0.0f)) throw ConfigError(ConfigErrc::InvalidValue, "layer weights must be >= 0");
  }
}

std::vector<std::size_t> SynthesisConfig::resolved_layers(const NetworkSpec& net) const {
  return layer_indices.empty() ? default_style_layers(net) : layer_indices;
}

std::vector<float> SynthesisConfig::resolved_weights(const NetworkSpec& net) const {
  if (!layer_weights.empty()) return layer_weights;
  return uniform_layer_weights(resolved_layers(net).size());
}

void LossTrace::write_csv(std::ostream& out) const {
  const std::size_t n_layers = records.empty() ? 0 : records.front().layer_losses.size();
  out << "iter,total";
  for (std::size_t l = 0; l < n_layers; ++l) out << ",E_l" << l;
  out << '\n';
  char buf[64];
  for (const auto& r : records) {
    out << r.iteration;
    std::snprintf(buf, sizeof buf, ",%.9g", r.total);
    out << buf;
    for (double e : r.layer_losses) {
      std::snprintf(buf, sizeof buf, ",%.9g", e);
      out << buf;
    }
    out << '\n';
  }
}

std::string LossTrace::to_csv() const {
  std::ostringstream out;
  write_csv(out);
  return out.str();
}

TextureEvaluation evaluate_texture(const ImageTensor& image, const GramSet& target, const NetworkSpec& net,
                                   std::span<const float> channel_mean) {
  TextureEvaluation eval;
  eval.trace = network_forward(net, preprocess(image, channel_mean));
  std::vector<double> weights;
  for (const auto& entry : target.entries) {
    if (entry.layer_index >= eval.trace.size()) {
      throw ShapeError("target descriptor references layer " + std::to_string(entry.layer_index) +
                       " beyond the network");
    }
    const FeatureMatrix f = flatten_features(eval.trace.outputs[entry.layer_index]);
    if (f.n_filters != entry.n_filters) {
      throw ShapeError("target descriptor has " + std::to_string(entry.n_filters) + " filters, activation has " +
                           std::to_string(f.n_filters),
                       entry.layer_index);
    }
    eval.grams.push_back(gram(f));
    // A style image of another size has a Gram summed over a different
    // number of positions; compare per-position statistics.
    GramMatrix q = entry.gram;
    if (entry.n_positions != f.n_positions && entry.n_positions > 0) {
      const double ratio = static_cast<double>(f.n_positions) / static_cast<double>(entry.n_positions);
      for (float& v : q.values) v = static_cast<float>(v * ratio);
    }
    eval.layer_losses.push_back(layer_loss(eval.grams.back(), q, f.n_filters, f.n_positions));
    eval.targets.push_back(std::move(q));
    weights.push_back(entry.weight);
  }
  eval.loss = total_loss(eval.layer_losses, weights);
  return eval;
}

ImageTensor texture_gradient(const TextureEvaluation& eval, const GramSet& target, const NetworkSpec& net) {
  std::map<std::size_t, ImageTensor> injected;
  for (std::size_t e = 0; e < target.entries.size(); ++e) {
    const auto& entry = target.entries[e];
    const ImageTensor& act = eval.trace.outputs[entry.layer_index];
    FeatureMatrix grad = layer_loss_gradient(flatten_features(act), eval.grams[e], eval.targets[e]);
    for (float& v : grad.values) v *= entry.weight;
    injected.emplace(entry.layer_index, unflatten_features(grad, act.height(), act.width()));
  }
  return network_backward(net, eval.trace, injected);
}

bool matches_target(const TextureEvaluation& eval) {
  for (std::size_t e = 0; e < eval.targets.size(); ++e) {
    const auto& q = eval.targets[e].values;
    const auto& g = eval.grams[e].values;
    for (std::size_t i = 0; i < q.size(); ++i) {
      const double tol = 1e-10 * std::max(1.0, std::fabs(static_cast<double>(q[i])));
      if (std::fabs(static_cast<double>(g[i]) - q[i]) > tol) return false;
    }
  }
  return true;
}

ImageTensor init_image(InitMode mode, const ImageTensor& content, std::uint64_t seed, float lo, float hi) {
  if (content.empty()) throw ShapeError("initialization needs a content image");
  if (mode == InitMode::ContentImage) return content;
  ImageTensor out(content.shape());
  SeededUniform rng(seed);
  for (float& v : out.values()) v = static_cast<float>(rng.next(lo, hi));
  return out;
}

namespace {

ImageTensor descend(const ImageTensor& y, const ImageTensor& grad, double step, float lo, float hi) {
  ImageTensor out(y.shape());
  auto src = y.values();
  auto g = grad.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const float v = static_cast<float>(src[i] - step * g[i]);
    dst[i] = std::clamp(v, lo, hi);
  }
  return out;
}

void require_finite(double loss, std::size_t iteration) {
  if (!std::isfinite(loss)) {
    throw NumericalError("non-finite texture loss at iteration " + std::to_string(iteration));
  }
}

void require_finite(const ImageTensor& image) {
  for (float v : image.values()) {
    if (!std::isfinite(v)) throw NumericalError("non-finite pixel in the initial image");
  }
}

}  // namespace

StepResult synthesis_step(const ImageTensor& y, const GramSet& target, const NetworkSpec& net,
                          const SynthesisConfig& cfg) {
  require_finite(y);
  const TextureEvaluation eval = evaluate_texture(y, target, net, cfg.channel_mean);
  require_finite(eval.loss, 0);
  const ImageTensor grad = texture_gradient(eval, target, net);
  return {descend(y, grad, cfg.step_size, cfg.clamp_lo, cfg.clamp_hi), eval.loss, eval.layer_losses};
}

const char* stop_reason_name(StopReason reason) noexcept {
  switch (reason) {
    case StopReason::MaxIterations:
      return "max_iterations";
    case StopReason::Converged:
      return "converged";
    case StopReason::FixedPoint:
      return "fixed_point";
    case StopReason::LineSearchFailed:
      return "line_search_failed";
  }
  return "?";
}

SynthesisResult synthesize(const ImageTensor& content, const GramSet& target, const NetworkSpec& net,
                           const SynthesisConfig& cfg) {
  cfg.validate();
  target.validate();
  SynthesisResult result;
  result.image = init_image(cfg.init_mode, content, cfg.rng_seed, cfg.clamp_lo, cfg.clamp_hi);
  require_finite(result.image);

  TextureEvaluation eval = evaluate_texture(result.image, target, net, cfg.channel_mean);
  for (std::size_t t = 1; t <= cfg.max_iterations; ++t) {
    require_finite(eval.loss, t);
    result.trace.records.push_back({t, eval.loss, eval.layer_losses});
    result.final_loss = eval.loss;

    if (matches_target(eval)) {
      result.stop = StopReason::FixedPoint;
      return result;
    }

    const ImageTensor grad = texture_gradient(eval, target, net);
    double step = cfg.step_size;
    bool accepted = false;
    ImageTensor trial;
    TextureEvaluation trial_eval;
    for (std::size_t h = 0; h <= cfg.max_halvings; ++h, step *= 0.5) {
      trial = descend(result.image, grad, step, cfg.clamp_lo, cfg.clamp_hi);
      trial_eval = evaluate_texture(trial, target, net, cfg.channel_mean);
      if (trial_eval.loss <= eval.loss) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      result.stop = StopReason::LineSearchFailed;
      return result;
    }

    const double change = std::fabs(trial_eval.loss - eval.loss);
    result.image = std::move(trial);
    result.final_loss = trial_eval.loss;
    eval = std::move(trial_eval);
    if (change <= cfg.convergence_tol * result.trace.records.back().total) {
      result.stop = StopReason::Converged;
      return result;
    }
  }
  result.stop = StopReason::MaxIterations;
  return result;
}

}  // namespace texturesmith
