#pragma once

// Finite differences against nn::backward on a random network with a
// random linear readout L = sum(G .* f(X)).

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "qgraph/neural.hpp"

namespace qgraph::testing {

struct GradCheck {
  double max_rel_param = 0.0;
  double max_rel_input = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_at_kink = 0;  // stencil straddles a ReLU switch
};

inline nn::LayerSpec random_spec(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> width(1, 6);
  std::uniform_int_distribution<std::size_t> depth(1, 3);
  const nn::Activation acts[] = {nn::Activation::relu, nn::Activation::tanh,
                                 nn::Activation::linear};
  nn::LayerSpec spec;
  const std::size_t layers = depth(rng);
  for (std::size_t i = 0; i <= layers; ++i) spec.sizes.push_back(width(rng));
  spec.hidden = acts[rng() % 3];
  spec.output = acts[rng() % 3];
  return spec;
}

// L = sum(G .* f(X)); `pattern` receives the on/off state of every ReLU unit.
inline double readout(const nn::Mlp& net, const nn::Matrix& x, const nn::Matrix& g,
                      std::vector<bool>* pattern = nullptr) {
  nn::ForwardCache cache;
  const nn::Matrix y = nn::forward(net, x, &cache);
  if (pattern) {
    pattern->clear();
    for (std::size_t l = 1; l < cache.activations.size(); ++l) {
      const bool last = l + 1 == cache.activations.size();
      if ((last ? net.spec().output : net.spec().hidden) != nn::Activation::relu) continue;
      for (double v : cache.activations[l].data) pattern->push_back(v > 0.0);
    }
  }
  double s = 0.0;
  for (std::size_t i = 0; i < y.data.size(); ++i) s += g.data[i] * y.data[i];
  return s;
}

inline double rel_error(double analytic, double numeric) {
  return std::fabs(analytic - numeric) / std::max(1e-6, std::fabs(analytic) + std::fabs(numeric));
}

// Fourth-order central difference. Its truncation error is negligible at
// h = 1e-5, and roundoff is ~100x below a plain central difference at 1e-6,
// which matters for gradients of order 1e-7.
// Returns nothing when a ReLU switches inside the stencil: the readout is not
// differentiable there and no difference quotient approximates the gradient.
template <class F>
std::optional<double> stencil(double h, const std::vector<bool>& centre, F&& f) {
  std::vector<bool> pattern;
  double v[4];
  const double offsets[4] = {h, -h, 2.0 * h, -2.0 * h};
  for (int k = 0; k < 4; ++k) {
    v[k] = f(offsets[k], pattern);
    if (pattern != centre) return std::nullopt;
  }
  return (8.0 * (v[0] - v[1]) - (v[2] - v[3])) / (12.0 * h);
}

inline GradCheck check_gradients(std::mt19937_64& rng, double h = 1e-5) {
  const nn::LayerSpec spec = random_spec(rng);
  nn::Mlp net = nn::Mlp::init(spec, nn::InitScheme::gaussian(0.0, 0.8), rng);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& b : net.params()) {
    if (b == 0.0) b = 0.1 * normal(rng);  // biases start at zero
  }
  const std::size_t batch = 1 + rng() % 4;
  nn::Matrix x(batch, spec.sizes.front());
  nn::Matrix g(batch, spec.sizes.back());
  for (double& v : x.data) v = normal(rng);
  for (double& v : g.data) v = normal(rng);

  nn::ForwardCache cache;
  nn::forward(net, x, &cache);
  const nn::Gradients grads = nn::backward(net, cache, g);
  std::vector<bool> centre;
  readout(net, x, g, &centre);

  GradCheck out;
  for (std::size_t i = 0; i < net.num_params(); ++i) {
    const double keep = net.params()[i];
    const auto numeric = stencil(h, centre, [&](double d, std::vector<bool>& pattern) {
      net.params()[i] = keep + d;
      return readout(net, x, g, &pattern);
    });
    net.params()[i] = keep;
    if (!numeric) {
      ++out.skipped_at_kink;
      continue;
    }
    ++out.checked;
    out.max_rel_param = std::max(out.max_rel_param, rel_error(grads.params[i], *numeric));
  }
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double keep = x.data[i];
    const auto numeric = stencil(h, centre, [&](double d, std::vector<bool>& pattern) {
      x.data[i] = keep + d;
      return readout(net, x, g, &pattern);
    });
    x.data[i] = keep;
    if (!numeric) {
      ++out.skipped_at_kink;
      continue;
    }
    ++out.checked;
    out.max_rel_input = std::max(out.max_rel_input, rel_error(grads.input.data[i], *numeric));
  }
  return out;
}

}  // namespace qgraph::testing
