#include "qgraph/neural.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "qgraph/simd/kernels.hpp"

namespace qgraph::nn {

namespace {

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::relu:
      return "relu";
    case Activation::tanh:
      return "tanh";
    case Activation::linear:
      return "linear";
  }
  return "?";
}

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "linear") return Activation::linear;
  throw ShapeError("checkpoint: unknown activation '" + s + "'");
}

void activate(Activation act, std::span<double> values) {
  switch (act) {
    case Activation::relu:
      for (double& x : values) x = x > 0.0 ? x : 0.0;
      break;
    case Activation::tanh:
      simd::active().tanh_inplace(values.size(), values.data());
      break;
    case Activation::linear:
      break;
  }
}

// delta *= f'(pre), expressed through the activation output y = f(pre).
void activation_backward(Activation act, std::span<const double> y,
                         std::span<double> delta) {
  switch (act) {
    case Activation::relu:
      for (std::size_t i = 0; i < y.size(); ++i) {
        if (!(y[i] > 0.0)) delta[i] = 0.0;
      }
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < y.size(); ++i) delta[i] *= 1.0 - y[i] * y[i];
      break;
    case Activation::linear:
      break;
  }
}

}  // namespace

void LayerSpec::validate() const {
  if (sizes.size() < 2) throw ShapeError("layer spec: need at least two sizes");
  for (std::size_t s : sizes) {
    if (s == 0) throw ShapeError("layer spec: widths must be positive");
  }
}

Mlp::Mlp(LayerSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  std::size_t total = 0;
  for (std::size_t l = 0; l < spec_.num_layers(); ++l) {
    offsets_.push_back(total);
    total += spec_.sizes[l] * spec_.sizes[l + 1] + spec_.sizes[l + 1];
  }
  params_.assign(total, 0.0);
}

Mlp Mlp::init(LayerSpec spec, const InitScheme& scheme, std::mt19937_64& rng) {
  if (scheme.kind == InitScheme::Kind::gaussian && !(scheme.stddev > 0.0)) {
    throw ShapeError("gaussian init: stddev must be positive");
  }
  Mlp net(std::move(spec));
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const double fan_in = static_cast<double>(net.spec_.sizes[l]);
    const double fan_out = static_cast<double>(net.spec_.sizes[l + 1]);
    auto w = net.weights(l);
    switch (scheme.kind) {
      case InitScheme::Kind::gaussian: {
        std::normal_distribution<double> dist(scheme.mean, scheme.stddev);
        for (double& x : w) x = dist(rng);
        break;
      }
      case InitScheme::Kind::xavier_uniform:
      case InitScheme::Kind::he_uniform: {
        const double bound =
            scheme.kind == InitScheme::Kind::xavier_uniform
                ? std::sqrt(6.0 / (fan_in + fan_out))
                : std::sqrt(6.0 / fan_in);
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (double& x : w) x = dist(rng);
        break;
      }
    }
  }
  return net;
}

std::span<double> Mlp::weights(std::size_t layer) {
  return {params_.data() + offsets_.at(layer),
          spec_.sizes[layer] * spec_.sizes[layer + 1]};
}
std::span<const double> Mlp::weights(std::size_t layer) const {
  return {params_.data() + offsets_.at(layer),
          spec_.sizes[layer] * spec_.sizes[layer + 1]};
}
std::span<double> Mlp::bias(std::size_t layer) {
  return {params_.data() + bias_offset(layer), spec_.sizes[layer + 1]};
}
std::span<const double> Mlp::bias(std::size_t layer) const {
  return {params_.data() + bias_offset(layer), spec_.sizes[layer + 1]};
}

bool all_finite(std::span<const double> values) {
  for (double x : values) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

Matrix forward(const Mlp& net, const Matrix& input, ForwardCache* cache) {
  if (input.cols != net.input_size()) {
    throw ShapeError("forward: input width " + std::to_string(input.cols) +
                     " != " + std::to_string(net.input_size()));
  }
  const auto& k = simd::active();
  const auto& sizes = net.spec().sizes;
  const std::size_t batch = input.rows;
  if (cache) {
    cache->activations.clear();
    cache->activations.push_back(input);
  }
  Matrix x = input;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const std::size_t in = sizes[l];
    const std::size_t out = sizes[l + 1];
    Matrix y(batch, out);
    k.gemm(batch, out, in, x.data.data(), in, 1, net.weights(l).data(), out,
           y.data.data(), out, false);
    const auto b = net.bias(l);
    for (std::size_t r = 0; r < batch; ++r) {
      double* row = y.data.data() + r * out;
      for (std::size_t o = 0; o < out; ++o) row[o] += b[o];
    }
    activate(l + 1 == net.num_layers() ? net.spec().output : net.spec().hidden,
             y.data);
    if (cache) cache->activations.push_back(y);
    x = std::move(y);
  }
  if (!all_finite(x.data)) throw NonFinite("forward: non-finite network output");
  return x;
}

std::vector<double> forward(const Mlp& net, std::span<const double> input) {
  Matrix in(1, input.size());
  std::copy(input.begin(), input.end(), in.data.begin());
  return forward(net, in).data;
}

Gradients backward(const Mlp& net, const ForwardCache& cache,
                   const Matrix& output_grad, bool param_grads) {
  const std::size_t layers = net.num_layers();
  if (cache.activations.size() != layers + 1) {
    throw ShapeError("backward: cache does not match network depth");
  }
  const std::size_t batch = cache.activations.front().rows;
  if (output_grad.rows != batch || output_grad.cols != net.output_size()) {
    throw ShapeError("backward: output gradient shape mismatch");
  }
  const auto& k = simd::active();
  const auto& sizes = net.spec().sizes;

  Gradients g;
  if (param_grads) g.params.assign(net.num_params(), 0.0);
  Matrix delta = output_grad;
  std::vector<double> w_t;
  for (std::size_t l = layers; l-- > 0;) {
    const std::size_t in = sizes[l];
    const std::size_t out = sizes[l + 1];
    const Matrix& x = cache.activations[l];
    const Matrix& y = cache.activations[l + 1];
    activation_backward(l + 1 == layers ? net.spec().output : net.spec().hidden,
                        y.data, delta.data);

    if (param_grads) {
      // dW (in x out) = x^T * delta; x^T is read through strides.
      k.gemm(in, out, batch, x.data.data(), 1, in, delta.data.data(), out,
             g.params.data() + net.weight_offset(l), out, false);
      double* db = g.params.data() + net.bias_offset(l);
      for (std::size_t r = 0; r < batch; ++r) {
        const double* row = delta.data.data() + r * out;
        for (std::size_t o = 0; o < out; ++o) db[o] += row[o];
      }
    }

    // dx (batch x in) = delta * W^T; W^T copied to keep B row-contiguous.
    const auto w = net.weights(l);
    w_t.resize(in * out);
    for (std::size_t i = 0; i < in; ++i) {
      for (std::size_t o = 0; o < out; ++o) w_t[o * in + i] = w[i * out + o];
    }
    Matrix dx(batch, in);
    k.gemm(batch, in, out, delta.data.data(), out, 1, w_t.data(), in,
           dx.data.data(), in, false);
    delta = std::move(dx);
  }
  g.input = std::move(delta);
  if (!all_finite(g.params) || !all_finite(g.input.data)) {
    throw NonFinite("backward: non-finite gradient");
  }
  return g;
}

Gradients backward(const Mlp& net, std::span<const double> input,
                   std::span<const double> output_grad) {
  Matrix in(1, input.size());
  std::copy(input.begin(), input.end(), in.data.begin());
  ForwardCache cache;
  forward(net, in, &cache);
  Matrix og(1, output_grad.size());
  std::copy(output_grad.begin(), output_grad.end(), og.data.begin());
  return backward(net, cache, og);
}

void adam_step(Mlp& net, std::span<const double> grads, AdamState& state,
               double lr) {
  if (grads.size() != net.num_params() || state.m.size() != net.num_params() ||
      state.v.size() != net.num_params()) {
    throw ShapeError("adam_step: gradient / state size mismatch");
  }
  if (!(lr > 0.0)) throw ShapeError("adam_step: learning rate must be positive");
  if (!all_finite(grads)) throw NonFinite("adam_step: non-finite gradient");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 / (1.0 - std::pow(state.beta1, t));
  const double c2 = 1.0 / (1.0 - std::pow(state.beta2, t));
  simd::active().adam_update(net.num_params(), net.params().data(), grads.data(),
                             state.m.data(), state.v.data(), state.beta1,
                             state.beta2, state.eps, lr, c1, c2);
}

void save_checkpoint(const Mlp& net, std::ostream& out) {
  out << "mlp 1\nsizes";
  for (std::size_t s : net.spec().sizes) out << ' ' << s;
  out << "\nhidden " << activation_name(net.spec().hidden) << "\noutput "
      << activation_name(net.spec().output) << "\nparams " << net.num_params()
      << '\n';
  char buf[64];
  for (double x : net.params()) {
    std::snprintf(buf, sizeof(buf), "%.17g\n", x);
    out << buf;
  }
}

Mlp load_checkpoint(std::istream& in) {
  std::string word;
  int version = 0;
  if (!(in >> word >> version) || word != "mlp" || version != 1) {
    throw ShapeError("checkpoint: bad header");
  }
  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  std::istringstream sizes_line(line);
  sizes_line >> word;
  if (word != "sizes") throw ShapeError("checkpoint: expected sizes line");
  LayerSpec spec;
  std::size_t s = 0;
  while (sizes_line >> s) spec.sizes.push_back(s);
  std::string hidden, output;
  if (!(in >> word >> hidden) || word != "hidden") {
    throw ShapeError("checkpoint: expected hidden activation");
  }
  if (!(in >> word >> output) || word != "output") {
    throw ShapeError("checkpoint: expected output activation");
  }
  spec.hidden = parse_activation(hidden);
  spec.output = parse_activation(output);
  std::size_t count = 0;
  if (!(in >> word >> count) || word != "params") {
    throw ShapeError("checkpoint: expected params count");
  }
  Mlp net(spec);
  if (count != net.num_params()) throw ShapeError("checkpoint: parameter count mismatch");
  for (double& x : net.params()) {
    std::string token;
    if (!(in >> token)) throw ShapeError("checkpoint: truncated parameters");
    char* end = nullptr;
    x = std::strtod(token.c_str(), &end);
    if (end != token.c_str() + token.size()) throw ShapeError("checkpoint: bad value");
  }
  return net;
}

}  // namespace qgraph::nn
