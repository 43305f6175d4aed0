#pragma once

// Small dense feed-forward networks: batched forward/backward passes on top of
// the runtime-dispatched GEMM kernel, initializers, Adam, and checkpoints.

#include <cstddef>
#include <iosfwd>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace qgraph::nn {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NonFinite : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Row-major dense matrix; one sample per row.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }
};

enum class Activation { relu, tanh, linear };

struct LayerSpec {
  std::vector<std::size_t> sizes;  // input width first, output width last
  Activation hidden = Activation::relu;
  Activation output = Activation::linear;

  void validate() const;
  std::size_t num_layers() const { return sizes.size() - 1; }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct InitScheme {
  enum class Kind { gaussian, xavier_uniform, he_uniform };
  Kind kind = Kind::xavier_uniform;
  double mean = 0.0;
  double stddev = 1.0;

  static InitScheme gaussian(double mean, double stddev) {
    return {Kind::gaussian, mean, stddev};
  }
  static InitScheme xavier_uniform() { return {Kind::xavier_uniform, 0.0, 0.0}; }
  static InitScheme he_uniform() { return {Kind::he_uniform, 0.0, 0.0}; }
};

// Parameters live in one flat buffer so that optimizers and kernels can treat
// them as a single vector. Layer l stores its weights as an (in x out)
// row-major block followed by `out` biases.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(LayerSpec spec);  // all parameters zero

  static Mlp init(LayerSpec spec, const InitScheme& scheme, std::mt19937_64& rng);

  const LayerSpec& spec() const { return spec_; }
  std::size_t num_layers() const { return spec_.num_layers(); }
  std::size_t input_size() const { return spec_.sizes.front(); }
  std::size_t output_size() const { return spec_.sizes.back(); }
  std::size_t num_params() const { return params_.size(); }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  // weights(l)[i * out + o] connects input i to output o.
  std::span<double> weights(std::size_t layer);
  std::span<const double> weights(std::size_t layer) const;
  std::span<double> bias(std::size_t layer);
  std::span<const double> bias(std::size_t layer) const;

  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_[layer] + spec_.sizes[layer] * spec_.sizes[layer + 1];
  }

  friend bool operator==(const Mlp&, const Mlp&) = default;

 private:
  LayerSpec spec_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

struct ForwardCache {
  // activations[0] is the input; activations[l + 1] the output of layer l.
  std::vector<Matrix> activations;
};

Matrix forward(const Mlp& net, const Matrix& input, ForwardCache* cache = nullptr);
std::vector<double> forward(const Mlp& net, std::span<const double> input);

struct Gradients {
  std::vector<double> params;  // same layout as Mlp::params(); empty if skipped
  Matrix input;
};

// Reverse-mode pass for a batch whose forward activations are in `cache`.
Gradients backward(const Mlp& net, const ForwardCache& cache,
                   const Matrix& output_grad, bool param_grads = true);
Gradients backward(const Mlp& net, std::span<const double> input,
                   std::span<const double> output_grad);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

void adam_step(Mlp& net, std::span<const double> grads, AdamState& state,
               double lr);

bool all_finite(std::span<const double> values);

// Text checkpoint: spec line, then every parameter with 17 significant digits.
void save_checkpoint(const Mlp& net, std::ostream& out);
Mlp load_checkpoint(std::istream& in);

}  // namespace qgraph::nn
