#pragma once

// Small fully-connected tanh networks with reverse-mode gradients and Adam.
//
// Parameters live in one flat buffer, layer by layer: the row-major weight
// matrix (out x in) followed by the bias vector. The frozen mask and the
// Adam moments use the same indexing.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "devrl/rng.hpp"

namespace devrl {

enum class OutputActivation : std::uint8_t { Tanh = 0, Identity = 1 };

class Mlp {
 public:
  Mlp() = default;
  // dims = {input, hidden..., output}; all parameters zero, nothing frozen.
  Mlp(std::vector<std::size_t> dims, OutputActivation output_activation);

  // Weights Xavier-uniform (bound capped at 0.1), biases zero.
  static Mlp xavier(std::vector<std::size_t> dims, OutputActivation output_activation, Rng& rng);

  std::size_t input_dim() const { return dims_.front(); }
  std::size_t output_dim() const { return dims_.back(); }
  std::size_t layer_count() const { return dims_.size() - 1; }
  std::size_t parameter_count() const { return params_.size(); }
  const std::vector<std::size_t>& dims() const { return dims_; }
  OutputActivation output_activation() const { return output_activation_; }

  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_[layer] + dims_[layer + 1] * dims_[layer];
  }

  std::span<double> weights(std::size_t layer);
  std::span<const double> weights(std::size_t layer) const;
  std::span<double> bias(std::size_t layer);
  std::span<const double> bias(std::size_t layer) const;

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  std::span<std::uint8_t> frozen_mask() { return frozen_; }
  std::span<const std::uint8_t> frozen_mask() const { return frozen_; }
  std::size_t frozen_count() const;

  // Per-layer post-activation values; index 0 is the input.
  struct Activations {
    std::vector<std::vector<double>> values;
  };

  std::vector<double> forward(std::span<const double> x) const;
  void forward(std::span<const double> x, Activations& cache) const;

  // Gradient of output . upstream with respect to every parameter; frozen
  // entries are exactly zero.
  std::vector<double> gradients(std::span<const double> x, std::span<const double> upstream) const;

  // Adds d(output . upstream)/d(params) for a cached forward pass into grad.
  // Does not apply the frozen mask; call mask_frozen once per batch.
  void accumulate_gradients(const Activations& cache, std::span<const double> upstream,
                            std::span<double> grad) const;

  void mask_frozen(std::span<double> grad) const;

  friend bool operator==(const Mlp&, const Mlp&) = default;

 private:
  std::vector<std::size_t> dims_;
  std::vector<std::size_t> offsets_;
  OutputActivation output_activation_ = OutputActivation::Tanh;
  std::vector<double> params_;
  std::vector<std::uint8_t> frozen_;
};

// Uniform in [-b, b], b = min(sqrt(6 / (rows + cols)), 0.1); row-major rows x cols.
std::vector<double> xavier_init(std::size_t rows, std::size_t cols, Rng& rng);
double xavier_bound(std::size_t rows, std::size_t cols);

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  explicit AdamState(std::size_t n, double b1 = 0.9, double b2 = 0.999, double epsilon = 1e-8)
      : first_moment(n, 0.0), second_moment(n, 0.0), beta1(b1), beta2(b2), eps(epsilon) {}

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

// Bias-corrected Adam descent step on every non-frozen parameter.
void adam_step(Mlp& net, AdamState& opt, std::span<const double> grads, double lr);

// log N(a; mean, sigma^2 I)
double gaussian_log_prob(std::span<const double> mean, double sigma, std::span<const double> a);

}  // namespace devrl
