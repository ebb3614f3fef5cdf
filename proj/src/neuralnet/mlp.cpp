#include "devrl/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "devrl/error.hpp"
#include "devrl/kernels.hpp"

namespace devrl {
namespace {

void require_dim(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::DimensionMismatch, what);
}

}  // namespace

Mlp::Mlp(std::vector<std::size_t> dims, OutputActivation output_activation)
    : dims_(std::move(dims)), output_activation_(output_activation) {
  require_dim(dims_.size() >= 2, "network needs at least an input and an output layer");
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    require_dim(dims_[l] > 0 && dims_[l + 1] > 0, "layer widths must be positive");
    offsets_.push_back(total);
    total += dims_[l + 1] * dims_[l] + dims_[l + 1];
  }
  params_.assign(total, 0.0);
  frozen_.assign(total, 0);
}

Mlp Mlp::xavier(std::vector<std::size_t> dims, OutputActivation output_activation, Rng& rng) {
  Mlp net(std::move(dims), output_activation);
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const std::vector<double> w = xavier_init(net.dims_[l + 1], net.dims_[l], rng);
    std::copy(w.begin(), w.end(), net.weights(l).begin());
  }
  return net;
}

std::span<double> Mlp::weights(std::size_t layer) {
  return std::span<double>(params_).subspan(weight_offset(layer), dims_[layer + 1] * dims_[layer]);
}

std::span<const double> Mlp::weights(std::size_t layer) const {
  return std::span<const double>(params_).subspan(weight_offset(layer),
                                                  dims_[layer + 1] * dims_[layer]);
}

std::span<double> Mlp::bias(std::size_t layer) {
  return std::span<double>(params_).subspan(bias_offset(layer), dims_[layer + 1]);
}

std::span<const double> Mlp::bias(std::size_t layer) const {
  return std::span<const double>(params_).subspan(bias_offset(layer), dims_[layer + 1]);
}

std::size_t Mlp::frozen_count() const {
  return static_cast<std::size_t>(std::count(frozen_.begin(), frozen_.end(), std::uint8_t{1}));
}

std::vector<double> Mlp::forward(std::span<const double> x) const {
  Activations cache;
  forward(x, cache);
  return std::move(cache.values.back());
}

void Mlp::forward(std::span<const double> x, Activations& cache) const {
  require_dim(x.size() == input_dim(), "input has " + std::to_string(x.size()) +
                                           " components, network expects " +
                                           std::to_string(input_dim()));
  cache.values.resize(dims_.size());
  cache.values[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < layer_count(); ++l) {
    std::vector<double>& out = cache.values[l + 1];
    out.resize(dims_[l + 1]);
    kernels::affine(weights(l), bias(l), cache.values[l], out);
    const bool last = l + 1 == layer_count();
    if (!last || output_activation_ == OutputActivation::Tanh) {
      for (double& v : out) v = std::tanh(v);
    }
  }
}

void Mlp::accumulate_gradients(const Activations& cache, std::span<const double> upstream,
                               std::span<double> grad) const {
  require_dim(upstream.size() == output_dim(), "upstream gradient has wrong size");
  require_dim(grad.size() == parameter_count(), "gradient buffer has wrong size");
  require_dim(cache.values.size() == dims_.size(), "activation cache does not match network");

  std::vector<double> delta(upstream.begin(), upstream.end());
  std::vector<double> next_delta;
  for (std::size_t l = layer_count(); l-- > 0;) {
    const std::vector<double>& out = cache.values[l + 1];
    const bool last = l + 1 == layer_count();
    if (!last || output_activation_ == OutputActivation::Tanh) {
      for (std::size_t i = 0; i < delta.size(); ++i) delta[i] *= 1.0 - out[i] * out[i];
    }
    const std::vector<double>& in = cache.values[l];
    kernels::outer_acc(delta, in, grad.subspan(weight_offset(l), dims_[l + 1] * dims_[l]));
    kernels::axpy(1.0, delta, grad.subspan(bias_offset(l), dims_[l + 1]));
    if (l == 0) break;
    next_delta.assign(dims_[l], 0.0);
    kernels::affine_transpose_acc(weights(l), delta, next_delta);
    delta.swap(next_delta);
  }
}

std::vector<double> Mlp::gradients(std::span<const double> x,
                                   std::span<const double> upstream) const {
  Activations cache;
  forward(x, cache);
  std::vector<double> grad(parameter_count(), 0.0);
  accumulate_gradients(cache, upstream, grad);
  mask_frozen(grad);
  return grad;
}

void Mlp::mask_frozen(std::span<double> grad) const {
  require_dim(grad.size() == parameter_count(), "gradient buffer has wrong size");
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (frozen_[i]) grad[i] = 0.0;
  }
}

double xavier_bound(std::size_t rows, std::size_t cols) {
  return std::min(std::sqrt(6.0 / static_cast<double>(rows + cols)), 0.1);
}

std::vector<double> xavier_init(std::size_t rows, std::size_t cols, Rng& rng) {
  require_dim(rows > 0 && cols > 0, "xavier_init needs positive dimensions");
  const double b = xavier_bound(rows, cols);
  std::uniform_real_distribution<double> u(-b, b);
  std::vector<double> w(rows * cols);
  for (double& v : w) v = u(rng);
  return w;
}

void adam_step(Mlp& net, AdamState& opt, std::span<const double> grads, double lr) {
  const std::size_t n = net.parameter_count();
  require_dim(grads.size() == n && opt.first_moment.size() == n && opt.second_moment.size() == n,
              "adam_step: gradient or moment size does not match network");
  ++opt.step_count;
  const double t = static_cast<double>(opt.step_count);
  const kernels::AdamArgs args{net.parameters().data(),
                               grads.data(),
                               opt.first_moment.data(),
                               opt.second_moment.data(),
                               net.frozen_mask().data(),
                               n,
                               lr,
                               opt.beta1,
                               opt.beta2,
                               opt.eps,
                               1.0 - std::pow(opt.beta1, t),
                               1.0 - std::pow(opt.beta2, t)};
  kernels::active().adam(args);
}

double gaussian_log_prob(std::span<const double> mean, double sigma, std::span<const double> a) {
  require_dim(mean.size() == a.size(), "gaussian_log_prob: mean and sample differ in size");
  const double k = static_cast<double>(mean.size());
  double sq = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double d = a[i] - mean[i];
    sq += d * d;
  }
  return -0.5 * k * std::log(2.0 * std::numbers::pi) - k * std::log(sigma) -
         sq / (2.0 * sigma * sigma);
}

}  // namespace devrl
