#include "devrl/transfer.hpp"

#include <algorithm>
#include <ostream>

#include "devrl/error.hpp"

namespace devrl {
namespace {

constexpr std::size_t kSharedInputs = 18;
constexpr std::size_t kTiltInputs = 22;

void check_source(const Mlp& net, std::size_t out, const char* what) {
  if (net.dims().size() != 4 || net.input_dim() != kSharedInputs || net.output_dim() != out) {
    throw Error(ErrorKind::ShapeMismatch,
                std::string(what) + " must be 18 -> h1 -> h2 -> " + std::to_string(out));
  }
}

std::string columns(std::size_t from, std::size_t to) {
  return "weights[:, " + std::to_string(from) + ":" + std::to_string(to) + "]";
}

void fill_xavier_block(Mlp& net, std::size_t layer, std::size_t row0, std::size_t row1,
                       std::size_t col0, std::size_t col1, Rng& rng) {
  const std::size_t cols = net.dims()[layer];
  const std::size_t rows = net.dims()[layer + 1];
  // The bound uses the full layer fan-in/fan-out, as for a fresh network.
  const double b = xavier_bound(rows, cols);
  std::uniform_real_distribution<double> u(-b, b);
  std::span<double> w = net.weights(layer);
  for (std::size_t r = row0; r < row1; ++r) {
    for (std::size_t c = col0; c < col1; ++c) w[r * cols + c] = u(rng);
  }
}

void set_frozen(Mlp& net, std::size_t begin, std::size_t count) {
  std::span<std::uint8_t> mask = net.frozen_mask();
  std::fill(mask.begin() + static_cast<std::ptrdiff_t>(begin),
            mask.begin() + static_cast<std::ptrdiff_t>(begin + count), std::uint8_t{1});
}

void copy_layer(const Mlp& src, Mlp& dst, std::size_t layer) {
  std::ranges::copy(src.weights(layer), dst.weights(layer).begin());
  std::ranges::copy(src.bias(layer), dst.bias(layer).begin());
}

}  // namespace

std::string_view provenance_name(Provenance p) {
  switch (p) {
    case Provenance::TransferredFrozen: return "transferred_frozen";
    case Provenance::TransferredTrainable: return "transferred_trainable";
    case Provenance::FreshXavier: return "fresh_xavier";
  }
  return "unknown";
}

std::size_t TransferReport::count(Provenance p) const {
  std::size_t n = 0;
  for (const TransferEntry& e : entries) {
    if (e.provenance == p) n += e.count;
  }
  return n;
}

std::size_t TransferReport::total() const {
  std::size_t n = 0;
  for (const TransferEntry& e : entries) n += e.count;
  return n;
}

TransferredNetwork build_tilt_actor(const Mlp& quad_actor, Rng& rng,
                                    const TransferOptions& options) {
  check_source(quad_actor, 4, "quad actor");
  const std::size_t h1 = quad_actor.dims()[1];
  const std::size_t h2 = quad_actor.dims()[2];
  TransferredNetwork out{Mlp({kTiltInputs, h1, h2, 8}, quad_actor.output_activation()), {}};
  Mlp& net = out.net;
  TransferReport& rep = out.report;
  rep.network = "actor";

  // Layer 0: shared columns copied and frozen, tilt columns fresh.
  std::span<const double> src_w0 = quad_actor.weights(0);
  std::span<double> w0 = net.weights(0);
  std::span<std::uint8_t> mask = net.frozen_mask();
  for (std::size_t r = 0; r < h1; ++r) {
    for (std::size_t c = 0; c < kSharedInputs; ++c) {
      w0[r * kTiltInputs + c] = src_w0[r * kSharedInputs + c];
      mask[net.weight_offset(0) + r * kTiltInputs + c] = 1;
    }
  }
  rep.entries.push_back({0, columns(0, kSharedInputs), Provenance::TransferredFrozen, h1 * kSharedInputs});
  const std::size_t tilt_cols = kTiltInputs - kSharedInputs;
  if (options.zero_and_freeze_tilt_columns) {
    for (std::size_t r = 0; r < h1; ++r) {
      for (std::size_t c = kSharedInputs; c < kTiltInputs; ++c) {
        mask[net.weight_offset(0) + r * kTiltInputs + c] = 1;
      }
    }
    rep.entries.push_back(
        {0, columns(kSharedInputs, kTiltInputs), Provenance::TransferredFrozen, h1 * tilt_cols});
  } else {
    fill_xavier_block(net, 0, 0, h1, kSharedInputs, kTiltInputs, rng);
    rep.entries.push_back(
        {0, columns(kSharedInputs, kTiltInputs), Provenance::FreshXavier, h1 * tilt_cols});
  }
  std::ranges::copy(quad_actor.bias(0), net.bias(0).begin());
  set_frozen(net, net.bias_offset(0), h1);
  rep.entries.push_back({0, "bias", Provenance::TransferredFrozen, h1});

  // Layer 1: copied and frozen.
  copy_layer(quad_actor, net, 1);
  set_frozen(net, net.weight_offset(1), h2 * h1 + h2);
  rep.entries.push_back({1, "weights", Provenance::TransferredFrozen, h2 * h1});
  rep.entries.push_back({1, "bias", Provenance::TransferredFrozen, h2});

  // Output layer: fresh, optionally seeded with the motor rows.
  fill_xavier_block(net, 2, 0, 8, 0, h2, rng);
  if (options.copy_motor_output_rows) {
    std::span<const double> src_w2 = quad_actor.weights(2);
    std::ranges::copy(src_w2, net.weights(2).begin());
    std::ranges::copy(quad_actor.bias(2), net.bias(2).begin());
    rep.entries.push_back({2, "weights[0:4, :]", Provenance::TransferredTrainable, 4 * h2});
    rep.entries.push_back({2, "weights[4:8, :]", Provenance::FreshXavier, 4 * h2});
    rep.entries.push_back({2, "bias[0:4]", Provenance::TransferredTrainable, 4});
    rep.entries.push_back({2, "bias[4:8]", Provenance::FreshXavier, 4});
  } else {
    rep.entries.push_back({2, "weights", Provenance::FreshXavier, 8 * h2});
    rep.entries.push_back({2, "bias", Provenance::FreshXavier, 8});
  }
  return out;
}

TransferredNetwork build_tilt_critic(const Mlp& quad_critic, Rng& rng) {
  check_source(quad_critic, 1, "quad critic");
  const std::size_t h1 = quad_critic.dims()[1];
  const std::size_t h2 = quad_critic.dims()[2];
  TransferredNetwork out{Mlp({kTiltInputs, h1, h2, 1}, quad_critic.output_activation()), {}};
  Mlp& net = out.net;
  TransferReport& rep = out.report;
  rep.network = "critic";

  fill_xavier_block(net, 0, 0, h1, 0, kTiltInputs, rng);
  rep.entries.push_back({0, "weights", Provenance::FreshXavier, h1 * kTiltInputs});
  rep.entries.push_back({0, "bias", Provenance::FreshXavier, h1});
  copy_layer(quad_critic, net, 1);
  rep.entries.push_back({1, "weights", Provenance::TransferredTrainable, h2 * h1});
  rep.entries.push_back({1, "bias", Provenance::TransferredTrainable, h2});
  copy_layer(quad_critic, net, 2);
  rep.entries.push_back({2, "weights", Provenance::TransferredTrainable, h2});
  rep.entries.push_back({2, "bias", Provenance::TransferredTrainable, 1});
  return out;
}

void write_transfer_report_text(std::ostream& out, const TransferReport& report) {
  out << "transfer report: " << report.network << '\n';
  for (const TransferEntry& e : report.entries) {
    out << "  layer " << e.layer << ' ' << e.block << ": " << provenance_name(e.provenance) << " ("
        << e.count << ")\n";
  }
  for (Provenance p :
       {Provenance::TransferredFrozen, Provenance::TransferredTrainable, Provenance::FreshXavier}) {
    out << "  total " << provenance_name(p) << ": " << report.count(p) << '\n';
  }
  out << "  total parameters: " << report.total() << '\n';
}

void write_transfer_report_csv(std::ostream& out, std::span<const TransferReport> reports) {
  out << "network,layer,block,category,count\n";
  for (const TransferReport& r : reports) {
    for (const TransferEntry& e : r.entries) {
      out << r.network << ',' << e.layer << ",\"" << e.block << "\"," << provenance_name(e.provenance)
          << ',' << e.count << '\n';
    }
  }
}

TrainResult train_tilt_from_quad(const EnvSettings& settings, const TrainConfig& tilt_cfg,
                                 const Mlp& quad_actor, const Mlp& quad_critic,
                                 TransferReport* actor_report, TransferReport* critic_report,
                                 const TrainHooks& hooks, const TransferOptions& options) {
  Rng rng = make_rng(tilt_cfg.seed, Stream::Transfer);
  TransferredNetwork actor = build_tilt_actor(quad_actor, rng, options);
  TransferredNetwork critic = build_tilt_critic(quad_critic, rng);
  if (actor_report) *actor_report = actor.report;
  if (critic_report) *critic_report = critic.report;
  return train(Platform::TiltRotor, settings, tilt_cfg,
               with_fresh_optimizers(std::move(actor.net), std::move(critic.net), tilt_cfg), hooks);
}

DevelopmentalResult developmental_train(const EnvSettings& settings, const TrainConfig& quad_cfg,
                                        const TrainConfig& tilt_cfg,
                                        const DevelopmentalHooks& hooks,
                                        const TransferOptions& options) {
  DevelopmentalResult result;
  Rng init_rng = make_rng(quad_cfg.seed, Stream::WeightInit);
  result.quad = train(Platform::Quad, settings, quad_cfg,
                      make_networks(Platform::Quad, quad_cfg, init_rng), hooks.quad);
  result.logs.push_back({"quad", result.quad.log});
  result.tilt = train_tilt_from_quad(settings, tilt_cfg, result.quad.nets.actor,
                                     result.quad.nets.critic, &result.actor_report,
                                     &result.critic_report, hooks.tilt, options);
  result.logs.push_back({"tilt", result.tilt.log});
  return result;
}

}  // namespace devrl
