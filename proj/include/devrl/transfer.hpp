#pragma once

// Developmental transfer from a trained quadcopter actor/critic pair to the
// tilt-rotor networks.
//
// Actor: the first two layers keep the quadcopter weights and are frozen; the
// four tilt-error input columns of the first layer and the whole output layer
// are fresh Xavier weights and stay trainable.
// Critic: the input layer is fresh, the remaining layers are copied, and
// nothing is frozen.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "devrl/mlp.hpp"
#include "devrl/ppo.hpp"

namespace devrl {

enum class Provenance { TransferredFrozen, TransferredTrainable, FreshXavier };

std::string_view provenance_name(Provenance p);

struct TransferEntry {
  std::size_t layer = 0;
  std::string block;  // e.g. "weights[:, 0:18]", "bias"
  Provenance provenance = Provenance::FreshXavier;
  std::size_t count = 0;
};

struct TransferReport {
  std::string network;
  std::vector<TransferEntry> entries;

  std::size_t count(Provenance p) const;
  std::size_t total() const;
};

struct TransferOptions {
  // Alternatives left open by the source description; defaults follow the
  // documented transfer rule.
  bool zero_and_freeze_tilt_columns = false;
  bool copy_motor_output_rows = false;
};

struct TransferredNetwork {
  Mlp net;
  TransferReport report;
};

// Throws Error(ShapeMismatch) unless quad_actor is 18 -> ... -> 4 with two hidden layers.
TransferredNetwork build_tilt_actor(const Mlp& quad_actor, Rng& rng,
                                    const TransferOptions& options = {});
// Throws Error(ShapeMismatch) unless quad_critic is 18 -> ... -> 1 with two hidden layers.
TransferredNetwork build_tilt_critic(const Mlp& quad_critic, Rng& rng);

void write_transfer_report_text(std::ostream& out, const TransferReport& report);
// Columns: network,layer,block,category,count
void write_transfer_report_csv(std::ostream& out, std::span<const TransferReport> reports);

struct StageLog {
  std::string stage;  // "quad" or "tilt"
  std::vector<TrainingLogRow> rows;
};

struct DevelopmentalResult {
  TrainResult quad;
  TrainResult tilt;
  TransferReport actor_report;
  TransferReport critic_report;
  std::vector<StageLog> logs;
};

struct DevelopmentalHooks {
  TrainHooks quad;
  TrainHooks tilt;
};

// Stage 1 trains the quadcopter from scratch for quad_cfg.total_steps; stage 2
// transfers into tilt-rotor networks and trains them for tilt_cfg.total_steps.
DevelopmentalResult developmental_train(const EnvSettings& settings, const TrainConfig& quad_cfg,
                                        const TrainConfig& tilt_cfg,
                                        const DevelopmentalHooks& hooks = {},
                                        const TransferOptions& options = {});

// Stage 2 alone, starting from already trained quadcopter networks.
TrainResult train_tilt_from_quad(const EnvSettings& settings, const TrainConfig& tilt_cfg,
                                 const Mlp& quad_actor, const Mlp& quad_critic,
                                 TransferReport* actor_report = nullptr,
                                 TransferReport* critic_report = nullptr,
                                 const TrainHooks& hooks = {}, const TransferOptions& options = {});

}  // namespace devrl
