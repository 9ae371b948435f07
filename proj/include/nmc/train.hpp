#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "nmc/inr.hpp"
#include "nmc/prune.hpp"
#include "nmc/subdivide.hpp"

namespace nmc {

struct TrainConfig {
  Architecture arch;
  int epochs = 3500;
  std::size_t batch_size = 2048;
  double lr0 = 1e-3;
  AdamWHyper optimizer;  // lr is overwritten by the schedule each step
  std::uint64_t seed = 0;
};

struct EpochStats {
  int epoch = 0;  // 1-based
  double lr = 0.0;  // rate used by the epoch's last step
  double loss = 0.0;  // mean of the epoch's batch losses, weighted by batch size
  double keep_fraction = 1.0;
};

struct TrainResult {
  InrParams params;
  SparsityMask mask;
  std::vector<EpochStats> history;
  double initial_loss = 0.0;  // full-set loss before the first step
  double final_loss = 0.0;  // full-set loss after the last step
};

/// Called after every epoch; return false to stop early.
using EpochCallback = std::function<bool(const EpochStats&)>;

/// Fits the network to the set's displacement targets. Deterministic for a
/// given seed. Throws NumericError naming the epoch if the loss diverges and
/// std::invalid_argument if a pruning epoch lies beyond the run.
TrainResult train(const TrainingSet& set, const TrainConfig& config, const PruneSchedule& schedule = {},
                  const EpochCallback& on_epoch = {});

/// Same, starting from given parameters (and mask) instead of a fresh init.
TrainResult train_from(const TrainingSet& set, const TrainConfig& config, InrParams params, SparsityMask mask,
                       const PruneSchedule& schedule = {}, const EpochCallback& on_epoch = {});

VertexBatch encode_training_set(const TrainingSet& set, int frequencies, bool with_targets = true);

/// Mean squared displacement error over the whole set.
double dataset_loss(const InrParams& params, const VertexBatch& all);

/// epoch,lr,loss,keep_fraction
void write_loss_csv(std::ostream& out, const std::vector<EpochStats>& history);

}  // namespace nmc
