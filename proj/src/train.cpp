#include "nmc/train.hpp"

#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

#include "nmc/error.hpp"
#include "nmc/rng.hpp"

namespace nmc {

VertexBatch encode_training_set(const TrainingSet& set, int frequencies, bool with_targets) {
  const VertexNeighborhoods hood{set.positions, set.neighbor_offsets, set.neighbors, set.edge_lengths};
  return encode_vertices(hood, frequencies, with_targets ? std::span<const Vec3>(set.targets) : std::span<const Vec3>{});
}

double dataset_loss(const InrParams& params, const VertexBatch& all) {
  constexpr std::uint32_t kChunk = 8192;
  const auto n = static_cast<std::uint32_t>(all.size());
  if (n == 0) return 0.0;
  double sum = 0.0;
  std::vector<std::uint32_t> rows;
  for (std::uint32_t lo = 0; lo < n; lo += kChunk) {
    const std::uint32_t hi = std::min(n, lo + kChunk);
    rows.resize(hi - lo);
    std::iota(rows.begin(), rows.end(), lo);
    const VertexBatch b = gather(all, rows);
    sum += (forward(params, b) - b.targets).squaredNorm();
  }
  return sum / n;
}

namespace {

double target_rms(const TrainingSet& set) {
  double power = 0.0;
  for (const Vec3& t : set.targets) power += t.squaredNorm();
  return power > 0.0 ? std::sqrt(power / (3.0 * static_cast<double>(set.size()))) : 1.0;
}

}  // namespace

TrainResult train(const TrainingSet& set, const TrainConfig& config, const PruneSchedule& schedule,
                  const EpochCallback& on_epoch) {
  InrParams params = InrParams::initialize(config.arch, config.seed);
  if (set.size() > 0) {
    // The initialization is meant for RMS-normalized targets (see train_from).
    const double sigma = target_rms(set);
    params.weight(config.arch.hidden_layers) *= sigma;
    params.bias(config.arch.hidden_layers) *= sigma;
  }
  SparsityMask mask(params);
  return train_from(set, config, std::move(params), std::move(mask), schedule, on_epoch);
}

TrainResult train_from(const TrainingSet& set, const TrainConfig& config, InrParams params, SparsityMask mask,
                       const PruneSchedule& schedule, const EpochCallback& on_epoch) {
  if (set.size() == 0) throw std::invalid_argument("training set is empty");
  if (config.epochs < 0) throw std::invalid_argument("epoch count must be non-negative");
  if (config.batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (!(params.architecture() == config.arch)) throw std::invalid_argument("parameters do not match the architecture");
  if (schedule.active() && schedule.epochs.back() > config.epochs) {
    throw std::invalid_argument("pruning epoch " + std::to_string(schedule.epochs.back()) + " exceeds the " +
                                std::to_string(config.epochs) + " training epochs");
  }

  // Targets are fitted in units of their RMS; the factor is folded back into
  // the output layer at the end, so the returned network predicts raw displacements.
  const double sigma = target_rms(set);
  const int head = config.arch.hidden_layers;
  params.weight(head) /= sigma;
  params.bias(head) /= sigma;
  VertexBatch all = encode_training_set(set, config.arch.frequencies);
  all.targets /= sigma;
  const double loss_unit = sigma * sigma;
  const std::size_t n = set.size();
  const std::size_t batches = (n + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps = batches * static_cast<std::size_t>(config.epochs);

  TrainResult result;
  result.initial_loss = dataset_loss(params, all) * loss_unit;
  AdamWState state(params.size());
  AdamWHyper hyper = config.optimizer;
  // Shuffles use their own stream so the initialization seed can be reused.
  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::size_t step = 0;
  std::size_t next_prune = 0;
  const std::size_t prunable = mask.prunable();

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(std::span<std::uint32_t>(order));
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t lo = b * config.batch_size, hi = std::min(n, lo + config.batch_size);
      const VertexBatch batch = gather(all, std::span<const std::uint32_t>(order).subspan(lo, hi - lo));
      Gradients grads;
      try {
        grads = backward(params, batch);
      } catch (const NumericError& e) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
      }
      if (!std::isfinite(grads.loss)) throw NumericError("training loss became non-finite at epoch " + std::to_string(epoch));
      loss_sum += grads.loss * static_cast<double>(hi - lo);
      hyper.lr = cosine_lr(step, total_steps, config.lr0);
      adamw_step(params.values(), grads.values, state, hyper, mask.flags());
      ++step;
    }

    if (schedule.active() && next_prune < schedule.epochs.size() &&
        schedule.epochs[next_prune] == epoch) {
      ++next_prune;
      prune_to_count(params, mask, schedule.keep_count_after(static_cast<int>(next_prune), prunable));
    }

    const EpochStats stats{epoch, hyper.lr, loss_sum / static_cast<double>(n) * loss_unit, mask.keep_fraction()};
    result.history.push_back(stats);
    if (on_epoch && !on_epoch(stats)) break;
  }

  params.weight(head) *= sigma;
  params.bias(head) *= sigma;
  all.targets *= sigma;
  result.final_loss = dataset_loss(params, all);
  if (!std::isfinite(result.final_loss)) throw NumericError("final training loss is non-finite");
  result.params = std::move(params);
  result.mask = std::move(mask);
  return result;
}

void write_loss_csv(std::ostream& out, const std::vector<EpochStats>& history) {
  out << "epoch,lr,loss,keep_fraction\n";
  const auto old = out.precision(10);
  for (const EpochStats& s : history) out << s.epoch << ',' << s.lr << ',' << s.loss << ',' << s.keep_fraction << '\n';
  out.precision(old);
}

}  // namespace nmc
