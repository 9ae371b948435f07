#pragma once

#include <cstdint>
#include <vector>

#include "nmc/inr.hpp"

namespace nmc {

/// One flag per parameter; only weight tensors are ever masked.
class SparsityMask {
 public:
  SparsityMask() = default;
  explicit SparsityMask(const InrParams& params);

  bool masked(std::size_t i) const { return masked_[i] != 0; }
  const std::vector<std::uint8_t>& flags() const { return masked_; }
  std::size_t prunable() const { return prunable_; }
  std::size_t masked_count() const { return masked_count_; }
  std::size_t unmasked_count() const { return prunable_ - masked_count_; }
  /// S: unmasked weights over all weights.
  double keep_fraction() const;

  void mask(std::size_t i);
  /// Forces every masked entry of `params` to zero.
  void apply(InrParams& params) const;

 private:
  std::vector<std::uint8_t> masked_;
  std::vector<std::uint8_t> prunable_flag_;
  std::size_t prunable_ = 0;
  std::size_t masked_count_ = 0;

  friend std::vector<std::size_t> unmasked_by_magnitude(const InrParams&, const SparsityMask&);
};

/// Unmasked weight indices sorted by (|value|, index).
std::vector<std::size_t> unmasked_by_magnitude(const InrParams& params, const SparsityMask& mask);

/// Masks the smallest-magnitude unmasked weights, pooled across all weight
/// tensors, until `keep_count` remain. Returns how many were newly masked.
std::size_t prune_to_count(InrParams& params, SparsityMask& mask, std::size_t keep_count);

/// Masks the lowest (1 - keep) fraction of the currently unmasked weights.
std::size_t l1_prune_step(InrParams& params, SparsityMask& mask, double keep);

struct PruneSchedule {
  double target = 1.0;  // final keep fraction S
  std::vector<int> epochs;  // 1-based epoch after which step t happens

  int steps() const { return static_cast<int>(epochs.size()); }
  bool active() const { return target < 1.0 && !epochs.empty(); }
  /// S^(1/z)
  double keep_per_step() const;
  /// Weights left after step t (1-based): round(total * S^(t/z)).
  std::size_t keep_count_after(int step, std::size_t total) const;
};

/// Throws std::invalid_argument unless 0 < target <= 1, epochs increasing and positive.
PruneSchedule prune_schedule(double target, int steps, std::vector<int> epochs);

/// Pruning epochs for a run of `total_epochs`: step i of z lands after
/// round(total * i / (z * 3.5)), i.e. 200..1000 for 3500 epochs and z = 5.
std::vector<int> scaled_prune_epochs(int total_epochs, int steps = 5);

}  // namespace nmc
