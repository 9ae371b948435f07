#include "nmc/prune.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace nmc {

SparsityMask::SparsityMask(const InrParams& params)
    : masked_(params.size(), 0), prunable_flag_(params.size(), 0) {
  for (const TensorInfo& t : params.tensors()) {
    if (t.kind != TensorKind::Weight) continue;
    std::fill_n(prunable_flag_.begin() + static_cast<std::ptrdiff_t>(t.offset), t.size(), std::uint8_t{1});
    prunable_ += t.size();
  }
}

double SparsityMask::keep_fraction() const {
  return prunable_ == 0 ? 1.0 : static_cast<double>(unmasked_count()) / static_cast<double>(prunable_);
}

void SparsityMask::mask(std::size_t i) {
  if (!prunable_flag_.at(i)) throw std::invalid_argument("only weight entries can be masked");
  if (!masked_[i]) {
    masked_[i] = 1;
    ++masked_count_;
  }
}

void SparsityMask::apply(InrParams& params) const {
  auto& v = params.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (masked_[i]) v[i] = 0.0;
  }
}

std::vector<std::size_t> unmasked_by_magnitude(const InrParams& params, const SparsityMask& mask) {
  const auto& v = params.values();
  std::vector<std::size_t> idx;
  idx.reserve(mask.unmasked_count());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (mask.prunable_flag_[i] && !mask.masked_[i]) idx.push_back(i);
  }
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const double x = std::abs(v[a]), y = std::abs(v[b]);
    return x != y ? x < y : a < b;
  });
  return idx;
}

std::size_t prune_to_count(InrParams& params, SparsityMask& mask, std::size_t keep_count) {
  if (mask.unmasked_count() <= keep_count) return 0;
  const std::size_t drop = mask.unmasked_count() - keep_count;
  const std::vector<std::size_t> order = unmasked_by_magnitude(params, mask);
  for (std::size_t i = 0; i < drop; ++i) mask.mask(order[i]);
  mask.apply(params);
  return drop;
}

std::size_t l1_prune_step(InrParams& params, SparsityMask& mask, double keep) {
  if (!(keep > 0.0 && keep <= 1.0)) throw std::invalid_argument("keep fraction must be in (0, 1]");
  const auto keep_count = static_cast<std::size_t>(std::llround(static_cast<double>(mask.unmasked_count()) * keep));
  return prune_to_count(params, mask, keep_count);
}

double PruneSchedule::keep_per_step() const {
  return epochs.empty() ? 1.0 : std::pow(target, 1.0 / static_cast<double>(epochs.size()));
}

std::size_t PruneSchedule::keep_count_after(int step, std::size_t total) const {
  const double frac = std::pow(target, static_cast<double>(step) / static_cast<double>(steps()));
  return static_cast<std::size_t>(std::llround(static_cast<double>(total) * frac));
}

PruneSchedule prune_schedule(double target, int steps, std::vector<int> epochs) {
  if (!(target > 0.0 && target <= 1.0)) throw std::invalid_argument("target keep fraction must be in (0, 1]");
  if (steps != static_cast<int>(epochs.size())) throw std::invalid_argument("step count must equal the number of pruning epochs");
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    if (epochs[i] < 1 || (i > 0 && epochs[i] <= epochs[i - 1])) {
      throw std::invalid_argument("pruning epochs must be positive and strictly increasing");
    }
  }
  PruneSchedule s;
  s.target = target;
  if (target < 1.0) s.epochs = std::move(epochs);
  return s;
}

std::vector<int> scaled_prune_epochs(int total_epochs, int steps) {
  std::vector<int> out;
  for (int i = 1; i <= steps; ++i) {
    const double e = static_cast<double>(total_epochs) * i / (steps * 3.5);
    out.push_back(std::max(static_cast<int>(std::lround(e)), out.empty() ? 1 : out.back() + 1));
  }
  return out;
}

}  // namespace nmc
