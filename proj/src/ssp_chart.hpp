#pragma once

#include <functional>
#include <vector>

#include "nmc/simplify.hpp"

namespace nmc::detail {

struct PatchFace {
  std::uint32_t id = 0;
  Face v{};
};

struct PatchInput {
  std::vector<PatchFace> faces;  // every face incident to `kept` or `removed`
  std::uint32_t kept = 0;
  std::uint32_t removed = 0;
  bool kept_on_boundary = false;
  Vec3 new_position = Vec3::Zero();
  std::function<Vec3(std::uint32_t)> position;
  std::uint32_t first_new_face_id = 0;
  double min_normal_cosine = 0.2;
};

enum class ChartWeights { Cotangent, MeanValue };

ChartResult build_collapse_charts(const PatchInput& in);

}  // namespace nmc::detail
