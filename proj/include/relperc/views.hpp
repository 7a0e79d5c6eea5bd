#pragma once

#include <cstdint>
#include <variant>

#include "relperc/ball.hpp"
#include "relperc/groups.hpp"
#include "relperc/subgroup.hpp"

namespace relperc {

using AnyView = std::variant<BallGraph, ImplicitBall>;

struct ViewOptions {
  std::size_t max_vertices = 4'000'000;
  /// Explore tree models lazily instead of materializing the ball.
  bool lazy_trees = true;
};

/// Ball view for Monte Carlo work. Trees with exact word lengths are explored
/// lazily (their balls are exponentially large but clusters stay small);
/// everything else is materialized.
inline AnyView make_view(const ModelPtr& model, int radius, const ViewOptions& opt = {}) {
  if (opt.lazy_trees && model->is_tree() && model->word_length(model->identity())) {
    return ImplicitBall(model, radius);
  }
  return build_ball(model, radius, opt.max_vertices);
}

/// View for relative tails on the oriented tree with a level set L_k: the
/// part below level min(0, k) hangs off single edges and cannot lead back to
/// L_k, so the ball is restricted to levels >= min(0, k). Other inputs fall
/// back to make_view.
inline AnyView make_tail_view(const ModelPtr& model, int radius, const SubgroupSpec& h, const ViewOptions& opt = {}) {
  if (const auto* tree = dynamic_cast<const OrientedTree*>(model.get()); tree && h.level) {
    const int floor = std::min(0, *h.level);
    return build_ball(model, radius, opt.max_vertices,
                      [tree, floor](const GroupElement& v) { return tree->level(v) >= floor; });
  }
  return make_view(model, radius, opt);
}

}  // namespace relperc
