#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "relperc/error.hpp"
#include "relperc/groups.hpp"
#include "relperc/hash.hpp"

namespace relperc {

/// A distinguished vertex set A: a subgroup H, a left coset gH, or (on the
/// oriented tree) a level set. `generators` drive the subgroup's own word
/// metric and random walk; walks start at `base_point`.
struct SubgroupSpec {
  std::string label;
  std::function<bool(const GroupElement&)> membership;
  std::vector<GroupElement> generators;
  GroupElement base_point;
  bool is_subgroup = true;
  /// Set for level sets of the oriented tree.
  std::optional<int> level;

  bool contains(const GroupElement& g) const { return membership(g); }
};

namespace detail {

/// Membership closure check on random generator products.
inline void spot_check_closure(const GroupModel& model, const SubgroupSpec& h, int samples = 200) {
  if (!model.is_group() || h.generators.empty()) return;
  if (!h.contains(h.base_point)) throw ConfigError(h.label + ": base point is not a member");
  for (int t = 0; t < samples; ++t) {
    GroupElement g = h.base_point;
    const int len = 1 + static_cast<int>(bounded(keyed_draw(0x5eed, t, 0), 6));
    for (int i = 0; i < len; ++i) {
      const auto k = bounded(keyed_draw(0x5eed, t, i + 1), h.generators.size());
      g = model.multiply(g, h.generators[k]);
      if (!h.contains(g)) throw ConfigError(h.label + ": set is not closed under its generators");
    }
  }
}

}  // namespace detail

inline SubgroupSpec whole_group(const GroupModel& model) {
  SubgroupSpec h;
  h.label = "all";
  h.membership = [](const GroupElement&) { return true; };
  if (model.is_group()) {
    for (const auto& s : model.generators()) h.generators.push_back(s.element);
  }
  h.base_point = model.identity();
  return h;
}

/// Parses the subgroup DSL for `model`:
///   all | lamp | axis:i | gen:<el>;<el>... | level:k | coset:<element>:<subgroup>
/// `lamp_radius` truncates the lamp group's generating flips to the base ball.
inline SubgroupSpec make_subgroup(const ModelPtr& model_ptr, std::string_view dsl, int lamp_radius = 1) {
  const GroupModel& model = *model_ptr;
  dsl = detail::trim(dsl);
  SubgroupSpec h;
  h.label = std::string(dsl);
  h.base_point = model.identity();

  if (dsl == "all") {
    h = whole_group(model);
  } else if (dsl == "lamp") {
    const auto* w = dynamic_cast<const WreathZ2*>(&model);
    if (!w) throw ConfigError("subgroup 'lamp' requires a wreath group, not " + model.name());
    h.membership = [w, keep = model_ptr](const GroupElement& g) { return w->in_lamp_group(g); };
    if (lamp_radius < 0) throw ConfigError("lamp_radius must be >= 0");
    // Flips (delta_g, e) for g in the base ball of radius lamp_radius.
    std::set<GroupElement> layer{w->base().identity()}, seen = layer;
    std::vector<GroupElement> nb;
    for (int r = 0; r < lamp_radius; ++r) {
      std::set<GroupElement> next;
      for (const auto& g : layer) {
        w->base().neighbors(g, nb);
        for (auto& x : nb) {
          if (seen.insert(x).second) next.insert(x);
        }
      }
      layer = std::move(next);
    }
    for (const auto& g : seen) h.generators.push_back(WreathZ2::encode({w->base().identity(), {g}}));
  } else if (dsl.starts_with("axis:")) {
    const int i = static_cast<int>(detail::parse_int(dsl.substr(5), "axis index"));
    if (const auto* lat = dynamic_cast<const LatticeGroup*>(&model)) {
      if (i < 0 || i >= lat->dimension()) throw ConfigError("axis index out of range");
      h.membership = [i](const GroupElement& g) {
        for (std::size_t k = 0; k < g.normal_form.size(); ++k) {
          if (static_cast<int>(k) != i && g.normal_form[k] != 0) return false;
        }
        return true;
      };
      std::vector<std::int32_t> v(lat->dimension(), 0);
      v[i] = 1;
      h.generators.emplace_back(v);
      v[i] = -1;
      h.generators.emplace_back(v);
    } else if (const auto* fr = dynamic_cast<const FreeGroup*>(&model)) {
      if (i < 0 || i >= fr->rank()) throw ConfigError("axis index out of range");
      const int letter = i + 1;
      h.membership = [letter](const GroupElement& g) {
        for (auto s : g.normal_form) {
          if (s != letter && s != -letter) return false;
        }
        return true;
      };
      h.generators.emplace_back(std::vector<std::int32_t>{letter});
      h.generators.emplace_back(std::vector<std::int32_t>{-letter});
    } else {
      throw ConfigError("subgroup 'axis' is incompatible with group " + model.name());
    }
  } else if (dsl.starts_with("gen:")) {
    const auto* fin = dynamic_cast<const FiniteGroup*>(&model);
    if (!fin) throw ConfigError("subgroup 'gen:' requires a finite group, not " + model.name());
    std::vector<GroupElement> gens;
    for (auto part : detail::split(dsl.substr(4), ';')) gens.push_back(model.parse(part));
    std::set<GroupElement> closure{model.identity()};
    bool grew = true;
    while (grew) {
      grew = false;
      for (const auto& x : std::vector<GroupElement>(closure.begin(), closure.end())) {
        for (const auto& g : gens) {
          grew |= closure.insert(model.multiply(x, g)).second;
          grew |= closure.insert(model.multiply(x, model.invert(g))).second;
        }
      }
    }
    h.membership = [closure](const GroupElement& g) { return closure.count(g) > 0; };
    for (const auto& g : gens) {
      h.generators.push_back(g);
      const auto gi = model.invert(g);
      if (gi != g) h.generators.push_back(gi);
    }
  } else if (dsl.starts_with("level:")) {
    const auto* tree = dynamic_cast<const OrientedTree*>(&model);
    if (!tree) throw ConfigError("subgroup 'level' requires tree-oriented, not " + model.name());
    const int k = static_cast<int>(detail::parse_int(dsl.substr(6), "level"));
    h.membership = [tree, k, keep = model_ptr](const GroupElement& v) { return tree->level(v) == k; };
    h.is_subgroup = false;
    h.level = k;
    // Base point: the ancestor of the origin at level k, or its leftmost descendant.
    if (k > 0) h.base_point = GroupElement({k});
    if (k < 0) h.base_point = GroupElement(std::vector<std::int32_t>(static_cast<std::size_t>(1 - k), 0));
  } else if (dsl.starts_with("coset:")) {
    if (!model.is_group()) throw ConfigError("cosets need a group model");
    const auto rest = dsl.substr(6);
    const auto colon = rest.find(':');
    if (colon == std::string_view::npos) throw ConfigError("coset syntax is coset:<element>:<subgroup>");
    const GroupElement gamma = model.parse(rest.substr(0, colon));
    SubgroupSpec inner = make_subgroup(model_ptr, rest.substr(colon + 1), lamp_radius);
    if (!inner.is_subgroup) throw ConfigError("coset of a non-subgroup");
    const GroupElement gamma_inv = model.invert(gamma);
    auto member = inner.membership;
    h.membership = [model_ptr, gamma_inv, member](const GroupElement& g) {
      return member(model_ptr->multiply(gamma_inv, g));
    };
    h.generators = inner.generators;
    h.base_point = gamma;
    h.is_subgroup = member(gamma);
  } else {
    throw ConfigError("unknown subgroup '" + std::string(dsl) + "'");
  }
  h.label = std::string(dsl);
  detail::spot_check_closure(model, h);
  return h;
}

/// DSL compatibility: returns an empty string when `subgroup` can be used
/// with `group`, otherwise the reason.
inline std::string subgroup_compatibility(std::string_view group, std::string_view subgroup) {
  try {
    auto model = make_group(group);
    (void)make_subgroup(model, subgroup);
    return {};
  } catch (const ConfigError& e) {
    return e.what();
  }
}

}  // namespace relperc
