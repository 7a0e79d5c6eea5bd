#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <memory>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "relperc/error.hpp"
#include "relperc/group_element.hpp"

namespace relperc {

enum class Family { lattice, free, finite, wreath, oriented_tree };

struct Generator {
  GroupElement element;
  bool involution = false;
};

namespace detail {

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline long parse_int(std::string_view s, std::string_view what) {
  s = trim(s);
  long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ConfigError("expected integer for " + std::string(what) + ", got '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace detail

/// A vertex model for a Cayley graph (or, for the oriented tree, a transitive
/// graph that is not a Cayley graph). Group models build their edges as
/// g ~ g*s for s in the symmetric generating set, so left multiplication is a
/// graph automorphism.
class GroupModel {
 public:
  virtual ~GroupModel() = default;

  virtual Family family() const = 0;
  /// DSL string that recreates this model.
  virtual std::string name() const = 0;
  virtual GroupElement identity() const = 0;
  virtual bool is_group() const { return true; }
  /// True when the graph has no cycles, so x <-> y iff the unique path is open.
  virtual bool is_tree() const { return false; }

  virtual GroupElement multiply(const GroupElement& a, const GroupElement& b) const = 0;
  virtual GroupElement invert(const GroupElement& a) const = 0;
  /// Validates a raw symbol sequence and brings it to normal form.
  virtual GroupElement canonicalize(std::vector<std::int32_t> raw) const = 0;

  virtual GroupElement parse(std::string_view text) const = 0;
  virtual std::string format(const GroupElement& g) const = 0;

  /// Graph distance from the identity, when it is cheap to compute exactly.
  virtual std::optional<int> word_length(const GroupElement&) const { return std::nullopt; }

  /// Neighbours of g in the Cayley graph, in generator order.
  virtual void neighbors(const GroupElement& g, std::vector<GroupElement>& out) const {
    out.clear();
    for (const auto& s : generators_) out.push_back(multiply(g, s.element));
  }

  /// Vertex sequence of the unique path from a to b (tree models only).
  virtual std::vector<GroupElement> geodesic(const GroupElement&, const GroupElement&) const {
    throw ConfigError(name() + ": geodesic paths are only available on tree models");
  }

  const std::vector<Generator>& generators() const { return generators_; }
  std::size_t degree() const { return generators_.size(); }

  GroupElement power(const GroupElement& g, int k) const {
    GroupElement base = k < 0 ? invert(g) : g;
    GroupElement r = identity();
    for (int i = 0; i < std::abs(k); ++i) r = multiply(r, base);
    return r;
  }

 protected:
  /// Closes `raw` under inverses and rejects sets that would give loops or
  /// multi-edges (identity, repeated generators).
  void set_generators(const std::vector<GroupElement>& raw) {
    std::vector<GroupElement> gens;
    const GroupElement e = identity();
    for (const auto& g : raw) {
      if (g == e) throw ConfigError(name() + ": identity in generating set gives loops");
      if (std::find(gens.begin(), gens.end(), g) != gens.end()) {
        throw ConfigError(name() + ": repeated generator gives multi-edges");
      }
      gens.push_back(g);
    }
    const std::size_t n = gens.size();
    for (std::size_t i = 0; i < n; ++i) {
      GroupElement inv = invert(gens[i]);
      if (std::find(gens.begin(), gens.end(), inv) == gens.end()) gens.push_back(std::move(inv));
    }
    generators_.clear();
    for (auto& g : gens) {
      const bool inv = invert(g) == g;
      generators_.push_back({std::move(g), inv});
    }
  }

  std::vector<Generator> generators_;
};

using ModelPtr = std::shared_ptr<const GroupModel>;

// ---------------------------------------------------------------------------

/// Z^d with the standard generators; elements are integer vectors.
class LatticeGroup final : public GroupModel {
 public:
  explicit LatticeGroup(int dim) : dim_(dim) {
    if (dim < 1) throw ConfigError("lattice dimension must be >= 1");
    std::vector<GroupElement> raw;
    for (int i = 0; i < dim; ++i) {
      std::vector<std::int32_t> v(dim, 0);
      v[i] = 1;
      raw.emplace_back(v);
      v[i] = -1;
      raw.emplace_back(v);
    }
    set_generators(raw);
  }

  int dimension() const { return dim_; }
  Family family() const override { return Family::lattice; }
  std::string name() const override { return "lattice:" + std::to_string(dim_); }
  GroupElement identity() const override { return GroupElement(std::vector<std::int32_t>(dim_, 0)); }

  GroupElement multiply(const GroupElement& a, const GroupElement& b) const override {
    check(a);
    check(b);
    GroupElement r = a;
    for (int i = 0; i < dim_; ++i) r.normal_form[i] += b.normal_form[i];
    return r;
  }
  GroupElement invert(const GroupElement& a) const override {
    check(a);
    GroupElement r = a;
    for (auto& x : r.normal_form) x = -x;
    return r;
  }
  GroupElement canonicalize(std::vector<std::int32_t> raw) const override {
    GroupElement g(std::move(raw));
    check(g);
    return g;
  }
  std::optional<int> word_length(const GroupElement& g) const override {
    int s = 0;
    for (auto x : g.normal_form) s += std::abs(x);
    return s;
  }
  void neighbors(const GroupElement& g, std::vector<GroupElement>& out) const override {
    out.clear();
    for (int i = 0; i < dim_; ++i) {
      out.push_back(g);
      out.back().normal_form[i] += 1;
      out.push_back(g);
      out.back().normal_form[i] -= 1;
    }
  }

  GroupElement parse(std::string_view text) const override {
    text = detail::trim(text);
    if (!text.empty() && text.front() == '(' && text.back() == ')') text = text.substr(1, text.size() - 2);
    if (text == "e") return identity();
    std::vector<std::int32_t> v;
    for (auto part : detail::split(text, ',')) v.push_back(static_cast<std::int32_t>(detail::parse_int(part, "lattice coordinate")));
    return canonicalize(std::move(v));
  }
  std::string format(const GroupElement& g) const override {
    std::string s = "(";
    for (std::size_t i = 0; i < g.normal_form.size(); ++i) {
      if (i) s += ',';
      s += std::to_string(g.normal_form[i]);
    }
    return s + ")";
  }

 private:
  void check(const GroupElement& g) const {
    if (static_cast<int>(g.normal_form.size()) != dim_) {
      throw ConfigError("malformed lattice element: expected " + std::to_string(dim_) + " coordinates");
    }
  }
  int dim_;
};

// ---------------------------------------------------------------------------

/// Free group on k letters; elements are freely reduced words over +-1..+-k.
class FreeGroup final : public GroupModel {
 public:
  explicit FreeGroup(int rank) : rank_(rank) {
    if (rank < 1 || rank > 26) throw ConfigError("free group rank must be in [1, 26]");
    std::vector<GroupElement> raw;
    for (int i = 1; i <= rank; ++i) {
      raw.emplace_back(std::vector<std::int32_t>{i});
      raw.emplace_back(std::vector<std::int32_t>{-i});
    }
    set_generators(raw);
  }

  int rank() const { return rank_; }
  Family family() const override { return Family::free; }
  std::string name() const override { return "free:" + std::to_string(rank_); }
  GroupElement identity() const override { return {}; }
  bool is_tree() const override { return true; }

  GroupElement multiply(const GroupElement& a, const GroupElement& b) const override {
    check(a);
    check(b);
    std::vector<std::int32_t> w = a.normal_form;
    for (std::int32_t s : b.normal_form) push(w, s);
    return GroupElement(std::move(w));
  }
  GroupElement invert(const GroupElement& a) const override {
    check(a);
    std::vector<std::int32_t> w(a.normal_form.rbegin(), a.normal_form.rend());
    for (auto& s : w) s = -s;
    return GroupElement(std::move(w));
  }
  GroupElement canonicalize(std::vector<std::int32_t> raw) const override {
    std::vector<std::int32_t> w;
    for (std::int32_t s : raw) {
      if (s == 0 || std::abs(s) > rank_) throw ConfigError("malformed free-group symbol " + std::to_string(s));
      push(w, s);
    }
    return GroupElement(std::move(w));
  }
  std::optional<int> word_length(const GroupElement& g) const override {
    return static_cast<int>(g.normal_form.size());
  }
  void neighbors(const GroupElement& g, std::vector<GroupElement>& out) const override {
    out.clear();
    for (int i = 1; i <= rank_; ++i) {
      for (int s : {i, -i}) {
        out.push_back(g);
        push(out.back().normal_form, s);
      }
    }
  }
  std::vector<GroupElement> geodesic(const GroupElement& a, const GroupElement& b) const override {
    // Strip the common prefix, walk up from a, then down to b.
    std::size_t c = 0;
    while (c < a.normal_form.size() && c < b.normal_form.size() && a.normal_form[c] == b.normal_form[c]) ++c;
    std::vector<GroupElement> path;
    for (std::size_t len = a.normal_form.size(); len > c; --len) {
      path.emplace_back(std::vector<std::int32_t>(a.normal_form.begin(), a.normal_form.begin() + len));
    }
    for (std::size_t len = c; len <= b.normal_form.size(); ++len) {
      path.emplace_back(std::vector<std::int32_t>(b.normal_form.begin(), b.normal_form.begin() + len));
    }
    return path;
  }

  GroupElement parse(std::string_view text) const override {
    text = detail::trim(text);
    if (text == "e" || text.empty()) return identity();
    std::vector<std::int32_t> raw;
    for (char ch : text) {
      if (ch >= 'a' && ch <= 'z') {
        raw.push_back(ch - 'a' + 1);
      } else if (ch >= 'A' && ch <= 'Z') {
        raw.push_back(-(ch - 'A' + 1));
      } else {
        throw ConfigError(std::string("malformed free-group word: unexpected '") + ch + "'");
      }
    }
    return canonicalize(std::move(raw));
  }
  std::string format(const GroupElement& g) const override {
    if (g.normal_form.empty()) return "e";
    std::string s;
    for (auto x : g.normal_form) s += x > 0 ? static_cast<char>('a' + x - 1) : static_cast<char>('A' - x - 1);
    return s;
  }

 private:
  static void push(std::vector<std::int32_t>& w, std::int32_t s) {
    if (!w.empty() && w.back() == -s) {
      w.pop_back();
    } else {
      w.push_back(s);
    }
  }
  void check(const GroupElement& g) const {
    for (std::size_t i = 0; i < g.normal_form.size(); ++i) {
      const auto s = g.normal_form[i];
      if (s == 0 || std::abs(s) > rank_ || (i > 0 && g.normal_form[i - 1] == -s)) {
        throw ConfigError("malformed free-group element (not a reduced word)");
      }
    }
  }
  int rank_;
};

// ---------------------------------------------------------------------------

/// Finite group given by its multiplication table; elements are table indices.
class FiniteGroup final : public GroupModel {
 public:
  FiniteGroup(std::string label, std::vector<std::string> names,
              std::vector<std::vector<int>> table, const std::vector<int>& generator_indices)
      : label_(std::move(label)), names_(std::move(names)), table_(std::move(table)) {
    const int n = static_cast<int>(table_.size());
    if (n == 0 || static_cast<int>(names_.size()) != n) throw ConfigError("finite group: bad table");
    identity_ = -1;
    for (int i = 0; i < n && identity_ < 0; ++i) {
      bool ok = true;
      for (int j = 0; j < n; ++j) ok = ok && table_[i][j] == j && table_[j][i] == j;
      if (ok) identity_ = i;
    }
    if (identity_ < 0) throw ConfigError("finite group: table has no identity");
    inverse_.assign(n, -1);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (table_[i][j] == identity_) inverse_[i] = j;
      }
      if (inverse_[i] < 0) throw ConfigError("finite group: element without inverse");
    }
    std::vector<GroupElement> raw;
    for (int g : generator_indices) raw.push_back(element(g));
    set_generators(raw);
    // Word lengths by BFS from the identity.
    dist_.assign(n, -1);
    std::queue<int> q;
    dist_[identity_] = 0;
    q.push(identity_);
    while (!q.empty()) {
      const int x = q.front();
      q.pop();
      for (const auto& s : generators_) {
        const int y = table_[x][s.element.normal_form[0]];
        if (dist_[y] < 0) {
          dist_[y] = dist_[x] + 1;
          q.push(y);
        }
      }
    }
    for (int d : dist_) {
      if (d < 0) throw ConfigError("finite group: generators do not generate " + label_);
    }
  }

  int order() const { return static_cast<int>(table_.size()); }
  GroupElement element(int index) const { return GroupElement({index}); }
  int index(const GroupElement& g) const {
    check(g);
    return g.normal_form[0];
  }
  const std::string& element_name(int index) const { return names_.at(index); }

  Family family() const override { return Family::finite; }
  std::string name() const override { return "finite:" + label_; }
  GroupElement identity() const override { return element(identity_); }

  GroupElement multiply(const GroupElement& a, const GroupElement& b) const override {
    return element(table_[index(a)][index(b)]);
  }
  GroupElement invert(const GroupElement& a) const override { return element(inverse_[index(a)]); }
  GroupElement canonicalize(std::vector<std::int32_t> raw) const override {
    GroupElement g(std::move(raw));
    check(g);
    return g;
  }
  std::optional<int> word_length(const GroupElement& g) const override { return dist_[index(g)]; }

  GroupElement parse(std::string_view text) const override {
    text = detail::trim(text);
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (names_[i] == text) return element(static_cast<int>(i));
    }
    throw ConfigError("unknown element '" + std::string(text) + "' of " + label_);
  }
  std::string format(const GroupElement& g) const override { return names_[index(g)]; }

 private:
  void check(const GroupElement& g) const {
    if (g.normal_form.size() != 1 || g.normal_form[0] < 0 || g.normal_form[0] >= order()) {
      throw ConfigError("malformed element of finite group " + label_);
    }
  }
  std::string label_;
  std::vector<std::string> names_;
  std::vector<std::vector<int>> table_;
  std::vector<int> inverse_;
  std::vector<int> dist_;
  int identity_ = 0;
};

namespace detail {

using Perm = std::vector<int>;

inline Perm compose(const Perm& a, const Perm& b) {  // (a*b)(i) = a(b(i))
  Perm r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[b[i]];
  return r;
}

inline std::shared_ptr<FiniteGroup> group_from_perms(const std::string& label,
                                                     const std::vector<std::pair<std::string, Perm>>& elems,
                                                     const std::vector<std::string>& generators) {
  const int n = static_cast<int>(elems.size());
  std::vector<std::string> names;
  for (const auto& e : elems) names.push_back(e.first);
  auto find = [&](const Perm& p) {
    for (int i = 0; i < n; ++i) {
      if (elems[i].second == p) return i;
    }
    throw ConfigError(label + ": permutation list not closed");
  };
  std::vector<std::vector<int>> table(n, std::vector<int>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) table[i][j] = find(compose(elems[i].second, elems[j].second));
  }
  std::vector<int> gens;
  for (const auto& g : generators) {
    gens.push_back(static_cast<int>(std::find(names.begin(), names.end(), g) - names.begin()));
  }
  return std::make_shared<FiniteGroup>(label, names, table, gens);
}

}  // namespace detail

/// S3 generated by its three transpositions (Cayley graph K_{3,3}).
inline std::shared_ptr<FiniteGroup> make_s3() {
  return detail::group_from_perms(
      "S3",
      {{"e", {0, 1, 2}}, {"(12)", {1, 0, 2}}, {"(23)", {0, 2, 1}}, {"(13)", {2, 1, 0}},
       {"(123)", {1, 2, 0}}, {"(132)", {2, 0, 1}}},
      {"(12)", "(23)", "(13)"});
}

/// D4 (symmetries of the square) generated by r, r^-1 and s.
inline std::shared_ptr<FiniteGroup> make_d4() {
  const detail::Perm e{0, 1, 2, 3}, r{1, 2, 3, 0}, s{0, 3, 2, 1};
  const auto r2 = detail::compose(r, r), r3 = detail::compose(r2, r);
  return detail::group_from_perms(
      "D4",
      {{"e", e}, {"r", r}, {"r2", r2}, {"r3", r3}, {"s", s}, {"rs", detail::compose(r, s)},
       {"r2s", detail::compose(r2, s)}, {"r3s", detail::compose(r3, s)}},
      {"r", "s"});
}

// ---------------------------------------------------------------------------

/// Lamplighter Z2 wr Base. An element (f, x) is encoded as
/// [|x|, x..., (|l|, l...) for each lit lamp l in sorted order].
/// Product: (f, x)(g, y) = (f xor x.g, x y) where (x.g)(z) = g(x^-1 z).
/// Generators: (0, s) for base generators s, and the toggle (delta_e, e).
class WreathZ2 final : public GroupModel {
 public:
  struct Parts {
    GroupElement position;
    std::vector<GroupElement> lamps;  // sorted, distinct
  };

  explicit WreathZ2(ModelPtr base) : base_(std::move(base)) {
    if (!base_ || !base_->is_group()) throw ConfigError("wreath product needs a group base");
    std::vector<GroupElement> raw;
    for (const auto& s : base_->generators()) raw.push_back(encode({s.element, {}}));
    raw.push_back(encode({base_->identity(), {base_->identity()}}));
    set_generators(raw);
  }

  const GroupModel& base() const { return *base_; }
  ModelPtr base_ptr() const { return base_; }
  Family family() const override { return Family::wreath; }
  std::string name() const override { return "wreath:z2:" + base_->name(); }
  GroupElement identity() const override { return encode({base_->identity(), {}}); }

  static GroupElement encode(const Parts& p) {
    std::vector<std::int32_t> v;
    v.push_back(static_cast<std::int32_t>(p.position.normal_form.size()));
    v.insert(v.end(), p.position.normal_form.begin(), p.position.normal_form.end());
    for (const auto& l : p.lamps) {
      v.push_back(static_cast<std::int32_t>(l.normal_form.size()));
      v.insert(v.end(), l.normal_form.begin(), l.normal_form.end());
    }
    return GroupElement(std::move(v));
  }

  Parts decode(const GroupElement& g) const {
    const auto& v = g.normal_form;
    Parts p;
    std::size_t i = 0;
    auto take = [&]() {
      if (i >= v.size() || v[i] < 0 || i + 1 + static_cast<std::size_t>(v[i]) > v.size()) {
        throw ConfigError("malformed wreath element encoding");
      }
      GroupElement e(std::vector<std::int32_t>(v.begin() + i + 1, v.begin() + i + 1 + v[i]));
      i += 1 + v[i];
      return e;
    };
    p.position = take();
    while (i < v.size()) p.lamps.push_back(take());
    return p;
  }

  GroupElement multiply(const GroupElement& a, const GroupElement& b) const override {
    Parts pa = decode(a);
    Parts pb = decode(b);
    std::vector<GroupElement> lamps = std::move(pa.lamps);
    for (const auto& l : pb.lamps) lamps.push_back(base_->multiply(pa.position, l));
    return encode({base_->multiply(pa.position, pb.position), normalize_lamps(std::move(lamps))});
  }
  GroupElement invert(const GroupElement& a) const override {
    Parts p = decode(a);
    const GroupElement xi = base_->invert(p.position);
    std::vector<GroupElement> lamps;
    for (const auto& l : p.lamps) lamps.push_back(base_->multiply(xi, l));
    return encode({xi, normalize_lamps(std::move(lamps))});
  }
  GroupElement canonicalize(std::vector<std::int32_t> raw) const override {
    Parts p = decode(GroupElement(std::move(raw)));
    p.position = base_->canonicalize(p.position.normal_form);
    for (auto& l : p.lamps) l = base_->canonicalize(l.normal_form);
    p.lamps = normalize_lamps(std::move(p.lamps));
    return encode(p);
  }

  /// Syntax: "<position>" or "<position>|<lamp>;<lamp>;...".
  GroupElement parse(std::string_view text) const override {
    text = detail::trim(text);
    const auto bar = text.find('|');
    Parts p;
    p.position = base_->parse(text.substr(0, bar));
    if (bar != std::string_view::npos) {
      const auto rest = text.substr(bar + 1);
      if (!detail::trim(rest).empty()) {
        for (auto part : detail::split(rest, ';')) p.lamps.push_back(base_->parse(part));
      }
    }
    p.lamps = normalize_lamps(std::move(p.lamps));
    return encode(p);
  }
  std::string format(const GroupElement& g) const override {
    const Parts p = decode(g);
    std::string s = base_->format(p.position);
    if (!p.lamps.empty()) {
      s += '|';
      for (std::size_t i = 0; i < p.lamps.size(); ++i) {
        if (i) s += ';';
        s += base_->format(p.lamps[i]);
      }
    }
    return s;
  }

  bool in_lamp_group(const GroupElement& g) const {
    const auto& v = g.normal_form;
    if (v.empty()) return false;
    return GroupElement(std::vector<std::int32_t>(v.begin() + 1, v.begin() + 1 + v[0])) == base_->identity();
  }

 private:
  /// Sort and cancel lamps lit an even number of times.
  static std::vector<GroupElement> normalize_lamps(std::vector<GroupElement> lamps) {
    std::sort(lamps.begin(), lamps.end());
    std::vector<GroupElement> out;
    for (std::size_t i = 0; i < lamps.size();) {
      std::size_t j = i;
      while (j < lamps.size() && lamps[j] == lamps[i]) ++j;
      if ((j - i) % 2 == 1) out.push_back(std::move(lamps[i]));
      i = j;
    }
    return out;
  }

  ModelPtr base_;
};

// ---------------------------------------------------------------------------

/// The d-regular tree with a fixed end. A vertex is [u, c1..cm]: climb u
/// steps toward the end from the origin, then descend through child indices
/// c_i in [0, d-2]. The origin is child 0 of its parent, so the form is
/// canonical when u == 0, m == 0, or c1 != 0. Level (height toward the end)
/// is u - m and the graph distance to the origin is u + m.
class OrientedTree final : public GroupModel {
 public:
  explicit OrientedTree(int degree) : d_(degree) {
    if (degree < 3) throw ConfigError("oriented tree degree must be >= 3");
  }

  int tree_degree() const { return d_; }
  Family family() const override { return Family::oriented_tree; }
  std::string name() const override { return "tree-oriented:" + std::to_string(d_); }
  GroupElement identity() const override { return GroupElement({0}); }
  bool is_group() const override { return false; }
  bool is_tree() const override { return true; }

  GroupElement multiply(const GroupElement&, const GroupElement&) const override {
    throw ConfigError("tree-oriented has no group law");
  }
  GroupElement invert(const GroupElement&) const override {
    throw ConfigError("tree-oriented has no group law");
  }
  GroupElement canonicalize(std::vector<std::int32_t> raw) const override {
    if (raw.empty() || raw[0] < 0) throw ConfigError("malformed oriented-tree vertex");
    for (std::size_t i = 1; i < raw.size(); ++i) {
      if (raw[i] < 0 || raw[i] > d_ - 2) throw ConfigError("oriented-tree child index out of range");
    }
    while (raw[0] > 0 && raw.size() > 1 && raw[1] == 0) {
      raw[0] -= 1;
      raw.erase(raw.begin() + 1);
    }
    return GroupElement(std::move(raw));
  }

  int level(const GroupElement& v) const {
    return v.normal_form[0] - static_cast<int>(v.normal_form.size()) + 1;
  }
  std::optional<int> word_length(const GroupElement& v) const override {
    return v.normal_form[0] + static_cast<int>(v.normal_form.size()) - 1;
  }

  GroupElement parent(const GroupElement& v) const {
    auto w = v.normal_form;
    if (w.size() > 1) {
      w.pop_back();
    } else {
      w[0] += 1;
    }
    return GroupElement(std::move(w));
  }

  void neighbors(const GroupElement& v, std::vector<GroupElement>& out) const override {
    out.clear();
    out.push_back(parent(v));
    for (int c = 0; c < d_ - 1; ++c) out.push_back(child(v, c));
  }

  GroupElement child(const GroupElement& v, int c) const {
    const auto& w = v.normal_form;
    if (w.size() == 1 && w[0] > 0 && c == 0) return GroupElement({w[0] - 1});
    auto r = w;
    r.push_back(c);
    return GroupElement(std::move(r));
  }

  /// Relative position of y seen from x: climb `up` steps, then descend `down`.
  std::pair<int, int> relative_position(const GroupElement& x, const GroupElement& y) const {
    const int top = std::max(x.normal_form[0], y.normal_form[0]);
    const auto sx = descent(x, top);
    const auto sy = descent(y, top);
    std::size_t c = 0;
    while (c < sx.size() && c < sy.size() && sx[c] == sy[c]) ++c;
    return {static_cast<int>(sx.size() - c), static_cast<int>(sy.size() - c)};
  }

  std::vector<GroupElement> geodesic(const GroupElement& a, const GroupElement& b) const override {
    const int top = std::max(a.normal_form[0], b.normal_form[0]);
    const auto sa = descent(a, top);
    const auto sb = descent(b, top);
    std::size_t c = 0;
    while (c < sa.size() && c < sb.size() && sa[c] == sb[c]) ++c;
    std::vector<GroupElement> path;
    for (std::size_t len = sa.size(); len > c; --len) path.push_back(from_descent(top, sa, len));
    for (std::size_t len = c; len <= sb.size(); ++len) path.push_back(from_descent(top, sb, len));
    return path;
  }

  GroupElement parse(std::string_view text) const override {
    text = detail::trim(text);
    if (text == "o" || text == "e") return identity();
    std::vector<std::int32_t> raw;
    for (auto part : detail::split(text, ',')) raw.push_back(static_cast<std::int32_t>(detail::parse_int(part, "tree vertex")));
    return canonicalize(std::move(raw));
  }
  std::string format(const GroupElement& v) const override {
    std::string s;
    for (std::size_t i = 0; i < v.normal_form.size(); ++i) {
      if (i) s += ',';
      s += std::to_string(v.normal_form[i]);
    }
    return s;
  }

 private:
  /// Child-index sequence from the ancestor of the origin at height `top`.
  static std::vector<std::int32_t> descent(const GroupElement& v, int top) {
    std::vector<std::int32_t> s(static_cast<std::size_t>(top - v.normal_form[0]), 0);
    s.insert(s.end(), v.normal_form.begin() + 1, v.normal_form.end());
    return s;
  }
  GroupElement from_descent(int top, const std::vector<std::int32_t>& s, std::size_t len) const {
    std::vector<std::int32_t> raw{top};
    raw.insert(raw.end(), s.begin(), s.begin() + static_cast<std::ptrdiff_t>(len));
    return canonicalize(std::move(raw));
  }
  int d_;
};

// ---------------------------------------------------------------------------

/// Parses the group DSL: lattice:d, free:k, wreath:z2:<base>, tree-oriented:d,
/// finite:S3, finite:D4.
inline ModelPtr make_group(std::string_view dsl) {
  dsl = detail::trim(dsl);
  auto arg = [&](std::string_view prefix) {
    return static_cast<int>(detail::parse_int(dsl.substr(prefix.size()), prefix));
  };
  if (dsl.starts_with("lattice:")) return std::make_shared<LatticeGroup>(arg("lattice:"));
  if (dsl.starts_with("free:")) return std::make_shared<FreeGroup>(arg("free:"));
  if (dsl.starts_with("tree-oriented:")) return std::make_shared<OrientedTree>(arg("tree-oriented:"));
  if (dsl.starts_with("wreath:z2:")) {
    auto base = make_group(dsl.substr(10));
    if (!base->is_group()) throw ConfigError("wreath base must be a group");
    return std::make_shared<WreathZ2>(base);
  }
  if (dsl == "finite:S3") return make_s3();
  if (dsl == "finite:D4") return make_d4();
  throw ConfigError("unknown group '" + std::string(dsl) + "'");
}

inline std::vector<std::string> builtin_group_descriptions() {
  return {
      "lattice:d          Z^d, generators +-e_i",
      "free:k             free group F_k on k letters (Cayley graph is a 2k-regular tree)",
      "wreath:z2:<base>   lamplighter Z2 wr base (e.g. wreath:z2:free:2), moves plus lamp toggle",
      "tree-oriented:d    d-regular tree with a fixed end and level function (not a group)",
      "finite:S3          symmetric group S3 with the three transpositions",
      "finite:D4          dihedral group of order 8 with r, r^-1, s",
  };
}

}  // namespace relperc
