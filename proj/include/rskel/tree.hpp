#pragma once

#include "rskel/geometry.hpp"

#include <map>
#include <set>
#include <span>
#include <vector>

namespace rskel {

/// Axis-aligned square.
struct Square {
  Vec2 center = Vec2::Zero();
  double half_width = 1.0;

  bool contains(const Vec2& x) const {
    return std::abs(x.x() - center.x()) <= half_width &&
           std::abs(x.y() - center.y()) <= half_width;
  }
};

/// Box address: level and integer cell coordinates within the root square.
/// Ordered by (level, iy, ix) so map iteration walks levels top-down and
/// boxes row by row within a level.
struct BoxKey {
  int level = 0;
  int ix = 0;
  int iy = 0;

  friend bool operator==(const BoxKey&, const BoxKey&) = default;
  friend bool operator<(const BoxKey& a, const BoxKey& b) {
    if (a.level != b.level) return a.level < b.level;
    if (a.iy != b.iy) return a.iy < b.iy;
    return a.ix < b.ix;
  }
  BoxKey parent() const { return {level - 1, ix >> 1, iy >> 1}; }
  /// Child q in SW, SE, NW, NE order.
  BoxKey child(int q) const { return {level + 1, 2 * ix + (q & 1), 2 * iy + (q >> 1)}; }
};

struct Box {
  BoxKey key;
  std::vector<int> nodes;  // every geometric node in the subtree, sorted
  bool leaf = true;
  Vec2 center = Vec2::Zero();
  double half_width = 0.0;
};

/// Adaptive quadtree over boundary nodes. Only nonempty boxes exist; a box is
/// split iff it holds more than leaf_cap nodes and is above max_depth.
class Tree {
 public:
  static constexpr int kDefaultLeafCap = 64;
  static constexpr int kDefaultMaxDepth = 20;

  Tree() = default;

  static Tree build(const Boundary& b, int leaf_cap, const Square& root,
                    int max_depth = kDefaultMaxDepth);
  static Tree build(const Boundary& b, int leaf_cap = kDefaultLeafCap);
  /// Bounding square of the nodes inflated by 10%.
  static Square default_root(const Boundary& b);

  const Square& root_box() const { return root_; }
  int leaf_cap() const { return leaf_cap_; }
  int max_depth() const { return max_depth_; }
  /// Deepest level present.
  int depth() const;

  const std::map<BoxKey, Box>& boxes() const { return boxes_; }
  const Box* find(const BoxKey& k) const;
  std::vector<BoxKey> children(const BoxKey& k) const;
  /// Box keys per level, each level in map order.
  std::vector<std::vector<BoxKey>> levels() const;
  std::vector<BoxKey> leaves() const;

  /// Cell containing x at `level`, whether or not that box exists.
  BoxKey key_at(const Vec2& x, int level) const;
  Vec2 box_center(const BoxKey& k) const;
  double box_half_width(int level) const;
  /// Existing same-level boxes sharing an edge or corner with k.
  std::vector<BoxKey> colleagues(const BoxKey& k) const;

  /// Same boxes with the same node sets.
  bool same_structure(const Tree& other) const;

  friend Tree refit_tree(const Tree& t, const Boundary& b_new,
                         const PerturbationResult& change);

 private:
  void split(const BoxKey& k, const std::vector<Vec2>& points);
  void erase_subtree(const BoxKey& k);
  void normalize(const BoxKey& k, const std::vector<Vec2>& points);
  Box make_box(const BoxKey& k) const;

  Square root_;
  int leaf_cap_ = kDefaultLeafCap;
  int max_depth_ = kDefaultMaxDepth;
  std::map<BoxKey, Box> boxes_;
};

/// Re-bins only the nodes touched by `change`; boxes whose node counts are
/// unaffected keep their structure. The result equals a fresh build over
/// b_new with the same root. Throws GeometryError if a node leaves the root.
Tree refit_tree(const Tree& t, const Boundary& b_new, const PerturbationResult& change);

/// Boxes needing recompression after the nodes at `positions` changed.
struct MarkedSet {
  std::vector<std::set<BoxKey>> by_level;

  bool contains(const BoxKey& k) const {
    return k.level < static_cast<int>(by_level.size()) && by_level[k.level].count(k) > 0;
  }
  std::size_t total() const;
  bool empty() const { return total() == 0; }
};

/// Marks, level by level from the bottom, every existing box that contains a
/// changed position or has a marked child, plus all colleagues of those.
/// Positions are looked up as virtual cells so changes inside a shallow leaf
/// still reach the deeper neighbours around them.
MarkedSet mark_dirty(const Tree& t, std::span<const Vec2> positions);

/// Old positions of removed nodes plus new positions of inserted nodes.
std::vector<Vec2> modified_positions(const Boundary& before,
                                     const PerturbationResult& change);

}  // namespace rskel
