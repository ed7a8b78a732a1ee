#include "rskel/tree.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rskel {

namespace {

void check_inside(const Square& root, const Vec2& x) {
  if (!root.contains(x)) {
    std::ostringstream msg;
    msg << "node (" << x.x() << ", " << x.y() << ") lies outside the fixed root box;"
        << " refactor from scratch with a larger root";
    throw GeometryError(msg.str());
  }
}

}  // namespace

Square Tree::default_root(const Boundary& b) {
  Vec2 lo = b.points().front(), hi = lo;
  for (const Vec2& p : b.points()) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  Square s;
  s.center = 0.5 * (lo + hi);
  s.half_width = 0.5 * (hi - lo).maxCoeff() * 1.1;
  if (s.half_width == 0.0) s.half_width = 1.0;
  return s;
}

Tree Tree::build(const Boundary& b, int leaf_cap) {
  return build(b, leaf_cap, default_root(b));
}

Tree Tree::build(const Boundary& b, int leaf_cap, const Square& root, int max_depth) {
  if (leaf_cap < 1) throw std::invalid_argument("leaf_cap must be positive");
  Tree t;
  t.root_ = root;
  t.leaf_cap_ = leaf_cap;
  t.max_depth_ = max_depth;
  for (const Vec2& p : b.points()) check_inside(root, p);
  Box r = t.make_box({0, 0, 0});
  r.nodes.resize(b.num_nodes());
  for (int i = 0; i < b.num_nodes(); ++i) r.nodes[i] = i;
  t.boxes_.emplace(r.key, std::move(r));
  t.normalize({0, 0, 0}, b.points());
  return t;
}

Box Tree::make_box(const BoxKey& k) const {
  Box box;
  box.key = k;
  box.center = box_center(k);
  box.half_width = box_half_width(k.level);
  return box;
}

BoxKey Tree::key_at(const Vec2& x, int level) const {
  const double side = 2.0 * root_.half_width;
  const Vec2 u = (x - root_.center + Vec2::Constant(root_.half_width)) / side;
  const double cells = std::ldexp(1.0, level);
  const int top = (1 << level) - 1;
  auto cell = [&](double v) {
    return std::clamp(static_cast<int>(std::floor(v * cells)), 0, top);
  };
  return {level, cell(u.x()), cell(u.y())};
}

double Tree::box_half_width(int level) const {
  return std::ldexp(root_.half_width, -level);
}

Vec2 Tree::box_center(const BoxKey& k) const {
  const double h = box_half_width(k.level);
  const Vec2 corner = root_.center - Vec2::Constant(root_.half_width);
  return corner + Vec2((2 * k.ix + 1) * h, (2 * k.iy + 1) * h);
}

void Tree::split(const BoxKey& k, const std::vector<Vec2>& points) {
  Box& box = boxes_.at(k);
  box.leaf = false;
  std::vector<int> parts[4];
  for (int i : box.nodes) {
    const BoxKey c = key_at(points[i], k.level + 1);
    parts[(c.ix & 1) + 2 * (c.iy & 1)].push_back(i);
  }
  for (int q = 0; q < 4; ++q) {
    if (parts[q].empty()) continue;
    Box child = make_box(k.child(q));
    child.nodes = std::move(parts[q]);
    boxes_.emplace(child.key, std::move(child));
  }
}

void Tree::erase_subtree(const BoxKey& k) {
  for (int q = 0; q < 4; ++q) {
    const BoxKey c = k.child(q);
    if (boxes_.count(c)) {
      erase_subtree(c);
      boxes_.erase(c);
    }
  }
}

void Tree::normalize(const BoxKey& k, const std::vector<Vec2>& points) {
  Box& box = boxes_.at(k);
  const bool should_split =
      static_cast<int>(box.nodes.size()) > leaf_cap_ && k.level < max_depth_;
  if (box.leaf && should_split) {
    split(k, points);
  } else if (!box.leaf && !should_split) {
    erase_subtree(k);
    box.leaf = true;
    return;
  }
  if (boxes_.at(k).leaf) return;
  for (int q = 0; q < 4; ++q) {
    const BoxKey c = k.child(q);
    if (boxes_.count(c)) normalize(c, points);
  }
}

int Tree::depth() const {
  return boxes_.empty() ? 0 : boxes_.rbegin()->first.level;
}

const Box* Tree::find(const BoxKey& k) const {
  auto it = boxes_.find(k);
  return it == boxes_.end() ? nullptr : &it->second;
}

std::vector<BoxKey> Tree::children(const BoxKey& k) const {
  std::vector<BoxKey> out;
  for (int q = 0; q < 4; ++q) {
    if (boxes_.count(k.child(q))) out.push_back(k.child(q));
  }
  return out;
}

std::vector<std::vector<BoxKey>> Tree::levels() const {
  std::vector<std::vector<BoxKey>> out(depth() + 1);
  for (const auto& [k, box] : boxes_) out[k.level].push_back(k);
  return out;
}

std::vector<BoxKey> Tree::leaves() const {
  std::vector<BoxKey> out;
  for (const auto& [k, box] : boxes_) {
    if (box.leaf) out.push_back(k);
  }
  return out;
}

std::vector<BoxKey> Tree::colleagues(const BoxKey& k) const {
  std::vector<BoxKey> out;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      if (dx == 0 && dy == 0) continue;
      const BoxKey c{k.level, k.ix + dx, k.iy + dy};
      if (boxes_.count(c)) out.push_back(c);
    }
  }
  return out;
}

bool Tree::same_structure(const Tree& other) const {
  if (boxes_.size() != other.boxes_.size()) return false;
  auto a = boxes_.begin();
  auto b = other.boxes_.begin();
  for (; a != boxes_.end(); ++a, ++b) {
    if (!(a->first == b->first) || a->second.leaf != b->second.leaf ||
        a->second.nodes != b->second.nodes) {
      return false;
    }
  }
  return true;
}

Tree refit_tree(const Tree& t, const Boundary& b_new, const PerturbationResult& change) {
  Tree out = t;
  if (change.empty()) return out;
  for (int i : change.inserted_nodes) check_inside(t.root_, b_new.points()[i]);

  // Relabel surviving nodes; old_to_new is monotone so order is preserved.
  for (auto it = out.boxes_.begin(); it != out.boxes_.end();) {
    auto& nodes = it->second.nodes;
    std::vector<int> kept;
    kept.reserve(nodes.size());
    for (int i : nodes) {
      if (change.old_to_new[i] >= 0) kept.push_back(change.old_to_new[i]);
    }
    nodes = std::move(kept);
    if (nodes.empty() && it->first.level > 0) {
      it = out.boxes_.erase(it);
    } else {
      ++it;
    }
  }

  const auto& pts = b_new.points();
  for (int i : change.inserted_nodes) {
    BoxKey k{0, 0, 0};
    for (;;) {
      Box& box = out.boxes_.at(k);
      box.nodes.insert(std::upper_bound(box.nodes.begin(), box.nodes.end(), i), i);
      if (box.leaf) break;
      const BoxKey c = out.key_at(pts[i], k.level + 1);
      if (!out.boxes_.count(c)) {
        Box leaf = out.make_box(c);
        leaf.nodes = {i};
        out.boxes_.emplace(c, std::move(leaf));
        break;
      }
      k = c;
    }
  }
  out.normalize({0, 0, 0}, pts);
  return out;
}

std::size_t MarkedSet::total() const {
  std::size_t n = 0;
  for (const auto& s : by_level) n += s.size();
  return n;
}

MarkedSet mark_dirty(const Tree& t, std::span<const Vec2> positions) {
  MarkedSet m;
  m.by_level.resize(t.depth() + 1);
  if (positions.empty()) return m;
  for (int level = t.depth(); level >= 0; --level) {
    std::set<BoxKey> base;
    for (const Vec2& p : positions) base.insert(t.key_at(p, level));
    if (level < t.depth()) {
      for (const BoxKey& k : m.by_level[level + 1]) base.insert(k.parent());
    }
    auto& marked = m.by_level[level];
    for (const BoxKey& k : base) {
      if (t.find(k)) marked.insert(k);
      for (const BoxKey& c : t.colleagues(k)) marked.insert(c);
    }
  }
  return m;
}

std::vector<Vec2> modified_positions(const Boundary& before,
                                     const PerturbationResult& change) {
  std::vector<Vec2> out;
  out.reserve(change.removed_nodes.size() + change.inserted_nodes.size());
  for (int i : change.removed_nodes) out.push_back(before.points()[i]);
  for (int i : change.inserted_nodes) out.push_back(change.boundary.points()[i]);
  return out;
}

}  // namespace rskel
