#include "rskel/skel.hpp"

#include "rskel/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>
#include <string>

namespace rskel {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<int> box_dofs(const Box& box, int dpn) {
  std::vector<int> out;
  out.reserve(box.nodes.size() * dpn);
  for (int n : box.nodes) {
    for (int c = 0; c < dpn; ++c) out.push_back(n * dpn + c);
  }
  return out;
}

std::vector<int> to_local(const std::vector<int>& dofs, const std::vector<int>& global) {
  std::vector<int> out(global.size());
  for (std::size_t i = 0; i < global.size(); ++i) {
    out[i] = static_cast<int>(std::lower_bound(dofs.begin(), dofs.end(), global[i]) - dofs.begin());
  }
  return out;
}

std::vector<int> to_global(const std::vector<int>& dofs, const std::vector<int>& local) {
  std::vector<int> out(local.size());
  for (std::size_t i = 0; i < local.size(); ++i) out[i] = dofs[local[i]];
  return out;
}

std::vector<int> pick(const std::vector<int>& v, const std::vector<int>& idx) {
  std::vector<int> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = v[idx[i]];
  return out;
}

double square_circle_gap(const Vec2& sq_center, double hw, const Vec2& c) {
  const Vec2 d = ((c - sq_center).cwiseAbs() - Vec2::Constant(hw)).cwiseMax(0.0);
  return d.norm();
}

// Overwrites the diagonal blocks of K_BB that belong to already-eliminated
// children with their Schur-updated skeleton blocks.
struct ChildBlock {
  const std::vector<int>* skel;  // global, sorted
  const Matrix* D;
};

void apply_ledger(Matrix& k, const std::vector<int>& b, const std::vector<ChildBlock>& kids) {
  for (const auto& kid : kids) {
    const auto pos = to_local(b, *kid.skel);
    for (std::size_t j = 0; j < pos.size(); ++j) {
      for (std::size_t i = 0; i < pos.size(); ++i) k(pos[i], pos[j]) = (*kid.D)(i, j);
    }
  }
}

struct LevelView {
  const Tree* tree;
  int level;
  int dpn;
  const std::map<BoxKey, const std::vector<int>*>* actives;  // boxes at `level`
  const std::vector<char>* excluded;                         // optional
};

// Every DOF active at the start of the level that sits strictly inside the
// proxy circle, other than those of `self`.
std::vector<int> gather_near(const LevelView& v, const Boundary& b, const BoxKey& self,
                             const Vec2& c, double radius) {
  std::vector<int> out;
  const auto& pts = b.points();
  auto take = [&](const std::vector<int>& dofs) {
    for (int g : dofs) {
      if (v.excluded && (*v.excluded)[g]) continue;
      if ((pts[g / v.dpn] - c).norm() < radius) out.push_back(g);
    }
  };
  std::vector<BoxKey> stack{{0, 0, 0}};
  while (!stack.empty()) {
    const BoxKey k = stack.back();
    stack.pop_back();
    const Box* box = v.tree->find(k);
    if (!box || square_circle_gap(box->center, box->half_width, c) >= radius) continue;
    if (k.level == v.level) {
      if (!(k == self)) take(*v.actives->at(k));
    } else if (box->leaf) {
      take(box_dofs(*box, v.dpn));
    } else {
      for (const BoxKey& ch : v.tree->children(k)) stack.push_back(ch);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct CompressInput {
  const SystemSpec* spec;
  const Boundary* b;
  const FactorOptions* opt;
  const Box* box;
  std::vector<int> dofs;    // box DOF list
  std::vector<int> active;  // global, sorted
  std::vector<ChildBlock> kids;
  std::vector<int> near;    // global, sorted
};

std::shared_ptr<BoxFactors> compress(const CompressInput& in) {
  auto f = std::make_shared<BoxFactors>();
  f->active = to_local(in.dofs, in.active);
  const auto& B = in.active;
  const int nb = static_cast<int>(B.size());
  if (nb == 0) return f;

  Matrix kbb = eval_block(*in.spec, *in.b, B, B);
  apply_ledger(kbb, B, in.kids);

  const Box& box = *in.box;
  const double radius = in.opt->proxy_radius_factor * std::numbers::sqrt2 * box.half_width;
  const ProxyNodes proxy = proxy_nodes(box.center, radius, in.opt->proxy_count);
  double omega = 0.0;
  for (int n : box.nodes) omega += in.b->weights()[n];
  omega /= static_cast<double>(box.nodes.size());

  const Matrix out_proxy = proxy_outgoing(*in.spec, *in.b, proxy, B, 1.0);
  const Matrix in_proxy = proxy_incoming(*in.spec, *in.b, proxy, B, omega);
  const Eigen::Index nf = static_cast<Eigen::Index>(in.near.size());
  Matrix stacked(2 * nf + out_proxy.rows() + in_proxy.rows(), nb);
  if (nf > 0) {
    stacked.topRows(nf) = eval_block(*in.spec, *in.b, in.near, B);
    stacked.middleRows(nf, nf) = eval_block(*in.spec, *in.b, B, in.near).transpose();
  }
  stacked.middleRows(2 * nf, out_proxy.rows()) = out_proxy;
  stacked.bottomRows(in_proxy.rows()) = in_proxy;

  IDResult id = interpolative_decomposition(stacked, in.opt->tol);
  for (;;) {
    const auto& S = id.skeleton;
    const auto& R = id.redundant;
    const Matrix& T = id.T;
    const Matrix kss = kbb(S, S), ksr = kbb(S, R), krs = kbb(R, S), krr = kbb(R, R);
    const Matrix x_sr = ksr - kss * T;
    const Matrix x_rs = krs - T.transpose() * kss;
    Matrix x_rr = krr - T.transpose() * ksr - krs * T + T.transpose() * kss * T;
    int bad = -1;
    PivotedLu lu;
    try {
      lu = PivotedLu(x_rr);
      if (lu.pivot_ratio() < in.opt->migrate_threshold) bad = lu.weakest_pivot();
    } catch (const SingularPivotError& e) {
      bad = e.index();
    }
    if (bad >= 0) {
      // Near-singular redundant block: promote the offending index to the
      // skeleton and re-interpolate.
      std::vector<int> s2 = S;
      s2.push_back(R[bad]);
      id = id_with_skeleton(stacked, s2);
      ++f->migrated;
      continue;
    }
    f->skeleton = pick(f->active, S);
    f->redundant = pick(f->active, R);
    f->L = lu.solve_transpose(x_sr.transpose()).transpose();
    f->U = lu.solve(x_rs);
    f->D = kss - f->L * x_rs;
    f->T = T;
    f->X_RR = std::move(x_rr);
    f->X_RR_lu = std::move(lu);
    return f;
  }
}

}  // namespace

int Factorization::num_dofs() const { return spec_.num_dofs(*boundary_); }

int Factorization::size() const { return num_dofs() + aug_.size(); }

Factorization Factorization::factor(const SystemSpec& spec, const Boundary& b, const Tree& t,
                                    const FactorOptions& opt) {
  Factorization out;
  out.spec_ = spec;
  out.boundary_ = std::make_shared<const Boundary>(b);
  out.tree_ = t;
  out.opt_ = opt;
  out.build(nullptr);
  return out;
}

void Factorization::build(const ReuseFn& reuse) {
  const auto t0 = Clock::now();
  const Boundary& b = *boundary_;
  const int dpn = spec_.dof_per_node;
  const auto levels = tree_.levels();
  entries_.clear();
  index_.clear();
  level_begin_.clear();
  stats_ = FactorStats{};

  std::vector<char> excluded;
  if (opt_.propagate_within_level) excluded.assign(spec_.num_dofs(b), 0);

  for (int level = tree_.depth(); level >= 1; --level) {
    const auto tl = Clock::now();
    const auto& keys = levels[level];
    const std::size_t nk = keys.size();
    std::vector<std::vector<int>> dofs(nk), active(nk);
    std::vector<std::vector<ChildBlock>> kids(nk);
    std::map<BoxKey, const std::vector<int>*> actives;
    for (std::size_t i = 0; i < nk; ++i) {
      const Box& box = *tree_.find(keys[i]);
      dofs[i] = box_dofs(box, dpn);
      if (box.leaf) {
        active[i] = dofs[i];
      } else {
        for (const BoxKey& c : tree_.children(keys[i])) {
          const Entry& e = entries_[index_.at(c)];
          active[i].insert(active[i].end(), e.skel.begin(), e.skel.end());
          kids[i].push_back({&e.skel, &e.f->D});
        }
        std::sort(active[i].begin(), active[i].end());
      }
      actives.emplace(keys[i], &active[i]);
    }

    std::vector<Entry> done(nk);
    std::vector<char> reused(nk, 0);
    const LevelView view{&tree_, level, dpn, &actives,
                         opt_.propagate_within_level ? &excluded : nullptr};
    auto work = [&](std::size_t i) {
      const Box& box = *tree_.find(keys[i]);
      std::shared_ptr<const BoxFactors> f;
      if (reuse) {
        f = reuse(keys[i], box);
        if (f && f->active != to_local(dofs[i], active[i])) f = nullptr;
      }
      if (f) {
        reused[i] = 1;
      } else {
        CompressInput in{&spec_, &b, &opt_, &box, dofs[i], active[i], kids[i], {}};
        const double radius = opt_.proxy_radius_factor * std::numbers::sqrt2 * box.half_width;
        in.near = gather_near(view, b, keys[i], box.center, radius);
        f = compress(in);
      }
      done[i].key = keys[i];
      done[i].skel = to_global(dofs[i], f->skeleton);
      done[i].red = to_global(dofs[i], f->redundant);
      done[i].f = std::move(f);
      if (opt_.propagate_within_level) {
        for (int g : done[i].red) excluded[g] = 1;
      }
    };
    if (opt_.propagate_within_level) {
      for (std::size_t i = 0; i < nk; ++i) work(i);
    } else {
      parallel_for(opt_.workers, nk, work);
    }

    LevelStats ls;
    ls.level = level;
    ls.boxes = static_cast<int>(nk);
    level_begin_.push_back(entries_.size());
    for (std::size_t i = 0; i < nk; ++i) {
      ls.max_active = std::max(ls.max_active, static_cast<int>(active[i].size()));
      ls.max_skeleton = std::max(ls.max_skeleton, static_cast<int>(done[i].skel.size()));
      stats_.migrated += done[i].f->migrated;
      (reused[i] ? stats_.boxes_reused : stats_.boxes_compressed) += 1;
      index_.emplace(keys[i], entries_.size());
      entries_.push_back(std::move(done[i]));
    }
    ls.seconds = seconds_since(tl);
    stats_.levels.push_back(ls);
  }
  level_begin_.push_back(entries_.size());

  const auto tt = Clock::now();
  build_top();
  stats_.top_seconds = seconds_since(tt);
  stats_.total_seconds = seconds_since(t0);
}

void Factorization::build_top() {
  const Boundary& b = *boundary_;
  const Box& root = *tree_.find({0, 0, 0});
  std::vector<ChildBlock> kids;
  top_dofs_.clear();
  if (root.leaf) {
    top_dofs_ = box_dofs(root, spec_.dof_per_node);
  } else {
    for (const BoxKey& c : tree_.children(root.key)) {
      const Entry& e = entries_[index_.at(c)];
      top_dofs_.insert(top_dofs_.end(), e.skel.begin(), e.skel.end());
      kids.push_back({&e.skel, &e.f->D});
    }
    std::sort(top_dofs_.begin(), top_dofs_.end());
  }
  Matrix xss = eval_block(spec_, b, top_dofs_, top_dofs_);
  apply_ledger(xss, top_dofs_, kids);
  const int ns = static_cast<int>(top_dofs_.size());
  stats_.top_size = ns;

  aug_ = spec_.augmented ? build_augmentation(b) : AugmentationData{};
  G_.resize(0, 0);
  Pt_.resize(0, 0);
  xinv_g_.clear();
  if (!spec_.augmented) {
    top_ = std::move(xss);
    top_lu_ = PivotedLu(top_);
    return;
  }

  // Schur corner over the root skeleton and the Stokeslet/rotlet strengths,
  // with every redundant block eliminated into it.
  const int m = aug_.size();
  G_ = aug_.H;
  sweep_forward(G_);
  Pt_ = aug_.Psi.transpose();
  sweep_transpose(Pt_);
  xinv_g_.resize(entries_.size());
  Matrix corner22 = -Matrix::Identity(m, m);
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const Entry& e = entries_[i];
    xinv_g_[i] = e.f->X_RR_lu.solve(G_(e.red, Eigen::all));
    corner22.noalias() -= Pt_(e.red, Eigen::all).transpose() * xinv_g_[i];
  }
  top_.resize(ns + m, ns + m);
  top_.topLeftCorner(ns, ns) = xss;
  top_.topRightCorner(ns, m) = G_(top_dofs_, Eigen::all);
  top_.bottomLeftCorner(m, ns) = Pt_(top_dofs_, Eigen::all).transpose();
  top_.bottomRightCorner(m, m) = corner22;
  top_lu_ = PivotedLu(top_);
}

template <class F>
void Factorization::for_each_level(bool bottom_up, F&& f) const {
  const std::size_t nl = level_begin_.empty() ? 0 : level_begin_.size() - 1;
  for (std::size_t s = 0; s < nl; ++s) {
    const std::size_t l = bottom_up ? s : nl - 1 - s;
    const std::size_t lo = level_begin_[l], hi = level_begin_[l + 1];
    parallel_for(opt_.workers, hi - lo, [&](std::size_t i) { f(entries_[lo + i]); });
  }
}

void Factorization::sweep_forward(Matrix& y) const {
  for_each_level(true, [&](const Entry& e) {
    if (e.red.empty() || e.skel.empty()) return;
    Matrix ys = y(e.skel, Eigen::all);
    Matrix yr = y(e.red, Eigen::all);
    yr.noalias() -= e.f->T.transpose() * ys;
    ys.noalias() -= e.f->L * yr;
    y(e.skel, Eigen::all) = ys;
    y(e.red, Eigen::all) = yr;
  });
}

void Factorization::sweep_backward(Matrix& y) const {
  for_each_level(false, [&](const Entry& e) {
    if (e.red.empty() || e.skel.empty()) return;
    Matrix ys = y(e.skel, Eigen::all);
    Matrix yr = y(e.red, Eigen::all);
    yr.noalias() -= e.f->U * ys;
    ys.noalias() -= e.f->T * yr;
    y(e.skel, Eigen::all) = ys;
    y(e.red, Eigen::all) = yr;
  });
}

void Factorization::sweep_transpose(Matrix& y) const {
  for_each_level(true, [&](const Entry& e) {
    if (e.red.empty() || e.skel.empty()) return;
    Matrix ys = y(e.skel, Eigen::all);
    Matrix yr = y(e.red, Eigen::all);
    yr.noalias() -= e.f->T.transpose() * ys;
    ys.noalias() -= e.f->U.transpose() * yr;
    y(e.skel, Eigen::all) = ys;
    y(e.red, Eigen::all) = yr;
  });
}

Vector Factorization::apply(const Vector& x) const {
  if (x.size() != size()) {
    throw std::invalid_argument("apply: expected vector of size " + std::to_string(size()) +
                                ", got " + std::to_string(x.size()));
  }
  const int n = num_dofs();
  const int ns = static_cast<int>(top_dofs_.size());
  Matrix y = x.head(n);
  // V^{-1}, bottom-up.
  for_each_level(true, [&](const Entry& e) {
    if (e.red.empty()) return;
    Matrix ys = y(e.skel, Eigen::all);
    Matrix yr = y(e.red, Eigen::all);
    if (!e.skel.empty()) {
      ys.noalias() += e.f->T * yr;
      yr.noalias() += e.f->U * ys;
    }
    y(e.skel, Eigen::all) = ys;
    y(e.red, Eigen::all) = e.f->X_RR * yr;
  });
  y(top_dofs_, Eigen::all) = top_.topLeftCorner(ns, ns) * y(top_dofs_, Eigen::all);
  // U^{-1}, top-down.
  for_each_level(false, [&](const Entry& e) {
    if (e.red.empty() || e.skel.empty()) return;
    Matrix ys = y(e.skel, Eigen::all);
    Matrix yr = y(e.red, Eigen::all);
    ys.noalias() += e.f->L * yr;
    yr.noalias() += e.f->T.transpose() * ys;
    y(e.skel, Eigen::all) = ys;
    y(e.red, Eigen::all) = yr;
  });
  if (!spec_.augmented) return y.col(0);
  Vector out(size());
  const Vector lambda = x.tail(aug_.size());
  out.head(n) = y.col(0) + aug_.H * lambda;
  out.tail(aug_.size()) = aug_.Psi * x.head(n) - lambda;
  return out;
}

Matrix Factorization::solve(const Matrix& rhs) const {
  const int n = num_dofs();
  const int m = aug_.size();
  if (rhs.rows() != size() && !(spec_.augmented && rhs.rows() == n)) {
    throw std::invalid_argument("solve: expected right-hand side of size " +
                                std::to_string(size()) + ", got " +
                                std::to_string(rhs.rows()));
  }
  Matrix y = rhs.topRows(n);
  sweep_forward(y);
  for_each_level(true, [&](const Entry& e) {
    if (e.red.empty()) return;
    y(e.red, Eigen::all) = e.f->X_RR_lu.solve(y(e.red, Eigen::all));
  });
  if (!spec_.augmented) {
    y(top_dofs_, Eigen::all) = top_lu_.solve(y(top_dofs_, Eigen::all));
    sweep_backward(y);
    return y;
  }
  const int ns = static_cast<int>(top_dofs_.size());
  Matrix c(ns + m, rhs.cols());
  c.topRows(ns) = y(top_dofs_, Eigen::all);
  if (rhs.rows() == size()) {
    c.bottomRows(m) = rhs.bottomRows(m);
  } else {
    c.bottomRows(m).setZero();
  }
  for (const Entry& e : entries_) {
    if (e.red.empty()) continue;
    c.bottomRows(m).noalias() -= Pt_(e.red, Eigen::all).transpose() * y(e.red, Eigen::all);
  }
  const Matrix sol = top_lu_.solve(c);
  const Matrix lambda = sol.bottomRows(m);
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const Entry& e = entries_[i];
    if (e.red.empty()) continue;
    y(e.red, Eigen::all) -= xinv_g_[i] * lambda;
  }
  y(top_dofs_, Eigen::all) = sol.topRows(ns);
  sweep_backward(y);
  Matrix out(size(), rhs.cols());
  out.topRows(n) = y;
  out.bottomRows(m) = lambda;
  return out;
}

Vector Factorization::solve(const Vector& rhs) const {
  return solve(Matrix(rhs)).col(0);
}

Solution Factorization::solve_density(const Vector& f) const {
  const Vector x = solve(f);
  Solution s;
  s.mu = x.head(num_dofs());
  s.lambda = x.tail(aug_.size());
  return s;
}

Vector Factorization::evaluate_interior(const Solution& s, std::span<const Vec2> targets) const {
  const Boundary& b = *boundary_;
  const int per = spec_.dof_per_node;
  Vector out(targets.size() * per);
  std::vector<int> all(num_dofs());
  for (int i = 0; i < num_dofs(); ++i) all[i] = i;
  constexpr std::size_t chunk = 256;
  for (std::size_t t0 = 0; t0 < targets.size(); t0 += chunk) {
    const auto part = targets.subspan(t0, std::min(chunk, targets.size() - t0));
    Vector v = eval_forward_block(spec_, b, part, all) * s.mu;
    if (spec_.augmented && s.lambda.size() > 0) v += completion_columns(b, part) * s.lambda;
    out.segment(t0 * per, v.size()) = v;
  }
  return out;
}

std::map<BoxKey, std::pair<std::vector<int>, std::vector<int>>>
Factorization::skeleton_sets() const {
  std::map<BoxKey, std::pair<std::vector<int>, std::vector<int>>> out;
  for (const Entry& e : entries_) out.emplace(e.key, std::make_pair(e.skel, e.red));
  return out;
}

Factorization Factorization::updated(const Boundary& b_new, const PerturbationResult& change,
                                     int workers) const {
  Factorization out;
  out.opt_ = opt_;
  out.opt_.workers = workers;
  if (change.empty()) {
    out = *this;
    out.opt_.workers = workers;
    out.stats_.boxes_reused = static_cast<int>(entries_.size());
    out.stats_.boxes_compressed = 0;
    out.stats_.boxes_marked = 0;
    out.stats_.total_seconds = 0.0;
    return out;
  }
  const auto t0 = Clock::now();
  out.spec_ = SystemSpec::make(spec_.pde, b_new);
  out.boundary_ = std::make_shared<const Boundary>(b_new);
  out.tree_ = refit_tree(tree_, b_new, change);
  const auto positions = modified_positions(*boundary_, change);
  const MarkedSet marked = mark_dirty(out.tree_, positions);

  const auto& o2n = change.old_to_new;
  auto reuse = [&](const BoxKey& k, const Box& box) -> std::shared_ptr<const BoxFactors> {
    if (marked.contains(k)) return nullptr;
    auto it = index_.find(k);
    const Box* old = tree_.find(k);
    if (it == index_.end() || !old || old->nodes.size() != box.nodes.size()) return nullptr;
    for (std::size_t i = 0; i < box.nodes.size(); ++i) {
      if (o2n[old->nodes[i]] != box.nodes[i]) return nullptr;
    }
    return entries_[it->second].f;
  };
  out.build(reuse);
  out.stats_.boxes_marked = static_cast<int>(marked.total());
  out.stats_.total_seconds = seconds_since(t0);
  return out;
}

Vector apply_dense(const SystemSpec& spec, const Boundary& b, const Vector& x) {
  const int n = spec.num_dofs(b);
  std::vector<int> all(n);
  for (int i = 0; i < n; ++i) all[i] = i;
  AugmentationData aug = spec.augmented ? build_augmentation(b) : AugmentationData{};
  const int m = aug.size();
  if (x.size() != n + m) throw std::invalid_argument("apply_dense: size mismatch");
  Vector y(n + m);
  constexpr int chunk = 512;
  for (int r0 = 0; r0 < n; r0 += chunk) {
    const int nr = std::min(chunk, n - r0);
    std::vector<int> rows(all.begin() + r0, all.begin() + r0 + nr);
    y.segment(r0, nr) = eval_block(spec, b, rows, all) * x.head(n);
  }
  if (m > 0) {
    y.head(n) += aug.H * x.tail(m);
    y.tail(m) = aug.Psi * x.head(n) - x.tail(m);
  }
  return y;
}

Matrix assemble_dense(const SystemSpec& spec, const Boundary& b) {
  const int n = spec.num_dofs(b);
  AugmentationData aug = spec.augmented ? build_augmentation(b) : AugmentationData{};
  const int m = aug.size();
  Matrix a(n + m, n + m);
  a.topLeftCorner(n, n) = eval_full(spec, b);
  if (m > 0) {
    a.topRightCorner(n, m) = aug.H;
    a.bottomLeftCorner(m, n) = aug.Psi;
    a.bottomRightCorner(m, m) = -Matrix::Identity(m, m);
  }
  return a;
}

}  // namespace rskel
