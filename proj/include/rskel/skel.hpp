#pragma once

#include "rskel/dense.hpp"
#include "rskel/geometry.hpp"
#include "rskel/kernels.hpp"
#include "rskel/tree.hpp"

#include <functional>
#include <map>
#include <memory>
#include <span>
#include <vector>

namespace rskel {

struct FactorOptions {
  double tol = 1e-10;
  int workers = 1;
  int proxy_count = 64;              // geometric proxy nodes per box
  double proxy_radius_factor = 1.5;  // times the box circumradius
  double migrate_threshold = 1e-12;  // X_RR pivot ratio that forces R -> S
  /// Compress each level one box at a time, dropping the redundant DOFs of
  /// boxes already done from later interaction lists. Slower; used to check
  /// that level-parallel compression loses nothing.
  bool propagate_within_level = false;
};

/// Immutable result of compressing one box. Index lists are positions in
/// the box's own DOF list (all DOFs of its subtree nodes, ascending), so a
/// payload survives relabeling of the global node numbering.
struct BoxFactors {
  std::vector<int> active;
  std::vector<int> skeleton;
  std::vector<int> redundant;
  Matrix T;     // |S| x |R| interpolation
  Matrix X_RR;  // eliminated block
  PivotedLu X_RR_lu;
  Matrix L;     // X_SR X_RR^{-1}
  Matrix U;     // X_RR^{-1} X_RS
  Matrix D;     // skeleton block after elimination, seen by the parent
  int migrated = 0;
};

struct LevelStats {
  int level = 0;
  int boxes = 0;
  int max_active = 0;
  int max_skeleton = 0;  // k_l
  double seconds = 0.0;
};

struct FactorStats {
  std::vector<LevelStats> levels;  // deepest first
  int top_size = 0;
  int boxes_compressed = 0;
  int boxes_reused = 0;
  int boxes_marked = 0;
  int migrated = 0;
  double top_seconds = 0.0;
  double total_seconds = 0.0;
};

struct Solution {
  Vector mu;
  Vector lambda;  // Stokeslet/rotlet strengths, empty without holes
};

/// Recursive skeletonization factorization of the (possibly augmented)
/// boundary integral system. Copies are cheap and share the per-box payloads;
/// a Factorization is safe to use from many threads at once.
class Factorization {
 public:
  static Factorization factor(const SystemSpec& spec, const Boundary& b, const Tree& t,
                              const FactorOptions& opt);

  /// Factorization of the perturbed problem, recompressing only boxes that
  /// the change can reach. Equal to factor() on b_new with the refit tree.
  Factorization updated(const Boundary& b_new, const PerturbationResult& change,
                        int workers) const;
  void update(const Boundary& b_new, const PerturbationResult& change, int workers) {
    *this = updated(b_new, change, workers);
  }

  /// Size of the square system: N DOFs plus 3 per hole when augmented.
  int size() const;
  int num_dofs() const;

  /// Approximate product with the system matrix [K H; Psi -I].
  Vector apply(const Vector& x) const;
  /// Inverse of apply. For augmented systems rhs may be f alone (second block
  /// taken as zero) or [f; g]; the result always has size().
  Vector solve(const Vector& rhs) const;
  Matrix solve(const Matrix& rhs) const;
  Solution solve_density(const Vector& f) const;

  /// Field at interior targets: one value per target for Laplace, velocity
  /// pairs for Stokes.
  Vector evaluate_interior(const Solution& s, std::span<const Vec2> targets) const;

  const SystemSpec& spec() const { return spec_; }
  const Boundary& boundary() const { return *boundary_; }
  const Tree& tree() const { return tree_; }
  const FactorOptions& options() const { return opt_; }
  const FactorStats& stats() const { return stats_; }
  const std::vector<int>& top_dofs() const { return top_dofs_; }

  /// Global skeleton and redundant DOFs per compressed box.
  std::map<BoxKey, std::pair<std::vector<int>, std::vector<int>>> skeleton_sets() const;

  void set_workers(int workers) { opt_.workers = workers; }

 private:
  struct Entry {
    BoxKey key;
    std::shared_ptr<const BoxFactors> f;
    std::vector<int> skel;  // global DOFs
    std::vector<int> red;
  };
  using ReuseFn =
      std::function<std::shared_ptr<const BoxFactors>(const BoxKey&, const Box&)>;

  void build(const ReuseFn& reuse);
  void build_top();

  void sweep_forward(Matrix& y) const;    // y <- U y
  void sweep_backward(Matrix& y) const;   // y <- V y
  void sweep_transpose(Matrix& y) const;  // y <- V^T y
  template <class F>
  void for_each_level(bool bottom_up, F&& f) const;

  SystemSpec spec_;
  std::shared_ptr<const Boundary> boundary_;
  Tree tree_;
  FactorOptions opt_;
  FactorStats stats_;

  std::vector<Entry> entries_;              // creation order, deepest level first
  std::vector<std::size_t> level_begin_;    // entry ranges per level
  std::map<BoxKey, std::size_t> index_;

  std::vector<int> top_dofs_;
  Matrix top_;  // X_SS, or the augmented corner
  PivotedLu top_lu_;

  // Augmentation (empty when spec_.augmented is false).
  AugmentationData aug_;
  Matrix G_;                  // U H, N x 3p
  Matrix Pt_;                 // (Psi V)^T, N x 3p
  std::vector<Matrix> xinv_g_;  // X_RR^{-1} (U H)_R per entry
};

/// Exact product with the dense system [K H; Psi -I], assembled in row
/// chunks. For residual checks.
Vector apply_dense(const SystemSpec& spec, const Boundary& b, const Vector& x);

/// Dense assembled system [K H; Psi -I] (small problems only).
Matrix assemble_dense(const SystemSpec& spec, const Boundary& b);

}  // namespace rskel
