#include "rskel/kernels.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace rskel {

namespace {

constexpr double kPi = std::numbers::pi;

// Off-diagonal kernels without quadrature weight.
// Laplace: (1/2pi) (x-y).n(x) / |x-y|^2, the n(x) double layer with the sign of
// the -D term folded in. Stokes: (1/pi) ((x-y).n(y)) (x-y)_a (x-y)_b / |x-y|^4.
inline double laplace_kernel(const Vec2& x, const Vec2& nx, const Vec2& y) {
  const Vec2 d = x - y;
  return d.dot(nx) / (2.0 * kPi * d.squaredNorm());
}

inline double stresslet(const Vec2& x, const Vec2& y, const Vec2& ny, int a, int b) {
  const Vec2 d = x - y;
  const double r2 = d.squaredNorm();
  return d.dot(ny) * d[a] * d[b] / (kPi * r2 * r2);
}

inline Vec2 tangent_of(const Vec2& n) { return Vec2(-n.y(), n.x()); }

}  // namespace

SystemSpec SystemSpec::make(Pde pde, const Boundary& b) {
  SystemSpec s;
  s.pde = pde;
  s.jump_coefficient = -0.5;
  s.dof_per_node = pde == Pde::stokes_dirichlet ? 2 : 1;
  s.augmented = pde == Pde::stokes_dirichlet && b.num_holes() > 0;
  return s;
}

double system_entry(const SystemSpec& spec, const Boundary& b, int row, int col) {
  const auto& x = b.points();
  const auto& n = b.normals();
  const auto& w = b.weights();
  if (spec.pde == Pde::laplace_neumann) {
    const int i = row, j = col;
    if (i == j) {
      // Smooth-curve limit of (x-y).n(x)/|x-y|^2 is kappa/2.
      const double diag = b.curvatures()[i] / (4.0 * kPi);
      return spec.jump_coefficient + w[i] * (diag + 1.0);
    }
    return w[j] * (laplace_kernel(x[i], n[i], x[j]) + 1.0);
  }
  const int i = row / 2, a = row % 2;
  const int j = col / 2, c = col % 2;
  if (i == j) {
    // Stresslet limit on a smooth curve: -(kappa / 2pi) t (x) t.
    const Vec2 t = tangent_of(n[i]);
    const double kappa = b.curvatures()[i];
    const double diag = -kappa / (2.0 * kPi) * t[a] * t[c];
    return (a == c ? spec.jump_coefficient : 0.0) + w[i] * (diag + n[i][a] * n[i][c]);
  }
  return w[j] * (stresslet(x[i], x[j], n[j], a, c) + n[i][a] * n[j][c]);
}

Matrix eval_block(const SystemSpec& spec, const Boundary& b,
                  std::span<const int> rows, std::span<const int> cols) {
  Matrix out(rows.size(), cols.size());
  const auto& x = b.points();
  const auto& n = b.normals();
  const auto& w = b.weights();
  const Eigen::Index nr = static_cast<Eigen::Index>(rows.size());
  if (spec.pde == Pde::laplace_neumann) {
    for (Eigen::Index jc = 0; jc < out.cols(); ++jc) {
      const int j = cols[jc];
      const Vec2 y = x[j];
      const double wj = w[j];
      double* col = out.col(jc).data();
      for (Eigen::Index ir = 0; ir < nr; ++ir) {
        const int i = rows[ir];
        col[ir] = i == j ? system_entry(spec, b, i, j)
                         : wj * (laplace_kernel(x[i], n[i], y) + 1.0);
      }
    }
    return out;
  }
  for (Eigen::Index jc = 0; jc < out.cols(); ++jc) {
    const int j = cols[jc] / 2, c = cols[jc] % 2;
    const Vec2 y = x[j];
    const Vec2 ny = n[j];
    const double wj = w[j];
    double* col = out.col(jc).data();
    for (Eigen::Index ir = 0; ir < nr; ++ir) {
      const int i = rows[ir] / 2, a = rows[ir] % 2;
      if (i == j) {
        col[ir] = system_entry(spec, b, rows[ir], cols[jc]);
        continue;
      }
      const Vec2 d = x[i] - y;
      const double r2 = d.squaredNorm();
      col[ir] = wj * (d.dot(ny) * d[a] * d[c] / (kPi * r2 * r2) + n[i][a] * ny[c]);
    }
  }
  return out;
}

Matrix eval_full(const SystemSpec& spec, const Boundary& b) {
  std::vector<int> all(spec.num_dofs(b));
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  return eval_block(spec, b, all, all);
}

Matrix eval_forward_block(const SystemSpec& spec, const Boundary& b,
                          std::span<const Vec2> targets, std::span<const int> cols) {
  for (const Vec2& t : targets) {
    if (!point_in_domain(b, t)) {
      throw GeometryError("evaluation target (" + std::to_string(t.x()) + ", " +
                          std::to_string(t.y()) + ") is not inside the domain");
    }
  }
  const auto& x = b.points();
  const auto& n = b.normals();
  const auto& w = b.weights();
  const int per = spec.dof_per_node;
  Matrix out(targets.size() * per, cols.size());
  for (Eigen::Index jc = 0; jc < out.cols(); ++jc) {
    const int j = cols[jc] / per, c = cols[jc] % per;
    for (std::size_t t = 0; t < targets.size(); ++t) {
      if (spec.pde == Pde::laplace_neumann) {
        // Interior potential of the Neumann density, u = (1/2pi) int log|x-y| mu.
        out(t, jc) = w[j] * std::log((targets[t] - x[j]).norm()) / (2.0 * kPi);
      } else {
        for (int a = 0; a < 2; ++a) {
          out(2 * t + a, jc) = w[j] * stresslet(targets[t], x[j], n[j], a, c);
        }
      }
    }
  }
  return out;
}

Matrix completion_columns(const Boundary& b, std::span<const Vec2> points) {
  const auto centers = b.hole_centers();
  const int p = static_cast<int>(centers.size());
  Matrix h = Matrix::Zero(2 * points.size(), 3 * p);
  for (int i = 0; i < p; ++i) {
    for (std::size_t k = 0; k < points.size(); ++k) {
      const Vec2 d = points[k] - centers[i];
      const double r2 = d.squaredNorm();
      const double lg = -0.5 * std::log(r2);  // log(1/|d|)
      for (int a = 0; a < 2; ++a) {
        for (int c = 0; c < 2; ++c) {
          h(2 * k + a, 3 * i + c) = ((a == c ? lg : 0.0) + d[a] * d[c] / r2) / (4.0 * kPi);
        }
      }
      // Rotlet: d^perp / (4 pi |d|^2) with (a, b)^perp = (-b, a).
      h(2 * k, 3 * i + 2) = -d.y() / (4.0 * kPi * r2);
      h(2 * k + 1, 3 * i + 2) = d.x() / (4.0 * kPi * r2);
    }
  }
  return h;
}

AugmentationData build_augmentation(const Boundary& b) {
  AugmentationData aug;
  aug.hole_centers = b.hole_centers();
  const int p = b.num_holes();
  const int n = b.num_nodes();
  aug.H = completion_columns(b, b.points());
  aug.Psi = Matrix::Zero(3 * p, 2 * n);
  const auto& x = b.points();
  const auto& w = b.weights();
  for (int i = 0; i < p; ++i) {
    const auto [first, last] = b.node_range(i + 1);
    for (int k = first; k < last; ++k) {
      aug.Psi(3 * i, 2 * k) = w[k];
      aug.Psi(3 * i + 1, 2 * k + 1) = w[k];
      aug.Psi(3 * i + 2, 2 * k) = -x[k].y() * w[k];
      aug.Psi(3 * i + 2, 2 * k + 1) = x[k].x() * w[k];
    }
  }
  return aug;
}

Matrix stokes_nullspace(const Boundary& b) {
  const int p = b.num_holes();
  Matrix psi = Matrix::Zero(2 * b.num_nodes(), 3 * p);
  const auto& x = b.points();
  for (int i = 0; i < p; ++i) {
    const auto [first, last] = b.node_range(i + 1);
    for (int k = first; k < last; ++k) {
      psi(2 * k, 3 * i) = 1.0;
      psi(2 * k + 1, 3 * i + 1) = 1.0;
      psi(2 * k, 3 * i + 2) = -x[k].y();
      psi(2 * k + 1, 3 * i + 2) = x[k].x();
    }
  }
  return psi;
}

ProxyNodes proxy_nodes(const Vec2& center, double radius, int count) {
  ProxyNodes p;
  p.points.resize(count);
  p.weights.assign(count, 2.0 * kPi * radius / count);
  for (int k = 0; k < count; ++k) {
    const double th = 2.0 * kPi * k / count;
    p.points[k] = center + radius * Vec2(std::cos(th), std::sin(th));
  }
  return p;
}

namespace {

Vec2 proxy_normal(const ProxyNodes& proxy, std::size_t k) {
  // Proxy points are equispaced on a circle; the normal is radial.
  const std::size_t m = proxy.points.size();
  const Vec2 center = 0.5 * (proxy.points[k] + proxy.points[(k + m / 2) % m]);
  return (proxy.points[k] - center).normalized();
}

}  // namespace

Matrix proxy_outgoing(const SystemSpec& spec, const Boundary& b,
                      const ProxyNodes& proxy, std::span<const int> cols,
                      double scale) {
  const auto& x = b.points();
  const auto& n = b.normals();
  const auto& w = b.weights();
  const std::size_t np = proxy.points.size();
  const int per = spec.dof_per_node;
  const double null_scale = scale * std::sqrt(static_cast<double>(np));
  Matrix out(np * per + 1, cols.size());
  for (Eigen::Index jc = 0; jc < out.cols(); ++jc) {
    const int j = cols[jc] / per, c = cols[jc] % per;
    for (std::size_t k = 0; k < np; ++k) {
      const Vec2& pk = proxy.points[k];
      if (spec.pde == Pde::laplace_neumann) {
        out(k, jc) = scale * w[j] * laplace_kernel(pk, proxy_normal(proxy, k), x[j]);
      } else {
        for (int a = 0; a < 2; ++a) {
          out(2 * k + a, jc) = scale * w[j] * stresslet(pk, x[j], n[j], a, c);
        }
      }
    }
    // Nullspace completion seen from any far target: w_j (Laplace) or
    // n(y_j)_c w_j (Stokes).
    out(np * per, jc) =
        null_scale * w[j] * (spec.pde == Pde::laplace_neumann ? 1.0 : n[j][c]);
  }
  return out;
}

Matrix proxy_incoming(const SystemSpec& spec, const Boundary& b,
                      const ProxyNodes& proxy, std::span<const int> cols,
                      double scale) {
  const auto& x = b.points();
  const auto& n = b.normals();
  const std::size_t np = proxy.points.size();
  const int per = spec.dof_per_node;
  const double null_scale = scale * std::sqrt(static_cast<double>(np));
  Matrix out(np * per + 1, cols.size());
  for (Eigen::Index ic = 0; ic < out.cols(); ++ic) {
    const int i = cols[ic] / per, a = cols[ic] % per;
    for (std::size_t k = 0; k < np; ++k) {
      const Vec2& pk = proxy.points[k];
      if (spec.pde == Pde::laplace_neumann) {
        out(k, ic) = scale * laplace_kernel(x[i], n[i], pk);
      } else {
        const Vec2 nk = proxy_normal(proxy, k);
        for (int c = 0; c < 2; ++c) {
          out(2 * k + c, ic) = scale * stresslet(x[i], pk, nk, a, c);
        }
      }
    }
    out(np * per, ic) =
        null_scale * (spec.pde == Pde::laplace_neumann ? 1.0 : n[i][a]);
  }
  return out;
}

FluxReport net_flux(const Boundary& b, const Vector& f) {
  FluxReport r;
  const auto& n = b.normals();
  const auto& w = b.weights();
  for (int k = 0; k < b.num_nodes(); ++k) {
    const Vec2 fk(f[2 * k], f[2 * k + 1]);
    r.flux += w[k] * fk.dot(n[k]);
    r.magnitude += w[k] * fk.norm();
  }
  return r;
}

}  // namespace rskel
