#include "barynet/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "barynet/rng.hpp"

namespace barynet::oracle {

namespace {
constexpr double kEigFloorWarn = 1e-8;
}

GaussianSpec GaussianSpec::isotropic(Eigen::VectorXd mean, double stddev, double weight) {
  GaussianSpec g;
  g.cov = stddev * stddev * Eigen::MatrixXd::Identity(mean.size(), mean.size());
  g.mean = std::move(mean);
  g.weight = weight;
  return g;
}

void GaussianSpec::validate() const {
  if (cov.rows() != cov.cols() || cov.rows() != mean.size())
    throw std::invalid_argument("gaussian: shape mismatch");
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw std::invalid_argument("gaussian: covariance not symmetric");
  if (weight < 0.0) throw std::invalid_argument("gaussian: negative weight");
}

DiscreteDist DiscreteDist::uniform(Eigen::MatrixXd pts) {
  DiscreteDist d;
  d.masses = Eigen::VectorXd::Constant(pts.rows(), 1.0 / static_cast<double>(pts.rows()));
  d.points = std::move(pts);
  return d;
}

void DiscreteDist::validate() const {
  if (points.rows() != masses.size()) throw std::invalid_argument("points/masses mismatch");
  if (masses.minCoeff() < 0.0) throw std::invalid_argument("negative mass");
  if (std::abs(masses.sum() - 1.0) > 1e-12) throw std::invalid_argument("masses must sum to 1");
}

Eigen::VectorXd DiscreteDist::mean() const {
  return points.transpose() * masses;
}

double DiscreteDist::variance() const {
  const Eigen::VectorXd m = mean();
  double v = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    v += masses(i) * (points.row(i).transpose() - m).squaredNorm();
  return v;
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> jacobi_eigen_sym(const Eigen::MatrixXd& s) {
  const Eigen::Index d = s.rows();
  if (d != s.cols()) throw std::invalid_argument("jacobi: matrix not square");
  if (d > 64) throw std::invalid_argument("jacobi: dimension above 64");
  Eigen::MatrixXd a = 0.5 * (s + s.transpose());
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(d, d);
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < d; ++p)
      for (Eigen::Index q = p + 1; q < d; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) < 1e-15 * scale) break;

    for (Eigen::Index p = 0; p < d; ++p)
      for (Eigen::Index q = p + 1; q < d; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = std::copysign(1.0, theta) /
                         (std::abs(theta) + std::sqrt(1.0 + theta * theta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = t * c;
        Eigen::VectorXd ap = a.col(p), aq = a.col(q);
        a.col(p) = c * ap - sn * aq;
        a.col(q) = sn * ap + c * aq;
        ap = a.row(p).transpose();
        aq = a.row(q).transpose();
        a.row(p) = (c * ap - sn * aq).transpose();
        a.row(q) = (sn * ap + c * aq).transpose();
        const Eigen::VectorXd vp = v.col(p), vq = v.col(q);
        v.col(p) = c * vp - sn * vq;
        v.col(q) = sn * vp + c * vq;
      }
  }

  Eigen::VectorXd evals = a.diagonal();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index i, Eigen::Index j) { return evals(i) < evals(j); });
  Eigen::VectorXd ev(d);
  Eigen::MatrixXd vv(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    ev(i) = evals(order[static_cast<std::size_t>(i)]);
    vv.col(i) = v.col(order[static_cast<std::size_t>(i)]);
  }
  return {ev, vv};
}

Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& s) {
  auto [ev, v] = jacobi_eigen_sym(s);
  if (ev.minCoeff() < -kEigFloorWarn)
    std::fprintf(stderr, "sqrtm_psd: flooring eigenvalue %.3e to 0\n", ev.minCoeff());
  Eigen::VectorXd root = ev.cwiseMax(0.0).cwiseSqrt();
  return v * root.asDiagonal() * v.transpose();
}

double gaussian_w2(const GaussianSpec& a, const GaussianSpec& b) {
  a.validate();
  b.validate();
  if (a.mean.size() != b.mean.size()) throw std::invalid_argument("gaussian_w2: dim mismatch");
  const Eigen::MatrixXd ra = sqrtm_psd(a.cov);
  const Eigen::MatrixXd cross = sqrtm_psd(ra * b.cov * ra);
  const double tr = (a.cov + b.cov - 2.0 * cross).trace();
  return (a.mean - b.mean).squaredNorm() + std::max(0.0, tr);
}

FixedPointResult gaussian_barycenter_fixed_point(const std::vector<GaussianSpec>& components,
                                                 double tol, int max_iters) {
  if (components.empty()) throw std::invalid_argument("no components");
  double wsum = 0.0;
  for (const auto& g : components) {
    g.validate();
    wsum += g.weight;
  }
  if (std::abs(wsum - 1.0) > 1e-10) throw std::invalid_argument("weights must sum to 1");

  const Eigen::Index d = components.front().mean.size();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(d, d);
  for (const auto& g : components) {
    mean += g.weight * g.mean;
    s += g.weight * g.cov;
  }

  double residual = std::numeric_limits<double>::infinity();
  double stall_ref = residual;
  int it = 0;
  for (; it < max_iters; ++it) {
    const Eigen::MatrixXd rs = sqrtm_psd(s);
    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(d, d);
    for (const auto& g : components) next += g.weight * sqrtm_psd(rs * g.cov * rs);
    residual = (next - s).norm();
    s = 0.5 * (next + next.transpose());
    if (residual < tol) break;
    if (it % 100 == 99) {
      if (residual > stall_ref * (1.0 - 1e-14))
        throw std::runtime_error("gaussian barycenter fixed point stalled, residual " +
                                 std::to_string(residual));
      stall_ref = residual;
    }
  }
  if (residual >= tol)
    throw std::runtime_error("gaussian barycenter fixed point did not converge, residual " +
                             std::to_string(residual));
  FixedPointResult r;
  r.barycenter.mean = std::move(mean);
  r.barycenter.cov = std::move(s);
  r.residual = residual;
  r.iterations = it + 1;
  return r;
}

namespace {

struct TransportBasis {
  // spanning-tree basis on the bipartite row/col graph; nodes: rows then cols
  Eigen::Index n, m;
  std::vector<std::vector<Eigen::Index>> row_cells;  // per row: basic column indices
  std::vector<std::vector<Eigen::Index>> col_cells;  // per col: basic row indices

  void add(Eigen::Index i, Eigen::Index j) {
    row_cells[static_cast<std::size_t>(i)].push_back(j);
    col_cells[static_cast<std::size_t>(j)].push_back(i);
  }
  void remove(Eigen::Index i, Eigen::Index j) {
    auto& rc = row_cells[static_cast<std::size_t>(i)];
    rc.erase(std::find(rc.begin(), rc.end(), j));
    auto& cc = col_cells[static_cast<std::size_t>(j)];
    cc.erase(std::find(cc.begin(), cc.end(), i));
  }
};

}  // namespace

LpResult discrete_ot_lp(const DiscreteDist& src, const DiscreteDist& dst, const CostSpec& cost) {
  src.validate();
  dst.validate();
  const Eigen::Index n = src.points.rows(), m = dst.points.rows();
  if (n > 512 || m > 512) throw std::invalid_argument("discrete_ot_lp: supports above 512 points");

  Eigen::MatrixXd c(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      c(i, j) = cost.eval(src.points.row(i).transpose(), dst.points.row(j).transpose());
  const double tol = 1e-11 * (1.0 + c.cwiseAbs().maxCoeff());

  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, m);
  TransportBasis basis;
  basis.n = n;
  basis.m = m;
  basis.row_cells.resize(static_cast<std::size_t>(n));
  basis.col_cells.resize(static_cast<std::size_t>(m));

  // northwest corner start; visits exactly n + m - 1 cells
  {
    Eigen::VectorXd ra = src.masses, rb = dst.masses;
    Eigen::Index i = 0, j = 0;
    while (true) {
      const double alloc = std::min(ra(i), rb(j));
      x(i, j) = alloc;
      basis.add(i, j);
      ra(i) -= alloc;
      rb(j) -= alloc;
      if (i == n - 1 && j == m - 1) break;
      if (i == n - 1)
        ++j;
      else if (j == m - 1)
        ++i;
      else if (ra(i) < rb(j))
        ++i;
      else
        ++j;
    }
  }

  std::vector<double> u(static_cast<std::size_t>(n)), v(static_cast<std::size_t>(m));
  std::vector<char> u_set(static_cast<std::size_t>(n)), v_set(static_cast<std::size_t>(m));
  std::vector<Eigen::Index> stack;

  auto solve_potentials = [&]() {
    std::fill(u_set.begin(), u_set.end(), 0);
    std::fill(v_set.begin(), v_set.end(), 0);
    u[0] = 0.0;
    u_set[0] = 1;
    stack.clear();
    stack.push_back(0);  // row nodes encoded as i, col nodes as n + j
    while (!stack.empty()) {
      const Eigen::Index node = stack.back();
      stack.pop_back();
      if (node < n) {
        for (Eigen::Index j : basis.row_cells[static_cast<std::size_t>(node)])
          if (!v_set[static_cast<std::size_t>(j)]) {
            v[static_cast<std::size_t>(j)] = c(node, j) - u[static_cast<std::size_t>(node)];
            v_set[static_cast<std::size_t>(j)] = 1;
            stack.push_back(n + j);
          }
      } else {
        const Eigen::Index j = node - n;
        for (Eigen::Index i : basis.col_cells[static_cast<std::size_t>(j)])
          if (!u_set[static_cast<std::size_t>(i)]) {
            u[static_cast<std::size_t>(i)] = c(i, j) - v[static_cast<std::size_t>(j)];
            u_set[static_cast<std::size_t>(i)] = 1;
            stack.push_back(i);
          }
      }
    }
  };

  // path row i* -> col j* through basis edges (BFS over the spanning tree)
  std::vector<Eigen::Index> parent(static_cast<std::size_t>(n + m));
  auto find_path = [&](Eigen::Index i_star, Eigen::Index j_star,
                       std::vector<std::pair<Eigen::Index, Eigen::Index>>& cells) {
    std::fill(parent.begin(), parent.end(), Eigen::Index{-2});
    parent[static_cast<std::size_t>(i_star)] = -1;
    stack.clear();
    stack.push_back(i_star);
    while (!stack.empty()) {
      const Eigen::Index node = stack.back();
      stack.pop_back();
      if (node == n + j_star) break;
      if (node < n) {
        for (Eigen::Index j : basis.row_cells[static_cast<std::size_t>(node)])
          if (parent[static_cast<std::size_t>(n + j)] == -2) {
            parent[static_cast<std::size_t>(n + j)] = node;
            stack.push_back(n + j);
          }
      } else {
        const Eigen::Index j = node - n;
        for (Eigen::Index i : basis.col_cells[static_cast<std::size_t>(j)])
          if (parent[static_cast<std::size_t>(i)] == -2) {
            parent[static_cast<std::size_t>(i)] = n + j;
            stack.push_back(i);
          }
      }
    }
    cells.clear();
    Eigen::Index node = n + j_star;
    if (parent[static_cast<std::size_t>(node)] == -2)
      throw std::logic_error("transport basis is not connected");
    while (parent[static_cast<std::size_t>(node)] != -1) {
      const Eigen::Index par = parent[static_cast<std::size_t>(node)];
      if (node < n)
        cells.emplace_back(node, par - n);
      else
        cells.emplace_back(par, node - n);
      node = par;
    }
    std::reverse(cells.begin(), cells.end());
  };

  const long max_pivots = 2000000;
  const long stall_window = 4 * (n + m);
  long no_progress = 0;
  bool bland = false;
  double last_cost = (c.cwiseProduct(x)).sum();
  std::vector<std::pair<Eigen::Index, Eigen::Index>> path;

  for (long pivot = 0; pivot < max_pivots; ++pivot) {
    solve_potentials();

    Eigen::Index bi = -1, bj = -1;
    double best = -tol;
    for (Eigen::Index i = 0; i < n && (bi < 0 || !bland); ++i)
      for (Eigen::Index j = 0; j < m; ++j) {
        const double r = c(i, j) - u[static_cast<std::size_t>(i)] - v[static_cast<std::size_t>(j)];
        if (r < best) {
          best = r;
          bi = i;
          bj = j;
          if (bland) break;
        }
      }
    if (bi < 0) break;  // optimal

    find_path(bi, bj, path);
    // signs along the cycle: entering is +, path edges alternate -,+,-,...
    double theta = std::numeric_limits<double>::infinity();
    Eigen::Index li = -1, lj = -1;
    for (std::size_t e = 0; e < path.size(); e += 2) {
      const auto [pi, pj] = path[e];
      if (x(pi, pj) < theta ||
          (x(pi, pj) == theta && (pi < li || (pi == li && pj < lj)))) {
        theta = x(pi, pj);
        li = pi;
        lj = pj;
      }
    }
    x(bi, bj) += theta;
    for (std::size_t e = 0; e < path.size(); ++e) {
      const auto [pi, pj] = path[e];
      x(pi, pj) += (e % 2 == 0) ? -theta : theta;
    }
    basis.remove(li, lj);
    basis.add(bi, bj);

    const double now = (c.cwiseProduct(x)).sum();
    if (now < last_cost - tol) {
      no_progress = 0;
      last_cost = now;
    } else if (++no_progress > stall_window) {
      bland = true;  // degenerate plateau: fall back to Bland's rule
    }
  }

  LpResult out;
  out.plan = std::move(x);
  out.cost = (c.cwiseProduct(out.plan)).sum();
  return out;
}

double ot_enumerate_permutations(const DiscreteDist& src, const DiscreteDist& dst,
                                 const CostSpec& cost) {
  src.validate();
  dst.validate();
  const Eigen::Index n = src.points.rows();
  if (dst.points.rows() != n) throw std::invalid_argument("enumeration needs equal supports");
  if (n > 8) throw std::invalid_argument("enumeration limited to n <= 8");
  for (Eigen::Index i = 0; i < n; ++i)
    if (std::abs(src.masses(i) - 1.0 / static_cast<double>(n)) > 1e-12 ||
        std::abs(dst.masses(i) - 1.0 / static_cast<double>(n)) > 1e-12)
      throw std::invalid_argument("enumeration needs uniform masses");

  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      total += cost.eval(src.points.row(i).transpose(),
                         dst.points.row(perm[static_cast<std::size_t>(i)]).transpose());
    best = std::min(best, total / static_cast<double>(n));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

double variance_decomposition_check(
    const std::vector<std::pair<Conditional, double>>& labeled) {
  if (labeled.empty()) throw std::invalid_argument("no conditionals");
  double wsum = 0.0;
  bool any_gaussian = false;
  for (const auto& [cond, w] : labeled) {
    wsum += w;
    if (std::holds_alternative<GaussianSpec>(cond)) any_gaussian = true;
  }
  if (std::abs(wsum - 1.0) > 1e-10) throw std::invalid_argument("weights must sum to 1");

  if (!any_gaussian) {
    // all Dirac: barycenter is the Dirac at the weighted mean
    const Eigen::Index d = std::get<Eigen::VectorXd>(labeled.front().first).size();
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    for (const auto& [cond, w] : labeled) mean += w * std::get<Eigen::VectorXd>(cond);
    double var_rho = 0.0, total_cost = 0.0;
    for (const auto& [cond, w] : labeled) {
      const double d2 = (std::get<Eigen::VectorXd>(cond) - mean).squaredNorm();
      var_rho += w * d2;
      total_cost += w * d2;
    }
    return std::abs(var_rho - 0.0 - total_cost);
  }

  // Dirac conditionals enter the Gaussian route with zero covariance
  std::vector<GaussianSpec> comps;
  for (const auto& [cond, w] : labeled) {
    GaussianSpec g;
    if (std::holds_alternative<GaussianSpec>(cond)) {
      g = std::get<GaussianSpec>(cond);
    } else {
      const auto& pt = std::get<Eigen::VectorXd>(cond);
      g.mean = pt;
      g.cov = Eigen::MatrixXd::Zero(pt.size(), pt.size());
    }
    g.weight = w;
    comps.push_back(std::move(g));
  }
  const GaussianSpec mu = gaussian_barycenter_fixed_point(comps).barycenter;

  double var_rho = 0.0, total_cost = 0.0;
  Eigen::VectorXd mixture_mean = Eigen::VectorXd::Zero(mu.mean.size());
  for (const auto& g : comps) mixture_mean += g.weight * g.mean;
  for (const auto& g : comps) {
    var_rho += g.weight * (g.cov.trace() + (g.mean - mixture_mean).squaredNorm());
    total_cost += g.weight * gaussian_w2(g, mu);
  }
  return std::abs(var_rho - mu.cov.trace() - total_cost);
}

double weighted_variance(const DiscreteDist& dist, const Eigen::MatrixXd& q) {
  dist.validate();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q);
  if ((q - q.transpose()).cwiseAbs().maxCoeff() > 1e-10 || es.eigenvalues().minCoeff() <= 0.0)
    throw std::invalid_argument("Q must be symmetric positive definite");
  const Eigen::VectorXd m = dist.mean();
  double out = 0.0;
  for (Eigen::Index i = 0; i < dist.points.rows(); ++i) {
    const Eigen::VectorXd d = dist.points.row(i).transpose() - m;
    out += dist.masses(i) * d.dot(q * d);
  }
  return out;
}

Eigen::MatrixXd kmeanspp_centers(const Eigen::MatrixXd& points, int k, std::uint64_t seed) {
  const Eigen::Index n = points.rows();
  if (k < 1 || k > n) throw std::invalid_argument("kmeans: need 1 <= K <= N");
  Rng rng(seed);
  Eigen::MatrixXd centers(k, points.cols());
  centers.row(0) = points.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
  Eigen::VectorXd d2 = (points.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double target = rng.uniform() * total, acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2(i);
        if (acc >= target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
    }
    centers.row(c) = points.row(pick);
    d2 = d2.cwiseMin((points.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }
  return centers;
}

KmeansResult kmeans_reference(const Eigen::MatrixXd& points, int k, std::uint64_t seed) {
  const Eigen::Index n = points.rows();
  if (k < 1 || k > n) throw std::invalid_argument("kmeans: need 1 <= K <= N");
  Eigen::MatrixXd centers = kmeanspp_centers(points, k, seed);

  std::vector<int> labels(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < 1000; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double bd = (points.row(i) - centers.row(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double dd = (points.row(i) - centers.row(c)).squaredNorm();
        if (dd < bd) {
          bd = dd;
          best = c;
        }
      }
      if (labels[static_cast<std::size_t>(i)] != best) {
        labels[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    if (!changed) break;

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(labels[static_cast<std::size_t>(i)]) += points.row(i);
      counts(labels[static_cast<std::size_t>(i)]) += 1.0;
    }
    for (int c = 0; c < k; ++c) {
      if (counts(c) > 0.0) {
        centers.row(c) = sums.row(c) / counts(c);
      } else {
        // empty cluster: reseed to the point farthest from its center
        Eigen::Index far = 0;
        double fd = -1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          const double dd =
              (points.row(i) - centers.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
          if (dd > fd) {
            fd = dd;
            far = i;
          }
        }
        centers.row(c) = points.row(far);
      }
    }
  }

  KmeansResult r;
  r.labels = std::move(labels);
  r.centers = std::move(centers);
  for (Eigen::Index i = 0; i < n; ++i)
    r.sse += (points.row(i) - r.centers.row(r.labels[static_cast<std::size_t>(i)])).squaredNorm();
  return r;
}

double energy_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::Index n = a.rows(), m = b.rows();
  if (n < 1 || m < 1) throw std::invalid_argument("energy_distance: empty input");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) ab += (a.row(i) - b.row(j)).norm();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) aa += (a.row(i) - a.row(j)).norm();
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) bb += (b.row(i) - b.row(j)).norm();
  const double nd = static_cast<double>(n), md = static_cast<double>(m);
  return 2.0 * ab / (nd * md) - aa / (nd * nd) - bb / (md * md);
}

double w2_1d(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() < 1 || b.size() < 1) throw std::invalid_argument("w2_1d: empty input");
  std::vector<double> sa(a.data(), a.data() + a.size());
  std::vector<double> sb(b.data(), b.data() + b.size());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size()), nb = static_cast<double>(sb.size());
  std::size_t ia = 0, ib = 0;
  double t = 0.0, total = 0.0;
  while (ia < sa.size() && ib < sb.size()) {
    const double next_a = static_cast<double>(ia + 1) / na;
    const double next_b = static_cast<double>(ib + 1) / nb;
    const double next = std::min(next_a, next_b);
    const double diff = sa[ia] - sb[ib];
    total += (next - t) * diff * diff;
    t = next;
    if (next_a <= next) ++ia;
    if (next_b <= next) ++ib;
  }
  return total;
}

double sliced_w2(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int n_projections,
                 std::uint64_t seed) {
  if (a.cols() != b.cols()) throw std::invalid_argument("sliced_w2: dim mismatch");
  if (n_projections < 1) throw std::invalid_argument("sliced_w2: need projections");
  Rng rng(seed);
  double total = 0.0;
  for (int p = 0; p < n_projections; ++p) {
    Eigen::VectorXd dir(a.cols());
    do {
      for (Eigen::Index i = 0; i < dir.size(); ++i) dir(i) = rng.normal();
    } while (dir.norm() < 1e-12);
    dir.normalize();
    total += w2_1d(a * dir, b * dir);
  }
  return total / static_cast<double>(n_projections);
}

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("pearson: bad input");
  const Eigen::ArrayXd da = a.array() - a.mean();
  const Eigen::ArrayXd db = b.array() - b.mean();
  const double va = (da * da).sum(), vb = (db * db).sum();
  if (va <= 0.0 || vb <= 0.0) throw std::invalid_argument("pearson: zero-variance input");
  return (da * db).sum() / std::sqrt(va * vb);
}

}  // namespace barynet::oracle
