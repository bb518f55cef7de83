#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <variant>
#include <vector>

#include "barynet/costs.hpp"

namespace barynet::oracle {

struct GaussianSpec {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // symmetric PSD
  double weight = 1.0;

  static GaussianSpec isotropic(Eigen::VectorXd mean, double stddev, double weight = 1.0);
  void validate() const;
};

struct DiscreteDist {
  Eigen::MatrixXd points;  // n x d
  Eigen::VectorXd masses;  // sums to 1

  static DiscreteDist uniform(Eigen::MatrixXd pts);
  void validate() const;
  Eigen::VectorXd mean() const;
  double variance() const;  // trace of covariance
};

// principal square root of a symmetric PSD matrix; eigenvalues floored at 0.
// Cyclic Jacobi eigendecomposition, d <= 64.
Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& s);

// eigendecomposition used by sqrtm_psd, exposed for tests:
// returns (eigenvalues ascending, orthonormal columns)
std::pair<Eigen::VectorXd, Eigen::MatrixXd> jacobi_eigen_sym(const Eigen::MatrixXd& s);

// squared 2-Wasserstein distance between Gaussians:
// |m_a - m_b|^2 + tr(S_a + S_b - 2 sqrt(sqrt(S_a) S_b sqrt(S_a)))
double gaussian_w2(const GaussianSpec& a, const GaussianSpec& b);

struct FixedPointResult {
  GaussianSpec barycenter;
  double residual = 0.0;
  int iterations = 0;
};

// Picard iteration for S = sum_k w_k sqrt(sqrt(S) S_k sqrt(S)), started at
// sum_k w_k S_k; mean is the weighted mean of component means.
FixedPointResult gaussian_barycenter_fixed_point(const std::vector<GaussianSpec>& components,
                                                 double tol = 1e-10, int max_iters = 10000);

struct LpResult {
  double cost = 0.0;
  Eigen::MatrixXd plan;  // n x m, marginals match the input masses
};

// exact transportation LP by primal simplex on the transportation polytope,
// northwest-corner start; supports up to 512 x 512
LpResult discrete_ot_lp(const DiscreteDist& src, const DiscreteDist& dst, const CostSpec& cost);

// brute-force optimum over the n! permutation plans; n = m <= 8, uniform masses
double ot_enumerate_permutations(const DiscreteDist& src, const DiscreteDist& dst,
                                 const CostSpec& cost);

using Conditional = std::variant<Eigen::VectorXd, GaussianSpec>;  // Dirac point or Gaussian

// |Var(rho) - Var(mu) - sum_k w_k W2^2(rho_k, mu)| for mixtures whose
// conditionals are all Dirac or all Gaussian
double variance_decomposition_check(const std::vector<std::pair<Conditional, double>>& labeled);

double weighted_variance(const DiscreteDist& dist, const Eigen::MatrixXd& q);

struct KmeansResult {
  std::vector<int> labels;
  Eigen::MatrixXd centers;
  double sse = 0.0;
};

// Lloyd's algorithm with k-means++ seeding; empty clusters reseed to the
// farthest point
KmeansResult kmeans_reference(const Eigen::MatrixXd& points, int k, std::uint64_t seed);

// the k-means++ seeding step alone (k rows)
Eigen::MatrixXd kmeanspp_centers(const Eigen::MatrixXd& points, int k, std::uint64_t seed);

double energy_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);
double sliced_w2(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int n_projections,
                 std::uint64_t seed);
double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// exact 1-D squared W2 between empirical distributions (quantile matching)
double w2_1d(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace barynet::oracle
