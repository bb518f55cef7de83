#pragma once

#include <cstdint>
#include <string>

#include "barynet/nets.hpp"
#include "barynet/objectives.hpp"

namespace barynet {

// Learned forward map T plus the inverse S fitted by regression, both
// frozen; conditional sampling is only allowed once S is fitted.
struct TransportPair {
  TransportNet T;
  ad::ParamVector w_t;
  TransportNet S;  // residual in y: S(y,z) = y + R_S([y,z]) (or per label)
  ad::ParamVector w_s;
  CostSpec cost;
  bool fitted = false;
  double final_regression_loss = 0.0;

  Eigen::VectorXd forward(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const;
  Eigen::VectorXd forward_label(const Eigen::VectorXd& x, int label) const;
  Eigen::VectorXd inverse(const Eigen::VectorXd& y, const Eigen::VectorXd& z) const;
  Eigen::VectorXd inverse_label(const Eigen::VectorXd& y, int label) const;

  std::string to_json() const;
  static TransportPair from_json(const std::string& text);
};

// {y_i = T(x_i, z_i)}
Eigen::MatrixXd push_to_barycenter(const LabeledSample& sample, const TransportNet& T,
                                   const ad::ParamVector& w_t);

enum class InverseOptimizer { Sgd, Adam };

struct InverseFitConfig {
  InverseOptimizer optimizer = InverseOptimizer::Sgd;
  long iters = 20000;
  long batch = 0;  // 0 = full
  double lr = 5e-2;
  std::uint64_t seed = 1;
  double divergence_limit = 1e6;
};

// fits S to minimize (1/N) sum c(x_i, S(T(x_i,z_i), z_i)); T stays frozen
TransportPair fit_inverse(const LabeledSample& sample, const TransportNet& T,
                          const ad::ParamVector& w_t, const NetSpec& s_residual,
                          const CostSpec& cost, const InverseFitConfig& cfg);

// {S(y_i, z)} for a fixed label
Eigen::MatrixXd sample_conditional(const TransportPair& pair, const Eigen::MatrixXd& ys,
                                   const Eigen::VectorXd& z);
Eigen::MatrixXd sample_conditional_label(const TransportPair& pair, const Eigen::MatrixXd& ys,
                                         int label);

// x -> S_j(T_k(x)); pushes conditional k onto conditional j
Eigen::VectorXd compose_pairwise(const TransportPair& pair_k, int from_label,
                                 const TransportPair& pair_j, int to_label,
                                 const Eigen::VectorXd& x);
Eigen::VectorXd compose_pairwise(const TransportPair& pair_k, const Eigen::VectorXd& z_from,
                                 const TransportPair& pair_j, const Eigen::VectorXd& z_to,
                                 const Eigen::VectorXd& x);

// Gaussian product-kernel density estimate with Silverman bandwidths
struct GaussianKde {
  Eigen::MatrixXd points;
  Eigen::VectorXd bandwidth;  // per dimension

  static GaussianKde fit(const Eigen::MatrixXd& pts);
  double eval(const Eigen::VectorXd& y) const;
};

enum class JacobianMode { Forward, FiniteDifference };

// |det grad_x T(x,z)| * mu_hat(T(x,z)); Euclidean X=Y, d <= 10
double density_from_jacobian(const TransportNet& T, const ad::ParamVector& w_t,
                             const Eigen::VectorXd& z, const GaussianKde& mu_hat,
                             const Eigen::VectorXd& x,
                             JacobianMode mode = JacobianMode::Forward);

// the Jacobian determinant alone, both modes exposed for cross-checks
double transport_jacobian_det(const TransportNet& T, const ad::ParamVector& w_t,
                              const Eigen::VectorXd& z, const Eigen::VectorXd& x,
                              JacobianMode mode);

}  // namespace barynet
