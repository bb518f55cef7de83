#pragma once

#include <optional>
#include <vector>

#include "barynet/autodiff.hpp"
#include "barynet/costs.hpp"
#include "barynet/nets.hpp"

namespace barynet {

// Empirical joint rho(x,z): points with continuous labels (zs), discrete
// labels (0-based), or no labels at all for factor discovery.
struct LabeledSample {
  Eigen::MatrixXd xs;       // N x d
  Eigen::MatrixXd zs;       // N x k, empty when labels are discrete/absent
  std::vector<int> labels;  // 0-based discrete labels, empty otherwise
  Eigen::VectorXd weights;  // optional, uniform when empty

  Eigen::Index size() const { return xs.rows(); }
  bool has_discrete() const { return !labels.empty(); }
  bool has_continuous() const { return zs.size() > 0; }

  void validate(int num_labels = 0) const;
  LabeledSample rows(const std::vector<Eigen::Index>& idx) const;
  Eigen::VectorXd normalized_weights() const;  // sums to 1
};

// values - mean(values); the sample form of the constraint E_nu[psi^Z] = 0
Eigen::VectorXd center_psi_z(const Eigen::VectorXd& values);

// All builders record onto the tape and return the scalar head node.
// `training` selects batch-norm mode. `center_batch` optionally supplies a
// larger sample whose psi^Z mean defines the centering (full-sample
// centering flag); by default centering runs over the batch itself.

int build_supervised_loss(ad::Tape& t, const LabeledSample& batch, const TransportNet& T,
                          const DiscriminatorPair& D, const CostSpec& cost,
                          const ad::ParamVector& w, bool training,
                          const LabeledSample* center_batch = nullptr);

int build_factor_loss_deterministic(ad::Tape& t, const Eigen::MatrixXd& xs, const LabelNet& z_net,
                                    const TransportNet& T, const DiscriminatorPair& D,
                                    const CostSpec& cost, const ad::ParamVector& w, bool training,
                                    const Eigen::MatrixXd* center_xs = nullptr);

// memberships: either the SoftMax of a logits net (p_net) or fixed rows
int build_factor_loss_discrete(ad::Tape& t, const Eigen::MatrixXd& xs, const LabelNet& p_net,
                               const TransportNet& T, const DiscriminatorPair& D,
                               const CostSpec& cost, const ad::ParamVector& w, bool training);
int build_factor_loss_discrete_fixed(ad::Tape& t, const Eigen::MatrixXd& xs,
                                     const Eigen::MatrixXd& memberships, const TransportNet& T,
                                     const DiscriminatorPair& D, const CostSpec& cost,
                                     const ad::ParamVector& w, bool training);

struct SemiSupConfig {
  double lambda = 0.5;  // weight of the labeled block, in (0,1)
};

int build_semisup_loss_partial(ad::Tape& t, const SemiSupConfig& cfg, const LabeledSample& labeled,
                               const Eigen::MatrixXd& unlabeled_xs, const LabelNet& z_net,
                               const TransportNet& T, const DiscriminatorPair& D,
                               const CostSpec& cost, const ad::ParamVector& w, bool training);

int build_semisup_loss_confounding(ad::Tape& t, const LabeledSample& batch_z1,
                                   const LabelNet& z2_net, const TransportNet& T,
                                   const DiscriminatorPair& D, const CostSpec& cost,
                                   const ad::ParamVector& w, bool training);

struct BaePrior {
  Mlp phi;                       // discriminator over Z, params in the max block
  Eigen::MatrixXd prior_sample;  // M x k draws from P_Z
};

int build_bae_loss(ad::Tape& t, const Eigen::MatrixXd& xs, const LabelNet& z_net,
                   const TransportNet& T, const DiscriminatorPair& D, const BaePrior& prior,
                   const CostSpec& cost, const ad::ParamVector& w, bool training);

// regression for the inverse map: (1/N) sum c(x_i, S(y_i, z_i)) with
// y_i = T(x_i, z_i) precomputed outside the tape (T frozen)
int build_inverse_regression_loss(ad::Tape& t, const LabeledSample& batch,
                                  const Eigen::MatrixXd& ys, const TransportNet& S,
                                  const CostSpec& cost, const ad::ParamVector& w, bool training);

// plain-value wrappers
double supervised_loss(const LabeledSample& batch, const TransportNet& T,
                       const DiscriminatorPair& D, const CostSpec& cost,
                       const ad::ParamVector& w);
double factor_loss_deterministic(const Eigen::MatrixXd& xs, const LabelNet& z_net,
                                 const TransportNet& T, const DiscriminatorPair& D,
                                 const CostSpec& cost, const ad::ParamVector& w);
double factor_loss_discrete(const Eigen::MatrixXd& xs, const Eigen::MatrixXd& memberships,
                            const TransportNet& T, const DiscriminatorPair& D,
                            const CostSpec& cost, const ad::ParamVector& w);
double inverse_regression_loss(const LabeledSample& batch, const TransportNet& T,
                               const TransportNet& S, const CostSpec& cost,
                               const ad::ParamVector& w_t, const ad::ParamVector& w_s);

// MMD between the joint of (ys, zs) and the product of its marginals,
// Gaussian RBF kernels; three-term sample estimator with coefficients
// 1/(N(N-1)), -2/N^3, 1/(N^2(N^2-1)). Bandwidth <= 0 requests the median
// pairwise distance heuristic.
double mmd_independence_penalty(const Eigen::MatrixXd& ys, const Eigen::MatrixXd& zs,
                                double bandwidth_y = 0.0, double bandwidth_z = 0.0);

double median_pairwise_distance(const Eigen::MatrixXd& pts);

}  // namespace barynet
