#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "barynet/nets.hpp"
#include "barynet/objectives.hpp"
#include "barynet/optimizers.hpp"

namespace barynet {

enum class SaddleKind { Omd, Qitd, Gda };

struct TrainConfig {
  SaddleKind optimizer = SaddleKind::Qitd;
  long iters = 10000;
  long batch = 0;  // 0 = full sample every step
  double lr = 4e-3;
  // QITD constants
  double gamma = 0.75;
  double eps = 1e-3;
  double beta = 0.1;
  double lr_max = 2e-2;
  int disc_inner_steps = 1;  // extra ascent-only steps on the max block
  // nested-order schedule: the label net's coordinates move only every r-th
  // step (sup_theta outer, saddle over (tau, xi) inner)
  long label_update_every = 1;
  std::uint64_t seed = 1;
  bool center_full_sample = false;  // center psi^Z over the full sample, not the minibatch
  long curve_stride = 1;
};

struct CurveRow {
  long step = 0;
  double loss = 0.0;
  double eta = 0.0;
};

struct FitResult {
  std::vector<CurveRow> curve;
  double final_loss = 0.0;
};

// builds the minibatch loss head for the rows passed in
using BatchLossBuilder =
    std::function<int(ad::Tape&, const ad::ParamVector&, const std::vector<Eigen::Index>&)>;

// Generic saddle training over a block-split parameter vector. post_step runs
// after every optimizer update (parameter clamping lives there).
FitResult train_saddle(ad::ParamVector& w, const Eigen::VectorXd& j_sign,
                       const BatchLossBuilder& build, Eigen::Index n_sample,
                       const TrainConfig& cfg,
                       const std::function<void(ad::ParamVector&)>& post_step = {});

// variant that holds one coordinate block on the slow timescale given by
// cfg.label_update_every
FitResult train_saddle_slow_block(ad::ParamVector& w, const Eigen::VectorXd& j_sign,
                                  const BatchLossBuilder& build, Eigen::Index n_sample,
                                  const TrainConfig& cfg,
                                  const std::function<void(ad::ParamVector&)>& post_step,
                                  std::size_t slow_offset, std::size_t slow_count);

// Supervised BaryNet: transport tau is the min block, discriminators xi the
// max block. Continuous labels use (T, psiY, psiZ); finite labels use
// ({T^k}, psiY, q).
struct SupervisedModel {
  ad::ParamVector w;
  TransportNet T;
  DiscriminatorPair D;
  std::size_t tau_end = 0;

  static SupervisedModel continuous(int x_dim, int z_dim, const NetSpec& t_residual,
                                    const NetSpec& psi_y, const NetSpec& psi_z, Rng& rng);
  static SupervisedModel finite(int x_dim, int labels, const NetSpec& t_residual,
                                const NetSpec& psi_y, Rng& rng);
  Eigen::VectorXd j_sign() const;

  std::string to_json() const;
  static SupervisedModel from_json(const std::string& text);
};

// Unsupervised BaryNet: label net theta joins the max block via the
// inf-sup exchange (min over tau, max over xi and theta).
struct FactorModel {
  ad::ParamVector w;
  TransportNet T;
  DiscriminatorPair D;
  LabelNet z_net;
  std::size_t tau_end = 0;

  static FactorModel deterministic(int x_dim, int z_dim, const NetSpec& label_spec,
                                   const NetSpec& t_residual, const NetSpec& psi_y,
                                   const NetSpec& psi_z, Rng& rng);
  static FactorModel discrete(int x_dim, int labels, const NetSpec& logits_spec,
                              const NetSpec& t_residual, const NetSpec& psi_y, Rng& rng);
  // k-means regime: per-label transport restricted to pure translations
  static FactorModel discrete_translations(int x_dim, int labels, const NetSpec& logits_spec,
                                           const NetSpec& psi_y, Rng& rng);
  Eigen::VectorXd j_sign() const;

  std::string to_json() const;
  static FactorModel from_json(const std::string& text);
};

FitResult fit_supervised(SupervisedModel& m, const LabeledSample& sample, const CostSpec& cost,
                         const TrainConfig& cfg);
FitResult fit_factor_deterministic(FactorModel& m, const Eigen::MatrixXd& xs,
                                   const CostSpec& cost, const TrainConfig& cfg);
FitResult fit_factor_discrete(FactorModel& m, const Eigen::MatrixXd& xs, const CostSpec& cost,
                              const TrainConfig& cfg);

// Seeds a single-affine-layer logits net with soft k-means++ assignments:
// logits_k(x) = (c_k . x - |c_k|^2 / 2) / h^2, the SoftMax of which is the
// classic soft assignment to the seeded centers.
void seed_logits_soft_kmeans(FactorModel& m, const Eigen::MatrixXd& xs, double bandwidth,
                             std::uint64_t seed);

// hard assignments from a trained discrete factor model
std::vector<int> assign_labels(const FactorModel& m, const Eigen::MatrixXd& xs);

// z_theta(x_i) for a trained deterministic factor model
Eigen::MatrixXd assign_latents(const FactorModel& m, const Eigen::MatrixXd& xs);

}  // namespace barynet
