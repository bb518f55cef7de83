#pragma once

#include <Eigen/Dense>
#include <functional>

namespace barynet {

using GradFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using LossFn = std::function<double(const Eigen::VectorXd&)>;

// Saddle-point iterate w = (min block, max block) with the twist matrix
// J = diag(+1 on the min block, -1 on the max block).
struct SaddleState {
  Eigen::VectorXd w;
  Eigen::VectorXd j_sign;  // +1 / -1 per coordinate
  double eta = 1e-3;
  long step = 0;

  void validate() const;
};

// one optimistic mirror descent step:
//   waiting state  w~ = w - eta J grad(w)
//   actual update  w' = w - eta J grad(w~)
void omd_step(SaddleState& s, const GradFn& grad);

// plain gradient descent-ascent, kept as the divergence baseline
void gda_step(SaddleState& s, const GradFn& grad);

struct QitdState {
  SaddleState s;
  Eigen::MatrixXd B;  // quasi-Newton matrix, initialized to J
  double gamma = 0.75;
  double eps = 1e-3;
  double beta = 0.1;
  double eta_max = 2e-2;

  static QitdState init(Eigen::VectorXd w, Eigen::VectorXd j_sign, double eta0, double gamma,
                        double eps, double beta, double eta_max);
};

struct QitdStepInfo {
  bool constraint_satisfied = false;
  int halvings = 0;
  double eta_used = 0.0;
  bool rank_one_applied = false;
};

// one step of stochastic quasi implicit twisted descent; loss and grad must
// be bound to the same minibatch
QitdStepInfo qitd_step(QitdState& q, const LossFn& loss, const GradFn& grad);

void sgd_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double eta);

struct AdamState {
  Eigen::VectorXd m, v;
  long t = 0;
  double beta1 = 0.9, beta2 = 0.999, eps_hat = 1e-8;

  static AdamState init(Eigen::Index dim);
};

void adam_step(AdamState& a, Eigen::VectorXd& params, const Eigen::VectorXd& grad, double eta);

}  // namespace barynet
