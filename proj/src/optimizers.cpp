#include "barynet/optimizers.hpp"

#include <cmath>
#include <stdexcept>

namespace barynet {

namespace {

void require_finite(const Eigen::VectorXd& g, const char* who) {
  if (!g.allFinite()) throw std::runtime_error(std::string(who) + ": non-finite gradient");
}

// iterate taking the min block from a and the max block from b
Eigen::VectorXd mix_blocks(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                           const Eigen::VectorXd& j_sign) {
  Eigen::VectorXd out(a.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) out(i) = j_sign(i) > 0.0 ? a(i) : b(i);
  return out;
}

}  // namespace

void SaddleState::validate() const {
  if (w.size() != j_sign.size()) throw std::invalid_argument("iterate/sign size mismatch");
  for (Eigen::Index i = 0; i < j_sign.size(); ++i)
    if (j_sign(i) != 1.0 && j_sign(i) != -1.0)
      throw std::invalid_argument("sign matrix entries must be +1 or -1");
}

void omd_step(SaddleState& s, const GradFn& grad) {
  Eigen::VectorXd g = grad(s.w);
  require_finite(g, "omd_step");
  const Eigen::VectorXd waiting = s.w - s.eta * s.j_sign.cwiseProduct(g);
  g = grad(waiting);
  require_finite(g, "omd_step");
  s.w -= s.eta * s.j_sign.cwiseProduct(g);
  ++s.step;
}

void gda_step(SaddleState& s, const GradFn& grad) {
  const Eigen::VectorXd g = grad(s.w);
  require_finite(g, "gda_step");
  s.w -= s.eta * s.j_sign.cwiseProduct(g);
  ++s.step;
}

QitdState QitdState::init(Eigen::VectorXd w, Eigen::VectorXd j_sign, double eta0, double gamma,
                          double eps, double beta, double eta_max) {
  QitdState q;
  q.s.w = std::move(w);
  q.s.j_sign = std::move(j_sign);
  q.s.eta = eta0;
  q.s.validate();
  q.B = Eigen::MatrixXd(q.s.j_sign.asDiagonal());
  q.gamma = gamma;
  q.eps = eps;
  q.beta = beta;
  q.eta_max = eta_max;
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0,1)");
  return q;
}

QitdStepInfo qitd_step(QitdState& q, const LossFn& loss, const GradFn& grad) {
  SaddleState& s = q.s;
  const Eigen::VectorXd g = grad(s.w);
  require_finite(g, "qitd_step");

  const double eta_prev = s.eta;
  double eta = eta_prev;
  Eigen::VectorXd w_new = s.w - eta * (q.B * g);

  // anticipatory constraint L(tau', xi) <= L(tau', xi') <= L(tau, xi')
  auto constraint_holds = [&](const Eigen::VectorXd& wn) {
    const double l_mid = loss(wn);
    const double l_lo = loss(mix_blocks(wn, s.w, s.j_sign));
    const double l_hi = loss(mix_blocks(s.w, wn, s.j_sign));
    if (!std::isfinite(l_mid) || !std::isfinite(l_lo) || !std::isfinite(l_hi))
      throw std::runtime_error("qitd_step: non-finite loss");
    return l_lo <= l_mid && l_mid <= l_hi;
  };

  QitdStepInfo info;
  info.constraint_satisfied = constraint_holds(w_new);
  while (!info.constraint_satisfied && eta > q.eps * eta_prev) {
    eta *= q.gamma;
    w_new = s.w - eta * (q.B * g);
    info.constraint_satisfied = constraint_holds(w_new);
    ++info.halvings;
  }
  info.eta_used = eta;
  if (info.constraint_satisfied) eta = std::min((1.0 + q.beta) * eta, q.eta_max);

  const Eigen::VectorXd g_new = grad(w_new);
  require_finite(g_new, "qitd_step");

  // rank-one update of B; skipped when <g,s> vanishes
  const Eigen::VectorXd step_vec = s.j_sign.cwiseProduct(g_new) - q.B * g;
  const double ss = step_vec.squaredNorm();
  const double gs = g.dot(step_vec);
  if (gs != 0.0 && ss > 0.0) {
    double alpha = ss / gs;
    alpha = std::copysign(std::min(std::abs(alpha), 1.0), alpha);
    q.B.noalias() += (alpha / ss) * (step_vec * step_vec.transpose());
    info.rank_one_applied = true;
  }

  s.w = std::move(w_new);
  s.eta = eta;
  ++s.step;
  return info;
}

void sgd_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double eta) {
  require_finite(grad, "sgd_step");
  params -= eta * grad;
}

AdamState AdamState::init(Eigen::Index dim) {
  AdamState a;
  a.m = Eigen::VectorXd::Zero(dim);
  a.v = Eigen::VectorXd::Zero(dim);
  return a;
}

void adam_step(AdamState& a, Eigen::VectorXd& params, const Eigen::VectorXd& grad, double eta) {
  require_finite(grad, "adam_step");
  if (grad.size() != params.size() || a.m.size() != params.size())
    throw std::invalid_argument("adam_step: size mismatch");
  ++a.t;
  a.m = a.beta1 * a.m + (1.0 - a.beta1) * grad;
  a.v = a.beta2 * a.v + (1.0 - a.beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(a.beta1, static_cast<double>(a.t));
  const double bc2 = 1.0 - std::pow(a.beta2, static_cast<double>(a.t));
  const Eigen::VectorXd m_hat = a.m / bc1;
  const Eigen::VectorXd v_hat = a.v / bc2;
  params -= eta * (m_hat.array() / (v_hat.array().sqrt() + a.eps_hat)).matrix();
}

}  // namespace barynet
