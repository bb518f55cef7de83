#include "barynet/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace barynet {

namespace {

// weighted mean of a column node: dot with normalized weights
int wmean(ad::Tape& t, int column, const Eigen::VectorXd& norm_weights) {
  if (norm_weights.size() == 0) return t.reduce_mean(column);
  return t.dot(column, t.constant(norm_weights));
}

Eigen::MatrixXd one_hot(const std::vector<int>& labels, int k) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(labels.size()), k);
  for (std::size_t i = 0; i < labels.size(); ++i)
    m(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  return m;
}

}  // namespace

void LabeledSample::validate(int num_labels) const {
  if (xs.rows() < 1) throw std::invalid_argument("sample must hold at least one point");
  if (!xs.allFinite()) throw std::invalid_argument("sample xs contain non-finite values");
  if (has_continuous()) {
    if (zs.rows() != xs.rows()) throw std::invalid_argument("xs/zs row mismatch");
    if (!zs.allFinite()) throw std::invalid_argument("sample zs contain non-finite values");
  }
  if (has_discrete()) {
    if (static_cast<Eigen::Index>(labels.size()) != xs.rows())
      throw std::invalid_argument("xs/labels row mismatch");
    for (int l : labels)
      if (l < 0 || (num_labels > 0 && l >= num_labels))
        throw std::invalid_argument("discrete label out of range");
  }
  if (weights.size() > 0) {
    if (weights.size() != xs.rows()) throw std::invalid_argument("weight length mismatch");
    if (weights.minCoeff() < 0.0) throw std::invalid_argument("weights must be nonnegative");
  }
}

LabeledSample LabeledSample::rows(const std::vector<Eigen::Index>& idx) const {
  LabeledSample out;
  out.xs.resize(static_cast<Eigen::Index>(idx.size()), xs.cols());
  if (has_continuous()) out.zs.resize(static_cast<Eigen::Index>(idx.size()), zs.cols());
  if (weights.size() > 0) out.weights.resize(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.xs.row(static_cast<Eigen::Index>(i)) = xs.row(idx[i]);
    if (has_continuous()) out.zs.row(static_cast<Eigen::Index>(i)) = zs.row(idx[i]);
    if (has_discrete()) out.labels.push_back(labels[static_cast<std::size_t>(idx[i])]);
    if (weights.size() > 0) out.weights(static_cast<Eigen::Index>(i)) = weights(idx[i]);
  }
  return out;
}

Eigen::VectorXd LabeledSample::normalized_weights() const {
  if (weights.size() == 0) return {};
  const double s = weights.sum();
  if (s <= 0.0) throw std::invalid_argument("weights sum to zero");
  return weights / s;
}

Eigen::VectorXd center_psi_z(const Eigen::VectorXd& values) {
  if (values.size() < 1) throw std::invalid_argument("center_psi_z: empty input");
  return values.array() - values.mean();
}

int build_supervised_loss(ad::Tape& t, const LabeledSample& batch, const TransportNet& T,
                          const DiscriminatorPair& D, const CostSpec& cost,
                          const ad::ParamVector& w, bool training,
                          const LabeledSample* center_batch) {
  batch.validate(T.label_count());
  if (batch.has_discrete()) {
    if (!T.discrete || !D.discrete)
      throw std::invalid_argument("discrete sample needs per-label transport and q");
    // hard labels are one-hot memberships of the discrete objective
    return build_factor_loss_discrete_fixed(t, batch.xs, one_hot(batch.labels, T.label_count()),
                                            T, D, cost, w, training);
  }
  if (T.discrete) throw std::invalid_argument("continuous sample on per-label transport");

  const Eigen::VectorXd nw = batch.normalized_weights();
  const int x = t.constant(batch.xs);
  const int z = t.constant(batch.zs);
  const int y = T.apply(t, w, x, z, training);
  const int mean_cost = wmean(t, t.cost_rows(cost, x, y), nw);

  const int psi_y = D.psi_y.forward(t, w, y, training);
  const int psi_z = D.psi_z.forward(t, w, z, training);
  int center;
  if (center_batch) {
    const int zc = t.constant(center_batch->zs);
    center = wmean(t, D.psi_z.forward(t, w, zc, training), center_batch->normalized_weights());
  } else {
    center = wmean(t, psi_z, nw);
  }
  const int psi_z_tilde = t.sub_scalar(psi_z, center);
  const int disc = wmean(t, t.mul(psi_y, psi_z_tilde), nw);
  return t.sub(mean_cost, disc);
}

int build_factor_loss_deterministic(ad::Tape& t, const Eigen::MatrixXd& xs, const LabelNet& z_net,
                                    const TransportNet& T, const DiscriminatorPair& D,
                                    const CostSpec& cost, const ad::ParamVector& w, bool training,
                                    const Eigen::MatrixXd* center_xs) {
  if (z_net.kind != LabelNetKind::Deterministic)
    throw std::invalid_argument("deterministic factor loss needs a deterministic label net");
  const int x = t.constant(xs);
  const int z = z_net.forward(t, w, x, training);
  const int y = T.apply(t, w, x, z, training);
  const int mean_cost = t.reduce_mean(t.cost_rows(cost, x, y));

  const int psi_y = D.psi_y.forward(t, w, y, training);
  const int psi_z = D.psi_z.forward(t, w, z, training);
  int center;
  if (center_xs) {
    const int zc = z_net.forward(t, w, t.constant(*center_xs), training);
    center = t.reduce_mean(D.psi_z.forward(t, w, zc, training));
  } else {
    center = t.reduce_mean(psi_z);
  }
  const int psi_z_tilde = t.sub_scalar(psi_z, center);
  return t.sub(mean_cost, t.reduce_mean(t.mul(psi_y, psi_z_tilde)));
}

namespace {

// shared core of the finite-label objective: memberships node p (N x K),
// per-label maps T^k, scalar discriminator psi^Y and vector q
int discrete_core(ad::Tape& t, int x, int p, const TransportNet& T, const DiscriminatorPair& D,
                  const CostSpec& cost, const ad::ParamVector& w, bool training) {
  const int K = T.label_count();
  const auto n_rows = t.value(x).rows();
  const double inv_n = 1.0 / static_cast<double>(n_rows);

  const int q = t.param(w, D.q_offset, 1, D.q_size);
  const int nu = t.scale(t.col_sum(p), inv_n);       // cluster weights (1 x K)
  const int q_hat = t.dot(q, nu);
  const int q_tilde = t.sub_scalar(q, q_hat);

  int total = -1;
  for (int k = 0; k < K; ++k) {
    const int y_k = T.apply_label(t, w, x, k, training);
    const int c_k = t.cost_rows(cost, x, y_k);
    const int s_k = D.psi_y.forward(t, w, y_k, training);
    const int disc_k = t.mul_scalar(s_k, t.select_col(q_tilde, k));
    const int term_k = t.reduce_sum(t.mul(t.select_col(p, k), t.sub(c_k, disc_k)));
    total = (total < 0) ? term_k : t.add(total, term_k);
  }
  return t.scale(total, inv_n);
}

void check_membership_rows(const Eigen::MatrixXd& p) {
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    if (std::abs(p.row(i).sum() - 1.0) > 1e-8)
      throw std::invalid_argument("membership row does not sum to 1");
    if (p.row(i).minCoeff() < -1e-12)
      throw std::invalid_argument("membership row has negative entries");
  }
}

}  // namespace

int build_factor_loss_discrete(ad::Tape& t, const Eigen::MatrixXd& xs, const LabelNet& p_net,
                               const TransportNet& T, const DiscriminatorPair& D,
                               const CostSpec& cost, const ad::ParamVector& w, bool training) {
  if (p_net.kind != LabelNetKind::SoftmaxLogits)
    throw std::invalid_argument("discrete factor loss needs a SoftMax label net");
  if (!T.discrete || !D.discrete) throw std::invalid_argument("discrete loss needs T^k and q");
  const int x = t.constant(xs);
  const int p = p_net.forward(t, w, x, training);
  return discrete_core(t, x, p, T, D, cost, w, training);
}

int build_factor_loss_discrete_fixed(ad::Tape& t, const Eigen::MatrixXd& xs,
                                     const Eigen::MatrixXd& memberships, const TransportNet& T,
                                     const DiscriminatorPair& D, const CostSpec& cost,
                                     const ad::ParamVector& w, bool training) {
  if (!T.discrete || !D.discrete) throw std::invalid_argument("discrete loss needs T^k and q");
  if (memberships.rows() != xs.rows() || memberships.cols() != T.label_count())
    throw std::invalid_argument("membership shape mismatch");
  check_membership_rows(memberships);
  const int x = t.constant(xs);
  const int p = t.constant(memberships);
  return discrete_core(t, x, p, T, D, cost, w, training);
}

int build_semisup_loss_partial(ad::Tape& t, const SemiSupConfig& cfg, const LabeledSample& labeled,
                               const Eigen::MatrixXd& unlabeled_xs, const LabelNet& z_net,
                               const TransportNet& T, const DiscriminatorPair& D,
                               const CostSpec& cost, const ad::ParamVector& w, bool training) {
  if (!(cfg.lambda > 0.0 && cfg.lambda < 1.0))
    throw std::invalid_argument("lambda must lie in (0,1)");
  labeled.validate();
  if (!labeled.has_continuous()) throw std::invalid_argument("labeled block needs z values");
  if (unlabeled_xs.rows() < 1) throw std::invalid_argument("unlabeled block is empty");
  const double lam = cfg.lambda;

  const int x1 = t.constant(labeled.xs);
  const int z1 = t.constant(labeled.zs);
  const int x2 = t.constant(unlabeled_xs);
  const int z2 = z_net.forward(t, w, x2, training);

  const int y1 = T.apply(t, w, x1, z1, training);
  const int y2 = T.apply(t, w, x2, z2, training);

  const int cost_term = t.add(t.scale(t.reduce_mean(t.cost_rows(cost, x1, y1)), lam),
                              t.scale(t.reduce_mean(t.cost_rows(cost, x2, y2)), 1.0 - lam));

  const int pz1 = D.psi_z.forward(t, w, z1, training);
  const int pz2 = D.psi_z.forward(t, w, z2, training);
  // joint centering: lambda-weighted mean over both blocks
  const int center = t.add(t.scale(t.reduce_mean(pz1), lam),
                           t.scale(t.reduce_mean(pz2), 1.0 - lam));

  const int d1 = t.reduce_mean(t.mul(D.psi_y.forward(t, w, y1, training),
                                     t.sub_scalar(pz1, center)));
  const int d2 = t.reduce_mean(t.mul(D.psi_y.forward(t, w, y2, training),
                                     t.sub_scalar(pz2, center)));
  const int disc_term = t.add(t.scale(d1, lam), t.scale(d2, 1.0 - lam));
  return t.sub(cost_term, disc_term);
}

int build_semisup_loss_confounding(ad::Tape& t, const LabeledSample& batch_z1,
                                   const LabelNet& z2_net, const TransportNet& T,
                                   const DiscriminatorPair& D, const CostSpec& cost,
                                   const ad::ParamVector& w, bool training) {
  batch_z1.validate();
  if (!batch_z1.has_continuous())
    throw std::invalid_argument("confounding objective needs given z1 values");
  const int x = t.constant(batch_z1.xs);
  const int z1 = t.constant(batch_z1.zs);
  const int z2 = z2_net.forward(t, w, x, training);
  const int z = t.concat_cols(z1, z2);

  const int y = T.apply(t, w, x, z, training);
  const int mean_cost = t.reduce_mean(t.cost_rows(cost, x, y));
  const int psi_y = D.psi_y.forward(t, w, y, training);
  const int psi_z = D.psi_z.forward(t, w, z, training);
  const int psi_z_tilde = t.sub_scalar(psi_z, t.reduce_mean(psi_z));
  return t.sub(mean_cost, t.reduce_mean(t.mul(psi_y, psi_z_tilde)));
}

int build_bae_loss(ad::Tape& t, const Eigen::MatrixXd& xs, const LabelNet& z_net,
                   const TransportNet& T, const DiscriminatorPair& D, const BaePrior& prior,
                   const CostSpec& cost, const ad::ParamVector& w, bool training) {
  if (prior.prior_sample.rows() < 1) throw std::invalid_argument("empty prior sample");
  const int base = build_factor_loss_deterministic(t, xs, z_net, T, D, cost, w, training);
  const int x = t.constant(xs);
  const int z = z_net.forward(t, w, x, training);
  const int phi_data = t.reduce_mean(prior.phi.forward(t, w, z, training));
  const int phi_prior =
      t.reduce_mean(prior.phi.forward(t, w, t.constant(prior.prior_sample), training));
  return t.sub(base, t.sub(phi_data, phi_prior));
}

int build_inverse_regression_loss(ad::Tape& t, const LabeledSample& batch,
                                  const Eigen::MatrixXd& ys, const TransportNet& S,
                                  const CostSpec& cost, const ad::ParamVector& w, bool training) {
  batch.validate(S.label_count());
  if (ys.rows() != batch.xs.rows()) throw std::invalid_argument("ys/xs row mismatch");
  const int x = t.constant(batch.xs);
  const int y = t.constant(ys);
  int xhat;
  if (S.discrete) {
    if (!batch.has_discrete()) throw std::invalid_argument("per-label inverse needs labels");
    // apply every S^k, keep each row's own label via one-hot masking
    const Eigen::MatrixXd hot = one_hot(batch.labels, S.label_count());
    int acc = -1;
    for (int k = 0; k < S.label_count(); ++k) {
      const int xk = S.apply_label(t, w, y, k, training);
      Eigen::MatrixXd mask(batch.xs.rows(), batch.xs.cols());
      for (Eigen::Index i = 0; i < mask.rows(); ++i) mask.row(i).setConstant(hot(i, k));
      const int masked = t.mul(xk, t.constant(mask));
      acc = (acc < 0) ? masked : t.add(acc, masked);
    }
    xhat = acc;
  } else {
    xhat = S.apply(t, w, y, t.constant(batch.zs), training);
  }
  return t.reduce_mean(t.cost_rows(cost, x, xhat));
}

double supervised_loss(const LabeledSample& batch, const TransportNet& T,
                       const DiscriminatorPair& D, const CostSpec& cost,
                       const ad::ParamVector& w) {
  ad::Tape t;
  return t.value_scalar(build_supervised_loss(t, batch, T, D, cost, w, false));
}

double factor_loss_deterministic(const Eigen::MatrixXd& xs, const LabelNet& z_net,
                                 const TransportNet& T, const DiscriminatorPair& D,
                                 const CostSpec& cost, const ad::ParamVector& w) {
  ad::Tape t;
  return t.value_scalar(build_factor_loss_deterministic(t, xs, z_net, T, D, cost, w, false));
}

double factor_loss_discrete(const Eigen::MatrixXd& xs, const Eigen::MatrixXd& memberships,
                            const TransportNet& T, const DiscriminatorPair& D,
                            const CostSpec& cost, const ad::ParamVector& w) {
  ad::Tape t;
  return t.value_scalar(
      build_factor_loss_discrete_fixed(t, xs, memberships, T, D, cost, w, false));
}

double inverse_regression_loss(const LabeledSample& batch, const TransportNet& T,
                               const TransportNet& S, const CostSpec& cost,
                               const ad::ParamVector& w_t, const ad::ParamVector& w_s) {
  Eigen::MatrixXd ys(batch.xs.rows(), batch.xs.cols());
  for (Eigen::Index i = 0; i < batch.xs.rows(); ++i) {
    if (T.discrete)
      ys.row(i) = T.eval_label(w_t, batch.xs.row(i).transpose(),
                               batch.labels[static_cast<std::size_t>(i)]);
    else
      ys.row(i) = T.eval(w_t, batch.xs.row(i).transpose(), batch.zs.row(i).transpose());
  }
  ad::Tape t;
  return t.value_scalar(build_inverse_regression_loss(t, batch, ys, S, cost, w_s, false));
}

double median_pairwise_distance(const Eigen::MatrixXd& pts) {
  const Eigen::Index n = pts.rows();
  if (n < 2) throw std::invalid_argument("median distance needs at least two points");
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) d.push_back((pts.row(i) - pts.row(j)).norm());
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2), d.end());
  double m = d[d.size() / 2];
  if (m <= 0.0) m = 1.0;  // all points coincide
  return m;
}

double mmd_independence_penalty(const Eigen::MatrixXd& ys, const Eigen::MatrixXd& zs,
                                double bandwidth_y, double bandwidth_z) {
  const Eigen::Index n = ys.rows();
  if (n < 2) throw std::invalid_argument("MMD estimator needs N >= 2");
  if (zs.rows() != n) throw std::invalid_argument("ys/zs row mismatch");
  const double by = bandwidth_y > 0.0 ? bandwidth_y : median_pairwise_distance(ys);
  const double bz = bandwidth_z > 0.0 ? bandwidth_z : median_pairwise_distance(zs);

  Eigen::MatrixXd k(n, n), h(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      k(i, j) = std::exp(-(ys.row(i) - ys.row(j)).squaredNorm() / (2.0 * by * by));
      h(i, j) = std::exp(-(zs.row(i) - zs.row(j)).squaredNorm() / (2.0 * bz * bz));
    }

  const double nd = static_cast<double>(n);
  const double term1 = k.cwiseProduct(h).sum() / (nd * (nd - 1.0));
  const double term2 =
      2.0 / (nd * nd * nd) * (k.rowwise().sum().cwiseProduct(h.rowwise().sum())).sum();
  const double term3 = k.sum() * h.sum() / (nd * nd * (nd * nd - 1.0));
  return term1 - term2 + term3;
}

}  // namespace barynet
