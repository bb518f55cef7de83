#include "barynet/transport.hpp"

#include <cmath>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "barynet/optimizers.hpp"
#include "barynet/rng.hpp"

namespace barynet {

using json = nlohmann::json;

Eigen::VectorXd TransportPair::forward(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const {
  return T.eval(w_t, x, z);
}

Eigen::VectorXd TransportPair::forward_label(const Eigen::VectorXd& x, int label) const {
  return T.eval_label(w_t, x, label);
}

Eigen::VectorXd TransportPair::inverse(const Eigen::VectorXd& y, const Eigen::VectorXd& z) const {
  if (!fitted) throw std::logic_error("inverse map has not been fitted");
  return S.eval(w_s, y, z);
}

Eigen::VectorXd TransportPair::inverse_label(const Eigen::VectorXd& y, int label) const {
  if (!fitted) throw std::logic_error("inverse map has not been fitted");
  return S.eval_label(w_s, y, label);
}

Eigen::MatrixXd push_to_barycenter(const LabeledSample& sample, const TransportNet& T,
                                   const ad::ParamVector& w_t) {
  sample.validate(T.label_count());
  Eigen::MatrixXd ys(sample.size(), sample.xs.cols());
  for (Eigen::Index i = 0; i < sample.size(); ++i) {
    if (T.discrete)
      ys.row(i) =
          T.eval_label(w_t, sample.xs.row(i).transpose(), sample.labels[static_cast<std::size_t>(i)])
              .transpose();
    else
      ys.row(i) =
          T.eval(w_t, sample.xs.row(i).transpose(), sample.zs.row(i).transpose()).transpose();
  }
  return ys;
}

namespace {

// copies T and its parameters out of a (possibly larger) model vector into a
// standalone pair-owned store, so the pair serializes independently
void rebase_transport(const TransportNet& src, const ad::ParamVector& w_src, TransportNet& dst,
                      ad::ParamVector& w_dst) {
  if (src.translations()) {
    dst = TransportNet::finite_translations(src.x_dim, src.label_count(), w_dst, "T");
    for (std::size_t k = 0; k < src.beta_offsets.size(); ++k)
      for (int j = 0; j < src.x_dim; ++j)
        w_dst.values(static_cast<Eigen::Index>(dst.beta_offsets[k]) + j) =
            w_src.values(static_cast<Eigen::Index>(src.beta_offsets[k]) + j);
    return;
  }
  if (src.discrete)
    dst = TransportNet::finite(src.nets[0].spec(), src.x_dim, src.label_count(), w_dst, "T");
  else
    dst = TransportNet::continuous(src.nets[0].spec(), src.x_dim, src.z_dim, w_dst, "T");
  for (std::size_t n = 0; n < src.nets.size(); ++n) {
    const std::size_t so = src.nets[n].offset(), co = dst.nets[n].offset();
    for (std::size_t i = 0; i < src.nets[n].param_count(); ++i)
      w_dst.values(static_cast<Eigen::Index>(co + i)) =
          w_src.values(static_cast<Eigen::Index>(so + i));
    dst.nets[n].set_running_stats(src.nets[n].running_means(), src.nets[n].running_vars());
  }
}

}  // namespace

TransportPair fit_inverse(const LabeledSample& sample, const TransportNet& T,
                          const ad::ParamVector& w_t, const NetSpec& s_residual,
                          const CostSpec& cost, const InverseFitConfig& cfg) {
  TransportPair pair;
  rebase_transport(T, w_t, pair.T, pair.w_t);
  pair.cost = cost;

  Rng rng(cfg.seed);
  if (T.discrete)
    pair.S = TransportNet::finite(s_residual, T.x_dim, T.label_count(), pair.w_s, "S");
  else
    pair.S = TransportNet::continuous(s_residual, T.x_dim, T.z_dim, pair.w_s, "S");
  pair.S.init_params(pair.w_s, rng);

  const Eigen::MatrixXd ys = push_to_barycenter(sample, T, w_t);

  ad::ParamVector scratch = pair.w_s;
  auto grad_at = [&](const Eigen::VectorXd& v, const LabeledSample& batch,
                     const Eigen::MatrixXd& by, double* loss_out) {
    scratch.values = v;
    ad::Tape t;
    const int head = build_inverse_regression_loss(t, batch, by, pair.S, cost, scratch, true);
    if (loss_out) *loss_out = t.value_scalar(head);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(v.size());
    t.backward(head, g);
    return g;
  };

  const bool full_batch = cfg.batch <= 0 || cfg.batch >= sample.size();
  Rng batch_rng(cfg.seed ^ 0x6a09e667f3bcc909ULL);
  AdamState adam = AdamState::init(static_cast<Eigen::Index>(pair.w_s.size()));
  Eigen::VectorXd params = pair.w_s.values;

  double last_loss = 0.0;
  for (long it = 0; it < cfg.iters; ++it) {
    LabeledSample batch;
    Eigen::MatrixXd by;
    const LabeledSample* bp = &sample;
    const Eigen::MatrixXd* yp = &ys;
    if (!full_batch) {
      std::vector<Eigen::Index> rows(static_cast<std::size_t>(cfg.batch));
      for (auto& r : rows)
        r = static_cast<Eigen::Index>(batch_rng.below(static_cast<std::uint64_t>(sample.size())));
      batch = sample.rows(rows);
      by.resize(static_cast<Eigen::Index>(rows.size()), ys.cols());
      for (std::size_t i = 0; i < rows.size(); ++i)
        by.row(static_cast<Eigen::Index>(i)) = ys.row(rows[i]);
      bp = &batch;
      yp = &by;
    }
    const Eigen::VectorXd g = grad_at(params, *bp, *yp, &last_loss);
    if (!std::isfinite(last_loss) || last_loss > cfg.divergence_limit)
      throw std::runtime_error("inverse regression diverged, loss " + std::to_string(last_loss));
    if (cfg.optimizer == InverseOptimizer::Sgd)
      sgd_step(params, g, cfg.lr);
    else
      adam_step(adam, params, g, cfg.lr);
  }

  pair.w_s.values = params;
  pair.fitted = true;
  {
    ad::Tape t;
    pair.final_regression_loss =
        t.value_scalar(build_inverse_regression_loss(t, sample, ys, pair.S, cost, pair.w_s, false));
  }
  return pair;
}

Eigen::MatrixXd sample_conditional(const TransportPair& pair, const Eigen::MatrixXd& ys,
                                   const Eigen::VectorXd& z) {
  if (!pair.fitted) throw std::logic_error("inverse map has not been fitted");
  Eigen::MatrixXd out(ys.rows(), ys.cols());
  for (Eigen::Index i = 0; i < ys.rows(); ++i)
    out.row(i) = pair.S.eval(pair.w_s, ys.row(i).transpose(), z).transpose();
  return out;
}

Eigen::MatrixXd sample_conditional_label(const TransportPair& pair, const Eigen::MatrixXd& ys,
                                         int label) {
  if (!pair.fitted) throw std::logic_error("inverse map has not been fitted");
  Eigen::MatrixXd out(ys.rows(), ys.cols());
  for (Eigen::Index i = 0; i < ys.rows(); ++i)
    out.row(i) = pair.S.eval_label(pair.w_s, ys.row(i).transpose(), label).transpose();
  return out;
}

Eigen::VectorXd compose_pairwise(const TransportPair& pair_k, int from_label,
                                 const TransportPair& pair_j, int to_label,
                                 const Eigen::VectorXd& x) {
  return pair_j.inverse_label(pair_k.forward_label(x, from_label), to_label);
}

Eigen::VectorXd compose_pairwise(const TransportPair& pair_k, const Eigen::VectorXd& z_from,
                                 const TransportPair& pair_j, const Eigen::VectorXd& z_to,
                                 const Eigen::VectorXd& x) {
  return pair_j.inverse(pair_k.forward(x, z_from), z_to);
}

GaussianKde GaussianKde::fit(const Eigen::MatrixXd& pts) {
  if (pts.rows() < 2) throw std::invalid_argument("KDE needs at least two points");
  GaussianKde k;
  k.points = pts;
  const double n = static_cast<double>(pts.rows());
  const double d = static_cast<double>(pts.cols());
  const Eigen::RowVectorXd mean = pts.colwise().mean();
  Eigen::RowVectorXd sigma =
      ((pts.rowwise() - mean).array().square().colwise().sum() / (n - 1.0)).sqrt();
  const double factor = std::pow(4.0 / ((d + 2.0) * n), 1.0 / (d + 4.0));  // Silverman
  k.bandwidth = (sigma * factor).transpose();
  for (Eigen::Index j = 0; j < k.bandwidth.size(); ++j)
    if (k.bandwidth(j) <= 0.0) k.bandwidth(j) = 1e-3;
  return k;
}

double GaussianKde::eval(const Eigen::VectorXd& y) const {
  if (y.size() != points.cols()) throw std::invalid_argument("KDE: dimension mismatch");
  const double norm =
      std::pow(2.0 * M_PI, -0.5 * static_cast<double>(y.size())) / bandwidth.prod();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const double e =
        ((y - points.row(i).transpose()).array() / bandwidth.array()).square().sum();
    acc += std::exp(-0.5 * e);
  }
  return norm * acc / static_cast<double>(points.rows());
}

double transport_jacobian_det(const TransportNet& T, const ad::ParamVector& w_t,
                              const Eigen::VectorXd& z, const Eigen::VectorXd& x,
                              JacobianMode mode) {
  const Eigen::Index d = x.size();
  if (d > 10) throw std::invalid_argument("jacobian determinant limited to d <= 10");
  Eigen::MatrixXd jac(d, d);
  if (mode == JacobianMode::Forward) {
    Eigen::VectorXd input(d + z.size());
    input << x, z;
    for (Eigen::Index i = 0; i < d; ++i) {
      Eigen::VectorXd tangent = Eigen::VectorXd::Zero(d + z.size());
      tangent(i) = 1.0;
      jac.col(i) = T.nets[0].jvp(w_t, input, tangent);
      jac(i, i) += 1.0;  // residual identity part
    }
  } else {
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < d; ++i) {
      Eigen::VectorXd xp = x, xm = x;
      xp(i) += h;
      xm(i) -= h;
      jac.col(i) = (T.eval(w_t, xp, z) - T.eval(w_t, xm, z)) / (2.0 * h);
    }
  }
  return std::abs(jac.determinant());
}

double density_from_jacobian(const TransportNet& T, const ad::ParamVector& w_t,
                             const Eigen::VectorXd& z, const GaussianKde& mu_hat,
                             const Eigen::VectorXd& x, JacobianMode mode) {
  if (T.discrete) throw std::invalid_argument("density recovery needs a continuous-label map");
  const double det = transport_jacobian_det(T, w_t, z, x, mode);
  return det * mu_hat.eval(T.eval(w_t, x, z));
}

std::string TransportPair::to_json() const {
  json j;
  j["discrete"] = T.discrete;
  j["x_dim"] = T.x_dim;
  j["z_dim"] = T.z_dim;
  if (T.discrete) j["labels"] = T.label_count();
  j["t_residual"] = json::parse(T.nets[0].spec().to_json());
  j["s_residual"] = json::parse(S.nets[0].spec().to_json());
  std::vector<double> wt(w_t.values.data(), w_t.values.data() + w_t.values.size());
  std::vector<double> ws(w_s.values.data(), w_s.values.data() + w_s.values.size());
  j["w_t"] = wt;
  j["w_s"] = ws;
  j["fitted"] = fitted;
  j["final_regression_loss"] = final_regression_loss;
  std::vector<const Mlp*> nets;
  for (const auto& n : T.nets) nets.push_back(&n);
  for (const auto& n : S.nets) nets.push_back(&n);
  j["bn_stats"] = bn_stats_to_json(nets);
  switch (cost.kind()) {
    case CostKind::SqEuclidean: j["cost"] = "sqeuclid"; break;
    case CostKind::SqGreatCircle: j["cost"] = "greatcircle"; break;
    case CostKind::WeightedQuadratic: {
      j["cost"] = "weighted";
      std::vector<double> q(cost.q().data(), cost.q().data() + cost.q().size());
      j["cost_q"] = q;
      j["cost_q_dim"] = cost.q().rows();
      break;
    }
  }
  return j.dump();
}

TransportPair TransportPair::from_json(const std::string& text) {
  const json j = json::parse(text);
  TransportPair p;
  const NetSpec t_spec = NetSpec::from_json(j.at("t_residual").dump());
  const NetSpec s_spec = NetSpec::from_json(j.at("s_residual").dump());
  const int x_dim = j.at("x_dim");
  if (j.at("discrete").get<bool>()) {
    const int labels = j.at("labels");
    p.T = TransportNet::finite(t_spec, x_dim, labels, p.w_t, "T");
    p.S = TransportNet::finite(s_spec, x_dim, labels, p.w_s, "S");
  } else {
    const int z_dim = j.at("z_dim");
    p.T = TransportNet::continuous(t_spec, x_dim, z_dim, p.w_t, "T");
    p.S = TransportNet::continuous(s_spec, x_dim, z_dim, p.w_s, "S");
  }
  const auto wt = j.at("w_t").get<std::vector<double>>();
  const auto ws = j.at("w_s").get<std::vector<double>>();
  if (wt.size() != p.w_t.size() || ws.size() != p.w_s.size())
    throw std::invalid_argument("transport pair parameter mismatch");
  for (std::size_t i = 0; i < wt.size(); ++i)
    p.w_t.values(static_cast<Eigen::Index>(i)) = wt[i];
  for (std::size_t i = 0; i < ws.size(); ++i)
    p.w_s.values(static_cast<Eigen::Index>(i)) = ws[i];
  p.fitted = j.at("fitted");
  p.final_regression_loss = j.at("final_regression_loss");
  if (j.contains("bn_stats")) {
    std::vector<const Mlp*> nets;
    for (const auto& n : p.T.nets) nets.push_back(&n);
    for (const auto& n : p.S.nets) nets.push_back(&n);
    bn_stats_from_json(j.at("bn_stats"), nets);
  }
  const std::string ck = j.at("cost");
  if (ck == "sqeuclid") {
    p.cost = CostSpec::sq_euclidean();
  } else if (ck == "greatcircle") {
    p.cost = CostSpec::sq_great_circle();
  } else {
    const Eigen::Index qd = j.at("cost_q_dim");
    const auto qv = j.at("cost_q").get<std::vector<double>>();
    Eigen::MatrixXd q(qd, qd);
    for (Eigen::Index c = 0, k = 0; c < qd; ++c)
      for (Eigen::Index r = 0; r < qd; ++r) q(r, c) = qv[static_cast<std::size_t>(k++)];
    p.cost = CostSpec::weighted_quadratic(q);
  }
  return p;
}

}  // namespace barynet
