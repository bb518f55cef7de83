#include "barynet/training.hpp"

#include <nlohmann/json.hpp>
#include <stdexcept>

#include "barynet/oracle.hpp"
#include "barynet/rng.hpp"

namespace barynet {

using json = nlohmann::json;

namespace {

std::vector<Eigen::Index> all_rows(Eigen::Index n) {
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)] = i;
  return rows;
}

Eigen::VectorXd sign_vector(std::size_t total, std::size_t tau_end) {
  Eigen::VectorXd s(static_cast<Eigen::Index>(total));
  for (std::size_t i = 0; i < total; ++i)
    s(static_cast<Eigen::Index>(i)) = i < tau_end ? 1.0 : -1.0;
  return s;
}

}  // namespace

FitResult train_saddle(ad::ParamVector& w, const Eigen::VectorXd& j_sign,
                       const BatchLossBuilder& build, Eigen::Index n_sample,
                       const TrainConfig& cfg,
                       const std::function<void(ad::ParamVector&)>& post_step) {
  return train_saddle_slow_block(w, j_sign, build, n_sample, cfg, post_step, 0, 0);
}

FitResult train_saddle_slow_block(ad::ParamVector& w, const Eigen::VectorXd& j_sign,
                                  const BatchLossBuilder& build, Eigen::Index n_sample,
                                  const TrainConfig& cfg,
                                  const std::function<void(ad::ParamVector&)>& post_step,
                                  std::size_t slow_offset, std::size_t slow_count) {
  ad::ParamVector scratch = w;
  auto loss_at = [&](const Eigen::VectorXd& v, const std::vector<Eigen::Index>& rows) {
    scratch.values = v;
    ad::Tape t;
    return t.value_scalar(build(t, scratch, rows));
  };
  auto grad_at = [&](const Eigen::VectorXd& v, const std::vector<Eigen::Index>& rows) {
    scratch.values = v;
    ad::Tape t;
    const int head = build(t, scratch, rows);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(v.size());
    t.backward(head, g);
    return g;
  };

  const std::vector<Eigen::Index> full = all_rows(n_sample);
  const bool full_batch = cfg.batch <= 0 || cfg.batch >= n_sample;
  Rng batch_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  SaddleState omd_state;
  QitdState qitd_state;
  if (cfg.optimizer == SaddleKind::Qitd) {
    qitd_state = QitdState::init(w.values, j_sign, cfg.lr, cfg.gamma, cfg.eps, cfg.beta,
                                 cfg.lr_max);
  } else {
    omd_state.w = w.values;
    omd_state.j_sign = j_sign;
    omd_state.eta = cfg.lr;
    omd_state.validate();
  }

  FitResult out;
  out.curve.reserve(static_cast<std::size_t>(cfg.iters / std::max(cfg.curve_stride, 1L) + 1));

  std::vector<Eigen::Index> rows;
  for (long it = 0; it < cfg.iters; ++it) {
    const std::vector<Eigen::Index>* batch = &full;
    if (!full_batch) {
      rows.resize(static_cast<std::size_t>(cfg.batch));
      for (auto& r : rows)
        r = static_cast<Eigen::Index>(batch_rng.below(static_cast<std::uint64_t>(n_sample)));
      batch = &rows;
    }
    auto loss = [&](const Eigen::VectorXd& v) { return loss_at(v, *batch); };
    auto grad = [&](const Eigen::VectorXd& v) { return grad_at(v, *batch); };

    Eigen::VectorXd* iterate =
        cfg.optimizer == SaddleKind::Qitd ? &qitd_state.s.w : &omd_state.w;
    double* eta = cfg.optimizer == SaddleKind::Qitd ? &qitd_state.s.eta : &omd_state.eta;

    // optional two-time-scale: ascent-only moves on the max block first
    for (int inner = 1; inner < cfg.disc_inner_steps; ++inner) {
      const Eigen::VectorXd g = grad(*iterate);
      for (Eigen::Index i = 0; i < iterate->size(); ++i)
        if (j_sign(i) < 0.0) (*iterate)(i) += *eta * g(i);
      if (post_step) {
        scratch.values = *iterate;
        post_step(scratch);
        *iterate = scratch.values;
      }
    }

    const bool freeze_slow =
        slow_count > 0 && cfg.label_update_every > 1 && it % cfg.label_update_every != 0;
    const Eigen::VectorXd slow_snapshot =
        freeze_slow ? Eigen::VectorXd(iterate->segment(static_cast<Eigen::Index>(slow_offset),
                                                       static_cast<Eigen::Index>(slow_count)))
                    : Eigen::VectorXd();
    switch (cfg.optimizer) {
      case SaddleKind::Qitd:
        qitd_step(qitd_state, loss, grad);
        break;
      case SaddleKind::Omd:
        omd_step(omd_state, grad);
        break;
      case SaddleKind::Gda:
        gda_step(omd_state, grad);
        break;
    }
    if (freeze_slow)
      iterate->segment(static_cast<Eigen::Index>(slow_offset),
                       static_cast<Eigen::Index>(slow_count)) = slow_snapshot;
    if (post_step) {
      scratch.values = *iterate;
      post_step(scratch);
      *iterate = scratch.values;
    }

    if (it % std::max(cfg.curve_stride, 1L) == 0 || it == cfg.iters - 1) {
      CurveRow row;
      row.step = it;
      row.loss = loss_at(*iterate, *batch);
      row.eta = *eta;
      out.curve.push_back(row);
    }
  }

  w.values = cfg.optimizer == SaddleKind::Qitd ? qitd_state.s.w : omd_state.w;
  out.final_loss = out.curve.empty() ? 0.0 : out.curve.back().loss;
  return out;
}

Eigen::VectorXd SupervisedModel::j_sign() const { return sign_vector(w.size(), tau_end); }
Eigen::VectorXd FactorModel::j_sign() const { return sign_vector(w.size(), tau_end); }

SupervisedModel SupervisedModel::continuous(int x_dim, int z_dim, const NetSpec& t_residual,
                                            const NetSpec& psi_y, const NetSpec& psi_z,
                                            Rng& rng) {
  SupervisedModel m;
  m.T = TransportNet::continuous(t_residual, x_dim, z_dim, m.w, "T");
  m.tau_end = m.w.size();
  m.D = DiscriminatorPair::continuous(psi_y, psi_z, m.w, "D");
  m.T.init_params(m.w, rng);
  m.D.init_params(m.w, rng);
  return m;
}

SupervisedModel SupervisedModel::finite(int x_dim, int labels, const NetSpec& t_residual,
                                        const NetSpec& psi_y, Rng& rng) {
  SupervisedModel m;
  m.T = TransportNet::finite(t_residual, x_dim, labels, m.w, "T");
  m.tau_end = m.w.size();
  m.D = DiscriminatorPair::finite(psi_y, labels, m.w, "D");
  m.T.init_params(m.w, rng);
  m.D.init_params(m.w, rng);
  return m;
}

FactorModel FactorModel::deterministic(int x_dim, int z_dim, const NetSpec& label_spec,
                                       const NetSpec& t_residual, const NetSpec& psi_y,
                                       const NetSpec& psi_z, Rng& rng) {
  if (label_spec.input_dim() != x_dim || label_spec.output_dim() != z_dim)
    throw std::invalid_argument("label net must map X to Z");
  FactorModel m;
  m.T = TransportNet::continuous(t_residual, x_dim, z_dim, m.w, "T");
  m.tau_end = m.w.size();
  m.D = DiscriminatorPair::continuous(psi_y, psi_z, m.w, "D");
  m.z_net = LabelNet::deterministic(label_spec, m.w, "z");
  m.T.init_params(m.w, rng);
  m.D.init_params(m.w, rng);
  m.z_net.init_params(m.w, rng);
  return m;
}

FactorModel FactorModel::discrete(int x_dim, int labels, const NetSpec& logits_spec,
                                  const NetSpec& t_residual, const NetSpec& psi_y, Rng& rng) {
  if (logits_spec.input_dim() != x_dim || logits_spec.output_dim() != labels)
    throw std::invalid_argument("logits net must map X to R^K");
  FactorModel m;
  m.T = TransportNet::finite(t_residual, x_dim, labels, m.w, "T");
  m.tau_end = m.w.size();
  m.D = DiscriminatorPair::finite(psi_y, labels, m.w, "D");
  m.z_net = LabelNet::softmax_logits(logits_spec, m.w, "p");
  m.T.init_params(m.w, rng);
  m.D.init_params(m.w, rng);
  m.z_net.init_params(m.w, rng);
  return m;
}

FactorModel FactorModel::discrete_translations(int x_dim, int labels,
                                               const NetSpec& logits_spec, const NetSpec& psi_y,
                                               Rng& rng) {
  if (logits_spec.input_dim() != x_dim || logits_spec.output_dim() != labels)
    throw std::invalid_argument("logits net must map X to R^K");
  FactorModel m;
  m.T = TransportNet::finite_translations(x_dim, labels, m.w, "T");
  m.tau_end = m.w.size();
  m.D = DiscriminatorPair::finite(psi_y, labels, m.w, "D");
  m.z_net = LabelNet::softmax_logits(logits_spec, m.w, "p");
  m.T.init_params(m.w, rng);
  m.D.init_params(m.w, rng);
  m.z_net.init_params(m.w, rng);
  return m;
}

FitResult fit_supervised(SupervisedModel& m, const LabeledSample& sample, const CostSpec& cost,
                         const TrainConfig& cfg) {
  sample.validate(m.T.label_count());
  auto build = [&](ad::Tape& t, const ad::ParamVector& w, const std::vector<Eigen::Index>& rows) {
    const LabeledSample batch = sample.rows(rows);
    const bool full = static_cast<Eigen::Index>(rows.size()) == sample.size();
    return build_supervised_loss(t, batch, m.T, m.D, cost, w, true,
                                 (!full && cfg.center_full_sample) ? &sample : nullptr);
  };
  return train_saddle(m.w, m.j_sign(), build, sample.size(), cfg);
}

FitResult fit_factor_deterministic(FactorModel& m, const Eigen::MatrixXd& xs,
                                   const CostSpec& cost, const TrainConfig& cfg) {
  auto build = [&](ad::Tape& t, const ad::ParamVector& w, const std::vector<Eigen::Index>& rows) {
    Eigen::MatrixXd bx(static_cast<Eigen::Index>(rows.size()), xs.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
      bx.row(static_cast<Eigen::Index>(i)) = xs.row(rows[i]);
    const bool full = static_cast<Eigen::Index>(rows.size()) == xs.rows();
    return build_factor_loss_deterministic(t, bx, m.z_net, m.T, m.D, cost, w, true,
                                           (!full && cfg.center_full_sample) ? &xs : nullptr);
  };
  std::function<void(ad::ParamVector&)> post;
  if (m.z_net.net.spec().clamp_bound) post = [&](ad::ParamVector& w) { m.z_net.clamp(w); };
  return train_saddle_slow_block(m.w, m.j_sign(), build, xs.rows(), cfg, post,
                                 m.z_net.net.offset(), m.z_net.net.param_count());
}

FitResult fit_factor_discrete(FactorModel& m, const Eigen::MatrixXd& xs, const CostSpec& cost,
                              const TrainConfig& cfg) {
  auto build = [&](ad::Tape& t, const ad::ParamVector& w, const std::vector<Eigen::Index>& rows) {
    Eigen::MatrixXd bx(static_cast<Eigen::Index>(rows.size()), xs.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
      bx.row(static_cast<Eigen::Index>(i)) = xs.row(rows[i]);
    return build_factor_loss_discrete(t, bx, m.z_net, m.T, m.D, cost, w, true);
  };
  std::function<void(ad::ParamVector&)> post;
  if (m.z_net.net.spec().clamp_bound) post = [&](ad::ParamVector& w) { m.z_net.clamp(w); };
  return train_saddle_slow_block(m.w, m.j_sign(), build, xs.rows(), cfg, post,
                                 m.z_net.net.offset(), m.z_net.net.param_count());
}

void seed_logits_soft_kmeans(FactorModel& m, const Eigen::MatrixXd& xs, double bandwidth,
                             std::uint64_t seed) {
  const Mlp& net = m.z_net.net;
  if (net.spec().layer_count() != 1)
    throw std::invalid_argument("soft k-means seeding needs a single affine logits layer");
  const int k = net.spec().output_dim();
  const int d = net.spec().input_dim();
  const Eigen::MatrixXd centers = oracle::kmeanspp_centers(xs, k, seed);
  const double h2 = bandwidth * bandwidth;
  for (int j = 0; j < k; ++j) {
    for (int c = 0; c < d; ++c)
      m.w.values(static_cast<Eigen::Index>(net.offset()) + j * d + c) = centers(j, c) / h2;
    m.w.values(static_cast<Eigen::Index>(net.offset()) + k * d + j) =
        -0.5 * centers.row(j).squaredNorm() / h2;
  }
}

std::vector<int> assign_labels(const FactorModel& m, const Eigen::MatrixXd& xs) {
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(xs.rows()));
  for (Eigen::Index i = 0; i < xs.rows(); ++i) {
    const Eigen::VectorXd p = m.z_net.eval(m.w, xs.row(i).transpose());
    Eigen::Index best;
    p.maxCoeff(&best);
    labels.push_back(static_cast<int>(best));
  }
  return labels;
}

Eigen::MatrixXd assign_latents(const FactorModel& m, const Eigen::MatrixXd& xs) {
  Eigen::MatrixXd zs(xs.rows(), m.z_net.net.spec().output_dim());
  for (Eigen::Index i = 0; i < xs.rows(); ++i)
    zs.row(i) = m.z_net.eval(m.w, xs.row(i).transpose()).transpose();
  return zs;
}

namespace {

json spec_to_json(const NetSpec& s) { return json::parse(s.to_json()); }
NetSpec spec_from_json(const json& j) { return NetSpec::from_json(j.dump()); }

json params_to_json(const ad::ParamVector& w) {
  std::vector<double> vals(w.values.data(), w.values.data() + w.values.size());
  return json(vals);
}

void params_from_json(const json& j, ad::ParamVector& w) {
  const auto vals = j.get<std::vector<double>>();
  if (vals.size() != w.size()) throw std::invalid_argument("parameter count mismatch");
  for (std::size_t i = 0; i < vals.size(); ++i)
    w.values(static_cast<Eigen::Index>(i)) = vals[i];
}

std::vector<const Mlp*> supervised_nets(const SupervisedModel& m) {
  std::vector<const Mlp*> nets;
  for (const auto& n : m.T.nets) nets.push_back(&n);
  nets.push_back(&m.D.psi_y);
  if (!m.D.discrete) nets.push_back(&m.D.psi_z);
  return nets;
}

std::vector<const Mlp*> factor_nets(const FactorModel& m) {
  std::vector<const Mlp*> nets;
  for (const auto& n : m.T.nets) nets.push_back(&n);
  nets.push_back(&m.D.psi_y);
  if (!m.D.discrete) nets.push_back(&m.D.psi_z);
  nets.push_back(&m.z_net.net);
  return nets;
}

}  // namespace

std::string SupervisedModel::to_json() const {
  json j;
  j["kind"] = T.discrete ? "supervised_finite" : "supervised_continuous";
  j["x_dim"] = T.x_dim;
  if (T.discrete)
    j["labels"] = T.label_count();
  else
    j["z_dim"] = T.z_dim;
  j["t_residual"] = spec_to_json(T.nets[0].spec());
  j["psi_y"] = spec_to_json(D.psi_y.spec());
  if (!T.discrete) j["psi_z"] = spec_to_json(D.psi_z.spec());
  j["params"] = params_to_json(w);
  j["bn_stats"] = bn_stats_to_json(supervised_nets(*this));
  return j.dump();
}

SupervisedModel SupervisedModel::from_json(const std::string& text) {
  const json j = json::parse(text);
  Rng rng(0);  // params are overwritten below
  SupervisedModel m;
  if (j.at("kind") == "supervised_finite") {
    m = SupervisedModel::finite(j.at("x_dim"), j.at("labels"),
                                spec_from_json(j.at("t_residual")), spec_from_json(j.at("psi_y")),
                                rng);
  } else {
    m = SupervisedModel::continuous(j.at("x_dim"), j.at("z_dim"),
                                    spec_from_json(j.at("t_residual")),
                                    spec_from_json(j.at("psi_y")), spec_from_json(j.at("psi_z")),
                                    rng);
  }
  params_from_json(j.at("params"), m.w);
  if (j.contains("bn_stats")) bn_stats_from_json(j.at("bn_stats"), supervised_nets(m));
  return m;
}

std::string FactorModel::to_json() const {
  json j;
  j["kind"] = T.discrete ? "factor_discrete" : "factor_deterministic";
  j["x_dim"] = T.x_dim;
  if (T.discrete)
    j["labels"] = T.label_count();
  else
    j["z_dim"] = T.z_dim;
  if (T.translations())
    j["t_translations"] = true;
  else
    j["t_residual"] = spec_to_json(T.nets[0].spec());
  j["psi_y"] = spec_to_json(D.psi_y.spec());
  if (!T.discrete) j["psi_z"] = spec_to_json(D.psi_z.spec());
  j["label_net"] = spec_to_json(z_net.net.spec());
  j["params"] = params_to_json(w);
  j["bn_stats"] = bn_stats_to_json(factor_nets(*this));
  return j.dump();
}

FactorModel FactorModel::from_json(const std::string& text) {
  const json j = json::parse(text);
  Rng rng(0);
  FactorModel m;
  if (j.at("kind") == "factor_discrete") {
    if (j.value("t_translations", false))
      m = FactorModel::discrete_translations(j.at("x_dim"), j.at("labels"),
                                             spec_from_json(j.at("label_net")),
                                             spec_from_json(j.at("psi_y")), rng);
    else
      m = FactorModel::discrete(j.at("x_dim"), j.at("labels"), spec_from_json(j.at("label_net")),
                                spec_from_json(j.at("t_residual")), spec_from_json(j.at("psi_y")),
                                rng);
  } else {
    m = FactorModel::deterministic(j.at("x_dim"), j.at("z_dim"),
                                   spec_from_json(j.at("label_net")),
                                   spec_from_json(j.at("t_residual")),
                                   spec_from_json(j.at("psi_y")), spec_from_json(j.at("psi_z")),
                                   rng);
  }
  params_from_json(j.at("params"), m.w);
  if (j.contains("bn_stats")) bn_stats_from_json(j.at("bn_stats"), factor_nets(m));
  return m;
}

}  // namespace barynet
