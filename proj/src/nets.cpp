#include "barynet/nets.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace barynet {

using json = nlohmann::json;

void NetSpec::validate() const {
  if (widths.size() < 2) throw std::invalid_argument("net needs at least input and output widths");
  for (int w : widths)
    if (w <= 0) throw std::invalid_argument("net widths must be positive");
  if (clamp_bound && *clamp_bound <= 0.0)
    throw std::invalid_argument("clamp bound must be positive");
  if (leaky_slope < 0.0) throw std::invalid_argument("leaky slope must be nonnegative");
}

std::string NetSpec::to_json() const {
  json j;
  j["widths"] = widths;
  std::vector<std::string> acts;
  for (int i = 0; i + 2 < static_cast<int>(widths.size()); ++i)
    acts.push_back(leaky_slope > 0.0 ? "leaky_relu" : "relu");
  j["activations"] = acts;
  json flags;
  flags["leaky_slope"] = leaky_slope;
  flags["bias_free_last"] = bias_free_last;
  flags["batch_norm_hidden"] = batch_norm_hidden;
  flags["zero_init_last"] = zero_init_last;
  if (clamp_bound) flags["clamp_bound"] = *clamp_bound;
  j["flags"] = flags;
  return j.dump();
}

NetSpec NetSpec::from_json(const std::string& text) {
  const json j = json::parse(text);
  NetSpec s;
  s.widths = j.at("widths").get<std::vector<int>>();
  const json& flags = j.at("flags");
  s.leaky_slope = flags.value("leaky_slope", 0.0);
  s.bias_free_last = flags.value("bias_free_last", false);
  s.batch_norm_hidden = flags.value("batch_norm_hidden", false);
  s.zero_init_last = flags.value("zero_init_last", false);
  if (flags.contains("clamp_bound")) s.clamp_bound = flags.at("clamp_bound").get<double>();
  s.validate();
  return s;
}

std::vector<int> NetSpec::parse_arch(const std::string& s) {
  std::vector<int> widths;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, '-')) {
    if (part.empty()) throw std::invalid_argument("bad architecture string: " + s);
    widths.push_back(std::stoi(part));
  }
  if (widths.size() < 2) throw std::invalid_argument("bad architecture string: " + s);
  return widths;
}

Mlp::Mlp(NetSpec spec, ad::ParamVector& store, const std::string& name) : spec_(std::move(spec)) {
  spec_.validate();
  offset_ = store.size();
  const int L = spec_.layer_count();
  for (int i = 0; i < L; ++i) {
    Layer layer;
    layer.in = spec_.widths[static_cast<std::size_t>(i)];
    layer.out = spec_.widths[static_cast<std::size_t>(i) + 1];
    const bool last = (i == L - 1);
    layer.has_bn = spec_.batch_norm_hidden && !last;
    // batch norm subtracts the batch mean, so a bias before it is dead weight
    layer.has_bias = !(last && spec_.bias_free_last) && !layer.has_bn;
    const std::string tag = name + ".l" + std::to_string(i);
    layer.w_off = store.add_segment(tag + ".W", layer.out, layer.in);
    if (layer.has_bias) layer.b_off = store.add_segment(tag + ".b", 1, layer.out);
    if (layer.has_bn) {
      layer.gamma_off = store.add_segment(tag + ".gamma", 1, layer.out);
      layer.beta_off = store.add_segment(tag + ".beta", 1, layer.out);
    }
    layers_.push_back(layer);
  }
  count_ = store.size() - offset_;
  reset_running_stats();
}

void Mlp::reset_running_stats() {
  run_mean_.clear();
  run_var_.clear();
  for (const auto& layer : layers_)
    if (layer.has_bn) {
      run_mean_.push_back(Eigen::RowVectorXd::Zero(layer.out));
      run_var_.push_back(Eigen::RowVectorXd::Ones(layer.out));
    }
}

void Mlp::init_params(ad::ParamVector& w, Rng& rng) const {
  const int L = static_cast<int>(layers_.size());
  for (int i = 0; i < L; ++i) {
    const Layer& layer = layers_[static_cast<std::size_t>(i)];
    const bool last = (i == L - 1);
    const double bound = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
    for (int k = 0; k < layer.out * layer.in; ++k)
      w.values(static_cast<Eigen::Index>(layer.w_off) + k) =
          (last && spec_.zero_init_last) ? 0.0 : rng.uniform(-bound, bound);
    if (layer.has_bias)
      for (int k = 0; k < layer.out; ++k)
        w.values(static_cast<Eigen::Index>(layer.b_off) + k) = 0.0;
    if (layer.has_bn)
      for (int k = 0; k < layer.out; ++k) {
        w.values(static_cast<Eigen::Index>(layer.gamma_off) + k) = 1.0;
        w.values(static_cast<Eigen::Index>(layer.beta_off) + k) = 0.0;
      }
  }
}

int Mlp::forward_collect_bn(ad::Tape& t, const ad::ParamVector& w, int input, bool training,
                            std::vector<int>* bn_nodes) const {
  if (t.value(input).cols() != spec_.input_dim())
    throw std::invalid_argument("forward: input width mismatch");
  int h = input;
  const int L = static_cast<int>(layers_.size());
  std::size_t bn_idx = 0;
  for (int i = 0; i < L; ++i) {
    const Layer& layer = layers_[static_cast<std::size_t>(i)];
    const int wnode = t.param(w, layer.w_off, layer.out, layer.in);
    h = t.linear(h, wnode);
    if (layer.has_bias) h = t.add_row(h, t.param(w, layer.b_off, 1, layer.out));
    const bool last = (i == L - 1);
    if (!last) {
      if (layer.has_bn) {
        const int gamma = t.param(w, layer.gamma_off, 1, layer.out);
        const int beta = t.param(w, layer.beta_off, 1, layer.out);
        h = t.batch_norm(h, gamma, beta, training,
                         training ? nullptr : &run_mean_[bn_idx],
                         training ? nullptr : &run_var_[bn_idx]);
        if (training) {
          // momentum-0.9 running averages, refreshed on every training
          // forward (torch convention); eval reads these
          const auto [bm, bv] = t.bn_stats(h);
          run_mean_[bn_idx] = 0.9 * run_mean_[bn_idx] + 0.1 * bm;
          run_var_[bn_idx] = 0.9 * run_var_[bn_idx] + 0.1 * bv;
        }
        if (bn_nodes) bn_nodes->push_back(h);
        ++bn_idx;
      }
      h = spec_.leaky_slope > 0.0 ? t.leaky_relu(h, spec_.leaky_slope) : t.relu(h);
    }
  }
  return h;
}

int Mlp::forward(ad::Tape& t, const ad::ParamVector& w, int input, bool training) const {
  return forward_collect_bn(t, w, input, training, nullptr);
}

void Mlp::update_running_stats(
    const std::vector<std::pair<Eigen::RowVectorXd, Eigen::RowVectorXd>>& batch_stats) const {
  if (batch_stats.size() != run_mean_.size())
    throw std::invalid_argument("update_running_stats: layer count mismatch");
  for (std::size_t i = 0; i < batch_stats.size(); ++i) {
    run_mean_[i] = 0.9 * run_mean_[i] + 0.1 * batch_stats[i].first;
    run_var_[i] = 0.9 * run_var_[i] + 0.1 * batch_stats[i].second;
  }
}

void Mlp::set_running_stats(std::vector<Eigen::RowVectorXd> means,
                            std::vector<Eigen::RowVectorXd> vars) const {
  if (means.size() != run_mean_.size() || vars.size() != run_var_.size())
    throw std::invalid_argument("set_running_stats: layer count mismatch");
  run_mean_ = std::move(means);
  run_var_ = std::move(vars);
}

Eigen::VectorXd Mlp::eval(const ad::ParamVector& w, const Eigen::VectorXd& x) const {
  if (x.size() != spec_.input_dim()) throw std::invalid_argument("eval: input width mismatch");
  Eigen::VectorXd h = x;
  const int L = static_cast<int>(layers_.size());
  std::size_t bn_idx = 0;
  for (int i = 0; i < L; ++i) {
    const Layer& layer = layers_[static_cast<std::size_t>(i)];
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> W(
        w.values.data() + layer.w_off, layer.out, layer.in);
    Eigen::VectorXd z = W * h;
    if (layer.has_bias)
      z += Eigen::Map<const Eigen::VectorXd>(w.values.data() + layer.b_off, layer.out);
    const bool last = (i == L - 1);
    if (!last) {
      if (layer.has_bn) {
        const Eigen::ArrayXd invstd = (run_var_[bn_idx].transpose().array() + 1e-5).sqrt().inverse();
        Eigen::Map<const Eigen::VectorXd> gamma(w.values.data() + layer.gamma_off, layer.out);
        Eigen::Map<const Eigen::VectorXd> beta(w.values.data() + layer.beta_off, layer.out);
        z = (((z - run_mean_[bn_idx].transpose()).array() * invstd) * gamma.array() +
             beta.array())
                .matrix();
        ++bn_idx;
      }
      const double s = spec_.leaky_slope;
      z = z.unaryExpr([s](double v) { return v > 0.0 ? v : s * v; });
    }
    h = std::move(z);
  }
  return h;
}

Eigen::VectorXd Mlp::jvp(const ad::ParamVector& w, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& dx) const {
  Eigen::VectorXd h = x, dh = dx;
  const int L = static_cast<int>(layers_.size());
  std::size_t bn_idx = 0;
  for (int i = 0; i < L; ++i) {
    const Layer& layer = layers_[static_cast<std::size_t>(i)];
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> W(
        w.values.data() + layer.w_off, layer.out, layer.in);
    Eigen::VectorXd z = W * h;
    Eigen::VectorXd dz = W * dh;
    if (layer.has_bias)
      z += Eigen::Map<const Eigen::VectorXd>(w.values.data() + layer.b_off, layer.out);
    const bool last = (i == L - 1);
    if (!last) {
      if (layer.has_bn) {
        const Eigen::ArrayXd invstd = (run_var_[bn_idx].transpose().array() + 1e-5).sqrt().inverse();
        Eigen::Map<const Eigen::VectorXd> gamma(w.values.data() + layer.gamma_off, layer.out);
        Eigen::Map<const Eigen::VectorXd> beta(w.values.data() + layer.beta_off, layer.out);
        z = (((z - run_mean_[bn_idx].transpose()).array() * invstd) * gamma.array() +
             beta.array())
                .matrix();
        dz = (dz.array() * invstd * gamma.array()).matrix();
        ++bn_idx;
      }
      const double s = spec_.leaky_slope;
      for (Eigen::Index k = 0; k < z.size(); ++k) {
        const double m = z(k) > 0.0 ? 1.0 : s;
        dz(k) *= m;
        z(k) = z(k) > 0.0 ? z(k) : s * z(k);
      }
    }
    h = std::move(z);
    dh = std::move(dz);
  }
  return dh;
}

void Mlp::clamp_params(ad::ParamVector& w, double bound) const {
  for (std::size_t k = offset_; k < offset_ + count_; ++k) {
    double& v = w.values(static_cast<Eigen::Index>(k));
    v = std::min(bound, std::max(-bound, v));
  }
}

TransportNet TransportNet::continuous(const NetSpec& residual_spec, int x_dim, int z_dim,
                                      ad::ParamVector& store, const std::string& name) {
  if (residual_spec.input_dim() != x_dim + z_dim || residual_spec.output_dim() != x_dim)
    throw std::invalid_argument("residual net must map (x,z) to x");
  TransportNet t;
  t.x_dim = x_dim;
  t.z_dim = z_dim;
  t.nets.emplace_back(residual_spec, store, name);
  return t;
}

TransportNet TransportNet::finite(const NetSpec& residual_spec, int x_dim, int labels,
                                  ad::ParamVector& store, const std::string& name) {
  if (residual_spec.input_dim() != x_dim || residual_spec.output_dim() != x_dim)
    throw std::invalid_argument("per-label residual net must map x to x");
  if (labels < 1) throw std::invalid_argument("need at least one label");
  TransportNet t;
  t.x_dim = x_dim;
  t.discrete = true;
  for (int k = 0; k < labels; ++k)
    t.nets.emplace_back(residual_spec, store, name + ".T" + std::to_string(k));
  return t;
}

int TransportNet::apply(ad::Tape& t, const ad::ParamVector& w, int x, int z,
                        bool training) const {
  if (discrete) throw std::logic_error("apply: finite-label transport needs apply_label");
  const int input = t.concat_cols(x, z);
  return t.add(x, nets[0].forward(t, w, input, training));
}

int TransportNet::apply_label(ad::Tape& t, const ad::ParamVector& w, int x, int label,
                              bool training) const {
  if (!discrete) throw std::logic_error("apply_label on continuous transport");
  if (label < 0 || label >= label_count()) throw std::out_of_range("unknown discrete label");
  if (translations()) {
    const int beta = t.param(w, beta_offsets[static_cast<std::size_t>(label)], 1, x_dim);
    return t.add_row(x, beta);
  }
  return t.add(x, nets[static_cast<std::size_t>(label)].forward(t, w, x, training));
}

Eigen::VectorXd TransportNet::eval(const ad::ParamVector& w, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& z) const {
  if (discrete) throw std::logic_error("eval: finite-label transport needs eval_label");
  Eigen::VectorXd input(x.size() + z.size());
  input << x, z;
  return x + nets[0].eval(w, input);
}

Eigen::VectorXd TransportNet::eval_label(const ad::ParamVector& w, const Eigen::VectorXd& x,
                                         int label) const {
  if (!discrete) throw std::logic_error("eval_label on continuous transport");
  if (label < 0 || label >= label_count()) throw std::out_of_range("unknown discrete label");
  if (translations())
    return x + Eigen::Map<const Eigen::VectorXd>(
                   w.values.data() + beta_offsets[static_cast<std::size_t>(label)], x_dim);
  return x + nets[static_cast<std::size_t>(label)].eval(w, x);
}

TransportNet TransportNet::finite_translations(int x_dim, int labels, ad::ParamVector& store,
                                               const std::string& name) {
  if (labels < 1) throw std::invalid_argument("need at least one label");
  TransportNet t;
  t.x_dim = x_dim;
  t.discrete = true;
  for (int k = 0; k < labels; ++k)
    t.beta_offsets.push_back(store.add_segment(name + ".beta" + std::to_string(k), 1, x_dim));
  return t;
}

void TransportNet::init_params(ad::ParamVector& w, Rng& rng) const {
  for (const auto& n : nets) n.init_params(w, rng);
  for (std::size_t off : beta_offsets)
    for (int j = 0; j < x_dim; ++j) w.values(static_cast<Eigen::Index>(off) + j) = 0.0;
}

DiscriminatorPair DiscriminatorPair::continuous(const NetSpec& y_spec, const NetSpec& z_spec,
                                                ad::ParamVector& store, const std::string& name) {
  NetSpec zs = z_spec;
  zs.bias_free_last = true;  // structural: centering removes constants anyway
  DiscriminatorPair d;
  d.psi_y = Mlp(y_spec, store, name + ".psiY");
  d.psi_z = Mlp(zs, store, name + ".psiZ");
  return d;
}

DiscriminatorPair DiscriminatorPair::finite(const NetSpec& y_spec, int labels,
                                            ad::ParamVector& store, const std::string& name) {
  DiscriminatorPair d;
  d.discrete = true;
  d.psi_y = Mlp(y_spec, store, name + ".psiY");
  d.q_offset = store.add_segment(name + ".q", 1, labels);
  d.q_size = labels;
  return d;
}

void DiscriminatorPair::init_params(ad::ParamVector& w, Rng& rng) const {
  psi_y.init_params(w, rng);
  if (discrete) {
    for (int k = 0; k < q_size; ++k)
      w.values(static_cast<Eigen::Index>(q_offset) + k) = 0.0;
  } else {
    psi_z.init_params(w, rng);
  }
}

LabelNet LabelNet::deterministic(NetSpec spec, ad::ParamVector& store, const std::string& name) {
  spec.bias_free_last = true;
  LabelNet l;
  l.net = Mlp(spec, store, name);
  l.kind = LabelNetKind::Deterministic;
  return l;
}

LabelNet LabelNet::softmax_logits(NetSpec spec, ad::ParamVector& store, const std::string& name) {
  if (spec.output_dim() < 2) throw std::invalid_argument("softmax label net needs K >= 2");
  // per-class offsets matter under SoftMax; only a common constant is inert,
  // so the bias-free restriction applies to the deterministic variant only
  LabelNet l;
  l.net = Mlp(spec, store, name);
  l.kind = LabelNetKind::SoftmaxLogits;
  return l;
}

int LabelNet::forward(ad::Tape& t, const ad::ParamVector& w, int x, bool training) const {
  const int logits = net.forward(t, w, x, training);
  return kind == LabelNetKind::SoftmaxLogits ? t.softmax_rows(logits) : logits;
}

Eigen::VectorXd LabelNet::eval(const ad::ParamVector& w, const Eigen::VectorXd& x) const {
  Eigen::VectorXd out = net.eval(w, x);
  if (kind == LabelNetKind::SoftmaxLogits) {
    const double m = out.maxCoeff();
    Eigen::ArrayXd e = (out.array() - m).exp();
    out = (e / e.sum()).matrix();
  }
  return out;
}

void LabelNet::clamp(ad::ParamVector& w) const {
  if (!net.spec().clamp_bound) throw std::logic_error("clamp without configured bound");
  net.clamp_params(w, *net.spec().clamp_bound);
}

void LabelNet::init_params(ad::ParamVector& w, Rng& rng) const { net.init_params(w, rng); }

Eigen::VectorXd softmax_membership(const LabelNet& p, const ad::ParamVector& w,
                                   const Eigen::VectorXd& x) {
  if (p.kind != LabelNetKind::SoftmaxLogits)
    throw std::logic_error("softmax_membership on deterministic label net");
  return p.eval(w, x);
}

json bn_stats_to_json(const std::vector<const Mlp*>& nets) {
  json out = json::array();
  for (const Mlp* n : nets) {
    json per;
    per["means"] = json::array();
    per["vars"] = json::array();
    for (const auto& m : n->running_means())
      per["means"].push_back(std::vector<double>(m.data(), m.data() + m.size()));
    for (const auto& v : n->running_vars())
      per["vars"].push_back(std::vector<double>(v.data(), v.data() + v.size()));
    out.push_back(per);
  }
  return out;
}

void bn_stats_from_json(const json& j, const std::vector<const Mlp*>& nets) {
  if (j.size() != nets.size()) throw std::invalid_argument("batch-norm stats count mismatch");
  for (std::size_t i = 0; i < nets.size(); ++i) {
    std::vector<Eigen::RowVectorXd> means, vars;
    for (const auto& m : j[i].at("means")) {
      const auto v = m.get<std::vector<double>>();
      means.push_back(
          Eigen::Map<const Eigen::RowVectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
    }
    for (const auto& m : j[i].at("vars")) {
      const auto v = m.get<std::vector<double>>();
      vars.push_back(
          Eigen::Map<const Eigen::RowVectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
    }
    nets[i]->set_running_stats(std::move(means), std::move(vars));
  }
}

}  // namespace barynet
