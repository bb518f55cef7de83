#pragma once

#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <string>
#include <vector>

#include "barynet/autodiff.hpp"
#include "barynet/rng.hpp"

namespace barynet {

// Feed-forward architecture in the `a-b-c-d` notation: widths per layer,
// one activation on every hidden layer, optional batch norm on hidden
// layers, optional bias-free / zero-initialized last layer.
struct NetSpec {
  std::vector<int> widths;
  double leaky_slope = 0.0;  // 0 -> plain ReLU on hidden layers
  bool bias_free_last = false;
  bool batch_norm_hidden = false;
  bool zero_init_last = false;
  std::optional<double> clamp_bound;

  int input_dim() const { return widths.front(); }
  int output_dim() const { return widths.back(); }
  int layer_count() const { return static_cast<int>(widths.size()) - 1; }

  void validate() const;

  std::string to_json() const;
  static NetSpec from_json(const std::string& text);

  // "3-7-7-2" -> widths {3,7,7,2}
  static std::vector<int> parse_arch(const std::string& s);
};

// One MLP whose parameters live in a segment of a shared flat vector.
// Layout per layer: W (out x in row-major), then bias (unless suppressed),
// then batch-norm gamma and beta on hidden layers when enabled.
class Mlp {
 public:
  Mlp() = default;
  Mlp(NetSpec spec, ad::ParamVector& store, const std::string& name);

  const NetSpec& spec() const { return spec_; }
  std::size_t offset() const { return offset_; }
  std::size_t param_count() const { return count_; }

  void init_params(ad::ParamVector& w, Rng& rng) const;

  // tape-recorded forward over a batch node (n x input_dim)
  int forward(ad::Tape& t, const ad::ParamVector& w, int input, bool training) const;

  // plain forward for a single point (eval mode; uses running stats if BN)
  Eigen::VectorXd eval(const ad::ParamVector& w, const Eigen::VectorXd& x) const;

  // forward-mode directional derivative: returns J(x) * dx (eval mode)
  Eigen::VectorXd jvp(const ad::ParamVector& w, const Eigen::VectorXd& x,
                      const Eigen::VectorXd& dx) const;

  // clamps every parameter of this net into [-bound, bound]
  void clamp_params(ad::ParamVector& w, double bound) const;

  // running batch-norm statistics (per hidden layer), momentum 0.9 updates
  void reset_running_stats();
  void update_running_stats(const std::vector<std::pair<Eigen::RowVectorXd, Eigen::RowVectorXd>>&
                                batch_stats) const;
  const std::vector<Eigen::RowVectorXd>& running_means() const { return run_mean_; }
  const std::vector<Eigen::RowVectorXd>& running_vars() const { return run_var_; }
  void set_running_stats(std::vector<Eigen::RowVectorXd> means,
                         std::vector<Eigen::RowVectorXd> vars) const;
  // tape forward that also reports each BN node id, for stat harvesting
  int forward_collect_bn(ad::Tape& t, const ad::ParamVector& w, int input, bool training,
                         std::vector<int>* bn_nodes) const;

 private:
  struct Layer {
    std::size_t w_off = 0, b_off = 0, gamma_off = 0, beta_off = 0;
    int in = 0, out = 0;
    bool has_bias = true, has_bn = false;
  };
  NetSpec spec_;
  std::vector<Layer> layers_;
  std::size_t offset_ = 0, count_ = 0;
  mutable std::vector<Eigen::RowVectorXd> run_mean_, run_var_;
};

// Residual transport map. Continuous labels: T(x,z) = x + R([x,z]) with a
// single net R. Finite labels: one net per label, T^k(x) = x + R_k(x), or
// pure translations T^k(x) = x + beta_k (the first-moment / k-means regime).
struct TransportNet {
  std::vector<Mlp> nets;  // size 1 (continuous) or K (finite); empty if translations
  std::vector<std::size_t> beta_offsets;  // translation mode: one row per label
  int x_dim = 0, z_dim = 0;
  bool discrete = false;

  static TransportNet continuous(const NetSpec& residual_spec, int x_dim, int z_dim,
                                 ad::ParamVector& store, const std::string& name);
  static TransportNet finite(const NetSpec& residual_spec, int x_dim, int labels,
                             ad::ParamVector& store, const std::string& name);
  static TransportNet finite_translations(int x_dim, int labels, ad::ParamVector& store,
                                          const std::string& name);

  bool translations() const { return !beta_offsets.empty(); }

  int label_count() const {
    if (!discrete) return 0;
    return translations() ? static_cast<int>(beta_offsets.size())
                          : static_cast<int>(nets.size());
  }

  int apply(ad::Tape& t, const ad::ParamVector& w, int x, int z, bool training) const;
  int apply_label(ad::Tape& t, const ad::ParamVector& w, int x, int label, bool training) const;

  Eigen::VectorXd eval(const ad::ParamVector& w, const Eigen::VectorXd& x,
                       const Eigen::VectorXd& z) const;
  Eigen::VectorXd eval_label(const ad::ParamVector& w, const Eigen::VectorXd& x, int label) const;

  void init_params(ad::ParamVector& w, Rng& rng) const;
};

// psi^Y over Y paired with psi^Z over Z. For finite labels psi^Z collapses
// to a vector q in R^K. psi^Z's last layer carries no bias (the centering
// removes any constant anyway).
struct DiscriminatorPair {
  Mlp psi_y;
  Mlp psi_z;            // continuous labels only
  std::size_t q_offset = 0;
  int q_size = 0;       // finite labels only
  bool discrete = false;

  static DiscriminatorPair continuous(const NetSpec& y_spec, const NetSpec& z_spec,
                                      ad::ParamVector& store, const std::string& name);
  static DiscriminatorPair finite(const NetSpec& y_spec, int labels, ad::ParamVector& store,
                                  const std::string& name);

  void init_params(ad::ParamVector& w, Rng& rng) const;
};

enum class LabelNetKind { Deterministic, SoftmaxLogits };

// z_theta : X -> Z with a bias-free last layer, optionally Lipschitz-limited
// by clamping all parameters after each optimizer step; or a logits net
// whose SoftMax gives membership probabilities over K clusters.
struct LabelNet {
  Mlp net;
  LabelNetKind kind = LabelNetKind::Deterministic;

  static LabelNet deterministic(NetSpec spec, ad::ParamVector& store, const std::string& name);
  static LabelNet softmax_logits(NetSpec spec, ad::ParamVector& store, const std::string& name);

  // deterministic: z(x); logits: membership rows (n x K)
  int forward(ad::Tape& t, const ad::ParamVector& w, int x, bool training) const;
  Eigen::VectorXd eval(const ad::ParamVector& w, const Eigen::VectorXd& x) const;

  void clamp(ad::ParamVector& w) const;
  void init_params(ad::ParamVector& w, Rng& rng) const;
};

// membership probabilities of a logits net, as plain values
Eigen::VectorXd softmax_membership(const LabelNet& p, const ad::ParamVector& w,
                                   const Eigen::VectorXd& x);

// batch-norm running statistics of a net list, for model (de)serialization
nlohmann::json bn_stats_to_json(const std::vector<const Mlp*>& nets);
void bn_stats_from_json(const nlohmann::json& j, const std::vector<const Mlp*>& nets);

}  // namespace barynet
