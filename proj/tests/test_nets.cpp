#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "barynet/nets.hpp"
#include "barynet/rng.hpp"

using namespace barynet;

namespace {
NetSpec residual_spec(std::vector<int> widths) {
  NetSpec s;
  s.widths = std::move(widths);
  return s;
}
}  // namespace

TEST_CASE("zero residual parameters give the identity transport") {
  ad::ParamVector w;
  const TransportNet T = TransportNet::continuous(residual_spec({3, 5, 2}), 2, 1, w, "T");
  Rng rng(1);
  for (int i = 0; i < 10; ++i) {
    const Eigen::Vector2d x(rng.normal(), rng.normal());
    const Eigen::VectorXd z = Eigen::VectorXd::Constant(1, rng.normal());
    CHECK((T.eval(w, x, z) - x).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("constant residual 0.5 shifts the input by 0.5") {
  // R(x,z) = 0.5: single affine layer, zero weights, bias 0.5
  ad::ParamVector w;
  const TransportNet T = TransportNet::continuous(residual_spec({2, 1}), 1, 1, w, "T");
  w.values(2) = 0.5;  // bias after the 1x2 weight block
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 1.25);
  const Eigen::VectorXd z = Eigen::VectorXd::Constant(1, -0.3);
  CHECK(T.eval(w, x, z)(0) == doctest::Approx(1.75).epsilon(1e-15));
}

TEST_CASE("random seeded transport equals x plus an independently evaluated residual") {
  ad::ParamVector w;
  const TransportNet T = TransportNet::continuous(residual_spec({3, 4, 2}), 2, 1, w, "T");
  Rng rng(99);
  T.init_params(w, rng);
  // hand evaluation with explicit loops
  const Eigen::Vector2d x(0.3, -0.7);
  const Eigen::VectorXd z = Eigen::VectorXd::Constant(1, 0.2);
  Eigen::Vector3d in(x(0), x(1), z(0));
  Eigen::VectorXd h = Eigen::VectorXd::Zero(4);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 3; ++c) h(r) += w.values(r * 3 + c) * in(c);
    h(r) += w.values(12 + r);
    h(r) = std::max(0.0, h(r));
  }
  Eigen::Vector2d res = Eigen::Vector2d::Zero();
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 4; ++c) res(r) += w.values(16 + r * 4 + c) * h(c);
    res(r) += w.values(24 + r);
  }
  CHECK((T.eval(w, x, z) - (x + res)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("finite-label transport uses one net per label and rejects unknown labels") {
  ad::ParamVector w;
  const TransportNet T = TransportNet::finite(residual_spec({2, 3, 2}), 2, 3, w, "T");
  Rng rng(5);
  T.init_params(w, rng);
  const Eigen::Vector2d x(0.1, 0.2);
  // nets are independent: perturb net 1, net 0 output unchanged
  const Eigen::VectorXd before = T.eval_label(w, x, 0);
  w.values(static_cast<Eigen::Index>(T.nets[1].offset())) += 1.0;
  CHECK((T.eval_label(w, x, 0) - before).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS(T.eval_label(w, x, 3));
  CHECK_THROWS(T.eval_label(w, x, -1));
}

TEST_CASE("softmax membership: zero logits give the uniform vector") {
  ad::ParamVector w;
  NetSpec s = residual_spec({2, 3});
  const LabelNet p = LabelNet::softmax_logits(s, w, "p");
  const Eigen::VectorXd m = softmax_membership(p, w, Eigen::Vector2d(4.0, -1.0));
  for (int k = 0; k < 3; ++k) CHECK(m(k) == doctest::Approx(1.0 / 3).epsilon(1e-15));
}

TEST_CASE("softmax of logits (ln 2, 0, 0) is (1/2, 1/4, 1/4)") {
  ad::ParamVector w;
  NetSpec s = residual_spec({1, 3});
  const LabelNet p = LabelNet::softmax_logits(s, w, "p");
  // bias-free last layer: logits = W x with x = 1
  w.values(0) = std::log(2.0);
  w.values(1) = 0.0;
  w.values(2) = 0.0;
  const Eigen::VectorXd m = softmax_membership(p, w, Eigen::VectorXd::Constant(1, 1.0));
  CHECK(m(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(m(1) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(m(2) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("softmax membership matches exp/normalize computed with explicit summation") {
  ad::ParamVector w;
  NetSpec s = residual_spec({3, 4, 4});
  const LabelNet p = LabelNet::softmax_logits(s, w, "p");
  Rng rng(11);
  p.init_params(w, rng);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Vector3d x(rng.normal(), rng.normal(), rng.normal());
    const Eigen::VectorXd logits = p.net.eval(w, x);
    double denom = 0.0;
    for (int k = 0; k < 4; ++k) denom += std::exp(logits(k));
    const Eigen::VectorXd m = softmax_membership(p, w, x);
    CHECK(m.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.minCoeff() > 0.0);
    for (int k = 0; k < 4; ++k)
      CHECK(m(k) == doctest::Approx(std::exp(logits(k)) / denom).epsilon(1e-12));
  }
}

TEST_CASE("softmax is invariant under a constant logit shift") {
  ad::ParamVector w;
  NetSpec s = residual_spec({1, 3});
  const LabelNet p = LabelNet::softmax_logits(s, w, "p");
  Rng rng(12);
  for (Eigen::Index i = 0; i < 3; ++i) w.values(i) = rng.normal();
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 1.0);
  const Eigen::VectorXd base = softmax_membership(p, w, x);
  for (Eigen::Index i = 0; i < 3; ++i) w.values(i) += 7.5;  // shifts every logit by 7.5
  CHECK((softmax_membership(p, w, x) - base).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("clamp keeps interior parameters and clips the rest") {
  ad::ParamVector w;
  NetSpec s = residual_spec({2, 1});
  s.clamp_bound = 0.1;
  const LabelNet z = LabelNet::deterministic(s, w, "z");
  w.values(0) = 0.05;
  w.values(1) = -0.02;
  z.clamp(w);
  CHECK(w.values(0) == 0.05);
  CHECK(w.values(1) == -0.02);
  w.values(0) = 0.5;
  w.values(1) = -0.3;
  z.clamp(w);
  CHECK(w.values(0) == 0.1);
  CHECK(w.values(1) == -0.1);
}

TEST_CASE("clamp matches a scalar min/max loop and is bitwise idempotent") {
  ad::ParamVector w;
  NetSpec s = residual_spec({3, 6, 2});
  s.clamp_bound = 0.1;
  const LabelNet z = LabelNet::deterministic(s, w, "z");
  Rng rng(21);
  for (Eigen::Index i = 0; i < w.values.size(); ++i) w.values(i) = rng.normal();
  Eigen::VectorXd expect = w.values;
  for (Eigen::Index i = 0; i < expect.size(); ++i)
    expect(i) = std::min(0.1, std::max(-0.1, expect(i)));
  z.clamp(w);
  CHECK((w.values - expect).cwiseAbs().maxCoeff() == 0.0);
  const Eigen::VectorXd once = w.values;
  z.clamp(w);
  CHECK((w.values - once).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("psi^Z last layer is structurally bias-free") {
  ad::ParamVector w;
  const DiscriminatorPair d =
      DiscriminatorPair::continuous(residual_spec({2, 4, 1}), residual_spec({1, 5, 1}), w, "D");
  Rng rng(31);
  d.init_params(w, rng);
  // zeroing the last hidden layer's inputs must force output 0
  ad::ParamVector wz = w;
  const Mlp& pz = d.psi_z;
  // zero all params except the final layer's weights: output = W_last * 0 = 0
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 0.7);
  for (std::size_t i = pz.offset(); i < pz.offset() + pz.param_count(); ++i)
    wz.values(static_cast<Eigen::Index>(i)) = 0.0;
  // restore only the final weight block: spec 1-5-1 bias-free last => last 5 entries
  const std::size_t end = pz.offset() + pz.param_count();
  for (std::size_t i = end - 5; i < end; ++i)
    wz.values(static_cast<Eigen::Index>(i)) = w.values(static_cast<Eigen::Index>(i));
  CHECK(pz.eval(wz, x)(0) == 0.0);
  // param count: 1*5 + 5 (hidden) + 5*1 (bias-free last) = 15
  CHECK(pz.param_count() == 15);
}

TEST_CASE("discriminator pair final layers start at zero; transport starts at identity") {
  ad::ParamVector w;
  NetSpec y_spec = residual_spec({2, 6, 6, 1});
  y_spec.zero_init_last = true;
  NetSpec z_spec = residual_spec({1, 5, 1});
  z_spec.zero_init_last = true;
  const DiscriminatorPair d = DiscriminatorPair::continuous(y_spec, z_spec, w, "D");
  NetSpec t_spec = residual_spec({3, 7, 7, 2});
  t_spec.zero_init_last = true;
  const TransportNet T = TransportNet::continuous(t_spec, 2, 1, w, "T");
  Rng rng(41);
  d.init_params(w, rng);
  T.init_params(w, rng);
  const Eigen::Vector2d x(0.4, -1.1);
  const Eigen::VectorXd z = Eigen::VectorXd::Constant(1, 0.6);
  CHECK(d.psi_y.eval(w, x)(0) == 0.0);
  CHECK(d.psi_z.eval(w, z)(0) == 0.0);
  CHECK((T.eval(w, x, z) - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("NetSpec serializes to JSON and back") {
  NetSpec s = residual_spec({3, 7, 7, 2});
  s.leaky_slope = 0.1;
  s.bias_free_last = true;
  s.batch_norm_hidden = true;
  s.clamp_bound = 0.1;
  const NetSpec back = NetSpec::from_json(s.to_json());
  CHECK(back.widths == s.widths);
  CHECK(back.leaky_slope == s.leaky_slope);
  CHECK(back.bias_free_last == s.bias_free_last);
  CHECK(back.batch_norm_hidden == s.batch_norm_hidden);
  CHECK(back.clamp_bound.has_value());
  CHECK(*back.clamp_bound == 0.1);
}

TEST_CASE("architecture strings parse the a-b-c-d notation") {
  CHECK(NetSpec::parse_arch("3-7-7-2") == std::vector<int>{3, 7, 7, 2});
  CHECK(NetSpec::parse_arch("1-5-1") == std::vector<int>{1, 5, 1});
  CHECK_THROWS(NetSpec::parse_arch("3"));
  CHECK_THROWS(NetSpec::parse_arch("3--2"));
}

TEST_CASE("spec validation rejects bad widths and bounds") {
  NetSpec s;
  s.widths = {2, 0, 1};
  CHECK_THROWS(s.validate());
  s.widths = {2, 3, 1};
  s.clamp_bound = -0.5;
  CHECK_THROWS(s.validate());
}

TEST_CASE("forward-mode jvp matches finite differences of eval") {
  ad::ParamVector w;
  NetSpec s = residual_spec({3, 8, 8, 2});
  s.leaky_slope = 0.1;
  Mlp net(s, w, "n");
  Rng rng(51);
  net.init_params(w, rng);
  const double h = 1e-7;
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::Vector3d x(rng.normal(), rng.normal(), rng.normal());
    Eigen::Vector3d v(rng.normal(), rng.normal(), rng.normal());
    const Eigen::VectorXd jv = net.jvp(w, x, v);
    const Eigen::VectorXd fd = (net.eval(w, x + h * v) - net.eval(w, x - h * v)) / (2 * h);
    CHECK((jv - fd).cwiseAbs().maxCoeff() < 1e-6);
  }
}
