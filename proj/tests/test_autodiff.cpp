#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "barynet/autodiff.hpp"
#include "barynet/nets.hpp"
#include "barynet/rng.hpp"

using namespace barynet;
using ad::Mat;
using ad::Vec;

namespace {

// scalar-by-scalar forward pass, independent of the tape path
Eigen::VectorXd loop_forward(const NetSpec& spec, const ad::ParamVector& w, std::size_t offset,
                             const Eigen::VectorXd& x) {
  Eigen::VectorXd h = x;
  std::size_t pos = offset;
  for (int layer = 0; layer + 1 < static_cast<int>(spec.widths.size()); ++layer) {
    const int in = spec.widths[static_cast<std::size_t>(layer)];
    const int out = spec.widths[static_cast<std::size_t>(layer) + 1];
    Eigen::VectorXd z = Eigen::VectorXd::Zero(out);
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c)
        z(r) += w.values(static_cast<Eigen::Index>(pos + static_cast<std::size_t>(r * in + c))) *
                h(c);
    pos += static_cast<std::size_t>(out * in);
    const bool last = (layer + 2 == static_cast<int>(spec.widths.size()));
    if (!(last && spec.bias_free_last)) {
      for (int r = 0; r < out; ++r)
        z(r) += w.values(static_cast<Eigen::Index>(pos + static_cast<std::size_t>(r)));
      pos += static_cast<std::size_t>(out);
    }
    if (!last)
      for (int r = 0; r < out; ++r) z(r) = std::max(0.0, z(r));
    h = z;
  }
  return h;
}

double mse_loss(const Mlp& net, const ad::ParamVector& w, const Mat& xs, const Mat& targets,
                ad::Tape* tape_out = nullptr, Vec* grad_out = nullptr) {
  ad::Tape local;
  ad::Tape& t = tape_out ? *tape_out : local;
  const int x = t.constant(xs);
  const int y = net.forward(t, w, x, true);
  const int diff = t.sub(y, t.constant(targets));
  const int head = t.reduce_mean(t.mul(diff, diff));
  if (grad_out) {
    grad_out->setZero(w.values.size());
    t.backward(head, *grad_out);
  }
  return t.value_scalar(head);
}

}  // namespace

TEST_CASE("all-zero weights and biases give the zero vector") {
  ad::ParamVector w;
  NetSpec spec;
  spec.widths = {3, 4, 2};
  Mlp net(spec, w, "n");
  // params stay zero
  const Eigen::VectorXd out = net.eval(w, Eigen::Vector3d(0.3, -1.0, 2.0));
  CHECK(out.isZero(0.0));
}

TEST_CASE("single affine identity layer reproduces the input") {
  ad::ParamVector w;
  NetSpec spec;
  spec.widths = {3, 3};
  Mlp net(spec, w, "n");
  for (int i = 0; i < 3; ++i) w.values(i * 3 + i) = 1.0;  // W = I, b = 0
  const Eigen::Vector3d x(0.5, -2.0, 7.0);
  CHECK((net.eval(w, x) - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("random 2-3-1 ReLU net matches the explicit-loop oracle") {
  ad::ParamVector w;
  NetSpec spec;
  spec.widths = {2, 3, 1};
  Mlp net(spec, w, "n");
  Rng rng(42);
  net.init_params(w, rng);
  for (Eigen::Index i = 0; i < w.values.size(); ++i) w.values(i) += 0.01 * rng.normal();

  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Vector2d x(rng.normal(), rng.normal());
    const Eigen::VectorXd got = net.eval(w, x);
    const Eigen::VectorXd want = loop_forward(spec, w, net.offset(), x);
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("tape forward over a batch equals per-row eval") {
  ad::ParamVector w;
  NetSpec spec;
  spec.widths = {3, 5, 5, 2};
  Mlp net(spec, w, "n");
  Rng rng(7);
  net.init_params(w, rng);

  Mat xs(6, 3);
  for (Eigen::Index i = 0; i < xs.size(); ++i) xs(i / 3, i % 3) = rng.normal();
  ad::Tape t;
  const int y = net.forward(t, w, t.constant(xs), true);
  for (Eigen::Index i = 0; i < 6; ++i) {
    const Eigen::VectorXd row = net.eval(w, xs.row(i).transpose());
    CHECK((t.value(y).row(i).transpose() - row).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("constant loss has zero gradient") {
  ad::ParamVector w;
  w.add_segment("p", 1, 4);
  ad::Tape t;
  t.param(w, 0, 1, 4);  // recorded but unused by the head
  const int head = t.scalar_constant(3.5);
  Vec g = Vec::Zero(4);
  t.backward(head, g);
  CHECK(g.isZero(0.0));
}

TEST_CASE("loss equal to the sum of parameters has unit gradient") {
  ad::ParamVector w;
  w.add_segment("p", 2, 3);
  Rng rng(3);
  for (Eigen::Index i = 0; i < 6; ++i) w.values(i) = rng.normal();
  ad::Tape t;
  const int head = t.reduce_sum(t.param(w, 0, 2, 3));
  Vec g = Vec::Zero(6);
  t.backward(head, g);
  CHECK((g.array() - 1.0).abs().maxCoeff() == 0.0);
}

TEST_CASE("random MLP with mean-square loss matches central finite differences") {
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    ad::ParamVector w;
    NetSpec spec;
    spec.widths = {3, 6, 4, 2};
    Mlp net(spec, w, "n");
    net.init_params(w, rng);

    Mat xs(5, 3), targets(5, 2);
    for (Eigen::Index i = 0; i < xs.size(); ++i) xs(i / 3, i % 3) = rng.normal();
    for (Eigen::Index i = 0; i < targets.size(); ++i) targets(i / 2, i % 2) = rng.normal();

    Vec g;
    ad::Tape tape;
    mse_loss(net, w, xs, targets, &tape, &g);
    if (tape.min_abs_preactivation() < 1e-6) continue;  // resample away from ReLU kinks

    ad::ParamVector scratch = w;
    auto loss = [&](const Vec& p) {
      scratch.values = p;
      return mse_loss(net, scratch, xs, targets);
    };
    CHECK(ad::finite_diff_check(loss, w.values, g, 1e-5) < 1e-5);
  }
}

TEST_CASE("finite_diff_check is ~0 for quadratic |p|^2 at p = 0 and linear sum(p)") {
  ad::ParamVector w;
  w.add_segment("p", 1, 5);

  auto quad_grad = [&](const ad::ParamVector& wv) {
    ad::Tape t;
    const int p = t.param(wv, 0, 1, 5);
    const int head = t.reduce_sum(t.mul(p, p));
    Vec g = Vec::Zero(5);
    t.backward(head, g);
    return g;
  };
  ad::ParamVector scratch = w;
  auto quad = [&](const Vec& p) {
    scratch.values = p;
    return p.squaredNorm();
  };
  CHECK(ad::finite_diff_check(quad, w.values, quad_grad(w), 1e-5) < 1e-9);

  auto lin = [](const Vec& p) { return p.sum(); };
  CHECK(ad::finite_diff_check(lin, w.values, Vec::Ones(5), 1e-5) < 1e-9);
}

TEST_CASE("gradient check over 100 random net/batch configurations") {
  Rng rng(2024);
  int done = 0;
  while (done < 100) {
    ad::ParamVector w;
    NetSpec spec;
    const int in = 1 + static_cast<int>(rng.below(4));
    const int hidden = 2 + static_cast<int>(rng.below(5));
    const int out = 1 + static_cast<int>(rng.below(3));
    spec.widths = {in, hidden, out};
    if (rng.uniform() < 0.5) spec.widths.insert(spec.widths.begin() + 2, hidden);
    spec.leaky_slope = rng.uniform() < 0.3 ? 0.1 : 0.0;
    Mlp net(spec, w, "n");
    net.init_params(w, rng);

    const Eigen::Index rows = 1 + static_cast<Eigen::Index>(rng.below(6));
    Mat xs(rows, in), targets(rows, out);
    for (Eigen::Index i = 0; i < xs.size(); ++i) xs(i % rows, i / rows) = rng.normal();
    for (Eigen::Index i = 0; i < targets.size(); ++i) targets(i % rows, i / rows) = rng.normal();

    Vec g;
    ad::Tape tape;
    mse_loss(net, w, xs, targets, &tape, &g);
    if (tape.min_abs_preactivation() < 1e-6) continue;

    ad::ParamVector scratch = w;
    auto loss = [&](const Vec& p) {
      scratch.values = p;
      return mse_loss(net, scratch, xs, targets);
    };
    CHECK(ad::finite_diff_check(loss, w.values, g, 1e-5) < 1e-5);
    ++done;
  }
}

TEST_CASE("tape replay reproduces recorded values bit-identically") {
  Rng rng(5);
  ad::ParamVector w;
  NetSpec spec;
  spec.widths = {2, 7, 3};
  spec.batch_norm_hidden = true;
  Mlp net(spec, w, "n");
  net.init_params(w, rng);
  Mat xs(8, 2);
  for (Eigen::Index i = 0; i < xs.size(); ++i) xs(i / 2, i % 2) = rng.normal();

  ad::Tape t;
  const int x = t.constant(xs);
  const int y = net.forward(t, w, x, true);
  const int sm = t.softmax_rows(y);
  const int head = t.reduce_mean(t.cost_rows(CostSpec::sq_euclidean(), sm, y));
  (void)head;
  CHECK(t.replay_max_diff() == 0.0);
}

TEST_CASE("two tape evaluations with identical inputs agree bit-identically") {
  Rng rng(6);
  ad::ParamVector w;
  NetSpec spec;
  spec.widths = {3, 9, 1};
  Mlp net(spec, w, "n");
  net.init_params(w, rng);
  Mat xs(4, 3);
  for (Eigen::Index i = 0; i < xs.size(); ++i) xs(i / 3, i % 3) = rng.normal();

  auto run = [&]() {
    ad::Tape t;
    return t.value_scalar(t.reduce_mean(net.forward(t, w, t.constant(xs), true)));
  };
  CHECK(run() == run());
}

TEST_CASE("gradient is linear: grad(a L1 + b L2) = a grad L1 + b grad L2") {
  Rng rng(8);
  ad::ParamVector w;
  NetSpec spec;
  spec.widths = {2, 4, 1};
  Mlp net(spec, w, "n");
  net.init_params(w, rng);
  Mat xs(3, 2), t1(3, 1), t2(3, 1);
  for (Eigen::Index i = 0; i < xs.size(); ++i) xs(i / 2, i % 2) = rng.normal();
  for (Eigen::Index i = 0; i < 3; ++i) {
    t1(i, 0) = rng.normal();
    t2(i, 0) = rng.normal();
  }
  const double a = 0.7, b = -2.3;

  auto grad_of = [&](auto&& head_fn) {
    ad::Tape t;
    const int head = head_fn(t);
    Vec g = Vec::Zero(w.values.size());
    t.backward(head, g);
    return g;
  };
  auto term = [&](ad::Tape& t, const Mat& target) {
    const int y = net.forward(t, w, t.constant(xs), true);
    const int d = t.sub(y, t.constant(target));
    return t.reduce_mean(t.mul(d, d));
  };
  const Vec g1 = grad_of([&](ad::Tape& t) { return term(t, t1); });
  const Vec g2 = grad_of([&](ad::Tape& t) { return term(t, t2); });
  const Vec gc = grad_of([&](ad::Tape& t) {
    return t.add(t.scale(term(t, t1), a), t.scale(term(t, t2), b));
  });
  CHECK((gc - (a * g1 + b * g2)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("batch-norm and softmax gradients pass the finite-difference check") {
  Rng rng(13);
  ad::ParamVector w;
  NetSpec spec;
  spec.widths = {3, 6, 4};
  spec.batch_norm_hidden = true;
  spec.leaky_slope = 0.1;
  Mlp net(spec, w, "n");
  net.init_params(w, rng);
  Mat xs(7, 3), targets(7, 4);
  for (Eigen::Index i = 0; i < xs.size(); ++i) xs(i / 3, i % 3) = rng.normal();
  for (Eigen::Index i = 0; i < targets.size(); ++i) targets(i / 4, i % 4) = 0.25;

  ad::ParamVector scratch = w;
  auto loss_val = [&](const Vec& p) {
    scratch.values = p;
    ad::Tape t;
    const int y = t.softmax_rows(net.forward(t, scratch, t.constant(xs), true));
    const int d = t.sub(y, t.constant(targets));
    return t.value_scalar(t.reduce_mean(t.mul(d, d)));
  };
  ad::Tape t;
  const int y = t.softmax_rows(net.forward(t, w, t.constant(xs), true));
  const int d = t.sub(y, t.constant(targets));
  const int head = t.reduce_mean(t.mul(d, d));
  Vec g = Vec::Zero(w.values.size());
  t.backward(head, g);
  REQUIRE(t.min_abs_preactivation() > 1e-6);
  CHECK(ad::finite_diff_check(loss_val, w.values, g, 1e-6) < 1e-5);
}

TEST_CASE("every remaining op has a correct adjoint (composite graph FD check)") {
  Rng rng(17);
  ad::ParamVector w;
  w.add_segment("a", 4, 3);
  w.add_segment("s", 1, 1);
  for (Eigen::Index i = 0; i < w.values.size(); ++i) w.values(i) = rng.normal();

  auto build = [&](ad::Tape& t, const ad::ParamVector& wv) {
    const int a = t.param(wv, 0, 4, 3);
    const int s = t.param(wv, 12, 1, 1);
    const int cat = t.concat_cols(a, t.mul_scalar(a, s));          // 4 x 6
    const int shifted = t.sub_scalar(cat, t.reduce_mean(cat));     // centering
    const int cols = t.col_sum(shifted);                           // 1 x 6
    const int picked = t.select_col(shifted, 2);                   // 4 x 1
    const int led = t.leaky_relu(picked, 0.1);
    const int mixed = t.add(t.dot(cols, cols), t.reduce_sum(t.mul(led, led)));
    return t.add(mixed, t.scale(t.dot(a, a), 0.5));
  };
  ad::Tape t;
  const int head = build(t, w);
  Vec g = Vec::Zero(w.values.size());
  t.backward(head, g);
  REQUIRE(t.min_abs_preactivation() > 1e-6);

  ad::ParamVector scratch = w;
  auto loss = [&](const Vec& p) {
    scratch.values = p;
    ad::Tape tt;
    return tt.value_scalar(build(tt, scratch));
  };
  CHECK(ad::finite_diff_check(loss, w.values, g, 1e-6) < 1e-5);
  CHECK(t.replay_max_diff() == 0.0);
}
