#include "barynet/autodiff.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace barynet::ad {

namespace {
constexpr double kBnEps = 1e-5;

using RowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

Mat softmax_of(const Mat& x) {
  Mat out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    Eigen::RowVectorXd e = (x.row(i).array() - m).exp();
    out.row(i) = e / e.sum();
  }
  return out;
}
}  // namespace

int Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::constant(Mat v) {
  Node n;
  n.op = Op::Constant;
  n.value = std::move(v);
  return push(std::move(n));
}

int Tape::scalar_constant(double v) {
  Mat m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

int Tape::param(const ParamVector& w, std::size_t offset, Eigen::Index rows, Eigen::Index cols) {
  if (offset + static_cast<std::size_t>(rows * cols) > w.size())
    throw std::out_of_range("param segment beyond parameter vector");
  Node n;
  n.op = Op::Param;
  n.param_offset = offset;
  n.value = RowMajorMap(w.values.data() + offset, rows, cols);
  return push(std::move(n));
}

int Tape::linear(int x, int w) {
  const Mat& xv = value(x);
  const Mat& wv = value(w);
  if (xv.cols() != wv.cols()) throw std::invalid_argument("linear: dimension mismatch");
  Node n;
  n.op = Op::Linear;
  n.a = x;
  n.b = w;
  n.value = xv * wv.transpose();
  return push(std::move(n));
}

int Tape::add_row(int x, int bias) {
  const Mat& xv = value(x);
  const Mat& bv = value(bias);
  if (bv.rows() != 1 || bv.cols() != xv.cols()) throw std::invalid_argument("add_row: shape");
  Node n;
  n.op = Op::AddRow;
  n.a = x;
  n.b = bias;
  n.value = xv.rowwise() + bv.row(0);
  return push(std::move(n));
}

int Tape::relu(int x) {
  Node n;
  n.op = Op::Relu;
  n.a = x;
  n.value = value(x).cwiseMax(0.0);
  return push(std::move(n));
}

int Tape::leaky_relu(int x, double slope) {
  Node n;
  n.op = Op::LeakyRelu;
  n.a = x;
  n.scalar = slope;
  n.value = value(x).unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
  return push(std::move(n));
}

int Tape::softmax_rows(int x) {
  Node n;
  n.op = Op::SoftmaxRows;
  n.a = x;
  n.value = softmax_of(value(x));
  return push(std::move(n));
}

int Tape::batch_norm(int x, int gamma, int beta, bool training,
                     const Eigen::RowVectorXd* running_mean,
                     const Eigen::RowVectorXd* running_var) {
  const Mat& xv = value(x);
  Node n;
  n.op = Op::BatchNorm;
  n.a = x;
  n.b = gamma;
  n.c = beta;
  n.scalar = training ? 1.0 : 0.0;
  if (training) {
    n.aux0 = xv.colwise().mean();
    Mat centered = xv.rowwise() - Eigen::RowVectorXd(n.aux0.row(0));
    n.aux1 = centered.array().square().colwise().mean();
  } else {
    if (!running_mean || !running_var)
      throw std::invalid_argument("batch_norm eval mode needs running statistics");
    n.aux0 = *running_mean;
    n.aux1 = *running_var;
  }
  const Eigen::RowVectorXd invstd = (n.aux1.row(0).array() + kBnEps).sqrt().inverse();
  Mat xhat = (xv.rowwise() - Eigen::RowVectorXd(n.aux0.row(0))).array().rowwise() * invstd.array();
  n.value = (xhat.array().rowwise() * value(gamma).row(0).array()).rowwise() +
            value(beta).row(0).array();
  return push(std::move(n));
}

int Tape::add(int a, int b) {
  Node n;
  n.op = Op::Add;
  n.a = a;
  n.b = b;
  n.value = value(a) + value(b);
  return push(std::move(n));
}

int Tape::sub(int a, int b) {
  Node n;
  n.op = Op::Sub;
  n.a = a;
  n.b = b;
  n.value = value(a) - value(b);
  return push(std::move(n));
}

int Tape::mul(int a, int b) {
  Node n;
  n.op = Op::Mul;
  n.a = a;
  n.b = b;
  n.value = value(a).cwiseProduct(value(b));
  return push(std::move(n));
}

int Tape::scale(int a, double s) {
  Node n;
  n.op = Op::ScaleConst;
  n.a = a;
  n.scalar = s;
  n.value = s * value(a);
  return push(std::move(n));
}

int Tape::concat_cols(int a, int b) {
  const Mat& av = value(a);
  const Mat& bv = value(b);
  if (av.rows() != bv.rows()) throw std::invalid_argument("concat_cols: row mismatch");
  Node n;
  n.op = Op::ConcatCols;
  n.a = a;
  n.b = b;
  n.value.resize(av.rows(), av.cols() + bv.cols());
  n.value << av, bv;
  return push(std::move(n));
}

int Tape::sub_scalar(int a, int s) {
  if (value(s).size() != 1) throw std::invalid_argument("sub_scalar: rhs must be 1x1");
  Node n;
  n.op = Op::SubScalar;
  n.a = a;
  n.b = s;
  n.value = value(a).array() - value(s)(0, 0);
  return push(std::move(n));
}

int Tape::mul_scalar(int a, int s) {
  if (value(s).size() != 1) throw std::invalid_argument("mul_scalar: rhs must be 1x1");
  Node n;
  n.op = Op::MulScalar;
  n.a = a;
  n.b = s;
  n.value = value(a) * value(s)(0, 0);
  return push(std::move(n));
}

int Tape::reduce_mean(int a) {
  Node n;
  n.op = Op::ReduceMean;
  n.a = a;
  n.value = Mat::Constant(1, 1, value(a).mean());
  return push(std::move(n));
}

int Tape::reduce_sum(int a) {
  Node n;
  n.op = Op::ReduceSum;
  n.a = a;
  n.value = Mat::Constant(1, 1, value(a).sum());
  return push(std::move(n));
}

int Tape::dot(int a, int b) {
  Node n;
  n.op = Op::Dot;
  n.a = a;
  n.b = b;
  n.value = Mat::Constant(1, 1, value(a).cwiseProduct(value(b)).sum());
  return push(std::move(n));
}

int Tape::col_sum(int a) {
  Node n;
  n.op = Op::ColSum;
  n.a = a;
  n.value = value(a).colwise().sum();
  return push(std::move(n));
}

int Tape::select_col(int a, Eigen::Index col) {
  if (col < 0 || col >= value(a).cols()) throw std::out_of_range("select_col: bad column");
  Node n;
  n.op = Op::SelectCol;
  n.a = a;
  n.scalar = static_cast<double>(col);
  n.value = value(a).col(col);
  return push(std::move(n));
}

int Tape::cost_rows(const CostSpec& cost, int x, int y) {
  const Mat& xv = value(x);
  const Mat& yv = value(y);
  if (xv.rows() != yv.rows() || xv.cols() != yv.cols())
    throw std::invalid_argument("cost_rows: shape mismatch");
  Node n;
  n.op = Op::CostRows;
  n.a = x;
  n.b = y;
  n.cost_idx = static_cast<int>(costs_.size());
  costs_.push_back(cost);
  n.value.resize(xv.rows(), 1);
  for (Eigen::Index i = 0; i < xv.rows(); ++i)
    n.value(i, 0) = cost.eval(xv.row(i).transpose(), yv.row(i).transpose());
  return push(std::move(n));
}

double Tape::value_scalar(int id) const {
  const Mat& v = value(id);
  if (v.size() != 1) throw std::logic_error("value_scalar on non-scalar node");
  return v(0, 0);
}

std::pair<Eigen::RowVectorXd, Eigen::RowVectorXd> Tape::bn_stats(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.op != Op::BatchNorm) throw std::logic_error("bn_stats on non-BatchNorm node");
  return {n.aux0.row(0), n.aux1.row(0)};
}

void Tape::backward(int head, Eigen::Ref<Vec> grad) {
  Node& h = nodes_[static_cast<std::size_t>(head)];
  if (h.value.size() != 1) throw std::logic_error("backward: tape head must be scalar");

  for (auto& n : nodes_)
    if (n.adjoint.size() != 0) n.adjoint.setZero();
  h.adjoint = Mat::Constant(1, 1, 1.0);

  auto adj = [&](int id) -> Mat& {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.adjoint.size() == 0) n.adjoint = Mat::Zero(n.value.rows(), n.value.cols());
    return n.adjoint;
  };

  for (int id = head; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.adjoint.size() == 0) continue;  // not on a path to the head
    const Mat& g = n.adjoint;
    switch (n.op) {
      case Op::Constant:
        break;
      case Op::Param: {
        const auto off = static_cast<Eigen::Index>(n.param_offset);
        for (Eigen::Index r = 0; r < g.rows(); ++r)
          for (Eigen::Index c = 0; c < g.cols(); ++c)
            grad(off + r * g.cols() + c) += g(r, c);
        break;
      }
      case Op::Linear:
        adj(n.a) += g * value(n.b);
        adj(n.b) += g.transpose() * value(n.a);
        break;
      case Op::AddRow:
        adj(n.a) += g;
        adj(n.b).row(0) += g.colwise().sum();
        break;
      case Op::Relu:
        adj(n.a) += (value(n.a).array() > 0.0).cast<double>().matrix().cwiseProduct(g);
        break;
      case Op::LeakyRelu: {
        const double s = n.scalar;
        adj(n.a) += value(n.a)
                        .unaryExpr([s](double v) { return v > 0.0 ? 1.0 : s; })
                        .cwiseProduct(g);
        break;
      }
      case Op::SoftmaxRows: {
        Mat& ga = adj(n.a);
        for (Eigen::Index i = 0; i < g.rows(); ++i) {
          const double inner = g.row(i).dot(n.value.row(i));
          ga.row(i) += n.value.row(i).cwiseProduct(g.row(i).array().matrix() -
                                                   Eigen::RowVectorXd::Constant(g.cols(), inner));
        }
        break;
      }
      case Op::BatchNorm: {
        const Mat& xv = value(n.a);
        const Eigen::RowVectorXd invstd =
            (n.aux1.row(0).array() + kBnEps).sqrt().inverse().matrix();
        const Mat xhat = ((xv.rowwise() - Eigen::RowVectorXd(n.aux0.row(0))).array().rowwise() *
                          invstd.array())
                             .matrix();
        adj(n.b).row(0) += g.cwiseProduct(xhat).colwise().sum();
        adj(n.c).row(0) += g.colwise().sum();
        const Mat dxhat = (g.array().rowwise() * value(n.b).row(0).array()).matrix();
        if (n.scalar > 0.5) {
          // batch statistics carry gradient
          const double nrows = static_cast<double>(xv.rows());
          const Eigen::RowVectorXd sum_dxhat = dxhat.colwise().sum();
          const Eigen::RowVectorXd sum_dxhat_xhat = dxhat.cwiseProduct(xhat).colwise().sum();
          Mat dx = dxhat * nrows;
          dx.rowwise() -= sum_dxhat;
          dx -= xhat * sum_dxhat_xhat.asDiagonal();
          adj(n.a) += (dx.array().rowwise() * (invstd.array() / nrows)).matrix();
        } else {
          adj(n.a) += (dxhat.array().rowwise() * invstd.array()).matrix();
        }
        break;
      }
      case Op::Add:
        adj(n.a) += g;
        adj(n.b) += g;
        break;
      case Op::Sub:
        adj(n.a) += g;
        adj(n.b) -= g;
        break;
      case Op::Mul:
        adj(n.a) += g.cwiseProduct(value(n.b));
        adj(n.b) += g.cwiseProduct(value(n.a));
        break;
      case Op::ScaleConst:
        adj(n.a) += n.scalar * g;
        break;
      case Op::ConcatCols:
        adj(n.a) += g.leftCols(value(n.a).cols());
        adj(n.b) += g.rightCols(value(n.b).cols());
        break;
      case Op::SubScalar:
        adj(n.a) += g;
        adj(n.b)(0, 0) -= g.sum();
        break;
      case Op::MulScalar:
        adj(n.a) += g * value(n.b)(0, 0);
        adj(n.b)(0, 0) += g.cwiseProduct(value(n.a)).sum();
        break;
      case Op::ReduceMean:
        adj(n.a).array() += g(0, 0) / static_cast<double>(value(n.a).size());
        break;
      case Op::ReduceSum:
        adj(n.a).array() += g(0, 0);
        break;
      case Op::Dot:
        adj(n.a) += g(0, 0) * value(n.b);
        adj(n.b) += g(0, 0) * value(n.a);
        break;
      case Op::ColSum:
        adj(n.a).rowwise() += Eigen::RowVectorXd(g.row(0));
        break;
      case Op::SelectCol:
        adj(n.a).col(static_cast<Eigen::Index>(n.scalar)) += g.col(0);
        break;
      case Op::CostRows: {
        const CostSpec& cost = costs_[static_cast<std::size_t>(n.cost_idx)];
        const Mat& xv = value(n.a);
        const Mat& yv = value(n.b);
        Mat& gx = adj(n.a);
        Mat& gy = adj(n.b);
        Eigen::VectorXd dx, dy;
        for (Eigen::Index i = 0; i < xv.rows(); ++i) {
          cost.grad(xv.row(i).transpose(), yv.row(i).transpose(), &dx, &dy);
          gx.row(i) += g(i, 0) * dx.transpose();
          gy.row(i) += g(i, 0) * dy.transpose();
        }
        break;
      }
    }
  }
}

Mat Tape::forward_value(const Node& n) const {
  switch (n.op) {
    case Op::Constant:
    case Op::Param:
      return n.value;
    case Op::Linear:
      return value(n.a) * value(n.b).transpose();
    case Op::AddRow:
      return value(n.a).rowwise() + Eigen::RowVectorXd(value(n.b).row(0));
    case Op::Relu:
      return value(n.a).cwiseMax(0.0);
    case Op::LeakyRelu: {
      const double s = n.scalar;
      return value(n.a).unaryExpr([s](double v) { return v > 0.0 ? v : s * v; });
    }
    case Op::SoftmaxRows:
      return softmax_of(value(n.a));
    case Op::BatchNorm: {
      const Eigen::RowVectorXd invstd = (n.aux1.row(0).array() + kBnEps).sqrt().inverse();
      Mat xhat = (value(n.a).rowwise() - Eigen::RowVectorXd(n.aux0.row(0))).array().rowwise() *
                 invstd.array();
      return (xhat.array().rowwise() * value(n.b).row(0).array()).rowwise() +
             value(n.c).row(0).array();
    }
    case Op::Add:
      return value(n.a) + value(n.b);
    case Op::Sub:
      return value(n.a) - value(n.b);
    case Op::Mul:
      return value(n.a).cwiseProduct(value(n.b));
    case Op::ScaleConst:
      return n.scalar * value(n.a);
    case Op::ConcatCols: {
      Mat v(value(n.a).rows(), value(n.a).cols() + value(n.b).cols());
      v << value(n.a), value(n.b);
      return v;
    }
    case Op::SubScalar:
      return value(n.a).array() - value(n.b)(0, 0);
    case Op::MulScalar:
      return value(n.a) * value(n.b)(0, 0);
    case Op::ReduceMean:
      return Mat::Constant(1, 1, value(n.a).mean());
    case Op::ReduceSum:
      return Mat::Constant(1, 1, value(n.a).sum());
    case Op::Dot:
      return Mat::Constant(1, 1, value(n.a).cwiseProduct(value(n.b)).sum());
    case Op::ColSum:
      return value(n.a).colwise().sum();
    case Op::SelectCol:
      return value(n.a).col(static_cast<Eigen::Index>(n.scalar));
    case Op::CostRows: {
      const CostSpec& cost = costs_[static_cast<std::size_t>(n.cost_idx)];
      Mat v(value(n.a).rows(), 1);
      for (Eigen::Index i = 0; i < v.rows(); ++i)
        v(i, 0) = cost.eval(value(n.a).row(i).transpose(), value(n.b).row(i).transpose());
      return v;
    }
  }
  return {};
}

double Tape::replay_max_diff() {
  double worst = 0.0;
  for (const auto& n : nodes_) {
    const Mat redo = forward_value(n);
    const double d = (redo - n.value).cwiseAbs().maxCoeff();
    worst = std::max(worst, d);
  }
  return worst;
}

double Tape::min_abs_preactivation() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& n : nodes_)
    if (n.op == Op::Relu || n.op == Op::LeakyRelu) {
      const Mat& pre = value(n.a);
      if (pre.size() > 0) m = std::min(m, pre.cwiseAbs().minCoeff());
    }
  return m;
}

double finite_diff_check(const std::function<double(const Vec&)>& loss, const Vec& params,
                         const Vec& analytic_grad, double h) {
  if (h <= 0.0) throw std::invalid_argument("finite_diff_check: h must be positive");
  Vec p = params;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double hi = h * (1.0 + std::abs(p(i)));
    const double saved = p(i);
    p(i) = saved + hi;
    const double up = loss(p);
    p(i) = saved - hi;
    const double dn = loss(p);
    p(i) = saved;
    const double fd = (up - dn) / (2.0 * hi);
    // coordinates whose true derivative is exactly 0 leave the FD quotient as
    // pure cancellation noise; both sides this small count as agreement
    if (std::abs(analytic_grad(i)) < 1e-9 && std::abs(fd) < 1e-9) continue;
    const double rel = std::abs(analytic_grad(i) - fd) / (std::abs(fd) + 1e-8);
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace barynet::ad
