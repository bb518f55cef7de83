#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "barynet/costs.hpp"

namespace barynet::ad {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Named segment inside a flat parameter vector.
struct ParamSegment {
  std::string name;
  Eigen::Index rows = 0, cols = 0;
  std::size_t offset = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows * cols); }
};

// Flat parameter storage shared by every net in a model. Matrix segments are
// flattened row-major.
struct ParamVector {
  Vec values;
  std::vector<ParamSegment> segments;

  std::size_t size() const { return static_cast<std::size_t>(values.size()); }

  // appends a segment, returns its offset
  std::size_t add_segment(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    ParamSegment s{name, rows, cols, static_cast<std::size_t>(values.size())};
    segments.push_back(s);
    values.conservativeResize(values.size() + rows * cols);
    values.tail(rows * cols).setZero();
    return s.offset;
  }

  bool finite() const { return values.allFinite(); }
};

enum class Op : std::uint8_t {
  Constant,
  Param,       // leaf tied to [offset, offset+r*c) of a flat vector
  Linear,      // X (n x in), W (out x in) -> X * W^T
  AddRow,      // X (n x c) + broadcast row (1 x c)
  Relu,
  LeakyRelu,   // scalar = slope
  SoftmaxRows,
  BatchNorm,   // X, gamma (1 x c), beta (1 x c); aux0 = mean, aux1 = var used
  Add,
  Sub,
  Mul,         // elementwise
  ScaleConst,  // scalar = factor
  ConcatCols,
  SubScalar,   // X - broadcast (1 x 1)
  MulScalar,   // X * broadcast (1 x 1)
  ReduceMean,  // -> 1 x 1
  ReduceSum,   // -> 1 x 1
  Dot,         // sum(A .* B) -> 1 x 1
  ColSum,      // n x c -> 1 x c
  SelectCol,   // n x c -> n x 1, scalar = column index
  CostRows,    // rows of X, Y -> per-row cost (n x 1)
};

struct Node {
  Op op;
  int a = -1, b = -1, c = -1;
  Mat value;
  Mat adjoint;
  double scalar = 0.0;
  std::size_t param_offset = 0;
  int cost_idx = -1;
  Mat aux0, aux1;  // batch-norm statistics actually used in the forward pass
};

// Reverse-mode tape. Records one evaluation; nodes are in topological order
// by construction. backward() visits each node exactly once in reverse.
class Tape {
 public:
  int constant(Mat v);
  int scalar_constant(double v);
  int param(const ParamVector& w, std::size_t offset, Eigen::Index rows, Eigen::Index cols);

  int linear(int x, int w);
  int add_row(int x, int bias);
  int relu(int x);
  int leaky_relu(int x, double slope);
  int softmax_rows(int x);
  // training=true: normalize with batch statistics (recorded in the node);
  // training=false: use the supplied running statistics.
  int batch_norm(int x, int gamma, int beta, bool training,
                 const Eigen::RowVectorXd* running_mean = nullptr,
                 const Eigen::RowVectorXd* running_var = nullptr);
  int add(int a, int b);
  int sub(int a, int b);
  int mul(int a, int b);
  int scale(int a, double s);
  int concat_cols(int a, int b);
  int sub_scalar(int a, int s);
  int mul_scalar(int a, int s);
  int reduce_mean(int a);
  int reduce_sum(int a);
  int dot(int a, int b);
  int col_sum(int a);
  int select_col(int a, Eigen::Index col);
  int cost_rows(const CostSpec& cost, int x, int y);

  const Mat& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  double value_scalar(int id) const;
  std::size_t node_count() const { return nodes_.size(); }

  // batch statistics of a BatchNorm node (mean, var), for running updates
  std::pair<Eigen::RowVectorXd, Eigen::RowVectorXd> bn_stats(int id) const;

  // d value(head) / d params, accumulated into grad at each Param node's
  // recorded offset. head must be 1x1.
  void backward(int head, Eigen::Ref<Vec> grad);

  // Re-executes every node from the leaves; returns the max absolute
  // difference against the recorded values (0 for a healthy tape).
  double replay_max_diff();

  // min |pre-activation| over all Relu/LeakyRelu nodes, +inf if none;
  // used to resample finite-difference checks that land on a kink
  double min_abs_preactivation() const;

 private:
  int push(Node n);
  Mat forward_value(const Node& n) const;
  std::vector<Node> nodes_;
  std::vector<CostSpec> costs_;
};

// max over coordinates of |analytic - central FD| / (|central FD| + 1e-8),
// with per-coordinate step h*(1+|p_i|)
double finite_diff_check(const std::function<double(const Vec&)>& loss,
                         const Vec& params, const Vec& analytic_grad, double h);

}  // namespace barynet::ad
