#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace barynet {

enum class CostKind { SqEuclidean, WeightedQuadratic, SqGreatCircle };

// Cost function c(x,y) with analytic gradients, so optimizer tapes can chain
// d c / d y through the transport map.
class CostSpec {
 public:
  CostSpec() : kind_(CostKind::SqEuclidean) {}

  static CostSpec sq_euclidean() { return CostSpec(); }

  static CostSpec weighted_quadratic(Eigen::MatrixXd q);

  // points are (longitude, latitude) in radians
  static CostSpec sq_great_circle() {
    CostSpec c;
    c.kind_ = CostKind::SqGreatCircle;
    return c;
  }

  CostKind kind() const { return kind_; }
  const Eigen::MatrixXd& q() const { return q_; }

  double eval(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;

  // gradients w.r.t. x and y; either output pointer may be null
  void grad(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
            Eigen::VectorXd* gx, Eigen::VectorXd* gy) const;

 private:
  CostKind kind_;
  Eigen::MatrixXd q_;  // SPD, weighted quadratic only
};

}  // namespace barynet
