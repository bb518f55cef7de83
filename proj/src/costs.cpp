#include "barynet/costs.hpp"

#include <cmath>

namespace barynet {
namespace {

// gradient of arccos(u)^2 is cut to 0 near |u|=1, where arccos is not
// differentiable (coincident / antipodal points)
constexpr double kGcDerivGuard = 1e-9;

struct GcParts {
  double u;        // clamped cosine of the central angle
  double du_x1, du_x2, du_y1, du_y2;
};

GcParts gc_parts(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const double x1 = x(0), x2 = x(1), y1 = y(0), y2 = y(1);
  GcParts p;
  const double u = std::sin(x2) * std::sin(y2) + std::cos(x2) * std::cos(y2) * std::cos(x1 - y1);
  if (u > 1.0 + 1e-12 || u < -1.0 - 1e-12)
    throw std::domain_error("great-circle cosine outside [-1,1]");
  p.u = std::min(1.0, std::max(-1.0, u));
  p.du_x1 = -std::cos(x2) * std::cos(y2) * std::sin(x1 - y1);
  p.du_x2 = std::cos(x2) * std::sin(y2) - std::sin(x2) * std::cos(y2) * std::cos(x1 - y1);
  p.du_y1 = std::cos(x2) * std::cos(y2) * std::sin(x1 - y1);
  p.du_y2 = std::sin(x2) * std::cos(y2) - std::cos(x2) * std::sin(y2) * std::cos(x1 - y1);
  return p;
}

}  // namespace

CostSpec CostSpec::weighted_quadratic(Eigen::MatrixXd q) {
  if (q.rows() != q.cols()) throw std::invalid_argument("Q must be square");
  if ((q - q.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    throw std::invalid_argument("Q must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw std::invalid_argument("Q must be positive definite");
  CostSpec c;
  c.kind_ = CostKind::WeightedQuadratic;
  c.q_ = std::move(q);
  return c;
}

double CostSpec::eval(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
  if (x.size() != y.size()) throw std::invalid_argument("cost: dimension mismatch");
  switch (kind_) {
    case CostKind::SqEuclidean:
      return (x - y).squaredNorm();
    case CostKind::WeightedQuadratic: {
      if (x.size() != q_.rows()) throw std::invalid_argument("cost: Q dimension mismatch");
      const Eigen::VectorXd d = x - y;
      return d.dot(q_ * d);
    }
    case CostKind::SqGreatCircle: {
      if (x.size() != 2) throw std::invalid_argument("great-circle cost needs (lon, lat)");
      const double a = std::acos(gc_parts(x, y).u);
      return a * a;
    }
  }
  return 0.0;
}

void CostSpec::grad(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                    Eigen::VectorXd* gx, Eigen::VectorXd* gy) const {
  switch (kind_) {
    case CostKind::SqEuclidean: {
      const Eigen::VectorXd d = 2.0 * (x - y);
      if (gx) *gx = d;
      if (gy) *gy = -d;
      return;
    }
    case CostKind::WeightedQuadratic: {
      const Eigen::VectorXd d = 2.0 * (q_ * (x - y));
      if (gx) *gx = d;
      if (gy) *gy = -d;
      return;
    }
    case CostKind::SqGreatCircle: {
      const GcParts p = gc_parts(x, y);
      double dc_du = 0.0;
      if (std::abs(p.u) < 1.0 - kGcDerivGuard)
        dc_du = -2.0 * std::acos(p.u) / std::sqrt(1.0 - p.u * p.u);
      if (gx) {
        gx->resize(2);
        (*gx)(0) = dc_du * p.du_x1;
        (*gx)(1) = dc_du * p.du_x2;
      }
      if (gy) {
        gy->resize(2);
        (*gy)(0) = dc_du * p.du_y1;
        (*gy)(1) = dc_du * p.du_y2;
      }
      return;
    }
  }
}

}  // namespace barynet
