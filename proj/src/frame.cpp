#include "ergo/frame.hpp"

#include <cmath>

namespace ergo {

double SagittalProjection::forward(double x, double y) const {
  return std::cos(heading) * x + std::sin(heading) * y;
}

Vec2 SagittalProjection::cop(const Eigen::Vector2d& c) const { return {forward(c.x(), c.y()), 0.0}; }

Vec2 SagittalProjection::force(const Vec3& f) const { return {forward(f.x(), f.y()), f.z()}; }

double SagittalProjection::moment(const Vec3& m) const {
  // Component along the rotated lateral axis (-sin h, cos h, 0).
  return -std::sin(heading) * m.x() + std::cos(heading) * m.y();
}

}  // namespace ergo
