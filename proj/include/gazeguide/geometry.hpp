#ifndef GAZEGUIDE_GEOMETRY_HPP
#define GAZEGUIDE_GEOMETRY_HPP

// Rays, boxes, view frustums and rigid transforms. Right-handed, +Y up,
// meters. Everything here is a pure function of its arguments.

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gazeguide {

class GeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DegenerateCorrespondences : public GeometryError {
 public:
  using GeometryError::GeometryError;
};

template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;

template <typename Scalar>
constexpr Scalar deg_to_rad(Scalar deg) {
  return deg * std::numbers::pi_v<Scalar> / Scalar(180);
}

template <typename Scalar>
constexpr Scalar rad_to_deg(Scalar rad) {
  return rad * Scalar(180) / std::numbers::pi_v<Scalar>;
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& v) {
  return v.array().isFinite().all();
}

template <typename Scalar>
Vec3<Scalar> require_unit(const Vec3<Scalar>& v, const char* what) {
  if (!all_finite(v)) throw GeometryError(std::string(what) + " is not finite");
  const Scalar n = v.norm();
  if (!(n > Scalar(0))) throw GeometryError(std::string(what) + " has zero length");
  return v / n;
}

/// Half-line origin + t * direction, t >= 0. The direction is normalized on
/// construction.
template <typename Scalar>
class Ray {
 public:
  Ray(const Vec3<Scalar>& origin, const Vec3<Scalar>& direction)
      : origin_(origin), direction_(require_unit(direction, "ray direction")) {
    if (!all_finite(origin)) throw GeometryError("ray origin is not finite");
  }

  const Vec3<Scalar>& origin() const { return origin_; }
  const Vec3<Scalar>& direction() const { return direction_; }

  friend bool operator==(const Ray&, const Ray&) = default;

 private:
  Vec3<Scalar> origin_;
  Vec3<Scalar> direction_;
};

template <typename Scalar>
class Aabb {
 public:
  Aabb(const Vec3<Scalar>& center, const Vec3<Scalar>& half_extents)
      : center_(center), half_(half_extents) {
    if (!all_finite(center) || !all_finite(half_extents))
      throw GeometryError("box is not finite");
    if ((half_extents.array() <= Scalar(0)).any())
      throw GeometryError("box half extents must be positive");
  }

  const Vec3<Scalar>& center() const { return center_; }
  const Vec3<Scalar>& half_extents() const { return half_; }
  Vec3<Scalar> min() const { return center_ - half_; }
  Vec3<Scalar> max() const { return center_ + half_; }

  bool contains(const Vec3<Scalar>& p) const {
    return ((p - center_).cwiseAbs().array() <= half_.array()).all();
  }

  Aabb recentered(const Vec3<Scalar>& c) const { return Aabb(c, half_); }

  friend bool operator==(const Aabb&, const Aabb&) = default;

 private:
  Vec3<Scalar> center_;
  Vec3<Scalar> half_;
};

/// Rotation followed by translation: x -> R x + t.
template <typename Scalar>
struct RigidTransform {
  Eigen::Quaternion<Scalar> rotation = Eigen::Quaternion<Scalar>::Identity();
  Vec3<Scalar> translation = Vec3<Scalar>::Zero();

  Vec3<Scalar> apply(const Vec3<Scalar>& p) const { return rotation * p + translation; }

  RigidTransform inverse() const {
    const Eigen::Quaternion<Scalar> inv = rotation.conjugate();
    return {inv, -(inv * translation)};
  }

  RigidTransform operator*(const RigidTransform& rhs) const {
    return {(rotation * rhs.rotation).normalized(), rotation * rhs.translation + translation};
  }

  static RigidTransform identity() { return {}; }
};

/// Rectangular viewing volume with symmetric angular half-fields.
template <typename Scalar>
class Frustum {
 public:
  Frustum(const Vec3<Scalar>& apex, const Vec3<Scalar>& forward, const Vec3<Scalar>& up,
          Scalar hfov_deg, Scalar vfov_deg)
      : apex_(apex),
        forward_(require_unit(forward, "frustum forward")),
        up_(require_unit(up, "frustum up")),
        hfov_deg_(hfov_deg),
        vfov_deg_(vfov_deg) {
    if (!all_finite(apex)) throw GeometryError("frustum apex is not finite");
    if (std::abs(forward_.dot(up_)) > Scalar(1e-6))
      throw GeometryError("frustum forward and up are not orthogonal");
    if (!(hfov_deg > 0 && hfov_deg < 180 && vfov_deg > 0 && vfov_deg < 180))
      throw GeometryError("frustum field of view must be in (0, 180) degrees");
  }

  /// Viewer at `apex` looking along `forward`, with up taken from world +Y
  /// (or +Z when forward is vertical).
  static Frustum looking_along(const Vec3<Scalar>& apex, const Vec3<Scalar>& forward,
                               Scalar hfov_deg, Scalar vfov_deg) {
    const Vec3<Scalar> f = require_unit(forward, "frustum forward");
    Vec3<Scalar> ref = Vec3<Scalar>::UnitY();
    if (std::abs(f.dot(ref)) > Scalar(0.999)) ref = Vec3<Scalar>::UnitZ();
    const Vec3<Scalar> up = (ref - f * f.dot(ref)).normalized();
    return Frustum(apex, f, up, hfov_deg, vfov_deg);
  }

  const Vec3<Scalar>& apex() const { return apex_; }
  const Vec3<Scalar>& forward() const { return forward_; }
  const Vec3<Scalar>& up() const { return up_; }
  Vec3<Scalar> lateral() const { return forward_.cross(up_); }
  Scalar hfov_deg() const { return hfov_deg_; }
  Scalar vfov_deg() const { return vfov_deg_; }

 private:
  Vec3<Scalar> apex_;
  Vec3<Scalar> forward_;
  Vec3<Scalar> up_;
  Scalar hfov_deg_;
  Scalar vfov_deg_;
};

using Vec3d = Vec3<double>;
using Rayd = Ray<double>;
using Aabbd = Aabb<double>;
using RigidTransformd = RigidTransform<double>;
using Frustumd = Frustum<double>;

template <typename Scalar>
Vec3<Scalar> point_at(const Ray<Scalar>& ray, Scalar t) {
  if (!std::isfinite(t) || t < Scalar(0))
    throw GeometryError("ray parameter must be finite and non-negative");
  return ray.origin() + t * ray.direction();
}

/// Slab test. Returns the entry parameter, 0 when the origin is inside the
/// box, or nothing when the half-line misses.
template <typename Scalar>
std::optional<Scalar> ray_aabb_intersect(const Ray<Scalar>& ray, const Aabb<Scalar>& box) {
  const Vec3<Scalar> lo = box.min();
  const Vec3<Scalar> hi = box.max();
  Scalar t_near = Scalar(0);
  Scalar t_far = std::numeric_limits<Scalar>::infinity();
  for (int axis = 0; axis < 3; ++axis) {
    const Scalar o = ray.origin()[axis];
    const Scalar d = ray.direction()[axis];
    if (d == Scalar(0)) {
      // Parallel to this slab: either always inside it or never.
      if (o < lo[axis] || o > hi[axis]) return std::nullopt;
      continue;
    }
    const Scalar inv = Scalar(1) / d;
    const Scalar t0 = (lo[axis] - o) * inv;
    const Scalar t1 = (hi[axis] - o) * inv;
    t_near = std::max(t_near, std::min(t0, t1));
    t_far = std::min(t_far, std::max(t0, t1));
  }
  if (t_far < t_near) return std::nullopt;
  return t_near;
}

/// Angle between two unit vectors, in degrees within [0, 180].
template <typename Scalar>
Scalar angular_distance(const Vec3<Scalar>& a, const Vec3<Scalar>& b) {
  const Scalar c = std::clamp(a.dot(b), Scalar(-1), Scalar(1));
  return rad_to_deg(std::acos(c));
}

template <typename Scalar>
bool frustum_contains(const Frustum<Scalar>& f, const Vec3<Scalar>& p) {
  const Vec3<Scalar> d = p - f.apex();
  const Scalar z = d.dot(f.forward());
  if (!(z > Scalar(0))) return false;
  const Scalar x = d.dot(f.lateral());
  const Scalar y = d.dot(f.up());
  return std::abs(x) <= z * std::tan(deg_to_rad(f.hfov_deg() / 2)) &&
         std::abs(y) <= z * std::tan(deg_to_rad(f.vfov_deg() / 2));
}

/// Inset, in degrees, applied when a point is pulled into the view.
inline constexpr double kFrustumClampInsetDeg = 2.0;

/// Returns p if visible, otherwise the point at the same range whose
/// direction has the nearest yaw inside the inset horizontal field and an
/// elevation limited to the inset vertical field.
template <typename Scalar>
Vec3<Scalar> clamp_to_frustum(const Frustum<Scalar>& f, const Vec3<Scalar>& p) {
  const Vec3<Scalar> d = p - f.apex();
  const Scalar range = d.norm();
  if (!(range > Scalar(0))) throw GeometryError("cannot clamp the frustum apex");
  if (frustum_contains(f, p)) return p;

  const Vec3<Scalar> lat = f.lateral();
  const Scalar x = d.dot(lat);
  const Scalar y = d.dot(f.up());
  const Scalar z = d.dot(f.forward());

  const Scalar inset = Scalar(kFrustumClampInsetDeg);
  const Scalar yaw_lim = deg_to_rad(std::max(f.hfov_deg() / 2 - inset, f.hfov_deg() / 4));
  const Scalar pitch_lim = deg_to_rad(std::max(f.vfov_deg() / 2 - inset, f.vfov_deg() / 4));

  const Scalar yaw = std::clamp(std::atan2(x, z), -yaw_lim, yaw_lim);
  // Keep |y/z| <= tan(pitch_lim) once the direction is rebuilt.
  const Scalar elev_lim = std::atan(std::tan(pitch_lim) * std::cos(yaw));
  const Scalar elev = std::clamp(std::atan2(y, std::hypot(x, z)), -elev_lim, elev_lim);

  const Vec3<Scalar> dir = std::cos(elev) * std::sin(yaw) * lat + std::sin(elev) * f.up() +
                           std::cos(elev) * std::cos(yaw) * f.forward();
  return f.apex() + range * dir.normalized();
}

/// Rotates unit vector `from` toward unit vector `to` by at most
/// `max_angle_deg`. Returns `to` exactly when within reach.
template <typename Scalar>
Vec3<Scalar> rotate_toward(const Vec3<Scalar>& from, const Vec3<Scalar>& to, Scalar max_angle_deg) {
  const Scalar angle = angular_distance(from, to);
  if (angle <= max_angle_deg) return to;
  Vec3<Scalar> axis = from.cross(to);
  if (axis.norm() < Scalar(1e-12)) {
    // Antiparallel: any perpendicular axis will do.
    axis = from.cross(Vec3<Scalar>::UnitY());
    if (axis.norm() < Scalar(1e-12)) axis = from.cross(Vec3<Scalar>::UnitX());
  }
  const Eigen::AngleAxis<Scalar> r(deg_to_rad(max_angle_deg), axis.normalized());
  return (r * from).normalized();
}

/// First-order lag of a direction toward a target over `dt_s` with time
/// constant `tau_s`.
template <typename Scalar>
Vec3<Scalar> follow_direction(const Vec3<Scalar>& current, const Vec3<Scalar>& target, Scalar dt_s,
                              Scalar tau_s) {
  if (!(tau_s > Scalar(0))) return target;
  const Scalar k = Scalar(1) - std::exp(-dt_s / tau_s);
  const Vec3<Scalar> blended = current + k * (target - current);
  if (blended.norm() < Scalar(1e-12)) return target;
  return blended.normalized();
}

/// Least-squares rigid alignment (no scale) of `from` onto `to` through the
/// SVD of the cross-covariance, with the reflection case folded out.
template <typename Scalar>
RigidTransform<Scalar> align_frames(std::span<const std::pair<Vec3<Scalar>, Vec3<Scalar>>> pairs) {
  using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
  using MatX = Eigen::Matrix<Scalar, 3, Eigen::Dynamic>;
  if (pairs.size() < 3) throw DegenerateCorrespondences("alignment needs at least 3 point pairs");

  const auto n = static_cast<Eigen::Index>(pairs.size());
  MatX src(3, n);
  MatX dst(3, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& [p, q] = pairs[static_cast<std::size_t>(i)];
    if (!all_finite(p) || !all_finite(q)) throw GeometryError("alignment point is not finite");
    src.col(i) = p;
    dst.col(i) = q;
  }
  const Vec3<Scalar> src_mean = src.rowwise().mean();
  const Vec3<Scalar> dst_mean = dst.rowwise().mean();
  src.colwise() -= src_mean;
  dst.colwise() -= dst_mean;

  // Collinear or coincident robot points leave the rotation about their
  // common axis undetermined.
  const Eigen::JacobiSVD<MatX> spread(src);
  const auto sv = spread.singularValues();
  const Scalar scale = std::max(Scalar(1), sv(0));
  if (sv(1) <= Scalar(1e-9) * scale)
    throw DegenerateCorrespondences("robot points are collinear or coincident");

  const Mat3 cov = dst * src.transpose();
  const Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < Scalar(0)) d(2, 2) = Scalar(-1);
  const Mat3 r = svd.matrixU() * d * svd.matrixV().transpose();

  RigidTransform<Scalar> out;
  out.rotation = Eigen::Quaternion<Scalar>(r).normalized();
  out.translation = dst_mean - out.rotation * src_mean;
  return out;
}

template <typename Scalar>
RigidTransform<Scalar> align_frames(const std::vector<std::pair<Vec3<Scalar>, Vec3<Scalar>>>& pairs) {
  return align_frames<Scalar>(std::span<const std::pair<Vec3<Scalar>, Vec3<Scalar>>>(pairs));
}

/// Root-mean-square of |T p - q| over the pairs.
template <typename Scalar>
Scalar alignment_rms(const RigidTransform<Scalar>& t,
                     std::span<const std::pair<Vec3<Scalar>, Vec3<Scalar>>> pairs) {
  if (pairs.empty()) return Scalar(0);
  Scalar sum = 0;
  for (const auto& [p, q] : pairs) sum += (t.apply(p) - q).squaredNorm();
  return std::sqrt(sum / static_cast<Scalar>(pairs.size()));
}

}  // namespace gazeguide

#endif  // GAZEGUIDE_GEOMETRY_HPP
