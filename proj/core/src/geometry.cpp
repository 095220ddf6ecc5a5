#include "asab/geometry.hpp"

#include <algorithm>
#include <limits>

#include <fmt/format.h>

namespace asab {

namespace {

bool all_finite(std::initializer_list<double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

double det3(const std::array<double, 16>& m) {
  return m[0] * (m[5] * m[10] - m[6] * m[9]) - m[1] * (m[4] * m[10] - m[6] * m[8]) +
         m[2] * (m[4] * m[9] - m[5] * m[8]);
}

}  // namespace

UnitQuaternion UnitQuaternion::normalized(double w, double x, double y, double z) {
  if (!all_finite({w, x, y, z})) {
    throw GeometryError("quaternion has non-finite components");
  }
  const double n = std::sqrt(w * w + x * x + y * y + z * z);
  if (n < std::numeric_limits<double>::min() * 1e6) {
    throw GeometryError("cannot normalize a zero quaternion");
  }
  // Leave already-unit input untouched so round trips stay bit-exact.
  if (std::abs(n - 1.0) <= 2.0 * std::numeric_limits<double>::epsilon()) {
    return {w, x, y, z};
  }
  return {w / n, x / n, y / n, z / n};
}

UnitQuaternion UnitQuaternion::from_unit(double w, double x, double y, double z) {
  if (!all_finite({w, x, y, z})) {
    throw GeometryError("quaternion has non-finite components");
  }
  const double n = std::sqrt(w * w + x * x + y * y + z * z);
  if (std::abs(n - 1.0) > kNormTolerance) {
    throw GeometryError(fmt::format("quaternion norm {} is not unit", n));
  }
  return {w, x, y, z};
}

UnitQuaternion UnitQuaternion::from_axis_angle(const Vec3& axis, double angle) {
  const double n = axis.norm();
  if (!std::isfinite(angle) || !axis.is_finite() || n == 0.0) {
    throw GeometryError("axis-angle needs a finite, non-zero axis");
  }
  const double s = std::sin(angle / 2.0) / n;
  return normalized(std::cos(angle / 2.0), axis.x * s, axis.y * s, axis.z * s);
}

UnitQuaternion UnitQuaternion::from_rotation_vector(const Vec3& rv) {
  if (!rv.is_finite()) {
    throw GeometryError("rotation vector has non-finite components");
  }
  const double angle = rv.norm();
  if (angle < 1e-12) {
    return normalized(1.0, rv.x / 2.0, rv.y / 2.0, rv.z / 2.0);
  }
  return from_axis_angle(rv, angle);
}

UnitQuaternion UnitQuaternion::from_euler_zyx(double yaw, double pitch, double roll) {
  return from_axis_angle({0, 0, 1}, yaw) * from_axis_angle({0, 1, 0}, pitch) *
         from_axis_angle({1, 0, 0}, roll);
}

UnitQuaternion UnitQuaternion::operator*(const UnitQuaternion& o) const {
  return normalized(w_ * o.w_ - x_ * o.x_ - y_ * o.y_ - z_ * o.z_,
                    w_ * o.x_ + x_ * o.w_ + y_ * o.z_ - z_ * o.y_,
                    w_ * o.y_ - x_ * o.z_ + y_ * o.w_ + z_ * o.x_,
                    w_ * o.z_ + x_ * o.y_ - y_ * o.x_ + z_ * o.w_);
}

Vec3 UnitQuaternion::rotate(const Vec3& v) const {
  const Vec3 u{x_, y_, z_};
  const Vec3 uv = u.cross(v);
  const Vec3 uuv = u.cross(uv);
  return v + uv * (2.0 * w_) + uuv * 2.0;
}

std::array<double, 9> UnitQuaternion::to_matrix() const {
  const double xx = x_ * x_, yy = y_ * y_, zz = z_ * z_;
  const double xy = x_ * y_, xz = x_ * z_, yz = y_ * z_;
  const double wx = w_ * x_, wy = w_ * y_, wz = w_ * z_;
  return {1 - 2 * (yy + zz), 2 * (xy - wz),     2 * (xz + wy),
          2 * (xy + wz),     1 - 2 * (xx + zz), 2 * (yz - wx),
          2 * (xz - wy),     2 * (yz + wx),     1 - 2 * (xx + yy)};
}

Vec3 UnitQuaternion::to_euler_zyx() const {
  const double sinp = std::clamp(2.0 * (w_ * y_ - z_ * x_), -1.0, 1.0);
  const double yaw = std::atan2(2.0 * (w_ * z_ + x_ * y_), 1.0 - 2.0 * (y_ * y_ + z_ * z_));
  const double pitch = std::asin(sinp);
  const double roll = std::atan2(2.0 * (w_ * x_ + y_ * z_), 1.0 - 2.0 * (x_ * x_ + y_ * y_));
  return {yaw, pitch, roll};
}

Vec3 UnitQuaternion::to_rotation_vector() const {
  const double sign = w_ < 0.0 ? -1.0 : 1.0;
  const Vec3 v{x_ * sign, y_ * sign, z_ * sign};
  const double s = v.norm();
  if (s < 1e-12) {
    return v * 2.0;
  }
  const double angle = 2.0 * std::atan2(s, w_ * sign);
  return v * (angle / s);
}

Pose invert_rigid(const Pose& p) {
  const UnitQuaternion inv = p.rotation.conjugate();
  return {inv.rotate(-p.translation), inv};
}

TrsMatrix TrsMatrix::from_row_major(const std::array<double, 16>& m) {
  if (!std::all_of(m.begin(), m.end(), [](double v) { return std::isfinite(v); })) {
    throw GeometryError("TRS matrix has non-finite entries");
  }
  if (m[12] != 0.0 || m[13] != 0.0 || m[14] != 0.0 || m[15] != 1.0) {
    throw GeometryError("TRS matrix bottom row must be (0, 0, 0, 1)");
  }
  const double det = det3(m);
  if (!(det > 0.0)) {
    throw GeometryError("TRS matrix rotation block must have positive determinant");
  }
  const double s = std::cbrt(det);
  // (A^T A) / s^2 must be the identity.
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) {
        acc += m[static_cast<std::size_t>(k * 4 + i)] * m[static_cast<std::size_t>(k * 4 + j)];
      }
      const double expected = i == j ? 1.0 : 0.0;
      if (std::abs(acc / (s * s) - expected) > kTolerance) {
        throw GeometryError("TRS matrix rotation block is not orthonormal times a uniform scale");
      }
    }
  }
  return TrsMatrix(Unchecked{}, m);
}

double TrsMatrix::scale() const { return std::cbrt(det3(m_)); }

TrsMatrix compose_trs(const Vec3& t, const UnitQuaternion& r, double s) {
  if (!t.is_finite() || !std::isfinite(s)) {
    throw GeometryError("TRS inputs must be finite");
  }
  if (s <= 0.0) {
    throw GeometryError(fmt::format("TRS scale must be positive, got {}", s));
  }
  const auto rm = r.to_matrix();
  return TrsMatrix(TrsMatrix::Unchecked{},
                   {rm[0] * s, rm[1] * s, rm[2] * s, t.x,  //
                    rm[3] * s, rm[4] * s, rm[5] * s, t.y,  //
                    rm[6] * s, rm[7] * s, rm[8] * s, t.z,  //
                    0.0, 0.0, 0.0, 1.0});
}

TrsMatrix trs_from_pose(const Pose& p, double scale) {
  return compose_trs(p.translation, p.rotation, scale);
}

Vec3 transform_point(const TrsMatrix& m, const Vec3& p) {
  return {m(0, 0) * p.x + m(0, 1) * p.y + m(0, 2) * p.z + m(0, 3),
          m(1, 0) * p.x + m(1, 1) * p.y + m(1, 2) * p.z + m(1, 3),
          m(2, 0) * p.x + m(2, 1) * p.y + m(2, 2) * p.z + m(2, 3)};
}

TrsMatrix compose(const TrsMatrix& a, const TrsMatrix& b) {
  std::array<double, 16> out{};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) {
      double acc = c == 3 ? a(r, 3) : 0.0;
      for (int k = 0; k < 3; ++k) {
        acc += a(r, k) * b(k, c);
      }
      out[static_cast<std::size_t>(r * 4 + c)] = acc;
    }
  }
  out[15] = 1.0;
  return TrsMatrix(TrsMatrix::Unchecked{}, out);
}

TrsMatrix inverse(const TrsMatrix& m) {
  const double s = m.scale();
  const double inv_s2 = 1.0 / (s * s);
  std::array<double, 16> out{};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      out[static_cast<std::size_t>(r * 4 + c)] = m(c, r) * inv_s2;
    }
  }
  for (int r = 0; r < 3; ++r) {
    double acc = 0.0;
    for (int k = 0; k < 3; ++k) {
      acc += out[static_cast<std::size_t>(r * 4 + k)] * m(k, 3);
    }
    out[static_cast<std::size_t>(r * 4 + 3)] = -acc;
  }
  out[15] = 1.0;
  return TrsMatrix(TrsMatrix::Unchecked{}, out);
}

Vec3 average_positions(std::span<const Vec3> samples) {
  if (samples.empty()) {
    throw GeometryError("cannot average an empty set of positions");
  }
  // Accumulate offsets from the first sample; identical samples average exactly.
  const Vec3 ref = samples.front();
  Vec3 acc;
  for (const Vec3& s : samples) {
    acc += s - ref;
  }
  return ref + acc / static_cast<double>(samples.size());
}

UnitQuaternion average_rotations(std::span<const UnitQuaternion> samples) {
  if (samples.empty()) {
    throw GeometryError("cannot average an empty set of rotations");
  }
  const UnitQuaternion& ref = samples.front();
  double dw = 0.0, dx = 0.0, dy = 0.0, dz = 0.0;
  for (const UnitQuaternion& q : samples) {
    const UnitQuaternion a = q.dot(ref) < 0.0 ? q.negated() : q;
    dw += a.w() - ref.w();
    dx += a.x() - ref.x();
    dy += a.y() - ref.y();
    dz += a.z() - ref.z();
  }
  const double n = static_cast<double>(samples.size());
  const double w = ref.w() + dw / n, x = ref.x() + dx / n, y = ref.y() + dy / n,
               z = ref.z() + dz / n;
  if (std::sqrt(w * w + x * x + y * y + z * z) < 1e-12) {
    throw GeometryError("rotation samples are degenerate (mean has zero norm)");
  }
  return UnitQuaternion::normalized(w, x, y, z);
}

double angular_distance(const UnitQuaternion& a, const UnitQuaternion& b) {
  const UnitQuaternion d = a.conjugate() * b;
  const double v = std::sqrt(d.x() * d.x() + d.y() * d.y() + d.z() * d.z());
  return 2.0 * std::atan2(v, std::abs(d.w()));
}

double wrap_angle(double radians) {
  double a = std::remainder(radians, 2.0 * kPi);
  if (a <= -kPi) {
    a += 2.0 * kPi;
  }
  return a;
}

}  // namespace asab
