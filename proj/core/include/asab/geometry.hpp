#pragma once

// Rigid-body math shared by every module.
//
// Conventions: quaternions are (w, x, y, z), right-handed, active rotations.
// Matrices are row-major and act on column vectors.

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

namespace asab {

class GeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  static constexpr Vec3 zero() { return {0.0, 0.0, 0.0}; }

  bool is_finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }

  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const { return std::sqrt(dot(*this)); }

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }

  bool operator==(const Vec3&) const = default;
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

/// Rotation quaternion with |q| = 1 (to 1e-9) guaranteed by every factory.
class UnitQuaternion {
 public:
  static constexpr double kNormTolerance = 1e-9;

  constexpr UnitQuaternion() = default;

  static constexpr UnitQuaternion identity() { return {}; }

  /// Normalizes arbitrary components. Throws on zero or non-finite input.
  static UnitQuaternion normalized(double w, double x, double y, double z);

  /// Accepts components that are already unit length, preserving them bit for bit.
  static UnitQuaternion from_unit(double w, double x, double y, double z);

  /// Rotation of `angle` radians about `axis` (need not be normalized).
  static UnitQuaternion from_axis_angle(const Vec3& axis, double angle);

  /// Exponential map of a rotation vector (axis * angle).
  static UnitQuaternion from_rotation_vector(const Vec3& rv);

  /// Intrinsic Z-Y-X (yaw, pitch, roll) angles in radians.
  static UnitQuaternion from_euler_zyx(double yaw, double pitch, double roll);

  double w() const { return w_; }
  double x() const { return x_; }
  double y() const { return y_; }
  double z() const { return z_; }

  UnitQuaternion conjugate() const { return {w_, -x_, -y_, -z_}; }
  UnitQuaternion negated() const { return {-w_, -x_, -y_, -z_}; }
  double dot(const UnitQuaternion& o) const {
    return w_ * o.w_ + x_ * o.x_ + y_ * o.y_ + z_ * o.z_;
  }

  /// Hamilton product; `a * b` applies b first.
  UnitQuaternion operator*(const UnitQuaternion& o) const;

  Vec3 rotate(const Vec3& v) const;

  /// Row-major 3x3 rotation matrix.
  std::array<double, 9> to_matrix() const;

  /// Returns (yaw, pitch, roll) for the Z-Y-X convention.
  Vec3 to_euler_zyx() const;

  /// Rotation vector (axis * angle) with angle in [0, pi].
  Vec3 to_rotation_vector() const;

  bool operator==(const UnitQuaternion&) const = default;

 private:
  constexpr UnitQuaternion(double w, double x, double y, double z) : w_(w), x_(x), y_(y), z_(z) {}

  double w_ = 1.0;
  double x_ = 0.0;
  double y_ = 0.0;
  double z_ = 0.0;
};

/// Rigid transform (no scale): p' = R p + t.
struct Pose {
  Vec3 translation;
  UnitQuaternion rotation;

  static Pose identity() { return {}; }

  /// `a * b` maps b's child frame into a's parent frame.
  Pose operator*(const Pose& o) const {
    return {translation + rotation.rotate(o.translation), rotation * o.rotation};
  }
  Vec3 transform_point(const Vec3& p) const { return rotation.rotate(p) + translation; }

  bool operator==(const Pose&) const = default;
};

Pose invert_rigid(const Pose& p);

/// 4x4 translation-rotation-uniform-scale matrix, row-major.
class TrsMatrix {
 public:
  static constexpr double kTolerance = 1e-9;

  TrsMatrix() : m_(kIdentity) {}

  static TrsMatrix identity() { return {}; }

  /// Validates the TRS invariants (bottom row, orthonormal-times-scale block).
  static TrsMatrix from_row_major(const std::array<double, 16>& m);

  double operator()(int row, int col) const { return m_[static_cast<std::size_t>(row * 4 + col)]; }
  const std::array<double, 16>& row_major() const { return m_; }

  double scale() const;

 private:
  static constexpr std::array<double, 16> kIdentity = {1, 0, 0, 0, 0, 1, 0, 0,
                                                       0, 0, 1, 0, 0, 0, 0, 1};
  struct Unchecked {};
  TrsMatrix(Unchecked, const std::array<double, 16>& m) : m_(m) {}

  friend TrsMatrix compose_trs(const Vec3&, const UnitQuaternion&, double);
  friend TrsMatrix compose(const TrsMatrix&, const TrsMatrix&);
  friend TrsMatrix inverse(const TrsMatrix&);

  std::array<double, 16> m_;
};

/// T(t) * R(r) * S(s). Throws GeometryError on s <= 0 or non-finite input.
TrsMatrix compose_trs(const Vec3& t, const UnitQuaternion& r, double s);

TrsMatrix trs_from_pose(const Pose& p, double scale = 1.0);

Vec3 transform_point(const TrsMatrix& m, const Vec3& p);

/// transform_point(compose(a, b), p) == transform_point(a, transform_point(b, p)).
TrsMatrix compose(const TrsMatrix& a, const TrsMatrix& b);

TrsMatrix inverse(const TrsMatrix& m);

Vec3 average_positions(std::span<const Vec3> samples);

/// Hemisphere-aligned component-wise mean, renormalized. Throws on an empty
/// input or a degenerate (zero-norm) mean.
UnitQuaternion average_rotations(std::span<const UnitQuaternion> samples);

/// Rotation angle between a and b in [0, pi]; blind to the double cover.
double angular_distance(const UnitQuaternion& a, const UnitQuaternion& b);

/// Wraps an angle to (-pi, pi].
double wrap_angle(double radians);

constexpr double kPi = 3.14159265358979323846;
constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

}  // namespace asab
