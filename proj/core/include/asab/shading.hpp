#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "asab/geometry.hpp"
#include "asab/point_cloud.hpp"

namespace asab {

struct DistanceRamp {
  double near_m = 1.0;
  double far_m = 5.0;
};

struct AxisColor {
  Vec3 min{-5.0, -5.0, 0.0};
  Vec3 max{5.0, 5.0, 2.5};
};

/// Hue cycles once per `wavelength_m` of distance; points outside [near, far] are dropped.
struct DepthRainbow {
  double near_m = 1.2;
  double far_m = 2.5;
  double wavelength_m = 1.3;
};

struct NaturalColor {
  double near_cutoff_m = 2.0;
  double far_cutoff_m = 4.0;
};

/// A spherical ping expanding from the viewer to `max_range_m` once per period.
struct Sonar {
  double period_s = 1.0;
  double max_range_m = 5.0;
  double pulse_width_m = 0.15;
};

enum class ModeKind : std::uint8_t {
  DistanceRamp = 1,
  AxisColor = 2,
  DepthRainbow = 3,
  NaturalColor = 4,
  Sonar = 5,
};

class ModeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// One of the five visualization modes with validated parameters.
class ShadingMode {
 public:
  using Params = std::variant<DistanceRamp, AxisColor, DepthRainbow, NaturalColor, Sonar>;

  /// Throws ModeError if the parameters violate the mode's invariants.
  explicit ShadingMode(Params params);
  ShadingMode() : ShadingMode(DistanceRamp{}) {}

  /// Rebuilds a mode from its flat parameter list (the wire form).
  static ShadingMode from_parameters(ModeKind kind, std::span<const double> values);

  /// The mode with its default parameters.
  static ShadingMode defaults(ModeKind kind);

  /// Parses "distance" | "axis" | "rainbow" | "natural" | "sonar".
  static ModeKind kind_from_name(std::string_view name);
  static std::size_t parameter_count(ModeKind kind);

  ModeKind kind() const;
  std::string_view name() const;
  const Params& params() const { return params_; }
  std::vector<double> parameters() const;

  bool operator==(const ShadingMode& o) const { return parameters() == o.parameters() && kind() == o.kind(); }

 private:
  Params params_;
};

struct Rgba {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  std::uint8_t a = 0;
  bool operator==(const Rgba&) const = default;
};

struct ShadedPoint {
  Rgba rgba;
  bool keep = false;
  float size_px = 0.0f;
  bool operator==(const ShadedPoint&) const = default;
};

struct PointSizeConfig {
  double base_px = 4.0;
  double reference_depth_m = 2.0;
  double min_px = 1.0;
  double max_px = 16.0;
};

/// clamp(base_px * reference_depth / depth, min_px, max_px). Throws on depth <= 0.
double point_size_px(double depth, double base_px, double reference_depth, double min_px,
                     double max_px);

/// Full saturation/value HSV to 8-bit RGB; hue in degrees, wrapped to [0, 360).
Rgb hsv_to_rgb(double hue_deg, double saturation = 1.0, double value = 1.0);

ShadedPoint shade_point(const CloudPoint& point, const ShadingMode& mode, const Vec3& viewer,
                        double time_s, const PointSizeConfig& sizing = {});

/// Colors every point for the given mode, viewer position and time. Pure.
std::vector<ShadedPoint> shade(const PointCloud& cloud, const ShadingMode& mode,
                               const Pose& viewer, double time_s,
                               const PointSizeConfig& sizing = {});

}  // namespace asab
