#include "asab/shading.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace asab {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::uint8_t to_channel(double unit) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(unit, 0.0, 1.0) * 255.0));
}

void require(bool ok, std::string_view what) {
  if (!ok) {
    throw ModeError(std::string(what));
  }
}

bool finite_all(std::initializer_list<double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void validate(const DistanceRamp& m) {
  require(finite_all({m.near_m, m.far_m}), "distance ramp parameters must be finite");
  require(m.near_m < m.far_m, "distance ramp needs near < far");
}

void validate(const AxisColor& m) {
  require(m.min.is_finite() && m.max.is_finite(), "axis color bounds must be finite");
  require(m.min.x < m.max.x && m.min.y < m.max.y && m.min.z < m.max.z,
          "axis color needs min < max on every axis");
}

void validate(const DepthRainbow& m) {
  require(finite_all({m.near_m, m.far_m, m.wavelength_m}), "rainbow parameters must be finite");
  require(m.near_m < m.far_m, "depth rainbow needs near < far");
  require(m.wavelength_m > 0.0, "depth rainbow needs wavelength > 0");
}

void validate(const NaturalColor& m) {
  require(finite_all({m.near_cutoff_m, m.far_cutoff_m}), "cutoffs must be finite");
  require(m.near_cutoff_m < m.far_cutoff_m, "natural color needs near cutoff < far cutoff");
}

void validate(const Sonar& m) {
  require(finite_all({m.period_s, m.max_range_m, m.pulse_width_m}),
          "sonar parameters must be finite");
  require(m.period_s > 0.0, "sonar needs period > 0");
  require(m.pulse_width_m > 0.0, "sonar needs pulse width > 0");
  require(m.max_range_m > 0.0, "sonar needs max range > 0");
  // The ping clock runs on integer nanoseconds.
  require(std::llround(m.period_s * 1e9) >= 1, "sonar period below 1 ns");
}

// Sonar phase in [0, 1), computed on an integer-nanosecond clock so that
// t and t + period land on the same phase.
double sonar_phase(const Sonar& m, double time_s) {
  const long long period_ns = std::llround(m.period_s * 1e9);
  const long long t_ns = std::llround(time_s * 1e9);
  const long long r = ((t_ns % period_ns) + period_ns) % period_ns;
  return static_cast<double>(r) / static_cast<double>(period_ns);
}

struct Kernel {
  const Vec3& viewer;
  const PointSizeConfig& sizing;

  ShadedPoint base(double d) const {
    ShadedPoint sp;
    sp.size_px = static_cast<float>(
        point_size_px(std::max(d, 1e-9), sizing.base_px, sizing.reference_depth_m, sizing.min_px,
                      sizing.max_px));
    return sp;
  }

  static void set_rgb(ShadedPoint& sp, Rgb c) {
    sp.rgba = {c.r, c.g, c.b, 255};
    sp.keep = true;
  }

  ShadedPoint operator()(const DistanceRamp& m, const CloudPoint& p) const {
    const double d = (p.position - viewer).norm();
    ShadedPoint sp = base(d);
    const std::uint8_t v = to_channel(1.0 - std::clamp((d - m.near_m) / (m.far_m - m.near_m), 0.0, 1.0));
    set_rgb(sp, {v, v, v});
    return sp;
  }

  ShadedPoint operator()(const AxisColor& m, const CloudPoint& p) const {
    const double d = (p.position - viewer).norm();
    ShadedPoint sp = base(d);
    set_rgb(sp, {to_channel((p.position.x - m.min.x) / (m.max.x - m.min.x)),
                 to_channel((p.position.y - m.min.y) / (m.max.y - m.min.y)),
                 to_channel((p.position.z - m.min.z) / (m.max.z - m.min.z))});
    return sp;
  }

  ShadedPoint operator()(const DepthRainbow& m, const CloudPoint& p) const {
    const double d = (p.position - viewer).norm();
    ShadedPoint sp = base(d);
    if (d < m.near_m || d > m.far_m) {
      return sp;
    }
    // fract() with a 1e-12 cycle tolerance so whole cycles land on hue 0.
    const double cycles = (d - m.near_m) / m.wavelength_m;
    double frac = cycles - std::floor(cycles + 1e-12);
    frac = std::max(frac, 0.0);
    set_rgb(sp, hsv_to_rgb(360.0 * frac));
    return sp;
  }

  ShadedPoint operator()(const NaturalColor& m, const CloudPoint& p) const {
    const double d = (p.position - viewer).norm();
    ShadedPoint sp = base(d);
    if (d >= m.near_cutoff_m && d <= m.far_cutoff_m) {
      set_rgb(sp, p.color);
    }
    return sp;
  }

  ShadedPoint sonar(const Sonar& m, const CloudPoint& p, double radius) const {
    const double d = (p.position - viewer).norm();
    ShadedPoint sp = base(d);
    const double u = (d - radius) / m.pulse_width_m;
    const double b = std::exp(-u * u);
    if (b >= 1.0 / 255.0) {
      set_rgb(sp, {to_channel(p.color.r / 255.0 * b), to_channel(p.color.g / 255.0 * b),
                   to_channel(p.color.b / 255.0 * b)});
    }
    return sp;
  }
};

}  // namespace

ShadingMode::ShadingMode(Params params) : params_(std::move(params)) {
  std::visit([](const auto& m) { validate(m); }, params_);
}

ModeKind ShadingMode::kind() const {
  return static_cast<ModeKind>(params_.index() + 1);
}

std::string_view ShadingMode::name() const {
  switch (kind()) {
    case ModeKind::DistanceRamp:
      return "distance";
    case ModeKind::AxisColor:
      return "axis";
    case ModeKind::DepthRainbow:
      return "rainbow";
    case ModeKind::NaturalColor:
      return "natural";
    case ModeKind::Sonar:
      return "sonar";
  }
  return "unknown";
}

ShadingMode ShadingMode::defaults(ModeKind kind) {
  switch (kind) {
    case ModeKind::DistanceRamp:
      return ShadingMode(DistanceRamp{});
    case ModeKind::AxisColor:
      return ShadingMode(AxisColor{});
    case ModeKind::DepthRainbow:
      return ShadingMode(DepthRainbow{});
    case ModeKind::NaturalColor:
      return ShadingMode(NaturalColor{});
    case ModeKind::Sonar:
      return ShadingMode(Sonar{});
  }
  return ShadingMode();
}

ModeKind ShadingMode::kind_from_name(std::string_view name) {
  if (name == "distance") return ModeKind::DistanceRamp;
  if (name == "axis") return ModeKind::AxisColor;
  if (name == "rainbow") return ModeKind::DepthRainbow;
  if (name == "natural") return ModeKind::NaturalColor;
  if (name == "sonar") return ModeKind::Sonar;
  throw ModeError(fmt::format("unknown shading mode '{}'", name));
}

std::size_t ShadingMode::parameter_count(ModeKind kind) {
  switch (kind) {
    case ModeKind::DistanceRamp:
    case ModeKind::NaturalColor:
      return 2;
    case ModeKind::DepthRainbow:
    case ModeKind::Sonar:
      return 3;
    case ModeKind::AxisColor:
      return 6;
  }
  throw ModeError(fmt::format("unknown shading mode kind {}", static_cast<int>(kind)));
}

std::vector<double> ShadingMode::parameters() const {
  return std::visit(Overloaded{
                        [](const DistanceRamp& m) { return std::vector{m.near_m, m.far_m}; },
                        [](const AxisColor& m) {
                          return std::vector{m.min.x, m.min.y, m.min.z, m.max.x, m.max.y, m.max.z};
                        },
                        [](const DepthRainbow& m) {
                          return std::vector{m.near_m, m.far_m, m.wavelength_m};
                        },
                        [](const NaturalColor& m) {
                          return std::vector{m.near_cutoff_m, m.far_cutoff_m};
                        },
                        [](const Sonar& m) {
                          return std::vector{m.period_s, m.max_range_m, m.pulse_width_m};
                        },
                    },
                    params_);
}

ShadingMode ShadingMode::from_parameters(ModeKind kind, std::span<const double> v) {
  const std::size_t n = parameter_count(kind);
  if (v.size() != n) {
    throw ModeError(fmt::format("mode expects {} parameters, got {}", n, v.size()));
  }
  switch (kind) {
    case ModeKind::DistanceRamp:
      return ShadingMode(DistanceRamp{v[0], v[1]});
    case ModeKind::AxisColor:
      return ShadingMode(AxisColor{{v[0], v[1], v[2]}, {v[3], v[4], v[5]}});
    case ModeKind::DepthRainbow:
      return ShadingMode(DepthRainbow{v[0], v[1], v[2]});
    case ModeKind::NaturalColor:
      return ShadingMode(NaturalColor{v[0], v[1]});
    case ModeKind::Sonar:
      return ShadingMode(Sonar{v[0], v[1], v[2]});
  }
  throw ModeError("unknown shading mode kind");
}

double point_size_px(double depth, double base_px, double reference_depth, double min_px,
                     double max_px) {
  if (!(depth > 0.0)) {
    throw ModeError(fmt::format("point depth must be positive, got {}", depth));
  }
  if (!(reference_depth > 0.0) || !(min_px <= max_px)) {
    throw ModeError("point sizing needs reference_depth > 0 and min_px <= max_px");
  }
  return std::clamp(base_px * reference_depth / depth, min_px, max_px);
}

Rgb hsv_to_rgb(double hue_deg, double saturation, double value) {
  double h = std::fmod(hue_deg, 360.0);
  if (h < 0.0) {
    h += 360.0;
  }
  const double c = value * saturation;
  const double hp = h / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp)) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  const double m = value - c;
  return {to_channel(r + m), to_channel(g + m), to_channel(b + m)};
}

ShadedPoint shade_point(const CloudPoint& point, const ShadingMode& mode, const Vec3& viewer,
                        double time_s, const PointSizeConfig& sizing) {
  const Kernel k{viewer, sizing};
  return std::visit(Overloaded{
                        [&](const Sonar& m) {
                          return k.sonar(m, point, m.max_range_m * sonar_phase(m, time_s));
                        },
                        [&](const auto& m) { return k(m, point); },
                    },
                    mode.params());
}

std::vector<ShadedPoint> shade(const PointCloud& cloud, const ShadingMode& mode,
                               const Pose& viewer, double time_s, const PointSizeConfig& sizing) {
  std::vector<ShadedPoint> out;
  out.reserve(cloud.size());
  const Kernel k{viewer.translation, sizing};
  std::visit(Overloaded{
                 [&](const Sonar& m) {
                   const double radius = m.max_range_m * sonar_phase(m, time_s);
                   for (const CloudPoint& p : cloud.points()) {
                     out.push_back(k.sonar(m, p, radius));
                   }
                 },
                 [&](const auto& m) {
                   for (const CloudPoint& p : cloud.points()) {
                     out.push_back(k(m, p));
                   }
                 },
             },
             mode.params());
  return out;
}

}  // namespace asab
