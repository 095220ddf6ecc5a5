#include <doctest.h>

#include <cstring>
#include <iomanip>
#include <random>
#include <sstream>

#include "asab/cloud_io.hpp"
#include "asab/point_cloud.hpp"
#include "asab/render_batch.hpp"
#include "asab/shading.hpp"
#include "test_support.hpp"

using namespace asab;
using asab::test::fixture_dir;

namespace {

PointCloud cloud_of(std::vector<Vec3> positions, Rgb color = {120, 60, 30}) {
  std::vector<CloudPoint> pts;
  for (const Vec3& p : positions) pts.push_back({p, color});
  return PointCloud("map", 0, std::move(pts));
}

ShadedPoint shade_one(const Vec3& p, const ShadingMode& mode, double t = 0.0, Rgb color = {120, 60, 30}) {
  return shade(cloud_of({p}, color), mode, Pose::identity(), t).front();
}

std::vector<std::uint8_t> as_u8(std::span<const std::byte> b) {
  std::vector<std::uint8_t> out(b.size());
  std::memcpy(out.data(), b.data(), b.size());
  return out;
}

}  // namespace

TEST_CASE("load_cloud reads a hand-written PLY exactly") {
  const PointCloud c = load_cloud(fixture_dir() / "three_points.ply");
  REQUIRE(c.size() == 3);
  CHECK(c.points()[0] == CloudPoint{{0, 0, 0}, {255, 0, 0}});
  CHECK(c.points()[1] == CloudPoint{{1.5, -2.25, 3}, {0, 255, 0}});
  CHECK(c.points()[2] == CloudPoint{{0.125, 0.5, -4}, {0, 0, 255}});
  CHECK(c.frame_id() == "map");
}

TEST_CASE("load_cloud edge cases") {
  CHECK(load_cloud(fixture_dir() / "empty.ply").empty());

  const PointCloud pcd = load_cloud(fixture_dir() / "no_color.pcd");
  REQUIRE(pcd.size() == 2);
  CHECK(pcd.points()[1].position == Vec3{-0.5, 0.25, 8});
  CHECK(pcd.points()[0].color == kDefaultPointColor);
}

TEST_CASE("load_cloud reports the failing line") {
  try {
    load_cloud(fixture_dir() / "bad_row.ply");
    FAIL("expected a parse error");
  } catch (const CloudParseError& e) {
    CHECK(e.line() == 9);
    CHECK(std::string(e.what()).find("line 9") != std::string::npos);
  }
  try {
    load_cloud(fixture_dir() / "binary.ply");
    FAIL("expected a parse error");
  } catch (const CloudParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(load_cloud(fixture_dir() / "does_not_exist.ply"), CloudParseError);
  CHECK_THROWS_AS(format_from_path("cloud.xyz"), CloudParseError);

  std::istringstream missing_z("ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nend_header\n1 2\n");
  CHECK_THROWS_AS(parse_cloud(missing_z, CloudFormat::PlyAscii), CloudParseError);
  std::istringstream short_body("ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\n"
                                "property float z\nend_header\n1 2 3\n");
  CHECK_THROWS_AS(parse_cloud(short_body, CloudFormat::PlyAscii), CloudParseError);
  std::istringstream nan_row("ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\n"
                             "property float z\nend_header\nnan 2 3\n");
  CHECK_THROWS(parse_cloud(nan_row, CloudFormat::PlyAscii));
  std::istringstream pcd_binary("VERSION 0.7\nFIELDS x y z\nSIZE 4 4 4\nTYPE F F F\nPOINTS 0\nDATA binary\n");
  CHECK_THROWS_AS(parse_cloud(pcd_binary, CloudFormat::PcdAscii), CloudParseError);
}

TEST_CASE("PLY with extra elements and packed-float PCD colors") {
  std::istringstream ply(
      "ply\nformat ascii 1.0\nelement vertex 1\nproperty double x\nproperty double y\nproperty double z\n"
      "property float intensity\nproperty uchar red\nproperty uchar green\nproperty uchar blue\n"
      "element face 1\nproperty list uchar int vertex_indices\nend_header\n"
      "0.1 0.2 0.3 9 1 2 3\n3 0 0 0\n");
  const PointCloud c = parse_cloud(ply, CloudFormat::PlyAscii);
  REQUIRE(c.size() == 1);
  CHECK(c.points()[0] == CloudPoint{{0.1, 0.2, 0.3}, {1, 2, 3}});

  // 0x00ff8001 reinterpreted as a float.
  float packed;
  const std::uint32_t bits = 0x00ff8001u;
  std::memcpy(&packed, &bits, 4);
  std::ostringstream body;
  body << "VERSION 0.7\nFIELDS x y z rgb\nSIZE 4 4 4 4\nTYPE F F F F\nCOUNT 1 1 1 1\nWIDTH 1\nHEIGHT 1\n"
       << "POINTS 1\nDATA ascii\n1 2 3 " << std::setprecision(9) << packed << "\n";
  std::istringstream pcd(body.str());
  CHECK(parse_cloud(pcd, CloudFormat::PcdAscii).points()[0].color == Rgb{255, 128, 1});
}

TEST_CASE("save then load round-trips positions at 32-bit precision") {
  const PointCloud original = random_cloud(1000, 7.0, 42).with_header("map", 123456789);
  for (CloudFormat f : {CloudFormat::PlyAscii, CloudFormat::PcdAscii}) {
    std::stringstream buf;
    write_cloud(buf, original, f);
    const PointCloud back = parse_cloud(buf, f);
    REQUIRE(back.size() == original.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
      const Vec3 a = original.points()[i].position, b = back.points()[i].position;
      CHECK(static_cast<float>(a.x) == b.x);
      CHECK(static_cast<float>(a.y) == b.y);
      CHECK(static_cast<float>(a.z) == b.z);
      CHECK(original.points()[i].color == back.points()[i].color);
    }
    if (f == CloudFormat::PlyAscii) CHECK(back.timestamp_ns() == 123456789);
    // A second pass is bit-identical.
    std::stringstream again;
    write_cloud(again, back, f);
    CHECK(parse_cloud(again, f) == back);
  }
}

TEST_CASE("PointCloud invariants") {
  CHECK_THROWS_AS(cloud_of({{std::nan(""), 0, 0}}), CloudError);
  CHECK_THROWS_AS(PointCloud("map", 0, std::vector<CloudPoint>(3), 2), CloudError);
}

TEST_CASE("random_cloud") {
  CHECK(random_cloud(0, 0.5, 1).empty());
  const PointCloud c = random_cloud(100000, 0.5, 7);
  CHECK(c.size() == 100000);
  bool inside = true;
  for (const CloudPoint& p : c.points()) {
    inside = inside && std::abs(p.position.x) <= 0.25 && std::abs(p.position.y) <= 0.25 &&
             std::abs(p.position.z) <= 0.25;
  }
  CHECK(inside);
  CHECK(random_cloud(5000, 0.5, 7) == random_cloud(5000, 0.5, 7));
  CHECK_FALSE(random_cloud(5000, 0.5, 7) == random_cloud(5000, 0.5, 8));
  CHECK_THROWS_AS(random_cloud(1, 0.0, 1), CloudError);
}

TEST_CASE("transform_cloud keeps colors and header") {
  const PointCloud c = random_cloud(100, 1.0, 3).with_header("lidar", 9);
  const TrsMatrix m = compose_trs({1, 2, 3}, UnitQuaternion::from_axis_angle({0, 1, 0}, 0.7), 1.5);
  const PointCloud t = transform_cloud(m, c);
  REQUIRE(t.size() == c.size());
  CHECK(t.frame_id() == "lidar");
  CHECK(t.timestamp_ns() == 9);
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK(t.points()[i].color == c.points()[i].color);
    CHECK(asab::test::max_abs_diff(t.points()[i].position, transform_point(m, c.points()[i].position)) == 0.0);
  }
}

TEST_CASE("HSV to RGB golden vectors") {
  CHECK(hsv_to_rgb(0) == Rgb{255, 0, 0});
  CHECK(hsv_to_rgb(120) == Rgb{0, 255, 0});
  CHECK(hsv_to_rgb(240) == Rgb{0, 0, 255});
  CHECK(hsv_to_rgb(60) == Rgb{255, 255, 0});
  CHECK(hsv_to_rgb(180) == Rgb{0, 255, 255});
  CHECK(hsv_to_rgb(300) == Rgb{255, 0, 255});
  CHECK(hsv_to_rgb(360) == Rgb{255, 0, 0});
  CHECK(hsv_to_rgb(-120) == Rgb{0, 0, 255});
  CHECK(hsv_to_rgb(30) == Rgb{255, 128, 0});
  CHECK(hsv_to_rgb(0, 0.0, 0.5) == Rgb{128, 128, 128});
}

TEST_CASE("DistanceRamp") {
  const ShadingMode m(DistanceRamp{1.0, 2.0});
  const ShadedPoint at_near = shade_one({1, 0, 0}, m);
  CHECK(at_near.rgba == Rgba{255, 255, 255, 255});
  CHECK(at_near.keep);
  CHECK(shade_one({0, 1.5, 0}, m).rgba == Rgba{128, 128, 128, 255});
  CHECK(shade_one({0, 0, 2}, m).rgba == Rgba{0, 0, 0, 255});
  CHECK(shade_one({0, 0, 9}, m).keep);
  CHECK(shade_one({0, 0, 0.1}, m).rgba == Rgba{255, 255, 255, 255});
}

TEST_CASE("AxisColor") {
  const ShadingMode m(AxisColor{{0, 0, 0}, {2, 4, 1}});
  CHECK(shade_one({1, 1, 1}, m).rgba == Rgba{128, 64, 255, 255});
  CHECK(shade_one({-3, 8, 0}, m).rgba == Rgba{0, 255, 0, 255});
}

TEST_CASE("DepthRainbow band and hue") {
  const ShadingMode m(DepthRainbow{1.2, 2.5, 1.3});
  const ShadedPoint lo = shade_one({1.2, 0, 0}, m), hi = shade_one({2.5, 0, 0}, m);
  CHECK(lo.keep);
  CHECK(hi.keep);
  CHECK(lo.rgba == Rgba{255, 0, 0, 255});
  CHECK(hi.rgba == Rgba{255, 0, 0, 255});
  CHECK_FALSE(shade_one({1.19, 0, 0}, m).keep);
  CHECK_FALSE(shade_one({2.51, 0, 0}, m).keep);
  // A third of a cycle in: hue 120.
  CHECK(shade_one({1.2 + 1.3 / 3.0, 0, 0}, m).rgba == Rgba{0, 255, 0, 255});
}

TEST_CASE("NaturalColor cutoffs") {
  const ShadingMode m(NaturalColor{2.0, 4.0});
  CHECK_FALSE(shade_one({5, 0, 0}, m).keep);
  CHECK(shade_one({2, 0, 0}, m).keep);
  CHECK(shade_one({0, 4, 0}, m).keep);
  CHECK(shade_one({0, 0, 3}, m, 0.0, {1, 2, 3}).rgba == Rgba{1, 2, 3, 255});
  CHECK_FALSE(shade_one({1.999, 0, 0}, m).keep);
  CHECK_FALSE(shade_one({4.001, 0, 0}, m).keep);
}

TEST_CASE("keep predicates are closed interval tests") {
  const ShadingMode rainbow(DepthRainbow{1.2, 2.5, 1.3});
  const ShadingMode natural(NaturalColor{2.0, 4.0});
  for (double d = 0.05; d < 6.0; d += 0.01) {
    CHECK(shade_one({d, 0, 0}, rainbow).keep == (d >= 1.2 && d <= 2.5));
    CHECK(shade_one({0, d, 0}, natural).keep == (d >= 2.0 && d <= 4.0));
  }
}

TEST_CASE("Sonar ping") {
  const ShadingMode m(Sonar{1.0, 5.0, 0.15});
  // At t = 0.3 the ping is at 1.5 m.
  CHECK(shade_one({1.5, 0, 0}, m, 0.3, {200, 100, 50}).rgba == Rgba{200, 100, 50, 255});
  CHECK_FALSE(shade_one({3.0, 0, 0}, m, 0.3).keep);
  const ShadedPoint edge = shade_one({1.65, 0, 0}, m, 0.3, {255, 255, 255});
  CHECK(edge.keep);
  CHECK(edge.rgba.r == 94);  // 255 * exp(-1)
}

TEST_CASE("Sonar is exactly periodic") {
  const PointCloud c = random_cloud(20000, 10.0, 5);
  const Pose viewer{{0.3, -0.2, 0.1}, UnitQuaternion::identity()};
  for (double period : {1.0, 0.37, 2.5}) {
    const ShadingMode m(Sonar{period, 5.0, 0.15});
    for (double t : {0.0, 0.3, 0.71, 12.25}) {
      CHECK(shade(c, m, viewer, t) == shade(c, m, viewer, t + period));
    }
  }
  const ShadingMode one(Sonar{1.0, 5.0, 0.15});
  CHECK(shade(c, one, viewer, 0.3) == shade(c, one, viewer, 1.3));
}

TEST_CASE("shade is pure and kept points are well formed") {
  const PointCloud c = random_cloud(5000, 8.0, 9);
  const Pose viewer{{0.5, 0.5, 0.5}, UnitQuaternion::identity()};
  const PointSizeConfig sizing;
  const std::vector<ShadingMode> modes{ShadingMode(DistanceRamp{}), ShadingMode(AxisColor{}),
                                       ShadingMode(DepthRainbow{}), ShadingMode(NaturalColor{}),
                                       ShadingMode(Sonar{})};
  for (const ShadingMode& m : modes) {
    const auto a = shade(c, m, viewer, 0.42);
    CHECK(a == shade(c, m, viewer, 0.42));
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i] == shade_point(c.points()[i], m, viewer.translation, 0.42));
      if (!a[i].keep) continue;
      CHECK(a[i].rgba.a == 255);
      CHECK(std::isfinite(a[i].size_px));
      CHECK(a[i].size_px >= sizing.min_px);
      CHECK(a[i].size_px <= sizing.max_px);
    }
  }
}

TEST_CASE("mode construction validates parameters") {
  CHECK_THROWS_AS(ShadingMode(DistanceRamp{2, 1}), ModeError);
  CHECK_THROWS_AS(ShadingMode(DepthRainbow{1, 2, 0}), ModeError);
  CHECK_THROWS_AS(ShadingMode(NaturalColor{4, 4}), ModeError);
  CHECK_THROWS_AS(ShadingMode(Sonar{0, 5, 0.1}), ModeError);
  CHECK_THROWS_AS(ShadingMode(Sonar{1, 5, 0}), ModeError);
  CHECK_THROWS_AS(ShadingMode(AxisColor{{0, 0, 0}, {1, 0, 1}}), ModeError);
  CHECK_THROWS_AS(ShadingMode::kind_from_name("lighting"), ModeError);
  const std::vector<double> two{1.0, 2.0};
  CHECK_THROWS_AS(ShadingMode::from_parameters(ModeKind::Sonar, two), ModeError);

  for (const char* name : {"distance", "axis", "rainbow", "natural", "sonar"}) {
    const ModeKind k = ShadingMode::kind_from_name(name);
    const ShadingMode defaults = [&] {
      switch (k) {
        case ModeKind::DistanceRamp: return ShadingMode(DistanceRamp{});
        case ModeKind::AxisColor: return ShadingMode(AxisColor{});
        case ModeKind::DepthRainbow: return ShadingMode(DepthRainbow{});
        case ModeKind::NaturalColor: return ShadingMode(NaturalColor{});
        case ModeKind::Sonar: return ShadingMode(Sonar{});
      }
      return ShadingMode();
    }();
    CHECK(defaults.name() == name);
    CHECK(defaults.parameters().size() == ShadingMode::parameter_count(k));
    CHECK(ShadingMode::from_parameters(k, defaults.parameters()) == defaults);
  }
}

TEST_CASE("point_size_px") {
  CHECK(point_size_px(2.0, 4, 2, 1, 16) == 4.0);
  CHECK(point_size_px(1.0, 4, 2, 1, 16) == 8.0);
  CHECK(point_size_px(1e12, 4, 2, 1, 16) == 1.0);
  CHECK(point_size_px(1e-6, 4, 2, 1, 16) == 16.0);
  CHECK_THROWS_AS(point_size_px(0.0, 4, 2, 1, 16), ModeError);
  CHECK_THROWS_AS(point_size_px(-1.0, 4, 2, 1, 16), ModeError);
}

TEST_CASE("batch record layout is little-endian with a 24-byte stride") {
  ShadedPoint s;
  s.keep = true;
  s.rgba = {1, 2, 3, 255};
  s.size_px = 4.0f;
  const std::vector<Vec3> pos{{1, 2, 3}};
  const RenderBatch b = build_batch(pos, std::vector{s}, SingleBuffer{});
  REQUIRE(b.count() == 1);
  CHECK(asab::test::to_hex(as_u8(b.bytes())) == "0000803f0000004000004040010203ff0000804000000000");
  CHECK(b.record(0) == BatchRecord{1.0f, 2.0f, 3.0f, {1, 2, 3, 255}, 4.0f});
  CHECK_THROWS(RenderBatch(std::vector<std::byte>(25), 1));
}

TEST_CASE("build_batch strategies are byte-identical") {
  CHECK(build_batch({}, {}, PerPoint{}).count() == 0);
  CHECK(build_batch({}, {}, Chunked{}).bytes().empty());
  CHECK(build_batch({}, {}, SingleBuffer{}).count() == 0);

  std::mt19937_64 rng(1234);
  const std::vector<ShadingMode> modes{ShadingMode(DistanceRamp{}), ShadingMode(NaturalColor{0.2, 0.6}),
                                       ShadingMode(DepthRainbow{0.1, 0.5, 0.4}), ShadingMode(Sonar{1, 1, 0.1})};
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(0, 5000)(rng);
    const PointCloud c = random_cloud(n, 1.5, rng());
    const ShadingMode& m = modes[static_cast<std::size_t>(trial) % modes.size()];
    const auto shaded = shade(c, m, Pose::identity(), 0.25);
    const auto positions = c.positions();
    const RenderBatch single = build_batch(positions, shaded, SingleBuffer{});
    const std::size_t kept = static_cast<std::size_t>(
        std::count_if(shaded.begin(), shaded.end(), [](const ShadedPoint& s) { return s.keep; }));
    CHECK(single.count() == kept);
    CHECK(single.bytes().size() == kept * RenderBatch::kStride);
    CHECK(build_batch(positions, shaded, PerPoint{}) == single);
    CHECK(build_batch(positions, shaded, Chunked{1023}) == single);
    CHECK(build_batch(positions, shaded, Chunked{1}) == single);
    CHECK(build_batch(positions, shaded, Chunked{7}) == single);
    for (const BatchStrategy& s : {BatchStrategy{PerPoint{}}, BatchStrategy{Chunked{}}, BatchStrategy{SingleBuffer{}}}) {
      CHECK(shade_and_batch(c, m, Pose::identity(), 0.25, s) == single);
    }
  }
}

TEST_CASE("batch records decode back to positions, colors and sizes") {
  const PointCloud c = random_cloud(100000, 0.5, 77);
  const ShadingMode m(DistanceRamp{0.0, 0.5});
  const auto shaded = shade(c, m, Pose::identity(), 0.0);
  const RenderBatch b = build_batch(c.positions(), shaded, SingleBuffer{});
  CHECK(b.count() == 100000);
  CHECK(b.bytes().size() == b.count() * 24);
  for (std::size_t i = 0; i < b.count(); i += 97) {
    const BatchRecord r = b.record(i);
    CHECK(r.x == static_cast<float>(c.points()[i].position.x));
    CHECK(r.y == static_cast<float>(c.points()[i].position.y));
    CHECK(r.z == static_cast<float>(c.points()[i].position.z));
    CHECK(r.rgba == shaded[i].rgba);
    CHECK(r.size_px == shaded[i].size_px);
  }
}

TEST_CASE("strategy names") {
  CHECK(strategy_name(strategy_from_name("per-point")) == "per-point");
  CHECK(std::get<Chunked>(strategy_from_name("chunked", 64)).n == 64);
  CHECK(strategy_name(strategy_from_name("single")) == "single");
  CHECK_THROWS(strategy_from_name("bogus"));
  CHECK_THROWS(strategy_from_name("chunked", 0));
}

TEST_CASE("write_shaded_ply keeps only kept points") {
  const PointCloud c = load_cloud(fixture_dir() / "natural_band.ply");
  const auto shaded = shade(c, ShadingMode(NaturalColor{2.0, 4.0}), Pose::identity(), 0.0);
  std::stringstream out;
  write_shaded_ply(out, c, shaded);
  const std::string text = out.str();
  CHECK(text.find("element vertex 5\n") != std::string::npos);
  const PointCloud back = parse_cloud(out, CloudFormat::PlyAscii);
  REQUIRE(back.size() == 5);
  for (const CloudPoint& p : back.points()) {
    CHECK(p.position.norm() >= 2.0);
    CHECK(p.position.norm() <= 4.0);
  }
}
