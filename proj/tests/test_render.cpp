#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "spdcsim/render.hpp"

using namespace spdcsim;

namespace {

constexpr double kPi = std::numbers::pi;

ProcessParams process(ProcessKind kind, double walkoff = 0.0) {
  ProcessParams p;
  p.kind = kind;
  p.magnification = 10.0;
  p.walkoff_offset_mm = walkoff;
  return p;
}

RingSet pair_rings() { return farfield_rings(build_mask(MaskArrangement::pair, 2.0, 1.5), process(ProcessKind::repeated_type_I)); }

const ImageGrid kGrid = ImageGrid::centered(240, 240, 0.12);

std::filesystem::path temp_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("spdcsim_test_render_" + name);
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

std::vector<char> slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

// Mean of the rendered field along ring `a`, skipping points within 4 sigma of any other ring.
double isolated_arc_mean(const IntensityImage& img, const RingSet& set, std::size_t a, double sigma) {
  double sum = 0.0;
  int n = 0;
  for (int k = 0; k < 3600; ++k) {
    const double t = 2.0 * kPi * k / 3600.0;
    const Vec2 p = set.rings[a].center + set.rings[a].radius * Vec2{std::cos(t), std::sin(t)};
    bool near_other = false;
    for (std::size_t b = 0; b < set.rings.size(); ++b) {
      if (b == a) continue;
      if (std::abs(distance(p, set.rings[b].center) - set.rings[b].radius) < 4.0 * sigma) near_other = true;
    }
    if (near_other) continue;
    const double v = img.sample(p);
    if (v == 0.0) continue;  // off the grid
    sum += v;
    ++n;
  }
  return n ? sum / n : 0.0;
}

} // namespace

TEST(RenderRings, SingleRingPeaksAtScaleOnTheCircle) {
  const auto set = farfield_rings(build_mask(MaskArrangement::single, 2.0, 0.0), process(ProcessKind::repeated_type_I));
  const double sigma = set.rings[0].radius / 20.0;
  const std::vector<double> scale{0.7};
  const auto img = render_rings(set, sigma, scale, kGrid);
  EXPECT_LE(img.max(), 0.7);
  EXPECT_GE(img.max(), 0.7 * 0.99);
  // the brightest pixel sits within one pitch of the circle
  std::size_t best = 0;
  for (std::size_t i = 0; i < img.values().size(); ++i)
    if (img.values()[i] > img.values()[best]) best = i;
  const Vec2 p = kGrid.position(best % kGrid.width, best / kGrid.width);
  EXPECT_LE(std::abs(distance(p, set.rings[0].center) - set.rings[0].radius), kGrid.pitch_mm);
}

TEST(RenderRings, IdenticalRingsDoubleExactly) {
  auto set = farfield_rings(build_mask(MaskArrangement::single, 2.0, 0.0), process(ProcessKind::repeated_type_I));
  const auto one = render_rings(set, 0.5, {}, kGrid);
  set.rings.push_back(set.rings[0]);
  const auto two = render_rings(set, 0.5, {}, kGrid);
  for (std::size_t i = 0; i < one.values().size(); ++i) EXPECT_EQ(two.values()[i], 2.0 * one.values()[i]);
}

TEST(RenderRings, Additivity) {
  const auto all = farfield_rings(build_mask(MaskArrangement::grid2x2, 2.0, 1.5), process(ProcessKind::type_II, 15.0));
  RingSet a = all;
  RingSet b = all;
  a.rings.assign(all.rings.begin(), all.rings.begin() + 3);
  b.rings.assign(all.rings.begin() + 3, all.rings.end());
  const std::vector<double> scales{0.5, 0.6, 0.7, 0.8};
  auto sum = render_rings(a, 0.6, scales, kGrid);
  sum += render_rings(b, 0.6, scales, kGrid);
  const auto joint = render_rings(all, 0.6, scales, kGrid);
  for (std::size_t i = 0; i < sum.values().size(); ++i) EXPECT_NEAR(joint.values()[i], sum.values()[i], 1e-9);
}

TEST(RenderRings, NonNegativeAndFinite) {
  const auto set = pair_rings();
  const auto img = render_rings(set, 0.5, {}, kGrid, 3);
  for (double v : img.values()) {
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_GE(v, 0.0);
  }
}

TEST(RenderRings, TwoPointsSlotsAreTwiceTheIsolatedRing) {
  const auto set = pair_rings();
  const double sigma = set.rings[0].radius / 20.0;
  const auto img = render_rings(set, sigma, {}, kGrid);
  const auto topo = overlap_topology(set);
  ASSERT_EQ(topo.slots.size(), 2u);
  for (const auto& s : topo.slots) {
    // closed form for two unit-scale rings crossing at the slot
    EXPECT_NEAR(ring_field(set, sigma, {}, s.position), 2.0, 1e-9);
    EXPECT_NEAR(img.sample(s.position) / 2.0, 1.0, 0.01);
  }
}

TEST(RenderRings, OverlapBrightnessAtLeast1Point8TimesArcMean) {
  for (const auto& set : {pair_rings(),
                          farfield_rings(build_mask(MaskArrangement::pair, 2.0, 1.5), process(ProcessKind::type_II, 15.0)),
                          farfield_rings(build_mask(MaskArrangement::single, 2.0, 0.0), process(ProcessKind::type_II, 15.0))}) {
    const double sigma = set.rings[0].radius / 20.0;
    const std::vector<double> scales(set.aperture_count, set.kind == ProcessKind::type_II ? 0.5 : 1.0);
    // wide enough to hold every ring of these layouts
    const auto img = render_rings(set, sigma, scales, ImageGrid::centered(440, 440, 0.12));
    const auto topo = overlap_topology(set);
    for (const auto& rec : topo.overlaps) {
      if (rec.kind != OverlapKind::TwoPoints) continue;
      // a ring lying on top of another has no isolated arc to compare against
      auto stacked = [&](std::size_t r) {
        for (std::size_t b = 0; b < set.rings.size(); ++b)
          if (b != r && distance(set.rings[b].center, set.rings[r].center) < 1e-9 &&
              std::abs(set.rings[b].radius - set.rings[r].radius) < 1e-9)
            return true;
        return false;
      };
      if (stacked(rec.ring_a) || stacked(rec.ring_b)) continue;
      for (const Vec2& p : rec.points) {
        const double at_slot = img.sample(p);
        for (std::size_t r : {rec.ring_a, rec.ring_b}) {
          const double arc = isolated_arc_mean(img, set, r, sigma);
          ASSERT_GT(arc, 0.0);
          EXPECT_GE(at_slot, 1.8 * arc);
        }
      }
    }
  }
}

TEST(RenderRings, ThreadCountDoesNotChangeOutput) {
  const auto set = farfield_rings(build_mask(MaskArrangement::grid2x2, 2.0, 1.5), process(ProcessKind::type_II, 15.0));
  const auto ref = encode_pgm(render_rings(set, 0.6, {}, kGrid, 1), 16);
  for (unsigned t : {2U, 3U, 8U, 0U}) EXPECT_EQ(encode_pgm(render_rings(set, 0.6, {}, kGrid, t), 16), ref);
  EXPECT_EQ(encode_pgm(render_rings(set, 0.6, {}, kGrid, 1), 16), ref);
}

TEST(RenderRings, RejectsBadParameters) {
  const auto set = pair_rings();
  EXPECT_THROW(render_rings(set, 0.0, {}, kGrid), PhysicsError);
  EXPECT_THROW(render_rings(set, 0.5, {}, ImageGrid::centered(10, 10, 0.0)), PhysicsError);
  EXPECT_THROW(render_rings(set, 0.5, {}, ImageGrid{0, 10, 0.1, {}}), PhysicsError);
}

TEST(RenderPump, SpotPositions) {
  // pitch divides 0.75 so spot centres land on pixel centres
  const auto grid = ImageGrid::centered(201, 201, 0.025);
  const auto single = render_pump(build_mask(MaskArrangement::single, 2.0, 0.0), 0.8, grid);
  EXPECT_DOUBLE_EQ(single.at(100, 100), 1.0);
  EXPECT_DOUBLE_EQ(single.at(0, 0), 0.0);  // outside the clip radius

  const auto quad = render_pump(build_mask(MaskArrangement::grid2x2, 1.0, 1.5), 0.3, grid);
  for (double sx : {-0.75, 0.75}) {
    for (double sy : {-0.75, 0.75}) {
      EXPECT_NEAR(quad.sample({sx, sy}), 1.0, 1e-3);
      EXPECT_LT(quad.sample({sx + 0.2, sy}), quad.sample({sx, sy}));
    }
  }
  EXPECT_THROW(render_pump(build_mask(MaskArrangement::single, 2.0, 0.0), 0.0, grid), PhysicsError);
}

TEST(RenderPump, RotatedMaskGivesRotatedImage) {
  const auto grid = ImageGrid::centered(256, 256, 0.02);
  const auto mask = build_mask(MaskArrangement::pair, 2.0, 1.5);
  const auto base = render_pump(mask, 0.8, grid);
  const double tol = 0.02 * base.max();
  for (double theta : {kPi / 6, kPi / 3, kPi / 2, 1.0}) {
    const auto turned = render_pump(rotate_mask(mask, theta), 0.8, grid);
    std::size_t match = 0;
    std::size_t total = 0;
    for (std::size_t row = 0; row < grid.height; ++row) {
      for (std::size_t col = 0; col < grid.width; ++col) {
        const Vec2 back = rotate_about(grid.position(col, row), {}, -theta);
        const double fc = std::round((back.x - grid.origin_mm.x) / grid.pitch_mm);
        const double fr = std::round((grid.origin_mm.y - back.y) / grid.pitch_mm);
        double ref = 0.0;
        if (fc >= 0 && fr >= 0 && fc < grid.width && fr < grid.height)
          ref = base.at(static_cast<std::size_t>(fc), static_cast<std::size_t>(fr));
        ++total;
        if (std::abs(turned.at(col, row) - ref) <= tol) ++match;
      }
    }
    EXPECT_GE(static_cast<double>(match) / static_cast<double>(total), 0.99) << theta;
  }
}

TEST(Noise, SeededAndReproducible) {
  const auto set = pair_rings();
  auto a = render_rings(set, 0.5, {}, kGrid);
  auto b = a;
  auto c = a;
  add_uniform_noise(a, 0.05, 7);
  add_uniform_noise(b, 0.05, 7);
  add_uniform_noise(c, 0.05, 8);
  EXPECT_EQ(encode_pgm(a, 16), encode_pgm(b, 16));
  EXPECT_NE(encode_pgm(a, 16), encode_pgm(c, 16));
  for (double v : a.values()) EXPECT_GE(v, 0.0);
}

TEST(Inset, PastedIntoCornerAtBasePeak) {
  IntensityImage base(ImageGrid::centered(20, 10, 1.0));
  base.at(0, 0) = 4.0;
  IntensityImage inset(ImageGrid::centered(4, 3, 1.0));
  inset.at(1, 1) = 2.0;
  composite_inset(base, inset, Corner::bottom_right);
  EXPECT_DOUBLE_EQ(base.at(17, 8), 4.0);
  EXPECT_DOUBLE_EQ(base.at(16, 7), 0.0);
  IntensityImage huge(ImageGrid::centered(30, 30, 1.0));
  EXPECT_THROW(composite_inset(base, huge, Corner::top_left), DimensionError);
}

TEST(Pgm, ZeroImageEightBit) {
  IntensityImage img(ImageGrid::centered(4, 3, 0.1));
  const auto bytes = encode_pgm(img, 8);
  const std::string header = "P5\n4 3\n255\n";
  ASSERT_EQ(bytes.size(), header.size() + 12);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(header.size())), header);
  for (std::size_t i = header.size(); i < bytes.size(); ++i) EXPECT_EQ(bytes[i], 0);
}

TEST(Pgm, SixteenBitRingCrestIsFullScale) {
  const auto set = farfield_rings(build_mask(MaskArrangement::single, 2.0, 0.0), process(ProcessKind::repeated_type_I));
  const auto img = render_rings(set, 0.5, {}, kGrid);
  const auto q = quantize(img, 16);
  EXPECT_EQ(*std::max_element(q.begin(), q.end()), 65535);
  const auto bytes = encode_pgm(img, 16);
  const std::string header = "P5\n240 240\n65535\n";
  EXPECT_EQ(bytes.size(), header.size() + 2 * 240 * 240);
  // big-endian: find a full-scale sample as 0xFF 0xFF
  bool found = false;
  for (std::size_t i = header.size(); i + 1 < bytes.size(); i += 2) found = found || (bytes[i] == 0xFF && bytes[i + 1] == 0xFF);
  EXPECT_TRUE(found);
}

TEST(Pgm, RejectsNaNAndBadDepth) {
  IntensityImage img(ImageGrid::centered(4, 4, 0.1));
  img.at(1, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(encode_pgm(img, 8), InputError);
  IntensityImage ok(ImageGrid::centered(4, 4, 0.1));
  EXPECT_THROW(encode_pgm(ok, 12), InputError);
  const auto dir = temp_dir("nan");
  EXPECT_THROW(write_image(img, dir / "x.pgm", ImageFormat::pgm, 8), InputError);
}

TEST(WriteImage, PgmRepeatableWithSidecar) {
  const auto dir = temp_dir("pgm");
  const auto img = render_rings(pair_rings(), 0.5, {}, kGrid);
  write_image(img, dir / "a.pgm", ImageFormat::pgm, 8, 42);
  write_image(img, dir / "b.pgm", ImageFormat::pgm, 8, 42);
  EXPECT_EQ(slurp(dir / "a.pgm"), slurp(dir / "b.pgm"));
  const auto meta = slurp(sidecar_path(dir / "a.pgm"));
  const std::string text(meta.begin(), meta.end());
  EXPECT_NE(text.find("pitch_mm=0.12\n"), std::string::npos);
  EXPECT_NE(text.find("origin_x_mm=-14.34\n"), std::string::npos);
  EXPECT_NE(text.find("origin_y_mm=14.34\n"), std::string::npos);
  EXPECT_NE(text.find("seed=42\n"), std::string::npos);
}

TEST(WriteImage, PngSignatureAndDeterminism) {
  const auto dir = temp_dir("png");
  const auto img = render_rings(pair_rings(), 0.5, {}, kGrid);
  for (int depth : {8, 16}) {
    write_image(img, dir / "a.png", ImageFormat::png, depth);
    write_image(img, dir / "b.png", ImageFormat::png, depth);
    const auto a = slurp(dir / "a.png");
    ASSERT_GT(a.size(), 8u);
    EXPECT_EQ(static_cast<unsigned char>(a[0]), 137);
    EXPECT_EQ(std::string(a.begin() + 1, a.begin() + 4), "PNG");
    EXPECT_EQ(a, slurp(dir / "b.png"));
  }
  const auto meta = slurp(sidecar_path(dir / "a.png"));
  EXPECT_NE(std::string(meta.begin(), meta.end()).find("seed=none"), std::string::npos);
}

TEST(WriteImage, UnwritablePathIsIoError) {
  const auto img = render_rings(pair_rings(), 0.5, {}, ImageGrid::centered(8, 8, 1.0));
  EXPECT_THROW(write_image(img, "/nonexistent_dir_xyz/a.pgm", ImageFormat::pgm, 8), IoError);
  EXPECT_THROW(write_image(img, "/nonexistent_dir_xyz/a.png", ImageFormat::png, 8), IoError);
}

TEST(RenderRings, CentralCompositeIsAtLeastTwiceSingleRing) {
  // grid rotated a quarter turn so vertical neighbours sit on the walkoff diagonal
  auto p = process(ProcessKind::type_II, 1.5 * std::sqrt(2.0) * 10.0);
  p.propagation_distance_mm = 267.0;
  const auto set = farfield_rings(build_mask(MaskArrangement::grid2x2, 2.0, 1.5, kPi / 4), p);
  const auto topo = overlap_topology(set);
  ASSERT_EQ(topo.composites.size(), 1u);
  const auto& c = topo.composites[0];
  const double sigma = c.radius / 20.0;
  const std::vector<double> scales(4, 0.5);
  double lowest = 1e300;
  for (int k = 0; k < 720; ++k) {
    const double t = 2.0 * kPi * k / 720.0;
    lowest = std::min(lowest, ring_field(set, sigma, scales, c.center + c.radius * Vec2{std::cos(t), std::sin(t)}));
  }
  EXPECT_GE(lowest, 2.0 * 0.5 - 1e-12);
}
