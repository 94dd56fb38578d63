#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "dwipc/volcore/angles.hpp"
#include "dwipc/volcore/io.hpp"
#include "dwipc/volcore/series.hpp"
#include "test_util.hpp"

using namespace dwipc;

TEST(WrapAngle, CanonicalRepresentatives) {
  EXPECT_DOUBLE_EQ(wrap_angle(3 * kPi), kPi);
  EXPECT_NEAR(wrap_angle(-3 * kPi / 2), kPi / 2, 1e-12);
  EXPECT_EQ(wrap_angle(0.1), 0.1);
  EXPECT_EQ(wrap_angle(kPi), kPi);
  EXPECT_EQ(wrap_angle(-kPi), kPi);
}

TEST(WrapAngle, RejectsNonFinite) {
  EXPECT_THROW(wrap_angle(std::nan("")), Error);
  EXPECT_THROW(wrap_angle(INFINITY), Error);
}

TEST(WrapAngle, RangeCongruenceAndIdempotence) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int i = 0; i < 100000; ++i) {
    const double t = u(rng);
    const double w = wrap_angle(t);
    ASSERT_GT(w, -kPi);
    ASSERT_LE(w, kPi);
    const double k = std::round((t - w) / (2 * kPi));
    ASSERT_NEAR(t - w, 2 * kPi * k, 1e-12 * std::max(1.0, std::abs(t)));
    ASSERT_EQ(wrap_angle(w), w);
  }
}

TEST(Quadrant, SignConvention) {
  EXPECT_EQ(quadrant_of(1, 1), Quadrant::Q1);
  EXPECT_EQ(quadrant_of(-1, 0.5), Quadrant::Q2);
  EXPECT_EQ(quadrant_of(-1, -1), Quadrant::Q3);
  EXPECT_EQ(quadrant_of(1, -1), Quadrant::Q4);
  EXPECT_EQ(quadrant_of(0, 0), Quadrant::Q1);
  EXPECT_EQ(quadrant_of(-1, 0), Quadrant::Q2);
  EXPECT_EQ(quadrant_of(0, -1), Quadrant::Q4);
  EXPECT_THROW(quadrant_of(std::nan(""), 0), Error);
}

TEST(Quadrant, DiagonalAnglesMapInOrder) {
  const double angles[] = {kPi / 4, 3 * kPi / 4, -3 * kPi / 4, -kPi / 4};
  const Quadrant expected[] = {Quadrant::Q1, Quadrant::Q2, Quadrant::Q3, Quadrant::Q4};
  for (int i = 0; i < 4; ++i) EXPECT_EQ(quadrant_of(std::cos(angles[i]), std::sin(angles[i])), expected[i]);
}

TEST(Quadrant, OppositeDiagonalIsSymmetricAndIrreflexive) {
  using enum Quadrant;
  EXPECT_TRUE(opposite_diagonal(Q1, Q3));
  EXPECT_FALSE(opposite_diagonal(Q1, Q1));
  EXPECT_FALSE(opposite_diagonal(Q2, Q3));
  const Quadrant all[] = {Q1, Q2, Q3, Q4};
  int pairs = 0;
  for (auto a : all) {
    EXPECT_FALSE(opposite_diagonal(a, a));
    for (auto b : all) {
      EXPECT_EQ(opposite_diagonal(a, b), opposite_diagonal(b, a));
      pairs += opposite_diagonal(a, b);
    }
  }
  EXPECT_EQ(pairs, 4);
}

TEST(Volume, RejectsBadShapes) {
  EXPECT_THROW(Volume3({0, 1, 1}), Error);
  EXPECT_THROW(Volume3({2, 2, 1}, std::vector<double>{1, 2, 3}), Error);
  Volume3 v({2, 3, 4});
  EXPECT_EQ(v.index(1, 2, 3), 1 + 2 * 2 + 3 * 6u);
}

class VolumeIo : public ::testing::Test {
 protected:
  test::TempDir dir;
};

TEST_F(VolumeIo, RoundTripSmallVolume) {
  const Volume3 v({2, 2, 1}, std::vector<double>{0, 1, 2, 3});
  save_volume(v, dir.path / "small");
  const auto back = load_volume(dir.path / "small.json");
  EXPECT_EQ(back.dims(), v.dims());
  EXPECT_EQ(std::vector<double>(back.begin(), back.end()), std::vector<double>({0, 1, 2, 3}));
}

TEST_F(VolumeIo, RoundTripIsBitExactForFloatPayloads) {
  std::mt19937_64 rng(3);
  std::normal_distribution<float> n(0.0f, 1e3f);
  std::vector<double> data(5 * 4 * 3);
  for (auto& x : data) x = n(rng);
  const Volume3 v({5, 4, 3}, data, {1.5, 2.0, 2.5});
  save_volume(v, dir.path / "a");
  const auto b = load_volume(dir.path / "a");
  EXPECT_EQ(b, v);
  save_volume(b, dir.path / "b");
  EXPECT_EQ(test::read_bytes(dir.path / "a.raw"), test::read_bytes(dir.path / "b.raw"));
}

TEST_F(VolumeIo, GoldenPayloadLayout) {
  // 1.0f, -2.0f, 0.5f, 0.0f in little-endian IEEE-754.
  const Volume3 v({2, 2, 1}, std::vector<double>{1.0, -2.0, 0.5, 0.0});
  save_volume(v, dir.path / "g");
  const std::vector<unsigned char> expected{0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0xc0,
                                            0x00, 0x00, 0x00, 0x3f, 0x00, 0x00, 0x00, 0x00};
  EXPECT_EQ(test::read_bytes(dir.path / "g.raw"), expected);
  const auto header = test::read_json(dir.path / "g.json");
  EXPECT_EQ(header["byte_order"], "little-endian");
  EXPECT_EQ(header["dtype"], "float32");
}

TEST_F(VolumeIo, ErrorKinds) {
  const auto kind_of = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::Io;
  };
  EXPECT_EQ(kind_of([&] { load_volume(dir.path / "missing"); }), ErrorKind::FileNotFound);

  save_volume(Volume3({2, 2, 1}, std::vector<double>{0, 1, 2, 3}), dir.path / "short");
  {
    auto j = test::read_json(dir.path / "short.json");
    j["dims"] = {2, 2, 2};
    std::ofstream(dir.path / "short.json") << j.dump();
  }
  EXPECT_EQ(kind_of([&] { load_volume(dir.path / "short"); }), ErrorKind::TruncatedPayload);

  save_volume(Volume3({2, 2, 2}, 1.0), dir.path / "long");
  {
    auto j = test::read_json(dir.path / "long.json");
    j["dims"] = {2, 2, 1};
    std::ofstream(dir.path / "long.json") << j.dump();
  }
  EXPECT_EQ(kind_of([&] { load_volume(dir.path / "long"); }), ErrorKind::DimsMismatch);

  save_volume(Volume3({2, 2, 1}, 1.0), dir.path / "nan");
  {
    std::fstream f(dir.path / "nan.raw", std::ios::in | std::ios::out | std::ios::binary);
    const unsigned char qnan[4] = {0x00, 0x00, 0xc0, 0x7f};
    f.write(reinterpret_cast<const char*>(qnan), 4);
  }
  EXPECT_EQ(kind_of([&] { load_volume(dir.path / "nan"); }), ErrorKind::InvalidData);

  save_volume(Volume3({2, 2, 1}, 1.0), dir.path / "be");
  {
    auto j = test::read_json(dir.path / "be.json");
    j["byte_order"] = "big-endian";
    std::ofstream(dir.path / "be.json") << j.dump();
  }
  EXPECT_EQ(kind_of([&] { load_volume(dir.path / "be"); }), ErrorKind::InvalidHeader);
}

TEST_F(VolumeIo, MultiChannelContainer) {
  std::vector<Volume3> ch{Volume3({2, 1, 1}, std::vector<double>{1, 2}), Volume3({2, 1, 1}, std::vector<double>{3, 4})};
  save_channels(ch, dir.path / "mc");
  const auto back = load_channels(dir.path / "mc");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1][0], 3.0);
  EXPECT_THROW(load_volume(dir.path / "mc"), Error);
}

TEST(Gradients, ParsesRows) {
  std::istringstream a("0 0 0 0\n");
  const auto t = parse_gradients(a);
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0].b, 0.0);

  std::istringstream b("# header\n1000 1 0 0   # x axis\n\n");
  const auto u = parse_gradients(b);
  ASSERT_EQ(u.size(), 1u);
  EXPECT_EQ(u[0], (GradientEntry{1000, {1, 0, 0}}));
}

TEST(Gradients, RejectsBadRows) {
  const auto kind_of = [](const char* text) {
    std::istringstream in(text);
    try {
      parse_gradients(in);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::Io;
  };
  EXPECT_EQ(kind_of("1000 2 0 0\n"), ErrorKind::NonUnitDirection);
  EXPECT_EQ(kind_of("1000 1 0\n"), ErrorKind::CountMismatch);
  EXPECT_EQ(kind_of("-5 1 0 0\n"), ErrorKind::InvalidData);
  EXPECT_EQ(kind_of("1000 x 0 0\n"), ErrorKind::InvalidData);
}

TEST(Gradients, SaveLoadRoundTrip) {
  test::TempDir dir;
  const auto t = single_shell_scheme(3, 30, 1000);
  EXPECT_EQ(t.size(), 33u);
  EXPECT_EQ(t.count_b0(), 3u);
  save_gradients(t, dir.path / "g.txt");
  EXPECT_EQ(load_gradients(dir.path / "g.txt"), t);
}

TEST(Series, ValidatesCounts) {
  MagnitudeSeries s;
  s.volumes.push_back(Volume3({2, 2, 2}));
  s.gradients = single_shell_scheme(1, 1, 1000);
  EXPECT_THROW(s.validate(), Error);
}
