#include <doctest.h>

#include <vector>

#include "helpers.hpp"
#include "tddm/mask.hpp"

using namespace tddm;

TEST_CASE("otsu splits a bimodal sample between the modes") {
  std::vector<double> v;
  for (int i = 0; i < 100; ++i) v.push_back(0.1);
  for (int i = 0; i < 100; ++i) v.push_back(0.9);
  const mask::OtsuSplit s = mask::otsu_split(v, 64);
  CHECK(s.threshold > 0.1);
  CHECK(s.threshold < 0.9);
  CHECK(s.separability == doctest::Approx(1.0));
}

TEST_CASE("otsu of a constant sample has zero separability") {
  std::vector<double> v(50, 0.4);
  CHECK(mask::otsu_split(v, 16).separability == 0.0);
}

TEST_CASE("threshold mask keeps strong motion only") {
  Plane mag(8, 8, 0.0);
  mag.at(3, 3) = 2.0;
  mag.at(4, 3) = 2.0;
  const mask::BinaryMask m = mask::threshold_mask(mag, {});
  CHECK(m.kept_count() == 2);
  CHECK(m.kept(3, 3));
  CHECK(mask::masking_amount(m) == doctest::Approx(62.0 / 64.0));
}

TEST_CASE("floor blanks weak uniform motion") {
  const mask::BinaryMask m = mask::threshold_mask(Plane(8, 8, 0.01), {});
  CHECK(m.kept_count() == 0);
}

TEST_CASE("min_keep_fraction retains the strongest pixels") {
  Plane mag(8, 8, 0.0);
  for (int x = 0; x < 8; ++x) mag.at(x, 0) = 0.001 * (x + 1);
  mask::ThresholdPolicy p;
  p.min_keep_fraction = 4.0 / 64.0;
  const mask::BinaryMask m = mask::threshold_mask(mag, p);
  CHECK(m.kept_count() == 4);
  CHECK(m.kept(7, 0));
  CHECK_FALSE(m.kept(0, 0));
}

TEST_CASE("apply_mask multiplies and counts calls") {
  mask::BinaryMask m(8, 8, 0);
  m.set(1, 1, true);
  const std::uint64_t before = mask::apply_mask_calls();
  const Frame out = mask::apply_mask(Frame(8, 8, 0.5), m);
  CHECK(mask::apply_mask_calls() == before + 1);
  CHECK(out.at(1, 1) == 0.5);
  CHECK(out.at(2, 2) == 0.0);
  CHECK_THROWS_AS(mask::apply_mask(Frame(8, 9), m), ContractViolation);
}

TEST_CASE("identical frames are fully masked") {
  SplitMix64 rng(1);
  const Frame f(test::smooth_texture(24, 24, rng));
  const mask::TddmResult r = mask::tddm(f, f, {}, {});
  CHECK(r.masking_amount == 1.0);
  for (double v : r.masked.values()) CHECK(v == 0.0);
}

TEST_CASE("a moving object survives masking on a still background") {
  Plane a(48, 48, 0.0), b(48, 48, 0.0);
  for (int y = 8; y < 12; ++y) {
    for (int x = 8; x < 12; ++x) {
      a.at(x, y) = 1.0;
      b.at(x + 1, y) = 1.0;
    }
  }
  const mask::TddmResult r = mask::tddm(Frame(a), Frame(b), {}, {});
  CHECK(r.masking_amount > 0.5);
  CHECK(r.masking_amount < 1.0);
  CHECK(r.mask.kept(10, 10));
  CHECK_FALSE(r.mask.kept(40, 40));
}

TEST_CASE("threshold policy validation") {
  mask::ThresholdPolicy p;
  p.bins = 1;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}
