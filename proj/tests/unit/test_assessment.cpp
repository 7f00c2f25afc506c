#include <doctest.h>

#include <cmath>

#include "flatsplat/assessment.hpp"
#include "flatsplat/errors.hpp"
#include "oracles.hpp"

using namespace flatsplat;

namespace {

Image random_image(Rng& rng, std::size_t n) {
  Image img(n);
  for (auto& c : img) c = {oracle::uniform(rng, 0, 1), oracle::uniform(rng, 0, 1), oracle::uniform(rng, 0, 1)};
  return img;
}

}  // namespace

TEST_CASE("residual examples") {
  const Image black(5, Color{0, 0, 0});
  const Image white(5, Color{1, 1, 1});
  for (double r : residual_map(black, black)) CHECK(r == 0.0);
  for (double r : residual_map(black, white)) CHECK(r == 1.0);
  CHECK_THROWS_AS(residual_map(black, Image(4)), ConfigError);

  Rng rng = make_stream(30, "residual");
  const Image a = random_image(rng, 50), b = random_image(rng, 50);
  const auto r = residual_map(a, b);
  for (std::size_t x = 0; x < 50; ++x) {
    double want = 0;
    for (int c = 0; c < 3; ++c) want += std::abs(a[x][c] - b[x][c]);
    CHECK(std::abs(r[x] - want / 3) <= 1e-12);
  }
}

TEST_CASE("hybrid assessment examples") {
  const std::vector<double> r{0.2, 0.5, 0.0}, b{0.6, 0.5, 1.0};
  const auto h = hybrid_map(r, b);
  CHECK(h[0] == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(h[1] == 0.5);
  CHECK(h[2] == 0.5);
  const std::vector<double> r3{0.6, 1.5, 0.0}, b3{1.8, 1.5, 3.0};
  const auto h3 = hybrid_map(r3, b3);
  for (std::size_t x = 0; x < 3; ++x) CHECK(h3[x] == doctest::Approx(3 * h[x]).epsilon(1e-15));
}

TEST_CASE("texture of a constant image is zero") {
  for (double s : texture_map(Image(20, Color{0.3, 0.3, 0.3}))) CHECK(s == 0.0);
}

TEST_CASE("a step edge responds at the two pixels beside it") {
  Image img(20, Color{0, 0, 0});
  for (std::size_t x = 8; x < 20; ++x) img[x] = {1, 1, 1};
  const auto s = texture_map(img);
  for (std::size_t x = 0; x < 20; ++x) CHECK(s[x] == ((x == 7 || x == 8) ? 1.0 : 0.0));
}

TEST_CASE("texture is translation equivariant in the interior") {
  Rng rng = make_stream(31, "texture");
  Image img = random_image(rng, 40);
  img[20] = {3, 3, 3};  // keep the normalising maximum away from the borders
  Image shifted(40);
  for (std::size_t x = 1; x < 40; ++x) shifted[x] = img[x - 1];
  shifted[0] = img[0];
  const auto a = texture_map(img);
  const auto b = texture_map(shifted);
  for (std::size_t x = 2; x < 39; ++x) CHECK(b[x] == doctest::Approx(a[x - 1]).epsilon(1e-12));
}

TEST_CASE("observation correction examples") {
  const std::vector<double> h{0.8, 0.8, 0.8, 0.8};
  const std::vector<double> o{0.3, 0.9, 0.0, 0.0};
  const std::vector<double> s{1.0, 1.0, 1.0, 0.0};
  const CorrectionResult r = occ_correct(h, o, s);
  CHECK(r.ocr[0] == 1.0);
  CHECK(r.ocr[1] == 1.0);
  CHECK(r.ocr[2] == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(r.ocr[3] == 1.0);
  CHECK(r.corrected[2] == doctest::Approx(0.08).epsilon(1e-12));
  CHECK(r.corrected[0] == 0.8);
}

TEST_CASE("the correction ratio is monotone and bounded") {
  Rng rng = make_stream(32, "ocr");
  for (int trial = 0; trial < 2000; ++trial) {
    const double h = oracle::uniform(rng, 0, 2);
    const double o = oracle::uniform(rng, -0.1, 0.5), s = oracle::uniform(rng, 0, 1);
    const double o2 = o + oracle::uniform(rng, 0, 0.2), s2 = s + oracle::uniform(rng, 0, 0.5);
    const std::vector<double> hv{h, h, h}, ov{o, o2, o}, sv{s, s, s2};
    const CorrectionResult r = occ_correct(hv, ov, sv);
    CHECK(r.ocr[1] >= r.ocr[0]);
    CHECK(r.ocr[2] <= r.ocr[0]);
    for (std::size_t x = 0; x < 3; ++x) {
      CHECK(r.ocr[x] >= 0.0);
      CHECK(r.ocr[x] <= 1.0);
      CHECK(std::isfinite(r.corrected[x]));
      if (r.ocr[x] == 1.0) {
        CHECK(r.corrected[x] == hv[x]);
      } else if (hv[x] > 0) {
        CHECK(r.corrected[x] < hv[x]);
      }
    }
  }
}

TEST_CASE("percentiles interpolate linearly") {
  std::vector<double> v;
  for (int i = 0; i < 101; ++i) v.push_back(100 - i);
  CHECK(percentile(v, 50) == 50.0);
  CHECK(percentile(v, 99.5) == doctest::Approx(99.5));
  CHECK(percentile(v, 0) == 0.0);
  CHECK_THROWS_AS(percentile(std::vector<double>{}, 50), EmptyInput);
}

TEST_CASE("beta normalisation clamps into the unit interval") {
  const std::vector<double> b{0.05, 0.5, 2.0};
  const auto n = normalize_beta(b, 1.0);
  CHECK(n == std::vector<double>{0.05, 0.5, 1.0});
}
