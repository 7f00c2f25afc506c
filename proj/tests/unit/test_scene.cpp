#include <doctest.h>

#include <cmath>
#include <filesystem>

#include <Eigen/LU>

#include "flatsplat/dataset.hpp"
#include "flatsplat/errors.hpp"
#include "oracles.hpp"

using namespace flatsplat;

TEST_CASE("a point on the optical axis projects to the image centre") {
  CameraPose cam;
  cam.position = {0.3, 0.7};
  cam.heading = 0.9;
  cam.focal = 50;
  cam.width = 40;
  for (double depth : {0.02, 0.5, 3.0, 100.0}) {
    const auto p = project_point(cam, cam.position + depth * cam.forward());
    CHECK(p.u == doctest::Approx(20.0).epsilon(1e-12));
    CHECK(p.depth == doctest::Approx(depth).epsilon(1e-12));
  }
}

TEST_CASE("projection of depth 2, lateral 1 with focal 64 and width 128") {
  CameraPose cam;
  cam.focal = 64;
  cam.width = 128;
  // heading 0 looks along +x, so the lateral axis is +y
  const auto p = project_point(cam, {2.0, 1.0});
  CHECK(p.u == doctest::Approx(96.0).epsilon(1e-15));
  CHECK(p.depth == doctest::Approx(2.0));
}

TEST_CASE("points at or behind the near plane are rejected") {
  CameraPose cam;
  cam.focal = 64;
  cam.width = 128;
  CHECK_THROWS_AS(project_point(cam, {0.0, 1.0}), BehindCamera);
  CHECK_THROWS_AS(project_point(cam, {kNearPlane, 0.0}), BehindCamera);
  CHECK_THROWS_AS(project_point(cam, {-1.0, 0.0}), BehindCamera);
  CHECK_NOTHROW(project_point(cam, {2 * kNearPlane, 0.0}));
}

TEST_CASE("a lateral step at fixed depth moves u by focal * step / depth") {
  Rng rng = make_stream(1, "lateral");
  for (int trial = 0; trial < 200; ++trial) {
    const CameraPose cam = oracle::random_camera(rng, 96);
    const double depth = oracle::uniform(rng, 0.1, 5);
    const double lat = oracle::uniform(rng, -2, 2);
    const double eps = oracle::uniform(rng, -0.1, 0.1);
    const Vec2 p = cam.position + depth * cam.forward() + lat * cam.lateral();
    const double du = project_point(cam, p + eps * cam.lateral()).u - project_point(cam, p).u;
    CHECK(std::abs(du - cam.focal * eps / depth) <= 1e-9);
  }
}

TEST_CASE("the projection Jacobian matches finite differences") {
  Rng rng = make_stream(2, "jacobian");
  for (int trial = 0; trial < 100; ++trial) {
    const CameraPose cam = oracle::random_camera(rng);
    const Vec2 p = cam.position + oracle::uniform(rng, 0.5, 3) * cam.forward() +
                   oracle::uniform(rng, -1, 1) * cam.lateral();
    const Vec2 j = projection_jacobian(cam, p);
    const double h = 1e-6;
    for (int a = 0; a < 2; ++a) {
      Vec2 d = Vec2::Zero();
      d[a] = h;
      const double fd = (project_point(cam, p + d).u - project_point(cam, p - d).u) / (2 * h);
      CHECK(std::abs(fd - j[a]) <= 1e-5 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("covariances are symmetric positive definite") {
  Rng rng = make_stream(3, "spd");
  for (int trial = 0; trial < 1000; ++trial) {
    GaussianPrimitive g;
    g.scale = {std::exp(oracle::uniform(rng, -6, 1)), std::exp(oracle::uniform(rng, -6, 1))};
    g.rotation = oracle::uniform(rng, -10, 10);
    const Mat2 s = g.covariance();
    CHECK(s(0, 1) == s(1, 0));
    CHECK(s.determinant() > 0);
    CHECK(s.trace() > 0);
  }
}

TEST_CASE("opacity is the logistic of the logit") {
  GaussianPrimitive g;
  g.opacity_logit = 0;
  CHECK(g.opacity() == 0.5);
  g.opacity_logit = -800;
  CHECK(g.opacity() >= 0.0);
  g.opacity_logit = 800;
  CHECK(g.opacity() <= 1.0);
}

TEST_CASE("camera and view validation") {
  CameraPose cam;
  cam.focal = 10;
  cam.width = 8;
  CHECK_NOTHROW(validate(cam));
  cam.width = 7;
  CHECK_THROWS_AS(validate(cam), ConfigError);
  cam.width = 8;
  cam.focal = 0;
  CHECK_THROWS_AS(validate(cam), ConfigError);

  ViewRecord v;
  v.camera.focal = 8;
  v.camera.width = 8;
  v.image.assign(8, Color{0, 0, 0});
  CHECK_NOTHROW(validate(v));
  v.gt_mask = Mask(7, 0);
  CHECK_THROWS_AS(validate(v), SchemaError);
  v.gt_mask.reset();
  v.image.pop_back();
  CHECK_THROWS_AS(validate(v), SchemaError);
}

TEST_CASE("dataset generation is deterministic and seed dependent") {
  SceneConfig c;
  c.n_views = 10;
  const Dataset a = generate_dataset(c);
  const Dataset b = generate_dataset(c);
  CHECK(serialize_dataset(a) == serialize_dataset(b));
  c.rng_seed = 1;
  const Dataset other = generate_dataset(c);
  CHECK(serialize_dataset(a) != serialize_dataset(other));
}

TEST_CASE("no distractors means empty masks") {
  SceneConfig c;
  c.distractor_view_fraction = 0;
  const Dataset d = generate_dataset(c);
  for (const auto& v : d.views) {
    REQUIRE(v.gt_mask);
    for (auto b : *v.gt_mask) CHECK(b == 0);
  }
}

TEST_CASE("the distractor view count is round(fraction * views)") {
  SceneConfig c;
  c.n_views = 40;
  c.distractor_view_fraction = 0.3;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    c.rng_seed = seed;
    const Dataset d = generate_dataset(c);
    const Dataset clean = [&] {
      SceneConfig k = c;
      k.distractor_view_fraction = 0;
      return generate_dataset(k);
    }();
    // A view carries distractors exactly when its image differs from the clean render.
    int carrying = 0;
    for (std::size_t v = 0; v < d.views.size(); ++v) carrying += d.views[v].image != clean.views[v].image;
    CHECK(carrying == 12);
  }
}

TEST_CASE("generated views are valid, in the unit square and aligned with the static scene") {
  SceneConfig c;
  c.n_views = 12;
  const Dataset d = generate_dataset(c);
  CHECK(d.primitives.size() == static_cast<std::size_t>(c.n_background_gaussians));
  CHECK(d.views.size() == 12);
  CHECK(d.test_views.size() == static_cast<std::size_t>(c.n_test_views));
  for (const auto& v : d.views) {
    CHECK_NOTHROW(validate(v));
    CHECK(v.camera.position.x() >= 0);
    CHECK(v.camera.position.x() <= 1);
    CHECK(v.camera.position.y() >= 0);
    CHECK(v.camera.position.y() <= 1);
  }
  for (const auto& v : d.test_views) {
    REQUIRE(v.gt_mask);
    for (auto b : *v.gt_mask) CHECK(b == 0);
  }
}

TEST_CASE("invalid scene configs are rejected") {
  SceneConfig c;
  c.distractor_view_fraction = 1.5;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = SceneConfig{};
  c.n_views = 0;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = SceneConfig{};
  c.image_width = 4;
  CHECK_THROWS_AS(validate(c), ConfigError);
}

TEST_CASE("dataset files round-trip exactly") {
  SceneConfig c;
  c.n_views = 6;
  c.distractor_view_fraction = 0.5;
  const Dataset d = generate_dataset(c);
  const auto path = std::filesystem::temp_directory_path() / "flatsplat_unit_dataset.json";
  save_dataset(d, path);
  const Dataset back = load_dataset(path);
  std::filesystem::remove(path);
  CHECK(back == d);

  Dataset empty;
  empty.config = c;
  CHECK(parse_dataset(serialize_dataset(empty)) == empty);
}

TEST_CASE("truncated or mismatched dataset files raise schema errors") {
  SceneConfig c;
  c.n_views = 3;
  const std::string text = serialize_dataset(generate_dataset(c));
  CHECK_THROWS_AS(parse_dataset(text.substr(0, text.size() / 2)), SchemaError);
  CHECK_THROWS_AS(parse_dataset(""), SchemaError);
  std::string wrong = text;
  const auto at = wrong.find("\"schema_version\":1");
  REQUIRE(at != std::string::npos);
  wrong.replace(at, 18, "\"schema_version\":9");
  CHECK_THROWS_AS(parse_dataset(wrong), SchemaError);
  CHECK_THROWS_AS(load_dataset("/nonexistent/flatsplat.json"), IoError);
}
