#include <doctest.h>

#include <cmath>
#include <functional>

#include "flatsplat/render.hpp"
#include "oracles.hpp"

using namespace flatsplat;

namespace {

CameraPose axis_camera(int width = 64) {
  CameraPose cam;
  cam.focal = width;
  cam.width = width;
  return cam;
}

std::vector<GaussianPrimitive> random_scene(Rng& rng, const CameraPose& cam, int n) {
  std::vector<GaussianPrimitive> prims;
  for (int i = 0; i < n; ++i) prims.push_back(oracle::random_primitive_in_view(rng, cam));
  return prims;
}

}  // namespace

TEST_CASE("an isotropic primitive on the axis projects to the centre") {
  const CameraPose cam = axis_camera();
  GaussianPrimitive g;
  g.position = {2.0, 0.0};
  g.scale = {0.1, 0.1};
  const auto s = project_gaussian(g, cam);
  REQUIRE(s);
  CHECK(s->mean_u == doctest::Approx(32.0));
  CHECK(s->var_u == doctest::Approx(64.0 * 64.0 * 0.01 / 4.0 + kVarianceFloor));
}

TEST_CASE("projected variance agrees with a finite-difference Jacobian") {
  Rng rng = make_stream(10, "var_u");
  for (int trial = 0; trial < 100; ++trial) {
    const CameraPose cam = oracle::random_camera(rng);
    const GaussianPrimitive g = oracle::random_primitive_in_view(rng, cam);
    const double h = 1e-6;
    Vec2 j;
    for (int a = 0; a < 2; ++a) {
      Vec2 d = Vec2::Zero();
      d[a] = h;
      j[a] = (project_point(cam, g.position + d).u - project_point(cam, g.position - d).u) / (2 * h);
    }
    const double want = j.dot(g.covariance() * j) + kVarianceFloor;
    const auto s = project_gaussian(g, cam);
    REQUIRE(s);
    CHECK(std::abs(s->var_u - want) / want < 1e-5);
  }
}

TEST_CASE("culling behind the camera and far outside the image") {
  const CameraPose cam = axis_camera();
  GaussianPrimitive g;
  g.scale = {0.01, 0.01};
  g.position = {-1.0, 0.0};
  CHECK_FALSE(project_gaussian(g, cam));
  g.position = {0.005, 0.0};
  CHECK_FALSE(project_gaussian(g, cam));
  g.position = {1.0, 5.0};  // u = 32 + 320
  CHECK_FALSE(project_gaussian(g, cam));
  g.position = {1.0, -5.0};
  CHECK_FALSE(project_gaussian(g, cam));
  g.position = {1.0, 0.55};  // u = 67.2, within 4 sigma of the right edge
  CHECK(project_gaussian(g, cam));
}

TEST_CASE("an empty scene renders the background") {
  RenderSettings rs;
  rs.background = {0.2, 0.4, 0.6};
  const RenderOutput out = render_color({}, 16, rs);
  for (const Color& c : out.color) CHECK(c == rs.background);
  for (double t : out.final_transmittance) CHECK(t == 1.0);
}

TEST_CASE("a single opaque splat shows its colour at its mean") {
  Splat1D s;
  s.mean_u = 5;
  s.var_u = 2;
  s.opacity = 1;
  s.color = {0.1, 0.7, 0.3};
  const RenderOutput out = render_color({s}, 12, RenderSettings{{0.9, 0.9, 0.9}, true, 1});
  CHECK(out.color[5] == s.color);
  CHECK(out.weight_sums[5] == 1.0);
}

TEST_CASE("blending matches a straight-line compositing oracle") {
  Rng rng = make_stream(11, "composite");
  for (int trial = 0; trial < 50; ++trial) {
    const CameraPose cam = oracle::random_camera(rng, 48);
    const auto prims = random_scene(rng, cam, 1 + trial % 8);
    const Color bg{oracle::uniform(rng, 0, 1), oracle::uniform(rng, 0, 1), oracle::uniform(rng, 0, 1)};
    std::vector<double> oc(prims.size());
    for (double& o : oc) o = oracle::uniform(rng, 0, 1);
    const RenderSettings rs{bg, false, 1};
    const RenderOutput out = render(prims, cam, rs, oc);

    auto sorted = project_scene(prims, cam);
    for (std::size_t k = 1; k < sorted.size(); ++k) CHECK(sorted[k - 1].depth <= sorted[k].depth);
    for (int x = 0; x < cam.width; ++x) {
      const auto want = oracle::composite(sorted, x, bg);
      double o = 0;
      for (std::size_t k = 0; k < sorted.size(); ++k) o += want.weights[k] * oc[sorted[k].source_index];
      for (int c = 0; c < 3; ++c) CHECK(std::abs(out.color[x][c] - want.color[c]) <= 1e-12);
      CHECK(std::abs(out.oc[x] - o) <= 1e-12);
      CHECK(std::abs(out.final_transmittance[x] - want.transmittance) <= 1e-12);
    }
  }
}

TEST_CASE("weights and transmittance conserve energy without early stopping") {
  Rng rng = make_stream(12, "conserve");
  for (int trial = 0; trial < 50; ++trial) {
    const CameraPose cam = oracle::random_camera(rng, 32);
    auto prims = random_scene(rng, cam, 30);
    for (auto& g : prims) g.opacity_logit = oracle::uniform(rng, -3, 8);
    const RenderOutput out = render(prims, cam, RenderSettings{{0, 0, 0}, false, 1});
    for (int x = 0; x < cam.width; ++x) {
      CHECK(std::abs(out.weight_sums[x] + out.final_transmittance[x] - 1.0) <= 1e-9);
      double prev = 1.0;
      for (const Contribution& c : out.pixel(x)) {
        CHECK(c.transmittance <= prev);
        CHECK(c.transmittance >= 0.0);
        CHECK(c.weight() >= 0.0);
        CHECK(c.weight() <= 1.0);
        prev = c.transmittance;
      }
    }
  }
}

TEST_CASE("early stopping cuts blending once transmittance is negligible") {
  std::vector<Splat1D> splats;
  for (int k = 0; k < 6; ++k) {
    Splat1D s;
    s.mean_u = 4;
    s.var_u = 1;
    s.depth = 1 + k;
    s.opacity = 0.995;
    s.source_index = k;
    s.color = {1, 1, 1};
    splats.push_back(s);
  }
  const RenderOutput stop = render_color(splats, 8, RenderSettings{{0, 0, 0}, true, 1});
  const RenderOutput full = render_color(splats, 8, RenderSettings{{0, 0, 0}, false, 1});
  CHECK(stop.pixel(4).size() == 2);
  CHECK(full.pixel(4).size() == 6);
  CHECK(stop.final_transmittance[4] < kEarlyStopTransmittance);
}

TEST_CASE("depth ties are broken by primitive index") {
  Splat1D a, b;
  a.depth = b.depth = 2;
  a.source_index = 3;
  b.source_index = 1;
  std::vector<Splat1D> v{a, b};
  sort_by_depth(v);
  CHECK(v[0].source_index == 1);
}

TEST_CASE("completeness rendering examples") {
  Splat1D s;
  s.mean_u = 3;
  s.var_u = 1;
  s.opacity = 1;
  const std::vector<double> zeros{0.0};
  for (double o : render_oc({s}, zeros, 8)) CHECK(o == 0.0);
  const std::vector<double> seven{0.7};
  CHECK(render_oc({s}, seven, 8)[3] == doctest::Approx(0.7).epsilon(1e-15));

  // Reusing retained weights gives the same map as a fresh blend.
  Rng rng = make_stream(13, "oc");
  const CameraPose cam = oracle::random_camera(rng);
  const auto prims = random_scene(rng, cam, 6);
  std::vector<double> oc(prims.size());
  for (double& o : oc) o = oracle::uniform(rng, 0, 0.3);
  const RenderOutput out = render(prims, cam, {}, oc);
  CHECK(render_oc(out, oc) == out.oc);
  CHECK(render_oc(project_scene(prims, cam), oc, cam.width) == out.oc);
}

TEST_CASE("rendering is identical across runs and thread counts") {
  Rng rng = make_stream(14, "threads");
  const CameraPose cam = oracle::random_camera(rng, 200);
  const auto prims = random_scene(rng, cam, 40);
  std::vector<Color> up(200);
  for (auto& c : up) c = {oracle::uniform(rng, -1, 1), oracle::uniform(rng, -1, 1), oracle::uniform(rng, -1, 1)};
  const RenderOutput one = render(prims, cam, RenderSettings{{0, 0, 0}, true, 1});
  const PrimitiveGradients g1 = backward(prims, cam, one, up, RenderSettings{{0, 0, 0}, true, 1});
  for (int threads : {1, 2, 4}) {
    const RenderSettings rs{{0, 0, 0}, true, threads};
    const RenderOutput out = render(prims, cam, rs);
    CHECK(out.color == one.color);
    const PrimitiveGradients g = backward(prims, cam, out, up, rs);
    CHECK(g.position == g1.position);
    CHECK(g.scale == g1.scale);
    CHECK(g.rotation == g1.rotation);
    CHECK(g.opacity_logit == g1.opacity_logit);
    CHECK(g.color == g1.color);
  }
}

TEST_CASE("analytic gradients match central differences") {
  constexpr double h = 1e-5;
  const std::vector<std::function<double&(GaussianPrimitive&)>> params = {
      [](GaussianPrimitive& p) -> double& { return p.position.x(); },
      [](GaussianPrimitive& p) -> double& { return p.position.y(); },
      [](GaussianPrimitive& p) -> double& { return p.scale.x(); },
      [](GaussianPrimitive& p) -> double& { return p.scale.y(); },
      [](GaussianPrimitive& p) -> double& { return p.rotation; },
      [](GaussianPrimitive& p) -> double& { return p.opacity_logit; },
      [](GaussianPrimitive& p) -> double& { return p.color[0]; },
      [](GaussianPrimitive& p) -> double& { return p.color[1]; },
      [](GaussianPrimitive& p) -> double& { return p.color[2]; },
  };
  for (int trial = 0; trial < 20; ++trial) {
    Rng rng = make_stream(trial, "unit-grad");
    const CameraPose cam = oracle::random_camera(rng);
    const auto prims = random_scene(rng, cam, 10);
    std::vector<Color> up(static_cast<std::size_t>(cam.width));
    for (auto& c : up) c = {oracle::uniform(rng, -1, 1), oracle::uniform(rng, -1, 1), oracle::uniform(rng, -1, 1)};
    const RenderSettings rs{{0.3, 0.3, 0.3}, false, 1};
    const auto objective = [&](const std::vector<GaussianPrimitive>& p) {
      const Image img = render(p, cam, rs).color;
      double f = 0;
      for (std::size_t x = 0; x < img.size(); ++x) {
        for (int c = 0; c < 3; ++c) f += up[x][c] * img[x][c];
      }
      return f;
    };
    const PrimitiveGradients g = backward(prims, cam, render(prims, cam, rs), up, rs);
    for (std::size_t i = 0; i < prims.size(); ++i) {
      const double analytic[] = {g.position[i].x(), g.position[i].y(), g.scale[i].x(),
                                 g.scale[i].y(),    g.rotation[i],     g.opacity_logit[i],
                                 g.color[i][0],     g.color[i][1],     g.color[i][2]};
      for (std::size_t k = 0; k < params.size(); ++k) {
        auto plus = prims, minus = prims;
        params[k](plus[i]) += h;
        params[k](minus[i]) -= h;
        const double fd = (objective(plus) - objective(minus)) / (2 * h);
        const double rel = std::abs(analytic[k] - fd) / std::max({std::abs(analytic[k]), std::abs(fd), 1e-6});
        CHECK(rel < 1e-4);
      }
      CHECK(g.grad_p[i] == doctest::Approx(g.position[i].norm()).epsilon(1e-15));
    }
  }
}

TEST_CASE("zero upstream gradient and zero-weight primitives get no gradient") {
  Rng rng = make_stream(15, "zero");
  const CameraPose cam = oracle::random_camera(rng);
  auto prims = random_scene(rng, cam, 5);
  // An opaque wall in front hides the last primitive completely.
  GaussianPrimitive wall;
  wall.position = cam.position + 0.2 * cam.forward();
  wall.scale = {50, 50};
  wall.opacity_logit = 800;
  prims.insert(prims.begin(), wall);
  const RenderOutput out = render(prims, cam, RenderSettings{{0, 0, 0}, true, 1});
  std::vector<Color> up(static_cast<std::size_t>(cam.width), Color{1, -1, 0.5});
  const PrimitiveGradients g = backward(prims, cam, out, up);
  for (std::size_t i = 1; i < prims.size(); ++i) CHECK(g.grad_p[i] == 0.0);

  const std::vector<Color> none(static_cast<std::size_t>(cam.width), Color{0, 0, 0});
  const PrimitiveGradients z = backward(prims, cam, out, none);
  for (std::size_t i = 0; i < prims.size(); ++i) {
    CHECK(z.grad_p[i] == 0.0);
    CHECK(z.opacity_logit[i] == 0.0);
    CHECK(z.color[i] == Color{0, 0, 0});
  }
}
