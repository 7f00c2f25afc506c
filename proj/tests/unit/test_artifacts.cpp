#include <doctest.h>

#include <cstring>

#include "flatsplat/artifacts.hpp"
#include "flatsplat/errors.hpp"

using namespace flatsplat;

namespace {

template <typename A, typename B>
bool same_span(A a, B b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin());
}

}  // namespace

TEST_CASE("csv headers") {
  CHECK(std::strcmp(kMetricsHeader, "iter,psnr,ssim,mask_iou,mask_f1,n_gaussians") == 0);
  CHECK(std::strcmp(kAnchorsHeader, "t_star,sigma2_max,T_o,T_b,T_b2o,T_o2b,mode") == 0);
  CHECK(std::strcmp(kOcHeader, "index,m,oc") == 0);
  MetricsRow r{60, 31.5, 0.9, 0.25, 0.5, 24};
  CHECK(metrics_csv({r}) == std::string(kMetricsHeader) + "\n60,31.5,0.9,0.25,0.5,24\n");
  ObservationStats st;
  st.m = 3;
  st.oc = 0.125;
  CHECK(oc_csv({st}) == "index,m,oc\n0,3,0.125\n");
}

TEST_CASE("training configs round-trip through json") {
  TrainConfig c;
  c.iterations = 123;
  c.lambda_s = 0.3;
  c.seed = 9;
  c.threads = 2;
  c.ablations.occ = false;
  c.ablations.assessment = AssessmentMode::BetaOnly;
  c.anchors.lambda4 = 0.1;
  c.lr.position = 2e-3;
  CHECK(train_config_from_json(to_json(c)) == c);
}

TEST_CASE("checkpoints round-trip") {
  SceneConfig sc;
  sc.n_views = 8;
  sc.n_test_views = 2;
  sc.image_width = 128;
  sc.distractor_view_fraction = 0.5;
  const Dataset ds = generate_dataset(sc);
  TrainConfig cfg;
  cfg.iterations = 40;
  cfg.eval_every = 20;
  const TrainState s = train(ds, cfg);
  REQUIRE(s.anchors.has_value());
  REQUIRE(s.history.size() == 2);

  Checkpoint c = parse_checkpoint(serialize_checkpoint(s, cfg));
  CHECK(c.config == cfg);
  CHECK(c.state.iteration == s.iteration);
  CHECK(c.state.primitives == s.primitives);
  CHECK(c.state.stats == s.stats);
  CHECK(c.state.origin == s.origin);
  CHECK(c.state.anchors == s.anchors);
  CHECK(c.state.beta_scale == s.beta_scale);
  CHECK(c.state.history == s.history);
  CHECK(same_span(c.state.uncertainty.mlp().params(), s.uncertainty.mlp().params()));
  CHECK(c.state.uncertainty.embedding() == s.uncertainty.embedding());
  CHECK(same_span(c.state.mask.mlp().params(), s.mask.mlp().params()));

  restore(c.state, ds);
  for (std::size_t v = 0; v < ds.views.size(); ++v) {
    CHECK(predict_clean_mask(c.state, v) == predict_clean_mask(s, v));
  }
  CHECK(evaluate(c.state, ds, cfg).row == evaluate(s, ds, cfg).row);

  SceneConfig other = sc;
  other.n_views = 9;
  CHECK_THROWS_AS(restore(c.state, generate_dataset(other)), ConfigError);
  CHECK_THROWS_AS(parse_checkpoint("{}"), SchemaError);
}

TEST_CASE("scanline text round-trips") {
  const Image img{{0.1, 0.2, 0.3}, {1.0, 0.0, 0.5}};
  CHECK(parse_image_text(image_text(img)) == img);
  CHECK_THROWS_AS(parse_image_text("SPLAT1D 3\n0 0 0\n"), SchemaError);
  CHECK_THROWS_AS(parse_image_text("P3 1 1"), SchemaError);
  CHECK(scalar_text({0.5, 2.0}) == "0.5\n2\n");
}
