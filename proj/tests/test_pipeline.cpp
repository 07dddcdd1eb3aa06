#include <catch2/catch_amalgamated.hpp>

#include "megsim/pipeline.hpp"

using namespace megsim;

TEST_CASE("reference pipeline carries the expected compute budget") {
  const PipelineModel p = case_study_pipeline();
  REQUIRE(p.stages.size() == 3);
  CHECK(p.split_index == 2);
  CHECK(total_compute_s(p) == Catch::Approx(7.58).epsilon(1e-12));
  const PipelineSplit s = split_at(p, p.split_index);
  CHECK(s.server_s == Catch::Approx(6.98).epsilon(1e-12));
  CHECK(s.device_s == Catch::Approx(0.60).epsilon(1e-12));
  CHECK(compute_latency_s(p, 1, 2) == Catch::Approx(0.55 * 12).epsilon(1e-12));
}

TEST_CASE("splits conserve total compute at every index") {
  const PipelineModel p = case_study_pipeline();
  const double total = total_compute_s(p);
  for (std::size_t k = 0; k <= p.stages.size(); ++k) {
    const PipelineSplit s = split_at(p, k);
    CHECK(s.server_s + s.device_s == Catch::Approx(total).epsilon(1e-12));
  }
  CHECK(split_at(p, 0).server_s == 0.0);
  CHECK(split_at(p, p.stages.size()).device_s == 0.0);
}

TEST_CASE("reference boundary and image sizes match the payload arithmetic") {
  const PipelineModel p = case_study_pipeline();
  CHECK(shape_elements(p.boundary_shape) == 4u * 128 * 128);
  CHECK(shape_elements(p.image_shape) == 1024u * 1024 * 3);
  CHECK(shape_elements(p.boundary_shape) * 16 == 1048576u);
  CHECK(shape_elements(p.image_shape) * 16 == 50331648u);
}

TEST_CASE("pipeline validation reports dotted paths") {
  PipelineModel p = case_study_pipeline();
  CHECK_NOTHROW(validate(p));

  p.stages.clear();
  CHECK_THROWS_MATCHES(validate(p), ConfigError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("pipeline.stages")));

  p = case_study_pipeline();
  p.split_index = 4;
  CHECK_THROWS_MATCHES(validate(p), ConfigError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("split_index")));

  p = case_study_pipeline();
  p.stages[1].compute_seconds = -1.0;
  try {
    validate(p);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.path() == "pipeline.stages[1].compute_seconds");
  }

  p = case_study_pipeline();
  p.stages[2].repeat = 0;
  CHECK_THROWS_AS(validate(p), ConfigError);

  p = case_study_pipeline();
  p.stages[0].name.clear();
  CHECK_THROWS_AS(validate(p), ConfigError);

  p = case_study_pipeline();
  p.image_shape = {0, 4};
  CHECK_THROWS_AS(validate(p), ConfigError);
}

TEST_CASE("degenerate boundary shapes are allowed and synthesize empty tensors") {
  PipelineModel p = case_study_pipeline();
  p.boundary_shape = {0};
  CHECK_NOTHROW(validate(p));
  const FeatureTensor t = synth_boundary_tensor(p, root_stream(7));
  CHECK(t.size() == 0);
  CHECK(t.shape == std::vector<std::size_t>{0});
}

TEST_CASE("boundary synthesis is deterministic in the stream") {
  const PipelineModel p = case_study_pipeline();
  const FeatureTensor a = synth_boundary_tensor(p, root_stream(7));
  const FeatureTensor b = synth_boundary_tensor(p, root_stream(7));
  const FeatureTensor c = synth_boundary_tensor(p, root_stream(8));
  CHECK(a.values == b.values);
  CHECK(a.shape == p.boundary_shape);
  CHECK(a.values != c.values);
}

TEST_CASE("stage range accounting") {
  const PipelineModel p = case_study_pipeline();
  CHECK(compute_latency_s(p, 0, 0) == 0.0);
  CHECK(compute_latency_s(p, 2, 3) == 0.60);
  CHECK_THROWS_AS(compute_latency_s(p, 2, 1), ValueError);
  CHECK_THROWS_AS(compute_latency_s(p, 0, 4), ValueError);
  CHECK_THROWS_AS(split_at(p, 5), ValueError);
}
