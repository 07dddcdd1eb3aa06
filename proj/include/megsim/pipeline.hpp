#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "megsim/core.hpp"

namespace megsim {

/** One pipeline stage; repeat models iterated blocks (e.g. denoising steps). */
struct StageSpec {
  std::string name;
  double compute_seconds = 0.0;
  unsigned repeat = 1;
  TensorRole output_role = TensorRole::sketch;
};

/**
 * A generative pipeline in latency terms: an ordered stage list plus a split
 * point. Stages [0, split_index) run on the edge server, the rest on the
 * device. boundary_shape is the tensor handed across the split; image_shape
 * is the final output.
 */
struct PipelineModel {
  std::vector<StageSpec> stages;
  std::size_t split_index = 0;
  std::vector<std::size_t> boundary_shape;
  std::vector<std::size_t> image_shape;
};

inline void validate(const PipelineModel& p) {
  if (p.stages.empty()) throw ConfigError("pipeline.stages", "must be non-empty");
  if (p.split_index > p.stages.size())
    throw ConfigError("pipeline.split_index", "must be in [0, stage count]");
  for (std::size_t i = 0; i < p.stages.size(); ++i) {
    const StageSpec& s = p.stages[i];
    const std::string path = "pipeline.stages[" + std::to_string(i) + "]";
    if (s.name.empty()) throw ConfigError(path + ".name", "must be non-empty");
    if (!(s.compute_seconds >= 0.0))
      throw ConfigError(path + ".compute_seconds", "must be >= 0");
    if (s.repeat == 0) throw ConfigError(path + ".repeat", "must be >= 1");
  }
  // boundary_shape may have zero volume: a degenerate split transmits nothing.
  if (shape_elements(p.image_shape) == 0)
    throw ConfigError("pipeline.image_shape", "must have positive volume");
}

/** Total compute seconds for stages in [first, last). */
inline double compute_latency_s(const PipelineModel& p, std::size_t first,
                                std::size_t last) {
  if (first > last || last > p.stages.size())
    throw ValueError("compute_latency_s: invalid stage range");
  double s = 0.0;
  for (std::size_t i = first; i < last; ++i)
    s += p.stages[i].compute_seconds * p.stages[i].repeat;
  return s;
}

inline double total_compute_s(const PipelineModel& p) {
  return compute_latency_s(p, 0, p.stages.size());
}

struct PipelineSplit {
  double server_s = 0.0;
  double device_s = 0.0;
};

/** Compute split at index k: server runs [0, k), device runs [k, end). */
inline PipelineSplit split_at(const PipelineModel& p, std::size_t k) {
  PipelineSplit s;
  s.server_s = compute_latency_s(p, 0, k);
  s.device_s = compute_latency_s(p, k, p.stages.size());
  return s;
}

/**
 * The reference deployment: text encoder, 12-step denoiser, decoder. Split
 * after the denoiser, so the server carries 6.98 s and the device 0.60 s of
 * the 7.58 s total. Boundary is a 4x128x128 latent; output a 1024x1024 RGB
 * image.
 */
inline PipelineModel case_study_pipeline() {
  PipelineModel p;
  p.stages = {
      {"text_encoder", 0.38, 1, TensorRole::prompt},
      {"denoiser", 0.55, 12, TensorRole::seed},
      {"decoder", 0.60, 1, TensorRole::image},
  };
  p.split_index = 2;
  p.boundary_shape = {4, 128, 128};
  p.image_shape = {1024, 1024, 3};
  return p;
}

/**
 * Deterministic stand-in for the boundary activation: unit normals drawn from
 * the given stream. Shapes with zero volume yield an empty tensor (used by
 * degenerate splits where nothing crosses the boundary).
 */
inline FeatureTensor synth_boundary_tensor(const PipelineModel& p, RngStream stream) {
  const std::size_t n = shape_elements(p.boundary_shape);
  if (n == 0) {
    FeatureTensor t;
    t.shape = p.boundary_shape;
    t.role = TensorRole::seed;
    return t;
  }
  FeatureTensor t = gaussian_tensor(std::span<const std::size_t>(p.boundary_shape),
                                    substream(stream, "boundary"));
  t.role = TensorRole::seed;
  return t;
}

}  // namespace megsim
