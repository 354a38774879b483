#ifndef SAEKIT_FIT_HPP
#define SAEKIT_FIT_HPP

#include "saekit/model.hpp"
#include "saekit/sampler.hpp"
#include "saekit/summary.hpp"

namespace saekit {

/// A fitted area-level model with its draws and summaries.
struct FitResult {
  model::AreaModel model;
  sampler::PosteriorSamples samples;
  summary::AreaEstimates estimates;
  summary::HyperSummary hypers;
};

/// Builds the model, runs the sampler on its log posterior and summarizes
/// at config.interval_level.
FitResult fit_area_model(model::ModelConfig config, model::ModelData data,
                         const sampler::SamplerConfig& sampler_config);

}  // namespace saekit

#endif  // SAEKIT_FIT_HPP
