#include "saekit/fit.hpp"

namespace saekit {

FitResult fit_area_model(model::ModelConfig config, model::ModelData data,
                         const sampler::SamplerConfig& sampler_config) {
  const double level = config.interval_level;
  model::AreaModel m(std::move(config), std::move(data));
  const sampler::LogDensity target = [&m](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    return m.sampling_log_density_gradient(x, grad);
  };
  sampler::PosteriorSamples samples =
      sampler::run_chains(target, m.dimension(), sampler_config, m.parameter_names());
  // Report draws on the natural scale so they line up with the parameter names.
  if (m.layout().smooth_variance) {
    const auto dim = static_cast<Eigen::Index>(samples.dim);
    for (std::size_t i = 0; i < samples.total_draws(); ++i) {
      Eigen::Map<Eigen::VectorXd> row(samples.draws.data() + i * samples.dim, dim);
      row = m.from_sampling(row);
    }
    sampler::compute_diagnostics(samples);
  }
  summary::AreaEstimates estimates = summary::summarize_areas(samples, m, level);
  summary::HyperSummary hypers = summary::summarize_hypers(samples, m, level);
  return FitResult{std::move(m), std::move(samples), std::move(estimates), std::move(hypers)};
}

}  // namespace saekit
