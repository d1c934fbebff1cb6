#pragma once

#include <filesystem>
#include <vector>

#include "afp/core/image.hpp"
#include "afp/models/policy.hpp"
#include "afp/models/vaed.hpp"
#include "afp/scenegen/scene.hpp"

namespace afp::pipeline {

// Scatter of evaluation trials over the workspace with a line segment from
// each true cup position to the reached position.
void write_error_scatter_plot(const std::filesystem::path& path,
                              const std::vector<models::EvalTrial>& trials,
                              const models::WorkspaceRect& workspace);

// Mean position error as a function of clutter level.
void write_clutter_error_plot(const std::filesystem::path& path,
                              const std::vector<models::EvalTrial>& trials);

// Rendered scenes with decoded affordances tinted on top: wrap-grasp red,
// contain green; pixels below threshold are left untouched.
void write_affordance_overlays(const std::filesystem::path& dir,
                               const scenegen::RandomizationConfig& scene_cfg,
                               const models::VaedNet<float>& vaed,
                               const nn::VecX<float>& vaed_params, int count,
                               std::uint64_t seed, double threshold = 0.5);

ImageU8 overlay_affordances(const ImageU8& rgb, const nn::Tensor3<float>& probs,
                            double threshold = 0.5);

}  // namespace afp::pipeline
