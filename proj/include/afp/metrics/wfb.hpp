#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

namespace afp::metrics {

// Weighted F-measure parameters (published defaults of the foreground-map
// evaluation measure this implements).
struct MetricConfig {
    double beta = 1.0;
    double sigma = 5.0;   // Gaussian std, pixels
    int window = 7;       // Gaussian window size (odd)
    double alpha = std::log(0.5) / 5.0;  // importance decay
};

// Weighted F_beta of a continuous prediction in [0,1] against a binary
// ground-truth mask. Pixel errors are smoothed by a Gaussian dependency
// kernel on foreground and importance-decayed by distance to the foreground
// on background. Ties in the nearest-foreground assignment go to the
// lowest row-major index. Empty ground truth: 1 if the prediction is
// all-zero, else 0.
double weighted_fbeta(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt,
                      const MetricConfig& cfg = {});

struct ChannelScores {
    std::vector<double> per_channel;
    double average = 0.0;
};

ChannelScores per_affordance_scores(const std::vector<Eigen::MatrixXd>& preds,
                                    const std::vector<Eigen::MatrixXd>& gts,
                                    const MetricConfig& cfg = {});

struct PositionError {
    double err = 0.0;    // planar Euclidean norm (z excluded, table-planar task)
    double x_err = 0.0;  // absolute per-axis components
    double y_err = 0.0;
};

PositionError position_error(const Eigen::Vector3d& pred_pos, const Eigen::Vector3d& true_pos);

}  // namespace afp::metrics
