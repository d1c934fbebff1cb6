#include "afp/metrics/wfb.hpp"

#include "afp/core/errors.hpp"

namespace afp::metrics {
namespace {

struct FgPixel {
    int r, c;
};

}  // namespace

double weighted_fbeta(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt,
                      const MetricConfig& cfg) {
    if (pred.rows() != gt.rows() || pred.cols() != gt.cols())
        throw InputError("weighted_fbeta: prediction and ground truth shapes differ");
    if (cfg.window % 2 == 0) throw ConfigError("weighted_fbeta: window must be odd");
    const Eigen::Index rows = gt.rows(), cols = gt.cols();

    std::vector<FgPixel> fg;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) {
            const double g = gt(r, c);
            if (g != 0.0 && g != 1.0)
                throw InputError("weighted_fbeta: ground truth must be binary");
            if (g == 1.0) fg.push_back({static_cast<int>(r), static_cast<int>(c)});
        }
    if (fg.empty()) return pred.sum() == 0.0 ? 1.0 : 0.0;

    const Eigen::MatrixXd err = (pred - gt).cwiseAbs();

    // Nearest-foreground assignment (squared distance, row-major tie break)
    // drives both the error dependency and the importance decay.
    Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(rows, cols);
    Eigen::MatrixXd err_dep = err;
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            if (gt(r, c) == 1.0) continue;
            long best = -1;
            long best_d2 = 0;
            for (std::size_t k = 0; k < fg.size(); ++k) {
                const long dr = fg[k].r - static_cast<long>(r);
                const long dc = fg[k].c - static_cast<long>(c);
                const long d2 = dr * dr + dc * dc;
                if (best < 0 || d2 < best_d2) {
                    best = static_cast<long>(k);
                    best_d2 = d2;
                }
            }
            dist(r, c) = std::sqrt(static_cast<double>(best_d2));
            err_dep(r, c) = err(fg[static_cast<std::size_t>(best)].r,
                                fg[static_cast<std::size_t>(best)].c);
        }
    }

    // Gaussian-smoothed dependency (zero padding), normalized kernel.
    const int half = cfg.window / 2;
    Eigen::MatrixXd kernel(cfg.window, cfg.window);
    for (int i = 0; i < cfg.window; ++i)
        for (int j = 0; j < cfg.window; ++j) {
            const double dy = i - half, dx = j - half;
            kernel(i, j) = std::exp(-(dx * dx + dy * dy) / (2.0 * cfg.sigma * cfg.sigma));
        }
    kernel /= kernel.sum();

    Eigen::MatrixXd smoothed = Eigen::MatrixXd::Zero(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) {
            double acc = 0.0;
            for (int i = -half; i <= half; ++i) {
                const Eigen::Index rr = r + i;
                if (rr < 0 || rr >= rows) continue;
                for (int j = -half; j <= half; ++j) {
                    const Eigen::Index cc = c + j;
                    if (cc < 0 || cc >= cols) continue;
                    acc += err_dep(rr, cc) * kernel(i + half, j + half);
                }
            }
            smoothed(r, c) = acc;
        }

    double sum_ew_fg = 0.0, sum_ew_bg = 0.0;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) {
            if (gt(r, c) == 1.0) {
                const double e = std::min(err(r, c), smoothed(r, c));
                sum_ew_fg += e;  // importance weight 1 on foreground
            } else {
                const double importance = 2.0 - std::exp(cfg.alpha * dist(r, c));
                sum_ew_bg += err(r, c) * importance;
            }
        }

    const double n_fg = static_cast<double>(fg.size());
    const double tpw = n_fg - sum_ew_fg;
    const double recall = 1.0 - sum_ew_fg / n_fg;
    const double denom_p = tpw + sum_ew_bg;
    const double precision = denom_p > 0.0 ? tpw / denom_p : 0.0;
    const double b2 = cfg.beta * cfg.beta;
    const double denom_q = b2 * precision + recall;
    if (denom_q <= 0.0) return 0.0;
    return (1.0 + b2) * precision * recall / denom_q;
}

ChannelScores per_affordance_scores(const std::vector<Eigen::MatrixXd>& preds,
                                    const std::vector<Eigen::MatrixXd>& gts,
                                    const MetricConfig& cfg) {
    if (preds.size() != gts.size())
        throw InputError("per_affordance_scores: channel count mismatch");
    ChannelScores out;
    for (std::size_t i = 0; i < preds.size(); ++i)
        out.per_channel.push_back(weighted_fbeta(preds[i], gts[i], cfg));
    if (!out.per_channel.empty()) {
        double sum = 0.0;
        for (double s : out.per_channel) sum += s;
        out.average = sum / static_cast<double>(out.per_channel.size());
    }
    return out;
}

PositionError position_error(const Eigen::Vector3d& pred_pos, const Eigen::Vector3d& true_pos) {
    PositionError e;
    e.x_err = std::abs(pred_pos.x() - true_pos.x());
    e.y_err = std::abs(pred_pos.y() - true_pos.y());
    e.err = std::hypot(e.x_err, e.y_err);
    return e;
}

}  // namespace afp::metrics
