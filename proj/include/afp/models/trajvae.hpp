#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "afp/core/errors.hpp"
#include "afp/kin/kinematics.hpp"
#include "afp/models/vae_common.hpp"
#include "afp/nn/layers.hpp"
#include "afp/nn/params.hpp"

namespace afp::models {

// Geometric-ladder KL weight: a decade jump every `interval` epochs, capped.
struct BetaSchedule {
    double beta_start = 1e-8;
    double beta_end = 1e-5;
    int interval = 400;

    void validate() const {
        if (!(beta_start > 0.0) || beta_start > beta_end)
            throw ConfigError("beta schedule: need 0 < beta_start <= beta_end");
        if (interval < 1) throw ConfigError("beta schedule: interval must be >= 1");
    }
};

double beta_at(const BetaSchedule& schedule, long epoch);

struct TrajVaeConfig {
    int steps = 24;
    int joints = 3;
    int action_dim = 5;
    std::vector<int> hidden = {256, 128, 64};  // encoder order; decoder mirrors
    double logvar_clamp = 10.0;

    int traj_dim() const { return steps * joints; }
    void validate() const {
        if (steps < 2) throw ConfigError("trajvae: steps must be >= 2");
        if (joints < 1) throw ConfigError("trajvae: joints must be >= 1");
        if (action_dim < 1) throw ConfigError("trajvae: action_dim must be >= 1");
        if (hidden.size() != 3) throw ConfigError("trajvae: exactly 3 hidden layers");
        for (int h : hidden)
            if (h < 1) throw ConfigError("trajvae: hidden widths must be positive");
        if (logvar_clamp <= 0.0) throw ConfigError("trajvae: logvar_clamp must be positive");
    }

    nlohmann::json to_json() const;
    static TrajVaeConfig from_json(const nlohmann::json& j);
};

// VAE over fixed-length joint trajectories. Trajectories are handled as flat
// vectors of length steps*joints, row-major in time: index t*joints + j.
template <typename T>
class TrajVaeNet {
public:
    explicit TrajVaeNet(TrajVaeConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        enc_.activate_output = true;
        enc_.build(pack_, "enc", {cfg_.traj_dim(), cfg_.hidden[0], cfg_.hidden[1],
                                  cfg_.hidden[2]});
        mu_w_ = pack_.add("enc.mu.W", {cfg_.action_dim, cfg_.hidden[2]});
        mu_b_ = pack_.add("enc.mu.b", {cfg_.action_dim});
        lv_w_ = pack_.add("enc.logvar.W", {cfg_.action_dim, cfg_.hidden[2]});
        lv_b_ = pack_.add("enc.logvar.b", {cfg_.action_dim});
        dec_.build(pack_, "dec", {cfg_.action_dim, cfg_.hidden[2], cfg_.hidden[1],
                                  cfg_.hidden[0], cfg_.traj_dim()});
        pack_.finalize();
    }

    const TrajVaeConfig& config() const { return cfg_; }
    nn::ParamPack<T>& pack() { return pack_; }
    const nn::ParamPack<T>& pack() const { return pack_; }

    struct Cache {
        typename nn::Mlp<T>::Cache enc, dec;
        nn::VecX<T> trunk, mu, logvar_raw, logvar, eps, z, recon;
    };

    LatentDistribution<T> encode_traj(const nn::VecX<T>& u, const nn::VecX<T>& params,
                                      Cache* cache = nullptr) const {
        if (u.size() != cfg_.traj_dim())
            throw InputError("trajvae encode: trajectory length mismatch");
        typename nn::Mlp<T>::Cache local;
        typename nn::Mlp<T>::Cache* ec = cache ? &cache->enc : &local;
        nn::VecX<T> trunk = enc_.forward(pack_, params, u, ec);
        LatentDistribution<T> dist;
        dist.mu = pack_.mat(params, mu_w_) * trunk + pack_.vec(params, mu_b_);
        nn::VecX<T> lv = pack_.mat(params, lv_w_) * trunk + pack_.vec(params, lv_b_);
        if (cache) cache->logvar_raw = lv;
        const T cl = static_cast<T>(cfg_.logvar_clamp);
        for (std::ptrdiff_t i = 0; i < lv.size(); ++i) lv[i] = std::clamp(lv[i], -cl, cl);
        dist.logvar = lv;
        if (cache) {
            cache->trunk = trunk;
            cache->mu = dist.mu;
            cache->logvar = dist.logvar;
        }
        return dist;
    }

    nn::VecX<T> decode_action(const nn::VecX<T>& a, const nn::VecX<T>& params,
                              Cache* cache = nullptr) const {
        if (a.size() != cfg_.action_dim) throw InputError("trajvae decode: action length mismatch");
        nn::VecX<T> u = dec_.forward(pack_, params, a, cache ? &cache->dec : nullptr);
        if (cache) {
            cache->z = a;
            cache->recon = u;
        }
        return u;
    }

    // Returns dL/da for a given dL/du and accumulates decoder parameter
    // gradients into grad (pass a scratch vector when the decoder is frozen).
    nn::VecX<T> decode_backward(const Cache& cache, const nn::VecX<T>& params,
                                const nn::VecX<T>& du, nn::VecX<T>& grad) const {
        return dec_.backward(pack_, params, cache.dec, du, grad);
    }

    struct LossParts {
        T total = T(0);
        T mse = T(0);  // mean over steps*joints entries
        T kl = T(0);
    };

    LossParts loss(const nn::VecX<T>& u, const nn::VecX<T>& params, const nn::VecX<T>& eps_noise,
                   T beta, Cache* cache = nullptr) const {
        Cache local;
        Cache* c = cache ? cache : &local;
        LatentDistribution<T> dist = encode_traj(u, params, c);
        c->eps = eps_noise;
        nn::VecX<T> z = reparameterize(dist.mu, dist.logvar, eps_noise);
        nn::VecX<T> recon = decode_action(z, params, c);
        LossParts parts;
        parts.mse = (recon - u).squaredNorm() / static_cast<T>(u.size());
        parts.kl = kl_divergence(dist.mu, dist.logvar);
        parts.total = parts.mse + beta * parts.kl;
        return parts;
    }

    void loss_backward(const Cache& cache, const nn::VecX<T>& u, const nn::VecX<T>& params,
                       T beta, nn::VecX<T>& grad) const {
        nn::VecX<T> du = T(2) * (cache.recon - u) / static_cast<T>(u.size());
        nn::VecX<T> dz = dec_.backward(pack_, params, cache.dec, du, grad);

        nn::VecX<T> dmu = nn::VecX<T>::Zero(cfg_.action_dim);
        nn::VecX<T> dlv = nn::VecX<T>::Zero(cfg_.action_dim);
        reparameterize_backward(cache.logvar, cache.eps, dz, dmu, dlv);
        kl_backward(cache.mu, cache.logvar, beta, dmu, dlv);
        const T cl = static_cast<T>(cfg_.logvar_clamp);
        for (std::ptrdiff_t i = 0; i < dlv.size(); ++i)
            if (cache.logvar_raw[i] <= -cl || cache.logvar_raw[i] >= cl) dlv[i] = T(0);

        pack_.mat(grad, mu_w_).noalias() += dmu * cache.trunk.transpose();
        pack_.vec(grad, mu_b_).noalias() += dmu;
        pack_.mat(grad, lv_w_).noalias() += dlv * cache.trunk.transpose();
        pack_.vec(grad, lv_b_).noalias() += dlv;
        nn::VecX<T> dtrunk = pack_.mat(params, mu_w_).transpose() * dmu +
                             pack_.mat(params, lv_w_).transpose() * dlv;
        enc_.backward(pack_, params, cache.enc, dtrunk, grad);
    }

private:
    TrajVaeConfig cfg_;
    nn::ParamPack<T> pack_;
    nn::Mlp<T> enc_, dec_;
    int mu_w_ = -1, mu_b_ = -1, lv_w_ = -1, lv_b_ = -1;
};

inline constexpr int kTrajectorySetFormatVersion = 1;

struct TrajectorySet {
    int steps = 0;
    int joints = 0;
    Eigen::VectorXd joint_lo, joint_hi;
    Eigen::VectorXd start_config;
    nlohmann::json grid_spec;
    std::vector<Eigen::VectorXd> trajectories;       // flat, steps*joints each
    std::vector<Eigen::Vector3d> targets;            // reached grid targets
    std::vector<Eigen::Vector3d> unreachable;        // excluded grid targets

    void save(const std::filesystem::path& path) const;
    static TrajectorySet load(const std::filesystem::path& path);
};

struct WorkspaceRect {
    double x_min = 0.22, x_max = 0.52;
    double y_min = -0.15, y_max = 0.15;

    double diagonal() const { return std::hypot(x_max - x_min, y_max - y_min); }
    void validate() const {
        if (!(x_max > x_min) || !(y_max > y_min))
            throw ConfigError("workspace: max must exceed min on both axes");
    }
};

struct TrajGenOptions {
    double hover_height = 0.10;  // target z for trajectory endpoints
    double via_raise = 0.05;     // extra lift requested at the midpoint
    double final_tol = 1e-3;     // max end-effector error at the goal, meters
};

// One reach trajectory per grid target (nx * ny cells, cell centers), all
// starting exactly at start_config, interpolated through a raised via point
// toward the IK solution. Targets the solver cannot reach within final_tol
// are excluded and reported in `unreachable`.
TrajectorySet generate_training_trajectories(const kin::KinematicChain& chain,
                                             const WorkspaceRect& workspace, int nx, int ny,
                                             const Eigen::VectorXd& start_config,
                                             const TrajVaeConfig& cfg,
                                             const TrajGenOptions& opts = {});

struct TrajVaeTrainConfig {
    int epochs = 1500;
    int batch_size = 64;
    double learning_rate = 1e-3;
    double val_fraction = 0.1;
    std::uint64_t seed = 1;
    bool log_to_stdout = false;
};

struct TrajVaeEpochLog {
    int epoch = 0;
    double mse = 0.0;
    double kl = 0.0;
    double beta = 0.0;
};

struct TrajVaeTrainResult {
    nn::VecX<float> params;
    std::vector<TrajVaeEpochLog> log;
    double val_rmse = 0.0;  // held-out per-entry reconstruction RMSE, radians
    double train_rmse = 0.0;
};

TrajVaeTrainResult train_trajectory_vae(const TrajectorySet& set, const TrajVaeConfig& cfg,
                                        const BetaSchedule& schedule,
                                        const TrajVaeTrainConfig& tc);

void save_trajvae_checkpoint(const std::filesystem::path& path, const TrajVaeConfig& cfg,
                             const nn::VecX<float>& params);
TrajVaeConfig load_trajvae_checkpoint(const std::filesystem::path& path,
                                      nn::VecX<float>& params);

}  // namespace afp::models
