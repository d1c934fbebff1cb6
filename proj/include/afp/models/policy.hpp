#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "afp/core/errors.hpp"
#include "afp/kin/kinematics.hpp"
#include "afp/models/trajvae.hpp"
#include "afp/models/vaed.hpp"
#include "afp/nn/layers.hpp"
#include "afp/nn/params.hpp"
#include "afp/scenegen/scene.hpp"

namespace afp::models {

struct PolicyConfig {
    int latent_dim = 10;
    int cam_dim = 7;  // camera position (3), view direction (3), focal (1)
    int action_dim = 5;
    std::vector<int> hidden = {128, 64, 32};

    int input_dim() const { return latent_dim + cam_dim; }
    void validate() const {
        if (latent_dim < 1) throw ConfigError("policy: latent_dim must be >= 1");
        if (cam_dim < 0) throw ConfigError("policy: cam_dim must be non-negative");
        if (action_dim < 1) throw ConfigError("policy: action_dim must be >= 1");
        if (hidden.size() != 3) throw ConfigError("policy: exactly 3 hidden layers");
        for (int h : hidden)
            if (h < 1) throw ConfigError("policy: hidden widths must be positive");
    }

    nlohmann::json to_json() const;
    static PolicyConfig from_json(const nlohmann::json& j);
};

template <typename T>
class PolicyNet {
public:
    explicit PolicyNet(PolicyConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        mlp_.build(pack_, "policy", {cfg_.input_dim(), cfg_.hidden[0], cfg_.hidden[1],
                                     cfg_.hidden[2], cfg_.action_dim});
        pack_.finalize();
    }

    const PolicyConfig& config() const { return cfg_; }
    nn::ParamPack<T>& pack() { return pack_; }
    const nn::ParamPack<T>& pack() const { return pack_; }

    using Cache = typename nn::Mlp<T>::Cache;

    nn::VecX<T> forward(const nn::VecX<T>& input, const nn::VecX<T>& params,
                        Cache* cache = nullptr) const {
        if (input.size() != cfg_.input_dim())
            throw InputError("policy forward: input length mismatch");
        return mlp_.forward(pack_, params, input, cache);
    }

    nn::VecX<T> backward(const Cache& cache, const nn::VecX<T>& params, const nn::VecX<T>& dout,
                         nn::VecX<T>& grad) const {
        return mlp_.backward(pack_, params, cache, dout, grad);
    }

private:
    PolicyConfig cfg_;
    nn::ParamPack<T> pack_;
    nn::Mlp<T> mlp_;
};

// Camera feature vector fed to the policy alongside the latent state:
// position (3), unit view direction (3), focal length normalized by the
// image width (1).
Eigen::VectorXd camera_features(const scenegen::CameraPose& cam);

// Squared end-effector position error of the frozen-decoder rollout:
// ||FK(u_T) - target||^2 where u = decode(policy(s ++ cam)). Parameter
// gradients (if grad != nullptr) are accumulated for the policy only.
template <typename T>
T end_to_end_loss_from_latent(const nn::VecX<T>& s, const nn::VecX<T>& cam,
                              const Eigen::Vector3d& target, const PolicyNet<T>& policy,
                              const nn::VecX<T>& policy_params, const TrajVaeNet<T>& trajvae,
                              const nn::VecX<T>& traj_params, const kin::KinematicChain& chain,
                              nn::VecX<T>* grad = nullptr) {
    if (s.size() != policy.config().latent_dim)
        throw InputError("end_to_end_loss: latent length mismatch");
    if (cam.size() != policy.config().cam_dim)
        throw InputError("end_to_end_loss: camera feature length mismatch");
    if (policy.config().action_dim != trajvae.config().action_dim)
        throw ConfigError("end_to_end_loss: policy/trajectory action dims differ");
    if (trajvae.config().joints != chain.dof())
        throw ConfigError("end_to_end_loss: trajectory joints do not match chain dof");

    nn::VecX<T> input(s.size() + cam.size());
    input << s, cam;
    typename PolicyNet<T>::Cache pcache;
    nn::VecX<T> a = policy.forward(input, policy_params, grad ? &pcache : nullptr);
    typename TrajVaeNet<T>::Cache tcache;
    nn::VecX<T> u = trajvae.decode_action(a, traj_params, grad ? &tcache : nullptr);

    const int J = trajvae.config().joints;
    Eigen::VectorXd q_final =
        u.tail(J).template cast<double>();
    const Eigen::Vector3d pos = kin::forward_kinematics(chain, q_final).position;
    const Eigen::Vector3d diff = pos - target;
    const T loss = static_cast<T>(diff.squaredNorm());

    if (grad) {
        const Eigen::Vector3d dl_dpos = 2.0 * diff;
        const Eigen::VectorXd dq = kin::fk_position_gradient(chain, q_final, dl_dpos);
        nn::VecX<T> du = nn::VecX<T>::Zero(u.size());
        du.tail(J) = dq.cast<T>();
        nn::VecX<T> frozen_scratch = trajvae.pack().zeros_like();
        nn::VecX<T> da = trajvae.decode_backward(tcache, traj_params, du, frozen_scratch);
        policy.backward(pcache, policy_params, da, *grad);
    }
    return loss;
}

template <typename T>
T end_to_end_loss(const nn::Tensor3<T>& image, const nn::VecX<T>& cam,
                  const Eigen::Vector3d& target, const VaedNet<T>& vaed,
                  const nn::VecX<T>& vaed_params, const PolicyNet<T>& policy,
                  const nn::VecX<T>& policy_params, const TrajVaeNet<T>& trajvae,
                  const nn::VecX<T>& traj_params, const kin::KinematicChain& chain,
                  nn::VecX<T>* grad = nullptr) {
    LatentDistribution<T> dist = vaed.encode(image, vaed_params);
    return end_to_end_loss_from_latent(dist.mu, cam, target, policy, policy_params, trajvae,
                                       traj_params, chain, grad);
}

// Geometric task success: the dropped ball fits inside the container if the
// planar miss distance is at most inner_radius - ball_radius (inclusive).
bool success_predicate(const Eigen::Vector3d& final_pos, const Eigen::Vector3d& cup_pos,
                       double inner_radius, double ball_radius);

struct PolicySample {
    nn::VecX<float> latent;  // frozen-encoder posterior mean
    nn::VecX<float> cam;
    Eigen::Vector3d target;  // lifted to the trajectory hover height
    Eigen::Vector2d cup_xy;  // original table-plane cup position
};

struct PolicyTrainConfig {
    int epochs = 60;
    int batch_size = 64;
    double learning_rate = 1e-3;
    double val_fraction = 0.1;
    std::uint64_t seed = 1;
    bool log_to_stdout = false;
};

struct PolicyEpochLog {
    int epoch = 0;
    double loss = 0.0;  // mean squared position error, m^2
};

struct PolicyTrainResult {
    nn::VecX<float> params;
    std::vector<PolicyEpochLog> log;
    double val_mean_err = 0.0;  // planar, meters
    double val_p50_err = 0.0;
    double val_p90_err = 0.0;
    std::size_t n_val = 0;
};

PolicyTrainResult train_policy(const std::vector<PolicySample>& samples,
                               const PolicyConfig& cfg, const TrajVaeNet<float>& trajvae,
                               const nn::VecX<float>& traj_params,
                               const kin::KinematicChain& chain, const PolicyTrainConfig& tc);

void save_policy_checkpoint(const std::filesystem::path& path, const PolicyConfig& cfg,
                            const nn::VecX<float>& params);
PolicyConfig load_policy_checkpoint(const std::filesystem::path& path, nn::VecX<float>& params);

struct EvalCondition {
    std::string condition;
    std::size_t n = 0;
    double mean_err_m = 0.0;
    double x_err_m = 0.0;
    double y_err_m = 0.0;
    double success_rate = 0.0;
};

struct EvalTrial {
    double x = 0.0, y = 0.0;       // true cup position
    double err_x = 0.0, err_y = 0.0;  // signed reach error components
    int clutter = 0;
    std::string shape;
    bool success = false;
};

struct EvalReport {
    std::vector<EvalCondition> rows;
    std::vector<EvalTrial> trials;

    nlohmann::json to_json() const;
    std::string rows_csv() const;    // condition table
    std::string trials_csv() const;  // x, y, err_x, err_y plot data
};

struct EvalOptions {
    std::vector<int> clutter_levels = {0, 2, 4};
    double inner_radius = 0.04;
    double ball_radius = 0.02;
    double hover_height = 0.10;
    std::uint64_t seed = 1;
    int workers = 1;
};

// Runs n_trials rollouts of the frozen stack on freshly sampled scenes,
// split evenly over clutter levels and the two cup-shape bins (narrow /
// wide, split at the midpoint of the configured radius range).
EvalReport evaluate(const scenegen::RandomizationConfig& scene_cfg, const VaedNet<float>& vaed,
                    const nn::VecX<float>& vaed_params, const PolicyNet<float>& policy,
                    const nn::VecX<float>& policy_params, const TrajVaeNet<float>& trajvae,
                    const nn::VecX<float>& traj_params, const kin::KinematicChain& chain,
                    std::size_t n_trials, const EvalOptions& opts);

}  // namespace afp::models
