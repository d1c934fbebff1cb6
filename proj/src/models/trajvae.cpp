#include "afp/models/trajvae.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include "afp/core/rng.hpp"
#include "afp/nn/adam.hpp"
#include "afp/nn/checkpoint.hpp"

using nlohmann::json;

namespace afp::models {
namespace {

constexpr char kTrajMagic[4] = {'A', 'T', 'R', 'J'};

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

json vec_to_json(const Eigen::VectorXd& v) {
    json j = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
    return j;
}

Eigen::VectorXd vec_from_json(const json& j) {
    Eigen::VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    return v;
}

json points_to_json(const std::vector<Eigen::Vector3d>& pts) {
    json j = json::array();
    for (const auto& p : pts) j.push_back({p.x(), p.y(), p.z()});
    return j;
}

std::vector<Eigen::Vector3d> points_from_json(const json& j) {
    std::vector<Eigen::Vector3d> pts;
    for (const auto& e : j)
        pts.emplace_back(e.at(0).get<double>(), e.at(1).get<double>(), e.at(2).get<double>());
    return pts;
}

template <typename T>
void fisher_yates(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i)
        std::swap(v[i - 1], v[static_cast<std::size_t>(
                      rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
}

}  // namespace

double beta_at(const BetaSchedule& schedule, long epoch) {
    schedule.validate();
    if (epoch < 0) throw InputError("beta_at: epoch must be non-negative");
    const long decades = epoch / schedule.interval;
    double beta = schedule.beta_start;
    for (long i = 0; i < decades && beta < schedule.beta_end; ++i) beta *= 10.0;
    return std::min(beta, schedule.beta_end);
}

json TrajVaeConfig::to_json() const {
    json j;
    j["model"] = "trajvae";
    j["steps"] = steps;
    j["joints"] = joints;
    j["action_dim"] = action_dim;
    j["hidden"] = hidden;
    j["logvar_clamp"] = logvar_clamp;
    return j;
}

TrajVaeConfig TrajVaeConfig::from_json(const json& j) {
    TrajVaeConfig c;
    c.steps = j.at("steps").get<int>();
    c.joints = j.at("joints").get<int>();
    c.action_dim = j.at("action_dim").get<int>();
    c.hidden = j.at("hidden").get<std::vector<int>>();
    c.logvar_clamp = j.at("logvar_clamp").get<double>();
    c.validate();
    return c;
}

void TrajectorySet::save(const std::filesystem::path& path) const {
    json header;
    header["format_version"] = kTrajectorySetFormatVersion;
    header["steps"] = steps;
    header["joints"] = joints;
    header["n"] = trajectories.size();
    header["joint_lo"] = vec_to_json(joint_lo);
    header["joint_hi"] = vec_to_json(joint_hi);
    header["start_config"] = vec_to_json(start_config);
    header["grid"] = grid_spec;
    header["targets"] = points_to_json(targets);
    header["unreachable"] = points_to_json(unreachable);
    const std::string htext = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out.write(kTrajMagic, 4);
    std::uint64_t hlen = htext.size();
    char lenbuf[8];
    for (int i = 0; i < 8; ++i) lenbuf[i] = static_cast<char>((hlen >> (8 * i)) & 0xFF);
    out.write(lenbuf, 8);
    out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
    const std::ptrdiff_t dim = std::ptrdiff_t(steps) * joints;
    std::vector<float> row(static_cast<std::size_t>(dim));
    for (const auto& u : trajectories) {
        if (u.size() != dim) throw InputError("trajectory set: inconsistent trajectory length");
        for (std::ptrdiff_t i = 0; i < dim; ++i)
            row[static_cast<std::size_t>(i)] = static_cast<float>(u[i]);
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!out) throw IoError("short write: " + path.string());
}

TrajectorySet TrajectorySet::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open trajectory set: " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kTrajMagic, 4) != 0)
        throw IoError("trajectory set " + path.string() + ": bad magic at byte 0");
    char lenbuf[8];
    in.read(lenbuf, 8);
    if (!in) throw IoError("trajectory set " + path.string() + ": truncated header length");
    std::uint64_t hlen = 0;
    for (int i = 0; i < 8; ++i)
        hlen |= static_cast<std::uint64_t>(static_cast<unsigned char>(lenbuf[i])) << (8 * i);
    std::string htext(hlen, '\0');
    in.read(htext.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw IoError("trajectory set " + path.string() + ": truncated header");
    json header;
    try {
        header = json::parse(htext);
    } catch (const json::exception& e) {
        throw IoError("trajectory set header parse error: " + std::string(e.what()));
    }
    TrajectorySet set;
    const int version = header.at("format_version").get<int>();
    if (version != kTrajectorySetFormatVersion)
        throw IoError("unsupported trajectory set version " + std::to_string(version));
    set.steps = header.at("steps").get<int>();
    set.joints = header.at("joints").get<int>();
    set.joint_lo = vec_from_json(header.at("joint_lo"));
    set.joint_hi = vec_from_json(header.at("joint_hi"));
    set.start_config = vec_from_json(header.at("start_config"));
    set.grid_spec = header.value("grid", json::object());
    set.targets = points_from_json(header.value("targets", json::array()));
    set.unreachable = points_from_json(header.value("unreachable", json::array()));
    const std::size_t n = header.at("n").get<std::size_t>();
    const std::ptrdiff_t dim = std::ptrdiff_t(set.steps) * set.joints;
    std::vector<float> row(static_cast<std::size_t>(dim));
    for (std::size_t k = 0; k < n; ++k) {
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(float)));
        if (!in) throw IoError("trajectory set " + path.string() + ": truncated payload");
        Eigen::VectorXd u(dim);
        for (std::ptrdiff_t i = 0; i < dim; ++i) u[i] = row[static_cast<std::size_t>(i)];
        set.trajectories.push_back(std::move(u));
    }
    return set;
}

TrajectorySet generate_training_trajectories(const kin::KinematicChain& chain,
                                             const WorkspaceRect& workspace, int nx, int ny,
                                             const Eigen::VectorXd& start_config,
                                             const TrajVaeConfig& cfg,
                                             const TrajGenOptions& opts) {
    chain.validate();
    workspace.validate();
    cfg.validate();
    if (nx < 1 || ny < 1) throw ConfigError("trajectory grid counts must be >= 1");
    if (cfg.joints != chain.dof())
        throw ConfigError("trajectory config joint count does not match chain dof");
    if (start_config.size() != chain.dof())
        throw InputError("start_config length does not match chain dof");
    for (int j = 0; j < chain.dof(); ++j)
        if (start_config[j] < chain.joints[static_cast<std::size_t>(j)].lo ||
            start_config[j] > chain.joints[static_cast<std::size_t>(j)].hi)
            throw InputError("start_config violates joint limits");

    TrajectorySet set;
    set.steps = cfg.steps;
    set.joints = cfg.joints;
    set.start_config = start_config;
    set.joint_lo.resize(chain.dof());
    set.joint_hi.resize(chain.dof());
    for (int j = 0; j < chain.dof(); ++j) {
        set.joint_lo[j] = chain.joints[static_cast<std::size_t>(j)].lo;
        set.joint_hi[j] = chain.joints[static_cast<std::size_t>(j)].hi;
    }
    set.grid_spec = {{"nx", nx},
                     {"ny", ny},
                     {"x_min", workspace.x_min},
                     {"x_max", workspace.x_max},
                     {"y_min", workspace.y_min},
                     {"y_max", workspace.y_max},
                     {"hover_height", opts.hover_height},
                     {"via_raise", opts.via_raise}};

    const Eigen::Vector3d start_pos = kin::forward_kinematics(chain, start_config).position;
    const double dx = (workspace.x_max - workspace.x_min) / nx;
    const double dy = (workspace.y_max - workspace.y_min) / ny;
    const int T = cfg.steps;

    for (int iy = 0; iy < ny; ++iy) {
        for (int ix = 0; ix < nx; ++ix) {
            const Eigen::Vector3d target(workspace.x_min + (ix + 0.5) * dx,
                                         workspace.y_min + (iy + 0.5) * dy, opts.hover_height);
            kin::IkResult goal = kin::solve_ik(chain, target, start_config);
            if (!goal.converged && goal.residual > opts.final_tol) {
                set.unreachable.push_back(target);
                continue;
            }
            // Raised midpoint; best-effort IK (the lift may be unreachable
            // for planar chains, which still bends the joint-space path).
            Eigen::Vector3d via_target = 0.5 * (start_pos + target);
            via_target.z() = opts.hover_height + opts.via_raise;
            kin::IkResult via = kin::solve_ik(chain, via_target, start_config);

            Eigen::VectorXd u(std::ptrdiff_t(T) * cfg.joints);
            for (int t = 0; t < T; ++t) {
                const double tau = static_cast<double>(t) / (T - 1);
                Eigen::VectorXd q;
                if (tau <= 0.5) {
                    const double s = smoothstep(tau / 0.5);
                    q = start_config + s * (via.q - start_config);
                } else {
                    const double s = smoothstep((tau - 0.5) / 0.5);
                    q = via.q + s * (goal.q - via.q);
                }
                u.segment(std::ptrdiff_t(t) * cfg.joints, cfg.joints) = q;
            }
            set.trajectories.push_back(std::move(u));
            set.targets.push_back(target);
        }
    }
    return set;
}

void save_trajvae_checkpoint(const std::filesystem::path& path, const TrajVaeConfig& cfg,
                             const nn::VecX<float>& params) {
    TrajVaeNet<float> net(cfg);
    if (params.size() != net.pack().total())
        throw ConfigError("save_trajvae_checkpoint: parameter count mismatch");
    net.pack().values() = params;
    nn::save_checkpoint(path, nn::pack_to_checkpoint(net.pack(), cfg.to_json()));
}

TrajVaeConfig load_trajvae_checkpoint(const std::filesystem::path& path,
                                      nn::VecX<float>& params) {
    nn::CheckpointData data = nn::load_checkpoint(path);
    if (data.config.value("model", "") != "trajvae")
        throw ConfigError("checkpoint at " + path.string() + " is not a trajectory model");
    TrajVaeConfig cfg = TrajVaeConfig::from_json(data.config);
    TrajVaeNet<float> net(cfg);
    nn::checkpoint_to_pack(data, net.pack());
    params = net.pack().values();
    return cfg;
}

TrajVaeTrainResult train_trajectory_vae(const TrajectorySet& set, const TrajVaeConfig& cfg,
                                        const BetaSchedule& schedule,
                                        const TrajVaeTrainConfig& tc) {
    cfg.validate();
    schedule.validate();
    if (set.trajectories.size() < 2)
        throw InputError("train_trajectory_vae: need at least 2 trajectories");
    if (set.steps != cfg.steps || set.joints != cfg.joints)
        throw ConfigError("train_trajectory_vae: trajectory set shape does not match config");
    if (tc.epochs < 1) throw ConfigError("train_trajectory_vae: epochs must be >= 1");
    if (tc.batch_size < 1) throw ConfigError("train_trajectory_vae: batch_size must be >= 1");
    if (tc.val_fraction < 0.0 || tc.val_fraction >= 1.0)
        throw ConfigError("train_trajectory_vae: val_fraction must be in [0, 1)");

    const std::ptrdiff_t dim = cfg.traj_dim();
    std::vector<nn::VecX<float>> data;
    data.reserve(set.trajectories.size());
    for (const auto& u : set.trajectories) {
        if (u.size() != dim)
            throw InputError("train_trajectory_vae: inconsistent trajectory length");
        data.push_back(u.cast<float>());
    }

    TrajVaeNet<float> net(cfg);
    Rng init_rng(mix_seed(tc.seed, 0xA1));
    net.pack().init_random(init_rng);
    nn::VecX<float>& params = net.pack().values();

    nn::Adam<float>::Options opts;
    opts.lr = static_cast<float>(tc.learning_rate);
    nn::Adam<float> adam(net.pack().total(), opts);

    std::vector<std::size_t> perm(data.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    Rng split_rng(mix_seed(tc.seed, 0xB1));
    fisher_yates(perm, split_rng);
    std::size_t n_val =
        static_cast<std::size_t>(tc.val_fraction * static_cast<double>(data.size()));
    if (n_val >= data.size()) n_val = data.size() - 1;
    std::vector<std::size_t> train_idx(perm.begin(), perm.end() - static_cast<long>(n_val));
    std::vector<std::size_t> val_idx(perm.end() - static_cast<long>(n_val), perm.end());

    Rng shuffle_rng(mix_seed(tc.seed, 0xC1));
    Rng noise_rng(mix_seed(tc.seed, 0xD1));

    TrajVaeTrainResult result;
    nn::VecX<float> grad = net.pack().zeros_like();
    typename TrajVaeNet<float>::Cache cache;

    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        const float beta = static_cast<float>(beta_at(schedule, epoch));
        fisher_yates(train_idx, shuffle_rng);
        double sum_mse = 0.0, sum_kl = 0.0;
        for (std::size_t start = 0; start < train_idx.size();
             start += static_cast<std::size_t>(tc.batch_size)) {
            const std::size_t end =
                std::min(train_idx.size(), start + static_cast<std::size_t>(tc.batch_size));
            grad.setZero();
            for (std::size_t k = start; k < end; ++k) {
                const nn::VecX<float>& u = data[train_idx[k]];
                nn::VecX<float> eps(cfg.action_dim);
                for (int d = 0; d < cfg.action_dim; ++d)
                    eps[d] = static_cast<float>(noise_rng.normal());
                auto parts = net.loss(u, params, eps, beta, &cache);
                net.loss_backward(cache, u, params, beta, grad);
                sum_mse += parts.mse;
                sum_kl += parts.kl;
            }
            grad /= static_cast<float>(end - start);
            adam.step(params, grad);
        }
        TrajVaeEpochLog row;
        row.epoch = epoch;
        const double m = static_cast<double>(train_idx.size());
        row.mse = sum_mse / m;
        row.kl = sum_kl / m;
        row.beta = beta;
        result.log.push_back(row);
        if (tc.log_to_stdout && (epoch % 100 == 0 || epoch + 1 == tc.epochs))
            std::printf("epoch %d mse %.8f kl %.4f beta %.1e\n", epoch, row.mse, row.kl,
                        row.beta);
    }

    auto rmse_over = [&](const std::vector<std::size_t>& idx) {
        if (idx.empty()) return 0.0;
        double acc = 0.0;
        for (std::size_t i : idx) {
            const nn::VecX<float>& u = data[i];
            auto dist = net.encode_traj(u, params);
            nn::VecX<float> recon = net.decode_action(dist.mu, params);
            acc += static_cast<double>((recon - u).squaredNorm()) / static_cast<double>(dim);
        }
        return std::sqrt(acc / static_cast<double>(idx.size()));
    };
    result.train_rmse = rmse_over(train_idx);
    result.val_rmse = rmse_over(val_idx);
    result.params = params;
    return result;
}

}  // namespace afp::models
