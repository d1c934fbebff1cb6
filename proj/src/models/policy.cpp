#include "afp/models/policy.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "afp/core/parallel.hpp"
#include "afp/core/rng.hpp"
#include "afp/nn/adam.hpp"
#include "afp/nn/checkpoint.hpp"
#include "afp/scenegen/render.hpp"

using nlohmann::json;

namespace afp::models {
namespace {

template <typename T>
void fisher_yates(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i)
        std::swap(v[i - 1], v[static_cast<std::size_t>(
                      rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
}

double percentile(std::vector<double> v, double p) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const double rank = p * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(rank);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
}

}  // namespace

json PolicyConfig::to_json() const {
    json j;
    j["model"] = "policy";
    j["latent_dim"] = latent_dim;
    j["cam_dim"] = cam_dim;
    j["action_dim"] = action_dim;
    j["hidden"] = hidden;
    return j;
}

PolicyConfig PolicyConfig::from_json(const json& j) {
    PolicyConfig c;
    c.latent_dim = j.at("latent_dim").get<int>();
    c.cam_dim = j.at("cam_dim").get<int>();
    c.action_dim = j.at("action_dim").get<int>();
    c.hidden = j.at("hidden").get<std::vector<int>>();
    c.validate();
    return c;
}

Eigen::VectorXd camera_features(const scenegen::CameraPose& cam) {
    Eigen::VectorXd f(7);
    f.head<3>() = cam.position;
    Eigen::Vector3d dir = cam.look_at - cam.position;
    const double n = dir.norm();
    if (n <= 0.0) throw InputError("camera_features: camera position equals look-at point");
    f.segment<3>(3) = dir / n;
    f[6] = cam.focal / static_cast<double>(cam.image_w);
    return f;
}

bool success_predicate(const Eigen::Vector3d& final_pos, const Eigen::Vector3d& cup_pos,
                       double inner_radius, double ball_radius) {
    if (inner_radius <= ball_radius)
        throw ConfigError("success_predicate: inner radius must exceed ball radius");
    const double dx = final_pos.x() - cup_pos.x();
    const double dy = final_pos.y() - cup_pos.y();
    return std::hypot(dx, dy) <= inner_radius - ball_radius;
}

void save_policy_checkpoint(const std::filesystem::path& path, const PolicyConfig& cfg,
                            const nn::VecX<float>& params) {
    PolicyNet<float> net(cfg);
    if (params.size() != net.pack().total())
        throw ConfigError("save_policy_checkpoint: parameter count mismatch");
    net.pack().values() = params;
    nn::save_checkpoint(path, nn::pack_to_checkpoint(net.pack(), cfg.to_json()));
}

PolicyConfig load_policy_checkpoint(const std::filesystem::path& path, nn::VecX<float>& params) {
    nn::CheckpointData data = nn::load_checkpoint(path);
    if (data.config.value("model", "") != "policy")
        throw ConfigError("checkpoint at " + path.string() + " is not a policy model");
    PolicyConfig cfg = PolicyConfig::from_json(data.config);
    PolicyNet<float> net(cfg);
    nn::checkpoint_to_pack(data, net.pack());
    params = net.pack().values();
    return cfg;
}

PolicyTrainResult train_policy(const std::vector<PolicySample>& samples,
                               const PolicyConfig& cfg, const TrajVaeNet<float>& trajvae,
                               const nn::VecX<float>& traj_params,
                               const kin::KinematicChain& chain, const PolicyTrainConfig& tc) {
    cfg.validate();
    if (samples.size() < 2) throw InputError("train_policy: need at least 2 samples");
    if (tc.epochs < 1) throw ConfigError("train_policy: epochs must be >= 1");
    if (tc.batch_size < 1) throw ConfigError("train_policy: batch_size must be >= 1");
    if (tc.val_fraction <= 0.0 || tc.val_fraction >= 1.0)
        throw ConfigError("train_policy: val_fraction must be in (0, 1)");
    for (const auto& s : samples)
        if (s.latent.size() != cfg.latent_dim || s.cam.size() != cfg.cam_dim)
            throw InputError("train_policy: sample dimensions do not match config");

    // The trajectory decoder is frozen: the snapshot below is compared after
    // training so any accidental mutation fails loudly.
    const nn::VecX<float> frozen_snapshot = traj_params;

    PolicyNet<float> net(cfg);
    Rng init_rng(mix_seed(tc.seed, 0xA2));
    net.pack().init_random(init_rng);
    nn::VecX<float>& params = net.pack().values();

    nn::Adam<float>::Options opts;
    opts.lr = static_cast<float>(tc.learning_rate);
    nn::Adam<float> adam(net.pack().total(), opts);

    std::vector<std::size_t> perm(samples.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    Rng split_rng(mix_seed(tc.seed, 0xB2));
    fisher_yates(perm, split_rng);
    std::size_t n_val =
        static_cast<std::size_t>(tc.val_fraction * static_cast<double>(samples.size()));
    n_val = std::clamp<std::size_t>(n_val, 1, samples.size() - 1);
    std::vector<std::size_t> train_idx(perm.begin(), perm.end() - static_cast<long>(n_val));
    std::vector<std::size_t> val_idx(perm.end() - static_cast<long>(n_val), perm.end());

    Rng shuffle_rng(mix_seed(tc.seed, 0xC2));
    PolicyTrainResult result;
    nn::VecX<float> grad = net.pack().zeros_like();

    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        fisher_yates(train_idx, shuffle_rng);
        double sum_loss = 0.0;
        for (std::size_t start = 0; start < train_idx.size();
             start += static_cast<std::size_t>(tc.batch_size)) {
            const std::size_t end =
                std::min(train_idx.size(), start + static_cast<std::size_t>(tc.batch_size));
            grad.setZero();
            for (std::size_t k = start; k < end; ++k) {
                const PolicySample& s = samples[train_idx[k]];
                sum_loss += end_to_end_loss_from_latent(s.latent, s.cam, s.target, net, params,
                                                        trajvae, traj_params, chain, &grad);
            }
            grad /= static_cast<float>(end - start);
            adam.step(params, grad);
        }
        PolicyEpochLog row;
        row.epoch = epoch;
        row.loss = sum_loss / static_cast<double>(train_idx.size());
        result.log.push_back(row);
        if (tc.log_to_stdout && (epoch % 10 == 0 || epoch + 1 == tc.epochs))
            std::printf("epoch %d loss %.8f\n", epoch, row.loss);
    }

    if (traj_params != frozen_snapshot)
        throw std::logic_error("train_policy: frozen trajectory decoder was mutated");

    std::vector<double> errs;
    errs.reserve(val_idx.size());
    for (std::size_t i : val_idx) {
        const PolicySample& s = samples[i];
        nn::VecX<float> input(s.latent.size() + s.cam.size());
        input << s.latent, s.cam;
        nn::VecX<float> a = net.forward(input, params);
        nn::VecX<float> u = trajvae.decode_action(a, traj_params);
        const Eigen::VectorXd q = u.tail(trajvae.config().joints).cast<double>();
        const Eigen::Vector3d pos = kin::forward_kinematics(chain, q).position;
        errs.push_back(std::hypot(pos.x() - s.target.x(), pos.y() - s.target.y()));
    }
    double sum = 0.0;
    for (double e : errs) sum += e;
    result.val_mean_err = errs.empty() ? 0.0 : sum / static_cast<double>(errs.size());
    result.val_p50_err = percentile(errs, 0.5);
    result.val_p90_err = percentile(errs, 0.9);
    result.n_val = errs.size();
    result.params = params;
    return result;
}

json EvalReport::to_json() const {
    json j;
    json rs = json::array();
    for (const auto& r : rows)
        rs.push_back({{"condition", r.condition},
                      {"n", r.n},
                      {"mean_err_m", r.mean_err_m},
                      {"x_err_m", r.x_err_m},
                      {"y_err_m", r.y_err_m},
                      {"success_rate", r.success_rate}});
    j["rows"] = rs;
    j["n_trials"] = trials.size();
    return j;
}

std::string EvalReport::rows_csv() const {
    std::ostringstream out;
    out << "condition,n,mean_err_m,x_err_m,y_err_m,success_rate\n";
    for (const auto& r : rows)
        out << r.condition << ',' << r.n << ',' << r.mean_err_m << ',' << r.x_err_m << ','
            << r.y_err_m << ',' << r.success_rate << '\n';
    return out.str();
}

std::string EvalReport::trials_csv() const {
    std::ostringstream out;
    out << "x,y,err_x,err_y\n";
    for (const auto& t : trials)
        out << t.x << ',' << t.y << ',' << t.err_x << ',' << t.err_y << '\n';
    return out.str();
}

EvalReport evaluate(const scenegen::RandomizationConfig& scene_cfg, const VaedNet<float>& vaed,
                    const nn::VecX<float>& vaed_params, const PolicyNet<float>& policy,
                    const nn::VecX<float>& policy_params, const TrajVaeNet<float>& trajvae,
                    const nn::VecX<float>& traj_params, const kin::KinematicChain& chain,
                    std::size_t n_trials, const EvalOptions& opts) {
    scene_cfg.validate();
    if (opts.inner_radius <= opts.ball_radius)
        throw ConfigError("evaluate: inner radius must exceed ball radius");
    if (opts.clutter_levels.empty()) throw ConfigError("evaluate: no clutter levels given");

    EvalReport report;
    const std::vector<std::string> shapes = {"narrow", "wide"};
    const double r_mid = 0.5 * (scene_cfg.cup_r_min + scene_cfg.cup_r_max);
    const std::size_t n_cond = opts.clutter_levels.size() * shapes.size();

    if (n_trials == 0) {
        for (int cl : opts.clutter_levels)
            for (const auto& sh : shapes)
                report.rows.push_back({"clutter" + std::to_string(cl) + "/" + sh, 0, 0, 0, 0, 0});
        return report;
    }

    report.trials.resize(n_trials);
    const int workers = std::max(opts.workers, 1);
    parallel_chunks(n_trials, static_cast<std::size_t>(workers),
                    [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const std::size_t cond = i % n_cond;
            const int clutter = opts.clutter_levels[cond / shapes.size()];
            const std::size_t shape_bin = cond % shapes.size();

            scenegen::RandomizationConfig cfg = scene_cfg;
            cfg.clutter_n_min = cfg.clutter_n_max = clutter;
            if (shape_bin == 0)
                cfg.cup_r_max = r_mid;
            else
                cfg.cup_r_min = r_mid;

            Rng rng(mix_seed(opts.seed, i));
            scenegen::SceneSpec scene = scenegen::sample_scene(rng, cfg);
            scenegen::Framebuffer frame = scenegen::render_scene(scene);

            nn::Tensor3<float> img(3, frame.height, frame.width);
            for (int y = 0; y < frame.height; ++y)
                for (int x = 0; x < frame.width; ++x)
                    for (int c = 0; c < 3; ++c)
                        img.at(c, y, x) =
                            static_cast<float>(frame.rgb.at(x, y, c)) / 255.0f;

            auto dist = vaed.encode(img, vaed_params);
            const nn::VecX<float> camf = camera_features(scene.camera).cast<float>();
            nn::VecX<float> input(dist.mu.size() + camf.size());
            input << dist.mu, camf;
            nn::VecX<float> a = policy.forward(input, policy_params);
            nn::VecX<float> u = trajvae.decode_action(a, traj_params);
            const Eigen::VectorXd q = u.tail(trajvae.config().joints).cast<double>();
            const Eigen::Vector3d pos = kin::forward_kinematics(chain, q).position;

            const Eigen::Vector3d cup(scene.cup_position.x(), scene.cup_position.y(),
                                      opts.hover_height);
            EvalTrial& t = report.trials[i];
            t.x = cup.x();
            t.y = cup.y();
            t.err_x = pos.x() - cup.x();
            t.err_y = pos.y() - cup.y();
            t.clutter = clutter;
            t.shape = shapes[shape_bin];
            t.success = success_predicate(pos, cup, opts.inner_radius, opts.ball_radius);
        }
    });

    for (int cl : opts.clutter_levels) {
        for (const auto& sh : shapes) {
            EvalCondition row;
            row.condition = "clutter" + std::to_string(cl) + "/" + sh;
            double sum_e = 0.0, sum_x = 0.0, sum_y = 0.0;
            std::size_t n_success = 0;
            for (const auto& t : report.trials) {
                if (t.clutter != cl || t.shape != sh) continue;
                ++row.n;
                sum_e += std::hypot(t.err_x, t.err_y);
                sum_x += std::abs(t.err_x);
                sum_y += std::abs(t.err_y);
                if (t.success) ++n_success;
            }
            if (row.n > 0) {
                const double n = static_cast<double>(row.n);
                row.mean_err_m = sum_e / n;
                row.x_err_m = sum_x / n;
                row.y_err_m = sum_y / n;
                row.success_rate = static_cast<double>(n_success) / n;
            }
            report.rows.push_back(row);
        }
    }
    return report;
}

}  // namespace afp::models
