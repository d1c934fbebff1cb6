// Acceptance harness: one pass/fail line per criterion.
// Usage: afp_acceptance [--only N [--only M ...]]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "afp/core/hashing.hpp"
#include "afp/core/rng.hpp"
#include "afp/kin/kinematics.hpp"
#include "afp/metrics/wfb.hpp"
#include "afp/models/policy.hpp"
#include "afp/models/trajvae.hpp"
#include "afp/models/vaed.hpp"
#include "afp/pipeline/pipeline.hpp"
#include "afp/scenegen/dataset.hpp"
#include "afp/scenegen/render.hpp"
#include "wfb_oracle.hpp"

namespace fs = std::filesystem;
using namespace afp;

namespace {

// Desk-scale training knobs, sized so every criterion fits its time budget.
constexpr int kTrajEpochs = 1200;
constexpr int kVaedEpochs = 30;
const std::vector<models::ConvStage> kVaedChannels = {{16, 4, 2}, {32, 4, 2},
                                                      {64, 4, 2}, {128, 4, 2}};
constexpr std::int64_t kVaedTrainN = 5000;
constexpr std::int64_t kVaedTestN = 500;
constexpr std::int64_t kPolicyScenes = 20000;
constexpr int kPolicyEpochs = 60;
constexpr std::size_t kSuccessTrials = 400;

int hw_workers() {
    const unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}

struct TempDir {
    fs::path path;
    TempDir() {
        std::random_device rd;
        path = fs::temp_directory_path() /
               ("afp_acceptance_" + std::to_string(rd()) + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

struct Failure {
    std::string reason;
};

void require(bool cond, const std::string& what) {
    if (!cond) throw Failure{what};
}

// ---------------------------------------------------------------- criterion 1

void criterion_analytic_oracles() {
    // KL closed form against a Monte-Carlo estimate.
    Rng rng(11);
    nn::VecX<double> mu(4), lv(4);
    for (int i = 0; i < 4; ++i) {
        mu[i] = rng.uniform(-1.0, 1.0);
        lv[i] = rng.uniform(-0.8, 0.8);
    }
    const double exact = models::kl_divergence(mu, lv);
    double acc = 0.0;
    const int n = 1000000;
    for (int k = 0; k < n; ++k) {
        double term = 0.0;
        for (int i = 0; i < 4; ++i) {
            const double eps = rng.normal();
            const double z = mu[i] + std::exp(0.5 * lv[i]) * eps;
            term += 0.5 * (z * z - eps * eps - lv[i]);
        }
        acc += term;
    }
    require(std::abs(acc / n - exact) / exact < 0.01, "kl monte-carlo disagrees beyond 1%");

    // Planar 2-link FK against the textbook formula.
    const double l1 = 0.5, l2 = 0.35;
    kin::KinematicChain two = kin::planar_two_link(l1, l2);
    for (int k = 0; k < 100; ++k) {
        Eigen::VectorXd q(2);
        q << rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5);
        const Eigen::Vector3d p = kin::forward_kinematics(two, q).position;
        const double x = l1 * std::cos(q[0]) + l2 * std::cos(q[0] + q[1]);
        const double y = l1 * std::sin(q[0]) + l2 * std::sin(q[0] + q[1]);
        require(std::abs(p.x() - x) < 1e-9 && std::abs(p.y() - y) < 1e-9,
                "planar fk mismatch above 1e-9 m");
    }

    // Geometric Jacobian against central finite differences.
    kin::KinematicChain three = kin::planar_three_link(0.3, 0.25, 0.2, 0.1);
    const double h = 1e-6;
    for (int k = 0; k < 20; ++k) {
        Eigen::VectorXd q(3);
        for (int j = 0; j < 3; ++j) q[j] = rng.uniform(-1.5, 1.5);
        const Eigen::MatrixXd J = kin::fk_jacobian(three, q);
        for (int j = 0; j < 3; ++j) {
            Eigen::VectorXd qp = q, qm = q;
            qp[j] += h;
            qm[j] -= h;
            const Eigen::Vector3d fd = (kin::forward_kinematics(three, qp).position -
                                        kin::forward_kinematics(three, qm).position) /
                                       (2 * h);
            require((J.col(j) - fd).cwiseAbs().maxCoeff() < 1e-6,
                    "jacobian finite-difference mismatch above 1e-6");
        }
    }
}

// ---------------------------------------------------------------- criterion 2

models::VaedConfig tiny_vaed_cfg() {
    models::VaedConfig cfg;
    cfg.latent_dim = 2;
    cfg.conv_spec = {{4, 4, 2}, {6, 4, 2}, {8, 4, 2}, {8, 3, 1}};
    cfg.image_h = cfg.image_w = 8;
    cfg.fc_hidden = 16;
    return cfg;
}

models::TrajVaeConfig tiny_traj_cfg() {
    models::TrajVaeConfig cfg;
    cfg.steps = 4;
    cfg.joints = 2;
    cfg.action_dim = 3;
    cfg.hidden = {8, 6, 4};
    return cfg;
}

void criterion_gradient_integrity() {
    Rng rng(13);

    {  // VAED loss
        models::VaedNet<double> net(tiny_vaed_cfg());
        net.pack().init_random(rng);
        nn::Tensor3<double> img(3, 8, 8), tgt(2, 8, 8);
        for (std::ptrdiff_t i = 0; i < img.data.size(); ++i) img.data[i] = rng.uniform();
        for (std::ptrdiff_t i = 0; i < tgt.data.size(); ++i)
            tgt.data[i] = rng.uniform() < 0.4 ? 1.0 : 0.0;
        nn::VecX<double> eps(2);
        eps << 0.6, -0.4;
        models::VaedNet<double>::Cache cache;
        net.loss(img, tgt, net.pack().values(), eps, 4.0, &cache);
        nn::VecX<double> grad = net.pack().zeros_like();
        net.loss_backward(cache, tgt, net.pack().values(), 4.0, grad);
        int checked = 0;
        const double h = 1e-5;
        for (int trial = 0; trial < 150 && checked < 25; ++trial) {
            const std::ptrdiff_t i = rng.uniform_int(0, net.pack().total() - 1);
            nn::VecX<double> p = net.pack().values();
            p[i] += h;
            const double lp = net.loss(img, tgt, p, eps, 4.0).total;
            p[i] -= 2 * h;
            const double lm = net.loss(img, tgt, p, eps, 4.0).total;
            const double fd = (lp - lm) / (2 * h);
            if (std::abs(fd) < 1e-10 && std::abs(grad[i]) < 1e-10) continue;
            require(std::abs(grad[i] - fd) / std::max(1e-6, std::abs(fd)) < 1e-4,
                    "vaed gradient relative error above 1e-4");
            ++checked;
        }
        require(checked >= 20, "fewer than 20 usable vaed gradient directions");
    }

    {  // trajectory VAE loss
        models::TrajVaeNet<double> net(tiny_traj_cfg());
        net.pack().init_random(rng);
        nn::VecX<double> u(8), eps(3);
        for (int i = 0; i < 8; ++i) u[i] = rng.uniform(-1.0, 1.0);
        eps << 0.5, -0.7, 0.2;
        models::TrajVaeNet<double>::Cache cache;
        net.loss(u, net.pack().values(), eps, 1e-3, &cache);
        nn::VecX<double> grad = net.pack().zeros_like();
        net.loss_backward(cache, u, net.pack().values(), 1e-3, grad);
        int checked = 0;
        const double h = 1e-6;
        for (int trial = 0; trial < 150 && checked < 25; ++trial) {
            const std::ptrdiff_t i = rng.uniform_int(0, net.pack().total() - 1);
            nn::VecX<double> p = net.pack().values();
            p[i] += h;
            const double lp = net.loss(u, p, eps, 1e-3).total;
            p[i] -= 2 * h;
            const double lm = net.loss(u, p, eps, 1e-3).total;
            const double fd = (lp - lm) / (2 * h);
            if (std::abs(fd) < 1e-12 && std::abs(grad[i]) < 1e-12) continue;
            require(std::abs(grad[i] - fd) / std::max(1e-6, std::abs(fd)) < 1e-4,
                    "trajectory vae gradient relative error above 1e-4");
            ++checked;
        }
        require(checked >= 20, "fewer than 20 usable trajectory gradient directions");
    }

    {  // policy end-to-end loss through the frozen decoder and FK
        kin::KinematicChain chain = kin::planar_two_link(0.5, 0.4);
        models::TrajVaeNet<double> trajvae(tiny_traj_cfg());
        trajvae.pack().init_random(rng);
        models::PolicyConfig pcfg;
        pcfg.latent_dim = 3;
        pcfg.action_dim = 3;
        pcfg.hidden = {8, 6, 4};
        models::PolicyNet<double> policy(pcfg);
        policy.pack().init_random(rng);
        nn::VecX<double> s(3), cam(7);
        for (int i = 0; i < 3; ++i) s[i] = rng.normal();
        for (int i = 0; i < 7; ++i) cam[i] = rng.normal();
        const Eigen::Vector3d target(0.3, 0.1, 0.0);
        nn::VecX<double> grad = policy.pack().zeros_like();
        models::end_to_end_loss_from_latent(s, cam, target, policy, policy.pack().values(),
                                            trajvae, trajvae.pack().values(), chain, &grad);
        int checked = 0;
        const double h = 1e-6;
        for (int trial = 0; trial < 150 && checked < 25; ++trial) {
            const std::ptrdiff_t i = rng.uniform_int(0, policy.pack().total() - 1);
            nn::VecX<double> p = policy.pack().values();
            p[i] += h;
            const double lp = models::end_to_end_loss_from_latent(
                s, cam, target, policy, p, trajvae, trajvae.pack().values(), chain);
            p[i] -= 2 * h;
            const double lm = models::end_to_end_loss_from_latent(
                s, cam, target, policy, p, trajvae, trajvae.pack().values(), chain);
            const double fd = (lp - lm) / (2 * h);
            if (std::abs(fd) < 1e-12 && std::abs(grad[i]) < 1e-12) continue;
            require(std::abs(grad[i] - fd) / std::max(1e-6, std::abs(fd)) < 1e-4,
                    "end-to-end gradient relative error above 1e-4");
            ++checked;
        }
        require(checked >= 20, "fewer than 20 usable end-to-end gradient directions");
    }
}

// ---------------------------------------------------------------- criterion 3

void criterion_wfb_exhaustive() {
    Eigen::MatrixXd gt(4, 4);
    gt << 0, 0, 0, 0,
          0, 1, 1, 0,
          0, 1, 0, 0,
          1, 0, 0, 1;

    std::vector<double> score(1 << 16);
    Eigen::MatrixXd pred(4, 4);
    for (unsigned mask = 0; mask < (1u << 16); ++mask) {
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) pred(r, c) = (mask >> (r * 4 + c)) & 1u ? 1.0 : 0.0;
        const double got = metrics::weighted_fbeta(pred, gt);
        const double want = wfb_oracle::weighted_fbeta_reference(pred, gt);
        require(std::abs(got - want) < 1e-10, "oracle disagreement above 1e-10");
        score[mask] = got;
    }

    unsigned gt_mask = 0;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c)
            if (gt(r, c) == 1.0) gt_mask |= 1u << (r * 4 + c);
    require(score[gt_mask] == 1.0, "perfect map does not score exactly 1.0");

    // Exhaustive monotone improvement: correcting any wrong pixel never hurts.
    for (unsigned mask = 0; mask < (1u << 16); ++mask)
        for (int bit = 0; bit < 16; ++bit) {
            const unsigned cur = (mask >> bit) & 1u;
            const unsigned truth = (gt_mask >> bit) & 1u;
            if (cur == truth) continue;
            const unsigned fixedm = mask ^ (1u << bit);
            require(score[fixedm] >= score[mask] - 1e-12,
                    "monotone improvement property violated");
        }
}

// ---------------------------------------------------------------- criterion 4

void criterion_beta_schedule() {
    models::BetaSchedule s;
    require(models::beta_at(s, 0) == 1e-8, "beta at epoch 0 is not 1e-8");
    require(std::abs(models::beta_at(s, 100000) - 1e-5) < 1e-18, "beta does not cap at 1e-5");
    double prev = models::beta_at(s, 0);
    for (long e = 1; e < 4000; ++e) {
        const double b = models::beta_at(s, e);
        require(b >= prev, "beta schedule is not monotone");
        if (e % 400 != 0)
            require(b == prev, "beta changed off a 400-epoch boundary");
        prev = b;
    }
}

// ---------------------------------------------------------------- criterion 5

void criterion_dataset_generator() {
    TempDir dir;
    scenegen::RandomizationConfig cfg;
    const std::int64_t n = 1000;
    const std::uint64_t seed = 4242;
    const auto d1 = dir.path / "w1", d8 = dir.path / "w8", d1b = dir.path / "rerun";
    scenegen::generate_dataset(n, cfg, d1, 1, seed);
    scenegen::generate_dataset(n, cfg, d8, 8, seed);
    scenegen::generate_dataset(n, cfg, d1b, 1, seed);

    for (std::int64_t i = 0; i < n; ++i) {
        for (const auto& name : {scenegen::sample_rgb_name(i), scenegen::sample_label_name(i),
                                 scenegen::sample_meta_name(i)}) {
            const auto h = hash_file(d1 / name);
            require(h == hash_file(d8 / name), "worker-count dependence in " + name);
            require(h == hash_file(d1b / name), "rerun dependence in " + name);
        }
    }

    std::int64_t labeled = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        scenegen::LoadedSample s = scenegen::load_sample(d1, i);
        scenegen::GeneratedSample g = scenegen::generate_sample(seed, i, cfg);
        require(g.frame.rgb.pixels == s.rgb.pixels, "stored rgb diverges from generator");
        bool any = false;
        for (std::size_t p = 0; p < s.labels.wrap_grasp.size(); ++p) {
            const bool wrap = s.labels.wrap_grasp[p] == 1;
            const bool contain = s.labels.contain[p] == 1;
            require(!(wrap && contain), "affordance channels overlap");
            if (wrap || contain) {
                any = true;
                require(g.frame.object[p] == scenegen::kObjCup,
                        "label on a non-container pixel");
            }
        }
        labeled += any ? 1 : 0;
    }
    // heavy clutter may fully occlude the container in a small fraction
    require(labeled * 10 >= n * 8, "container occluded in over 20% of samples");
}

// ---------------------------------------------------------------- criterion 6

void criterion_trajvae_training() {
    kin::KinematicChain chain = kin::planar_three_link(0.3, 0.25, 0.2, 0.1);
    models::TrajVaeConfig cfg;  // T=24, 3 joints, 5-dim action
    models::WorkspaceRect ws;
    Eigen::VectorXd q0 = Eigen::VectorXd::Zero(3);
    models::TrajectorySet set =
        models::generate_training_trajectories(chain, ws, 32, 32, q0, cfg);
    require(set.trajectories.size() >= 1000, "fewer than 1000 reachable trajectories");

    models::BetaSchedule schedule;
    models::TrajVaeTrainConfig tc;
    tc.epochs = kTrajEpochs;
    tc.seed = 7;
    models::TrajVaeTrainResult r = models::train_trajectory_vae(set, cfg, schedule, tc);
    std::printf("        trajvae val rmse %.4f rad (target < 0.05)\n", r.val_rmse);
    require(r.val_rmse < 0.05, "held-out trajectory rmse " + std::to_string(r.val_rmse) +
                                   " rad is not below 0.05");
}

// ---------------------------------------------------------------- criterion 7

void image_to_tensors(const scenegen::LoadedSample& s, nn::Tensor3<float>& img,
                      nn::Tensor3<float>& tgt) {
    const int h = s.rgb.height, w = s.rgb.width;
    img = nn::Tensor3<float>(3, h, w);
    tgt = nn::Tensor3<float>(2, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c)
                img.at(c, y, x) = static_cast<float>(s.rgb.at(x, y, c)) / 255.0f;
            const std::size_t k = static_cast<std::size_t>(y) * w + x;
            tgt.at(0, y, x) = s.labels.wrap_grasp[k] ? 1.0f : 0.0f;
            tgt.at(1, y, x) = s.labels.contain[k] ? 1.0f : 0.0f;
        }
}

// Thresholded pixel F1 per affordance channel, aggregated over a directory.
double mean_pixel_f1(const fs::path& dataset_dir, std::int64_t n,
                     const models::VaedNet<float>& net, const nn::VecX<float>& params) {
    double tp[2] = {0, 0}, fp[2] = {0, 0}, fn[2] = {0, 0};
    nn::Tensor3<float> img, tgt;
    for (std::int64_t i = 0; i < n; ++i) {
        scenegen::LoadedSample s = scenegen::load_sample(dataset_dir, i);
        image_to_tensors(s, img, tgt);
        auto dist = net.encode(img, params);
        nn::Tensor3<float> probs = net.decode(dist.mu, params);
        for (int c = 0; c < 2; ++c)
            for (int y = 0; y < probs.h; ++y)
                for (int x = 0; x < probs.w; ++x) {
                    const bool pred = probs.at(c, y, x) >= 0.5f;
                    const bool truth = tgt.at(c, y, x) >= 0.5f;
                    if (pred && truth) tp[c] += 1;
                    else if (pred) fp[c] += 1;
                    else if (truth) fn[c] += 1;
                }
    }
    double sum = 0.0;
    for (int c = 0; c < 2; ++c) {
        const double denom = 2 * tp[c] + fp[c] + fn[c];
        sum += denom > 0 ? 2 * tp[c] / denom : 1.0;
    }
    return sum / 2.0;
}

void criterion_vaed_training() {
    TempDir dir;
    scenegen::RandomizationConfig scfg;
    const auto train_dir = dir.path / "train", test_dir = dir.path / "test";
    scenegen::generate_dataset(kVaedTrainN, scfg, train_dir, hw_workers(), 2001);
    scenegen::generate_dataset(kVaedTestN, scfg, test_dir, hw_workers(), 9009);

    models::VaedConfig cfg;  // latent 10, beta 4
    cfg.conv_spec = kVaedChannels;
    models::VaedTrainConfig tc;
    tc.epochs = kVaedEpochs;
    tc.seed = 3;
    models::VaedTrainResult r = models::train_vaed(train_dir, cfg, tc);

    models::VaedNet<float> net(cfg);
    const double f1 = mean_pixel_f1(test_dir, kVaedTestN, net, r.params);
    std::printf("        vaed held-out pixel f1 %.4f (target >= 0.75)\n", f1);
    require(f1 >= 0.75, "held-out pixel f1 " + std::to_string(f1) + " below 0.75");
}

// ---------------------------------------------------------------- criterion 8

// Scene distribution for the policy stage: camera and lighting pinned,
// limited clutter, so the latent state isolates the container.
scenegen::RandomizationConfig simplified_scenes() {
    scenegen::RandomizationConfig c;
    c.cam_x_min = c.cam_x_max = 0.98;
    c.cam_y_min = c.cam_y_max = 0.0;
    c.cam_z_min = c.cam_z_max = 0.82;
    c.cam_look_jitter = 0.0;
    c.cam_focal_min = c.cam_focal_max = 72.0;
    c.clutter_n_min = 0;
    c.clutter_n_max = 2;
    c.lights_n_min = c.lights_n_max = 1;
    c.light_intensity_min = c.light_intensity_max = 0.9;
    c.table_scale_min = c.table_scale_max = 1.0;
    return c;
}

void criterion_policy_training() {
    TempDir dir;
    scenegen::RandomizationConfig scfg = simplified_scenes();
    const auto train_dir = dir.path / "train";
    scenegen::generate_dataset(kVaedTrainN, scfg, train_dir, hw_workers(), 5001);

    models::VaedConfig vcfg;
    vcfg.conv_spec = kVaedChannels;
    models::VaedTrainConfig vtc;
    vtc.epochs = kVaedEpochs;
    vtc.seed = 5;
    models::VaedTrainResult vres = models::train_vaed(train_dir, vcfg, vtc);
    models::VaedNet<float> vaed(vcfg);

    kin::KinematicChain chain = kin::planar_three_link(0.3, 0.25, 0.2, 0.1);
    models::TrajVaeConfig tcfg;
    models::WorkspaceRect ws;
    Eigen::VectorXd q0 = Eigen::VectorXd::Zero(3);
    models::TrajectorySet set =
        models::generate_training_trajectories(chain, ws, 32, 32, q0, tcfg);
    models::BetaSchedule schedule;
    models::TrajVaeTrainConfig ttc;
    ttc.epochs = kTrajEpochs;
    ttc.seed = 7;
    models::TrajVaeTrainResult tres = models::train_trajectory_vae(set, tcfg, schedule, ttc);
    models::TrajVaeNet<float> trajvae(tcfg);

    std::vector<models::PolicySample> samples = pipeline::build_policy_samples(
        scfg, vaed, vres.params, kPolicyScenes, 0.10, 77, hw_workers());

    models::PolicyConfig pcfg;
    models::PolicyTrainConfig ptc;
    ptc.epochs = kPolicyEpochs;
    ptc.seed = 9;
    models::PolicyTrainResult pres =
        models::train_policy(samples, pcfg, trajvae, tres.params, chain, ptc);
    models::PolicyNet<float> policy(pcfg);

    const double diag = ws.diagonal();
    std::printf("        policy val mean err %.4f m (target < %.4f)\n", pres.val_mean_err,
                0.05 * diag);
    require(pres.val_mean_err < 0.05 * diag,
            "validation planar error " + std::to_string(pres.val_mean_err) +
                " m is not below 5% of the workspace diagonal");

    models::EvalOptions opts;
    opts.clutter_levels = {0, 2};
    opts.seed = 31;
    opts.workers = hw_workers();
    models::EvalReport report =
        models::evaluate(scfg, vaed, vres.params, policy, pres.params, trajvae, tres.params,
                         chain, kSuccessTrials, opts);
    std::size_t ok = 0;
    for (const auto& t : report.trials) ok += t.success ? 1 : 0;
    const double rate = static_cast<double>(ok) / static_cast<double>(report.trials.size());
    std::printf("        policy success rate %.3f (target >= 0.80)\n", rate);
    require(rate >= 0.80, "success rate " + std::to_string(rate) + " below 0.80");
}

// --------------------------------------------------------- criteria 9 and 10

pipeline::PipelineConfig small_pipeline(const fs::path& root) {
    pipeline::PipelineConfig c;
    c.master_seed = 99;
    c.output_root = root;
    c.workers = 2;
    c.scenegen.image_w = c.scenegen.image_h = 32;
    c.dataset_n = 60;
    c.vaed.image_h = c.vaed.image_w = 32;
    c.vaed.latent_dim = 6;
    c.vaed.conv_spec = {{6, 4, 2}, {8, 4, 2}, {12, 4, 2}, {16, 4, 2}};
    c.vaed.fc_hidden = 32;
    c.vaed_train.epochs = 2;
    c.trajvae.hidden = {32, 24, 16};
    c.trajvae_train.epochs = 40;
    c.traj_grid_nx = c.traj_grid_ny = 8;
    c.policy.latent_dim = 6;
    c.policy_train.epochs = 3;
    c.policy_scenes = 120;
    c.eval_trials = 24;
    return c;
}

void criterion_frozen_weights() {
    TempDir dir;
    pipeline::PipelineConfig cfg = small_pipeline(dir.path / "run");
    pipeline::run_gen_data(cfg);
    pipeline::run_train_vaed(cfg);
    pipeline::run_train_trajvae(cfg);
    const auto vaed_before = hash_file(cfg.vaed_ckpt());
    const auto traj_before = hash_file(cfg.trajvae_ckpt());
    pipeline::run_train_policy(cfg);
    require(hash_file(cfg.vaed_ckpt()) == vaed_before,
            "vaed checkpoint changed during policy training");
    require(hash_file(cfg.trajvae_ckpt()) == traj_before,
            "trajectory checkpoint changed during policy training");
}

void criterion_reproducibility() {
    TempDir dir;
    auto run_all = [&](const fs::path& root) {
        pipeline::PipelineConfig cfg = small_pipeline(root);
        pipeline::run_gen_data(cfg);
        pipeline::run_train_vaed(cfg);
        pipeline::run_train_trajvae(cfg);
        pipeline::run_train_policy(cfg);
        pipeline::run_evaluate(cfg);
        return cfg;
    };
    pipeline::PipelineConfig a = run_all(dir.path / "a");
    pipeline::PipelineConfig b = run_all(dir.path / "b");

    std::vector<fs::path> artifacts = {a.vaed_ckpt(),       a.trajvae_ckpt(),
                                       a.traj_set_file(),   a.policy_ckpt(),
                                       a.eval_report_json(), a.eval_rows_csv(),
                                       a.eval_trials_csv()};
    for (std::int64_t i = 0; i < a.dataset_n; ++i) {
        artifacts.push_back(a.dataset_dir() / scenegen::sample_rgb_name(i));
        artifacts.push_back(a.dataset_dir() / scenegen::sample_label_name(i));
        artifacts.push_back(a.dataset_dir() / scenegen::sample_meta_name(i));
    }
    for (const auto& p : artifacts) {
        const fs::path q = b.output_root / fs::relative(p, a.output_root);
        require(hash_file(p) == hash_file(q),
                "artifact differs between runs: " + fs::relative(p, a.output_root).string());
    }
}

// --------------------------------------------------------------------- driver

struct Criterion {
    int id;
    const char* name;
    void (*fn)();
};

const Criterion kCriteria[] = {
    {1, "analytic oracles (kl monte-carlo, planar fk, jacobian)", criterion_analytic_oracles},
    {2, "gradient integrity (vaed, trajectory vae, end-to-end)", criterion_gradient_integrity},
    {3, "weighted f-measure exhaustive oracle and monotonicity", criterion_wfb_exhaustive},
    {4, "kl weight schedule ladder", criterion_beta_schedule},
    {5, "dataset generator determinism and label soundness", criterion_dataset_generator},
    {6, "trajectory vae desk-scale training", criterion_trajvae_training},
    {7, "vaed desk-scale training", criterion_vaed_training},
    {8, "end-to-end desk-scale policy", criterion_policy_training},
    {9, "frozen-weight isolation", criterion_frozen_weights},
    {10, "pipeline reproducibility", criterion_reproducibility},
};

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) {
        if (std::string(argv[i]) == "--only" && i + 1 < argc) only.insert(std::atoi(argv[++i]));
    }

    int failures = 0;
    for (const Criterion& c : kCriteria) {
        if (!only.empty() && !only.count(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        std::string verdict = "PASS", detail;
        try {
            c.fn();
        } catch (const Failure& f) {
            verdict = "FAIL";
            detail = f.reason;
            ++failures;
        } catch (const std::exception& e) {
            verdict = "FAIL";
            detail = std::string("exception: ") + e.what();
            ++failures;
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("criterion %2d: %s  %s  (%.1fs)%s%s\n", c.id, verdict.c_str(), c.name,
                    secs, detail.empty() ? "" : " -- ", detail.c_str());
        std::fflush(stdout);
    }
    return failures;
}
