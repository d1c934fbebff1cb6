#include "afp/pipeline/pipeline.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "afp/core/hashing.hpp"
#include "afp/core/parallel.hpp"
#include "afp/core/rng.hpp"
#include "afp/pipeline/plots.hpp"
#include "afp/scenegen/dataset.hpp"
#include "afp/scenegen/render.hpp"

using nlohmann::json;

namespace afp::pipeline {
namespace {

std::vector<double> parse_double_list(const std::string& text, const std::string& key) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ConfigError("config key " + key + ": cannot parse '" + item + "' as number");
        }
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& text, const std::string& key) {
    std::vector<int> out;
    for (double v : parse_double_list(text, key)) out.push_back(static_cast<int>(v));
    return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << text;
    if (!out) throw IoError("short write: " + path.string());
}

std::string config_hash(const PipelineConfig& cfg) {
    const std::string s = cfg.raw.serialize();
    Fnv1a h;
    h.update(s.data(), s.size());
    return h.hex();
}

void require_artifact(const std::filesystem::path& path, const std::string& producer) {
    if (!std::filesystem::exists(path))
        throw DependencyError("missing artifact " + path.string() + "; run `" + producer +
                              "` first");
}

struct StageTimer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

nn::Tensor3<float> image_to_tensor(const ImageU8& rgb) {
    nn::Tensor3<float> img(3, rgb.height, rgb.width);
    for (int y = 0; y < rgb.height; ++y)
        for (int x = 0; x < rgb.width; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(c, y, x) = static_cast<float>(rgb.at(x, y, c)) / 255.0f;
    return img;
}

}  // namespace

PipelineConfig PipelineConfig::from_config(const KeyValueConfig& kv) {
    PipelineConfig c;
    c.raw = kv;
    c.master_seed = static_cast<std::uint64_t>(kv.get_int("master_seed", 1));
    c.output_root = kv.get_str("output_root", "runs/default");
    if (const char* env = std::getenv(kOutputRootEnv); env && *env) c.output_root = env;
    c.workers = static_cast<int>(kv.get_int("workers", 1));

    c.scenegen = scenegen::RandomizationConfig::from_config(kv);
    c.dataset_n = kv.get_int("dataset.n", 1000);

    c.vaed.latent_dim = static_cast<int>(kv.get_int("vaed.latent_dim", 10));
    c.vaed.beta = kv.get_double("vaed.beta", 4.0);
    c.vaed.image_h = c.scenegen.image_h;
    c.vaed.image_w = c.scenegen.image_w;
    c.vaed.n_affordances = static_cast<int>(kv.get_int("vaed.n_affordances", 2));
    c.vaed.fc_hidden = static_cast<int>(kv.get_int("vaed.fc_hidden", 256));
    if (kv.has("vaed.channels")) {
        const auto ch = parse_int_list(kv.get_str("vaed.channels"), "vaed.channels");
        if (ch.size() != 4) throw ConfigError("vaed.channels: exactly 4 stages required");
        c.vaed.conv_spec.clear();
        for (int v : ch) c.vaed.conv_spec.push_back({v, 4, 2});
    }
    c.vaed_train.epochs = static_cast<int>(kv.get_int("vaed.epochs", 40));
    c.vaed_train.batch_size = static_cast<int>(kv.get_int("vaed.batch_size", 64));
    c.vaed_train.learning_rate = kv.get_double("vaed.learning_rate", 1e-3);
    c.vaed_train.val_fraction = kv.get_double("vaed.val_fraction", 0.1);
    c.vaed_train.sum_bce = kv.get_bool("vaed.sum_bce", true);
    c.vaed_train.seed = mix_seed(c.master_seed, 0x11);
    c.vaed_train.workers = c.workers;

    c.trajvae.steps = static_cast<int>(kv.get_int("trajvae.steps", 24));
    c.trajvae.joints = static_cast<int>(kv.get_int("trajvae.joints", 3));
    c.trajvae.action_dim = static_cast<int>(kv.get_int("trajvae.action_dim", 5));
    if (kv.has("trajvae.hidden"))
        c.trajvae.hidden = parse_int_list(kv.get_str("trajvae.hidden"), "trajvae.hidden");
    c.trajvae_schedule.beta_start = kv.get_double("trajvae.beta_start", 1e-8);
    c.trajvae_schedule.beta_end = kv.get_double("trajvae.beta_end", 1e-5);
    c.trajvae_schedule.interval = static_cast<int>(kv.get_int("trajvae.beta_interval", 400));
    c.trajvae_train.epochs = static_cast<int>(kv.get_int("trajvae.epochs", 1500));
    c.trajvae_train.batch_size = static_cast<int>(kv.get_int("trajvae.batch_size", 64));
    c.trajvae_train.learning_rate = kv.get_double("trajvae.learning_rate", 1e-3);
    c.trajvae_train.val_fraction = kv.get_double("trajvae.val_fraction", 0.1);
    c.trajvae_train.seed = mix_seed(c.master_seed, 0x22);

    c.traj_grid_nx = static_cast<int>(kv.get_int("traj.grid_nx", 32));
    c.traj_grid_ny = static_cast<int>(kv.get_int("traj.grid_ny", 32));
    c.traj_gen.hover_height = kv.get_double("traj.hover_height", 0.10);
    c.traj_gen.via_raise = kv.get_double("traj.via_raise", 0.05);
    c.traj_gen.final_tol = kv.get_double("traj.final_tol", 1e-3);
    c.chain_file = kv.get_str("chain.file", "");
    if (kv.has("traj.start_config"))
        c.start_config = parse_double_list(kv.get_str("traj.start_config"),
                                           "traj.start_config");

    c.policy.latent_dim = static_cast<int>(kv.get_int("policy.latent_dim", c.vaed.latent_dim));
    c.policy.cam_dim = static_cast<int>(kv.get_int("policy.cam_dim", 7));
    c.policy.action_dim =
        static_cast<int>(kv.get_int("policy.action_dim", c.trajvae.action_dim));
    if (kv.has("policy.hidden"))
        c.policy.hidden = parse_int_list(kv.get_str("policy.hidden"), "policy.hidden");
    c.policy_train.epochs = static_cast<int>(kv.get_int("policy.epochs", 60));
    c.policy_train.batch_size = static_cast<int>(kv.get_int("policy.batch_size", 64));
    c.policy_train.learning_rate = kv.get_double("policy.learning_rate", 1e-3);
    c.policy_train.val_fraction = kv.get_double("policy.val_fraction", 0.1);
    c.policy_train.seed = mix_seed(c.master_seed, 0x33);
    c.policy_scenes = kv.get_int("policy.scenes", 20000);

    c.eval_trials = static_cast<std::size_t>(kv.get_int("eval.trials", 600));
    if (kv.has("eval.clutter_levels"))
        c.eval.clutter_levels =
            parse_int_list(kv.get_str("eval.clutter_levels"), "eval.clutter_levels");
    c.eval.inner_radius = kv.get_double("eval.inner_radius", 0.04);
    c.eval.ball_radius = kv.get_double("eval.ball_radius", 0.02);
    c.eval.hover_height = c.traj_gen.hover_height;
    c.eval.seed = mix_seed(c.master_seed, 0x44);
    c.eval.workers = c.workers;

    c.validate();
    return c;
}

void PipelineConfig::validate() const {
    scenegen.validate();
    vaed.validate();
    trajvae.validate();
    trajvae_schedule.validate();
    policy.validate();
    if (dataset_n < 1) throw ConfigError("dataset.n must be >= 1");
    if (policy_scenes < 2) throw ConfigError("policy.scenes must be >= 2");
    if (traj_grid_nx < 1 || traj_grid_ny < 1) throw ConfigError("trajectory grid must be >= 1");
    if (policy.latent_dim != vaed.latent_dim)
        throw ConfigError("policy.latent_dim must equal vaed.latent_dim");
    if (policy.action_dim != trajvae.action_dim)
        throw ConfigError("policy.action_dim must equal trajvae.action_dim");
    if (eval.inner_radius <= eval.ball_radius)
        throw ConfigError("eval.inner_radius must exceed eval.ball_radius");
}

kin::KinematicChain PipelineConfig::load_chain() const {
    if (chain_file.empty())
        return kin::planar_three_link(0.30, 0.25, 0.20, traj_gen.hover_height);
    if (!std::filesystem::exists(chain_file))
        throw DependencyError("missing kinematic chain file " + chain_file.string());
    return kin::KinematicChain::load(chain_file);
}

Eigen::VectorXd PipelineConfig::start_q(const kin::KinematicChain& chain) const {
    if (start_config.empty()) return Eigen::VectorXd::Zero(chain.dof());
    if (static_cast<int>(start_config.size()) != chain.dof())
        throw ConfigError("traj.start_config length does not match chain dof");
    Eigen::VectorXd q(chain.dof());
    for (int i = 0; i < chain.dof(); ++i) q[i] = start_config[static_cast<std::size_t>(i)];
    return q;
}

models::WorkspaceRect PipelineConfig::workspace() const {
    models::WorkspaceRect w;
    w.x_min = scenegen.workspace_x_min;
    w.x_max = scenegen.workspace_x_max;
    w.y_min = scenegen.workspace_y_min;
    w.y_max = scenegen.workspace_y_max;
    return w;
}

void append_run_manifest(const std::filesystem::path& file, const RunManifestEntry& entry) {
    json j;
    j["stage"] = entry.stage;
    j["config_hash"] = entry.config_hash;
    json inputs = json::object();
    for (const auto& [path, hash] : entry.input_hashes) inputs[path] = hash;
    j["input_hashes"] = inputs;
    j["outputs"] = entry.outputs;
    j["wall_time_s"] = entry.wall_time_s;
    j["seed"] = entry.seed;
    std::ofstream out(file, std::ios::app);
    if (!out) throw IoError("cannot append to run manifest " + file.string());
    out << j.dump() << "\n";
    if (!out) throw IoError("short write: " + file.string());
}

std::filesystem::path run_gen_data(const PipelineConfig& cfg) {
    StageTimer timer;
    std::filesystem::create_directories(cfg.output_root);
    scenegen::generate_dataset(cfg.dataset_n, cfg.scenegen, cfg.dataset_dir(), cfg.workers,
                               cfg.master_seed);
    RunManifestEntry entry;
    entry.stage = "gen-data";
    entry.config_hash = config_hash(cfg);
    entry.outputs = {(cfg.dataset_dir() / "manifest.json").string()};
    entry.wall_time_s = timer.seconds();
    entry.seed = cfg.master_seed;
    append_run_manifest(cfg.run_manifest_file(), entry);
    return cfg.dataset_dir();
}

std::filesystem::path run_train_vaed(const PipelineConfig& cfg) {
    StageTimer timer;
    std::filesystem::create_directories(cfg.output_root);
    const auto manifest_path = cfg.dataset_dir() / "manifest.json";
    require_artifact(manifest_path, "gen-data");

    models::VaedTrainResult result = models::train_vaed(cfg.dataset_dir(), cfg.vaed,
                                                        cfg.vaed_train);
    models::save_vaed_checkpoint(cfg.vaed_ckpt(), cfg.vaed, result.params);

    std::ostringstream log;
    log << "epoch,bce,kl,total\n";
    for (const auto& row : result.log)
        log << row.epoch << ',' << row.bce << ',' << row.kl << ',' << row.total << '\n';
    write_text_file(cfg.output_root / "vaed_train_log.csv", log.str());
    json report;
    report["val_bce"] = result.val_bce;
    report["n_skipped"] = result.n_skipped;
    write_text_file(cfg.output_root / "vaed_report.json", report.dump(2) + "\n");

    RunManifestEntry entry;
    entry.stage = "train-vaed";
    entry.config_hash = config_hash(cfg);
    entry.input_hashes = {{manifest_path.string(), hash_file_hex(manifest_path)}};
    entry.outputs = {cfg.vaed_ckpt().string(),
                     (cfg.output_root / "vaed_train_log.csv").string()};
    entry.wall_time_s = timer.seconds();
    entry.seed = cfg.vaed_train.seed;
    append_run_manifest(cfg.run_manifest_file(), entry);
    return cfg.vaed_ckpt();
}

std::filesystem::path run_train_trajvae(const PipelineConfig& cfg) {
    StageTimer timer;
    std::filesystem::create_directories(cfg.output_root);
    const kin::KinematicChain chain = cfg.load_chain();
    const Eigen::VectorXd q0 = cfg.start_q(chain);

    models::TrajectorySet set = models::generate_training_trajectories(
        chain, cfg.workspace(), cfg.traj_grid_nx, cfg.traj_grid_ny, q0, cfg.trajvae,
        cfg.traj_gen);
    set.save(cfg.traj_set_file());

    models::TrajVaeTrainResult result =
        models::train_trajectory_vae(set, cfg.trajvae, cfg.trajvae_schedule, cfg.trajvae_train);
    models::save_trajvae_checkpoint(cfg.trajvae_ckpt(), cfg.trajvae, result.params);

    std::ostringstream log;
    log << "epoch,mse,kl,beta\n";
    for (const auto& row : result.log)
        log << row.epoch << ',' << row.mse << ',' << row.kl << ',' << row.beta << '\n';
    write_text_file(cfg.output_root / "trajvae_train_log.csv", log.str());
    json report;
    report["val_rmse_rad"] = result.val_rmse;
    report["train_rmse_rad"] = result.train_rmse;
    report["n_trajectories"] = set.trajectories.size();
    report["n_unreachable"] = set.unreachable.size();
    write_text_file(cfg.output_root / "trajvae_report.json", report.dump(2) + "\n");

    RunManifestEntry entry;
    entry.stage = "train-trajvae";
    entry.config_hash = config_hash(cfg);
    entry.input_hashes = {{cfg.traj_set_file().string(), hash_file_hex(cfg.traj_set_file())}};
    entry.outputs = {cfg.trajvae_ckpt().string(), cfg.traj_set_file().string(),
                     (cfg.output_root / "trajvae_train_log.csv").string()};
    entry.wall_time_s = timer.seconds();
    entry.seed = cfg.trajvae_train.seed;
    append_run_manifest(cfg.run_manifest_file(), entry);
    return cfg.trajvae_ckpt();
}

std::vector<models::PolicySample> build_policy_samples(
    const scenegen::RandomizationConfig& scene_cfg, const models::VaedNet<float>& vaed,
    const nn::VecX<float>& vaed_params, std::int64_t n, double hover_height,
    std::uint64_t master_seed, int workers) {
    if (n < 1) throw InputError("build_policy_samples: n must be >= 1");
    std::vector<models::PolicySample> samples(static_cast<std::size_t>(n));
    parallel_chunks(static_cast<std::size_t>(n), static_cast<std::size_t>(std::max(workers, 1)),
                    [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            Rng rng(mix_seed(master_seed, i));
            scenegen::SceneSpec scene = scenegen::sample_scene(rng, scene_cfg);
            scenegen::Framebuffer frame = scenegen::render_scene(scene);
            auto dist = vaed.encode(image_to_tensor(frame.rgb), vaed_params);
            models::PolicySample& s = samples[i];
            s.latent = dist.mu;
            s.cam = models::camera_features(scene.camera).cast<float>();
            s.cup_xy = scene.cup_position;
            s.target = Eigen::Vector3d(scene.cup_position.x(), scene.cup_position.y(),
                                       hover_height);
        }
    });
    return samples;
}

std::filesystem::path run_train_policy(const PipelineConfig& cfg) {
    StageTimer timer;
    std::filesystem::create_directories(cfg.output_root);
    require_artifact(cfg.vaed_ckpt(), "train vaed");
    require_artifact(cfg.trajvae_ckpt(), "train trajvae");
    const std::string vaed_hash_before = hash_file_hex(cfg.vaed_ckpt());
    const std::string traj_hash_before = hash_file_hex(cfg.trajvae_ckpt());

    nn::VecX<float> vaed_params;
    const models::VaedConfig vaed_cfg = models::load_vaed_checkpoint(cfg.vaed_ckpt(),
                                                                     vaed_params);
    if (vaed_cfg.latent_dim != cfg.policy.latent_dim)
        throw ConfigError("policy latent_dim does not match the frozen encoder checkpoint");
    models::VaedNet<float> vaed(vaed_cfg);

    nn::VecX<float> traj_params;
    const models::TrajVaeConfig traj_cfg =
        models::load_trajvae_checkpoint(cfg.trajvae_ckpt(), traj_params);
    if (traj_cfg.action_dim != cfg.policy.action_dim)
        throw ConfigError("policy action_dim does not match the frozen decoder checkpoint");
    models::TrajVaeNet<float> trajvae(traj_cfg);

    const kin::KinematicChain chain = cfg.load_chain();
    if (traj_cfg.joints != chain.dof())
        throw ConfigError("frozen decoder joint count does not match the kinematic chain");

    std::vector<models::PolicySample> samples =
        build_policy_samples(cfg.scenegen, vaed, vaed_params, cfg.policy_scenes,
                             cfg.traj_gen.hover_height, mix_seed(cfg.master_seed, 0x55),
                             cfg.workers);

    models::PolicyTrainResult result = models::train_policy(samples, cfg.policy, trajvae,
                                                            traj_params, chain,
                                                            cfg.policy_train);
    models::save_policy_checkpoint(cfg.policy_ckpt(), cfg.policy, result.params);

    if (hash_file_hex(cfg.vaed_ckpt()) != vaed_hash_before ||
        hash_file_hex(cfg.trajvae_ckpt()) != traj_hash_before)
        throw std::logic_error("frozen checkpoints changed during policy training");

    std::ostringstream log;
    log << "epoch,loss\n";
    for (const auto& row : result.log) log << row.epoch << ',' << row.loss << '\n';
    write_text_file(cfg.output_root / "policy_train_log.csv", log.str());
    json report;
    report["val_mean_err_m"] = result.val_mean_err;
    report["val_p50_err_m"] = result.val_p50_err;
    report["val_p90_err_m"] = result.val_p90_err;
    report["n_val"] = result.n_val;
    report["workspace_diagonal_m"] = cfg.workspace().diagonal();
    write_text_file(cfg.output_root / "policy_report.json", report.dump(2) + "\n");

    RunManifestEntry entry;
    entry.stage = "train-policy";
    entry.config_hash = config_hash(cfg);
    entry.input_hashes = {{cfg.vaed_ckpt().string(), vaed_hash_before},
                          {cfg.trajvae_ckpt().string(), traj_hash_before}};
    entry.outputs = {cfg.policy_ckpt().string(),
                     (cfg.output_root / "policy_report.json").string()};
    entry.wall_time_s = timer.seconds();
    entry.seed = cfg.policy_train.seed;
    append_run_manifest(cfg.run_manifest_file(), entry);
    return cfg.policy_ckpt();
}

std::filesystem::path run_evaluate(const PipelineConfig& cfg) {
    StageTimer timer;
    require_artifact(cfg.vaed_ckpt(), "train vaed");
    require_artifact(cfg.trajvae_ckpt(), "train trajvae");
    require_artifact(cfg.policy_ckpt(), "train policy");

    nn::VecX<float> vaed_params, traj_params, policy_params;
    const models::VaedConfig vaed_cfg = models::load_vaed_checkpoint(cfg.vaed_ckpt(),
                                                                     vaed_params);
    const models::TrajVaeConfig traj_cfg =
        models::load_trajvae_checkpoint(cfg.trajvae_ckpt(), traj_params);
    const models::PolicyConfig policy_cfg =
        models::load_policy_checkpoint(cfg.policy_ckpt(), policy_params);
    models::VaedNet<float> vaed(vaed_cfg);
    models::TrajVaeNet<float> trajvae(traj_cfg);
    models::PolicyNet<float> policy(policy_cfg);
    const kin::KinematicChain chain = cfg.load_chain();

    models::EvalReport report =
        models::evaluate(cfg.scenegen, vaed, vaed_params, policy, policy_params, trajvae,
                         traj_params, chain, cfg.eval_trials, cfg.eval);
    write_text_file(cfg.eval_report_json(), report.to_json().dump(2) + "\n");
    write_text_file(cfg.eval_rows_csv(), report.rows_csv());
    write_text_file(cfg.eval_trials_csv(), report.trials_csv());

    write_error_scatter_plot(cfg.output_root / "error_scatter.png", report.trials,
                             cfg.workspace());
    write_clutter_error_plot(cfg.output_root / "clutter_error.png", report.trials);
    write_affordance_overlays(cfg.output_root / "overlays", cfg.scenegen, vaed, vaed_params, 4,
                              mix_seed(cfg.master_seed, 0x66));

    RunManifestEntry entry;
    entry.stage = "evaluate";
    entry.config_hash = config_hash(cfg);
    entry.input_hashes = {{cfg.vaed_ckpt().string(), hash_file_hex(cfg.vaed_ckpt())},
                          {cfg.trajvae_ckpt().string(), hash_file_hex(cfg.trajvae_ckpt())},
                          {cfg.policy_ckpt().string(), hash_file_hex(cfg.policy_ckpt())}};
    entry.outputs = {cfg.eval_report_json().string(), cfg.eval_rows_csv().string(),
                     cfg.eval_trials_csv().string()};
    entry.wall_time_s = timer.seconds();
    entry.seed = cfg.eval.seed;
    append_run_manifest(cfg.run_manifest_file(), entry);
    return cfg.eval_report_json();
}

void run_plots(const PipelineConfig& cfg) {
    require_artifact(cfg.eval_trials_csv(), "evaluate");
    std::ifstream in(cfg.eval_trials_csv());
    if (!in) throw IoError("cannot open " + cfg.eval_trials_csv().string());

    // Re-reads the trial table; clutter/shape tags are not in the CSV, so the
    // clutter curve comes from the JSON report instead.
    std::vector<models::EvalTrial> trials;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        models::EvalTrial t;
        char comma;
        ss >> t.x >> comma >> t.y >> comma >> t.err_x >> comma >> t.err_y;
        trials.push_back(t);
    }
    write_error_scatter_plot(cfg.output_root / "error_scatter.png", trials, cfg.workspace());

    require_artifact(cfg.eval_report_json(), "evaluate");
    std::ifstream jin(cfg.eval_report_json());
    json report;
    jin >> report;
    // Rebuild minimal trial tags for the clutter curve from the report rows.
    std::vector<models::EvalTrial> tagged;
    for (const auto& row : report.at("rows")) {
        const std::string cond = row.at("condition").get<std::string>();
        const int clutter = std::stoi(cond.substr(7, cond.find('/') - 7));
        const std::size_t n = row.at("n").get<std::size_t>();
        models::EvalTrial t;
        t.clutter = clutter;
        t.err_x = row.at("mean_err_m").get<double>();
        t.err_y = 0.0;
        for (std::size_t i = 0; i < n; ++i) tagged.push_back(t);
    }
    write_clutter_error_plot(cfg.output_root / "clutter_error.png", tagged);
}

}  // namespace afp::pipeline
