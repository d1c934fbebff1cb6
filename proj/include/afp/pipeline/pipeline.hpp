#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "afp/core/config.hpp"
#include "afp/kin/kinematics.hpp"
#include "afp/models/policy.hpp"
#include "afp/models/trajvae.hpp"
#include "afp/models/vaed.hpp"
#include "afp/scenegen/scene.hpp"

namespace afp::pipeline {

// Environment variable that overrides the configured output root.
inline constexpr const char* kOutputRootEnv = "AFP_OUTPUT_ROOT";

struct PipelineConfig {
    std::uint64_t master_seed = 1;
    std::filesystem::path output_root = "runs/default";
    int workers = 1;

    scenegen::RandomizationConfig scenegen;
    std::int64_t dataset_n = 1000;

    models::VaedConfig vaed;
    models::VaedTrainConfig vaed_train;

    models::TrajVaeConfig trajvae;
    models::BetaSchedule trajvae_schedule;
    models::TrajVaeTrainConfig trajvae_train;
    int traj_grid_nx = 32, traj_grid_ny = 32;
    models::TrajGenOptions traj_gen;
    std::filesystem::path chain_file;         // empty: built-in planar 3-link
    std::vector<double> start_config;

    models::PolicyConfig policy;
    models::PolicyTrainConfig policy_train;
    std::int64_t policy_scenes = 20000;

    models::EvalOptions eval;
    std::size_t eval_trials = 600;

    // The raw key-value view; kept for config hashing and manifests.
    KeyValueConfig raw;

    static PipelineConfig from_config(const KeyValueConfig& kv);
    void validate() const;  // cross-stage dimension checks
    kin::KinematicChain load_chain() const;
    Eigen::VectorXd start_q(const kin::KinematicChain& chain) const;
    models::WorkspaceRect workspace() const;

    // Stage artifact locations under output_root.
    std::filesystem::path dataset_dir() const { return output_root / "dataset"; }
    std::filesystem::path vaed_ckpt() const { return output_root / "vaed.ckpt"; }
    std::filesystem::path traj_set_file() const { return output_root / "trajectories.bin"; }
    std::filesystem::path trajvae_ckpt() const { return output_root / "trajvae.ckpt"; }
    std::filesystem::path policy_ckpt() const { return output_root / "policy.ckpt"; }
    std::filesystem::path run_manifest_file() const {
        return output_root / "run_manifest.jsonl";
    }
    std::filesystem::path eval_report_json() const {
        return output_root / "eval_report.json";
    }
    std::filesystem::path eval_rows_csv() const { return output_root / "eval_rows.csv"; }
    std::filesystem::path eval_trials_csv() const { return output_root / "eval_trials.csv"; }
};

struct RunManifestEntry {
    std::string stage;
    std::string config_hash;
    std::vector<std::pair<std::string, std::string>> input_hashes;  // path -> fnv1a hex
    std::vector<std::string> outputs;
    double wall_time_s = 0.0;
    std::uint64_t seed = 0;
};

void append_run_manifest(const std::filesystem::path& file, const RunManifestEntry& entry);

// Stage drivers; each writes its artifacts plus a manifest entry and returns
// the primary output path. Missing upstream artifacts raise DependencyError
// naming the absent file.
std::filesystem::path run_gen_data(const PipelineConfig& cfg);
std::filesystem::path run_train_vaed(const PipelineConfig& cfg);
std::filesystem::path run_train_trajvae(const PipelineConfig& cfg);
std::filesystem::path run_train_policy(const PipelineConfig& cfg);
std::filesystem::path run_evaluate(const PipelineConfig& cfg);
void run_plots(const PipelineConfig& cfg);

// Builds the frozen-encoder policy training set: samples scenes from the
// generator distribution, renders them, and encodes posterior means.
std::vector<models::PolicySample> build_policy_samples(
    const scenegen::RandomizationConfig& scene_cfg, const models::VaedNet<float>& vaed,
    const nn::VecX<float>& vaed_params, std::int64_t n, double hover_height,
    std::uint64_t master_seed, int workers);

}  // namespace afp::pipeline
