#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "afp/core/config.hpp"
#include "afp/core/errors.hpp"
#include "afp/nn/checkpoint.hpp"
#include "afp/pipeline/pipeline.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    std::int64_t seed = -1;
    int workers = 0;
    std::int64_t n = -1;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool config_required = true) {
    auto* copt = cmd->add_option("--config", f.config_path, "pipeline config file");
    if (config_required) copt->required();
    cmd->add_option("--seed", f.seed, "master seed override");
    cmd->add_option("--workers", f.workers, "worker thread count override");
    cmd->add_option("--out", f.out_dir, "output root override");
    cmd->add_option("--n", f.n, "count override (samples or trials)");
}

afp::pipeline::PipelineConfig load_config(const CommonFlags& f, const char* n_key) {
    afp::KeyValueConfig kv = afp::KeyValueConfig::load(f.config_path);
    if (f.seed >= 0) kv.set("master_seed", std::to_string(f.seed));
    if (f.workers > 0) kv.set("workers", std::to_string(f.workers));
    if (f.n >= 0 && n_key) kv.set(n_key, std::to_string(f.n));
    auto cfg = afp::pipeline::PipelineConfig::from_config(kv);
    if (!f.out_dir.empty()) cfg.output_root = f.out_dir;  // flag beats env and file
    return cfg;
}

int cmd_inspect(const std::string& path) {
    afp::nn::CheckpointData data = afp::nn::load_checkpoint(path);
    std::printf("checkpoint: %s\n", path.c_str());
    std::printf("format_version: %d\n", data.format_version);
    std::printf("config: %s\n", data.config.dump().c_str());
    std::printf("tensors:\n");
    for (const auto& spec : data.specs) {
        std::string shape;
        for (std::size_t i = 0; i < spec.shape.size(); ++i)
            shape += (i ? "x" : "") + std::to_string(spec.shape[i]);
        std::printf("  %-24s %-12s offset %td\n", spec.name.c_str(), shape.c_str(),
                    spec.offset);
    }
    std::printf("parameter_count: %td\n", data.parameter_count());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"affordance perception and manipulation pipeline"};
    app.require_subcommand(1);

    CommonFlags gen_flags, train_flags, eval_flags, plot_flags;
    std::string train_stage, inspect_path;

    auto* gen = app.add_subcommand("gen-data", "generate a randomized labeled dataset");
    add_common(gen, gen_flags);

    auto* train = app.add_subcommand("train", "train one stage: vaed, trajvae or policy");
    train->add_option("stage", train_stage, "stage to train")
        ->required()
        ->check(CLI::IsMember({"vaed", "trajvae", "policy"}));
    add_common(train, train_flags);

    auto* eval = app.add_subcommand("evaluate", "run the trained stack on fresh scenes");
    add_common(eval, eval_flags);

    auto* inspect = app.add_subcommand("inspect", "print a checkpoint summary");
    inspect->add_option("checkpoint", inspect_path, "checkpoint file")->required();

    auto* plot = app.add_subcommand("plot", "regenerate plots from evaluation artifacts");
    add_common(plot, plot_flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) {
            auto cfg = load_config(gen_flags, "dataset.n");
            auto out = afp::pipeline::run_gen_data(cfg);
            std::printf("dataset written to %s\n", out.string().c_str());
        } else if (train->parsed()) {
            auto cfg = load_config(train_flags, nullptr);
            std::filesystem::path out;
            if (train_stage == "vaed")
                out = afp::pipeline::run_train_vaed(cfg);
            else if (train_stage == "trajvae")
                out = afp::pipeline::run_train_trajvae(cfg);
            else
                out = afp::pipeline::run_train_policy(cfg);
            std::printf("checkpoint written to %s\n", out.string().c_str());
        } else if (eval->parsed()) {
            auto cfg = load_config(eval_flags, "eval.trials");
            auto out = afp::pipeline::run_evaluate(cfg);
            std::printf("evaluation report written to %s\n", out.string().c_str());
        } else if (inspect->parsed()) {
            return cmd_inspect(inspect_path);
        } else if (plot->parsed()) {
            auto cfg = load_config(plot_flags, nullptr);
            afp::pipeline::run_plots(cfg);
            std::printf("plots written to %s\n", cfg.output_root.string().c_str());
        }
    } catch (const afp::DependencyError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const afp::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const afp::InputError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
