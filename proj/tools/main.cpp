#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pita/cli.hpp"
#include "pita/errors.hpp"

namespace {

using nlohmann::json;

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> presets;
    std::optional<std::uint64_t> seed;
    std::string out;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON config file; flags override its values");
    cmd->add_option("--preset", args.presets,
                    "named preset (pita-rec, pita-phy, paper-scale, desk-scale)");
    cmd->add_option("--seed", args.seed, "master seed");
    cmd->add_option("--out", args.out, "output directory");
}

json resolve(const std::string& command, const CommonArgs& args, const json& flag_patch) {
    json config = pita::default_config(command);
    if (!args.config_path.empty()) {
        std::ifstream in(args.config_path);
        if (!in) throw pita::IoError("cannot open config '" + args.config_path + "'");
        json file_config;
        try {
            in >> file_config;
        } catch (const json::exception& e) {
            throw std::invalid_argument("config '" + args.config_path + "' is not valid JSON: " +
                                        e.what());
        }
        if (file_config.contains("command") &&
            file_config.at("command").get<std::string>() != command) {
            throw std::invalid_argument("config '" + args.config_path + "' is for command '" +
                                        file_config.at("command").get<std::string>() + "'");
        }
        config.merge_patch(file_config);
    }
    for (const std::string& preset : args.presets) {
        config.merge_patch(pita::preset_patch(preset));
    }
    config.merge_patch(flag_patch);
    if (args.seed) config["seed"] = *args.seed;
    if (!args.out.empty()) config["out"] = args.out;
    config["command"] = command;
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Trajectory autoencoder lab: synthesize data, train autoencoder variants,\n"
                 "and score reconstructions for physical plausibility."};
    app.require_subcommand(1);

    CommonArgs gen_args;
    std::optional<std::size_t> gen_count;
    std::optional<std::size_t> gen_duration;
    std::optional<double> gen_noise;
    CLI::App* generate = app.add_subcommand("generate", "synthesize a trajectory dataset CSV");
    add_common(generate, gen_args);
    generate->add_option("--count", gen_count, "number of trajectories");
    generate->add_option("--duration", gen_duration, "steps per trajectory");
    generate->add_option("--noise-std", gen_noise, "position noise standard deviation [m]");

    CommonArgs train_args;
    std::string train_data, train_variant, train_resume, train_activation;
    std::optional<int> train_epochs;
    std::optional<std::size_t> train_batch, train_T, train_latent, train_depth;
    std::optional<double> train_lr, train_lambda1, train_lambda2, train_gamma;
    CLI::App* train = app.add_subcommand("train", "train one autoencoder variant");
    add_common(train, train_args);
    train->add_option("--data", train_data, "dataset CSV path");
    train->add_option("--variant", train_variant, "simple, action-space or pita");
    train->add_option("--resume", train_resume, "checkpoint to continue from");
    train->add_option("--epochs", train_epochs, "training epochs");
    train->add_option("--batch-size", train_batch, "mini-batch size");
    train->add_option("--lr", train_lr, "Adam learning rate");
    train->add_option("--T", train_T, "trajectory length");
    train->add_option("--latent", train_latent, "latent dimension");
    train->add_option("--depth", train_depth, "encoder/decoder depth");
    train->add_option("--lambda1", train_lambda1, "reconstruction loss weight");
    train->add_option("--lambda2", train_lambda2, "physical loss weight");
    train->add_option("--gamma", train_gamma, "schedule saturation fraction");
    train->add_option("--activation", train_activation, "tanh or relu");

    CommonArgs eval_args;
    std::string eval_data;
    std::vector<std::string> eval_checkpoints;
    CLI::App* eval = app.add_subcommand("eval", "evaluate checkpoints and write report + plots");
    add_common(eval, eval_args);
    eval->add_option("--data", eval_data, "dataset CSV path");
    eval->add_option("--checkpoints", eval_checkpoints, "checkpoint files to compare");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return pita::kExitConfig;
    }

    try {
        json config;
        if (generate->parsed()) {
            json patch;
            if (gen_count) patch["synthetic"]["count"] = *gen_count;
            if (gen_duration) patch["synthetic"]["duration_steps"] = *gen_duration;
            if (gen_noise) patch["synthetic"]["noise_std"] = *gen_noise;
            config = resolve("generate", gen_args, patch);
        } else if (train->parsed()) {
            json patch;
            if (!train_data.empty()) patch["data"] = train_data;
            if (!train_variant.empty()) patch["variant"] = train_variant;
            if (!train_resume.empty()) patch["resume"] = train_resume;
            if (!train_activation.empty()) patch["model"]["activation"] = train_activation;
            if (train_epochs) patch["train"]["epochs"] = *train_epochs;
            if (train_batch) patch["train"]["batch_size"] = *train_batch;
            if (train_lr) patch["train"]["lr"] = *train_lr;
            if (train_T) patch["model"]["T"] = *train_T;
            if (train_latent) patch["model"]["latent_dim"] = *train_latent;
            if (train_depth) patch["model"]["depth"] = *train_depth;
            if (train_lambda1) patch["loss"]["lambda1"] = *train_lambda1;
            if (train_lambda2) patch["loss"]["lambda2"] = *train_lambda2;
            if (train_gamma) patch["loss"]["gamma"] = *train_gamma;
            config = resolve("train", train_args, patch);
        } else {
            json patch;
            if (!eval_data.empty()) patch["data"] = eval_data;
            if (!eval_checkpoints.empty()) patch["checkpoints"] = eval_checkpoints;
            config = resolve("eval", eval_args, patch);
        }
        pita::run_command(config);
        return pita::kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return pita::exit_code_for_current_exception();
    }
}
