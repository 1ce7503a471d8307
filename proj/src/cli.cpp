#include "pita/cli.hpp"

#include <exception>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "pita/data.hpp"
#include "pita/errors.hpp"
#include "pita/evaluation.hpp"
#include "pita/model.hpp"
#include "pita/svg_plot.hpp"

namespace pita {

namespace {

using nlohmann::json;

template <typename T>
T field(const json& j, const std::string& key) {
    if (!j.contains(key)) throw std::invalid_argument("config is missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw std::invalid_argument("config field '" + key + "' has the wrong type");
    }
}

std::filesystem::path prepare_out_dir(const json& config) {
    std::string out = field<std::string>(config, "out");
    if (out.empty()) throw std::invalid_argument("config field 'out' must not be empty");
    std::filesystem::path dir(out);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + out + "': " + ec.message());
    return dir;
}

void write_echo(const json& config, const std::filesystem::path& dir) {
    std::ofstream out(dir / "config.json");
    if (!out) throw IoError("cannot write '" + (dir / "config.json").string() + "'");
    out << config.dump(2) << '\n';
}

SyntheticSpec spec_from_config(const json& config) {
    json s = field<json>(config, "synthetic");
    SyntheticSpec spec;
    spec.count = field<std::size_t>(s, "count");
    spec.duration_steps = field<std::size_t>(s, "duration_steps");
    spec.dt = field<double>(s, "dt");
    auto speed = field<std::vector<double>>(s, "speed");
    auto kappa = field<std::vector<double>>(s, "kappa");
    auto accel = field<std::vector<double>>(s, "accel");
    if (speed.size() != 2 || kappa.size() != 2 || accel.size() != 2) {
        throw std::invalid_argument("synthetic ranges must be [min, max] pairs");
    }
    spec.speed_min = speed[0];
    spec.speed_max = speed[1];
    spec.kappa_min = kappa[0];
    spec.kappa_max = kappa[1];
    spec.accel_min = accel[0];
    spec.accel_max = accel[1];
    spec.kappa_waypoints = field<std::size_t>(s, "kappa_waypoints");
    spec.accel_waypoints = field<std::size_t>(s, "accel_waypoints");
    spec.noise_std = field<double>(s, "noise_std");
    spec.seed = field<std::uint64_t>(config, "seed");
    spec.validate();
    return spec;
}

LossConfig loss_from_config(const json& config) {
    json l = field<json>(config, "loss");
    LossConfig loss;
    loss.lambda1 = field<double>(l, "lambda1");
    loss.lambda2 = field<double>(l, "lambda2");
    loss.m = field<double>(l, "m");
    loss.gamma = field<double>(l, "gamma");
    loss.tau_max = field<std::int64_t>(l, "tau_max");
    auto weights = field<std::vector<double>>(l, "weights");
    if (weights.size() != 6) throw std::invalid_argument("loss.weights must have 6 entries");
    loss.weights = {weights[0], weights[1], weights[2], weights[3], weights[4], weights[5]};
    return loss;
}

UkfConfig ukf_from_config(const json& config) {
    UkfConfig ukf;
    if (config.contains("ukf")) {
        json u = config.at("ukf");
        auto process = field<std::vector<double>>(u, "process_std");
        if (process.size() != 6) throw std::invalid_argument("ukf.process_std must have 6 entries");
        for (std::size_t i = 0; i < 6; ++i) ukf.process_std[i] = process[i];
        ukf.measurement_std = field<double>(u, "measurement_std");
        ukf.alpha = field<double>(u, "alpha");
        ukf.beta = field<double>(u, "beta");
        ukf.kappa = field<double>(u, "kappa");
    }
    ukf.validate();
    return ukf;
}

std::vector<Trajectory> load_dataset(const std::string& path, std::size_t T, double dt) {
    IngestResult ingested = ingest_csv(path, 1.0 / dt);
    std::vector<Trajectory> usable;
    for (const RawTrack& track : ingested.tracks) {
        PreprocessResult pr = preprocess(track, T);
        if (pr.accepted) usable.push_back(std::move(pr.trajectory));
    }
    if (usable.empty()) {
        throw std::invalid_argument("no usable trajectories of length " + std::to_string(T) +
                                    " in '" + path + "'");
    }
    return usable;
}

}  // namespace

json default_config(const std::string& command) {
    if (command == "generate") {
        return json{{"command", "generate"},
                    {"out", ""},
                    {"seed", 1},
                    {"synthetic",
                     {{"count", 500},
                      {"duration_steps", 50},
                      {"dt", 0.04},
                      {"speed", {3.0, 8.0}},
                      {"kappa", {-0.25, 0.25}},
                      {"kappa_waypoints", 4},
                      {"accel", {-1.5, 1.5}},
                      {"accel_waypoints", 3},
                      {"noise_std", 0.05}}}};
    }
    if (command == "train") {
        return json{{"command", "train"},
                    {"out", ""},
                    {"data", ""},
                    {"seed", 1},
                    {"variant", "simple"},
                    {"resume", ""},
                    {"model",
                     {{"T", 50},
                      {"dt", 0.04},
                      {"latent_dim", 32},
                      {"depth", 4},
                      {"activation", "tanh"}}},
                    {"loss",
                     {{"lambda1", 1.0},
                      {"lambda2", 0.0},
                      {"m", 5.0},
                      {"gamma", 0.595},
                      {"tau_max", 0},
                      {"weights", {1.0, 1.0, 10.0, 1.0, 10.0, 0.1}},
                      {"schedule_enabled", true}}},
                    {"train",
                     {{"epochs", 60},
                      {"batch_size", 64},
                      {"lr", 1e-4},
                      {"val_fraction", 0.1},
                      {"split_seed", 73}}}};
    }
    if (command == "eval") {
        return json{{"command", "eval"},
                    {"out", ""},
                    {"data", ""},
                    {"seed", 1},
                    {"checkpoints", json::array()},
                    {"val_fraction", 0.1},
                    {"split_seed", 73},
                    {"ukf",
                     {{"process_std", {1e-3, 1e-3, 1e-3, 1e-2, 0.05, 0.5}},
                      {"measurement_std", 0.1},
                      {"alpha", 1.0},
                      {"beta", 0.0},
                      {"kappa", 0.0}}}};
    }
    throw std::invalid_argument("unknown command '" + command + "'");
}

json preset_patch(const std::string& name) {
    if (name == "pita-rec") {
        return json{{"variant", "pita"},
                    {"loss",
                     {{"lambda1", 1.976e-4}, {"lambda2", 1.028e-2}, {"gamma", 0.595}, {"m", 5.0}}}};
    }
    if (name == "pita-phy") {
        return json{{"variant", "pita"},
                    {"loss",
                     {{"lambda1", 1.030e-4}, {"lambda2", 3.012e-2}, {"gamma", 0.032}, {"m", 5.0}}}};
    }
    if (name == "paper-scale") {
        return json{{"model", {{"T", 350}, {"latent_dim", 320}, {"depth", 12}}},
                    {"synthetic", {{"duration_steps", 350}}}};
    }
    if (name == "desk-scale") {
        return json{{"model", {{"T", 50}, {"latent_dim", 32}, {"depth", 4}}},
                    {"synthetic", {{"duration_steps", 50}}}};
    }
    throw std::invalid_argument("unknown preset '" + name +
                                "' (expected pita-rec, pita-phy, paper-scale or desk-scale)");
}

void run_generate(const json& config) {
    SyntheticSpec spec = spec_from_config(config);
    std::filesystem::path dir = prepare_out_dir(config);
    write_echo(config, dir);

    std::vector<Trajectory> trajectories = generate_synthetic(spec);
    write_csv((dir / "dataset.csv").string(), trajectories);

    json manifest{{"seed", spec.seed},
                  {"count", spec.count},
                  {"duration_steps", spec.duration_steps},
                  {"dt", spec.dt},
                  {"noise_std", spec.noise_std},
                  {"synthetic", config.at("synthetic")},
                  {"format", "trackId,frame,xCenter,yCenter"}};
    std::ofstream mout(dir / "manifest.json");
    if (!mout) throw IoError("cannot write manifest");
    mout << manifest.dump(2) << '\n';
}

void run_train(const json& config) {
    std::string variant_str = field<std::string>(config, "variant");
    Variant variant = parse_variant(variant_str);
    json m = field<json>(config, "model");
    ModelConfig model_config =
        make_model_config(variant, field<std::size_t>(m, "T"), field<std::size_t>(m, "latent_dim"),
                          field<std::size_t>(m, "depth"), field<double>(m, "dt"),
                          parse_activation(field<std::string>(m, "activation")));

    LossConfig loss = loss_from_config(config);
    json t = field<json>(config, "train");
    TrainOptions options;
    options.epochs = field<int>(t, "epochs");
    options.batch_size = field<std::size_t>(t, "batch_size");
    options.adam.lr = field<double>(t, "lr");
    options.val_fraction = field<double>(t, "val_fraction");
    options.split_seed = field<std::uint64_t>(t, "split_seed");
    options.seed = field<std::uint64_t>(config, "seed");
    options.schedule_enabled = field<bool>(config.at("loss"), "schedule_enabled");

    std::string data_path = field<std::string>(config, "data");
    std::vector<Trajectory> dataset = load_dataset(data_path, model_config.T, model_config.dt);

    std::filesystem::path dir = prepare_out_dir(config);
    write_echo(config, dir);

    std::string resume = field<std::string>(config, "resume");
    TrainResult result;
    if (resume.empty()) {
        result = train(dataset, model_config, loss, options);
    } else {
        Model initial = load_checkpoint(resume);
        if (initial.config.T != model_config.T) {
            throw std::invalid_argument("resume checkpoint T " +
                                        std::to_string(initial.config.T) +
                                        " does not match configured T " +
                                        std::to_string(model_config.T));
        }
        result = train_from(std::move(initial), dataset, loss, options);
    }

    save_checkpoint(result.model, (dir / "model.ckpt").string());
    write_train_log(result.log, (dir / "train_log.ndjson").string());
}

void run_eval(const json& config) {
    auto checkpoint_paths = field<std::vector<std::string>>(config, "checkpoints");
    if (checkpoint_paths.empty()) throw std::invalid_argument("eval needs at least one checkpoint");

    std::vector<Model> models;
    models.reserve(checkpoint_paths.size());
    for (const std::string& path : checkpoint_paths) models.push_back(load_checkpoint(path));
    for (const Model& model : models) {
        if (model.config.T != models.front().config.T ||
            std::abs(model.config.dt - models.front().config.dt) > 1e-12) {
            throw std::invalid_argument("checkpoints disagree on T or dt");
        }
    }

    std::string data_path = field<std::string>(config, "data");
    std::vector<Trajectory> dataset =
        load_dataset(data_path, models.front().config.T, models.front().config.dt);
    auto [train_set, val_set] = split(dataset, field<double>(config, "val_fraction"),
                                      field<std::uint64_t>(config, "split_seed"));
    if (val_set.empty()) throw std::invalid_argument("validation split is empty");

    UkfConfig ukf = ukf_from_config(config);

    std::vector<NamedModel> named;
    for (std::size_t i = 0; i < models.size(); ++i) {
        std::string stem = std::filesystem::path(checkpoint_paths[i]).stem().string();
        named.push_back({stem + " (" + variant_name(models[i].config.variant) + ")", &models[i]});
    }

    EvalReport report = evaluate_models(named, val_set, ukf);

    std::filesystem::path dir = prepare_out_dir(config);
    write_echo(config, dir);
    write_report_json(report, (dir / "report.json").string());

    auto boxes = [&](auto getter, bool include_truth) {
        std::vector<BoxSeries> series;
        for (const ModelReport& mr : report.models) {
            if (!include_truth && !mr.has_rmse) continue;
            series.push_back({mr.name, getter(mr)});
        }
        return series;
    };
    write_boxplot_svg((dir / "rmse_boxplot.svg").string(), "Reconstruction RMSE", "RMSE [m]",
                      boxes([](const ModelReport& mr) { return mr.rmse_per_trajectory; }, false));
    write_boxplot_svg((dir / "acceleration_boxplot.svg").string(), "Recovered |a|", "|a| [m/s^2]",
                      boxes([](const ModelReport& mr) { return mr.pooled_abs_accel; }, true));
    write_boxplot_svg((dir / "curvature_boxplot.svg").string(), "Recovered |kappa|",
                      "|kappa| [1/m]",
                      boxes([](const ModelReport& mr) { return mr.pooled_abs_kappa; }, true));
    write_boxplot_svg(
        (dir / "distance_boxplot.svg").string(), "Distance to smoothed reference path",
        "distance [m]",
        boxes([](const ModelReport& mr) { return mr.smoothness_per_trajectory; }, true));
}

void run_command(const json& config) {
    std::string command = field<std::string>(config, "command");
    if (command == "generate") {
        run_generate(config);
    } else if (command == "train") {
        run_train(config);
    } else if (command == "eval") {
        run_eval(config);
    } else {
        throw std::invalid_argument("unknown command '" + command + "'");
    }
}

int exit_code_for_current_exception() {
    try {
        throw;
    } catch (const NumericalError&) {
        return kExitNumerical;
    } catch (const IoError&) {
        return kExitIo;
    } catch (const std::invalid_argument&) {
        return kExitConfig;
    } catch (const std::exception&) {
        return kExitFailure;
    }
}

}  // namespace pita
