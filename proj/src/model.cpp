#include "pita/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "pita/data.hpp"
#include "pita/errors.hpp"
#include "pita/random.hpp"

namespace pita {

std::string variant_name(Variant variant) {
    switch (variant) {
        case Variant::Simple: return "simple";
        case Variant::ActionSpace: return "action-space";
        case Variant::Pita: return "pita";
    }
    throw std::invalid_argument("unknown variant");
}

Variant parse_variant(const std::string& name) {
    if (name == "simple") return Variant::Simple;
    if (name == "action-space") return Variant::ActionSpace;
    if (name == "pita") return Variant::Pita;
    throw std::invalid_argument("unknown variant '" + name +
                                "' (expected simple, action-space or pita)");
}

std::string activation_name(Activation activation) {
    return activation == Activation::Tanh ? "tanh" : "relu";
}

Activation parse_activation(const std::string& name) {
    if (name == "tanh") return Activation::Tanh;
    if (name == "relu") return Activation::Relu;
    throw std::invalid_argument("unknown activation '" + name + "' (expected tanh or relu)");
}

std::size_t ModelConfig::output_width() const {
    switch (variant) {
        case Variant::Simple: return 2 * T;
        case Variant::ActionSpace: return 2 * T + 4;
        case Variant::Pita: return 6 * T;
    }
    throw std::invalid_argument("unknown variant");
}

void ModelConfig::validate() const {
    if (T < 5) throw std::invalid_argument("T must be at least 5");
    if (latent_dim == 0) throw std::invalid_argument("latent_dim must be positive");
    if (dt <= 0.0) throw std::invalid_argument("dt must be positive");
    if (encoder_layers.empty() || decoder_layers.empty()) {
        throw std::invalid_argument("encoder and decoder need at least one layer");
    }
    if (encoder_layers.back() != latent_dim) {
        throw std::invalid_argument("last encoder width " +
                                    std::to_string(encoder_layers.back()) +
                                    " must equal latent_dim " + std::to_string(latent_dim));
    }
    if (decoder_layers.back() != output_width()) {
        throw std::invalid_argument("last decoder width " +
                                    std::to_string(decoder_layers.back()) +
                                    " must equal the variant output width " +
                                    std::to_string(output_width()));
    }
    for (std::size_t w : encoder_layers) {
        if (w == 0) throw std::invalid_argument("zero-width encoder layer");
    }
    for (std::size_t w : decoder_layers) {
        if (w == 0) throw std::invalid_argument("zero-width decoder layer");
    }
}

namespace {

std::vector<std::size_t> geometric_widths(std::size_t from, std::size_t to, std::size_t layers) {
    std::vector<std::size_t> widths(layers);
    double ratio = std::log(static_cast<double>(to) / static_cast<double>(from));
    for (std::size_t i = 0; i + 1 < layers; ++i) {
        double w = static_cast<double>(from) *
                   std::exp(ratio * static_cast<double>(i + 1) / static_cast<double>(layers));
        widths[i] = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(w)));
    }
    widths[layers - 1] = to;
    return widths;
}

}  // namespace

ModelConfig make_model_config(Variant variant, std::size_t T, std::size_t latent_dim,
                              std::size_t depth, double dt, Activation activation) {
    if (depth == 0) throw std::invalid_argument("depth must be positive");
    ModelConfig config;
    config.variant = variant;
    config.T = T;
    config.latent_dim = latent_dim;
    config.activation = activation;
    config.dt = dt;
    config.encoder_layers = geometric_widths(config.input_width(), latent_dim, depth);
    config.decoder_layers = geometric_widths(latent_dim, config.output_width(), depth);
    config.validate();
    return config;
}

std::size_t ModelParams::count() const {
    std::size_t n = 0;
    for (const auto* side : {&encoder, &decoder}) {
        for (const DenseLayer& layer : *side) n += layer.weight.numel() + layer.bias.numel();
    }
    return n;
}

std::vector<Tensor*> flat_params(ModelParams& params) {
    std::vector<Tensor*> flat;
    for (auto* side : {&params.encoder, &params.decoder}) {
        for (DenseLayer& layer : *side) {
            flat.push_back(&layer.weight);
            flat.push_back(&layer.bias);
        }
    }
    return flat;
}

std::vector<const Tensor*> flat_params(const ModelParams& params) {
    std::vector<const Tensor*> flat;
    for (const auto* side : {&params.encoder, &params.decoder}) {
        for (const DenseLayer& layer : *side) {
            flat.push_back(&layer.weight);
            flat.push_back(&layer.bias);
        }
    }
    return flat;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    RandomStream rng(seed);
    ModelParams params;
    auto build_side = [&](std::size_t input, const std::vector<std::size_t>& widths,
                          std::vector<DenseLayer>& side) {
        std::size_t fan_in = input;
        for (std::size_t width : widths) {
            double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
            Tensor w = Tensor::zeros({fan_in, width});
            for (std::size_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-bound, bound);
            side.push_back({std::move(w), Tensor::zeros({width})});
            fan_in = width;
        }
    };
    build_side(config.input_width(), config.encoder_layers, params.encoder);
    build_side(config.latent_dim, config.decoder_layers, params.decoder);
    return params;
}

namespace {

/// Affine layers with the configured activation everywhere except the last
/// layer of the stack, which stays linear.
NodeId forward_layers(Tape& tape, const std::vector<DenseLayer>& layers, NodeId input,
                      Activation activation, std::vector<NodeId>* param_ids) {
    NodeId h = input;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        NodeId w = tape.constant(layers[i].weight);
        NodeId b = tape.constant(layers[i].bias);
        if (param_ids) {
            param_ids->push_back(w);
            param_ids->push_back(b);
        }
        h = tape.add_row(tape.matmul(h, w), b);
        if (i + 1 < layers.size()) {
            h = activation == Activation::Tanh ? tape.tanh(h) : tape.relu(h);
        }
    }
    return h;
}

Tensor flatten_normalized(const Trajectory& trajectory, double input_scale, std::size_t T) {
    if (trajectory.length() != T) {
        throw std::invalid_argument("trajectory length " + std::to_string(trajectory.length()) +
                                    " does not match model T " + std::to_string(T));
    }
    Tensor input = Tensor::zeros({1, 2 * T});
    for (std::size_t t = 0; t < T; ++t) {
        input[2 * t] = trajectory.positions[t].x / input_scale;
        input[2 * t + 1] = trajectory.positions[t].y / input_scale;
    }
    return input;
}

/// One differentiable RK4 step on per-sample [B x 1] column nodes.
struct ColumnState {
    NodeId x, y, theta, v;
};

ColumnState rollout_rk4_step(Tape& tape, const ColumnState& s, NodeId kappa, NodeId a, double dt) {
    auto derivative = [&](const ColumnState& state) -> ColumnState {
        NodeId fx = tape.mul(state.v, tape.cos(state.theta));
        NodeId fy = tape.mul(state.v, tape.sin(state.theta));
        NodeId ftheta = tape.mul(state.v, kappa);
        return {fx, fy, ftheta, a};
    };
    auto advance = [&](const ColumnState& state, const ColumnState& d, double h) -> ColumnState {
        return {tape.add(state.x, tape.scale(d.x, h)), tape.add(state.y, tape.scale(d.y, h)),
                tape.add(state.theta, tape.scale(d.theta, h)),
                tape.add(state.v, tape.scale(d.v, h))};
    };
    ColumnState k1 = derivative(s);
    ColumnState k2 = derivative(advance(s, k1, dt / 2.0));
    ColumnState k3 = derivative(advance(s, k2, dt / 2.0));
    ColumnState k4 = derivative(advance(s, k3, dt));
    auto combine = [&](NodeId base, NodeId d1, NodeId d2, NodeId d3, NodeId d4) {
        NodeId acc = tape.add(d1, tape.scale(d2, 2.0));
        acc = tape.add(acc, tape.scale(d3, 2.0));
        acc = tape.add(acc, d4);
        return tape.add(base, tape.scale(acc, dt / 6.0));
    };
    return {combine(s.x, k1.x, k2.x, k3.x, k4.x), combine(s.y, k1.y, k2.y, k3.y, k4.y),
            combine(s.theta, k1.theta, k2.theta, k3.theta, k4.theta),
            combine(s.v, k1.v, k2.v, k3.v, k4.v)};
}

}  // namespace

std::vector<double> Model::encode(const Trajectory& trajectory) const {
    Tape tape;
    NodeId input = tape.constant(flatten_normalized(trajectory, input_scale, config.T));
    NodeId latent = forward_layers(tape, params.encoder, input, config.activation, nullptr);
    return tape.value(latent).data();
}

namespace {

Tensor decode_raw(const Model& model, std::span<const double> latent) {
    if (latent.size() != model.config.latent_dim) {
        throw std::invalid_argument("latent width " + std::to_string(latent.size()) +
                                    " does not match latent_dim " +
                                    std::to_string(model.config.latent_dim));
    }
    Tape tape;
    NodeId input = tape.constant(
        Tensor::matrix(1, latent.size(), std::vector<double>(latent.begin(), latent.end())));
    NodeId out =
        forward_layers(tape, model.params.decoder, input, model.config.activation, nullptr);
    return tape.value(out);
}

}  // namespace

std::vector<Vec2> Model::decode_simple(std::span<const double> latent) const {
    if (config.variant != Variant::Simple) {
        throw std::invalid_argument("decode_simple on a " + variant_name(config.variant) +
                                    " model");
    }
    Tensor out = decode_raw(*this, latent);
    std::vector<Vec2> positions(config.T);
    for (std::size_t t = 0; t < config.T; ++t) {
        positions[t] = {out[2 * t] * input_scale, out[2 * t + 1] * input_scale};
    }
    return positions;
}

std::pair<KbmState, InputTrajectory> Model::decode_action_space(
    std::span<const double> latent) const {
    if (config.variant != Variant::ActionSpace) {
        throw std::invalid_argument("decode_action_space on a " + variant_name(config.variant) +
                                    " model");
    }
    Tensor out = decode_raw(*this, latent);
    KbmState initial{out[0], out[1], out[2], out[3]};
    InputTrajectory inputs;
    inputs.dt = config.dt;
    inputs.inputs.resize(config.T);
    for (std::size_t t = 0; t < config.T; ++t) {
        inputs.inputs[t] = {out[4 + 2 * t], out[5 + 2 * t]};
    }
    return {initial, std::move(inputs)};
}

std::pair<StateTrajectory, InputTrajectory> Model::decode_pita(
    std::span<const double> latent) const {
    if (config.variant != Variant::Pita) {
        throw std::invalid_argument("decode_pita on a " + variant_name(config.variant) + " model");
    }
    Tensor out = decode_raw(*this, latent);
    StateTrajectory states;
    states.dt = config.dt;
    states.states.resize(config.T);
    InputTrajectory inputs;
    inputs.dt = config.dt;
    inputs.inputs.resize(config.T);
    for (std::size_t t = 0; t < config.T; ++t) {
        states.states[t] = {out[6 * t] * input_scale, out[6 * t + 1] * input_scale, out[6 * t + 2],
                            out[6 * t + 3]};
        inputs.inputs[t] = {out[6 * t + 4], out[6 * t + 5]};
    }
    return {std::move(states), std::move(inputs)};
}

std::vector<Vec2> Model::reconstruct(const Trajectory& trajectory) const {
    std::vector<double> latent = encode(trajectory);
    switch (config.variant) {
        case Variant::Simple:
            return decode_simple(latent);
        case Variant::ActionSpace: {
            auto [initial, inputs] = decode_action_space(latent);
            StateTrajectory states = rk4_rollout(initial, inputs);
            std::vector<Vec2> positions(states.length());
            for (std::size_t t = 0; t < states.length(); ++t) {
                positions[t] = {states.states[t].x, states.states[t].y};
            }
            return positions;
        }
        case Variant::Pita: {
            auto [states, inputs] = decode_pita(latent);
            std::vector<Vec2> positions(states.length());
            for (std::size_t t = 0; t < states.length(); ++t) {
                positions[t] = {states.states[t].x, states.states[t].y};
            }
            return positions;
        }
    }
    throw std::invalid_argument("unknown variant");
}

AdamState make_adam_state(const ModelParams& params, const AdamConfig& config) {
    AdamState state;
    state.config = config;
    for (const Tensor* p : flat_params(params)) {
        state.m.push_back(Tensor::zeros(p->shape()));
        state.v.push_back(Tensor::zeros(p->shape()));
    }
    return state;
}

void adam_step(ModelParams& params, const std::vector<Tensor>& grads, AdamState& state) {
    std::vector<Tensor*> flat = flat_params(params);
    if (grads.size() != flat.size() || state.m.size() != flat.size()) {
        throw std::invalid_argument("adam_step: gradient count " + std::to_string(grads.size()) +
                                    " does not match parameter count " +
                                    std::to_string(flat.size()));
    }
    state.step += 1;
    const AdamConfig& c = state.config;
    double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < flat.size(); ++i) {
        Tensor& p = *flat[i];
        const Tensor& g = grads[i];
        if (!p.same_shape(g)) {
            throw std::invalid_argument("adam_step: gradient shape " + g.shape_str() +
                                        " does not match parameter shape " + p.shape_str());
        }
        Tensor& m = state.m[i];
        Tensor& v = state.v[i];
        for (std::size_t k = 0; k < p.numel(); ++k) {
            m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g[k];
            v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g[k] * g[k];
            double m_hat = m[k] / bc1;
            double v_hat = v[k] / bc2;
            p[k] -= c.lr * m_hat / (std::sqrt(v_hat) + c.epsilon);
        }
    }
}

Batch make_batch(const std::vector<Trajectory>& set, std::span<const std::size_t> indices,
                 double input_scale, std::size_t T) {
    if (indices.empty()) throw std::invalid_argument("make_batch: empty index list");
    std::size_t B = indices.size();
    Batch batch;
    batch.indices.assign(indices.begin(), indices.end());
    batch.input = Tensor::zeros({B, 2 * T});
    batch.target_x = Tensor::zeros({B, T});
    batch.target_y = Tensor::zeros({B, T});
    for (std::size_t r = 0; r < B; ++r) {
        const Trajectory& traj = set[indices[r]];
        if (traj.length() != T) {
            throw std::invalid_argument("trajectory length " + std::to_string(traj.length()) +
                                        " does not match model T " + std::to_string(T));
        }
        for (std::size_t t = 0; t < T; ++t) {
            batch.input.at(r, 2 * t) = traj.positions[t].x / input_scale;
            batch.input.at(r, 2 * t + 1) = traj.positions[t].y / input_scale;
            batch.target_x.at(r, t) = traj.positions[t].x;
            batch.target_y.at(r, t) = traj.positions[t].y;
        }
    }
    return batch;
}

ForwardLoss build_training_graph(Tape& tape, const Model& model, const Batch& batch,
                                 const LossConfig& loss, double alpha) {
    const ModelConfig& config = model.config;
    std::size_t T = config.T;
    std::size_t B = batch.input.rows();
    double s = model.input_scale;

    ForwardLoss fl;
    NodeId input = tape.constant(batch.input);
    NodeId latent =
        forward_layers(tape, model.params.encoder, input, config.activation, &fl.param_ids);
    NodeId out =
        forward_layers(tape, model.params.decoder, latent, config.activation, &fl.param_ids);

    NodeId target_x = tape.constant(batch.target_x);
    NodeId target_y = tape.constant(batch.target_y);

    NodeId rec = -1;
    NodeId phy = -1;
    switch (config.variant) {
        case Variant::Simple: {
            NodeId px = tape.scale(tape.slice_cols(out, 0, 2, T), s);
            NodeId py = tape.scale(tape.slice_cols(out, 1, 2, T), s);
            rec = reconstruction_loss(tape, px, py, target_x, target_y);
            phy = tape.constant(Tensor::scalar(0.0));
            break;
        }
        case Variant::ActionSpace: {
            // The decoded initial state and controls are in physical units;
            // gradients flow through the whole roll-out.
            ColumnState state{tape.slice_cols(out, 0, 1, 1), tape.slice_cols(out, 1, 1, 1),
                              tape.slice_cols(out, 2, 1, 1), tape.slice_cols(out, 3, 1, 1)};
            for (std::size_t t = 0; t < T; ++t) {
                NodeId kappa = tape.slice_cols(out, 4 + 2 * t, 1, 1);
                NodeId a = tape.slice_cols(out, 5 + 2 * t, 1, 1);
                state = rollout_rk4_step(tape, state, kappa, a, config.dt);
                NodeId tx = tape.slice_cols(target_x, t, 1, 1);
                NodeId ty = tape.slice_cols(target_y, t, 1, 1);
                NodeId err = tape.add(tape.sum(tape.square(tape.sub(state.x, tx))),
                                      tape.sum(tape.square(tape.sub(state.y, ty))));
                rec = (rec < 0) ? err : tape.add(rec, err);
            }
            phy = tape.constant(Tensor::scalar(0.0));
            break;
        }
        case Variant::Pita: {
            StateNodes states{tape.scale(tape.slice_cols(out, 0, 6, T), s),
                              tape.scale(tape.slice_cols(out, 1, 6, T), s),
                              tape.slice_cols(out, 2, 6, T), tape.slice_cols(out, 3, 6, T)};
            InputNodes inputs{tape.slice_cols(out, 4, 6, T), tape.slice_cols(out, 5, 6, T)};
            rec = reconstruction_loss(tape, states.x, states.y, target_x, target_y);
            phy = physical_loss(tape, states, inputs, loss.weights, config.dt);
            break;
        }
    }

    double inv_b = 1.0 / static_cast<double>(B);
    fl.rec_mean = tape.scale(rec, inv_b);
    fl.phy_mean = tape.scale(phy, inv_b);
    fl.total = tape.add(tape.scale(fl.rec_mean, loss.lambda1),
                        tape.scale(fl.phy_mean, alpha * loss.lambda2));
    return fl;
}

double compute_input_scale(const std::vector<Trajectory>& trajectories) {
    std::vector<double> magnitudes;
    for (const Trajectory& traj : trajectories) {
        for (const Vec2& p : traj.positions) {
            magnitudes.push_back(std::abs(p.x));
            magnitudes.push_back(std::abs(p.y));
        }
    }
    if (magnitudes.empty()) throw std::invalid_argument("cannot fit input scale on empty data");
    std::sort(magnitudes.begin(), magnitudes.end());
    std::size_t index = static_cast<std::size_t>(
        std::ceil(0.95 * static_cast<double>(magnitudes.size()))) - 1;
    index = std::min(index, magnitudes.size() - 1);
    return std::max(magnitudes[index], 1e-9);
}

void write_train_log(const TrainLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    for (const LogRecord& r : log.records) {
        nlohmann::json j{{"kind", r.kind == LogRecord::Kind::Step ? "step" : "epoch"},
                         {"step", r.step},
                         {"epoch", r.epoch},
                         {"loss_total", r.loss_total},
                         {"loss_rec", r.loss_rec},
                         {"loss_phy", r.loss_phy},
                         {"alpha", r.alpha}};
        out << j.dump() << '\n';
    }
    if (!out) throw IoError("failed writing '" + path + "'");
}

namespace {

TrainResult train_impl(Model model, std::vector<Trajectory> train_set,
                       std::vector<Trajectory> val_set, LossConfig loss,
                       const TrainOptions& options) {
    if (train_set.empty()) throw std::invalid_argument("training split is empty");
    if (options.epochs < 0) throw std::invalid_argument("epochs must be nonnegative");
    if (options.batch_size == 0) throw std::invalid_argument("batch_size must be positive");

    std::size_t T = model.config.T;
    std::size_t steps_per_epoch =
        (train_set.size() + options.batch_size - 1) / options.batch_size;
    if (loss.tau_max <= 0) {
        loss.tau_max = model.train_steps +
                       static_cast<std::int64_t>(steps_per_epoch) * options.epochs;
        loss.tau_max = std::max<std::int64_t>(loss.tau_max, 1);
    }
    loss.validate();

    TrainResult result;
    RandomStream batch_rng(options.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    AdamState adam = make_adam_state(model.params, options.adam);

    auto validation_record = [&](int epoch) {
        auto [val_rec, val_phy] = dataset_losses(model, val_set, loss, options.batch_size);
        double alpha = options.schedule_enabled ? schedule_alpha(model.train_steps, loss) : 1.0;
        result.log.records.push_back({LogRecord::Kind::Epoch, model.train_steps, epoch,
                                      loss.lambda1 * val_rec + alpha * loss.lambda2 * val_phy,
                                      val_rec, val_phy, alpha});
    };

    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        batch_rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
            std::size_t end = std::min(start + options.batch_size, order.size());
            std::span<const std::size_t> indices(order.data() + start, end - start);
            Batch batch = make_batch(train_set, indices, model.input_scale, T);

            double alpha =
                options.schedule_enabled ? schedule_alpha(model.train_steps, loss) : 1.0;
            Tape tape;
            ForwardLoss fl = build_training_graph(tape, model, batch, loss, alpha);
            double total = tape.value(fl.total).item();
            double rec_mean = tape.value(fl.rec_mean).item();
            double phy_mean = tape.value(fl.phy_mean).item();
            if (!std::isfinite(total)) {
                std::string ids;
                for (std::size_t idx : batch.indices) {
                    if (!ids.empty()) ids += ",";
                    ids += std::to_string(idx);
                }
                throw NumericalError("non-finite training loss in epoch " +
                                         std::to_string(epoch) + " on batch [" + ids + "]",
                                     model.train_steps);
            }

            Gradients grads = tape.backward(fl.total);
            std::vector<Tensor> flat_grads;
            flat_grads.reserve(fl.param_ids.size());
            for (NodeId id : fl.param_ids) flat_grads.push_back(grads.at(id));
            adam_step(model.params, flat_grads, adam);

            result.log.records.push_back({LogRecord::Kind::Step, model.train_steps, epoch, total,
                                          rec_mean, phy_mean, alpha});
            model.train_steps += 1;
        }
        if (!val_set.empty()) validation_record(epoch);
    }

    result.model = std::move(model);
    result.train_set = std::move(train_set);
    result.val_set = std::move(val_set);
    result.resolved_loss = loss;
    return result;
}

}  // namespace

TrainResult train(const std::vector<Trajectory>& dataset, const ModelConfig& config,
                  const LossConfig& loss, const TrainOptions& options) {
    config.validate();
    if (dataset.empty()) throw std::invalid_argument("training dataset is empty");
    auto [train_set, val_set] = split(dataset, options.val_fraction, options.split_seed);
    if (train_set.empty()) throw std::invalid_argument("training split is empty");
    Model model;
    model.config = config;
    model.params = init_params(config, options.seed);
    model.input_scale = compute_input_scale(train_set);
    model.train_steps = 0;
    return train_impl(std::move(model), std::move(train_set), std::move(val_set), loss, options);
}

TrainResult train_from(Model initial, const std::vector<Trajectory>& dataset,
                       const LossConfig& loss, const TrainOptions& options) {
    initial.config.validate();
    if (dataset.empty()) throw std::invalid_argument("training dataset is empty");
    auto [train_set, val_set] = split(dataset, options.val_fraction, options.split_seed);
    return train_impl(std::move(initial), std::move(train_set), std::move(val_set), loss, options);
}

std::pair<double, double> dataset_losses(const Model& model, const std::vector<Trajectory>& set,
                                         const LossConfig& loss, std::size_t batch_size) {
    if (set.empty()) throw std::invalid_argument("dataset_losses: empty set");
    if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
    double rec_total = 0.0;
    double phy_total = 0.0;
    std::vector<std::size_t> indices(set.size());
    for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
    for (std::size_t start = 0; start < set.size(); start += batch_size) {
        std::size_t end = std::min(start + batch_size, set.size());
        std::span<const std::size_t> span_ids(indices.data() + start, end - start);
        Batch batch = make_batch(set, span_ids, model.input_scale, model.config.T);
        Tape tape;
        ForwardLoss fl = build_training_graph(tape, model, batch, loss, 1.0);
        double b = static_cast<double>(end - start);
        rec_total += tape.value(fl.rec_mean).item() * b;
        phy_total += tape.value(fl.phy_mean).item() * b;
    }
    double n = static_cast<double>(set.size());
    return {rec_total / n, phy_total / n};
}

// --- checkpoint io ---------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'P', 'I', 'T', 'A'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
    char bytes[4];
    for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(bytes, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(bytes, 8);
}

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint32_t get_u32(std::istream& in, const std::string& path) {
    unsigned char bytes[4];
    if (!in.read(reinterpret_cast<char*>(bytes), 4)) throw IoError("'" + path + "' is truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(std::istream& in, const std::string& path) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw IoError("'" + path + "' is truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return v;
}

double get_f64(std::istream& in, const std::string& path) {
    return std::bit_cast<double>(get_u64(in, path));
}

}  // namespace

void save_checkpoint(const Model& model, const std::string& path) {
    model.config.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out.write(kMagic, 4);
    put_u32(out, kFormatVersion);
    put_u32(out, static_cast<std::uint32_t>(model.config.variant));
    put_u32(out, static_cast<std::uint32_t>(model.config.activation));
    put_u64(out, model.config.T);
    put_u64(out, model.config.latent_dim);
    put_f64(out, model.config.dt);
    put_f64(out, model.input_scale);
    put_u64(out, static_cast<std::uint64_t>(model.train_steps));
    put_u64(out, model.config.encoder_layers.size());
    for (std::size_t w : model.config.encoder_layers) put_u64(out, w);
    put_u64(out, model.config.decoder_layers.size());
    for (std::size_t w : model.config.decoder_layers) put_u64(out, w);
    put_u64(out, model.params.count());
    for (const Tensor* p : flat_params(model.params)) {
        for (double v : p->data()) put_f64(out, v);
    }
    if (!out) throw IoError("failed writing '" + path + "'");
}

Model load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        throw IoError("'" + path + "' is not a model checkpoint (bad magic)");
    }
    std::uint32_t version = get_u32(in, path);
    if (version != kFormatVersion) {
        throw IoError("'" + path + "' has unsupported format version " + std::to_string(version));
    }
    Model model;
    std::uint32_t variant = get_u32(in, path);
    if (variant > 2) throw IoError("'" + path + "' has invalid variant tag");
    model.config.variant = static_cast<Variant>(variant);
    std::uint32_t activation = get_u32(in, path);
    if (activation > 1) throw IoError("'" + path + "' has invalid activation tag");
    model.config.activation = static_cast<Activation>(activation);
    model.config.T = get_u64(in, path);
    model.config.latent_dim = get_u64(in, path);
    model.config.dt = get_f64(in, path);
    model.input_scale = get_f64(in, path);
    model.train_steps = static_cast<std::int64_t>(get_u64(in, path));
    std::uint64_t enc_count = get_u64(in, path);
    for (std::uint64_t i = 0; i < enc_count; ++i) {
        model.config.encoder_layers.push_back(get_u64(in, path));
    }
    std::uint64_t dec_count = get_u64(in, path);
    for (std::uint64_t i = 0; i < dec_count; ++i) {
        model.config.decoder_layers.push_back(get_u64(in, path));
    }
    model.config.validate();

    std::uint64_t param_count = get_u64(in, path);
    model.params = init_params(model.config, 0);
    if (param_count != model.params.count()) {
        throw IoError("'" + path + "' parameter count " + std::to_string(param_count) +
                      " does not match its architecture (" +
                      std::to_string(model.params.count()) + ")");
    }
    for (Tensor* p : flat_params(model.params)) {
        for (double& v : p->data()) v = get_f64(in, path);
    }
    return model;
}

}  // namespace pita
