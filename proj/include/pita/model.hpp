#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pita/autodiff.hpp"
#include "pita/dynamics.hpp"
#include "pita/loss.hpp"
#include "pita/trajectory.hpp"

namespace pita {

enum class Variant { Simple, ActionSpace, Pita };
enum class Activation { Tanh, Relu };

std::string variant_name(Variant variant);
Variant parse_variant(const std::string& name);
std::string activation_name(Activation activation);
Activation parse_activation(const std::string& name);

/// Encoder/decoder architecture. Layer vectors hold the output width of each
/// layer; the last encoder width is the latent dimension and the last decoder
/// width is the variant's output width (2T, 2T+4 or 6T).
struct ModelConfig {
    Variant variant = Variant::Simple;
    std::size_t T = 50;
    std::size_t latent_dim = 32;
    std::vector<std::size_t> encoder_layers;
    std::vector<std::size_t> decoder_layers;
    Activation activation = Activation::Tanh;
    double dt = 0.04;

    std::size_t input_width() const { return 2 * T; }
    std::size_t output_width() const;
    void validate() const;
};

/// Widths interpolate geometrically between the input width and the latent
/// dimension (encoder) and back out to the variant's output width (decoder).
ModelConfig make_model_config(Variant variant, std::size_t T, std::size_t latent_dim,
                              std::size_t depth, double dt = 0.04,
                              Activation activation = Activation::Tanh);

struct DenseLayer {
    Tensor weight;  // [fan_in x fan_out]
    Tensor bias;    // [fan_out]
};

struct ModelParams {
    std::vector<DenseLayer> encoder;
    std::vector<DenseLayer> decoder;

    std::size_t count() const;
};

/// Declaration-ordered flat view (encoder W, b, ..., decoder W, b, ...)
/// shared by the optimizer, the gradient plumbing and the checkpoint format.
std::vector<Tensor*> flat_params(ModelParams& params);
std::vector<const Tensor*> flat_params(const ModelParams& params);

/// Weights uniform in +-1/sqrt(fan_in), biases zero, deterministic per seed.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

/// A trained (or training) autoencoder: architecture, parameters, the dataset
/// position scale applied before encoding, and the global step counter that
/// drives the physical-loss schedule.
struct Model {
    ModelConfig config;
    ModelParams params;
    double input_scale = 1.0;
    std::int64_t train_steps = 0;

    std::vector<double> encode(const Trajectory& trajectory) const;
    std::vector<Vec2> decode_simple(std::span<const double> latent) const;
    std::pair<KbmState, InputTrajectory> decode_action_space(std::span<const double> latent) const;
    std::pair<StateTrajectory, InputTrajectory> decode_pita(std::span<const double> latent) const;

    /// Reconstructed positions for any variant (action-space outputs are
    /// rolled out with RK4 first).
    std::vector<Vec2> reconstruct(const Trajectory& trajectory) const;
};

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    std::int64_t step = 0;
    AdamConfig config;
};

AdamState make_adam_state(const ModelParams& params, const AdamConfig& config);

/// One Adam update with bias correction; `grads` follows flat_params order.
void adam_step(ModelParams& params, const std::vector<Tensor>& grads, AdamState& state);

/// Mini-batch of trajectories prepared for the training graph: normalized
/// flattened inputs plus physical-unit targets with time along columns.
struct Batch {
    Tensor input;     // [B x 2T], positions divided by input_scale
    Tensor target_x;  // [B x T]
    Tensor target_y;  // [B x T]
    std::vector<std::size_t> indices;
};

Batch make_batch(const std::vector<Trajectory>& set, std::span<const std::size_t> indices,
                 double input_scale, std::size_t T);

/// Nodes of one training step's forward pass and loss.
struct ForwardLoss {
    NodeId rec_mean;  // batch-mean reconstruction loss
    NodeId phy_mean;  // batch-mean physical loss (constant 0 for non-PITA)
    NodeId total;     // lambda1 * rec_mean + alpha * lambda2 * phy_mean
    std::vector<NodeId> param_ids;  // flat_params order
};

ForwardLoss build_training_graph(Tape& tape, const Model& model, const Batch& batch,
                                 const LossConfig& loss, double alpha);

/// 95th-percentile absolute coordinate over every position of the set.
double compute_input_scale(const std::vector<Trajectory>& trajectories);

struct LogRecord {
    enum class Kind { Step, Epoch };
    Kind kind = Kind::Step;
    std::int64_t step = 0;
    int epoch = 0;
    double loss_total = 0.0;
    double loss_rec = 0.0;
    double loss_phy = 0.0;
    double alpha = 0.0;
};

struct TrainLog {
    std::vector<LogRecord> records;
};

/// Newline-delimited JSON, one record per line.
void write_train_log(const TrainLog& log, const std::string& path);

struct TrainOptions {
    int epochs = 100;
    std::size_t batch_size = 64;
    AdamConfig adam;
    std::uint64_t seed = 1;
    double val_fraction = 0.1;
    std::uint64_t split_seed = 73;     // same split for every run
    bool schedule_enabled = true;      // false forces alpha = 1 from step 0
};

struct TrainResult {
    Model model;
    TrainLog log;
    std::vector<Trajectory> train_set;
    std::vector<Trajectory> val_set;
    LossConfig resolved_loss;  // tau_max filled in when it was left 0
};

/// Trains from scratch: splits the dataset, fits the input scale on the
/// training split, and runs seeded mini-batch Adam. tau advances once per
/// mini-batch and drives schedule_alpha.
TrainResult train(const std::vector<Trajectory>& dataset, const ModelConfig& config,
                  const LossConfig& loss, const TrainOptions& options);

/// Continues training an existing model; the step counter keeps running so
/// the schedule stays continuous across resumes.
TrainResult train_from(Model initial, const std::vector<Trajectory>& dataset,
                       const LossConfig& loss, const TrainOptions& options);

/// Mean per-trajectory reconstruction and physical losses over a set (the
/// physical part is 0 for non-PITA variants).
std::pair<double, double> dataset_losses(const Model& model, const std::vector<Trajectory>& set,
                                         const LossConfig& loss, std::size_t batch_size = 64);

/// Binary container: "PITA" magic, format version, serialized config, then
/// parameters in declaration order as little-endian 64-bit floats.
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace pita
