#pragma once

#include <cstdint>

#include "pita/autodiff.hpp"

namespace pita {

/// Weights for the six physical-loss terms: four differential-equation
/// residuals (x, y, theta, v) and two control regularizers (kappa, a).
struct PhysicalLossWeights {
    double w1 = 1.0;   // x residual
    double w2 = 1.0;   // y residual
    double w3 = 10.0;  // theta residual
    double w4 = 1.0;   // v residual
    double w5 = 10.0;  // |kappa|^2 regularizer
    double w6 = 0.1;   // |a|^2 regularizer

    void validate() const;
};

struct LossConfig {
    double lambda1 = 1.0;      // reconstruction weight
    double lambda2 = 0.0;      // physical weight
    double m = 5.0;            // schedule slope
    double gamma = 0.595;      // fraction of training after which alpha saturates
    std::int64_t tau_max = 1;  // total training steps
    PhysicalLossWeights weights;

    void validate() const;
};

/// Predicted KBM channels as graph nodes, each a [batch x T] matrix with time
/// running along columns.
struct StateNodes {
    NodeId x;
    NodeId y;
    NodeId theta;
    NodeId v;
};

struct InputNodes {
    NodeId kappa;
    NodeId a;
};

/// Central differences along columns as a graph op (constant-matrix product),
/// matching central_differences() endpoint conventions exactly.
NodeId central_difference_node(Tape& tape, NodeId series, double dt);

/// Sum over the trajectory (and over batch rows) of squared position error.
/// All four operands are [batch x T].
NodeId reconstruction_loss(Tape& tape, NodeId pred_x, NodeId pred_y, NodeId target_x,
                           NodeId target_y);

/// Weighted KBM-residual loss. Residual norms run over interior time indices
/// only; the two regularizers run over all T. Differentiable in every
/// predicted channel.
NodeId physical_loss(Tape& tape, const StateNodes& states, const InputNodes& inputs,
                     const PhysicalLossWeights& weights, double dt);

/// Exponential physical-loss ramp min(1, exp(m * (tau / (gamma * tau_max) - 1))).
double schedule_alpha(std::int64_t tau, const LossConfig& config);

/// lambda1 * rec + alpha(tau) * lambda2 * phy.
NodeId total_loss(Tape& tape, NodeId rec, NodeId phy, std::int64_t tau, const LossConfig& config);

}  // namespace pita
