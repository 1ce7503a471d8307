#include "pita/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace pita {

void PhysicalLossWeights::validate() const {
    for (double w : {w1, w2, w3, w4, w5, w6}) {
        if (!(w >= 0.0)) throw std::invalid_argument("physical loss weights must be nonnegative");
    }
}

void LossConfig::validate() const {
    if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) {
        throw std::invalid_argument("lambda1 and lambda2 must be nonnegative");
    }
    if (!(m > 0.0)) throw std::invalid_argument("schedule slope m must be positive");
    if (!(gamma > 0.0) || gamma > 1.0) throw std::invalid_argument("gamma must be in (0, 1]");
    if (tau_max < 1) throw std::invalid_argument("tau_max must be at least 1");
    weights.validate();
}

NodeId central_difference_node(Tape& tape, NodeId series, double dt) {
    const Tensor& value = tape.value(series);
    if (value.rank() != 2 || value.cols() < 3) {
        throw std::invalid_argument("central_difference_node: need [batch x T>=3], got " +
                                    value.shape_str());
    }
    if (dt <= 0.0) throw std::invalid_argument("central_difference_node: dt must be positive");
    std::size_t n = value.cols();
    // M[k][t] holds the coefficient of sample k in the derivative at t, so
    // the derivative of every row is series * M.
    Tensor m = Tensor::zeros({n, n});
    m.at(0, 0) = -1.0 / dt;
    m.at(1, 0) = 1.0 / dt;
    for (std::size_t t = 1; t + 1 < n; ++t) {
        m.at(t - 1, t) = -1.0 / (2.0 * dt);
        m.at(t + 1, t) = 1.0 / (2.0 * dt);
    }
    m.at(n - 2, n - 1) = -1.0 / dt;
    m.at(n - 1, n - 1) = 1.0 / dt;
    return tape.matmul(series, tape.constant(std::move(m)));
}

NodeId reconstruction_loss(Tape& tape, NodeId pred_x, NodeId pred_y, NodeId target_x,
                           NodeId target_y) {
    const Tensor& px = tape.value(pred_x);
    const Tensor& tx = tape.value(target_x);
    if (!px.same_shape(tx) || !tape.value(pred_y).same_shape(tape.value(target_y)) ||
        !px.same_shape(tape.value(pred_y))) {
        throw std::invalid_argument("reconstruction_loss: predicted and target shapes differ (" +
                                    px.shape_str() + " vs " + tx.shape_str() + ")");
    }
    NodeId ex = tape.sum(tape.square(tape.sub(pred_x, target_x)));
    NodeId ey = tape.sum(tape.square(tape.sub(pred_y, target_y)));
    return tape.add(ex, ey);
}

NodeId physical_loss(Tape& tape, const StateNodes& states, const InputNodes& inputs,
                     const PhysicalLossWeights& weights, double dt) {
    weights.validate();
    const Tensor& xv = tape.value(states.x);
    if (xv.rank() != 2 || xv.cols() < 3) {
        throw std::invalid_argument("physical_loss: need [batch x T>=3] channels, got " +
                                    xv.shape_str());
    }
    for (NodeId ch : {states.y, states.theta, states.v, inputs.kappa, inputs.a}) {
        if (!tape.value(ch).same_shape(xv)) {
            throw std::invalid_argument("physical_loss: channel shapes differ (" + xv.shape_str() +
                                        " vs " + tape.value(ch).shape_str() + ")");
        }
    }
    std::size_t n = xv.cols();
    auto interior = [&](NodeId node) { return tape.slice_cols(node, 1, 1, n - 2); };
    auto sq_sum = [&](NodeId node) { return tape.sum(tape.square(node)); };

    NodeId cos_theta = tape.cos(states.theta);
    NodeId sin_theta = tape.sin(states.theta);

    NodeId rx = tape.sub(central_difference_node(tape, states.x, dt), tape.mul(states.v, cos_theta));
    NodeId ry = tape.sub(central_difference_node(tape, states.y, dt), tape.mul(states.v, sin_theta));
    NodeId rtheta =
        tape.sub(central_difference_node(tape, states.theta, dt), tape.mul(states.v, inputs.kappa));
    NodeId rv = tape.sub(central_difference_node(tape, states.v, dt), inputs.a);

    NodeId loss = tape.scale(sq_sum(interior(rx)), weights.w1);
    loss = tape.add(loss, tape.scale(sq_sum(interior(ry)), weights.w2));
    loss = tape.add(loss, tape.scale(sq_sum(interior(rtheta)), weights.w3));
    loss = tape.add(loss, tape.scale(sq_sum(interior(rv)), weights.w4));
    loss = tape.add(loss, tape.scale(sq_sum(inputs.kappa), weights.w5));
    loss = tape.add(loss, tape.scale(sq_sum(inputs.a), weights.w6));
    return loss;
}

double schedule_alpha(std::int64_t tau, const LossConfig& config) {
    config.validate();
    double exponent = config.m * (static_cast<double>(tau) /
                                      (config.gamma * static_cast<double>(config.tau_max)) -
                                  1.0);
    return std::min(1.0, std::exp(exponent));
}

NodeId total_loss(Tape& tape, NodeId rec, NodeId phy, std::int64_t tau, const LossConfig& config) {
    double alpha = schedule_alpha(tau, config);
    return tape.add(tape.scale(rec, config.lambda1), tape.scale(phy, alpha * config.lambda2));
}

}  // namespace pita
