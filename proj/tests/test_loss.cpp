#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "pita/autodiff.hpp"
#include "pita/dynamics.hpp"
#include "pita/loss.hpp"
#include "pita/random.hpp"
#include "test_support.hpp"

using namespace pita;

namespace {

/// Channels of a state/input trajectory as [1 x T] constants.
struct ChannelNodes {
    StateNodes states;
    InputNodes inputs;
};

ChannelNodes channels_on_tape(Tape& tape, const StateTrajectory& states,
                              const InputTrajectory& inputs) {
    std::size_t n = states.length();
    Tensor x({1, n}), y({1, n}), theta({1, n}), v({1, n}), kappa({1, n}), a({1, n});
    for (std::size_t t = 0; t < n; ++t) {
        x[t] = states.states[t].x;
        y[t] = states.states[t].y;
        theta[t] = states.states[t].theta;
        v[t] = states.states[t].v;
        kappa[t] = inputs.inputs[t].kappa;
        a[t] = inputs.inputs[t].a;
    }
    return {{tape.constant(x), tape.constant(y), tape.constant(theta), tape.constant(v)},
            {tape.constant(kappa), tape.constant(a)}};
}

double physical_loss_value(const StateTrajectory& states, const InputTrajectory& inputs,
                           const PhysicalLossWeights& weights) {
    Tape tape;
    ChannelNodes ch = channels_on_tape(tape, states, inputs);
    return tape.value(physical_loss(tape, ch.states, ch.inputs, weights, states.dt)).item();
}

/// Brute-force residual evaluation with plain loops, independent of the tape.
double physical_loss_oracle(const StateTrajectory& states, const InputTrajectory& inputs,
                            const PhysicalLossWeights& w) {
    std::size_t n = states.length();
    double dt = states.dt;
    std::vector<double> x(n), y(n), theta(n), v(n);
    for (std::size_t t = 0; t < n; ++t) {
        x[t] = states.states[t].x;
        y[t] = states.states[t].y;
        theta[t] = states.states[t].theta;
        v[t] = states.states[t].v;
    }
    auto cd = [&](const std::vector<double>& s, std::size_t t) {
        return (s[t + 1] - s[t - 1]) / (2.0 * dt);
    };
    double loss = 0.0;
    for (std::size_t t = 1; t + 1 < n; ++t) {
        double rx = cd(x, t) - v[t] * std::cos(theta[t]);
        double ry = cd(y, t) - v[t] * std::sin(theta[t]);
        double rtheta = cd(theta, t) - v[t] * inputs.inputs[t].kappa;
        double rv = cd(v, t) - inputs.inputs[t].a;
        loss += w.w1 * rx * rx + w.w2 * ry * ry + w.w3 * rtheta * rtheta + w.w4 * rv * rv;
    }
    for (std::size_t t = 0; t < n; ++t) {
        loss += w.w5 * inputs.inputs[t].kappa * inputs.inputs[t].kappa;
        loss += w.w6 * inputs.inputs[t].a * inputs.inputs[t].a;
    }
    return loss;
}

StateTrajectory constant_input_rollout(double kappa, double a, double v0, double dt,
                                       std::size_t steps, InputTrajectory* inputs_out) {
    InputTrajectory inputs;
    inputs.dt = dt;
    inputs.inputs.assign(steps, {kappa, a});
    StateTrajectory states = rk4_rollout({0, 0, 0, v0}, inputs);
    if (inputs_out) *inputs_out = inputs;
    return states;
}

}  // namespace

TEST_CASE("central difference node matches the reference implementation") {
    RandomStream rng(7);
    std::size_t n = 11;
    double dt = 0.04;
    Tensor series({2, n});
    for (std::size_t i = 0; i < series.numel(); ++i) series[i] = rng.uniform(-4, 4);

    Tape tape;
    NodeId node = central_difference_node(tape, tape.constant(series), dt);
    for (std::size_t r = 0; r < 2; ++r) {
        std::vector<double> row(n);
        for (std::size_t t = 0; t < n; ++t) row[t] = series.at(r, t);
        std::vector<double> expected = central_differences(row, dt);
        for (std::size_t t = 0; t < n; ++t) {
            CHECK(tape.value(node).at(r, t) == doctest::Approx(expected[t]).epsilon(1e-13));
        }
    }
}

TEST_CASE("reconstruction loss on identical and offset sequences") {
    std::size_t n = 10;
    Tensor x({1, n}), y({1, n});
    for (std::size_t t = 0; t < n; ++t) {
        x[t] = 0.3 * static_cast<double>(t);
        y[t] = -0.1 * static_cast<double>(t);
    }
    Tape tape;
    NodeId xn = tape.constant(x), yn = tape.constant(y);
    CHECK(tape.value(reconstruction_loss(tape, xn, yn, xn, yn)).item() == 0.0);

    Tensor x_off = x;
    for (std::size_t t = 0; t < n; ++t) x_off[t] += 1.0;
    NodeId xoff = tape.constant(x_off);
    CHECK(tape.value(reconstruction_loss(tape, xoff, yn, xn, yn)).item() ==
          doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("reconstruction loss matches elementwise brute force") {
    RandomStream rng(21);
    std::size_t n = 50;
    Tensor px({1, n}), py({1, n}), tx({1, n}), ty({1, n});
    for (std::size_t t = 0; t < n; ++t) {
        px[t] = rng.uniform(-5, 5);
        py[t] = rng.uniform(-5, 5);
        tx[t] = rng.uniform(-5, 5);
        ty[t] = rng.uniform(-5, 5);
    }
    double expected = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        expected += (px[t] - tx[t]) * (px[t] - tx[t]) + (py[t] - ty[t]) * (py[t] - ty[t]);
    }
    Tape tape;
    NodeId loss = reconstruction_loss(tape, tape.constant(px), tape.constant(py),
                                      tape.constant(tx), tape.constant(ty));
    CHECK(tape.value(loss).item() == doctest::Approx(expected).epsilon(1e-12));

    NodeId shorter = tape.constant(Tensor::zeros({1, n - 1}));
    CHECK_THROWS_AS(reconstruction_loss(tape, shorter, shorter, tape.constant(tx),
                                        tape.constant(ty)),
                    std::invalid_argument);
}

TEST_CASE("physical loss vanishes on exact straight constant-speed states") {
    // Power-of-two dt and speed keep every float operation exact, so the
    // residual is not merely small but identically zero.
    std::size_t n = 40;
    double dt = 0.0625, v = 4.0;
    StateTrajectory states;
    states.dt = dt;
    InputTrajectory inputs;
    inputs.dt = dt;
    for (std::size_t t = 0; t < n; ++t) {
        states.states.push_back({v * static_cast<double>(t) * dt, 0.0, 0.0, v});
        inputs.inputs.push_back({0.0, 0.0});
    }
    PhysicalLossWeights w{1, 1, 1, 1, 1, 1};
    CHECK(physical_loss_value(states, inputs, w) == 0.0);

    // The generic dt = 0.04 case is zero to rounding.
    states.dt = 0.04;
    inputs.dt = 0.04;
    for (std::size_t t = 0; t < n; ++t) {
        states.states[t].x = v * static_cast<double>(t) * 0.04;
    }
    CHECK(physical_loss_value(states, inputs, w) < 1e-24);
}

TEST_CASE("regularizer-only case: zero states with unit curvature") {
    std::size_t n = 350;
    StateTrajectory states;
    states.dt = 0.04;
    states.states.assign(n, {0, 0, 0, 0});
    InputTrajectory inputs;
    inputs.dt = 0.04;
    inputs.inputs.assign(n, {1.0, 0.0});
    PhysicalLossWeights w{1, 1, 1, 1, 1, 1};
    CHECK(physical_loss_value(states, inputs, w) == doctest::Approx(350.0).epsilon(1e-12));
}

TEST_CASE("discretization residual of a constant-input roll-out") {
    InputTrajectory inputs;
    StateTrajectory states = constant_input_rollout(0.1, 0.2, 5.0, 0.04, 350, &inputs);
    PhysicalLossWeights w{1, 1, 1, 1, 0, 0};
    double loss = physical_loss_value(states, inputs, w);
    double oracle = physical_loss_oracle(states, inputs, w);
    CHECK(loss == doctest::Approx(oracle).epsilon(1e-10));
    CHECK(loss > 0.0);
    CHECK(loss < 1e-3);

    // Halving dt (same step count) shrinks the squared O(dt^2) residual by
    // about 16x; the spec sketch said about 4x, the oracle disagrees.
    InputTrajectory inputs_half;
    StateTrajectory states_half = constant_input_rollout(0.1, 0.2, 5.0, 0.02, 350, &inputs_half);
    double loss_half = physical_loss_value(states_half, inputs_half, w);
    double ratio = loss / loss_half;
    CHECK(ratio > 8.0);
    CHECK(ratio < 32.0);
}

TEST_CASE("each physical-loss term fires in isolation") {
    std::size_t n = 12;
    double dt = 0.04, v = 3.0;
    auto straight = [&]() {
        StateTrajectory states;
        states.dt = dt;
        InputTrajectory inputs;
        inputs.dt = dt;
        for (std::size_t t = 0; t < n; ++t) {
            states.states.push_back({v * static_cast<double>(t) * dt, 0.0, 0.0, v});
            inputs.inputs.push_back({0.0, 0.0});
        }
        return std::make_pair(states, inputs);
    };
    auto check_only = [&](const StateTrajectory& states, const InputTrajectory& inputs,
                          int which) {
        for (int term = 0; term < 6; ++term) {
            PhysicalLossWeights w{0, 0, 0, 0, 0, 0};
            (term == 0 ? w.w1
             : term == 1 ? w.w2
             : term == 2 ? w.w3
             : term == 3 ? w.w4
             : term == 4 ? w.w5
                         : w.w6) = 1.0;
            double value = physical_loss_value(states, inputs, w);
            if (term == which) {
                CHECK(value > 1e-6);
            } else {
                CHECK(value == doctest::Approx(0.0).epsilon(1e-14));
            }
        }
    };

    auto [s1, u1] = straight();
    s1.states[n / 2].x += 0.5;  // x residual only
    check_only(s1, u1, 0);

    auto [s2, u2] = straight();
    s2.states[n / 2].y += 0.5;
    check_only(s2, u2, 1);

    // An interior kappa violates only the theta residual (and w5).
    auto [s3, u3] = straight();
    u3.inputs[n / 2].kappa = 0.2;
    PhysicalLossWeights only_theta{0, 0, 1, 0, 0, 0};
    CHECK(physical_loss_value(s3, u3, only_theta) > 1e-6);
    PhysicalLossWeights xy_weights{1, 1, 0, 0, 0, 0};
    CHECK(physical_loss_value(s3, u3, xy_weights) == doctest::Approx(0.0).epsilon(1e-14));

    auto [s4, u4] = straight();
    u4.inputs[n / 2].a = 0.4;  // v residual (and w6); isolate w4
    PhysicalLossWeights only_v{0, 0, 0, 1, 0, 0};
    CHECK(physical_loss_value(s4, u4, only_v) > 1e-6);

    auto [s5, u5] = straight();
    u5.inputs[0].kappa = 0.3;  // boundary index still counts for regularizers
    PhysicalLossWeights only_kappa{0, 0, 0, 0, 1, 0};
    CHECK(physical_loss_value(s5, u5, only_kappa) == doctest::Approx(0.09).epsilon(1e-12));
    PhysicalLossWeights theta_weight{0, 0, 1, 0, 0, 0};
    // kappa at a boundary index does not enter the interior theta residual.
    CHECK(physical_loss_value(s5, u5, theta_weight) == doctest::Approx(0.0).epsilon(1e-14));

    auto [s6, u6] = straight();
    u6.inputs.back().a = -0.2;
    PhysicalLossWeights only_a{0, 0, 0, 0, 0, 1};
    CHECK(physical_loss_value(s6, u6, only_a) == doctest::Approx(0.04).epsilon(1e-12));
}

TEST_CASE("weight scaling is exact for power-of-two factors") {
    InputTrajectory inputs;
    StateTrajectory states = constant_input_rollout(0.15, -0.1, 4.0, 0.04, 60, &inputs);
    // Noise the states a little so every term is nonzero.
    RandomStream rng(3);
    for (KbmState& s : states.states) {
        s.x += rng.uniform(-0.01, 0.01);
        s.y += rng.uniform(-0.01, 0.01);
    }
    PhysicalLossWeights w{1, 1, 10, 1, 10, 0.1};
    PhysicalLossWeights w4x{4, 4, 40, 4, 40, 0.4};
    double base = physical_loss_value(states, inputs, w);
    CHECK(physical_loss_value(states, inputs, w4x) == 4.0 * base);

    PhysicalLossWeights w3x{3, 3, 30, 3, 30, 0.3};
    CHECK(physical_loss_value(states, inputs, w3x) == doctest::Approx(3.0 * base).epsilon(1e-14));
}

TEST_CASE("physical loss contract errors") {
    Tape tape;
    NodeId two = tape.constant(Tensor::zeros({1, 2}));
    StateNodes states{two, two, two, two};
    InputNodes inputs{two, two};
    PhysicalLossWeights w;
    CHECK_THROWS_AS(physical_loss(tape, states, inputs, w, 0.04), std::invalid_argument);

    PhysicalLossWeights negative;
    negative.w3 = -1.0;
    CHECK_THROWS_AS(negative.validate(), std::invalid_argument);
}

TEST_CASE("physical loss gradient matches finite differences") {
    InputTrajectory inputs;
    StateTrajectory states = constant_input_rollout(0.2, 0.3, 3.0, 0.04, 12, &inputs);
    RandomStream rng(13);
    for (KbmState& s : states.states) {
        s.x += rng.uniform(-0.05, 0.05);
        s.y += rng.uniform(-0.05, 0.05);
        s.theta += rng.uniform(-0.05, 0.05);
        s.v += rng.uniform(-0.05, 0.05);
    }
    PhysicalLossWeights w{1, 1, 10, 1, 10, 0.1};

    std::size_t n = states.length();
    std::vector<Tensor> leaves(6, Tensor::zeros({1, n}));
    for (std::size_t t = 0; t < n; ++t) {
        leaves[0][t] = states.states[t].x;
        leaves[1][t] = states.states[t].y;
        leaves[2][t] = states.states[t].theta;
        leaves[3][t] = states.states[t].v;
        leaves[4][t] = inputs.inputs[t].kappa;
        leaves[5][t] = inputs.inputs[t].a;
    }
    auto build = [&](Tape& tape, const std::vector<Tensor>& vals, std::vector<NodeId>* ids) {
        StateNodes sn{tape.constant(vals[0]), tape.constant(vals[1]), tape.constant(vals[2]),
                      tape.constant(vals[3])};
        InputNodes in{tape.constant(vals[4]), tape.constant(vals[5])};
        if (ids) *ids = {sn.x, sn.y, sn.theta, sn.v, in.kappa, in.a};
        return physical_loss(tape, sn, in, w, states.dt);
    };

    Tape tape;
    std::vector<NodeId> ids;
    NodeId loss = build(tape, leaves, &ids);
    Gradients grads = tape.backward(loss);

    auto oracle = [&](const std::vector<Tensor>& vals) {
        Tape t;
        return t.value(build(t, vals, nullptr)).item();
    };
    std::vector<Tensor> fd = pita::testing::fd_gradients(oracle, leaves);
    std::vector<Tensor> analytic;
    for (NodeId id : ids) analytic.push_back(grads.at(id));
    CHECK(pita::testing::max_rel_error(analytic, fd) < 1e-4);
}

TEST_CASE("schedule alpha closed form and clamping") {
    LossConfig config;
    config.m = 5.0;
    config.gamma = 0.2;
    config.tau_max = 1000;

    CHECK(schedule_alpha(200, config) == 1.0);  // tau = gamma * tau_max
    CHECK(schedule_alpha(0, config) == doctest::Approx(std::exp(-5.0)).epsilon(1e-12));
    CHECK(schedule_alpha(1000, config) == 1.0);  // clamped plateau

    for (const double gamma : {0.2, 0.6}) {
        config.gamma = gamma;
        for (int i = 0; i <= 100; ++i) {
            std::int64_t tau = config.tau_max * i / 100;
            double expected =
                std::min(1.0, std::exp(config.m * (static_cast<double>(tau) /
                                                       (gamma * static_cast<double>(config.tau_max)) -
                                                   1.0)));
            CHECK(std::abs(schedule_alpha(tau, config) - expected) <= 1e-12);
        }
    }
}

TEST_CASE("schedule alpha is nondecreasing and saturates") {
    LossConfig config;
    config.m = 5.0;
    config.gamma = 0.4;
    config.tau_max = 500;
    double previous = 0.0;
    for (std::int64_t tau = 0; tau <= config.tau_max; ++tau) {
        double alpha = schedule_alpha(tau, config);
        CHECK(alpha >= previous);
        CHECK(alpha > 0.0);
        CHECK(alpha <= 1.0);
        if (static_cast<double>(tau) >= config.gamma * static_cast<double>(config.tau_max)) {
            CHECK(alpha == 1.0);
        }
        previous = alpha;
    }
}

TEST_CASE("total loss applies the table presets") {
    Tape tape;
    NodeId one = tape.constant(Tensor::scalar(1.0));
    NodeId zero = tape.constant(Tensor::scalar(0.0));

    LossConfig rec_preset;
    rec_preset.lambda1 = 1.976e-4;
    rec_preset.lambda2 = 1.028e-2;
    rec_preset.gamma = 0.595;
    rec_preset.m = 5.0;
    rec_preset.tau_max = 1000;
    CHECK(tape.value(total_loss(tape, one, zero, 0, rec_preset)).item() ==
          doctest::Approx(1.976e-4).epsilon(1e-12));

    LossConfig phy_preset;
    phy_preset.lambda1 = 1.030e-4;
    phy_preset.lambda2 = 3.012e-2;
    phy_preset.gamma = 0.032;
    phy_preset.m = 5.0;
    phy_preset.tau_max = 1000;
    std::int64_t tau = 32;  // gamma * tau_max
    CHECK(tape.value(total_loss(tape, zero, one, tau, phy_preset)).item() ==
          doctest::Approx(3.012e-2).epsilon(1e-12));

    LossConfig no_phy;
    no_phy.lambda1 = 0.5;
    no_phy.lambda2 = 0.0;
    no_phy.tau_max = 100;
    for (std::int64_t t : {0L, 17L, 100L}) {
        CHECK(tape.value(total_loss(tape, one, one, t, no_phy)).item() ==
              doctest::Approx(0.5).epsilon(1e-14));
    }
}

TEST_CASE("loss config validation") {
    LossConfig config;
    config.gamma = 0.0;
    CHECK_THROWS_AS(config.validate(), std::invalid_argument);
    config.gamma = 0.5;
    config.m = 0.0;
    CHECK_THROWS_AS(config.validate(), std::invalid_argument);
    config.m = 5.0;
    config.tau_max = 0;
    CHECK_THROWS_AS(config.validate(), std::invalid_argument);
}
