#include "pita/dynamics.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pita {

KbmState kbm_derivative(const KbmState& state, const KbmInput& input) {
    return {state.v * std::cos(state.theta), state.v * std::sin(state.theta),
            state.v * input.kappa, input.a};
}

KbmState rk4_step(const KbmState& state, const KbmInput& input, double dt) {
    auto advance = [&](const KbmState& s, const KbmState& d, double h) -> KbmState {
        return {s.x + h * d.x, s.y + h * d.y, s.theta + h * d.theta, s.v + h * d.v};
    };
    KbmState k1 = kbm_derivative(state, input);
    KbmState k2 = kbm_derivative(advance(state, k1, dt / 2.0), input);
    KbmState k3 = kbm_derivative(advance(state, k2, dt / 2.0), input);
    KbmState k4 = kbm_derivative(advance(state, k3, dt), input);
    return {state.x + dt / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x),
            state.y + dt / 6.0 * (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y),
            state.theta + dt / 6.0 * (k1.theta + 2.0 * k2.theta + 2.0 * k3.theta + k4.theta),
            state.v + dt / 6.0 * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v)};
}

StateTrajectory rk4_rollout(const KbmState& initial, const InputTrajectory& inputs) {
    if (inputs.dt <= 0.0) {
        throw std::invalid_argument("rk4_rollout: dt must be positive, got " +
                                    std::to_string(inputs.dt));
    }
    if (inputs.inputs.empty()) {
        throw std::invalid_argument("rk4_rollout: input trajectory is empty");
    }
    StateTrajectory out;
    out.dt = inputs.dt;
    out.states.reserve(inputs.length());
    KbmState current = initial;
    for (const KbmInput& u : inputs.inputs) {
        current = rk4_step(current, u, inputs.dt);
        out.states.push_back(current);
    }
    return out;
}

std::vector<double> central_differences(std::span<const double> series, double dt) {
    if (series.size() < 3) {
        throw std::invalid_argument("central_differences: need at least 3 samples, got " +
                                    std::to_string(series.size()));
    }
    if (dt <= 0.0) {
        throw std::invalid_argument("central_differences: dt must be positive");
    }
    std::size_t n = series.size();
    std::vector<double> d(n);
    d[0] = (series[1] - series[0]) / dt;
    for (std::size_t t = 1; t + 1 < n; ++t) d[t] = (series[t + 1] - series[t - 1]) / (2.0 * dt);
    d[n - 1] = (series[n - 1] - series[n - 2]) / dt;
    return d;
}

std::pair<StateTrajectory, InputTrajectory> recover_kbm_trajectory(const Trajectory& positions) {
    std::size_t n = positions.length();
    if (n < 5) {
        throw std::invalid_argument("recover_kbm_trajectory: need at least 5 points, got " +
                                    std::to_string(n));
    }
    double dt = positions.dt;
    std::vector<double> xs(n), ys(n);
    for (std::size_t t = 0; t < n; ++t) {
        xs[t] = positions.positions[t].x;
        ys[t] = positions.positions[t].y;
    }
    std::vector<double> xd = central_differences(xs, dt);
    std::vector<double> yd = central_differences(ys, dt);

    std::vector<double> v(n), theta(n);
    for (std::size_t t = 0; t < n; ++t) {
        v[t] = std::hypot(xd[t], yd[t]);
        theta[t] = std::atan2(yd[t], xd[t]);
    }
    // Unwrap headings so differencing does not spike at the +-pi seam.
    for (std::size_t t = 1; t < n; ++t) {
        double delta = theta[t] - theta[t - 1];
        delta = std::remainder(delta, 2.0 * std::numbers::pi);
        theta[t] = theta[t - 1] + delta;
    }

    std::vector<double> a = central_differences(v, dt);
    std::vector<double> theta_dot = central_differences(theta, dt);

    StateTrajectory states;
    states.dt = dt;
    states.states.resize(n);
    InputTrajectory inputs;
    inputs.dt = dt;
    inputs.inputs.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
        states.states[t] = {xs[t], ys[t], theta[t], v[t]};
        double kappa = std::abs(v[t]) > kKappaSpeedGuard ? theta_dot[t] / v[t] : 0.0;
        inputs.inputs[t] = {kappa, a[t]};
    }
    return {std::move(states), std::move(inputs)};
}

}  // namespace pita
