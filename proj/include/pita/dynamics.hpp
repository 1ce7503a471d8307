#pragma once

#include <span>
#include <utility>
#include <vector>

#include "pita/trajectory.hpp"

namespace pita {

/// Planar kinematic bicycle state: position (m), heading (rad), speed (m/s).
/// The curvature formulation keeps the model free of any wheelbase.
struct KbmState {
    double x = 0.0;
    double y = 0.0;
    double theta = 0.0;
    double v = 0.0;
};

/// Curvature (1/m) and longitudinal acceleration (m/s^2) control input.
struct KbmInput {
    double kappa = 0.0;
    double a = 0.0;
};

struct StateTrajectory {
    std::vector<KbmState> states;
    double dt = 0.04;

    std::size_t length() const { return states.size(); }
};

struct InputTrajectory {
    std::vector<KbmInput> inputs;
    double dt = 0.04;

    std::size_t length() const { return inputs.size(); }
};

/// Continuous-time state derivative (v cos(theta), v sin(theta), v kappa, a),
/// returned in a KbmState used as a derivative carrier.
KbmState kbm_derivative(const KbmState& state, const KbmInput& input);

/// One classical fourth-order Runge-Kutta step with zero-order-hold input.
KbmState rk4_step(const KbmState& state, const KbmInput& input, double dt);

/// Integrates T = inputs.length() steps from `initial`. states[0] is the
/// result of the first step; the initial state itself is not included, so
/// the output length always equals the input length.
StateTrajectory rk4_rollout(const KbmState& initial, const InputTrajectory& inputs);

/// Sampled-sequence derivative: second-order central differences at interior
/// points, first-order one-sided differences at both endpoints. Output length
/// equals input length.
std::vector<double> central_differences(std::span<const double> series, double dt);

/// Below this speed curvature recovery reports 0 instead of theta_dot / v.
inline constexpr double kKappaSpeedGuard = 0.1;

/// Reconstructs the KBM state and input sequences a vehicle would need to
/// follow the given positions, using central differences only. Headings are
/// unwrapped before differentiation.
std::pair<StateTrajectory, InputTrajectory> recover_kbm_trajectory(const Trajectory& positions);

}  // namespace pita
