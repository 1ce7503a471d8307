#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "pita/dynamics.hpp"
#include "pita/random.hpp"

using namespace pita;

namespace {

constexpr double kPi = std::numbers::pi;

InputTrajectory constant_inputs(std::size_t n, double kappa, double a, double dt) {
    InputTrajectory u;
    u.dt = dt;
    u.inputs.assign(n, {kappa, a});
    return u;
}

}  // namespace

TEST_CASE("kbm derivative evaluates the motion model directly") {
    KbmState d0 = kbm_derivative({0, 0, 0, 0}, {0, 0});
    CHECK(d0.x == 0.0);
    CHECK(d0.y == 0.0);
    CHECK(d0.theta == 0.0);
    CHECK(d0.v == 0.0);

    KbmState d1 = kbm_derivative({0, 0, 0, 2}, {0, 0});
    CHECK(d1.x == 2.0);
    CHECK(d1.y == 0.0);
    CHECK(d1.theta == 0.0);
    CHECK(d1.v == 0.0);

    KbmState d2 = kbm_derivative({0, 0, kPi / 2, 1}, {0.5, 0.1});
    CHECK(d2.x == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(d2.y == doctest::Approx(1.0));
    CHECK(d2.theta == doctest::Approx(0.5));
    CHECK(d2.v == doctest::Approx(0.1));
}

TEST_CASE("standstill is a roll-out fixed point") {
    StateTrajectory states = rk4_rollout({1.5, -2.0, 0.7, 0.0}, constant_inputs(10, 0.3, 0.0, 0.04));
    for (const KbmState& s : states.states) {
        CHECK(s.x == 1.5);
        CHECK(s.y == -2.0);
        CHECK(s.theta == 0.7);
        CHECK(s.v == 0.0);
    }
}

TEST_CASE("uniform straight motion advances x only") {
    StateTrajectory states = rk4_rollout({0, 0, 0, 1}, constant_inputs(25, 0.0, 0.0, 0.04));
    CHECK(states.length() == 25);
    CHECK(states.states.back().x == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(states.states.back().y == 0.0);
    CHECK(states.states.back().theta == 0.0);
}

TEST_CASE("unit circle closes after one period") {
    // v = 1, kappa = 1 follows x = sin(t), y = 1 - cos(t).
    double dt = 0.04;
    std::size_t steps = 157;
    StateTrajectory states = rk4_rollout({0, 0, 0, 1}, constant_inputs(steps, 1.0, 0.0, dt));
    double t_end = static_cast<double>(steps) * dt;
    const KbmState& last = states.states.back();
    CHECK(std::hypot(last.x - std::sin(t_end), last.y - (1.0 - std::cos(t_end))) < 1e-3);
    CHECK(last.theta == doctest::Approx(t_end).epsilon(1e-9));
    CHECK(std::abs(last.theta - 2.0 * kPi) < 0.01);
}

TEST_CASE("rk4 endpoint error shrinks with order at least 3.5") {
    auto endpoint_error = [](double dt) {
        std::size_t steps = static_cast<std::size_t>(std::llround(2.0 * kPi / dt));
        StateTrajectory states = rk4_rollout({0, 0, 0, 1}, constant_inputs(steps, 1.0, 0.0, dt));
        double t_end = static_cast<double>(steps) * dt;
        const KbmState& last = states.states.back();
        return std::hypot(last.x - std::sin(t_end), last.y - (1.0 - std::cos(t_end)));
    };
    std::vector<double> dts{0.04, 0.02, 0.01};
    std::vector<double> errors;
    for (double dt : dts) errors.push_back(endpoint_error(dt));
    for (std::size_t i = 1; i < errors.size(); ++i) {
        double order = std::log2(errors[i - 1] / errors[i]);
        CHECK(order >= 3.5);
    }
}

TEST_CASE("roll-out input contract") {
    InputTrajectory bad = constant_inputs(5, 0, 0, -0.04);
    CHECK_THROWS_AS(rk4_rollout({0, 0, 0, 1}, bad), std::invalid_argument);
    InputTrajectory empty;
    empty.dt = 0.04;
    CHECK_THROWS_AS(rk4_rollout({0, 0, 0, 1}, empty), std::invalid_argument);
}

TEST_CASE("central differences on constants, linears and quadratics") {
    std::vector<double> constant(7, 3.5);
    for (double d : central_differences(constant, 0.1)) CHECK(d == 0.0);

    double dt = 0.04;
    std::vector<double> linear(9);
    for (std::size_t t = 0; t < linear.size(); ++t) linear[t] = 3.0 * static_cast<double>(t) * dt;
    for (double d : central_differences(linear, dt)) CHECK(d == doctest::Approx(3.0).epsilon(1e-12));

    std::vector<double> quadratic(9);
    for (std::size_t t = 0; t < quadratic.size(); ++t) {
        double x = static_cast<double>(t) * dt;
        quadratic[t] = x * x;
    }
    std::vector<double> d = central_differences(quadratic, dt);
    for (std::size_t t = 1; t + 1 < d.size(); ++t) {
        CHECK(d[t] == doctest::Approx(2.0 * static_cast<double>(t) * dt).epsilon(1e-12));
    }
}

TEST_CASE("central differences require three samples") {
    std::vector<double> two{1.0, 2.0};
    CHECK_THROWS_AS(central_differences(two, 0.1), std::invalid_argument);
}

TEST_CASE("central differences are linear") {
    RandomStream rng(5);
    std::vector<double> s(12), r(12);
    for (std::size_t i = 0; i < s.size(); ++i) {
        s[i] = rng.uniform(-3, 3);
        r[i] = rng.uniform(-3, 3);
    }
    double alpha = 1.25, beta = -0.5, dt = 0.04;
    std::vector<double> mixed(12);
    for (std::size_t i = 0; i < s.size(); ++i) mixed[i] = alpha * s[i] + beta * r[i];
    std::vector<double> lhs = central_differences(mixed, dt);
    std::vector<double> ds = central_differences(s, dt);
    std::vector<double> dr = central_differences(r, dt);
    for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK(lhs[i] == doctest::Approx(alpha * ds[i] + beta * dr[i]).epsilon(1e-12));
    }
}

TEST_CASE("recovery on uniform straight motion") {
    Trajectory traj;
    traj.dt = 0.04;
    for (std::size_t t = 0; t < 30; ++t) {
        traj.positions.push_back({5.0 * static_cast<double>(t) * traj.dt, 0.0});
    }
    auto [states, inputs] = recover_kbm_trajectory(traj);
    for (std::size_t t = 1; t + 1 < traj.length(); ++t) {
        CHECK(states.states[t].v == doctest::Approx(5.0).epsilon(1e-12));
        CHECK(std::abs(inputs.inputs[t].a) < 1e-9);
        CHECK(std::abs(inputs.inputs[t].kappa) < 1e-9);
    }
}

TEST_CASE("recovery on exact unit-circle samples") {
    Trajectory traj;
    traj.dt = 0.04;
    for (std::size_t t = 0; t < 160; ++t) {
        double time = static_cast<double>(t) * traj.dt;
        traj.positions.push_back({std::sin(time), 1.0 - std::cos(time)});
    }
    auto [states, inputs] = recover_kbm_trajectory(traj);
    for (std::size_t t = 2; t + 2 < traj.length(); ++t) {
        CHECK(inputs.inputs[t].kappa == doctest::Approx(1.0).epsilon(1e-2));
        CHECK(std::abs(inputs.inputs[t].a) < 1e-2);
        CHECK(states.states[t].v == doctest::Approx(1.0).epsilon(1e-2));
    }
}

TEST_CASE("recovery guards curvature at standstill") {
    Trajectory traj;
    traj.dt = 0.04;
    traj.positions.assign(10, {2.0, -1.0});
    auto [states, inputs] = recover_kbm_trajectory(traj);
    for (std::size_t t = 0; t < traj.length(); ++t) {
        CHECK(states.states[t].v == 0.0);
        CHECK(inputs.inputs[t].kappa == 0.0);
        CHECK(inputs.inputs[t].a == 0.0);
    }
}

TEST_CASE("recovery unwraps headings across the pi seam") {
    // Circle arc passing theta = pi; without unwrapping theta_dot spikes.
    Trajectory traj;
    traj.dt = 0.04;
    for (std::size_t t = 0; t < 80; ++t) {
        double time = 2.0 + static_cast<double>(t) * traj.dt;  // heading sweeps past pi
        traj.positions.push_back({std::sin(time), 1.0 - std::cos(time)});
    }
    auto [states, inputs] = recover_kbm_trajectory(traj);
    for (std::size_t t = 2; t + 2 < traj.length(); ++t) {
        CHECK(inputs.inputs[t].kappa == doctest::Approx(1.0).epsilon(1e-2));
    }
}

TEST_CASE("recovery needs five points") {
    Trajectory traj;
    traj.dt = 0.04;
    traj.positions.assign(4, {0.0, 0.0});
    CHECK_THROWS_AS(recover_kbm_trajectory(traj), std::invalid_argument);
}

TEST_CASE("round trip: recovered controls match slowly varying roll-out inputs") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        RandomStream rng(seed * 31);
        double dt = 0.04;
        std::size_t steps = 25;
        double v0 = rng.uniform(4.5, 8.0);

        // Piecewise-linear profiles with bounded increments; |kappa| <= 0.5,
        // |a| <= 3 and v stays above 1 m/s for this horizon.
        InputTrajectory inputs;
        inputs.dt = dt;
        double kappa = rng.uniform(-0.4, 0.4);
        double accel = rng.uniform(-2.0, 2.0);
        for (std::size_t t = 0; t < steps; ++t) {
            inputs.inputs.push_back({kappa, accel});
            kappa = std::clamp(kappa + rng.uniform(-0.01, 0.01), -0.5, 0.5);
            accel = std::clamp(accel + rng.uniform(-0.05, 0.05), -3.0, 3.0);
        }

        KbmState initial{0, 0, rng.uniform(-kPi, kPi), v0};
        StateTrajectory states = rk4_rollout(initial, inputs);
        Trajectory traj;
        traj.dt = dt;
        for (const KbmState& s : states.states) traj.positions.push_back({s.x, s.y});

        auto [rec_states, rec_inputs] = recover_kbm_trajectory(traj);
        for (std::size_t t = 2; t + 2 < steps; ++t) {
            CHECK(std::abs(rec_inputs.inputs[t].kappa - inputs.inputs[t].kappa) < 0.05);
            CHECK(std::abs(rec_inputs.inputs[t].a - inputs.inputs[t].a) < 0.05);
        }
    }
}
