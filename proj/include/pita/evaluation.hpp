#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "pita/model.hpp"
#include "pita/trajectory.hpp"

namespace pita {

/// Unscented smoother configuration. The process model is the KBM augmented
/// with curvature and acceleration as random-walk states, so the process
/// noise diagonal covers (x, y, theta, v, kappa, a); entries are per-step
/// standard deviations.
struct UkfConfig {
    std::array<double, 6> process_std{1e-3, 1e-3, 1e-3, 1e-2, 0.05, 0.5};
    double measurement_std = 0.1;  // position noise, meters
    // Scaled symmetric 2n+1 sigma-point set. The defaults keep every
    // covariance weight nonnegative.
    double alpha = 1.0;
    double beta = 0.0;
    double kappa = 0.0;

    void validate() const;
};

/// sqrt(mean_t ||p_hat - p||^2) over corresponding points.
double rmse(std::span<const Vec2> predicted, std::span<const Vec2> target);

struct ControlEffort {
    std::vector<double> abs_accel;
    std::vector<double> abs_kappa;
};

/// |a| and |kappa| needed to follow the positions with a KBM, recovered by
/// finite differences; the two boundary samples are excluded.
ControlEffort control_effort(const Trajectory& positions);

/// Forward unscented Kalman filter under the augmented KBM process plus a
/// backward RTS smoothing pass; returns the smoothed position sequence.
std::vector<Vec2> ukf_smooth(const Trajectory& positions, const UkfConfig& config);

/// Mean distance from each position to the nearest point on the polyline.
double smoothness_distance(std::span<const Vec2> positions, std::span<const Vec2> path);

struct MetricSummary {
    double mean = 0.0;
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    double min = 0.0;
    double max = 0.0;
    std::size_t count = 0;
};

MetricSummary summarize(std::vector<double> samples);

struct ModelReport {
    std::string name;
    bool has_rmse = true;            // the ground-truth row carries no RMSE
    MetricSummary rmse;              // over per-trajectory RMSE values
    MetricSummary abs_accel;         // over samples pooled across trajectories
    MetricSummary abs_kappa;
    MetricSummary smoothness;        // over per-trajectory mean distances
    std::vector<double> rmse_per_trajectory;
    std::vector<double> smoothness_per_trajectory;
    std::vector<double> median_abs_accel_per_trajectory;
    std::vector<double> median_abs_kappa_per_trajectory;
    std::vector<double> pooled_abs_accel;
    std::vector<double> pooled_abs_kappa;
};

struct EvalReport {
    UkfConfig ukf;
    std::size_t trajectory_count = 0;
    std::vector<ModelReport> models;  // last row is ground truth
};

struct NamedModel {
    std::string name;
    const Model* model = nullptr;
};

/// Runs all three instruments for every model over the same validation set
/// and appends the ground-truth reference row (control effort and smoothness
/// only).
EvalReport evaluate_models(const std::vector<NamedModel>& models,
                           const std::vector<Trajectory>& validation, const UkfConfig& config);

/// JSON report: config echo, per-model metric summaries, per-trajectory raw
/// values. Byte-stable for identical inputs.
void write_report_json(const EvalReport& report, const std::string& path);

}  // namespace pita
