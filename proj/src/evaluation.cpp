#include "pita/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "pita/dynamics.hpp"
#include "pita/errors.hpp"

namespace pita {

void UkfConfig::validate() const {
    for (double s : process_std) {
        if (!(s > 0.0)) throw std::invalid_argument("process noise stds must be positive");
    }
    if (!(measurement_std > 0.0)) {
        throw std::invalid_argument("measurement_std must be positive");
    }
    double n = 6.0;
    double lambda = alpha * alpha * (n + kappa) - n;
    if (!(n + lambda > 0.0)) {
        throw std::invalid_argument("sigma scaling must satisfy n + lambda > 0");
    }
}

double rmse(std::span<const Vec2> predicted, std::span<const Vec2> target) {
    if (predicted.size() != target.size() || predicted.empty()) {
        throw std::invalid_argument("rmse: sequence lengths " + std::to_string(predicted.size()) +
                                    " and " + std::to_string(target.size()) + " differ or are 0");
    }
    double total = 0.0;
    for (std::size_t t = 0; t < predicted.size(); ++t) {
        double dx = predicted[t].x - target[t].x;
        double dy = predicted[t].y - target[t].y;
        total += dx * dx + dy * dy;
    }
    return std::sqrt(total / static_cast<double>(predicted.size()));
}

ControlEffort control_effort(const Trajectory& positions) {
    auto [states, inputs] = recover_kbm_trajectory(positions);
    ControlEffort effort;
    std::size_t n = inputs.length();
    effort.abs_accel.reserve(n - 2);
    effort.abs_kappa.reserve(n - 2);
    for (std::size_t t = 1; t + 1 < n; ++t) {
        effort.abs_accel.push_back(std::abs(inputs.inputs[t].a));
        effort.abs_kappa.push_back(std::abs(inputs.inputs[t].kappa));
    }
    return effort;
}

// --- unscented smoother ------------------------------------------------------

namespace {

constexpr std::size_t kN = 6;  // (x, y, theta, v, kappa, a)
using Vec6 = std::array<double, kN>;
using Mat6 = std::array<double, kN * kN>;

Mat6 zero_mat() {
    Mat6 m{};
    return m;
}

double& el(Mat6& m, std::size_t r, std::size_t c) { return m[r * kN + c]; }
double el(const Mat6& m, std::size_t r, std::size_t c) { return m[r * kN + c]; }

void symmetrize(Mat6& m) {
    for (std::size_t r = 0; r < kN; ++r) {
        for (std::size_t c = r + 1; c < kN; ++c) {
            double v = 0.5 * (el(m, r, c) + el(m, c, r));
            el(m, r, c) = v;
            el(m, c, r) = v;
        }
    }
}

/// Lower-triangular Cholesky factor; false when the matrix is not positive
/// definite.
bool cholesky(const Mat6& m, Mat6& lower) {
    lower = zero_mat();
    for (std::size_t r = 0; r < kN; ++r) {
        for (std::size_t c = 0; c <= r; ++c) {
            double sum = el(m, r, c);
            for (std::size_t k = 0; k < c; ++k) sum -= el(lower, r, k) * el(lower, c, k);
            if (r == c) {
                if (!(sum > 0.0)) return false;
                el(lower, r, c) = std::sqrt(sum);
            } else {
                el(lower, r, c) = sum / el(lower, c, c);
            }
        }
    }
    return true;
}

/// Solves (L L^T) x = b in place of returning; used as A^{-1} b with the
/// Cholesky factor of A.
Vec6 chol_solve(const Mat6& lower, const Vec6& b) {
    Vec6 y{};
    for (std::size_t r = 0; r < kN; ++r) {
        double sum = b[r];
        for (std::size_t k = 0; k < r; ++k) sum -= el(lower, r, k) * y[k];
        y[r] = sum / el(lower, r, r);
    }
    Vec6 x{};
    for (std::size_t ri = kN; ri-- > 0;) {
        double sum = y[ri];
        for (std::size_t k = ri + 1; k < kN; ++k) sum -= el(lower, k, ri) * x[k];
        x[ri] = sum / el(lower, ri, ri);
    }
    return x;
}

/// G = C * P^{-1} given the Cholesky factor of P, solved row by row.
Mat6 solve_right(const Mat6& c, const Mat6& p_lower) {
    Mat6 g = zero_mat();
    for (std::size_t r = 0; r < kN; ++r) {
        Vec6 row{};
        for (std::size_t k = 0; k < kN; ++k) row[k] = el(c, r, k);
        Vec6 solved = chol_solve(p_lower, row);  // P symmetric, so this is row * P^{-1}
        for (std::size_t k = 0; k < kN; ++k) el(g, r, k) = solved[k];
    }
    return g;
}

struct SigmaSet {
    std::array<Vec6, 2 * kN + 1> points;
    std::array<double, 2 * kN + 1> wm;
    std::array<double, 2 * kN + 1> wc;
};

SigmaSet sigma_points(const Vec6& mean, const Mat6& cov, const UkfConfig& config, long step) {
    double n = static_cast<double>(kN);
    double lambda = config.alpha * config.alpha * (n + config.kappa) - n;
    double spread = std::sqrt(n + lambda);
    Mat6 lower;
    if (!cholesky(cov, lower)) {
        throw NumericalError("ukf covariance lost positive definiteness", step);
    }
    SigmaSet set;
    set.points[0] = mean;
    for (std::size_t i = 0; i < kN; ++i) {
        Vec6 plus = mean;
        Vec6 minus = mean;
        for (std::size_t r = 0; r < kN; ++r) {
            plus[r] += spread * el(lower, r, i);
            minus[r] -= spread * el(lower, r, i);
        }
        set.points[1 + i] = plus;
        set.points[1 + kN + i] = minus;
    }
    set.wm[0] = lambda / (n + lambda);
    set.wc[0] = set.wm[0] + (1.0 - config.alpha * config.alpha + config.beta);
    for (std::size_t i = 1; i < set.points.size(); ++i) {
        set.wm[i] = 1.0 / (2.0 * (n + lambda));
        set.wc[i] = set.wm[i];
    }
    return set;
}

/// Augmented process model over one step: KBM RK4 with the kappa/a entries
/// held as constant controls.
Vec6 propagate(const Vec6& z, double dt) {
    KbmState s{z[0], z[1], z[2], z[3]};
    KbmInput u{z[4], z[5]};
    KbmState next = rk4_step(s, u, dt);
    return {next.x, next.y, next.theta, next.v, z[4], z[5]};
}

}  // namespace

std::vector<Vec2> ukf_smooth(const Trajectory& positions, const UkfConfig& config) {
    config.validate();
    std::size_t n = positions.length();
    if (n < 5) {
        throw std::invalid_argument("ukf_smooth: need at least 5 positions, got " +
                                    std::to_string(n));
    }
    double dt = positions.dt;
    if (dt <= 0.0) throw std::invalid_argument("ukf_smooth: dt must be positive");

    Mat6 q = zero_mat();
    for (std::size_t i = 0; i < kN; ++i) el(q, i, i) = config.process_std[i] * config.process_std[i];
    double r_var = config.measurement_std * config.measurement_std;

    // Initialize from the first measurement and first displacement.
    Vec6 mean{};
    mean[0] = positions.positions[0].x;
    mean[1] = positions.positions[0].y;
    double dx = positions.positions[1].x - positions.positions[0].x;
    double dy = positions.positions[1].y - positions.positions[0].y;
    double v0 = std::hypot(dx, dy) / dt;
    mean[2] = (v0 > 1e-12) ? std::atan2(dy, dx) : 0.0;
    mean[3] = v0;
    Mat6 cov = zero_mat();
    el(cov, 0, 0) = r_var;
    el(cov, 1, 1) = r_var;
    el(cov, 2, 2) = 0.09;
    el(cov, 3, 3) = 1.0;
    el(cov, 4, 4) = 0.0025;
    el(cov, 5, 5) = 0.25;

    std::vector<Vec6> filtered_mean(n), predicted_mean(n);
    std::vector<Mat6> filtered_cov(n), predicted_cov(n), cross_cov(n);
    filtered_mean[0] = mean;
    filtered_cov[0] = cov;

    for (std::size_t t = 1; t < n; ++t) {
        long step = static_cast<long>(t);
        SigmaSet set = sigma_points(mean, cov, config, step);
        std::array<Vec6, 2 * kN + 1> propagated;
        for (std::size_t i = 0; i < set.points.size(); ++i) {
            propagated[i] = propagate(set.points[i], dt);
        }
        Vec6 m_pred{};
        for (std::size_t i = 0; i < set.points.size(); ++i) {
            for (std::size_t r = 0; r < kN; ++r) m_pred[r] += set.wm[i] * propagated[i][r];
        }
        Mat6 p_pred = q;
        Mat6 c = zero_mat();
        for (std::size_t i = 0; i < set.points.size(); ++i) {
            Vec6 dp, df;
            for (std::size_t r = 0; r < kN; ++r) {
                dp[r] = propagated[i][r] - m_pred[r];
                df[r] = set.points[i][r] - mean[r];
            }
            for (std::size_t r = 0; r < kN; ++r) {
                for (std::size_t col = 0; col < kN; ++col) {
                    el(p_pred, r, col) += set.wc[i] * dp[r] * dp[col];
                    el(c, r, col) += set.wc[i] * df[r] * dp[col];
                }
            }
        }
        symmetrize(p_pred);
        predicted_mean[t] = m_pred;
        predicted_cov[t] = p_pred;
        cross_cov[t] = c;

        // Linear position measurement: S = HPH^T + R is the top-left block.
        double s00 = el(p_pred, 0, 0) + r_var;
        double s01 = el(p_pred, 0, 1);
        double s11 = el(p_pred, 1, 1) + r_var;
        double det = s00 * s11 - s01 * s01;
        if (!(det > 0.0)) {
            throw NumericalError("ukf innovation covariance lost positive definiteness", step);
        }
        double i00 = s11 / det, i01 = -s01 / det, i11 = s00 / det;
        std::array<double, 2 * kN> gain{};  // K, 6x2
        for (std::size_t r = 0; r < kN; ++r) {
            double c0 = el(p_pred, r, 0);
            double c1 = el(p_pred, r, 1);
            gain[2 * r] = c0 * i00 + c1 * i01;
            gain[2 * r + 1] = c0 * i01 + c1 * i11;
        }
        double nu0 = positions.positions[t].x - m_pred[0];
        double nu1 = positions.positions[t].y - m_pred[1];
        mean = m_pred;
        for (std::size_t r = 0; r < kN; ++r) mean[r] += gain[2 * r] * nu0 + gain[2 * r + 1] * nu1;

        // Joseph form keeps the updated covariance positive semidefinite.
        Mat6 a = zero_mat();  // I - K H
        for (std::size_t r = 0; r < kN; ++r) el(a, r, r) = 1.0;
        for (std::size_t r = 0; r < kN; ++r) {
            el(a, r, 0) -= gain[2 * r];
            el(a, r, 1) -= gain[2 * r + 1];
        }
        Mat6 ap = zero_mat();
        for (std::size_t r = 0; r < kN; ++r) {
            for (std::size_t col = 0; col < kN; ++col) {
                double sum = 0.0;
                for (std::size_t k = 0; k < kN; ++k) sum += el(a, r, k) * el(p_pred, k, col);
                el(ap, r, col) = sum;
            }
        }
        Mat6 p_new = zero_mat();
        for (std::size_t r = 0; r < kN; ++r) {
            for (std::size_t col = 0; col < kN; ++col) {
                double sum = 0.0;
                for (std::size_t k = 0; k < kN; ++k) sum += el(ap, r, k) * el(a, col, k);
                el(p_new, r, col) = sum;
            }
        }
        // + K R K^T
        for (std::size_t r = 0; r < kN; ++r) {
            for (std::size_t col = 0; col < kN; ++col) {
                el(p_new, r, col) +=
                    r_var * (gain[2 * r] * gain[2 * col] + gain[2 * r + 1] * gain[2 * col + 1]);
            }
        }
        symmetrize(p_new);
        cov = p_new;
        filtered_mean[t] = mean;
        filtered_cov[t] = cov;
    }

    // Backward RTS pass on the stored forward quantities.
    std::vector<Vec6> smoothed_mean(n);
    std::vector<Mat6> smoothed_cov(n);
    smoothed_mean[n - 1] = filtered_mean[n - 1];
    smoothed_cov[n - 1] = filtered_cov[n - 1];
    for (std::size_t ti = n - 1; ti-- > 0;) {
        std::size_t next = ti + 1;
        Mat6 p_pred_lower;
        if (!cholesky(predicted_cov[next], p_pred_lower)) {
            throw NumericalError("ukf predicted covariance lost positive definiteness",
                                 static_cast<long>(next));
        }
        Mat6 g = solve_right(cross_cov[next], p_pred_lower);
        Vec6 dm{};
        for (std::size_t r = 0; r < kN; ++r) dm[r] = smoothed_mean[next][r] - predicted_mean[next][r];
        Vec6 m_s = filtered_mean[ti];
        for (std::size_t r = 0; r < kN; ++r) {
            for (std::size_t k = 0; k < kN; ++k) m_s[r] += el(g, r, k) * dm[k];
        }
        Mat6 dp = zero_mat();
        for (std::size_t r = 0; r < kN; ++r) {
            for (std::size_t col = 0; col < kN; ++col) {
                el(dp, r, col) = el(smoothed_cov[next], r, col) - el(predicted_cov[next], r, col);
            }
        }
        Mat6 gdp = zero_mat();
        for (std::size_t r = 0; r < kN; ++r) {
            for (std::size_t col = 0; col < kN; ++col) {
                double sum = 0.0;
                for (std::size_t k = 0; k < kN; ++k) sum += el(g, r, k) * el(dp, k, col);
                el(gdp, r, col) = sum;
            }
        }
        Mat6 p_s = filtered_cov[ti];
        for (std::size_t r = 0; r < kN; ++r) {
            for (std::size_t col = 0; col < kN; ++col) {
                double sum = 0.0;
                for (std::size_t k = 0; k < kN; ++k) sum += el(gdp, r, k) * el(g, col, k);
                el(p_s, r, col) += sum;
            }
        }
        symmetrize(p_s);
        Mat6 check;
        if (!cholesky(p_s, check)) {
            throw NumericalError("ukf smoothed covariance lost positive definiteness",
                                 static_cast<long>(ti));
        }
        smoothed_mean[ti] = m_s;
        smoothed_cov[ti] = p_s;
    }

    std::vector<Vec2> out(n);
    for (std::size_t t = 0; t < n; ++t) out[t] = {smoothed_mean[t][0], smoothed_mean[t][1]};
    return out;
}

double smoothness_distance(std::span<const Vec2> positions, std::span<const Vec2> path) {
    if (positions.size() != path.size() || positions.empty()) {
        throw std::invalid_argument("smoothness_distance: lengths " +
                                    std::to_string(positions.size()) + " and " +
                                    std::to_string(path.size()) + " differ or are 0");
    }
    auto point_segment = [](const Vec2& p, const Vec2& a, const Vec2& b) {
        double vx = b.x - a.x, vy = b.y - a.y;
        double len2 = vx * vx + vy * vy;
        double t = 0.0;
        if (len2 > 0.0) {
            t = ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2;
            t = std::clamp(t, 0.0, 1.0);
        }
        double cx = a.x + t * vx, cy = a.y + t * vy;
        return std::hypot(p.x - cx, p.y - cy);
    };
    double total = 0.0;
    for (const Vec2& p : positions) {
        double best = std::hypot(p.x - path[0].x, p.y - path[0].y);
        for (std::size_t s = 0; s + 1 < path.size(); ++s) {
            best = std::min(best, point_segment(p, path[s], path[s + 1]));
        }
        total += best;
    }
    return total / static_cast<double>(positions.size());
}

MetricSummary summarize(std::vector<double> samples) {
    MetricSummary s;
    s.count = samples.size();
    if (samples.empty()) return s;
    std::sort(samples.begin(), samples.end());
    auto quantile = [&](double q) {
        double pos = q * static_cast<double>(samples.size() - 1);
        std::size_t lo = static_cast<std::size_t>(pos);
        std::size_t hi = std::min(lo + 1, samples.size() - 1);
        double frac = pos - static_cast<double>(lo);
        return samples[lo] * (1.0 - frac) + samples[hi] * frac;
    };
    double total = 0.0;
    for (double v : samples) total += v;
    s.mean = total / static_cast<double>(samples.size());
    s.median = quantile(0.5);
    s.q1 = quantile(0.25);
    s.q3 = quantile(0.75);
    s.min = samples.front();
    s.max = samples.back();
    return s;
}

namespace {

double median_of(std::vector<double> values) {
    return summarize(std::move(values)).median;
}

ModelReport metrics_for_positions(const std::string& name, bool with_rmse,
                                  const std::vector<std::vector<Vec2>>& predictions,
                                  const std::vector<Trajectory>& validation,
                                  const UkfConfig& config) {
    ModelReport report;
    report.name = name;
    report.has_rmse = with_rmse;
    for (std::size_t i = 0; i < validation.size(); ++i) {
        const std::vector<Vec2>& positions = predictions[i];
        if (with_rmse) {
            report.rmse_per_trajectory.push_back(
                rmse(positions, validation[i].positions));
        }
        Trajectory as_traj;
        as_traj.positions = positions;
        as_traj.dt = validation[i].dt;
        ControlEffort effort = control_effort(as_traj);
        report.median_abs_accel_per_trajectory.push_back(median_of(effort.abs_accel));
        report.median_abs_kappa_per_trajectory.push_back(median_of(effort.abs_kappa));
        report.pooled_abs_accel.insert(report.pooled_abs_accel.end(), effort.abs_accel.begin(),
                                       effort.abs_accel.end());
        report.pooled_abs_kappa.insert(report.pooled_abs_kappa.end(), effort.abs_kappa.begin(),
                                       effort.abs_kappa.end());
        std::vector<Vec2> smoothed = ukf_smooth(as_traj, config);
        report.smoothness_per_trajectory.push_back(smoothness_distance(positions, smoothed));
    }
    if (with_rmse) report.rmse = summarize(report.rmse_per_trajectory);
    report.abs_accel = summarize(report.pooled_abs_accel);
    report.abs_kappa = summarize(report.pooled_abs_kappa);
    report.smoothness = summarize(report.smoothness_per_trajectory);
    return report;
}

}  // namespace

EvalReport evaluate_models(const std::vector<NamedModel>& models,
                           const std::vector<Trajectory>& validation, const UkfConfig& config) {
    config.validate();
    if (validation.empty()) throw std::invalid_argument("evaluate_models: empty validation set");
    if (models.empty()) throw std::invalid_argument("evaluate_models: no models");
    for (const NamedModel& nm : models) {
        if (!nm.model) throw std::invalid_argument("evaluate_models: null model");
        if (nm.model->config.T != validation.front().length()) {
            throw std::invalid_argument("model '" + nm.name + "' expects T " +
                                        std::to_string(nm.model->config.T) +
                                        " but validation trajectories have length " +
                                        std::to_string(validation.front().length()));
        }
        if (std::abs(nm.model->config.dt - validation.front().dt) > 1e-12) {
            throw std::invalid_argument("model '" + nm.name + "' dt does not match the dataset");
        }
    }

    EvalReport report;
    report.ukf = config;
    report.trajectory_count = validation.size();
    for (const NamedModel& nm : models) {
        std::vector<std::vector<Vec2>> predictions;
        predictions.reserve(validation.size());
        for (const Trajectory& traj : validation) predictions.push_back(nm.model->reconstruct(traj));
        report.models.push_back(
            metrics_for_positions(nm.name, true, predictions, validation, config));
    }
    std::vector<std::vector<Vec2>> truth;
    truth.reserve(validation.size());
    for (const Trajectory& traj : validation) truth.push_back(traj.positions);
    report.models.push_back(metrics_for_positions("ground-truth", false, truth, validation, config));
    return report;
}

namespace {

nlohmann::json summary_json(const MetricSummary& s) {
    return {{"mean", s.mean}, {"median", s.median}, {"q1", s.q1},
            {"q3", s.q3},     {"min", s.min},       {"max", s.max},
            {"count", s.count}};
}

}  // namespace

void write_report_json(const EvalReport& report, const std::string& path) {
    nlohmann::json j;
    j["ukf"] = {{"process_std", report.ukf.process_std},
                {"measurement_std", report.ukf.measurement_std},
                {"sigma_scheme", "scaled symmetric 2n+1"},
                {"alpha", report.ukf.alpha},
                {"beta", report.ukf.beta},
                {"kappa", report.ukf.kappa}};
    j["trajectory_count"] = report.trajectory_count;
    j["models"] = nlohmann::json::array();
    for (const ModelReport& m : report.models) {
        nlohmann::json entry;
        entry["name"] = m.name;
        entry["rmse"] = m.has_rmse ? summary_json(m.rmse) : nlohmann::json();
        entry["abs_accel"] = summary_json(m.abs_accel);
        entry["abs_kappa"] = summary_json(m.abs_kappa);
        entry["smoothness"] = summary_json(m.smoothness);
        entry["per_trajectory"] = {{"rmse", m.rmse_per_trajectory},
                                   {"smoothness", m.smoothness_per_trajectory},
                                   {"median_abs_accel", m.median_abs_accel_per_trajectory},
                                   {"median_abs_kappa", m.median_abs_kappa_per_trajectory}};
        j["models"].push_back(std::move(entry));
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << j.dump(2) << '\n';
    if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace pita
