#include "pita/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "pita/errors.hpp"
#include "pita/random.hpp"

namespace pita {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

double parse_double(const std::string& s, std::size_t line_no) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw IoError("bad numeric field '" + s + "' on line " + std::to_string(line_no));
    }
    return value;
}

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

/// Piecewise-linear profile through `knots` values uniformly spaced over
/// [0, steps); evaluated at every step.
std::vector<double> piecewise_linear_profile(RandomStream& rng, std::size_t steps,
                                             std::size_t knots, double lo, double hi) {
    if (knots < 2) knots = 2;
    std::vector<double> values(knots);
    for (double& v : values) v = rng.uniform(lo, hi);
    std::vector<double> profile(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        double pos = steps > 1 ? static_cast<double>(t) / static_cast<double>(steps - 1) : 0.0;
        double scaled = pos * static_cast<double>(knots - 1);
        std::size_t k = std::min(static_cast<std::size_t>(scaled), knots - 2);
        double frac = scaled - static_cast<double>(k);
        profile[t] = values[k] * (1.0 - frac) + values[k + 1] * frac;
    }
    return profile;
}

}  // namespace

IngestResult ingest_csv(const std::string& path, double sample_rate_hz) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");

    std::string header;
    if (!std::getline(in, header)) throw IoError("'" + path + "' is empty");
    if (!header.empty() && header.back() == '\r') header.pop_back();
    std::vector<std::string> columns = split_line(header);

    auto column_index = [&](const std::string& name) -> std::size_t {
        auto it = std::find(columns.begin(), columns.end(), name);
        if (it == columns.end()) {
            throw IoError("'" + path + "' is missing required column '" + name + "'");
        }
        return static_cast<std::size_t>(it - columns.begin());
    };
    std::size_t id_col = column_index("trackId");
    std::size_t frame_col = column_index("frame");
    std::size_t x_col = column_index("xCenter");
    std::size_t y_col = column_index("yCenter");

    std::map<std::int64_t, RawTrack> by_id;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields = split_line(line);
        if (fields.size() < columns.size()) {
            throw IoError("line " + std::to_string(line_no) + " has " +
                          std::to_string(fields.size()) + " fields, expected " +
                          std::to_string(columns.size()));
        }
        std::int64_t id = static_cast<std::int64_t>(parse_double(fields[id_col], line_no));
        RawTrack& track = by_id[id];
        track.track_id = id;
        track.sample_rate_hz = sample_rate_hz;
        track.frames.push_back(static_cast<std::int64_t>(parse_double(fields[frame_col], line_no)));
        track.positions.push_back({parse_double(fields[x_col], line_no),
                                   parse_double(fields[y_col], line_no)});
    }

    IngestResult result;
    for (auto& [id, track] : by_id) {
        // Order samples by frame, then require unit stride.
        std::vector<std::size_t> order(track.length());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return track.frames[a] < track.frames[b]; });
        RawTrack sorted;
        sorted.track_id = track.track_id;
        sorted.sample_rate_hz = track.sample_rate_hz;
        for (std::size_t i : order) {
            sorted.frames.push_back(track.frames[i]);
            sorted.positions.push_back(track.positions[i]);
        }
        bool has_gap = false;
        for (std::size_t i = 1; i < sorted.length(); ++i) {
            if (sorted.frames[i] != sorted.frames[i - 1] + 1) {
                has_gap = true;
                break;
            }
        }
        if (has_gap) {
            ++result.dropped_gap_tracks;
        } else {
            result.tracks.push_back(std::move(sorted));
        }
    }
    return result;
}

namespace {

Trajectory anchor_positions(std::vector<Vec2> positions, double dt, std::string provenance,
                            bool* moved) {
    Vec2 origin = positions.front();
    for (Vec2& p : positions) {
        p.x -= origin.x;
        p.y -= origin.y;
    }
    // First displacement from the start that clears the noise threshold fixes
    // the initial motion direction.
    *moved = false;
    double cos_r = 1.0, sin_r = 0.0;
    for (std::size_t i = 1; i < positions.size(); ++i) {
        double norm = std::hypot(positions[i].x, positions[i].y);
        if (norm > kHeadingDisplacement) {
            cos_r = positions[i].x / norm;
            sin_r = positions[i].y / norm;
            *moved = true;
            break;
        }
    }
    if (*moved) {
        for (Vec2& p : positions) {
            double x = p.x * cos_r + p.y * sin_r;
            double y = -p.x * sin_r + p.y * cos_r;
            p.x = x;
            p.y = y;
        }
    }
    Trajectory out;
    out.positions = std::move(positions);
    out.dt = dt;
    out.provenance = std::move(provenance);
    return out;
}

}  // namespace

PreprocessResult preprocess(const RawTrack& track, std::size_t T) {
    PreprocessResult result;
    if (track.length() < T || T == 0) {
        result.reason = RejectReason::TooShort;
        return result;
    }
    std::vector<Vec2> cut(track.positions.begin(),
                          track.positions.begin() + static_cast<std::ptrdiff_t>(T));
    bool moved = false;
    Trajectory anchored = anchor_positions(std::move(cut), 1.0 / track.sample_rate_hz,
                                           "track:" + std::to_string(track.track_id), &moved);
    if (!moved) {
        result.reason = RejectReason::Standstill;
        return result;
    }
    result.accepted = true;
    result.trajectory = std::move(anchored);
    return result;
}

Trajectory anchor_trajectory(const Trajectory& trajectory) {
    bool moved = false;
    return anchor_positions(trajectory.positions, trajectory.dt, trajectory.provenance, &moved);
}

void SyntheticSpec::validate() const {
    if (duration_steps < 5) throw std::invalid_argument("duration_steps must be at least 5");
    if (dt <= 0.0) throw std::invalid_argument("dt must be positive");
    if (speed_min > speed_max || kappa_min > kappa_max || accel_min > accel_max) {
        throw std::invalid_argument("synthetic spec ranges must be nonempty");
    }
    if (noise_std < 0.0) throw std::invalid_argument("noise_std must be nonnegative");
}

std::vector<SyntheticTrajectory> generate_synthetic_full(const SyntheticSpec& spec) {
    spec.validate();
    RandomStream rng(spec.seed);
    std::vector<SyntheticTrajectory> out;
    out.reserve(spec.count);
    for (std::size_t i = 0; i < spec.count; ++i) {
        double v0 = rng.uniform(spec.speed_min, spec.speed_max);
        std::vector<double> kappa = piecewise_linear_profile(rng, spec.duration_steps,
                                                             spec.kappa_waypoints, spec.kappa_min,
                                                             spec.kappa_max);
        std::vector<double> accel = piecewise_linear_profile(rng, spec.duration_steps,
                                                             spec.accel_waypoints, spec.accel_min,
                                                             spec.accel_max);
        InputTrajectory inputs;
        inputs.dt = spec.dt;
        inputs.inputs.resize(spec.duration_steps);
        for (std::size_t t = 0; t < spec.duration_steps; ++t) inputs.inputs[t] = {kappa[t], accel[t]};

        // The trajectory is the initial position plus the first T-1 states,
        // so positions[0] is exactly the roll-out start.
        KbmState initial{0.0, 0.0, 0.0, v0};
        InputTrajectory head;
        head.dt = spec.dt;
        head.inputs.assign(inputs.inputs.begin(), inputs.inputs.end() - 1);
        StateTrajectory rolled = rk4_rollout(initial, head);

        StateTrajectory states;
        states.dt = spec.dt;
        states.states.push_back(initial);
        states.states.insert(states.states.end(), rolled.states.begin(), rolled.states.end());

        std::vector<Vec2> positions(spec.duration_steps);
        for (std::size_t t = 0; t < spec.duration_steps; ++t) {
            positions[t] = {states.states[t].x, states.states[t].y};
        }
        for (Vec2& p : positions) {
            p.x += rng.gaussian(0.0, spec.noise_std);
            p.y += rng.gaussian(0.0, spec.noise_std);
        }

        Trajectory noised;
        noised.positions = std::move(positions);
        noised.dt = spec.dt;
        noised.provenance = "synthetic:" + std::to_string(i);
        Trajectory anchored = anchor_trajectory(noised);

        // Keep the underlying exact states in the anchored frame as well, by
        // recovering the rigid transform anchor_positions applied (noised
        // first point, first over-threshold displacement).
        Vec2 shift{noised.positions.front().x, noised.positions.front().y};
        double cos_r = 1.0, sin_r = 0.0;
        for (std::size_t t = 1; t < noised.positions.size(); ++t) {
            double px = noised.positions[t].x - shift.x;
            double py = noised.positions[t].y - shift.y;
            double norm = std::hypot(px, py);
            if (norm > kHeadingDisplacement) {
                cos_r = px / norm;
                sin_r = py / norm;
                break;
            }
        }
        double rot = std::atan2(sin_r, cos_r);
        StateTrajectory anchored_states;
        anchored_states.dt = spec.dt;
        anchored_states.states.resize(spec.duration_steps);
        for (std::size_t t = 0; t < spec.duration_steps; ++t) {
            const KbmState& s = states.states[t];
            double px = s.x - shift.x;
            double py = s.y - shift.y;
            anchored_states.states[t] = {px * cos_r + py * sin_r, -px * sin_r + py * cos_r,
                                         s.theta - rot, s.v};
        }

        out.push_back({std::move(anchored), std::move(anchored_states), std::move(inputs)});
    }
    return out;
}

std::vector<Trajectory> generate_synthetic(const SyntheticSpec& spec) {
    std::vector<SyntheticTrajectory> full = generate_synthetic_full(spec);
    std::vector<Trajectory> out;
    out.reserve(full.size());
    for (SyntheticTrajectory& s : full) out.push_back(std::move(s.trajectory));
    return out;
}

std::pair<std::vector<Trajectory>, std::vector<Trajectory>> split(
    const std::vector<Trajectory>& trajectories, double val_fraction, std::uint64_t seed) {
    if (!(val_fraction > 0.0) || !(val_fraction < 1.0)) {
        throw std::invalid_argument("val_fraction must be in (0, 1), got " +
                                    std::to_string(val_fraction));
    }
    std::vector<std::size_t> order(trajectories.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    RandomStream rng(seed);
    rng.shuffle(order);
    std::size_t val_count = static_cast<std::size_t>(
        std::llround(val_fraction * static_cast<double>(trajectories.size())));
    val_count = std::min(val_count, trajectories.size());
    std::vector<Trajectory> train_set, val_set;
    for (std::size_t i = 0; i < order.size(); ++i) {
        (i < val_count ? val_set : train_set).push_back(trajectories[order[i]]);
    }
    return {std::move(train_set), std::move(val_set)};
}

void write_csv(const std::string& path, const std::vector<Trajectory>& trajectories) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << "trackId,frame,xCenter,yCenter\n";
    for (std::size_t id = 0; id < trajectories.size(); ++id) {
        const Trajectory& traj = trajectories[id];
        for (std::size_t t = 0; t < traj.length(); ++t) {
            out << id << ',' << t << ',' << format_double(traj.positions[t].x) << ','
                << format_double(traj.positions[t].y) << '\n';
        }
    }
    if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace pita
