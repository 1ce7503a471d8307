#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pita/dynamics.hpp"
#include "pita/trajectory.hpp"

namespace pita {

/// One vehicle track as ingested: frame-indexed positions in meters.
struct RawTrack {
    std::int64_t track_id = 0;
    std::vector<std::int64_t> frames;
    std::vector<Vec2> positions;
    double sample_rate_hz = 25.0;

    std::size_t length() const { return frames.size(); }
};

struct IngestResult {
    std::vector<RawTrack> tracks;
    std::size_t dropped_gap_tracks = 0;  // tracks rejected for non-unit frame strides
};

/// Reads a tracks CSV (header row with at least trackId, frame, xCenter,
/// yCenter). Samples are grouped per track and ordered by frame; tracks whose
/// frame sequence has gaps are dropped and counted.
IngestResult ingest_csv(const std::string& path, double sample_rate_hz = 25.0);

enum class RejectReason { TooShort, Standstill };

struct PreprocessResult {
    bool accepted = false;
    Trajectory trajectory;
    RejectReason reason = RejectReason::TooShort;
};

/// Displacements below this are considered noise when fixing the initial
/// motion direction.
inline constexpr double kHeadingDisplacement = 0.05;

/// Cuts to the first T samples, translates the start to the origin and
/// rotates the initial motion direction onto +x. Tracks shorter than T or
/// that never move kHeadingDisplacement from the start are rejected.
PreprocessResult preprocess(const RawTrack& track, std::size_t T);

/// Re-anchors an existing trajectory (translate + rotate only).
Trajectory anchor_trajectory(const Trajectory& trajectory);

struct SyntheticSpec {
    std::size_t count = 500;
    std::size_t duration_steps = 50;
    double dt = 0.04;
    double speed_min = 3.0;   // m/s
    double speed_max = 8.0;
    double kappa_min = -0.25;  // 1/m
    double kappa_max = 0.25;
    std::size_t kappa_waypoints = 4;  // piecewise-linear profile knots
    double accel_min = -1.5;  // m/s^2
    double accel_max = 1.5;
    std::size_t accel_waypoints = 3;
    double noise_std = 0.0;  // i.i.d. position noise, meters
    std::uint64_t seed = 1;

    void validate() const;
};

/// A generated trajectory together with the exact states and inputs it was
/// rolled out from (before noise), kept for self-checks and manifests.
struct SyntheticTrajectory {
    Trajectory trajectory;
    StateTrajectory states;
    InputTrajectory inputs;
};

std::vector<SyntheticTrajectory> generate_synthetic_full(const SyntheticSpec& spec);

/// KBM roll-outs of smooth random control profiles, noised and re-anchored.
std::vector<Trajectory> generate_synthetic(const SyntheticSpec& spec);

/// Deterministic split by whole trajectory; both parts together restore the
/// input multiset.
std::pair<std::vector<Trajectory>, std::vector<Trajectory>> split(
    const std::vector<Trajectory>& trajectories, double val_fraction, std::uint64_t seed);

/// Writes trajectories in the ingestion CSV schema (trackId, frame, xCenter,
/// yCenter) so generated data round-trips through ingest_csv.
void write_csv(const std::string& path, const std::vector<Trajectory>& trajectories);

}  // namespace pita
