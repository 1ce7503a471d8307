#pragma once

#include <string>
#include <vector>

namespace pita {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

/// Fixed-length sequence of 2-D positions sampled at a constant time step.
/// After preprocessing the first position is the origin and the initial
/// motion direction is +x.
struct Trajectory {
    std::vector<Vec2> positions;
    double dt = 0.04;
    std::string provenance;

    std::size_t length() const { return positions.size(); }
};

}  // namespace pita
