#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "pita/tensor.hpp"

namespace pita::testing {

/// Central finite differences of f over every coordinate of every value
/// tensor. The callback rebuilds its computation from the perturbed values,
/// so the oracle stays independent of the tape's backward pass.
inline std::vector<Tensor> fd_gradients(
    const std::function<double(const std::vector<Tensor>&)>& f, std::vector<Tensor> values,
    double step = 1e-6) {
    std::vector<Tensor> grads;
    grads.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) grads.push_back(Tensor::zeros(values[i].shape()));
    for (std::size_t i = 0; i < values.size(); ++i) {
        for (std::size_t k = 0; k < values[i].numel(); ++k) {
            double original = values[i][k];
            values[i][k] = original + step;
            double hi = f(values);
            values[i][k] = original - step;
            double lo = f(values);
            values[i][k] = original;
            grads[i][k] = (hi - lo) / (2.0 * step);
        }
    }
    return grads;
}

/// Relative error with denominator max(1, |analytic|).
inline double max_rel_error(const std::vector<Tensor>& analytic,
                            const std::vector<Tensor>& numeric) {
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        for (std::size_t k = 0; k < analytic[i].numel(); ++k) {
            double g = analytic[i][k];
            double denom = std::max(1.0, std::abs(g));
            worst = std::max(worst, std::abs(g - numeric[i][k]) / denom);
        }
    }
    return worst;
}

}  // namespace pita::testing
