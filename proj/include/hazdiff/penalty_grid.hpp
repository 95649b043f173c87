#pragma once

#include "hazdiff/error.hpp"

#include <cmath>
#include <cstddef>
#include <vector>

namespace hazdiff {

/// Geometric grid from lmax down to lmax * ratio.
inline std::vector<double> lambda_grid(double lmax, int n_lambdas, double ratio) {
    if (n_lambdas < 2) throw Error(ErrorCode::InvalidArgument, "n_lambdas must be at least 2");
    if (!(ratio > 0.0 && ratio <= 1.0)) throw Error(ErrorCode::InvalidArgument, "lambda_min_ratio must be in (0, 1]");
    std::vector<double> grid(static_cast<std::size_t>(n_lambdas));
    for (int m = 0; m < n_lambdas; ++m) {
        grid[static_cast<std::size_t>(m)] = lmax * std::pow(ratio, static_cast<double>(m) / (n_lambdas - 1));
    }
    return grid;
}

}  // namespace hazdiff
