#pragma once

#include <vector>

namespace txsched {

struct FitSample {
    double samples = 0.0;         // >= 1
    double observed_error = 0.0;  // >= 0
};

struct FitResult {
    double amplitude = 0.0;  // a >= 0
    double decay = 0.0;      // b >= 0
    double rmse = 0.0;
};

/// Least-squares fit of amplitude * samples^(-decay) to the observations,
/// on the plain (non-log) residual. Initialized by log-log linear regression
/// when every error is positive, otherwise by a coarse decay grid; refined by
/// additively damped Gauss-Newton. Needs at least two distinct sample counts.
FitResult fit_power_law(const std::vector<FitSample>& points);

}  // namespace txsched
