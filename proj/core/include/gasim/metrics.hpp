#pragma once

#include <vector>

#include "gasim/types.hpp"

namespace gasim {

/// Length-t_max sequence of population-mean opinions.
using TrendCurve = std::vector<double>;

/// Mean absolute deviation between the two curves.
double delta_bias(const TrendCurve& sim, const TrendCurve& truth);

/// Population variance of the absolute per-step error.
double delta_div(const TrendCurve& sim, const TrendCurve& truth);

/// Pearson correlation; 0 when either series is constant (flagged convention).
double pearson_corr(const TrendCurve& sim, const TrendCurve& truth);

/// Discrete Fréchet distance between the curves seen as 2-D polylines with
/// time normalized to [0, 1] (a single point sits at x = 0). Computed by the
/// standard coupled-traversal dynamic program in O(t_max^2).
double frechet_distance(const TrendCurve& sim, const TrendCurve& truth);

struct TrendMetrics {
    double bias = 0.0;
    double divergence = 0.0;
    double correlation = 0.0;
    double frechet = 0.0;
};

TrendMetrics evaluate_trend(const TrendCurve& sim, const TrendCurve& truth);

}  // namespace gasim
