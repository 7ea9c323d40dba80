#include "gasim/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace gasim {

namespace {

void check_lengths(const TrendCurve& a, const TrendCurve& b, const char* what) {
    if (a.size() != b.size()) throw Error(std::string(what) + ": curve length mismatch");
    if (a.empty()) throw Error(std::string(what) + ": empty curves");
}

}  // namespace

double delta_bias(const TrendCurve& sim, const TrendCurve& truth) {
    check_lengths(sim, truth, "delta_bias");
    double sum = 0.0;
    for (std::size_t t = 0; t < sim.size(); ++t) sum += std::abs(truth[t] - sim[t]);
    return sum / static_cast<double>(sim.size());
}

double delta_div(const TrendCurve& sim, const TrendCurve& truth) {
    check_lengths(sim, truth, "delta_div");
    const double bias = delta_bias(sim, truth);
    double sum = 0.0;
    for (std::size_t t = 0; t < sim.size(); ++t) {
        const double err = std::abs(truth[t] - sim[t]) - bias;
        sum += err * err;
    }
    return sum / static_cast<double>(sim.size());
}

double pearson_corr(const TrendCurve& sim, const TrendCurve& truth) {
    check_lengths(sim, truth, "pearson_corr");
    if (sim.size() < 2) throw Error("pearson_corr: need at least two points");
    const std::size_t t = sim.size();
    double ms = 0.0, mt = 0.0;
    for (std::size_t i = 0; i < t; ++i) {
        ms += sim[i];
        mt += truth[i];
    }
    ms /= static_cast<double>(t);
    mt /= static_cast<double>(t);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < t; ++i) {
        const double dx = truth[i] - mt;
        const double dy = sim[i] - ms;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

double frechet_distance(const TrendCurve& sim, const TrendCurve& truth) {
    check_lengths(sim, truth, "frechet_distance");
    const int n = static_cast<int>(sim.size());
    const auto point = [n](const TrendCurve& c, int i) {
        const double x = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
        return std::pair<double, double>{x, c[i]};
    };
    const auto dist = [&](int i, int j) {
        const auto [ax, ay] = point(sim, i);
        const auto [bx, by] = point(truth, j);
        return std::hypot(ax - bx, ay - by);
    };

    // d[i][j] = max(dist(i, j), min(d[i-1][j], d[i][j-1], d[i-1][j-1]));
    // one row is kept at a time.
    std::vector<double> prev(n), curr(n);
    prev[0] = dist(0, 0);
    for (int j = 1; j < n; ++j) prev[j] = std::max(prev[j - 1], dist(0, j));
    for (int i = 1; i < n; ++i) {
        curr[0] = std::max(prev[0], dist(i, 0));
        for (int j = 1; j < n; ++j) {
            const double reach = std::min({prev[j], curr[j - 1], prev[j - 1]});
            curr[j] = std::max(reach, dist(i, j));
        }
        std::swap(prev, curr);
    }
    return prev[n - 1];
}

TrendMetrics evaluate_trend(const TrendCurve& sim, const TrendCurve& truth) {
    TrendMetrics m;
    m.bias = delta_bias(sim, truth);
    m.divergence = delta_div(sim, truth);
    m.correlation = pearson_corr(sim, truth);
    m.frechet = frechet_distance(sim, truth);
    return m;
}

}  // namespace gasim
