#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "gasim/gmp.hpp"
#include "gasim/parallel.hpp"

namespace gasim {

namespace {

/// Linear interpolation of the global per-step statistic across steps without
/// observers; edge gaps hold the nearest defined value.
void fill_gaps(std::vector<double>& values, const std::vector<bool>& defined) {
    const int t = static_cast<int>(values.size());
    int prev = -1;
    for (int i = 0; i < t; ++i) {
        if (!defined[i]) continue;
        if (prev == -1) {
            for (int j = 0; j < i; ++j) values[j] = values[i];
        } else {
            for (int j = prev + 1; j < i; ++j) {
                const double frac = static_cast<double>(j - prev) / (i - prev);
                values[j] = values[prev] + frac * (values[i] - values[prev]);
            }
        }
        prev = i;
    }
    if (prev == -1) return;
    for (int j = prev + 1; j < t; ++j) values[j] = values[prev];
}

}  // namespace

Matrix interpolate_trajectories(const SparseObservations& observations, int t_max, Rng rng) {
    const int n = static_cast<int>(observations.size());
    if (t_max < 1) throw Error("interpolate_trajectories: t_max must be >= 1");

    std::vector<std::vector<std::pair<int, double>>> sorted(n);
    for (int i = 0; i < n; ++i) {
        if (observations[i].empty())
            throw Error("interpolate_trajectories: agent " + std::to_string(i) +
                        " has no observations");
        sorted[i] = observations[i];
        std::sort(sorted[i].begin(), sorted[i].end());
        for (const auto& [step, value] : sorted[i]) {
            if (step < 0 || step >= t_max)
                throw Error("interpolate_trajectories: observation step out of range");
            (void)value;
        }
    }

    // Global mean / population std per step over the agents observed there.
    std::vector<double> mean(t_max, 0.0), stddev(t_max, 0.0);
    std::vector<int> count(t_max, 0);
    for (const auto& obs : sorted)
        for (const auto& [step, value] : obs) {
            mean[step] += value;
            ++count[step];
        }
    std::vector<bool> defined(t_max, false);
    for (int s = 0; s < t_max; ++s) {
        if (count[s] > 0) {
            mean[s] /= count[s];
            defined[s] = true;
        }
    }
    for (const auto& obs : sorted)
        for (const auto& [step, value] : obs) stddev[step] += (value - mean[step]) * (value - mean[step]);
    for (int s = 0; s < t_max; ++s)
        if (count[s] > 0) stddev[s] = std::sqrt(stddev[s] / count[s]);
    fill_gaps(mean, defined);
    fill_gaps(stddev, defined);

    Matrix out(n, t_max);
    for (int i = 0; i < n; ++i) {
        const auto& obs = sorted[i];
        Rng agent_rng = rng.derive(0xA11CE, static_cast<std::uint64_t>(i));
        std::size_t hi = 0;  // first observation with step >= s
        for (int s = 0; s < t_max; ++s) {
            while (hi < obs.size() && obs[hi].first < s) ++hi;
            if (hi < obs.size() && obs[hi].first == s) {
                out(i, s) = obs[hi].second;  // observed entries kept verbatim
                continue;
            }
            double linear;
            if (hi == 0) {
                linear = obs.front().second;  // constant edge extrapolation
            } else if (hi == obs.size()) {
                linear = obs.back().second;
            } else {
                const auto& lo = obs[hi - 1];
                const auto& up = obs[hi];
                const double frac = static_cast<double>(s - lo.first) / (up.first - lo.first);
                linear = lo.second + frac * (up.second - lo.second);
            }
            const double draw =
                OpinionValue::clamp(agent_rng.normal(mean[s], stddev[s]));
            out(i, s) = 0.5 * linear + 0.5 * draw;
        }
    }
    return out;
}

KMeansResult cluster_users(const Matrix& points, int k, Rng rng, int max_iters) {
    const int n = static_cast<int>(points.rows());
    const int d = static_cast<int>(points.cols());
    if (n < k) throw Error("cluster_users: fewer points than clusters");
    if (k < 1) throw Error("cluster_users: k must be >= 1");

    // k-means++ seeding.
    Matrix centroids(k, d);
    std::vector<double> dist2(n, std::numeric_limits<double>::infinity());
    const int first = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n)));
    centroids.row(0) = points.row(first);
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            const double d2 = (points.row(i) - centroids.row(c - 1)).squaredNorm();
            dist2[i] = std::min(dist2[i], d2);
            total += dist2[i];
        }
        int pick = 0;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            for (int i = 0; i < n; ++i) {
                acc += dist2[i];
                if (acc >= target) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n)));
        }
        centroids.row(c) = points.row(pick);
    }

    KMeansResult result;
    result.assignments.assign(n, -1);
    const Vector point_sq = points.rowwise().squaredNorm();

    for (int iter = 0; iter < max_iters; ++iter) {
        // Assignment via ||x||^2 - 2 x.c + ||c||^2; ties go to the lower index.
        const Vector centroid_sq = centroids.rowwise().squaredNorm();
        Matrix cross = points * centroids.transpose();  // n x k
        bool changed = false;
        double inertia = 0.0;
        std::vector<int> next(n);
        parallel_for(n, [&](int i) {
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                const double d2 = point_sq(i) - 2.0 * cross(i, c) + centroid_sq(c);
                if (d2 < best_d) {
                    best_d = d2;
                    best = c;
                }
            }
            next[i] = best;
        });
        for (int i = 0; i < n; ++i) {
            inertia += std::max(0.0, point_sq(i) - 2.0 * cross(i, next[i]) +
                                         centroid_sq(next[i]));
            if (next[i] != result.assignments[i]) changed = true;
        }
        result.assignments = std::move(next);
        result.inertia = inertia;
        result.inertia_history.push_back(inertia);
        result.iterations = iter + 1;
        if (!changed && iter > 0) break;

        // Update step; an emptied cluster adopts the point farthest from its
        // current centroid.
        Matrix sums = Matrix::Zero(k, d);
        std::vector<int> sizes(k, 0);
        for (int i = 0; i < n; ++i) {
            sums.row(result.assignments[i]) += points.row(i);
            ++sizes[result.assignments[i]];
        }
        for (int c = 0; c < k; ++c) {
            if (sizes[c] > 0) {
                centroids.row(c) = sums.row(c) / sizes[c];
            } else {
                int farthest = 0;
                double best = -1.0;
                for (int i = 0; i < n; ++i) {
                    const double d2 =
                        (points.row(i) - centroids.row(result.assignments[i])).squaredNorm();
                    if (d2 > best) {
                        best = d2;
                        farthest = i;
                    }
                }
                centroids.row(c) = points.row(farthest);
            }
        }
        if (!changed) break;
    }
    result.centroids = std::move(centroids);
    return result;
}

}  // namespace gasim
