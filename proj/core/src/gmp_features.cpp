#include <cmath>

#include "gasim/gmp.hpp"
#include "gasim/parallel.hpp"

namespace gasim {

NeighborTensor build_neighbor_tensor(const Matrix& opinions, const SocialGraph& graph) {
    if (opinions.cols() < 1) throw Error("build_neighbor_tensor: history is empty");
    const int n = static_cast<int>(opinions.rows());
    const int t = static_cast<int>(opinions.cols());
    NeighborTensor tensor(n, graph.max_degree(), t);
    for (int i = 0; i < n; ++i) {
        const auto nbrs = graph.neighbors(i);  // ascending id order
        for (int j = 0; j < static_cast<int>(nbrs.size()); ++j) {
            tensor.mask()(i, j) = 1.0;
            for (int s = 0; s < t; ++s) tensor.value(i, j, s) = opinions(nbrs[j], s);
        }
    }
    return tensor;
}

Matrix individual_features(const Matrix& opinions) {
    if (opinions.cols() < 1) throw Error("individual_features: history is empty");
    const int n = static_cast<int>(opinions.rows());
    const int t = static_cast<int>(opinions.cols());
    Matrix phi(n, 5);
    parallel_for(n, [&](int i) {
        const auto row = opinions.row(i);
        const double mean = row.mean();
        const double var = (row.array() - mean).square().sum() / t;
        phi(i, 0) = mean;
        phi(i, 1) = std::sqrt(std::max(0.0, var));
        phi(i, 2) = row.maxCoeff();
        phi(i, 3) = row.minCoeff();
        phi(i, 4) = opinions(i, t - 1);
    });
    return phi;
}

namespace {

/// Pearson correlation of two equal-length series; NaN-free: returns 0 when
/// either series is constant or has a single sample.
double pearson_or_zero(const Eigen::Ref<const Eigen::RowVectorXd>& x,
                       const Eigen::Ref<const Eigen::RowVectorXd>& y) {
    const int t = static_cast<int>(x.size());
    if (t < 2) return 0.0;
    const double mx = x.mean();
    const double my = y.mean();
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (int s = 0; s < t; ++s) {
        const double dx = x(s) - mx;
        const double dy = y(s) - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace

Matrix neighbor_features(const Matrix& opinions, const NeighborTensor& neighbors) {
    const int n = neighbors.n();
    const int m = neighbors.m();
    const int t = neighbors.t();
    if (opinions.rows() != n || opinions.cols() != t)
        throw Error("neighbor_features: tensor and history shapes disagree");

    Matrix phi = Matrix::Zero(n, 4);
    parallel_for(n, [&](int i) {
        int deg = 0;
        for (int j = 0; j < m; ++j)
            if (neighbors.mask()(i, j) != 0.0) ++deg;
        if (deg == 0) return;

        double sum = 0.0;
        for (int j = 0; j < m; ++j) {
            if (neighbors.mask()(i, j) == 0.0) continue;
            for (int s = 0; s < t; ++s) sum += neighbors.value(i, j, s);
        }
        const double mean = sum / (static_cast<double>(deg) * t);

        double sq = 0.0;
        double sim_sum = 0.0;
        Eigen::RowVectorXd nbr_row(t);
        for (int j = 0; j < m; ++j) {
            if (neighbors.mask()(i, j) == 0.0) continue;
            for (int s = 0; s < t; ++s) {
                const double v = neighbors.value(i, j, s);
                sq += (v - mean) * (v - mean);
                nbr_row(s) = v;
            }
            sim_sum += pearson_or_zero(opinions.row(i), nbr_row);
        }
        const double stddev = std::sqrt(std::max(0.0, sq / (static_cast<double>(deg) * t)));
        const double sim = sim_sum / deg;
        phi(i, 0) = mean;
        phi(i, 1) = stddev;
        phi(i, 2) = sim;
        phi(i, 3) = sim / (1.0 + stddev);
    });
    return phi;
}

Matrix neighbor_features_adjacency(const Matrix& opinions, const SocialGraph& graph) {
    const int n = static_cast<int>(opinions.rows());
    const int t = static_cast<int>(opinions.cols());
    if (t < 1) throw Error("neighbor_features_adjacency: history is empty");

    Matrix phi = Matrix::Zero(n, 4);
    parallel_for(n, [&](int i) {
        const auto nbrs = graph.neighbors(i);
        const int deg = static_cast<int>(nbrs.size());
        if (deg == 0) return;

        double sum = 0.0;
        for (int j : nbrs) sum += opinions.row(j).sum();
        const double mean = sum / (static_cast<double>(deg) * t);

        double sq = 0.0;
        double sim_sum = 0.0;
        for (int j : nbrs) {
            sq += (opinions.row(j).array() - mean).square().sum();
            sim_sum += pearson_or_zero(opinions.row(i), opinions.row(j));
        }
        const double stddev = std::sqrt(std::max(0.0, sq / (static_cast<double>(deg) * t)));
        const double sim = sim_sum / deg;
        phi(i, 0) = mean;
        phi(i, 1) = stddev;
        phi(i, 2) = sim;
        phi(i, 3) = sim / (1.0 + stddev);
    });
    return phi;
}

Matrix dynamic_features(const Matrix& opinions, const SocialGraph& graph) {
    Matrix phi(opinions.rows(), 9);
    phi.leftCols(5) = individual_features(opinions);
    phi.rightCols(4) = neighbor_features_adjacency(opinions, graph);
    return phi;
}

}  // namespace gasim
