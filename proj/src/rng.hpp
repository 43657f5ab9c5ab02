#pragma once

#include <Eigen/Dense>
#include <random>

namespace ffdn {

using Rng = std::mt19937_64;

inline Eigen::VectorXd gaussian_vector(int n, Rng& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = dist(rng);
    return v;
}

// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
// R diagonal signs folded into Q so the distribution is uniform.
inline Eigen::MatrixXd random_orthogonal(int n, Rng& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Eigen::MatrixXd g(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) g(i, j) = dist(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ();
    Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < n; ++j)
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    return q;
}

inline Eigen::VectorXd random_unit_vector(int n, Rng& rng) {
    Eigen::VectorXd v = gaussian_vector(n, rng);
    while (v.norm() < 1e-12) v = gaussian_vector(n, rng);
    return v / v.norm();
}

}  // namespace ffdn
