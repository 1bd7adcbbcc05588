#ifndef HOLOGEN_STATS_HPP
#define HOLOGEN_STATS_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

namespace hologen::stats {

inline double mean(const Eigen::VectorXd& x) {
    return x.size() == 0 ? 0.0 : x.mean();
}

/// Sample variance (n-1 denominator); 0 for fewer than two values.
inline double variance(const Eigen::VectorXd& x) {
    const auto n = x.size();
    if (n < 2) return 0.0;
    const double m = x.mean();
    return (x.array() - m).square().sum() / static_cast<double>(n - 1);
}

inline double sd(const Eigen::VectorXd& x) { return std::sqrt(variance(x)); }

inline double covariance(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    const auto n = x.size();
    if (n < 2 || y.size() != n) return 0.0;
    const double mx = x.mean(), my = y.mean();
    return ((x.array() - mx) * (y.array() - my)).sum() / static_cast<double>(n - 1);
}

inline double pearson(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    const double vx = variance(x), vy = variance(y);
    if (vx <= 0.0 || vy <= 0.0) return 0.0;
    return covariance(x, y) / std::sqrt(vx * vy);
}

inline double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Zero mean, unit variance; all-equal input maps to all zeros.
inline Eigen::VectorXd standardize(const Eigen::VectorXd& x) {
    const double s = sd(x);
    if (s <= 0.0) return Eigen::VectorXd::Zero(x.size());
    return (x.array() - x.mean()) / s;
}

} // namespace hologen::stats

#endif
