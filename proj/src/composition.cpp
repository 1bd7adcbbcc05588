#include "hologen/composition.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "hologen/errors.hpp"

namespace hologen {

bool is_composition(const Vector& c, double tol) {
    if (c.size() == 0) return false;
    if ((c.array() <= 0.0).any()) return false;
    return std::abs(c.sum() - 1.0) <= tol;
}

Vector clr(const Vector& c) {
    if ((c.array() <= 0.0).any())
        throw std::invalid_argument("clr: composition has a non-positive entry");
    Vector logs = c.array().log();
    return logs.array() - logs.mean();
}

Matrix clr_columns(const Matrix& m) {
    if ((m.array() <= 0.0).any())
        throw std::invalid_argument("clr_columns: matrix has a non-positive entry");
    Matrix logs = m.array().log();
    Eigen::RowVectorXd col_means = logs.colwise().mean();
    logs.rowwise() -= col_means;
    return logs;
}

Vector clr_inv(const Vector& v) {
    if (!v.allFinite())
        throw std::invalid_argument("clr_inv: non-finite entry");
    Vector shifted = v.array() - v.maxCoeff();
    Vector e = shifted.array().exp();
    return e / e.sum();
}

Vector empirical_bayes_smooth(const Vector& counts, const Vector& population_mean, double pi) {
    if (counts.size() != population_mean.size())
        throw std::invalid_argument("empirical_bayes_smooth: size mismatch");
    if ((counts.array() < 0.0).any())
        throw std::invalid_argument("empirical_bayes_smooth: negative count");
    if (pi <= 0.0 || pi > 1.0)
        throw std::invalid_argument("empirical_bayes_smooth: pi must be in (0,1]");
    const double total = counts.sum();
    if (total <= 0.0)
        throw DataError("empirical_bayes_smooth: zero total count");
    return pi * (counts / total) + (1.0 - pi) * population_mean;
}

Vector sample_dirichlet(const Vector& mean, double eta, Rng& rng) {
    if (eta <= 0.0)
        throw std::invalid_argument("sample_dirichlet: eta must be positive");
    Vector draws(mean.size());
    for (Eigen::Index i = 0; i < mean.size(); ++i) {
        const double shape = std::max(eta * mean[i], 1e-12);
        std::gamma_distribution<double> gamma(shape, 1.0);
        draws[i] = std::max(gamma(rng), 1e-300);
    }
    return draws / draws.sum();
}

double bray_curtis(const Vector& a, const Vector& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("bray_curtis: size mismatch");
    const double sa = a.sum(), sb = b.sum();
    if (sa <= 0.0 || sb <= 0.0)
        throw DataError("bray_curtis: all-zero input vector");
    const double shared = a.cwiseMin(b).sum();
    return std::clamp(1.0 - 2.0 * shared / (sa + sb), 0.0, 1.0);
}

double shannon(const Vector& p) {
    double h = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0) h -= p[i] * std::log(p[i]);
    }
    return h;
}

Eigen::VectorXi multinomial_resample(const Vector& c, long depth, Rng& rng) {
    if (depth < 1)
        throw std::invalid_argument("multinomial_resample: depth must be >= 1");
    const Eigen::Index n = c.size();
    Eigen::VectorXi counts = Eigen::VectorXi::Zero(n);
    long remaining = depth;
    double rest = c.sum();
    for (Eigen::Index i = 0; i + 1 < n && remaining > 0; ++i) {
        const double q = rest > 0.0 ? std::clamp(c[i] / rest, 0.0, 1.0) : 0.0;
        std::binomial_distribution<long> bin(remaining, q);
        const long k = bin(rng);
        counts[i] = static_cast<int>(k);
        remaining -= k;
        rest -= c[i];
    }
    if (n > 0) counts[n - 1] += static_cast<int>(remaining);
    return counts;
}

double shannon_of_counts(const Eigen::VectorXi& counts) {
    const double total = counts.cast<double>().sum();
    if (total <= 0.0) return 0.0;
    return shannon(counts.cast<double>() / total);
}

Matrix pcoa(const Matrix& dissimilarity, int k) {
    const Eigen::Index n = dissimilarity.rows();
    if (dissimilarity.cols() != n)
        throw std::invalid_argument("pcoa: matrix must be square");
    if ((dissimilarity - dissimilarity.transpose()).cwiseAbs().maxCoeff() > 1e-8)
        throw std::invalid_argument("pcoa: matrix must be symmetric");
    if (dissimilarity.diagonal().cwiseAbs().maxCoeff() > 1e-12)
        throw std::invalid_argument("pcoa: diagonal must be zero");
    if (k < 1 || k > n - 1)
        throw std::invalid_argument("pcoa: need 1 <= k <= n-1");

    Matrix a = -0.5 * dissimilarity.array().square().matrix();
    Vector row_means = a.rowwise().mean();
    const double grand = row_means.mean();
    a.colwise() -= row_means;
    a.rowwise() -= row_means.transpose();
    a.array() += grand;

    Eigen::SelfAdjointEigenSolver<Matrix> solver(a);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("pcoa: eigendecomposition failed");

    Matrix coords = Matrix::Zero(n, k);
    for (int j = 0; j < k; ++j) {
        const Eigen::Index idx = n - 1 - j;  // eigenvalues come back ascending
        const double lambda = solver.eigenvalues()[idx];
        if (lambda <= 1e-12) continue;
        Vector axis = solver.eigenvectors().col(idx);
        Eigen::Index argmax = 0;
        axis.cwiseAbs().maxCoeff(&argmax);
        if (axis[argmax] < 0.0) axis = -axis;
        coords.col(j) = std::sqrt(lambda) * axis;
    }
    return coords;
}

} // namespace hologen
