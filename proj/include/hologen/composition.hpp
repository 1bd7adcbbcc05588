#ifndef HOLOGEN_COMPOSITION_HPP
#define HOLOGEN_COMPOSITION_HPP

#include <Eigen/Dense>

#include "hologen/rng.hpp"

namespace hologen {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Strictly positive entries summing to 1 within tol.
bool is_composition(const Vector& c, double tol = 1e-9);

/// Centered log-ratio: ln(c_i) - mean_j ln(c_j). Output sums to zero.
Vector clr(const Vector& c);

/// Column-wise CLR of a matrix whose columns are compositions.
Matrix clr_columns(const Matrix& m);

/// Inverse CLR (softmax). Translation-invariant; guarded against overflow.
Vector clr_inv(const Vector& v);

/// pi * counts/total + (1-pi) * population_mean. Equals the Dirichlet
/// posterior mean with prior scale S when pi = total/(total+S).
Vector empirical_bayes_smooth(const Vector& counts, const Vector& population_mean, double pi);

/// Draw from Dirichlet(eta * mean) via normalized Gamma variates. Gamma
/// shapes are floored at 1e-12 and draws at 1e-300 so the result stays
/// strictly positive.
Vector sample_dirichlet(const Vector& mean, double eta, Rng& rng);

/// 1 - 2*sum(min(a,b)) / (sum(a)+sum(b)), in [0,1].
double bray_curtis(const Vector& a, const Vector& b);

/// Shannon index -sum p ln p with the convention 0 ln 0 = 0 (natural log).
double shannon(const Vector& p);

/// Multinomial(depth, c); counts sum exactly to depth.
Eigen::VectorXi multinomial_resample(const Vector& c, long depth, Rng& rng);

/// Shannon index of counts rescaled to relative abundances.
double shannon_of_counts(const Eigen::VectorXi& counts);

/// Classical scaling (principal coordinates) of a symmetric dissimilarity
/// matrix with zero diagonal. Coordinates are ordered by descending
/// eigenvalue; axes with non-positive eigenvalues are zeroed. Eigenvector
/// signs are fixed so the entry of largest magnitude is positive.
Matrix pcoa(const Matrix& dissimilarity, int k);

} // namespace hologen

#endif
