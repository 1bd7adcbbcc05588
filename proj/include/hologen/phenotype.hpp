#ifndef HOLOGEN_PHENOTYPE_HPP
#define HOLOGEN_PHENOTYPE_HPP

#include <Eigen/Dense>
#include <vector>

#include "hologen/composition.hpp"
#include "hologen/microbiome.hpp"
#include "hologen/rng.hpp"

namespace hologen {

/// Calibrated effect vectors: alpha over SNPs, omega over taxa.
/// Residual phenotype noise is N(0,1) by convention, so phenotypic
/// changes read directly in standard-deviation units.
struct PhenotypeModel {
    Vector alpha;                     // n_g, nonzero on qtl_support
    Vector omega;                     // n_b, nonzero on causative_taxa
    std::vector<int> qtl_support;
    std::vector<int> causative_taxa;
    double scale_alpha = 1.0;         // factors applied during calibration
    double scale_omega = 1.0;
};

/// Raw effect draws before calibration: alpha magnitudes ~ Gamma(0.4,5),
/// omega magnitudes ~ Gamma(1.4,3.8) (shape-scale), each sign flipped to
/// negative with probability 1/2.
struct RawEffects {
    Vector alpha;
    Vector omega;
    std::vector<int> qtl_support;
    std::vector<int> causative_taxa;
};

RawEffects sample_effects(int n_g, int n_b, int qtl_y, const std::vector<int>& causative_taxa,
                          Rng& rng);

/// Rescales the raw effects so that on the base population
/// var(alpha^T G0) / var(y0) = h2_d and var(omega^T B0) / var(y0) = b2,
/// where y0 = alpha^T G0 + omega^T B0 + residual and `residual` is the
/// realized G0 noise vector. Solved by damped fixed-point iteration on the
/// two scale factors; a target of zero zeroes the corresponding vector.
PhenotypeModel calibrate(const RawEffects& raw, const Matrix& genotypes_base,
                         const Matrix& clr_base, const Vector& residual, double h2_d, double b2,
                         double tolerance = 1e-12, int max_iterations = 500);

/// y = alpha^T G + omega^T B + residual.
Vector compute_phenotypes(const PhenotypeModel& model, const Matrix& genotypes,
                          const Matrix& clr_abundance, const Vector& residual);

/// Residual drawn i.i.d. N(0,1) per individual.
Vector compute_phenotypes(const PhenotypeModel& model, const Matrix& genotypes,
                          const Matrix& clr_abundance, Rng& rng);

struct BreedingValues {
    Vector direct;             // alpha^T G
    Vector microbiota;         // omega^T (beta G), uncentered
    Vector total;              // direct + microbiota
};

BreedingValues breeding_values(const PhenotypeModel& model, const BetaMatrix& beta,
                               const Matrix& genotypes);

struct RealizedComponents {
    double h2_direct = 0.0;    // var(alpha^T G) / var(y)
    double b2 = 0.0;           // var(omega^T B) / var(y)
    double h2_total = 0.0;     // var(alpha^T G + omega^T beta G) / var(y)
};

RealizedComponents realized_components(const PhenotypeModel& model, const BetaMatrix& beta,
                                       const Matrix& genotypes, const Matrix& clr_abundance,
                                       const Vector& phenotypes);

} // namespace hologen

#endif
