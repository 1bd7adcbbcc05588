#include "hologen/phenotype.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hologen/errors.hpp"
#include "hologen/stats.hpp"
#include "hologen/tsv.hpp"

namespace hologen {

RawEffects sample_effects(int n_g, int n_b, int qtl_y, const std::vector<int>& causative_taxa,
                          Rng& rng) {
    if (qtl_y < 1 || qtl_y > n_g)
        throw ConfigError("sample_effects: need 1 <= qtl_y <= n_g");
    for (int taxon : causative_taxa)
        if (taxon < 0 || taxon >= n_b)
            throw std::invalid_argument("sample_effects: causative taxon out of range");

    RawEffects raw;
    raw.causative_taxa = causative_taxa;
    std::sort(raw.causative_taxa.begin(), raw.causative_taxa.end());

    std::vector<int> all_snps(static_cast<std::size_t>(n_g));
    std::iota(all_snps.begin(), all_snps.end(), 0);
    std::sample(all_snps.begin(), all_snps.end(), std::back_inserter(raw.qtl_support), qtl_y,
                rng);

    std::gamma_distribution<double> alpha_magnitude(0.4, 5.0);
    std::gamma_distribution<double> omega_magnitude(1.4, 3.8);
    std::bernoulli_distribution flip(0.5);

    raw.alpha = Vector::Zero(n_g);
    for (int snp : raw.qtl_support) {
        const double magnitude = alpha_magnitude(rng);
        raw.alpha[snp] = flip(rng) ? -magnitude : magnitude;
    }
    raw.omega = Vector::Zero(n_b);
    for (int taxon : raw.causative_taxa) {
        const double magnitude = omega_magnitude(rng);
        raw.omega[taxon] = flip(rng) ? -magnitude : magnitude;
    }
    return raw;
}

PhenotypeModel calibrate(const RawEffects& raw, const Matrix& genotypes_base,
                         const Matrix& clr_base, const Vector& residual, double h2_d, double b2,
                         double tolerance, int max_iterations) {
    if (h2_d < 0.0 || b2 < 0.0 || h2_d + b2 >= 1.0)
        throw ConfigError("calibrate: targets must satisfy h2_d, b2 >= 0 and h2_d + b2 < 1");
    const auto n = genotypes_base.cols();
    if (clr_base.cols() != n || residual.size() != n)
        throw std::invalid_argument("calibrate: base matrices must cover the same individuals");

    Vector a = genotypes_base.transpose() * raw.alpha;
    Vector b = clr_base.transpose() * raw.omega;
    const double va = stats::variance(a);
    const double vb = stats::variance(b);
    if (h2_d > 0.0 && va <= 0.0)
        throw DataError("calibrate: alpha^T G0 has zero variance but h2_d > 0");
    if (b2 > 0.0 && vb <= 0.0)
        throw DataError("calibrate: omega^T B0 has zero variance but b2 > 0");

    double s = 0.0, u = 0.0;
    int iterations = 0;
    if (h2_d > 0.0 || b2 > 0.0) {
        bool converged = false;
        for (; iterations < max_iterations; ++iterations) {
            const Vector y = s * a + u * b + residual;
            const double v = stats::variance(y);
            const double s_target = h2_d > 0.0 ? std::sqrt(h2_d * v / va) : 0.0;
            const double u_target = b2 > 0.0 ? std::sqrt(b2 * v / vb) : 0.0;
            const double s_next = s + 0.5 * (s_target - s);
            const double u_next = u + 0.5 * (u_target - u);
            const double step = std::max(std::abs(s_next - s) / std::max(1.0, std::abs(s_next)),
                                         std::abs(u_next - u) / std::max(1.0, std::abs(u_next)));
            s = s_next;
            u = u_next;
            if (!std::isfinite(s) || !std::isfinite(u)) break;
            if (step <= tolerance) {
                converged = true;
                break;
            }
        }
        if (!converged)
            throw ConfigError("calibrate: fixed point did not converge in " +
                              std::to_string(max_iterations) + " iterations (last scales " +
                              tsv::format_real(s) + ", " + tsv::format_real(u) +
                              "); the targets may be infeasible for this base population");
    }

    PhenotypeModel model;
    model.alpha = h2_d > 0.0 ? Vector(s * raw.alpha) : Vector(Vector::Zero(raw.alpha.size()));
    model.omega = b2 > 0.0 ? Vector(u * raw.omega) : Vector(Vector::Zero(raw.omega.size()));
    model.qtl_support = h2_d > 0.0 ? raw.qtl_support : std::vector<int>{};
    model.causative_taxa = b2 > 0.0 ? raw.causative_taxa : std::vector<int>{};
    model.scale_alpha = s;
    model.scale_omega = u;
    return model;
}

Vector compute_phenotypes(const PhenotypeModel& model, const Matrix& genotypes,
                          const Matrix& clr_abundance, const Vector& residual) {
    if (genotypes.cols() != clr_abundance.cols() || genotypes.cols() != residual.size())
        throw std::invalid_argument("compute_phenotypes: dimension mismatch");
    return genotypes.transpose() * model.alpha + clr_abundance.transpose() * model.omega +
           residual;
}

Vector compute_phenotypes(const PhenotypeModel& model, const Matrix& genotypes,
                          const Matrix& clr_abundance, Rng& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vector residual(genotypes.cols());
    for (Eigen::Index i = 0; i < residual.size(); ++i) residual[i] = gauss(rng);
    return compute_phenotypes(model, genotypes, clr_abundance, residual);
}

BreedingValues breeding_values(const PhenotypeModel& model, const BetaMatrix& beta,
                               const Matrix& genotypes) {
    BreedingValues bv;
    bv.direct = genotypes.transpose() * model.alpha;
    Vector omega_beta = beta.effects.transpose() * model.omega;  // (omega^T beta)^T
    bv.microbiota = genotypes.transpose() * omega_beta;
    bv.total = bv.direct + bv.microbiota;
    return bv;
}

RealizedComponents realized_components(const PhenotypeModel& model, const BetaMatrix& beta,
                                       const Matrix& genotypes, const Matrix& clr_abundance,
                                       const Vector& phenotypes) {
    const double vy = stats::variance(phenotypes);
    if (vy <= 0.0)
        throw DataError("realized_components: phenotype variance is zero");
    const BreedingValues bv = breeding_values(model, beta, genotypes);
    const Vector microbiota_effect = clr_abundance.transpose() * model.omega;
    RealizedComponents out;
    out.h2_direct = stats::variance(bv.direct) / vy;
    out.b2 = stats::variance(microbiota_effect) / vy;
    out.h2_total = stats::variance(bv.total) / vy;
    return out;
}

} // namespace hologen
