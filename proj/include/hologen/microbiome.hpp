#ifndef HOLOGEN_MICROBIOME_HPP
#define HOLOGEN_MICROBIOME_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <string>
#include <vector>

#include "hologen/composition.hpp"
#include "hologen/io_config.hpp"
#include "hologen/rng.hpp"

namespace hologen {

/// Taxa partitioned into clusters; a subset of clusters is under genetic
/// control and their member taxa carry nonzero rows of beta.
struct TaxaClustering {
    std::vector<int> assignment;             // taxon -> cluster id, 0-based
    int n_clusters = 0;
    std::vector<std::vector<int>> members;   // per cluster, ascending taxa
    std::vector<int> genetic_clusters;       // ascending
    std::vector<int> genetic_taxa;           // ascending

    int n_taxa() const { return static_cast<int>(assignment.size()); }
    bool is_genetic_taxon(int taxon) const;
};

/// Agglomerative hierarchical clustering (UPGMA) of taxa profiles under
/// Bray-Curtis dissimilarity, cut at n_clusters. Cluster ids are assigned
/// by the smallest member taxon index, so the labelling is stable under
/// input permutation. All-zero profiles are treated as identical to each
/// other and maximally distant from everything else.
TaxaClustering cluster_taxa(const Matrix& counts, int n_clusters);

/// Draws clusters with size in [size_min, size_max] uniformly without
/// replacement until at least ceil(otu_g * n_b) taxa are covered (one
/// cluster of overshoot allowed). If the eligible clusters cannot reach the
/// threshold the bounds are relaxed by 5 on each side, up to 3 retries.
/// When the threshold requires every taxon, all clusters are selected.
void select_genetic_clusters(TaxaClustering& clustering, double otu_g, Rng& rng,
                             int size_min = 10, int size_max = 25);

/// Sparse QTL effects on CLR taxa abundances. Each genetic cluster gets
/// QTL_o = round(0.2 * n_g / v) SNP columns sampled independently, shared
/// by every taxon in the cluster; entries are the sum of a cluster-level
/// and a taxon-level N(0, sigma_beta^2) draw.
struct BetaMatrix {
    Eigen::SparseMatrix<double> effects;     // n_b x n_g
    int qtl_per_cluster = 0;                 // QTL_o
    double sigma_beta = 0.0;                 // the sd actually used
    std::vector<std::vector<int>> cluster_qtls;  // parallel to genetic_clusters
};

BetaMatrix build_beta(const TaxaClustering& clustering, int n_g, double sigma_beta, Rng& rng,
                      std::optional<double> sigma_beta_scaled = std::nullopt);

/// beta * G with every taxon row centered to zero mean across individuals.
Matrix centered_genetic_term(const BetaMatrix& beta, const Matrix& genotypes);

/// pi-weighted average of a Dirichlet(eta * prev_mean) draw and prev_mean.
Vector ambient_microbiota(const Vector& prev_mean, double eta, double pi, Rng& rng);

/// Environmental effect sizes theta (frozen at simulation start) plus the
/// per-spec state needed to realize design columns each generation.
struct EnvironmentModel {
    std::vector<EnvEffectSpec> specs;
    Matrix theta;                                     // n_b x k
    std::vector<std::vector<int>> resolved_taxa;      // per spec
    std::vector<std::vector<int>> persistent_members; // per spec; empty if not persistent
};

EnvironmentModel init_environment(const std::vector<EnvEffectSpec>& specs,
                                  const TaxaClustering& clustering,
                                  const std::vector<std::string>& taxon_ids, int n_ind,
                                  Rng& rng);

struct EnvironmentRealization {
    Matrix design;        // n_ind x k, 0/1 membership
    Matrix contribution;  // n_b x n_ind, theta * design^T
};

/// Membership columns for generation t: round(fraction * n_ind) individuals
/// per active spec, re-drawn each generation unless the spec persists its
/// assignment. Inactive specs contribute all-zero columns.
EnvironmentRealization realize_environment(const EnvironmentModel& env, int generation, int n_ind,
                                           Rng& rng);

/// One individual's microbiota:
/// clr_inv( clr(lambda*dam + (1-lambda)*ambient) + env + genetic + noise ).
Vector simulate_microbiota(const Vector& dam, const Vector& ambient, double lambda,
                           const Vector& env_contribution, const Vector& genetic_contribution,
                           double sigma_m, Rng& rng);

/// Per-taxon heritability profile over a grid of effect scales
/// (sigma_beta * sqrt(QTL_o)). For each grid value a fresh beta is drawn
/// and one generation is simulated from the base population under random
/// mating; h2 of a taxon is var(centered genetic term) / var(CLR abundance)
/// across the simulated individuals. Ambient and noise draws are shared
/// across grid values so differences reflect the effect size only.
struct TaxaHeritabilityProfile {
    std::vector<double> effect_scales;   // sigma_beta * sqrt(QTL_o)
    std::vector<Vector> taxa_h2;         // per grid value, length n_b
    int qtl_per_cluster = 0;
};

TaxaHeritabilityProfile taxa_heritability_profile(const BaseInputs& base,
                                                  const TaxaClustering& clustering,
                                                  const std::vector<double>& effect_scale_grid,
                                                  const ScenarioConfig& config);

} // namespace hologen

#endif
