#ifndef HOLOGEN_IO_CONFIG_HPP
#define HOLOGEN_IO_CONFIG_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hologen/rng.hpp"

namespace hologen {

/// Paired base-population data: dosage genotypes and taxa counts over one
/// shared set of individuals. Column order is aligned by individual id.
struct BaseInputs {
    std::vector<std::string> individual_ids;  // N
    std::vector<std::string> snp_ids;         // n_g
    std::vector<std::string> taxon_ids;       // n_b
    Eigen::MatrixXi genotypes;                // n_g x N, entries in {0,1,2}
    Eigen::MatrixXd taxa_counts;              // n_b x N, non-negative integers

    int n_individuals() const { return static_cast<int>(individual_ids.size()); }
    int n_snps() const { return static_cast<int>(snp_ids.size()); }
    int n_taxa() const { return static_cast<int>(taxon_ids.size()); }
};

enum class SelectionCriterion {
    Random,
    MicrobiotaEffect,
    BvM,
    BvD,
    BvT,
    Diversity,
    MixedIndex,
};

std::string to_string(SelectionCriterion c);
SelectionCriterion selection_criterion_from_string(const std::string& s);

/// One environmental pressure: which generations, which fraction of
/// individuals, which taxa, and how strong.
struct EnvEffectSpec {
    enum class Scope { All, Clusters, Taxa, RandomClusters };

    std::set<int> generations;          // indices >= 1
    double target_fraction = 0.5;       // in (0,1]
    Scope scope = Scope::All;
    std::vector<int> cluster_ids;       // Scope::Clusters
    std::vector<std::string> taxon_ids; // Scope::Taxa
    int random_cluster_count = 0;       // Scope::RandomClusters
    double effect_sd = 1.0;             // > 0
    bool persistent_assignment = false; // reuse the same member slots each generation
};

/// All scenario parameters. Defaults follow the standard initialization;
/// n_ind == 0 means "same as the base population size".
struct ScenarioConfig {
    int n_gen = 5;
    int n_ind = 0;
    double sex_ratio = 0.5;
    double lambda = 0.5;
    double h2_d = 0.25;
    double b2 = 0.25;
    double sigma_beta = 0.1;
    /// When set, overrides sigma_beta as value / sqrt(QTL_o) once the
    /// per-cluster QTL count is known (the scale the effect-size
    /// calibration helper reports).
    std::optional<double> sigma_beta_scaled;
    double sigma_m = 0.1;
    int qtl_y = 100;
    double otu_g = 0.05;
    double eta = 25.0;
    double pi = 0.75;
    int n_clusters = 100;
    std::vector<long> depth = {10000};  // recycled over individuals
    double size_selection_F = 0.30;
    double size_selection_M = 0.30;
    SelectionCriterion selection = SelectionCriterion::Random;
    double w_div = 0.5;
    std::vector<EnvEffectSpec> env_effects;
    std::uint64_t seed = 1;
    int replicates = 1;
    bool select_from_base = false;        // apply the criterion already at G0 -> G1
    bool mixed_index_standardize = true;  // z-score both index components
    bool export_clr = false;
    bool export_counts = false;
    std::string genetic_map_path;

    int resolve_n_ind(int base_n) const { return n_ind > 0 ? n_ind : base_n; }
    long depth_for(int individual) const {
        return depth[static_cast<std::size_t>(individual) % depth.size()];
    }
    /// Throws ConfigError when any parameter is out of range.
    void validate() const;
};

/// Loads and validates the paired base tables. Microbiota columns are
/// reordered to the genotype column order; mismatched id sets, non-{0,1,2}
/// genotypes, fractional or negative counts, and all-zero count columns
/// are reported with the offending labels.
BaseInputs load_base_inputs(const std::filesystem::path& genotype_path,
                            const std::filesystem::path& microbiota_path);

void write_base_inputs(const BaseInputs& inputs,
                       const std::filesystem::path& genotype_path,
                       const std::filesystem::path& microbiota_path);

/// Flat `key = value` file ('#' comments); overrides win over file values.
/// Pass an empty path to start from defaults only.
ScenarioConfig load_config(const std::filesystem::path& path,
                           const std::vector<std::string>& overrides = {});

/// Applies `key=value` strings onto an existing config (used by --set).
void apply_override(ScenarioConfig& config, const std::string& assignment);

/// Dosage column for one SNP: n draws from Binomial(2, allele_freq).
Eigen::VectorXi sample_genotype_column(double allele_freq, int n, Rng& rng);

/// Synthetic base population for tests and demos: per-SNP allele
/// frequencies from Beta(2,2), counts from a per-individual perturbed
/// log-normal abundance profile. Non-normative plumbing.
BaseInputs generate_synthetic_base(int n_g, int n_b, int n_individuals, Rng& rng,
                                   long depth = 10000);

} // namespace hologen

#endif
