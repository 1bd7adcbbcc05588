#ifndef HOLOGEN_ORCHESTRATOR_HPP
#define HOLOGEN_ORCHESTRATOR_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hologen/genome.hpp"
#include "hologen/io_config.hpp"
#include "hologen/microbiome.hpp"
#include "hologen/phenotype.hpp"
#include "hologen/selection.hpp"

namespace hologen {

/// Everything recorded for one generation.
struct GenerationRecord {
    int index = 0;
    std::vector<std::string> ids;
    std::vector<Sex> sexes;
    PhasedGenotypes haplotypes;
    Matrix dosage;             // n_g x n
    Matrix microbiota;         // n_b x n, columns are compositions
    Matrix clr_abundance;      // n_b x n
    Vector phenotype;
    BreedingValues breeding;
    Vector microbiota_effect;  // omega^T B
    Vector diversity;          // Shannon of depth-resampled counts
    Vector ambient_diversity;  // per-individual ambient draw diversity; empty at G0
    Eigen::MatrixXi resampled_counts;  // only kept when export_counts is set
    std::vector<int> dam_index;        // into previous generation; -1 at G0
    std::vector<int> sire_index;
    std::vector<std::string> dam_id;
    std::vector<std::string> sire_id;
    std::vector<std::uint8_t> selected;  // parents of the next generation
    Matrix env_design;         // n x k
    Vector ambient_mean;       // mean composition the generation was exposed to; empty at G0
    RealizedComponents realized;

    int size() const { return static_cast<int>(ids.size()); }
};

/// Effects frozen after calibration on the base population.
struct EffectsModel {
    TaxaClustering clustering;
    BetaMatrix beta;
    PhenotypeModel phenotype;
    EnvironmentModel environment;
};

struct SimulationState {
    ScenarioConfig config;
    std::vector<std::string> snp_ids;
    std::vector<std::string> taxon_ids;
    GeneticMap map;
    EffectsModel effects;
    std::vector<GenerationRecord> generations;
    StreamSeeder seeder{0};

    int current_generation() const { return static_cast<int>(generations.size()) - 1; }
};

/// Formats the base population: phases genotypes, smooths counts into
/// compositions (no modulation is applied to G0), clusters taxa, builds
/// beta, samples and calibrates alpha/omega against the realized G0
/// residual, and records G0.
SimulationState prepare_base(const BaseInputs& inputs, const ScenarioConfig& config,
                             std::uint64_t replicate = 0);

/// Advances the state by one generation: selects parents (all of G0 mate at
/// random unless select_from_base is set), builds offspring with the genome
/// module, realizes ambient pools and environmental effects, simulates each
/// offspring's microbiota from its dam and ambient draw, then phenotypes,
/// breeding values, diversity and realized components.
void advance_generation(SimulationState& state);

struct SimulationResult {
    ScenarioConfig config;
    std::uint64_t replicate = 0;
    std::vector<std::string> snp_ids;
    std::vector<std::string> taxon_ids;
    EffectsModel effects;
    std::vector<GenerationRecord> generations;
};

SimulationResult run_simulation(const BaseInputs& inputs, const ScenarioConfig& config,
                                std::uint64_t replicate = 0);

/// Per-generation summary statistics of one replicate.
struct GenerationSummary {
    int generation = 0;
    int n = 0;
    double mean_phenotype = 0.0, sd_phenotype = 0.0;
    double mean_diversity = 0.0, sd_diversity = 0.0;
    double mean_bv_total = 0.0, sd_bv_total = 0.0;
    double h2_direct_obs = 0.0, b2_obs = 0.0, h2_total_obs = 0.0;
    double phenotype_change_sd = 0.0;  // (mean y_t - mean y_0) / sd(y_0)
    double diversity_change = 0.0;     // mean delta_t - mean delta_0
};

std::vector<GenerationSummary> summarize_generations(const std::vector<GenerationRecord>& records);

struct ReplicateFailure {
    int replicate = 0;
    std::string message;
};

/// Mean and normal-approximation 95% interval over replicates.
struct AggregateCell {
    double mean = 0.0, lo = 0.0, hi = 0.0;
};

struct AggregateSummary {
    std::vector<int> generations;
    std::vector<AggregateCell> mean_phenotype, mean_diversity, h2_direct_obs, b2_obs,
        phenotype_change_sd, diversity_change;
    int replicates = 0;
};

struct ReplicateSetResult {
    std::vector<std::vector<GenerationSummary>> summaries;  // per successful replicate
    std::vector<int> replicate_ids;
    std::vector<ReplicateFailure> failures;
    AggregateSummary aggregate;
};

/// Runs replicates 0..n_replicates-1 on up to `parallelism` threads.
/// Replicate r seeds all its streams from (config.seed, r), so results do
/// not depend on scheduling. An optional sink receives each finished
/// result (called under a lock, in completion order).
ReplicateSetResult run_replicates(
    const BaseInputs& inputs, const ScenarioConfig& config, int n_replicates, int parallelism,
    const std::function<void(const SimulationResult&)>& sink = {});

} // namespace hologen

#endif
