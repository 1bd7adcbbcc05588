#ifndef HOLOGEN_REPORTING_HPP
#define HOLOGEN_REPORTING_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "hologen/microbiome.hpp"
#include "hologen/orchestrator.hpp"

namespace hologen {

struct ExportedFile {
    std::string path;          // relative to the run directory
    std::uint64_t bytes = 0;
    std::string fnv1a64;       // hex checksum of the file contents
};

std::uint64_t fnv1a64_file(const std::filesystem::path& path);

/// Per-generation tables: genotype dosages, microbiota compositions,
/// phenotypes (with breeding values, diversity, sex and selected flag) and
/// pedigree; CLR matrix and resampled counts behind config flags.
std::vector<ExportedFile> export_generation(const SimulationResult& run,
                                            const GenerationRecord& record,
                                            const std::filesystem::path& dir);

/// Audit tables for the frozen effects: cluster assignment, beta support,
/// alpha and omega vectors.
std::vector<ExportedFile> export_effects(const SimulationResult& run,
                                         const std::filesystem::path& dir);

/// Line-delimited JSON, one object per generation.
ExportedFile write_summary_jsonl(const std::filesystem::path& dir, const std::string& filename,
                                 const std::vector<GenerationSummary>& summaries);

ExportedFile write_aggregate_jsonl(const std::filesystem::path& dir,
                                   const AggregateSummary& aggregate);

/// Recomputes per-generation summaries from exported phenotype tables.
std::vector<GenerationSummary> replay_summary(const std::filesystem::path& run_dir);

struct RunMetrics {
    double wall_seconds = 0.0;
    double peak_rss_mb = 0.0;
};

RunMetrics current_metrics(double wall_seconds);

void write_manifest(const std::filesystem::path& dir, const ScenarioConfig& config,
                    const std::vector<ExportedFile>& files, const RunMetrics& metrics,
                    const std::vector<ReplicateFailure>& failures);

enum class PlotKind {
    DiversityDensity,
    Pcoa,
    ResponseCurves,
    HeritabilityDensity,
    LambdaCorrelations,
};

PlotKind plot_kind_from_string(const std::string& s);

/// Long-format plot-ready tables. HeritabilityDensity is produced by
/// write_heritability_density (it needs a profile, not a run).
ExportedFile emit_plot_data(const SimulationResult& run, PlotKind kind,
                            const std::filesystem::path& dir);

ExportedFile write_heritability_density(const TaxaHeritabilityProfile& profile,
                                        const std::vector<std::string>& taxon_ids,
                                        const TaxaClustering& clustering,
                                        const std::filesystem::path& dir);

/// Bray-Curtis dissimilarities between the columns of a composition matrix.
Matrix composition_dissimilarity(const Matrix& compositions);

} // namespace hologen

#endif
