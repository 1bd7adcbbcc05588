#include "hologen/reporting.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <sys/resource.h>

#include <nlohmann/json.hpp>

#include "hologen/errors.hpp"
#include "hologen/stats.hpp"
#include "hologen/tsv.hpp"
#include "hologen/version.hpp"

namespace hologen {

using ordered_json = nlohmann::ordered_json;

std::uint64_t fnv1a64_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file for checksum: " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        const std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

namespace {

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

ExportedFile describe(const std::filesystem::path& dir, const std::filesystem::path& file) {
    ExportedFile out;
    out.path = std::filesystem::relative(file, dir).string();
    out.bytes = static_cast<std::uint64_t>(std::filesystem::file_size(file));
    out.fnv1a64 = hex64(fnv1a64_file(file));
    return out;
}

std::string generation_suffix(int index) {
    return "G" + std::to_string(index) + ".tsv";
}

} // namespace

std::vector<ExportedFile> export_generation(const SimulationResult& run,
                                            const GenerationRecord& record,
                                            const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<ExportedFile> files;

    {
        tsv::Table table{"snp_id", run.snp_ids, record.ids, record.dosage};
        const auto path = dir / ("genotypes_" + generation_suffix(record.index));
        tsv::write_table(path, table, true);
        files.push_back(describe(dir, path));
    }
    {
        tsv::Table table{"taxon_id", run.taxon_ids, record.ids, record.microbiota};
        const auto path = dir / ("microbiota_" + generation_suffix(record.index));
        tsv::write_table(path, table);
        files.push_back(describe(dir, path));
    }
    if (run.config.export_clr) {
        tsv::Table table{"taxon_id", run.taxon_ids, record.ids, record.clr_abundance};
        const auto path = dir / ("clr_" + generation_suffix(record.index));
        tsv::write_table(path, table);
        files.push_back(describe(dir, path));
    }
    if (run.config.export_counts && record.resampled_counts.size() > 0) {
        tsv::Table table{"taxon_id", run.taxon_ids, record.ids,
                         record.resampled_counts.cast<double>()};
        const auto path = dir / ("counts_" + generation_suffix(record.index));
        tsv::write_table(path, table, true);
        files.push_back(describe(dir, path));
    }
    {
        const auto path = dir / ("phenotypes_" + generation_suffix(record.index));
        std::ofstream out(path);
        if (!out) throw DataError("cannot write " + path.string());
        out << "id\tsex\tphenotype\tbv_d\tbv_m\tbv_t\tmicrobiota_effect\tdiversity\tselected\n";
        for (int i = 0; i < record.size(); ++i) {
            out << record.ids[static_cast<std::size_t>(i)] << '\t'
                << (record.sexes[static_cast<std::size_t>(i)] == Sex::Female ? 'F' : 'M') << '\t'
                << tsv::format_real(record.phenotype[i]) << '\t'
                << tsv::format_real(record.breeding.direct[i]) << '\t'
                << tsv::format_real(record.breeding.microbiota[i]) << '\t'
                << tsv::format_real(record.breeding.total[i]) << '\t'
                << tsv::format_real(record.microbiota_effect[i]) << '\t'
                << tsv::format_real(record.diversity[i]) << '\t'
                << int(record.selected[static_cast<std::size_t>(i)]) << '\n';
        }
        out.close();
        files.push_back(describe(dir, path));
    }
    {
        const auto path = dir / ("pedigree_" + generation_suffix(record.index));
        std::ofstream out(path);
        if (!out) throw DataError("cannot write " + path.string());
        out << "id\tgeneration\tsire\tdam\tsex\tselected\n";
        for (int i = 0; i < record.size(); ++i) {
            const auto& sire = record.sire_id[static_cast<std::size_t>(i)];
            const auto& dam = record.dam_id[static_cast<std::size_t>(i)];
            out << record.ids[static_cast<std::size_t>(i)] << '\t' << record.index << '\t'
                << (sire.empty() ? "NA" : sire) << '\t' << (dam.empty() ? "NA" : dam) << '\t'
                << (record.sexes[static_cast<std::size_t>(i)] == Sex::Female ? 'F' : 'M') << '\t'
                << int(record.selected[static_cast<std::size_t>(i)]) << '\n';
        }
        out.close();
        files.push_back(describe(dir, path));
    }
    return files;
}

std::vector<ExportedFile> export_effects(const SimulationResult& run,
                                         const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<ExportedFile> files;
    const auto& clustering = run.effects.clustering;

    {
        const auto path = dir / "clusters.tsv";
        std::ofstream out(path);
        if (!out) throw DataError("cannot write " + path.string());
        out << "taxon_id\tcluster\tgenetic\n";
        for (int t = 0; t < clustering.n_taxa(); ++t)
            out << run.taxon_ids[static_cast<std::size_t>(t)] << '\t'
                << clustering.assignment[static_cast<std::size_t>(t)] << '\t'
                << (clustering.is_genetic_taxon(t) ? 1 : 0) << '\n';
        out.close();
        files.push_back(describe(dir, path));
    }
    {
        const auto path = dir / "beta_support.tsv";
        std::ofstream out(path);
        if (!out) throw DataError("cannot write " + path.string());
        out << "cluster\tsnp_id\n";
        for (std::size_t c = 0; c < run.effects.beta.cluster_qtls.size(); ++c)
            for (int snp : run.effects.beta.cluster_qtls[c])
                out << clustering.genetic_clusters[c] << '\t'
                    << run.snp_ids[static_cast<std::size_t>(snp)] << '\n';
        out.close();
        files.push_back(describe(dir, path));
    }
    {
        const auto path = dir / "effects_alpha.tsv";
        std::ofstream out(path);
        if (!out) throw DataError("cannot write " + path.string());
        out << "snp_id\tvalue\n";
        for (Eigen::Index s = 0; s < run.effects.phenotype.alpha.size(); ++s)
            if (run.effects.phenotype.alpha[s] != 0.0)
                out << run.snp_ids[static_cast<std::size_t>(s)] << '\t'
                    << tsv::format_real(run.effects.phenotype.alpha[s]) << '\n';
        out.close();
        files.push_back(describe(dir, path));
    }
    {
        const auto path = dir / "effects_omega.tsv";
        std::ofstream out(path);
        if (!out) throw DataError("cannot write " + path.string());
        out << "taxon_id\tvalue\n";
        for (Eigen::Index t = 0; t < run.effects.phenotype.omega.size(); ++t)
            if (run.effects.phenotype.omega[t] != 0.0)
                out << run.taxon_ids[static_cast<std::size_t>(t)] << '\t'
                    << tsv::format_real(run.effects.phenotype.omega[t]) << '\n';
        out.close();
        files.push_back(describe(dir, path));
    }
    return files;
}

namespace {

ordered_json summary_to_json(const GenerationSummary& s) {
    ordered_json j;
    j["generation"] = s.generation;
    j["n"] = s.n;
    j["mean_phenotype"] = s.mean_phenotype;
    j["sd_phenotype"] = s.sd_phenotype;
    j["mean_diversity"] = s.mean_diversity;
    j["sd_diversity"] = s.sd_diversity;
    j["mean_bv_total"] = s.mean_bv_total;
    j["sd_bv_total"] = s.sd_bv_total;
    j["h2_direct_obs"] = s.h2_direct_obs;
    j["b2_obs"] = s.b2_obs;
    j["h2_total_obs"] = s.h2_total_obs;
    j["phenotype_change_sd"] = s.phenotype_change_sd;
    j["diversity_change"] = s.diversity_change;
    return j;
}

} // namespace

ExportedFile write_summary_jsonl(const std::filesystem::path& dir, const std::string& filename,
                                 const std::vector<GenerationSummary>& summaries) {
    std::filesystem::create_directories(dir);
    const auto path = dir / filename;
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    for (const auto& s : summaries) out << summary_to_json(s).dump() << '\n';
    out.close();
    return describe(dir, path);
}

ExportedFile write_aggregate_jsonl(const std::filesystem::path& dir,
                                   const AggregateSummary& aggregate) {
    std::filesystem::create_directories(dir);
    const auto path = dir / "aggregate.jsonl";
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    auto cell = [](const AggregateCell& c) {
        return ordered_json{{"mean", c.mean}, {"ci95_lo", c.lo}, {"ci95_hi", c.hi}};
    };
    for (std::size_t g = 0; g < aggregate.generations.size(); ++g) {
        ordered_json j;
        j["generation"] = aggregate.generations[g];
        j["replicates"] = aggregate.replicates;
        j["mean_phenotype"] = cell(aggregate.mean_phenotype[g]);
        j["mean_diversity"] = cell(aggregate.mean_diversity[g]);
        j["h2_direct_obs"] = cell(aggregate.h2_direct_obs[g]);
        j["b2_obs"] = cell(aggregate.b2_obs[g]);
        j["phenotype_change_sd"] = cell(aggregate.phenotype_change_sd[g]);
        j["diversity_change"] = cell(aggregate.diversity_change[g]);
        out << j.dump() << '\n';
    }
    out.close();
    return describe(dir, path);
}

std::vector<GenerationSummary> replay_summary(const std::filesystem::path& run_dir) {
    std::vector<std::pair<int, std::filesystem::path>> tables;
    for (const auto& entry : std::filesystem::directory_iterator(run_dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("phenotypes_G", 0) == 0 && name.size() > 16 &&
            name.substr(name.size() - 4) == ".tsv") {
            const std::string idx = name.substr(12, name.size() - 16);
            tables.emplace_back(std::stoi(idx), entry.path());
        }
    }
    if (tables.empty())
        throw DataError("no phenotypes_G*.tsv tables found in " + run_dir.string());
    std::sort(tables.begin(), tables.end());

    std::vector<GenerationRecord> records;
    for (const auto& [index, path] : tables) {
        std::ifstream in(path);
        if (!in) throw DataError("cannot open " + path.string());
        std::string line;
        std::getline(in, line);
        std::vector<double> y, bvd, bvm, bvt, effect, diversity;
        GenerationRecord record;
        record.index = index;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::stringstream ss(line);
            std::string id, sex, field;
            std::getline(ss, id, '\t');
            std::getline(ss, sex, '\t');
            record.ids.push_back(id);
            auto next_real = [&](std::vector<double>& dst) {
                std::getline(ss, field, '\t');
                dst.push_back(tsv::parse_real(field, path.string() + " (" + id + ")"));
            };
            next_real(y);
            next_real(bvd);
            next_real(bvm);
            next_real(bvt);
            next_real(effect);
            next_real(diversity);
        }
        auto to_vec = [](const std::vector<double>& v) {
            return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()))
                .eval();
        };
        record.phenotype = to_vec(y);
        record.breeding.direct = to_vec(bvd);
        record.breeding.microbiota = to_vec(bvm);
        record.breeding.total = to_vec(bvt);
        record.microbiota_effect = to_vec(effect);
        record.diversity = to_vec(diversity);
        const double vy = stats::variance(record.phenotype);
        if (vy > 0.0) {
            record.realized.h2_direct = stats::variance(record.breeding.direct) / vy;
            record.realized.b2 = stats::variance(record.microbiota_effect) / vy;
            record.realized.h2_total = stats::variance(record.breeding.total) / vy;
        }
        records.push_back(std::move(record));
    }
    return summarize_generations(records);
}

RunMetrics current_metrics(double wall_seconds) {
    RunMetrics metrics;
    metrics.wall_seconds = wall_seconds;
    struct rusage usage{};
    if (getrusage(RUSAGE_SELF, &usage) == 0)
        metrics.peak_rss_mb = static_cast<double>(usage.ru_maxrss) / 1024.0;  // Linux: KiB
    return metrics;
}

namespace {

ordered_json config_to_json(const ScenarioConfig& c) {
    ordered_json j;
    j["n_gen"] = c.n_gen;
    j["n_ind"] = c.n_ind;
    j["sex_ratio"] = c.sex_ratio;
    j["lambda"] = c.lambda;
    j["h2_d"] = c.h2_d;
    j["b2"] = c.b2;
    j["sigma_beta"] = c.sigma_beta;
    if (c.sigma_beta_scaled) j["sigma_beta_scaled"] = *c.sigma_beta_scaled;
    j["sigma_m"] = c.sigma_m;
    j["qtl_y"] = c.qtl_y;
    j["otu_g"] = c.otu_g;
    j["eta"] = c.eta;
    j["pi"] = c.pi;
    j["n_clusters"] = c.n_clusters;
    j["depth"] = c.depth;
    j["size_selection_F"] = c.size_selection_F;
    j["size_selection_M"] = c.size_selection_M;
    j["selection"] = to_string(c.selection);
    j["w_div"] = c.w_div;
    j["seed"] = c.seed;
    j["replicates"] = c.replicates;
    j["select_from_base"] = c.select_from_base;
    j["mixed_index_standardize"] = c.mixed_index_standardize;
    j["export_clr"] = c.export_clr;
    j["export_counts"] = c.export_counts;
    if (!c.genetic_map_path.empty()) j["genetic_map"] = c.genetic_map_path;
    ordered_json envs = ordered_json::array();
    for (const auto& e : c.env_effects) {
        ordered_json je;
        je["generations"] = e.generations;
        je["fraction"] = e.target_fraction;
        switch (e.scope) {
            case EnvEffectSpec::Scope::All: je["scope"] = "all"; break;
            case EnvEffectSpec::Scope::Clusters: je["scope"] = "clusters"; je["cluster_ids"] = e.cluster_ids; break;
            case EnvEffectSpec::Scope::Taxa: je["scope"] = "taxa"; je["taxon_ids"] = e.taxon_ids; break;
            case EnvEffectSpec::Scope::RandomClusters:
                je["scope"] = "random_clusters";
                je["count"] = e.random_cluster_count;
                break;
        }
        je["effect_sd"] = e.effect_sd;
        je["persistent"] = e.persistent_assignment;
        envs.push_back(je);
    }
    j["env_effects"] = envs;
    return j;
}

} // namespace

void write_manifest(const std::filesystem::path& dir, const ScenarioConfig& config,
                    const std::vector<ExportedFile>& files, const RunMetrics& metrics,
                    const std::vector<ReplicateFailure>& failures) {
    ordered_json j;
    j["tool"] = "hologen";
    j["version"] = kVersion;
    j["seed"] = config.seed;
    j["config"] = config_to_json(config);
    ordered_json jf = ordered_json::array();
    for (const auto& f : files)
        jf.push_back({{"path", f.path}, {"bytes", f.bytes}, {"fnv1a64", f.fnv1a64}});
    j["files"] = jf;
    j["wall_seconds"] = metrics.wall_seconds;
    j["peak_rss_mb"] = metrics.peak_rss_mb;
    ordered_json jfail = ordered_json::array();
    for (const auto& f : failures)
        jfail.push_back({{"replicate", f.replicate}, {"message", f.message}});
    j["failed_replicates"] = jfail;

    const auto path = dir / "run_manifest.json";
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

PlotKind plot_kind_from_string(const std::string& s) {
    if (s == "diversity_density") return PlotKind::DiversityDensity;
    if (s == "pcoa") return PlotKind::Pcoa;
    if (s == "response_curves") return PlotKind::ResponseCurves;
    if (s == "heritability_density") return PlotKind::HeritabilityDensity;
    if (s == "lambda_correlations") return PlotKind::LambdaCorrelations;
    throw ConfigError("unsupported plot kind '" + s + "'");
}

Matrix composition_dissimilarity(const Matrix& compositions) {
    const Eigen::Index n = compositions.cols();
    Matrix d = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double shared = compositions.col(i).cwiseMin(compositions.col(j)).sum();
            const double total = compositions.col(i).sum() + compositions.col(j).sum();
            d(i, j) = d(j, i) = std::clamp(1.0 - 2.0 * shared / total, 0.0, 1.0);
        }
    return d;
}

namespace {

ExportedFile write_diversity_density(const SimulationResult& run,
                                     const std::filesystem::path& dir) {
    const auto path = dir / "plot_diversity_density.tsv";
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "generation\tid\tdiversity\n";
    for (const auto& record : run.generations)
        for (int i = 0; i < record.size(); ++i)
            out << record.index << '\t' << record.ids[static_cast<std::size_t>(i)] << '\t'
                << tsv::format_real(record.diversity[i]) << '\n';
    out.close();
    return describe(dir, path);
}

ExportedFile write_pcoa(const SimulationResult& run, const std::filesystem::path& dir) {
    Eigen::Index total = 0;
    for (const auto& record : run.generations) total += record.size();
    Matrix pooled(run.generations.front().microbiota.rows(), total);
    Eigen::Index offset = 0;
    for (const auto& record : run.generations) {
        pooled.middleCols(offset, record.size()) = record.microbiota;
        offset += record.size();
    }
    Matrix coords = pcoa(composition_dissimilarity(pooled), 2);

    const auto path = dir / "plot_pcoa.tsv";
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "id\tgeneration\tgroup\taxis1\taxis2\n";
    offset = 0;
    for (const auto& record : run.generations) {
        for (int i = 0; i < record.size(); ++i) {
            std::string group = "all";
            if (record.env_design.cols() > 0)
                group = record.env_design(i, 0) > 0.5 ? "treated" : "control";
            out << record.ids[static_cast<std::size_t>(i)] << '\t' << record.index << '\t'
                << group << '\t' << tsv::format_real(coords(offset + i, 0)) << '\t'
                << tsv::format_real(coords(offset + i, 1)) << '\n';
        }
        offset += record.size();
    }
    out.close();
    return describe(dir, path);
}

ExportedFile write_response_curves(const SimulationResult& run,
                                   const std::filesystem::path& dir) {
    const auto summaries = summarize_generations(run.generations);
    const auto path = dir / "plot_response_curves.tsv";
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "generation\tmean_phenotype\tphenotype_change_sd\tmean_diversity\tdiversity_change\t"
           "mean_bv_total\n";
    for (const auto& s : summaries)
        out << s.generation << '\t' << tsv::format_real(s.mean_phenotype) << '\t'
            << tsv::format_real(s.phenotype_change_sd) << '\t'
            << tsv::format_real(s.mean_diversity) << '\t'
            << tsv::format_real(s.diversity_change) << '\t'
            << tsv::format_real(s.mean_bv_total) << '\n';
    out.close();
    return describe(dir, path);
}

ExportedFile write_lambda_correlations(const SimulationResult& run,
                                       const std::filesystem::path& dir) {
    if (run.generations.size() < 2)
        throw DataError("lambda_correlations needs at least one simulated generation");
    const std::size_t t = std::min<std::size_t>(2, run.generations.size() - 1);
    const auto& offspring = run.generations[t];
    const auto& parents = run.generations[t - 1];

    const int n = offspring.size();
    Vector mother(n), father(n);
    for (int i = 0; i < n; ++i) {
        mother[i] = parents.diversity[offspring.dam_index[static_cast<std::size_t>(i)]];
        father[i] = parents.diversity[offspring.sire_index[static_cast<std::size_t>(i)]];
    }

    const auto path = dir / "plot_lambda_correlations.tsv";
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "lambda\tsource\tr\n";
    out << tsv::format_real(run.config.lambda) << "\tmother\t"
        << tsv::format_real(stats::pearson(offspring.diversity, mother)) << '\n';
    out << tsv::format_real(run.config.lambda) << "\tfather\t"
        << tsv::format_real(stats::pearson(offspring.diversity, father)) << '\n';
    out << tsv::format_real(run.config.lambda) << "\tambient\t"
        << tsv::format_real(stats::pearson(offspring.diversity, offspring.ambient_diversity))
        << '\n';
    out.close();
    return describe(dir, path);
}

} // namespace

ExportedFile emit_plot_data(const SimulationResult& run, PlotKind kind,
                            const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    switch (kind) {
        case PlotKind::DiversityDensity: return write_diversity_density(run, dir);
        case PlotKind::Pcoa: return write_pcoa(run, dir);
        case PlotKind::ResponseCurves: return write_response_curves(run, dir);
        case PlotKind::LambdaCorrelations: return write_lambda_correlations(run, dir);
        case PlotKind::HeritabilityDensity:
            throw ConfigError("heritability_density is produced by the calibrate-effects "
                              "command, not from a simulation run");
    }
    throw ConfigError("unsupported plot kind");
}

ExportedFile write_heritability_density(const TaxaHeritabilityProfile& profile,
                                        const std::vector<std::string>& taxon_ids,
                                        const TaxaClustering& clustering,
                                        const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto path = dir / "plot_heritability_density.tsv";
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "effect_scale\ttaxon_id\tgenetic\th2\n";
    for (std::size_t k = 0; k < profile.effect_scales.size(); ++k)
        for (Eigen::Index t = 0; t < profile.taxa_h2[k].size(); ++t)
            out << tsv::format_real(profile.effect_scales[k]) << '\t'
                << taxon_ids[static_cast<std::size_t>(t)] << '\t'
                << (clustering.is_genetic_taxon(static_cast<int>(t)) ? 1 : 0) << '\t'
                << tsv::format_real(profile.taxa_h2[k][t]) << '\n';
    out.close();
    return describe(dir, path);
}

} // namespace hologen
