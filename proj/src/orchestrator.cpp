#include "hologen/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "hologen/errors.hpp"
#include "hologen/stats.hpp"

namespace hologen {

namespace {

Matrix smooth_base_counts(const Matrix& counts, double pi,
                          const std::vector<std::string>& taxon_ids) {
    const Eigen::Index n = counts.cols();
    Matrix empirical(counts.rows(), n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double total = counts.col(i).sum();
        if (total <= 0.0)
            throw DataError("base microbiota: individual column " + std::to_string(i) +
                            " has zero total count");
        empirical.col(i) = counts.col(i) / total;
    }
    Vector pop_mean = empirical.rowwise().mean();
    for (Eigen::Index t = 0; t < pop_mean.size(); ++t)
        if (pop_mean[t] <= 0.0)
            throw DataError("base microbiota: taxon '" + taxon_ids[static_cast<std::size_t>(t)] +
                            "' is absent from every individual; smoothing cannot produce a "
                            "strictly positive composition");
    Matrix comps = pi * empirical;
    comps.colwise() += (1.0 - pi) * pop_mean;
    return comps;
}

/// Clustering operates on rarefied counts; when column totals differ the
/// columns are resampled down to the smallest total.
Matrix clustering_input(const Matrix& counts, Rng& rng) {
    Vector totals = counts.colwise().sum();
    if (totals.maxCoeff() - totals.minCoeff() < 0.5) return counts;
    const long depth = static_cast<long>(totals.minCoeff());
    Matrix out(counts.rows(), counts.cols());
    for (Eigen::Index i = 0; i < counts.cols(); ++i) {
        Vector p = counts.col(i) / totals[i];
        out.col(i) = multinomial_resample(p, depth, rng).cast<double>();
    }
    return out;
}

Vector diversity_of_columns(const Matrix& compositions, const ScenarioConfig& config, Rng& rng,
                            Eigen::MatrixXi* counts_out) {
    const Eigen::Index n = compositions.cols();
    Vector diversity(n);
    if (counts_out) counts_out->resize(compositions.rows(), n);
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::VectorXi counts =
            multinomial_resample(compositions.col(i), config.depth_for(static_cast<int>(i)), rng);
        diversity[i] = shannon_of_counts(counts);
        if (counts_out) counts_out->col(i) = counts;
    }
    return diversity;
}

Vector draw_residual(Eigen::Index n, Rng& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vector residual(n);
    for (Eigen::Index i = 0; i < n; ++i) residual[i] = gauss(rng);
    return residual;
}

} // namespace

SimulationState prepare_base(const BaseInputs& inputs, const ScenarioConfig& config,
                             std::uint64_t replicate) {
    config.validate();
    const int n_g = inputs.n_snps();
    const int n_b = inputs.n_taxa();
    const int n_base = inputs.n_individuals();
    if (n_base < 2) throw DataError("base population needs at least two individuals");
    if (config.qtl_y > n_g)
        throw ConfigError("qtl_y = " + std::to_string(config.qtl_y) + " exceeds the " +
                          std::to_string(n_g) + " available SNPs");
    if (config.n_clusters > n_b)
        throw ConfigError("n_clusters = " + std::to_string(config.n_clusters) + " exceeds the " +
                          std::to_string(n_b) + " available taxa");

    SimulationState state;
    state.config = config;
    state.config.n_ind = config.resolve_n_ind(n_base);
    state.snp_ids = inputs.snp_ids;
    state.taxon_ids = inputs.taxon_ids;
    state.seeder = StreamSeeder(config.seed).child(replicate);
    state.map = config.genetic_map_path.empty()
                    ? GeneticMap::uniform(n_g)
                    : GeneticMap::load(config.genetic_map_path, inputs.snp_ids);

    GenerationRecord base;
    base.index = 0;
    base.ids = inputs.individual_ids;
    {
        Rng rng = state.seeder.child("phase").stream();
        base.haplotypes = phase_base_population(inputs.genotypes, rng);
    }
    base.dosage = base.haplotypes.dosage();
    {
        Rng rng = state.seeder.child("base-sex").stream();
        base.sexes = assign_sexes(n_base, config.sex_ratio, rng);
    }
    base.microbiota = smooth_base_counts(inputs.taxa_counts, config.pi, inputs.taxon_ids);
    base.clr_abundance = clr_columns(base.microbiota);

    {
        Rng rng = state.seeder.child("rarefy").stream();
        Matrix rarefied = clustering_input(inputs.taxa_counts, rng);
        state.effects.clustering = cluster_taxa(rarefied, config.n_clusters);
    }
    {
        Rng rng = state.seeder.child("cluster-select").stream();
        select_genetic_clusters(state.effects.clustering, config.otu_g, rng);
    }
    {
        Rng rng = state.seeder.child("beta").stream();
        state.effects.beta = build_beta(state.effects.clustering, n_g, config.sigma_beta, rng,
                                        config.sigma_beta_scaled);
    }
    {
        Rng rng = state.seeder.child("environment").stream();
        state.effects.environment =
            init_environment(config.env_effects, state.effects.clustering, inputs.taxon_ids,
                             state.config.n_ind, rng);
    }

    Vector residual;
    {
        Rng rng = state.seeder.child("y-noise").child(0).stream();
        residual = draw_residual(n_base, rng);
    }
    {
        Rng rng = state.seeder.child("effects").stream();
        RawEffects raw = sample_effects(n_g, n_b, config.qtl_y,
                                        state.effects.clustering.genetic_taxa, rng);
        state.effects.phenotype = calibrate(raw, base.dosage, base.clr_abundance, residual,
                                            config.h2_d, config.b2);
    }

    base.phenotype =
        compute_phenotypes(state.effects.phenotype, base.dosage, base.clr_abundance, residual);
    base.breeding = breeding_values(state.effects.phenotype, state.effects.beta, base.dosage);
    base.microbiota_effect = base.clr_abundance.transpose() * state.effects.phenotype.omega;
    {
        Rng rng = state.seeder.child("diversity").child(0).stream();
        base.diversity = diversity_of_columns(base.microbiota, state.config, rng,
                                              config.export_counts ? &base.resampled_counts
                                                                   : nullptr);
    }
    base.dam_index.assign(static_cast<std::size_t>(n_base), -1);
    base.sire_index.assign(static_cast<std::size_t>(n_base), -1);
    base.dam_id.assign(static_cast<std::size_t>(n_base), "");
    base.sire_id.assign(static_cast<std::size_t>(n_base), "");
    base.selected.assign(static_cast<std::size_t>(n_base), 0);
    base.env_design = Matrix::Zero(n_base, static_cast<Eigen::Index>(config.env_effects.size()));
    base.realized = realized_components(state.effects.phenotype, state.effects.beta, base.dosage,
                                        base.clr_abundance, base.phenotype);

    state.generations.push_back(std::move(base));
    return state;
}

void advance_generation(SimulationState& state) {
    const int t = state.current_generation();
    const int next = t + 1;
    const ScenarioConfig& config = state.config;
    GenerationRecord& prev = state.generations.back();
    const int n_ind = config.n_ind;
    const int n_b = static_cast<int>(prev.microbiota.rows());

    // Parent choice. From G0 every individual is eligible and pairs form at
    // random; from G1 on the configured criterion ranks each sex.
    std::vector<int> selected_F, selected_M;
    if (t == 0 && !config.select_from_base) {
        for (int i = 0; i < prev.size(); ++i)
            (prev.sexes[static_cast<std::size_t>(i)] == Sex::Female ? selected_F : selected_M)
                .push_back(i);
        if (selected_F.empty() || selected_M.empty())
            throw DataError("base population needs at least one individual of each sex");
    } else {
        ScoreInputs score_inputs;
        score_inputs.breeding = &prev.breeding;
        score_inputs.microbiota_effect = &prev.microbiota_effect;
        score_inputs.diversity = &prev.diversity;
        Rng rng = state.seeder.child("selection").child(static_cast<std::uint64_t>(t)).stream();
        Vector scores = score(config.selection, score_inputs, config.w_div,
                              config.mixed_index_standardize, rng);
        std::tie(selected_F, selected_M) = select_breeding_stock(
            scores, prev.sexes, config.size_selection_F, config.size_selection_M);
    }
    for (int i : selected_F) prev.selected[static_cast<std::size_t>(i)] = 1;
    for (int i : selected_M) prev.selected[static_cast<std::size_t>(i)] = 1;

    GenerationRecord record;
    record.index = next;
    {
        Rng rng = state.seeder.child("mating").child(static_cast<std::uint64_t>(next)).stream();
        GenerationGenotypes offspring =
            build_generation(prev.haplotypes, prev.ids, selected_F, selected_M, next, n_ind,
                             config.sex_ratio, state.map, rng);
        record.haplotypes = std::move(offspring.genotypes);
        record.sexes = std::move(offspring.sexes);
        record.ids.reserve(static_cast<std::size_t>(n_ind));
        for (const auto& entry : offspring.pedigree) {
            record.ids.push_back(entry.id);
            record.dam_index.push_back(entry.dam_index);
            record.sire_index.push_back(entry.sire_index);
            record.dam_id.push_back(entry.dam_id);
            record.sire_id.push_back(entry.sire_id);
        }
    }
    record.dosage = record.haplotypes.dosage();

    record.ambient_mean = prev.microbiota.rowwise().mean();
    Matrix genetic_term = centered_genetic_term(state.effects.beta, record.dosage);
    EnvironmentRealization env;
    {
        Rng rng =
            state.seeder.child("env-members").child(static_cast<std::uint64_t>(next)).stream();
        env = realize_environment(state.effects.environment, next, n_ind, rng);
    }
    record.env_design = env.design;

    record.microbiota.resize(n_b, n_ind);
    record.ambient_diversity.resize(n_ind);
    {
        Rng ambient_rng =
            state.seeder.child("ambient").child(static_cast<std::uint64_t>(next)).stream();
        Rng noise_rng =
            state.seeder.child("m-noise").child(static_cast<std::uint64_t>(next)).stream();
        Rng report_rng =
            state.seeder.child("reporting").child(static_cast<std::uint64_t>(next)).stream();
        for (int i = 0; i < n_ind; ++i) {
            Vector ambient =
                ambient_microbiota(record.ambient_mean, config.eta, config.pi, ambient_rng);
            const int dam = record.dam_index[static_cast<std::size_t>(i)];
            record.microbiota.col(i) =
                simulate_microbiota(prev.microbiota.col(dam), ambient, config.lambda,
                                    env.contribution.col(i), genetic_term.col(i), config.sigma_m,
                                    noise_rng);
            record.ambient_diversity[i] = shannon_of_counts(
                multinomial_resample(ambient, config.depth_for(i), report_rng));
        }
    }
    record.clr_abundance = clr_columns(record.microbiota);

    {
        Rng rng = state.seeder.child("y-noise").child(static_cast<std::uint64_t>(next)).stream();
        record.phenotype = compute_phenotypes(state.effects.phenotype, record.dosage,
                                              record.clr_abundance, draw_residual(n_ind, rng));
    }
    record.breeding = breeding_values(state.effects.phenotype, state.effects.beta, record.dosage);
    record.microbiota_effect = record.clr_abundance.transpose() * state.effects.phenotype.omega;
    {
        Rng rng = state.seeder.child("diversity").child(static_cast<std::uint64_t>(next)).stream();
        record.diversity = diversity_of_columns(record.microbiota, config, rng,
                                                config.export_counts ? &record.resampled_counts
                                                                     : nullptr);
    }
    record.selected.assign(static_cast<std::size_t>(n_ind), 0);
    record.realized = realized_components(state.effects.phenotype, state.effects.beta,
                                          record.dosage, record.clr_abundance, record.phenotype);

    state.generations.push_back(std::move(record));
}

SimulationResult run_simulation(const BaseInputs& inputs, const ScenarioConfig& config,
                                std::uint64_t replicate) {
    SimulationState state = prepare_base(inputs, config, replicate);
    for (int g = 0; g < state.config.n_gen; ++g) advance_generation(state);

    SimulationResult result;
    result.config = state.config;
    result.replicate = replicate;
    result.snp_ids = std::move(state.snp_ids);
    result.taxon_ids = std::move(state.taxon_ids);
    result.effects = std::move(state.effects);
    result.generations = std::move(state.generations);
    return result;
}

std::vector<GenerationSummary> summarize_generations(
    const std::vector<GenerationRecord>& records) {
    std::vector<GenerationSummary> out;
    if (records.empty()) return out;
    const double mean0 = stats::mean(records.front().phenotype);
    const double sd0 = stats::sd(records.front().phenotype);
    const double div0 = stats::mean(records.front().diversity);
    for (const auto& r : records) {
        GenerationSummary s;
        s.generation = r.index;
        s.n = r.size();
        s.mean_phenotype = stats::mean(r.phenotype);
        s.sd_phenotype = stats::sd(r.phenotype);
        s.mean_diversity = stats::mean(r.diversity);
        s.sd_diversity = stats::sd(r.diversity);
        s.mean_bv_total = stats::mean(r.breeding.total);
        s.sd_bv_total = stats::sd(r.breeding.total);
        s.h2_direct_obs = r.realized.h2_direct;
        s.b2_obs = r.realized.b2;
        s.h2_total_obs = r.realized.h2_total;
        s.phenotype_change_sd = sd0 > 0.0 ? (s.mean_phenotype - mean0) / sd0 : 0.0;
        s.diversity_change = s.mean_diversity - div0;
        out.push_back(s);
    }
    return out;
}

namespace {

AggregateCell aggregate_cell(const std::vector<double>& values) {
    AggregateCell cell;
    if (values.empty()) return cell;
    Eigen::Map<const Vector> v(values.data(), static_cast<Eigen::Index>(values.size()));
    cell.mean = v.mean();
    const double half =
        values.size() > 1 ? 1.96 * stats::sd(v) / std::sqrt(static_cast<double>(values.size()))
                          : 0.0;
    cell.lo = cell.mean - half;
    cell.hi = cell.mean + half;
    return cell;
}

} // namespace

ReplicateSetResult run_replicates(const BaseInputs& inputs, const ScenarioConfig& config,
                                  int n_replicates, int parallelism,
                                  const std::function<void(const SimulationResult&)>& sink) {
    if (n_replicates < 1) throw ConfigError("run_replicates: need at least one replicate");
    ReplicateSetResult result;
    std::vector<std::vector<GenerationSummary>> summaries(
        static_cast<std::size_t>(n_replicates));
    std::vector<char> ok(static_cast<std::size_t>(n_replicates), 0);
    std::vector<ReplicateFailure> failures;

    std::atomic<int> next{0};
    std::mutex sink_mutex;
    auto worker = [&]() {
        while (true) {
            const int r = next.fetch_add(1);
            if (r >= n_replicates) return;
            try {
                SimulationResult sim =
                    run_simulation(inputs, config, static_cast<std::uint64_t>(r));
                summaries[static_cast<std::size_t>(r)] = summarize_generations(sim.generations);
                ok[static_cast<std::size_t>(r)] = 1;
                if (sink) {
                    std::lock_guard<std::mutex> lock(sink_mutex);
                    sink(sim);
                }
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(sink_mutex);
                failures.push_back({r, e.what()});
            }
        }
    };

    const int n_threads = std::max(1, std::min(parallelism, n_replicates));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(static_cast<std::size_t>(n_threads));
        for (int i = 0; i < n_threads; ++i) threads.emplace_back(worker);
        for (auto& th : threads) th.join();
    }

    for (int r = 0; r < n_replicates; ++r) {
        if (!ok[static_cast<std::size_t>(r)]) continue;
        result.replicate_ids.push_back(r);
        result.summaries.push_back(std::move(summaries[static_cast<std::size_t>(r)]));
    }
    std::sort(failures.begin(), failures.end(),
              [](const ReplicateFailure& a, const ReplicateFailure& b) {
                  return a.replicate < b.replicate;
              });
    result.failures = std::move(failures);

    if (!result.summaries.empty()) {
        const std::size_t n_gen = result.summaries.front().size();
        result.aggregate.replicates = static_cast<int>(result.summaries.size());
        for (std::size_t g = 0; g < n_gen; ++g) {
            std::vector<double> y, d, h2, b2, ysd, dchg;
            for (const auto& summary : result.summaries) {
                if (summary.size() != n_gen) continue;
                y.push_back(summary[g].mean_phenotype);
                d.push_back(summary[g].mean_diversity);
                h2.push_back(summary[g].h2_direct_obs);
                b2.push_back(summary[g].b2_obs);
                ysd.push_back(summary[g].phenotype_change_sd);
                dchg.push_back(summary[g].diversity_change);
            }
            result.aggregate.generations.push_back(result.summaries.front()[g].generation);
            result.aggregate.mean_phenotype.push_back(aggregate_cell(y));
            result.aggregate.mean_diversity.push_back(aggregate_cell(d));
            result.aggregate.h2_direct_obs.push_back(aggregate_cell(h2));
            result.aggregate.b2_obs.push_back(aggregate_cell(b2));
            result.aggregate.phenotype_change_sd.push_back(aggregate_cell(ysd));
            result.aggregate.diversity_change.push_back(aggregate_cell(dchg));
        }
    }
    return result;
}

} // namespace hologen
