#include "hologen/microbiome.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "hologen/errors.hpp"
#include "hologen/genome.hpp"
#include "hologen/stats.hpp"

namespace hologen {

bool TaxaClustering::is_genetic_taxon(int taxon) const {
    return std::binary_search(genetic_taxa.begin(), genetic_taxa.end(), taxon);
}

namespace {

// Pairwise Bray-Curtis between rows, tolerant of all-zero profiles (zero
// vs zero -> 0, zero vs anything -> 1) so rarefied inputs cannot blow up.
Matrix taxa_dissimilarity(const Matrix& counts) {
    const Eigen::Index n = counts.rows();
    Vector row_sums = counts.rowwise().sum();
    Matrix d = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            double dij;
            if (row_sums[i] <= 0.0 && row_sums[j] <= 0.0) dij = 0.0;
            else if (row_sums[i] <= 0.0 || row_sums[j] <= 0.0) dij = 1.0;
            else {
                const double shared = counts.row(i).cwiseMin(counts.row(j)).sum();
                dij = std::clamp(1.0 - 2.0 * shared / (row_sums[i] + row_sums[j]), 0.0, 1.0);
            }
            d(i, j) = d(j, i) = dij;
        }
    }
    return d;
}

} // namespace

TaxaClustering cluster_taxa(const Matrix& counts, int n_clusters) {
    const int n = static_cast<int>(counts.rows());
    if (n_clusters < 1 || n_clusters > n)
        throw std::invalid_argument("cluster_taxa: need 1 <= n_clusters <= n_taxa");

    Matrix d = taxa_dissimilarity(counts);
    std::vector<bool> active(static_cast<std::size_t>(n), true);
    std::vector<double> size(static_cast<std::size_t>(n), 1.0);
    std::vector<std::vector<int>> members(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) members[static_cast<std::size_t>(i)] = {i};

    // UPGMA via nearest-neighbor chains; ties resolved toward the smallest
    // index (and toward the chain predecessor, which keeps the chain valid).
    std::vector<int> chain;
    int merges_left = n - n_clusters;
    while (merges_left > 0) {
        if (chain.empty()) {
            for (int i = 0; i < n; ++i)
                if (active[static_cast<std::size_t>(i)]) { chain.push_back(i); break; }
        }
        const int a = chain.back();
        const int prev = chain.size() >= 2 ? chain[chain.size() - 2] : -1;
        int best = -1;
        double best_d = std::numeric_limits<double>::infinity();
        for (int j = 0; j < n; ++j) {
            if (!active[static_cast<std::size_t>(j)] || j == a) continue;
            const double dj = d(a, j);
            if (dj < best_d || (dj == best_d && j == prev)) {
                best_d = dj;
                best = j;
            }
        }
        if (best == prev && prev != -1) {
            const int keep = std::min(a, prev), drop = std::max(a, prev);
            const double sk = size[static_cast<std::size_t>(keep)];
            const double sd_ = size[static_cast<std::size_t>(drop)];
            for (int k = 0; k < n; ++k) {
                if (!active[static_cast<std::size_t>(k)] || k == keep || k == drop) continue;
                const double merged = (sk * d(keep, k) + sd_ * d(drop, k)) / (sk + sd_);
                d(keep, k) = d(k, keep) = merged;
            }
            size[static_cast<std::size_t>(keep)] += sd_;
            active[static_cast<std::size_t>(drop)] = false;
            auto& mk = members[static_cast<std::size_t>(keep)];
            auto& md = members[static_cast<std::size_t>(drop)];
            mk.insert(mk.end(), md.begin(), md.end());
            md.clear();
            chain.pop_back();
            chain.pop_back();
            --merges_left;
        } else {
            chain.push_back(best);
        }
    }

    // Stable cluster ids: sort surviving clusters by their smallest member.
    std::vector<std::vector<int>> final_members;
    for (int i = 0; i < n; ++i) {
        if (!active[static_cast<std::size_t>(i)]) continue;
        auto m = members[static_cast<std::size_t>(i)];
        std::sort(m.begin(), m.end());
        final_members.push_back(std::move(m));
    }
    std::sort(final_members.begin(), final_members.end(),
              [](const auto& x, const auto& y) { return x.front() < y.front(); });

    TaxaClustering clustering;
    clustering.n_clusters = static_cast<int>(final_members.size());
    clustering.members = std::move(final_members);
    clustering.assignment.assign(static_cast<std::size_t>(n), -1);
    for (int c = 0; c < clustering.n_clusters; ++c)
        for (int taxon : clustering.members[static_cast<std::size_t>(c)])
            clustering.assignment[static_cast<std::size_t>(taxon)] = c;
    return clustering;
}

void select_genetic_clusters(TaxaClustering& clustering, double otu_g, Rng& rng, int size_min,
                             int size_max) {
    if (otu_g <= 0.0 || otu_g > 1.0)
        throw std::invalid_argument("select_genetic_clusters: otu_g must be in (0,1]");
    const int n_b = clustering.n_taxa();
    const int threshold = static_cast<int>(std::ceil(otu_g * n_b - 1e-9));

    clustering.genetic_clusters.clear();
    clustering.genetic_taxa.clear();

    auto commit = [&](const std::vector<int>& chosen) {
        clustering.genetic_clusters = chosen;
        std::sort(clustering.genetic_clusters.begin(), clustering.genetic_clusters.end());
        for (int c : clustering.genetic_clusters)
            for (int taxon : clustering.members[static_cast<std::size_t>(c)])
                clustering.genetic_taxa.push_back(taxon);
        std::sort(clustering.genetic_taxa.begin(), clustering.genetic_taxa.end());
    };

    if (threshold >= n_b) {
        std::vector<int> all(static_cast<std::size_t>(clustering.n_clusters));
        std::iota(all.begin(), all.end(), 0);
        commit(all);
        return;
    }

    for (int attempt = 0; attempt <= 3; ++attempt) {
        const int lo = std::max(1, size_min - 5 * attempt);
        const int hi = size_max + 5 * attempt;
        std::vector<int> eligible;
        int eligible_taxa = 0;
        for (int c = 0; c < clustering.n_clusters; ++c) {
            const int sz = static_cast<int>(clustering.members[static_cast<std::size_t>(c)].size());
            if (sz >= lo && sz <= hi) {
                eligible.push_back(c);
                eligible_taxa += sz;
            }
        }
        if (eligible_taxa < threshold) continue;
        std::shuffle(eligible.begin(), eligible.end(), rng);
        std::vector<int> chosen;
        int covered = 0;
        for (int c : eligible) {
            chosen.push_back(c);
            covered += static_cast<int>(clustering.members[static_cast<std::size_t>(c)].size());
            if (covered >= threshold) break;
        }
        commit(chosen);
        return;
    }
    throw DataError("select_genetic_clusters: cannot reach " + std::to_string(threshold) +
                    " taxa from clusters sized within the (relaxed) bounds");
}

BetaMatrix build_beta(const TaxaClustering& clustering, int n_g, double sigma_beta, Rng& rng,
                      std::optional<double> sigma_beta_scaled) {
    BetaMatrix beta;
    beta.effects.resize(clustering.n_taxa(), n_g);
    const int v = static_cast<int>(clustering.genetic_clusters.size());
    if (v == 0) {
        beta.effects.setZero();
        return beta;
    }

    beta.qtl_per_cluster = std::max<int>(1, static_cast<int>(std::llround(0.2 * n_g / v)));
    if (beta.qtl_per_cluster > n_g)
        throw DataError("build_beta: QTL_o exceeds the number of SNPs");
    beta.sigma_beta = sigma_beta_scaled
                          ? *sigma_beta_scaled / std::sqrt(static_cast<double>(beta.qtl_per_cluster))
                          : sigma_beta;

    std::normal_distribution<double> std_normal(0.0, 1.0);
    std::vector<int> all_snps(static_cast<std::size_t>(n_g));
    std::iota(all_snps.begin(), all_snps.end(), 0);

    std::vector<Eigen::Triplet<double>> triplets;
    for (int c : clustering.genetic_clusters) {
        std::vector<int> support;
        support.reserve(static_cast<std::size_t>(beta.qtl_per_cluster));
        std::sample(all_snps.begin(), all_snps.end(), std::back_inserter(support),
                    beta.qtl_per_cluster, rng);
        beta.cluster_qtls.push_back(support);

        std::vector<double> cluster_effect(support.size());
        for (auto& e : cluster_effect) e = beta.sigma_beta * std_normal(rng);
        for (int taxon : clustering.members[static_cast<std::size_t>(c)]) {
            for (std::size_t q = 0; q < support.size(); ++q) {
                const double taxon_effect = beta.sigma_beta * std_normal(rng);
                triplets.emplace_back(taxon, support[q], cluster_effect[q] + taxon_effect);
            }
        }
    }
    beta.effects.setFromTriplets(triplets.begin(), triplets.end());
    return beta;
}

Matrix centered_genetic_term(const BetaMatrix& beta, const Matrix& genotypes) {
    if (beta.effects.cols() != genotypes.rows())
        throw std::invalid_argument("centered_genetic_term: dimension mismatch");
    Matrix term = beta.effects * genotypes;
    Vector row_means = term.rowwise().mean();
    term.colwise() -= row_means;
    return term;
}

Vector ambient_microbiota(const Vector& prev_mean, double eta, double pi, Rng& rng) {
    Vector draw = sample_dirichlet(prev_mean, eta, rng);
    return pi * draw + (1.0 - pi) * prev_mean;
}

EnvironmentModel init_environment(const std::vector<EnvEffectSpec>& specs,
                                  const TaxaClustering& clustering,
                                  const std::vector<std::string>& taxon_ids, int n_ind,
                                  Rng& rng) {
    EnvironmentModel env;
    env.specs = specs;
    const int n_b = clustering.n_taxa();
    env.theta = Matrix::Zero(n_b, static_cast<Eigen::Index>(specs.size()));

    std::map<std::string, int> taxon_index;
    for (std::size_t i = 0; i < taxon_ids.size(); ++i)
        taxon_index[taxon_ids[i]] = static_cast<int>(i);

    std::normal_distribution<double> std_normal(0.0, 1.0);
    for (std::size_t s = 0; s < specs.size(); ++s) {
        const auto& spec = specs[s];
        std::vector<int> taxa;
        switch (spec.scope) {
            case EnvEffectSpec::Scope::All:
                taxa.resize(static_cast<std::size_t>(n_b));
                std::iota(taxa.begin(), taxa.end(), 0);
                break;
            case EnvEffectSpec::Scope::Clusters:
                for (int c : spec.cluster_ids) {
                    if (c < 0 || c >= clustering.n_clusters)
                        throw DataError("environment spec references unknown cluster id " +
                                        std::to_string(c));
                    const auto& m = clustering.members[static_cast<std::size_t>(c)];
                    taxa.insert(taxa.end(), m.begin(), m.end());
                }
                break;
            case EnvEffectSpec::Scope::Taxa:
                for (const auto& id : spec.taxon_ids) {
                    const auto it = taxon_index.find(id);
                    if (it == taxon_index.end())
                        throw DataError("environment spec references unknown taxon id '" + id +
                                        "'");
                    taxa.push_back(it->second);
                }
                break;
            case EnvEffectSpec::Scope::RandomClusters: {
                if (spec.random_cluster_count > clustering.n_clusters)
                    throw DataError("environment spec asks for more random clusters than exist");
                std::vector<int> all(static_cast<std::size_t>(clustering.n_clusters));
                std::iota(all.begin(), all.end(), 0);
                std::vector<int> chosen;
                std::sample(all.begin(), all.end(), std::back_inserter(chosen),
                            spec.random_cluster_count, rng);
                for (int c : chosen) {
                    const auto& m = clustering.members[static_cast<std::size_t>(c)];
                    taxa.insert(taxa.end(), m.begin(), m.end());
                }
                break;
            }
        }
        std::sort(taxa.begin(), taxa.end());
        taxa.erase(std::unique(taxa.begin(), taxa.end()), taxa.end());
        for (int taxon : taxa)
            env.theta(taxon, static_cast<Eigen::Index>(s)) = spec.effect_sd * std_normal(rng);
        env.resolved_taxa.push_back(std::move(taxa));

        std::vector<int> persistent;
        if (spec.persistent_assignment) {
            std::vector<int> all(static_cast<std::size_t>(n_ind));
            std::iota(all.begin(), all.end(), 0);
            const int count =
                std::clamp(round_half_up(spec.target_fraction * n_ind), 1, n_ind);
            std::sample(all.begin(), all.end(), std::back_inserter(persistent), count, rng);
        }
        env.persistent_members.push_back(std::move(persistent));
    }
    return env;
}

EnvironmentRealization realize_environment(const EnvironmentModel& env, int generation, int n_ind,
                                           Rng& rng) {
    EnvironmentRealization out;
    const auto k = static_cast<Eigen::Index>(env.specs.size());
    out.design = Matrix::Zero(n_ind, k);
    for (Eigen::Index s = 0; s < k; ++s) {
        const auto& spec = env.specs[static_cast<std::size_t>(s)];
        if (!spec.generations.count(generation)) continue;
        if (spec.persistent_assignment) {
            for (int m : env.persistent_members[static_cast<std::size_t>(s)]) {
                if (m >= n_ind)
                    throw DataError("persistent environment assignment does not fit generation "
                                    "size");
                out.design(m, s) = 1.0;
            }
        } else {
            std::vector<int> all(static_cast<std::size_t>(n_ind));
            std::iota(all.begin(), all.end(), 0);
            std::vector<int> chosen;
            const int count = std::clamp(round_half_up(spec.target_fraction * n_ind), 1, n_ind);
            std::sample(all.begin(), all.end(), std::back_inserter(chosen), count, rng);
            for (int m : chosen) out.design(m, s) = 1.0;
        }
    }
    if (k > 0)
        out.contribution = env.theta * out.design.transpose();
    else
        out.contribution = Matrix::Zero(env.theta.rows(), n_ind);
    return out;
}

Vector simulate_microbiota(const Vector& dam, const Vector& ambient, double lambda,
                           const Vector& env_contribution, const Vector& genetic_contribution,
                           double sigma_m, Rng& rng) {
    if (lambda < 0.0 || lambda > 1.0)
        throw std::invalid_argument("simulate_microbiota: lambda must be in [0,1]");
    Vector mix = lambda * dam + (1.0 - lambda) * ambient;
    Vector v = clr(mix) + env_contribution + genetic_contribution;
    if (sigma_m > 0.0) {
        std::normal_distribution<double> noise(0.0, sigma_m);
        for (Eigen::Index i = 0; i < v.size(); ++i) v[i] += noise(rng);
    }
    return clr_inv(v);
}

TaxaHeritabilityProfile taxa_heritability_profile(const BaseInputs& base,
                                                  const TaxaClustering& clustering,
                                                  const std::vector<double>& effect_scale_grid,
                                                  const ScenarioConfig& config) {
    if (effect_scale_grid.empty())
        throw std::invalid_argument("taxa_heritability_profile: empty grid");
    const int n_b = base.n_taxa();
    const int n_g = base.n_snps();
    const int n_parents = base.n_individuals();
    const int n_ind = config.resolve_n_ind(n_parents);

    // Smoothed base compositions.
    Matrix empirical(n_b, n_parents);
    for (int i = 0; i < n_parents; ++i) {
        const double total = base.taxa_counts.col(i).sum();
        empirical.col(i) = base.taxa_counts.col(i) / total;
    }
    Vector pop_mean = empirical.rowwise().mean();
    if ((pop_mean.array() <= 0.0).any())
        throw DataError("taxa_heritability_profile: a taxon is absent from every individual");
    Matrix comps = config.pi * empirical;
    comps.colwise() += (1.0 - config.pi) * pop_mean;

    StreamSeeder seeder = StreamSeeder(config.seed).child("taxa-h2");
    Rng phase_rng = seeder.child("phase").stream();
    PhasedGenotypes phased = phase_base_population(base.genotypes, phase_rng);

    Rng sex_rng = seeder.child("base-sex").stream();
    std::vector<Sex> base_sexes = assign_sexes(n_parents, config.sex_ratio, sex_rng);
    std::vector<int> females, males;
    for (int i = 0; i < n_parents; ++i)
        (base_sexes[static_cast<std::size_t>(i)] == Sex::Female ? females : males).push_back(i);
    if (females.empty() || males.empty())
        throw DataError("taxa_heritability_profile: base population needs both sexes");

    GeneticMap map = GeneticMap::uniform(n_g);
    Rng mating_rng = seeder.child("mating").stream();
    GenerationGenotypes offspring =
        build_generation(phased, base.individual_ids, females, males, 1, n_ind,
                         config.sex_ratio, map, mating_rng);
    Matrix g1 = offspring.genotypes.dosage();

    Vector ambient_mean = comps.rowwise().mean();
    Matrix ambient(n_b, n_ind);
    Rng ambient_rng = seeder.child("ambient").stream();
    for (int i = 0; i < n_ind; ++i)
        ambient.col(i) = ambient_microbiota(ambient_mean, config.eta, config.pi, ambient_rng);

    Matrix noise = Matrix::Zero(n_b, n_ind);
    if (config.sigma_m > 0.0) {
        Rng noise_rng = seeder.child("noise").stream();
        std::normal_distribution<double> gauss(0.0, config.sigma_m);
        for (int i = 0; i < n_ind; ++i)
            for (int t = 0; t < n_b; ++t) noise(t, i) = gauss(noise_rng);
    }

    TaxaHeritabilityProfile profile;
    profile.effect_scales = effect_scale_grid;
    for (std::size_t k = 0; k < effect_scale_grid.size(); ++k) {
        Rng beta_rng = seeder.child("beta").child(static_cast<std::uint64_t>(k)).stream();
        BetaMatrix beta =
            build_beta(clustering, n_g, 0.0, beta_rng, effect_scale_grid[k]);
        profile.qtl_per_cluster = beta.qtl_per_cluster;
        Matrix term = centered_genetic_term(beta, g1);

        Matrix m1(n_b, n_ind);
        for (int i = 0; i < n_ind; ++i) {
            const int dam = offspring.pedigree[static_cast<std::size_t>(i)].dam_index;
            Vector mix = config.lambda * comps.col(dam) + (1.0 - config.lambda) * ambient.col(i);
            m1.col(i) = clr_inv(clr(mix) + term.col(i) + noise.col(i));
        }
        Matrix b1 = clr_columns(m1);

        Vector h2(n_b);
        for (int t = 0; t < n_b; ++t) {
            const Vector genetic = term.row(t).transpose();
            const Vector abundance = b1.row(t).transpose();
            const double denom = stats::variance(abundance);
            h2[t] = denom > 0.0 ? stats::variance(genetic) / denom : 0.0;
        }
        profile.taxa_h2.push_back(std::move(h2));
    }
    return profile;
}

} // namespace hologen
