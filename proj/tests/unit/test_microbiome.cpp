#include <algorithm>
#include <numeric>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "hologen/errors.hpp"
#include "hologen/microbiome.hpp"
#include "hologen/stats.hpp"

using namespace hologen;

namespace {

TaxaClustering make_clustering(const std::vector<int>& sizes) {
    TaxaClustering clustering;
    clustering.n_clusters = static_cast<int>(sizes.size());
    int taxon = 0;
    for (std::size_t c = 0; c < sizes.size(); ++c) {
        std::vector<int> members;
        for (int k = 0; k < sizes[c]; ++k) members.push_back(taxon++);
        clustering.members.push_back(members);
    }
    clustering.assignment.resize(static_cast<std::size_t>(taxon));
    for (int c = 0; c < clustering.n_clusters; ++c)
        for (int t : clustering.members[static_cast<std::size_t>(c)])
            clustering.assignment[static_cast<std::size_t>(t)] = c;
    return clustering;
}

std::set<std::set<int>> partition_of(const TaxaClustering& clustering) {
    std::set<std::set<int>> partition;
    for (const auto& members : clustering.members)
        partition.insert(std::set<int>(members.begin(), members.end()));
    return partition;
}

} // namespace

TEST_CASE("clustering recovers blocks with disjoint support") {
    // Taxa 0-4 live in individuals 0-3 only, taxa 5-9 in individuals 4-7.
    Rng rng(3);
    std::uniform_real_distribution<double> unit(1.0, 9.0);
    Matrix counts = Matrix::Zero(10, 8);
    for (int t = 0; t < 5; ++t)
        for (int i = 0; i < 4; ++i) counts(t, i) = std::floor(unit(rng));
    for (int t = 5; t < 10; ++t)
        for (int i = 4; i < 8; ++i) counts(t, i) = std::floor(unit(rng));

    // Brute-force check of the construction: cross-block distance is exactly 1.
    for (int t = 0; t < 5; ++t)
        for (int u = 5; u < 10; ++u)
            CHECK(bray_curtis(counts.row(t).transpose(), counts.row(u).transpose()) ==
                  doctest::Approx(1.0));

    TaxaClustering clustering = cluster_taxa(counts, 2);
    std::set<std::set<int>> expected = {{0, 1, 2, 3, 4}, {5, 6, 7, 8, 9}};
    CHECK(partition_of(clustering) == expected);
}

TEST_CASE("full cut yields singletons") {
    Rng rng(5);
    Matrix counts(6, 4);
    std::uniform_real_distribution<double> unit(1.0, 9.0);
    for (int t = 0; t < 6; ++t)
        for (int i = 0; i < 4; ++i) counts(t, i) = std::floor(unit(rng));
    TaxaClustering clustering = cluster_taxa(counts, 6);
    CHECK(clustering.n_clusters == 6);
    for (const auto& m : clustering.members) CHECK(m.size() == 1);
}

TEST_CASE("clustering is invariant to taxon order up to relabeling") {
    Rng rng(7);
    std::uniform_real_distribution<double> unit(0.0, 20.0);
    Matrix counts(12, 9);
    for (int t = 0; t < 12; ++t)
        for (int i = 0; i < 9; ++i) counts(t, i) = std::floor(unit(rng));

    TaxaClustering original = cluster_taxa(counts, 4);

    std::vector<int> perm(12);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix permuted(12, 9);
    for (int t = 0; t < 12; ++t) permuted.row(perm[static_cast<std::size_t>(t)]) = counts.row(t);
    TaxaClustering relabeled = cluster_taxa(permuted, 4);

    // Map the permuted partition back through the permutation.
    std::set<std::set<int>> mapped;
    for (const auto& members : relabeled.members) {
        std::set<int> back;
        for (int t : members)
            back.insert(static_cast<int>(
                std::find(perm.begin(), perm.end(), t) - perm.begin()));
        mapped.insert(back);
    }
    CHECK(mapped == partition_of(original));
}

TEST_CASE("cluster selection stops at the taxa threshold") {
    Rng rng(11);
    TaxaClustering clustering = make_clustering({12, 15, 18, 40});  // n_b = 85
    select_genetic_clusters(clustering, 12.0 / 85.0, rng);
    CHECK(clustering.genetic_taxa.size() >= 12);
    // One-cluster overshoot only: removing the last-added cluster must drop
    // below the threshold, so the total stays under threshold + max size.
    CHECK(clustering.genetic_taxa.size() <= 12 + 25);
    for (int c : clustering.genetic_clusters) {
        const auto size = clustering.members[static_cast<std::size_t>(c)].size();
        CHECK(size >= 10);
        CHECK(size <= 25);
    }
}

TEST_CASE("bound relaxation engages when no cluster fits") {
    Rng rng(13);
    TaxaClustering clustering = make_clustering({30, 30, 30});  // n_b = 90
    select_genetic_clusters(clustering, 0.3, rng);              // threshold 27
    CHECK(!clustering.genetic_clusters.empty());
    CHECK(clustering.genetic_taxa.size() >= 27);
}

TEST_CASE("selection fails after three relaxations") {
    Rng rng(17);
    TaxaClustering clustering = make_clustering({50, 50});
    CHECK_THROWS_AS(select_genetic_clusters(clustering, 0.1, rng), DataError);
}

TEST_CASE("otu_g = 1 selects every cluster") {
    Rng rng(19);
    TaxaClustering clustering = make_clustering({30, 50, 7});
    select_genetic_clusters(clustering, 1.0, rng);
    CHECK(clustering.genetic_clusters == std::vector<int>{0, 1, 2});
    CHECK(clustering.genetic_taxa.size() == 87);
}

TEST_CASE("beta support is shared within a cluster and sized by the default rule") {
    Rng rng(23);
    TaxaClustering clustering = make_clustering({2, 12});
    clustering.genetic_clusters = {0, 1};
    clustering.genetic_taxa.resize(14);
    std::iota(clustering.genetic_taxa.begin(), clustering.genetic_taxa.end(), 0);

    const int n_g = 200;
    BetaMatrix beta = build_beta(clustering, n_g, 0.3, rng);
    CHECK(beta.qtl_per_cluster == 20);  // round(0.2 * 200 / 2)

    Matrix dense = Matrix(beta.effects);
    auto support = [&](int taxon) {
        std::set<int> cols;
        for (int g = 0; g < n_g; ++g)
            if (dense(taxon, g) != 0.0) cols.insert(g);
        return cols;
    };
    CHECK(support(0) == support(1));
    CHECK(support(0).size() == 20);
    CHECK(support(2) == support(13));

    // Rows for taxa outside the genetic set are all-zero.
    TaxaClustering partial = make_clustering({2, 12});
    partial.genetic_clusters = {0};
    partial.genetic_taxa = {0, 1};
    BetaMatrix beta2 = build_beta(partial, n_g, 0.3, rng);
    Matrix dense2 = Matrix(beta2.effects);
    for (int t = 2; t < 14; ++t) CHECK(dense2.row(t).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("nonzero beta entries have variance 2 sigma^2 and positive within-cluster covariance") {
    Rng rng(29);
    const double sigma = 0.2;
    std::vector<double> entries;
    std::vector<double> pair_products;
    for (int rep = 0; rep < 400; ++rep) {
        TaxaClustering clustering = make_clustering({2});
        clustering.genetic_clusters = {0};
        clustering.genetic_taxa = {0, 1};
        BetaMatrix beta = build_beta(clustering, 50, sigma, rng);
        Matrix dense = Matrix(beta.effects);
        for (int g = 0; g < 50; ++g) {
            if (dense(0, g) == 0.0 && dense(1, g) == 0.0) continue;
            entries.push_back(dense(0, g));
            entries.push_back(dense(1, g));
            pair_products.push_back(dense(0, g) * dense(1, g));
        }
    }
    Eigen::Map<Vector> e(entries.data(), static_cast<Eigen::Index>(entries.size()));
    CHECK(stats::variance(e) == doctest::Approx(2.0 * sigma * sigma).epsilon(0.05));
    // Shared cluster draw contributes covariance sigma^2 per column.
    Eigen::Map<Vector> p(pair_products.data(), static_cast<Eigen::Index>(pair_products.size()));
    CHECK(p.mean() == doctest::Approx(sigma * sigma).epsilon(0.15));
}

TEST_CASE("sigma_beta_scaled divides by sqrt(QTL_o)") {
    Rng rng(31);
    TaxaClustering clustering = make_clustering({4});
    clustering.genetic_clusters = {0};
    clustering.genetic_taxa = {0, 1, 2, 3};
    BetaMatrix beta = build_beta(clustering, 100, 0.0, rng, 0.3);
    CHECK(beta.qtl_per_cluster == 20);
    CHECK(beta.sigma_beta == doctest::Approx(0.3 / std::sqrt(20.0)));
}

TEST_CASE("centered genetic term has zero row means") {
    Rng rng(37);
    TaxaClustering clustering = make_clustering({3});
    clustering.genetic_clusters = {0};
    clustering.genetic_taxa = {0, 1, 2};
    BetaMatrix beta = build_beta(clustering, 30, 0.5, rng);
    Matrix genotypes(30, 25);
    std::uniform_int_distribution<int> d(0, 2);
    for (int i = 0; i < 30; ++i)
        for (int j = 0; j < 25; ++j) genotypes(i, j) = d(rng);
    Matrix term = centered_genetic_term(beta, genotypes);
    CHECK(term.rowwise().mean().cwiseAbs().maxCoeff() < 1e-9);

    BetaMatrix zero;
    zero.effects.resize(3, 30);
    zero.effects.setZero();
    CHECK(centered_genetic_term(zero, genotypes).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("a single beta entry produces b times the centered dosage row") {
    BetaMatrix beta;
    beta.effects.resize(2, 3);
    std::vector<Eigen::Triplet<double>> t{{0, 1, 0.7}};
    beta.effects.setFromTriplets(t.begin(), t.end());
    Matrix genotypes(3, 4);
    genotypes << 0, 1, 2, 1, 2, 0, 1, 1, 1, 2, 0, 2;
    Matrix term = centered_genetic_term(beta, genotypes);
    Vector g = genotypes.row(1).transpose();
    Vector expected = 0.7 * (g.array() - g.mean());
    CHECK((term.row(0).transpose() - expected).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(term.row(1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("ambient microbiota is a convex blend around the previous mean") {
    Rng rng(41);
    Vector mean(4);
    mean << 0.4, 0.3, 0.2, 0.1;

    Vector no_individual = ambient_microbiota(mean, 25.0, 0.0, rng);
    CHECK((no_individual - mean).cwiseAbs().maxCoeff() == 0.0);

    Vector acc = Vector::Zero(4);
    const int draws = 100000;
    bool min_floor_ok = true;
    for (int k = 0; k < draws; ++k) {
        Vector a = ambient_microbiota(mean, 25.0, 0.75, rng);
        acc += a;
        if (a.minCoeff() < (1.0 - 0.75) * mean.minCoeff() - 1e-15) min_floor_ok = false;
    }
    CHECK((acc / draws - mean).cwiseAbs().maxCoeff() < 0.005);
    CHECK(min_floor_ok);
}

TEST_CASE("environment realization marks the configured fraction at active generations") {
    EnvEffectSpec spec;
    spec.generations = {1};
    spec.target_fraction = 0.5;
    spec.scope = EnvEffectSpec::Scope::All;
    spec.effect_sd = 5.0;

    TaxaClustering clustering = make_clustering({10, 10});
    std::vector<std::string> taxon_ids;
    for (int t = 0; t < 20; ++t) taxon_ids.push_back("tax" + std::to_string(t));

    Rng rng(43);
    EnvironmentModel env = init_environment({spec}, clustering, taxon_ids, 500, rng);
    CHECK(env.theta.rows() == 20);
    CHECK(env.theta.cols() == 1);
    CHECK((env.theta.col(0).array() != 0.0).count() == 20);

    Rng g1_rng(44), g2_rng(45);
    EnvironmentRealization at1 = realize_environment(env, 1, 500, g1_rng);
    CHECK(at1.design.col(0).sum() == doctest::Approx(250.0));
    EnvironmentRealization at2 = realize_environment(env, 2, 500, g2_rng);
    CHECK(at2.design.col(0).sum() == doctest::Approx(0.0));
    CHECK(at2.contribution.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("theta is frozen across generations while membership re-randomizes") {
    EnvEffectSpec spec;
    spec.generations = {1, 2, 3};
    spec.target_fraction = 0.4;
    spec.scope = EnvEffectSpec::Scope::Clusters;
    spec.cluster_ids = {1};
    spec.effect_sd = 2.0;

    TaxaClustering clustering = make_clustering({5, 5});
    std::vector<std::string> taxon_ids;
    for (int t = 0; t < 10; ++t) taxon_ids.push_back("tax" + std::to_string(t));

    Rng rng(47);
    EnvironmentModel env = init_environment({spec}, clustering, taxon_ids, 50, rng);
    // Scope restricted to cluster 1 (taxa 5..9).
    for (int t = 0; t < 5; ++t) CHECK(env.theta(t, 0) == 0.0);

    Rng r1(48), r2(49);
    EnvironmentRealization a = realize_environment(env, 1, 50, r1);
    EnvironmentRealization b = realize_environment(env, 2, 50, r2);
    CHECK(a.design.col(0).sum() == doctest::Approx(20.0));
    CHECK(b.design.col(0).sum() == doctest::Approx(20.0));
    CHECK(a.design != b.design);  // re-randomized members

    // theta columns applied at both generations are bitwise identical: the
    // contribution for a treated individual equals the frozen theta column.
    Vector theta = env.theta.col(0);
    for (int i = 0; i < 50; ++i) {
        if (a.design(i, 0) > 0.5)
            CHECK((a.contribution.col(i) - theta).cwiseAbs().maxCoeff() == 0.0);
        if (b.design(i, 0) > 0.5)
            CHECK((b.contribution.col(i) - theta).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("persistent assignment reuses the same member slots") {
    EnvEffectSpec spec;
    spec.generations = {1, 2};
    spec.target_fraction = 0.3;
    spec.scope = EnvEffectSpec::Scope::All;
    spec.effect_sd = 1.0;
    spec.persistent_assignment = true;

    TaxaClustering clustering = make_clustering({4});
    std::vector<std::string> taxon_ids = {"a", "b", "c", "d"};
    Rng rng(53);
    EnvironmentModel env = init_environment({spec}, clustering, taxon_ids, 40, rng);
    Rng r1(54), r2(55);
    EnvironmentRealization a = realize_environment(env, 1, 40, r1);
    EnvironmentRealization b = realize_environment(env, 2, 40, r2);
    CHECK(a.design == b.design);
    CHECK(a.design.col(0).sum() == doctest::Approx(12.0));
}

TEST_CASE("environment scope validation") {
    TaxaClustering clustering = make_clustering({4});
    std::vector<std::string> taxon_ids = {"a", "b", "c", "d"};
    Rng rng(59);

    EnvEffectSpec bad_cluster;
    bad_cluster.generations = {1};
    bad_cluster.scope = EnvEffectSpec::Scope::Clusters;
    bad_cluster.cluster_ids = {7};
    CHECK_THROWS_AS(init_environment({bad_cluster}, clustering, taxon_ids, 10, rng), DataError);

    EnvEffectSpec bad_taxon;
    bad_taxon.generations = {1};
    bad_taxon.scope = EnvEffectSpec::Scope::Taxa;
    bad_taxon.taxon_ids = {"zz"};
    CHECK_THROWS_AS(init_environment({bad_taxon}, clustering, taxon_ids, 10, rng), DataError);
}

TEST_CASE("microbiota transmission identity paths") {
    Rng rng(61);
    Vector dam(3), ambient(3), zero = Vector::Zero(3);
    dam << 0.6, 0.3, 0.1;
    ambient << 0.2, 0.3, 0.5;

    Vector pure_vertical = simulate_microbiota(dam, ambient, 1.0, zero, zero, 0.0, rng);
    CHECK((pure_vertical - dam).cwiseAbs().maxCoeff() < 1e-9);

    Vector pure_ambient = simulate_microbiota(dam, ambient, 0.0, zero, zero, 0.0, rng);
    CHECK((pure_ambient - ambient).cwiseAbs().maxCoeff() < 1e-9);

    Vector dam2(2), amb2(2), zero2 = Vector::Zero(2);
    dam2 << 0.6, 0.4;
    amb2 << 0.2, 0.8;
    Vector mixed = simulate_microbiota(dam2, amb2, 0.5, zero2, zero2, 0.0, rng);
    CHECK(mixed[0] == doctest::Approx(0.4).epsilon(1e-9));
    CHECK(mixed[1] == doctest::Approx(0.6).epsilon(1e-9));
}

TEST_CASE("simulated microbiota stays on the simplex under noise and effects") {
    Rng rng(67);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 4 + trial % 8;
        Vector dam = test::random_composition(n, rng);
        Vector ambient = test::random_composition(n, rng);
        Vector env(n), genetic(n);
        std::normal_distribution<double> gauss(0.0, 2.0);
        for (int i = 0; i < n; ++i) {
            env[i] = gauss(rng);
            genetic[i] = gauss(rng);
        }
        Vector m = simulate_microbiota(dam, ambient, 0.3, env, genetic, 0.5, rng);
        CHECK(is_composition(m));
    }
}

TEST_CASE("taxa heritability profile responds to the effect scale") {
    Rng rng(71);
    BaseInputs base = generate_synthetic_base(60, 30, 40, rng, 4000);
    ScenarioConfig config;
    config.n_ind = 60;
    config.n_clusters = 6;
    config.otu_g = 0.4;
    config.qtl_y = 10;
    config.seed = 9;

    TaxaClustering clustering = cluster_taxa(base.taxa_counts, 6);
    Rng sel_rng(72);
    select_genetic_clusters(clustering, config.otu_g, sel_rng, 1, 30);

    TaxaHeritabilityProfile profile =
        taxa_heritability_profile(base, clustering, {0.0, 0.5}, config);
    REQUIRE(profile.taxa_h2.size() == 2);
    CHECK(profile.taxa_h2[0].cwiseAbs().maxCoeff() == 0.0);  // sigma = 0

    double genetic_h2 = 0.0;
    for (int t : clustering.genetic_taxa) genetic_h2 += profile.taxa_h2[1][t];
    CHECK(genetic_h2 > 0.0);
    for (int t = 0; t < base.n_taxa(); ++t)
        if (!clustering.is_genetic_taxon(t)) CHECK(profile.taxa_h2[1][t] == 0.0);
}
