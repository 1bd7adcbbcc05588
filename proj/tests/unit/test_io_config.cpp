#include "doctest.h"
#include "helpers.hpp"
#include "hologen/errors.hpp"
#include "hologen/io_config.hpp"

#include <set>

using namespace hologen;

namespace {

const char* kGeno =
    "snp_id\tind_a\tind_b\tind_c\n"
    "snp1\t0\t1\t2\n"
    "snp2\t2\t2\t0\n";

const char* kMicro =
    "taxon_id\tind_a\tind_b\tind_c\n"
    "tax1\t5\t0\t7\n"
    "tax2\t3\t9\t1\n";

} // namespace

TEST_CASE("loads a minimal paired base population") {
    test::TempDir dir;
    const auto g = test::write_file(dir.path(), "geno.tsv", kGeno);
    const auto m = test::write_file(dir.path(), "micro.tsv", kMicro);
    BaseInputs inputs = load_base_inputs(g, m);
    CHECK(inputs.n_individuals() == 3);
    CHECK(inputs.n_snps() == 2);
    CHECK(inputs.n_taxa() == 2);
    CHECK(inputs.genotypes(0, 1) == 1);
    CHECK(inputs.taxa_counts(1, 1) == 9.0);
}

TEST_CASE("microbiota columns are realigned to the genotype id order") {
    test::TempDir dir;
    const auto g = test::write_file(dir.path(), "geno.tsv", kGeno);
    const auto m = test::write_file(dir.path(), "micro.tsv",
                                    "taxon_id\tind_c\tind_a\tind_b\n"
                                    "tax1\t7\t5\t0\n"
                                    "tax2\t1\t3\t9\n");
    BaseInputs inputs = load_base_inputs(g, m);
    CHECK(inputs.individual_ids == std::vector<std::string>{"ind_a", "ind_b", "ind_c"});
    CHECK(inputs.taxa_counts(0, 0) == 5.0);
    CHECK(inputs.taxa_counts(0, 2) == 7.0);
}

TEST_CASE("rejects a genotype outside {0,1,2} naming the cell") {
    test::TempDir dir;
    const auto g = test::write_file(dir.path(), "geno.tsv",
                                    "snp_id\tind_a\tind_b\n"
                                    "snp1\t0\t3\n");
    const auto m = test::write_file(dir.path(), "micro.tsv",
                                    "taxon_id\tind_a\tind_b\n"
                                    "tax1\t5\t1\n");
    try {
        load_base_inputs(g, m);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("snp1") != std::string::npos);
        CHECK(msg.find("ind_b") != std::string::npos);
    }
}

TEST_CASE("rejects mismatched individual id sets listing the difference") {
    test::TempDir dir;
    const auto g = test::write_file(dir.path(), "geno.tsv",
                                    "snp_id\ta\tb\td\n"
                                    "snp1\t0\t1\t2\n");
    const auto m = test::write_file(dir.path(), "micro.tsv",
                                    "taxon_id\ta\tb\tc\n"
                                    "tax1\t5\t1\t2\n");
    try {
        load_base_inputs(g, m);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("c") != std::string::npos);
        CHECK(msg.find("d") != std::string::npos);
    }
}

TEST_CASE("rejects an all-zero count column naming the individual") {
    test::TempDir dir;
    const auto g = test::write_file(dir.path(), "geno.tsv", kGeno);
    const auto m = test::write_file(dir.path(), "micro.tsv",
                                    "taxon_id\tind_a\tind_b\tind_c\n"
                                    "tax1\t5\t0\t7\n"
                                    "tax2\t3\t0\t1\n");
    try {
        load_base_inputs(g, m);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("ind_b") != std::string::npos);
    }
}

TEST_CASE("base inputs round-trip through write and load") {
    Rng rng(5);
    BaseInputs inputs = generate_synthetic_base(12, 9, 6, rng, 500);
    test::TempDir dir;
    const auto g = dir.path() / "geno.tsv";
    const auto m = dir.path() / "micro.tsv";
    write_base_inputs(inputs, g, m);
    BaseInputs again = load_base_inputs(g, m);
    CHECK(again.genotypes == inputs.genotypes);
    CHECK(again.taxa_counts == inputs.taxa_counts);
    CHECK(again.individual_ids == inputs.individual_ids);
    CHECK(again.snp_ids == inputs.snp_ids);
    CHECK(again.taxon_ids == inputs.taxon_ids);
}

TEST_CASE("empty config file yields the documented defaults") {
    test::TempDir dir;
    const auto path = test::write_file(dir.path(), "empty.conf", "# nothing here\n");
    ScenarioConfig config = load_config(path);
    CHECK(config.n_gen == 5);
    CHECK(config.lambda == doctest::Approx(0.5));
    CHECK(config.otu_g == doctest::Approx(0.05));
    CHECK(config.sigma_beta == doctest::Approx(0.1));
    CHECK(config.sigma_m == doctest::Approx(0.1));
    CHECK(config.qtl_y == 100);
    CHECK(config.eta == doctest::Approx(25.0));
    CHECK(config.pi == doctest::Approx(0.75));
    CHECK(config.n_clusters == 100);
    CHECK(config.depth == std::vector<long>{10000});
    CHECK(config.size_selection_F == doctest::Approx(0.30));
    CHECK(config.size_selection_M == doctest::Approx(0.30));
    CHECK(config.selection == SelectionCriterion::Random);
    CHECK(config.sex_ratio == doctest::Approx(0.5));
}

TEST_CASE("infeasible heritability targets are rejected") {
    test::TempDir dir;
    const auto path = test::write_file(dir.path(), "bad.conf", "h2_d = 0.6\nb2 = 0.5\n");
    CHECK_THROWS_AS(load_config(path), ConfigError);
}

TEST_CASE("overrides take precedence over file values") {
    test::TempDir dir;
    const auto path = test::write_file(dir.path(), "c.conf", "lambda = 0.5\n");
    ScenarioConfig config = load_config(path, {"lambda=0.1"});
    CHECK(config.lambda == doctest::Approx(0.1));
}

TEST_CASE("unknown keys and malformed values are config errors") {
    test::TempDir dir;
    CHECK_THROWS_AS(load_config(test::write_file(dir.path(), "a.conf", "lambada = 0.5\n")),
                    ConfigError);
    CHECK_THROWS_AS(load_config(test::write_file(dir.path(), "b.conf", "lambda = soon\n")),
                    ConfigError);
    CHECK_THROWS_AS(load_config(test::write_file(dir.path(), "c.conf", "lambda\n")),
                    ConfigError);
    CHECK_THROWS_AS(load_config(test::write_file(dir.path(), "d.conf", "n_gen = 0\n")),
                    ConfigError);
}

TEST_CASE("environment specs parse from indexed key groups") {
    test::TempDir dir;
    const auto path = test::write_file(dir.path(), "env.conf",
                                       "env.1.generations = 1\n"
                                       "env.1.fraction = 0.5\n"
                                       "env.1.scope = all\n"
                                       "env.1.effect_sd = 5\n"
                                       "env.2.generations = 1-3,5\n"
                                       "env.2.scope = clusters:3,7\n"
                                       "env.2.effect_sd = 2\n"
                                       "env.2.persistent = true\n");
    ScenarioConfig config = load_config(path);
    REQUIRE(config.env_effects.size() == 2);
    CHECK(config.env_effects[0].generations == std::set<int>{1});
    CHECK(config.env_effects[0].scope == EnvEffectSpec::Scope::All);
    CHECK(config.env_effects[0].effect_sd == doctest::Approx(5.0));
    CHECK(config.env_effects[1].generations == std::set<int>{1, 2, 3, 5});
    CHECK(config.env_effects[1].scope == EnvEffectSpec::Scope::Clusters);
    CHECK(config.env_effects[1].cluster_ids == std::vector<int>{3, 7});
    CHECK(config.env_effects[1].persistent_assignment);
}

TEST_CASE("environment specs are validated") {
    test::TempDir dir;
    // Effects only apply from G1 onwards.
    CHECK_THROWS_AS(load_config(test::write_file(dir.path(), "g0.conf",
                                                 "env.1.generations = 0\n"
                                                 "env.1.effect_sd = 1\n")),
                    ConfigError);
    CHECK_THROWS_AS(load_config(test::write_file(dir.path(), "sd.conf",
                                                 "env.1.generations = 1\n"
                                                 "env.1.effect_sd = 0\n")),
                    ConfigError);
}

TEST_CASE("config resolution is deterministic") {
    test::TempDir dir;
    const auto path = test::write_file(dir.path(), "c.conf", "n_gen = 3\nh2_d = 0.3\n");
    ScenarioConfig a = load_config(path, {"b2=0.2"});
    ScenarioConfig b = load_config(path, {"b2=0.2"});
    CHECK(a.n_gen == b.n_gen);
    CHECK(a.h2_d == b.h2_d);
    CHECK(a.b2 == b.b2);
}

TEST_CASE("synthetic base generation is deterministic and well-formed") {
    Rng rng1(1), rng2(1);
    BaseInputs a = generate_synthetic_base(10, 20, 5, rng1);
    BaseInputs b = generate_synthetic_base(10, 20, 5, rng2);
    CHECK(a.genotypes == b.genotypes);
    CHECK(a.taxa_counts == b.taxa_counts);

    CHECK(((a.genotypes.array() >= 0) && (a.genotypes.array() <= 2)).all());
    for (int j = 0; j < a.n_individuals(); ++j)
        CHECK(a.taxa_counts.col(j).sum() == doctest::Approx(10000.0));
}

TEST_CASE("dosage sampler matches Binomial(2, f) at f = 0.5") {
    Rng rng(43);
    Eigen::VectorXi dosages = sample_genotype_column(0.5, 10000, rng);
    const double mean = dosages.cast<double>().mean();
    CHECK(mean == doctest::Approx(1.0).epsilon(0.02));
    CHECK(dosages.minCoeff() >= 0);
    CHECK(dosages.maxCoeff() <= 2);
}
