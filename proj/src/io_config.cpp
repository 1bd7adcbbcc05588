#include "hologen/io_config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "hologen/composition.hpp"
#include "hologen/errors.hpp"
#include "hologen/tsv.hpp"

namespace hologen {

std::string to_string(SelectionCriterion c) {
    switch (c) {
        case SelectionCriterion::Random: return "random";
        case SelectionCriterion::MicrobiotaEffect: return "microbiota_effect";
        case SelectionCriterion::BvM: return "bv_m";
        case SelectionCriterion::BvD: return "bv_d";
        case SelectionCriterion::BvT: return "bv_t";
        case SelectionCriterion::Diversity: return "diversity";
        case SelectionCriterion::MixedIndex: return "mixed_index";
    }
    return "random";
}

SelectionCriterion selection_criterion_from_string(const std::string& s) {
    if (s == "random") return SelectionCriterion::Random;
    if (s == "microbiota_effect") return SelectionCriterion::MicrobiotaEffect;
    if (s == "bv_m") return SelectionCriterion::BvM;
    if (s == "bv_d") return SelectionCriterion::BvD;
    if (s == "bv_t") return SelectionCriterion::BvT;
    if (s == "diversity") return SelectionCriterion::Diversity;
    if (s == "mixed_index") return SelectionCriterion::MixedIndex;
    throw ConfigError("unknown selection criterion '" + s +
                      "' (expected one of random, microbiota_effect, bv_m, bv_d, bv_t, "
                      "diversity, mixed_index)");
}

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(trim(item));
    if (out.empty()) out.push_back("");
    return out;
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': cannot parse '" + value + "' as a number");
    }
}

long parse_long(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const long v = std::stol(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': cannot parse '" + value + "' as an integer");
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': cannot parse '" + value + "' as an unsigned integer");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
    if (value == "false" || value == "0" || value == "no" || value == "off") return false;
    throw ConfigError("key '" + key + "': cannot parse '" + value + "' as a boolean");
}

std::set<int> parse_generation_set(const std::string& key, const std::string& value) {
    std::set<int> out;
    for (const auto& piece : split(value, ',')) {
        const auto dash = piece.find('-');
        if (dash != std::string::npos && dash > 0) {
            const long lo = parse_long(key, piece.substr(0, dash));
            const long hi = parse_long(key, piece.substr(dash + 1));
            if (lo > hi) throw ConfigError("key '" + key + "': empty range '" + piece + "'");
            for (long g = lo; g <= hi; ++g) out.insert(static_cast<int>(g));
        } else {
            out.insert(static_cast<int>(parse_long(key, piece)));
        }
    }
    return out;
}

void parse_env_scope(EnvEffectSpec& spec, const std::string& key, const std::string& value) {
    if (value == "all") {
        spec.scope = EnvEffectSpec::Scope::All;
        return;
    }
    const auto colon = value.find(':');
    if (colon == std::string::npos)
        throw ConfigError("key '" + key + "': scope must be all, clusters:<ids>, taxa:<ids> or "
                          "random_clusters:<count>");
    const std::string head = value.substr(0, colon);
    const std::string rest = value.substr(colon + 1);
    if (head == "clusters") {
        spec.scope = EnvEffectSpec::Scope::Clusters;
        for (const auto& id : split(rest, ','))
            spec.cluster_ids.push_back(static_cast<int>(parse_long(key, id)));
    } else if (head == "taxa") {
        spec.scope = EnvEffectSpec::Scope::Taxa;
        spec.taxon_ids = split(rest, ',');
    } else if (head == "random_clusters") {
        spec.scope = EnvEffectSpec::Scope::RandomClusters;
        spec.random_cluster_count = static_cast<int>(parse_long(key, rest));
    } else {
        throw ConfigError("key '" + key + "': unknown scope kind '" + head + "'");
    }
}

void apply_key(ScenarioConfig& c, std::map<int, EnvEffectSpec>& env, const std::string& key,
               const std::string& value) {
    if (key.rfind("env.", 0) == 0) {
        const auto second_dot = key.find('.', 4);
        if (second_dot == std::string::npos)
            throw ConfigError("malformed environment key '" + key + "' (expected env.<n>.<field>)");
        const int index = static_cast<int>(parse_long(key, key.substr(4, second_dot - 4)));
        const std::string field = key.substr(second_dot + 1);
        EnvEffectSpec& spec = env[index];
        if (field == "generations")
            spec.generations = parse_generation_set(key, value);
        else if (field == "fraction")
            spec.target_fraction = parse_double(key, value);
        else if (field == "scope")
            parse_env_scope(spec, key, value);
        else if (field == "effect_sd")
            spec.effect_sd = parse_double(key, value);
        else if (field == "persistent")
            spec.persistent_assignment = parse_bool(key, value);
        else
            throw ConfigError("unknown environment field '" + field + "' in key '" + key + "'");
        return;
    }

    if (key == "n_gen") c.n_gen = static_cast<int>(parse_long(key, value));
    else if (key == "n_ind") c.n_ind = static_cast<int>(parse_long(key, value));
    else if (key == "sex_ratio") c.sex_ratio = parse_double(key, value);
    else if (key == "lambda") c.lambda = parse_double(key, value);
    else if (key == "h2_d") c.h2_d = parse_double(key, value);
    else if (key == "b2") c.b2 = parse_double(key, value);
    else if (key == "sigma_beta") c.sigma_beta = parse_double(key, value);
    else if (key == "sigma_beta_scaled") c.sigma_beta_scaled = parse_double(key, value);
    else if (key == "sigma_m") c.sigma_m = parse_double(key, value);
    else if (key == "qtl_y") c.qtl_y = static_cast<int>(parse_long(key, value));
    else if (key == "otu_g") c.otu_g = parse_double(key, value);
    else if (key == "eta") c.eta = parse_double(key, value);
    else if (key == "pi") c.pi = parse_double(key, value);
    else if (key == "n_clusters") c.n_clusters = static_cast<int>(parse_long(key, value));
    else if (key == "depth") {
        c.depth.clear();
        for (const auto& d : split(value, ',')) c.depth.push_back(parse_long(key, d));
    } else if (key == "size_selection_F") c.size_selection_F = parse_double(key, value);
    else if (key == "size_selection_M") c.size_selection_M = parse_double(key, value);
    else if (key == "selection") c.selection = selection_criterion_from_string(value);
    else if (key == "w_div") c.w_div = parse_double(key, value);
    else if (key == "seed") c.seed = parse_u64(key, value);
    else if (key == "replicates") c.replicates = static_cast<int>(parse_long(key, value));
    else if (key == "select_from_base") c.select_from_base = parse_bool(key, value);
    else if (key == "mixed_index_standardize") c.mixed_index_standardize = parse_bool(key, value);
    else if (key == "export_clr") c.export_clr = parse_bool(key, value);
    else if (key == "export_counts") c.export_counts = parse_bool(key, value);
    else if (key == "genetic_map") c.genetic_map_path = value;
    else throw ConfigError("unknown configuration key '" + key + "'");
}

void check_fraction(const std::string& name, double v, bool allow_zero, bool allow_one) {
    const bool low_ok = allow_zero ? v >= 0.0 : v > 0.0;
    const bool high_ok = allow_one ? v <= 1.0 : v < 1.0;
    if (!(low_ok && high_ok))
        throw ConfigError("parameter " + name + " = " + std::to_string(v) + " is out of range");
}

} // namespace

void ScenarioConfig::validate() const {
    if (n_gen < 1) throw ConfigError("n_gen must be >= 1");
    if (n_ind != 0 && n_ind < 2) throw ConfigError("n_ind must be >= 2 (or 0 for base size)");
    check_fraction("sex_ratio", sex_ratio, true, true);
    check_fraction("lambda", lambda, true, true);
    check_fraction("h2_d", h2_d, true, false);
    check_fraction("b2", b2, true, false);
    if (h2_d + b2 >= 1.0)
        throw ConfigError("infeasible targets: h2_d + b2 = " + std::to_string(h2_d + b2) +
                          " must be < 1 (residual variance is fixed at 1)");
    if (sigma_beta < 0.0) throw ConfigError("sigma_beta must be >= 0");
    if (sigma_beta_scaled && *sigma_beta_scaled < 0.0)
        throw ConfigError("sigma_beta_scaled must be >= 0");
    if (sigma_m < 0.0) throw ConfigError("sigma_m must be >= 0");
    if (qtl_y < 1) throw ConfigError("qtl_y must be >= 1");
    check_fraction("otu_g", otu_g, false, true);
    if (eta <= 0.0) throw ConfigError("eta must be > 0");
    check_fraction("pi", pi, false, true);
    if (n_clusters < 1) throw ConfigError("n_clusters must be >= 1");
    if (depth.empty()) throw ConfigError("depth needs at least one value");
    for (long d : depth)
        if (d < 1) throw ConfigError("depth values must be >= 1");
    check_fraction("size_selection_F", size_selection_F, false, true);
    check_fraction("size_selection_M", size_selection_M, false, true);
    check_fraction("w_div", w_div, true, true);
    if (replicates < 1) throw ConfigError("replicates must be >= 1");
    for (std::size_t i = 0; i < env_effects.size(); ++i) {
        const auto& e = env_effects[i];
        const std::string name = "env effect " + std::to_string(i + 1);
        if (e.generations.empty())
            throw ConfigError(name + ": no generations listed");
        if (*e.generations.begin() < 1)
            throw ConfigError(name + ": generation indices must be >= 1");
        check_fraction(name + " fraction", e.target_fraction, false, true);
        if (e.effect_sd <= 0.0) throw ConfigError(name + ": effect_sd must be > 0");
        if (e.scope == EnvEffectSpec::Scope::RandomClusters && e.random_cluster_count < 1)
            throw ConfigError(name + ": random_clusters count must be >= 1");
        if (e.scope == EnvEffectSpec::Scope::Clusters && e.cluster_ids.empty())
            throw ConfigError(name + ": empty cluster list");
        if (e.scope == EnvEffectSpec::Scope::Taxa && e.taxon_ids.empty())
            throw ConfigError(name + ": empty taxon list");
    }
}

ScenarioConfig load_config(const std::filesystem::path& path,
                           const std::vector<std::string>& overrides) {
    ScenarioConfig config;
    std::map<int, EnvEffectSpec> env;

    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file: " + path.string());
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                                  ": expected key = value");
            apply_key(config, env, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
    }
    for (const auto& assignment : overrides) {
        const auto eq = assignment.find('=');
        if (eq == std::string::npos)
            throw ConfigError("override '" + assignment + "': expected KEY=VALUE");
        apply_key(config, env, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
    }
    for (auto& [index, spec] : env) config.env_effects.push_back(std::move(spec));

    config.validate();
    return config;
}

void apply_override(ScenarioConfig& config, const std::string& assignment) {
    std::map<int, EnvEffectSpec> env;
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("override '" + assignment + "': expected KEY=VALUE");
    apply_key(config, env, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
    for (auto& [index, spec] : env) config.env_effects.push_back(std::move(spec));
    config.validate();
}

namespace {

void check_integral_counts(const tsv::Table& table, const std::filesystem::path& path) {
    for (Eigen::Index i = 0; i < table.values.rows(); ++i)
        for (Eigen::Index j = 0; j < table.values.cols(); ++j) {
            const double v = table.values(i, j);
            if (v < 0.0 || std::abs(v - std::round(v)) > 1e-9)
                throw DataError(path.string() + ": count at (" +
                                table.row_ids[static_cast<std::size_t>(i)] + ", " +
                                table.col_ids[static_cast<std::size_t>(j)] +
                                ") = " + tsv::format_real(v) +
                                " is not a non-negative integer");
        }
}

} // namespace

BaseInputs load_base_inputs(const std::filesystem::path& genotype_path,
                            const std::filesystem::path& microbiota_path) {
    tsv::Table geno = tsv::read_table(genotype_path);
    tsv::Table micro = tsv::read_table(microbiota_path);

    for (const auto* t : {&geno, &micro}) {
        std::vector<std::string> ids = t->col_ids;
        std::sort(ids.begin(), ids.end());
        if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
            throw DataError("duplicate individual id in header of " +
                            (t == &geno ? genotype_path : microbiota_path).string());
    }

    // Align microbiota columns to the genotype column order by id.
    std::map<std::string, Eigen::Index> micro_col;
    for (std::size_t j = 0; j < micro.col_ids.size(); ++j)
        micro_col[micro.col_ids[j]] = static_cast<Eigen::Index>(j);

    std::vector<std::string> only_geno, only_micro;
    for (const auto& id : geno.col_ids)
        if (!micro_col.count(id)) only_geno.push_back(id);
    {
        std::set<std::string> geno_ids(geno.col_ids.begin(), geno.col_ids.end());
        for (const auto& id : micro.col_ids)
            if (!geno_ids.count(id)) only_micro.push_back(id);
    }
    if (!only_geno.empty() || !only_micro.empty()) {
        std::string msg = "individual ids do not match between genotype and microbiota tables;";
        auto join = [](const std::vector<std::string>& v) {
            std::string s;
            for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
            return s;
        };
        if (!only_geno.empty()) msg += " genotype-only: " + join(only_geno) + ";";
        if (!only_micro.empty()) msg += " microbiota-only: " + join(only_micro);
        throw DataError(msg);
    }

    BaseInputs inputs;
    inputs.individual_ids = geno.col_ids;
    inputs.snp_ids = geno.row_ids;
    inputs.taxon_ids = micro.row_ids;

    inputs.genotypes.resize(geno.values.rows(), geno.values.cols());
    for (Eigen::Index i = 0; i < geno.values.rows(); ++i)
        for (Eigen::Index j = 0; j < geno.values.cols(); ++j) {
            const double v = geno.values(i, j);
            if (v != 0.0 && v != 1.0 && v != 2.0)
                throw DataError(genotype_path.string() + ": genotype at (" +
                                geno.row_ids[static_cast<std::size_t>(i)] + ", " +
                                geno.col_ids[static_cast<std::size_t>(j)] + ") = " +
                                tsv::format_real(v) + " is not in {0,1,2}");
            inputs.genotypes(i, j) = static_cast<int>(v);
        }

    check_integral_counts(micro, microbiota_path);
    inputs.taxa_counts.resize(micro.values.rows(), geno.values.cols());
    for (Eigen::Index j = 0; j < geno.values.cols(); ++j)
        inputs.taxa_counts.col(j) = micro.values.col(micro_col[geno.col_ids[static_cast<std::size_t>(j)]]);

    for (Eigen::Index j = 0; j < inputs.taxa_counts.cols(); ++j)
        if (inputs.taxa_counts.col(j).sum() <= 0.0)
            throw DataError(microbiota_path.string() + ": individual '" +
                            inputs.individual_ids[static_cast<std::size_t>(j)] +
                            "' has an all-zero taxa count column");

    if (inputs.genotypes.cols() == 0)
        throw DataError("no individuals in " + genotype_path.string());
    return inputs;
}

void write_base_inputs(const BaseInputs& inputs, const std::filesystem::path& genotype_path,
                       const std::filesystem::path& microbiota_path) {
    tsv::Table geno{"snp_id", inputs.snp_ids, inputs.individual_ids,
                    inputs.genotypes.cast<double>()};
    tsv::write_table(genotype_path, geno, true);
    tsv::Table micro{"taxon_id", inputs.taxon_ids, inputs.individual_ids, inputs.taxa_counts};
    tsv::write_table(microbiota_path, micro, true);
}

Eigen::VectorXi sample_genotype_column(double allele_freq, int n, Rng& rng) {
    std::binomial_distribution<int> dosage(2, allele_freq);
    Eigen::VectorXi out(n);
    for (int i = 0; i < n; ++i) out[i] = dosage(rng);
    return out;
}

BaseInputs generate_synthetic_base(int n_g, int n_b, int n_individuals, Rng& rng, long depth) {
    if (n_g < 2 || n_b < 2 || n_individuals < 2)
        throw ConfigError("generate_synthetic_base: all dimensions must be >= 2");

    BaseInputs inputs;
    auto label = [](const char* prefix, int i) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%s%05d", prefix, i);
        return std::string(buf);
    };
    for (int i = 0; i < n_g; ++i) inputs.snp_ids.push_back(label("snp", i));
    for (int i = 0; i < n_b; ++i) inputs.taxon_ids.push_back(label("tax", i));
    for (int i = 0; i < n_individuals; ++i) inputs.individual_ids.push_back(label("ind", i));

    std::gamma_distribution<double> beta_part(2.0, 1.0);
    inputs.genotypes.resize(n_g, n_individuals);
    for (int s = 0; s < n_g; ++s) {
        const double a = beta_part(rng), b = beta_part(rng);
        const double freq = a / (a + b);  // Beta(2,2)
        inputs.genotypes.row(s) = sample_genotype_column(freq, n_individuals, rng).transpose();
    }

    // Log-normal abundance profile, perturbed per individual, mixed with a
    // sliver of uniform mass so no taxon can end up all-zero across the
    // whole population.
    std::normal_distribution<double> profile_noise(0.0, 1.5);
    std::normal_distribution<double> individual_noise(0.0, 0.5);
    Eigen::VectorXd log_profile(n_b);
    for (int t = 0; t < n_b; ++t) log_profile[t] = profile_noise(rng);

    inputs.taxa_counts.resize(n_b, n_individuals);
    for (int i = 0; i < n_individuals; ++i) {
        Eigen::VectorXd logs = log_profile;
        for (int t = 0; t < n_b; ++t) logs[t] += individual_noise(rng);
        Eigen::VectorXd p = (logs.array() - logs.maxCoeff()).exp();
        p /= p.sum();
        p = 0.98 * p + Eigen::VectorXd::Constant(n_b, 0.02 / n_b);
        inputs.taxa_counts.col(i) = multinomial_resample(p, depth, rng).cast<double>();
    }
    return inputs;
}

} // namespace hologen
