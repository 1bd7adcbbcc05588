#include "hologen/genome.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "hologen/errors.hpp"
#include "hologen/tsv.hpp"

namespace hologen {

int round_half_up(double x) {
    return static_cast<int>(std::floor(x + 0.5));
}

GeneticMap GeneticMap::uniform(int n_g, double morgans) {
    if (n_g < 1) throw std::invalid_argument("GeneticMap::uniform: need at least one SNP");
    GeneticMap map;
    map.position.resize(static_cast<std::size_t>(n_g));
    for (int i = 0; i < n_g; ++i)
        map.position[static_cast<std::size_t>(i)] =
            n_g == 1 ? 0.0 : morgans * static_cast<double>(i) / (n_g - 1);
    map.chromosomes.push_back({0, n_g, 0.0, n_g == 1 ? 0.0 : morgans});
    return map;
}

GeneticMap GeneticMap::load(const std::filesystem::path& path,
                            const std::vector<std::string>& snp_ids) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open genetic map: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty genetic map: " + path.string());

    GeneticMap map;
    std::string current_chrom;
    std::set<std::string> seen_chroms;
    std::size_t snp_index = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string chrom, snp_id, pos_str;
        if (!std::getline(ss, chrom, '\t') || !std::getline(ss, snp_id, '\t') ||
            !std::getline(ss, pos_str, '\t'))
            throw DataError(path.string() + ":" + std::to_string(line_no) +
                            ": expected chromosome\tsnp_id\tposition_morgans");
        if (snp_index >= snp_ids.size())
            throw DataError(path.string() + ": more map rows than SNPs");
        if (snp_id != snp_ids[snp_index])
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": snp '" + snp_id +
                            "' does not match genotype row order (expected '" +
                            snp_ids[snp_index] + "')");
        const double pos = tsv::parse_real(pos_str, path.string() + ":" + std::to_string(line_no));
        if (chrom != current_chrom) {
            if (!seen_chroms.insert(chrom).second)
                throw DataError(path.string() + ":" + std::to_string(line_no) + ": chromosome '" +
                                chrom + "' appears in more than one block");
            map.chromosomes.push_back({static_cast<int>(snp_index), 0, pos, 0.0});
            current_chrom = chrom;
        } else if (!map.position.empty() && pos < map.position.back()) {
            throw DataError(path.string() + ":" + std::to_string(line_no) +
                            ": positions must be non-decreasing within a chromosome");
        }
        map.position.push_back(pos);
        auto& c = map.chromosomes.back();
        ++c.n_snps;
        c.length = pos - c.start;
        ++snp_index;
    }
    if (snp_index != snp_ids.size())
        throw DataError(path.string() + ": map covers " + std::to_string(snp_index) + " of " +
                        std::to_string(snp_ids.size()) + " SNPs");
    return map;
}

PhasedGenotypes phase_base_population(const Eigen::MatrixXi& dosages, Rng& rng) {
    PhasedGenotypes out;
    out.hap_a.resize(dosages.rows(), dosages.cols());
    out.hap_b.resize(dosages.rows(), dosages.cols());
    std::bernoulli_distribution coin(0.5);
    for (Eigen::Index j = 0; j < dosages.cols(); ++j) {
        for (Eigen::Index i = 0; i < dosages.rows(); ++i) {
            switch (dosages(i, j)) {
                case 0: out.hap_a(i, j) = 0; out.hap_b(i, j) = 0; break;
                case 2: out.hap_a(i, j) = 1; out.hap_b(i, j) = 1; break;
                case 1: {
                    const bool flip = coin(rng);
                    out.hap_a(i, j) = flip ? 1 : 0;
                    out.hap_b(i, j) = flip ? 0 : 1;
                    break;
                }
                default:
                    throw DataError("phase_base_population: dosage not in {0,1,2}");
            }
        }
    }
    return out;
}

void make_gamete(const PhasedGenotypes& parents, int parent_index, const GeneticMap& map,
                 Rng& rng, std::uint8_t* out) {
    if (map.n_snps() != parents.n_snps())
        throw std::invalid_argument("make_gamete: map length does not match SNP count");
    std::bernoulli_distribution coin(0.5);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> crossovers;
    for (const auto& chrom : map.chromosomes) {
        crossovers.clear();
        if (chrom.length > 0.0) {
            std::poisson_distribution<int> n_cross(chrom.length);
            const int k = n_cross(rng);
            crossovers.reserve(static_cast<std::size_t>(k));
            for (int c = 0; c < k; ++c)
                crossovers.push_back(chrom.start + unit(rng) * chrom.length);
            std::sort(crossovers.begin(), crossovers.end());
        }
        bool use_a = coin(rng);
        std::size_t next_cross = 0;
        for (int s = chrom.first_snp; s < chrom.first_snp + chrom.n_snps; ++s) {
            const double pos = map.position[static_cast<std::size_t>(s)];
            while (next_cross < crossovers.size() && crossovers[next_cross] < pos) {
                use_a = !use_a;
                ++next_cross;
            }
            out[s] = use_a ? parents.hap_a(s, parent_index) : parents.hap_b(s, parent_index);
        }
    }
}

std::pair<Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 1>,
          Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 1>>
mate(const PhasedGenotypes& parents, int sire_index, int dam_index, const GeneticMap& map,
     Rng& rng) {
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 1> from_dam(parents.n_snps());
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 1> from_sire(parents.n_snps());
    make_gamete(parents, dam_index, map, rng, from_dam.data());
    make_gamete(parents, sire_index, map, rng, from_sire.data());
    return {from_dam, from_sire};
}

std::vector<Sex> assign_sexes(int n, double sex_ratio, Rng& rng) {
    const int n_female = std::min(n, round_half_up(sex_ratio * n));
    std::vector<Sex> sexes(static_cast<std::size_t>(n), Sex::Male);
    std::fill(sexes.begin(), sexes.begin() + n_female, Sex::Female);
    std::shuffle(sexes.begin(), sexes.end(), rng);
    return sexes;
}

GenerationGenotypes build_generation(const PhasedGenotypes& parents,
                                     const std::vector<std::string>& parent_ids,
                                     const std::vector<int>& selected_F,
                                     const std::vector<int>& selected_M, int generation_index,
                                     int n_ind, double sex_ratio, const GeneticMap& map,
                                     Rng& rng) {
    if (selected_F.empty() || selected_M.empty())
        throw DataError("build_generation: empty parent list");
    if (n_ind < 1)
        throw std::invalid_argument("build_generation: n_ind must be >= 1");

    GenerationGenotypes out;
    out.sexes = assign_sexes(n_ind, sex_ratio, rng);
    const int n_g = parents.n_snps();
    out.genotypes.hap_a.resize(n_g, n_ind);
    out.genotypes.hap_b.resize(n_g, n_ind);
    out.pedigree.resize(static_cast<std::size_t>(n_ind));

    std::uniform_int_distribution<std::size_t> pick_dam(0, selected_F.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_sire(0, selected_M.size() - 1);
    for (int j = 0; j < n_ind; ++j) {
        const int dam = selected_F[pick_dam(rng)];
        const int sire = selected_M[pick_sire(rng)];
        make_gamete(parents, dam, map, rng, out.genotypes.hap_a.col(j).data());
        make_gamete(parents, sire, map, rng, out.genotypes.hap_b.col(j).data());

        char buf[32];
        std::snprintf(buf, sizeof(buf), "G%d_%05d", generation_index, j);
        auto& entry = out.pedigree[static_cast<std::size_t>(j)];
        entry.id = buf;
        entry.generation = generation_index;
        entry.dam_index = dam;
        entry.sire_index = sire;
        entry.dam_id = parent_ids[static_cast<std::size_t>(dam)];
        entry.sire_id = parent_ids[static_cast<std::size_t>(sire)];
        entry.sex = out.sexes[static_cast<std::size_t>(j)];
    }
    return out;
}

} // namespace hologen
