#ifndef HOLOGEN_GENOME_HPP
#define HOLOGEN_GENOME_HPP

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include "hologen/rng.hpp"

namespace hologen {

enum class Sex : std::uint8_t { Female = 0, Male = 1 };

using HaplotypeMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Phased genotypes for a whole cohort, one column per individual.
/// Dosage is hap_a + hap_b by construction.
struct PhasedGenotypes {
    HaplotypeMatrix hap_a;  // n_g x n
    HaplotypeMatrix hap_b;

    int n_snps() const { return static_cast<int>(hap_a.rows()); }
    int size() const { return static_cast<int>(hap_a.cols()); }
    Eigen::MatrixXd dosage() const {
        return (hap_a.cast<double>() + hap_b.cast<double>());
    }
};

/// Recombination map: cumulative positions in Morgans per SNP, grouped into
/// chromosomes. Crossovers follow a Poisson process along each chromosome
/// (no interference), chromosomes assort independently.
struct GeneticMap {
    struct Chromosome {
        int first_snp;  // index of first SNP on this chromosome
        int n_snps;
        double start;   // position of the first SNP
        double length;  // in Morgans
    };
    std::vector<double> position;  // per SNP, non-decreasing within a chromosome
    std::vector<Chromosome> chromosomes;

    int n_snps() const { return static_cast<int>(position.size()); }

    /// Default map: all SNPs equally spaced on a single 1-Morgan chromosome.
    static GeneticMap uniform(int n_g, double morgans = 1.0);

    /// TSV with columns chromosome, snp_id, position_morgans. SNPs must
    /// appear in the same order as the genotype rows, grouped by chromosome
    /// with non-decreasing positions.
    static GeneticMap load(const std::filesystem::path& path,
                           const std::vector<std::string>& snp_ids);
};

struct PedigreeEntry {
    std::string id;
    int generation = 0;
    std::string sire_id;  // empty for founders
    std::string dam_id;
    int sire_index = -1;  // column in the previous generation, -1 for founders
    int dam_index = -1;
    Sex sex = Sex::Female;
};

/// Homozygous sites are phased deterministically; heterozygous sites get
/// 0|1 or 1|0 with probability 1/2 each.
PhasedGenotypes phase_base_population(const Eigen::MatrixXi& dosages, Rng& rng);

/// One meiosis: per chromosome, Poisson(length) crossovers at uniform
/// positions, starting haplotype chosen with probability 1/2.
void make_gamete(const PhasedGenotypes& parents, int parent_index, const GeneticMap& map,
                 Rng& rng, std::uint8_t* out);

/// Offspring phased genotype: hap_a from the dam, hap_b from the sire.
std::pair<Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 1>,
          Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 1>>
mate(const PhasedGenotypes& parents, int sire_index, int dam_index, const GeneticMap& map,
     Rng& rng);

/// round(x) with halves going up; used for all count-from-fraction rules.
int round_half_up(double x);

/// First round_half_up(sex_ratio*n) slots female, the rest male, order
/// shuffled.
std::vector<Sex> assign_sexes(int n, double sex_ratio, Rng& rng);

struct GenerationGenotypes {
    PhasedGenotypes genotypes;
    std::vector<Sex> sexes;
    std::vector<PedigreeEntry> pedigree;
};

/// Builds exactly n_ind offspring; each dam is drawn uniformly with
/// replacement from selected_F and each sire from selected_M.
GenerationGenotypes build_generation(const PhasedGenotypes& parents,
                                     const std::vector<std::string>& parent_ids,
                                     const std::vector<int>& selected_F,
                                     const std::vector<int>& selected_M, int generation_index,
                                     int n_ind, double sex_ratio, const GeneticMap& map, Rng& rng);

} // namespace hologen

#endif
