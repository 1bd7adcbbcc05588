#ifndef HOLOGEN_SELECTION_HPP
#define HOLOGEN_SELECTION_HPP

#include <utility>
#include <vector>

#include "hologen/genome.hpp"
#include "hologen/io_config.hpp"
#include "hologen/phenotype.hpp"
#include "hologen/rng.hpp"

namespace hologen {

/// Per-individual vectors a criterion may need. Pointers stay owned by the
/// caller; only the vectors required by the chosen criterion are read.
struct ScoreInputs {
    const BreedingValues* breeding = nullptr;
    const Vector* microbiota_effect = nullptr;  // omega^T B
    const Vector* diversity = nullptr;          // Shannon values
};

/// Scores for one generation. The mixed index standardizes both components
/// within the generation before weighting (diversity and breeding values
/// are not on commensurable scales); set standardize=false for the raw
/// combination w*delta + (1-w)*BV_t.
Vector score(SelectionCriterion criterion, const ScoreInputs& inputs, double w_div,
             bool standardize, Rng& rng);

/// Per sex, the top round(fraction*count) individuals by descending score,
/// ties broken by ascending index. At least one individual per sex is
/// always selected.
std::pair<std::vector<int>, std::vector<int>> select_breeding_stock(
    const Vector& scores, const std::vector<Sex>& sexes, double fraction_female,
    double fraction_male);

} // namespace hologen

#endif
