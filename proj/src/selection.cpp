#include "hologen/selection.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "hologen/errors.hpp"
#include "hologen/stats.hpp"

namespace hologen {

namespace {

const Vector& require(const Vector* v, const char* what) {
    if (v == nullptr || v->size() == 0)
        throw std::invalid_argument(std::string("score: missing input vector: ") + what);
    return *v;
}

} // namespace

Vector score(SelectionCriterion criterion, const ScoreInputs& inputs, double w_div,
             bool standardize, Rng& rng) {
    switch (criterion) {
        case SelectionCriterion::MicrobiotaEffect:
            return require(inputs.microbiota_effect, "microbiota effect");
        case SelectionCriterion::BvM:
            if (!inputs.breeding) throw std::invalid_argument("score: missing breeding values");
            return inputs.breeding->microbiota;
        case SelectionCriterion::BvD:
            if (!inputs.breeding) throw std::invalid_argument("score: missing breeding values");
            return inputs.breeding->direct;
        case SelectionCriterion::BvT:
            if (!inputs.breeding) throw std::invalid_argument("score: missing breeding values");
            return inputs.breeding->total;
        case SelectionCriterion::Diversity:
            return require(inputs.diversity, "diversity");
        case SelectionCriterion::MixedIndex: {
            const Vector& diversity = require(inputs.diversity, "diversity");
            if (!inputs.breeding) throw std::invalid_argument("score: missing breeding values");
            const Vector& total = inputs.breeding->total;
            if (diversity.size() != total.size())
                throw std::invalid_argument("score: diversity and breeding sizes differ");
            if (standardize)
                return w_div * stats::standardize(diversity) +
                       (1.0 - w_div) * stats::standardize(total);
            return w_div * diversity + (1.0 - w_div) * total;
        }
        case SelectionCriterion::Random: {
            Eigen::Index n = 0;
            if (inputs.breeding) n = inputs.breeding->total.size();
            else if (inputs.diversity) n = inputs.diversity->size();
            else if (inputs.microbiota_effect) n = inputs.microbiota_effect->size();
            if (n == 0) throw std::invalid_argument("score: cannot infer population size");
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            Vector draws(n);
            for (Eigen::Index i = 0; i < n; ++i) draws[i] = unit(rng);
            return draws;
        }
    }
    throw std::invalid_argument("score: unknown criterion");
}

std::pair<std::vector<int>, std::vector<int>> select_breeding_stock(
    const Vector& scores, const std::vector<Sex>& sexes, double fraction_female,
    double fraction_male) {
    if (static_cast<std::size_t>(scores.size()) != sexes.size())
        throw std::invalid_argument("select_breeding_stock: scores and sexes sizes differ");
    if (!scores.allFinite())
        throw std::invalid_argument("select_breeding_stock: non-finite score");

    auto pick = [&](Sex sex, double fraction) {
        std::vector<int> candidates;
        for (std::size_t i = 0; i < sexes.size(); ++i)
            if (sexes[i] == sex) candidates.push_back(static_cast<int>(i));
        if (candidates.empty())
            throw DataError("select_breeding_stock: no individuals of one sex");
        std::stable_sort(candidates.begin(), candidates.end(), [&](int a, int b) {
            if (scores[a] != scores[b]) return scores[a] > scores[b];
            return a < b;
        });
        int count = round_half_up(fraction * static_cast<double>(candidates.size()));
        count = std::clamp(count, 1, static_cast<int>(candidates.size()));
        candidates.resize(static_cast<std::size_t>(count));
        std::sort(candidates.begin(), candidates.end());
        return candidates;
    };

    return {pick(Sex::Female, fraction_female), pick(Sex::Male, fraction_male)};
}

} // namespace hologen
