#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "miq/features.hpp"
#include "miq/model.hpp"

namespace miq {

// Recursive feature elimination with cross-validation. At each stage the
// current subset is scored by mean CV ROC-AUC, then the `step` features with
// the smallest trained |weight| are dropped (ties drop the later column, so
// earlier columns survive). The returned subset is the one with the best CV
// score; equal scores resolve toward fewer features.
inline SelectedFeatures rfecv_select(const FeatureMatrix& m, const FoldAssignment& folds,
                                     int step = 1, const ModelConfig& config = ModelConfig{},
                                     std::uint64_t seed = 0) {
    validate_matrix(m);
    if (step < 1) throw Error("elimination step must be >= 1");
    const auto labeled = m.labeled_indices();
    if (labeled.size() < 2) throw InsufficientData("labeled rows", 2, labeled.size());
    const FeatureMatrix data = m.select_rows(labeled);

    std::vector<std::string> active = data.names;
    SelectedFeatures out;
    double best_score = -1.0;
    std::size_t best_size = 0;

    while (!active.empty()) {
        const FeatureMatrix sub = data.select_columns(active);
        const double score = cv_mean_auc(sub, config, folds, seed);
        out.cv_score_by_size[active.size()] = score;
        // strictly-better keeps the earlier (larger) candidate from winning a
        // tie; >= prefers the smaller set, which is the documented tie-break
        if (score > best_score || (score == best_score && active.size() < best_size)) {
            best_score = score;
            best_size = active.size();
            out.kept = active;
        }
        if (active.size() == 1) break;

        const TrainedModel model = train(sub, config, seed);
        // order features by |weight| ascending, larger index first on ties
        std::vector<std::size_t> order(active.size());
        for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const double wa = std::fabs(model.weights[a]);
            const double wb = std::fabs(model.weights[b]);
            if (wa != wb) return wa < wb;
            return a > b;
        });
        const std::size_t drop =
            std::min(static_cast<std::size_t>(step), active.size() - 1);
        std::vector<bool> keep(active.size(), true);
        for (std::size_t r = 0; r < drop; ++r) keep[order[r]] = false;
        std::vector<std::string> next;
        next.reserve(active.size() - drop);
        for (std::size_t j = 0; j < active.size(); ++j) {
            if (keep[j]) next.push_back(active[j]);
        }
        active = std::move(next);
    }
    return out;
}

}  // namespace miq
