#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "miq/errors.hpp"
#include "miq/features.hpp"
#include "miq/format.hpp"
#include "miq/mathx.hpp"
#include "miq/model.hpp"
#include "miq/rng.hpp"

namespace miq {

// Additive per-feature attribution of one prediction on the margin scale.
// Efficiency holds by construction: sum(contributions) + base_value equals
// the prediction (exactly for the linear path, to sampling error otherwise).
struct Attribution {
    std::vector<double> contributions;
    double base_value = 0.0;
    double prediction = 0.0;
    std::vector<double> standard_errors;  // per feature; empty for the exact path
};

// Exact Shapley values for a linear model: with independent coordinates the
// attribution of feature j is w_j * (z_j(x) - mean_background z_j).
inline Attribution shapley_linear(const TrainedModel& model, const FeatureMatrix& background,
                                  const FeatureVector& x) {
    if (background.rows.empty()) throw EmptyMatrix();
    const auto raw = detail::align_features(model, x);
    const auto z = model.standardize_row(raw);

    // background columns aligned to the model's feature order
    std::vector<std::size_t> cols;
    cols.reserve(model.feature_names.size());
    for (const auto& name : model.feature_names) {
        const auto it = std::find(background.names.begin(), background.names.end(), name);
        if (it == background.names.end()) {
            throw FeatureMismatch("background lacks feature '" + name + "'");
        }
        cols.push_back(static_cast<std::size_t>(it - background.names.begin()));
    }

    Attribution out;
    out.contributions.resize(model.weights.size());
    out.base_value = model.intercept;
    for (std::size_t j = 0; j < model.weights.size(); ++j) {
        double mean_z = 0.0;
        for (const auto& row : background.rows) {
            mean_z += (row[cols[j]] - model.scaling.mean[j]) / model.scaling.std[j];
        }
        mean_z /= static_cast<double>(background.rows.size());
        out.contributions[j] = model.weights[j] * (z[j] - mean_z);
        out.base_value += model.weights[j] * mean_z;
    }
    out.prediction = model.margin_standardized(z);
    return out;
}

// Black-box score function over a raw feature row (aligned to the background
// matrix's column order).
using ScoreFn = std::function<double(const std::vector<double>&)>;

// Permutation-sampling Shapley estimate. Walks random feature orderings,
// imputing absent features from every background row, and accumulates the
// marginal change as each feature of x is switched in. When the number of
// requested permutations covers all D! orderings the enumeration is
// exhaustive and the estimate is exact for the background distribution.
inline Attribution shapley_sampling(const ScoreFn& predict, const FeatureMatrix& background,
                                    const FeatureVector& x, std::size_t n_permutations,
                                    std::uint64_t seed) {
    if (background.rows.empty()) throw EmptyMatrix();
    if (n_permutations < 1) throw Error("n_permutations must be >= 1");
    const std::size_t d = background.n_cols();
    if (x.values.size() != d) throw FeatureMismatch("x width does not match background");

    // map x onto the background column order by name
    std::vector<double> x_row(d);
    for (std::size_t j = 0; j < d; ++j) {
        const auto it = std::find(x.names.begin(), x.names.end(), background.names[j]);
        if (it == x.names.end()) {
            throw FeatureMismatch("x lacks feature '" + background.names[j] + "'");
        }
        x_row[j] = x.values[static_cast<std::size_t>(it - x.names.begin())];
    }

    // exhaustive if d! fits within the budget (d <= 20 guards overflow)
    std::size_t factorial = 1;
    bool exhaustive = false;
    if (d <= 10) {
        for (std::size_t i = 2; i <= d; ++i) factorial *= i;
        exhaustive = factorial <= n_permutations;
    }
    const std::size_t n_perms = exhaustive ? factorial : n_permutations;

    std::vector<double> sum(d, 0.0), sum_sq(d, 0.0);
    std::vector<std::size_t> perm(d);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng = Rng::derive(seed, 0);

    double base = 0.0;
    for (const auto& row : background.rows) base += predict(row);
    base /= static_cast<double>(background.rows.size());

    std::vector<double> hybrid;
    for (std::size_t p = 0; p < n_perms; ++p) {
        if (!exhaustive) {
            std::iota(perm.begin(), perm.end(), 0);
            rng.shuffle(perm);
        }
        // bg-mean marginal contribution of each feature along this ordering
        std::vector<double> marginal(d, 0.0);
        for (const auto& row : background.rows) {
            hybrid = row;
            double prev = predict(hybrid);
            for (const auto j : perm) {
                hybrid[j] = x_row[j];
                const double cur = predict(hybrid);
                marginal[j] += cur - prev;
                prev = cur;
            }
        }
        for (std::size_t j = 0; j < d; ++j) {
            marginal[j] /= static_cast<double>(background.rows.size());
            sum[j] += marginal[j];
            sum_sq[j] += marginal[j] * marginal[j];
        }
        if (exhaustive) {
            if (!std::next_permutation(perm.begin(), perm.end())) break;
        }
    }

    Attribution out;
    out.contributions.resize(d);
    out.standard_errors.resize(d, 0.0);
    const double np = static_cast<double>(n_perms);
    for (std::size_t j = 0; j < d; ++j) {
        out.contributions[j] = sum[j] / np;
        if (n_perms > 1) {
            const double var = (sum_sq[j] - sum[j] * sum[j] / np) / (np - 1.0);
            out.standard_errors[j] = std::sqrt(std::max(var, 0.0) / np);
        }
    }
    out.base_value = base;
    out.prediction = predict(x_row);
    return out;
}

enum class FeatureSign { Positive, Negative, Mixed };

inline const char* to_string(FeatureSign s) {
    switch (s) {
        case FeatureSign::Positive: return "Positive";
        case FeatureSign::Negative: return "Negative";
        case FeatureSign::Mixed: return "Mixed";
    }
    return "?";
}

struct RankedFeature {
    std::string name;
    double importance = 0.0;  // mean |contribution| over the dataset
    FeatureSign sign = FeatureSign::Mixed;
};

using RankedFeatures = std::vector<RankedFeature>;

// Global ranking: mean |attribution| per feature over all rows of `matrix`
// (which also serves as the background). Sign comes from the correlation
// between raw feature value and attribution; |corr| < 0.1 counts as Mixed.
inline RankedFeatures global_importance(const TrainedModel& model, const FeatureMatrix& matrix) {
    if (matrix.rows.empty()) throw EmptyMatrix();
    const std::size_t n = matrix.rows.size();
    const std::size_t d = model.feature_names.size();

    std::vector<std::size_t> cols;
    cols.reserve(d);
    for (const auto& name : model.feature_names) {
        const auto it = std::find(matrix.names.begin(), matrix.names.end(), name);
        if (it == matrix.names.end()) throw FeatureMismatch("matrix lacks feature '" + name + "'");
        cols.push_back(static_cast<std::size_t>(it - matrix.names.begin()));
    }

    std::vector<double> mean_z(d, 0.0);
    for (const auto& row : matrix.rows) {
        for (std::size_t j = 0; j < d; ++j) {
            mean_z[j] += (row[cols[j]] - model.scaling.mean[j]) / model.scaling.std[j];
        }
    }
    for (auto& v : mean_z) v /= static_cast<double>(n);

    RankedFeatures ranked(d);
    std::vector<double> raw_col(n), contrib_col(n);
    for (std::size_t j = 0; j < d; ++j) {
        double abs_sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double z = (matrix.rows[i][cols[j]] - model.scaling.mean[j]) / model.scaling.std[j];
            const double contribution = model.weights[j] * (z - mean_z[j]);
            abs_sum += std::fabs(contribution);
            raw_col[i] = matrix.rows[i][cols[j]];
            contrib_col[i] = contribution;
        }
        ranked[j].name = model.feature_names[j];
        ranked[j].importance = abs_sum / static_cast<double>(n);
        const double corr = mathx::pearson(raw_col.data(), contrib_col.data(), n);
        if (std::fabs(corr) < 0.1) {
            ranked[j].sign = FeatureSign::Mixed;
        } else {
            ranked[j].sign = corr > 0.0 ? FeatureSign::Positive : FeatureSign::Negative;
        }
    }
    std::sort(ranked.begin(), ranked.end(), [](const RankedFeature& a, const RankedFeature& b) {
        if (a.importance != b.importance) return a.importance > b.importance;
        return a.name < b.name;
    });
    return ranked;
}

struct PrunedFeatureSet {
    std::vector<std::string> kept;                   // top chosen_size prefix of the ranking
    std::map<std::size_t, double> score_curve;       // prefix size -> mean CV ROC-AUC
    std::size_t chosen_size = 0;
};

// Forward stepwise reselection: grow the prefix of the importance ranking one
// feature at a time, score each prefix by CV, keep the best (ties resolve to
// the smaller prefix).
inline PrunedFeatureSet refresh_select(const FeatureMatrix& matrix, const RankedFeatures& ranked,
                                       const FoldAssignment& folds,
                                       const ModelConfig& config = ModelConfig{},
                                       std::uint64_t seed = 0) {
    for (const auto& name : matrix.names) {
        if (std::none_of(ranked.begin(), ranked.end(),
                         [&](const RankedFeature& r) { return r.name == name; })) {
            throw FeatureMismatch("ranking lacks matrix column '" + name + "'");
        }
    }
    PrunedFeatureSet out;
    std::vector<std::string> prefix;
    double best = -1.0;
    for (std::size_t s = 1; s <= ranked.size(); ++s) {
        prefix.push_back(ranked[s - 1].name);
        const double score = cv_mean_auc(matrix.select_columns(prefix), config, folds, seed);
        out.score_curve[s] = score;
        if (score > best) {
            best = score;
            out.chosen_size = s;
        }
    }
    out.kept.assign(prefix.begin(), prefix.begin() + static_cast<std::ptrdiff_t>(out.chosen_size));
    return out;
}

enum class MiDimension { MIIN, MICO, Other };

inline const char* to_string(MiDimension d) {
    switch (d) {
        case MiDimension::MIIN: return "MIIN";
        case MiDimension::MICO: return "MICO";
        case MiDimension::Other: return "Other";
    }
    return "?";
}

struct CategoryMapEntry {
    MiDimension dimension = MiDimension::Other;
    std::string category;
    std::string note;  // carries flagged source inconsistencies, if any
};

using CategoryMap = std::map<std::string, CategoryMapEntry>;

inline CategoryMap load_category_map(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open category map '" + path + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(0, "<category_map>", e.what());
    }
    CategoryMap map;
    for (const auto& [feature, entry] : doc.items()) {
        CategoryMapEntry e;
        const std::string dim = entry.value("dimension", std::string("Other"));
        if (dim == "MIIN") {
            e.dimension = MiDimension::MIIN;
        } else if (dim == "MICO") {
            e.dimension = MiDimension::MICO;
        } else {
            e.dimension = MiDimension::Other;
        }
        e.category = entry.value("category", std::string("unmapped"));
        e.note = entry.value("note", std::string());
        map[feature] = e;
    }
    return map;
}

struct MetricReportRow {
    int rank = 0;
    MiDimension dimension = MiDimension::Other;
    std::string category;
    std::string feature;
    FeatureSign relation = FeatureSign::Mixed;
    double importance = 0.0;
    std::vector<std::string> flags;
};

struct IntrinsicMetricReport {
    std::vector<MetricReportRow> rows;
    std::vector<std::string> warnings;
};

// Joins a ranking with the category map. Unknown features are kept, parked
// under Other/"unmapped" with a warning rather than dropped.
inline IntrinsicMetricReport build_metric_report(const RankedFeatures& ranked,
                                                 const CategoryMap& mapping) {
    IntrinsicMetricReport report;
    int rank = 1;
    for (const auto& r : ranked) {
        MetricReportRow row;
        row.rank = rank++;
        row.feature = r.name;
        row.relation = r.sign;
        row.importance = r.importance;
        const auto it = mapping.find(r.name);
        if (it != mapping.end()) {
            row.dimension = it->second.dimension;
            row.category = it->second.category;
            if (!it->second.note.empty()) row.flags.push_back(it->second.note);
        } else {
            row.dimension = MiDimension::Other;
            row.category = "unmapped";
            row.flags.push_back("unmapped_feature");
            report.warnings.push_back("feature '" + r.name + "' missing from category map");
        }
        if (r.sign == FeatureSign::Mixed) row.flags.push_back("mixed_sign");
        report.rows.push_back(std::move(row));
    }
    return report;
}

inline nlohmann::json report_to_json(const IntrinsicMetricReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : report.rows) {
        nlohmann::json doc = {{"rank", row.rank},
                              {"dimension", to_string(row.dimension)},
                              {"category", row.category},
                              {"feature", row.feature},
                              {"relation", to_string(row.relation)},
                              {"importance", round6(row.importance)}};
        if (!row.flags.empty()) doc["flags"] = row.flags;
        rows.push_back(std::move(doc));
    }
    return rows;
}

// Markdown table in the source table's column order: rank, category,
// intrinsic metric, relation, importance at 6 decimals.
inline std::string report_to_markdown(const IntrinsicMetricReport& report) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& row : report.rows) {
        rows.push_back({std::to_string(row.rank), row.category, row.feature,
                        to_string(row.relation), fixed6(row.importance)});
    }
    std::string out = markdown_table(
        {"Rank", "Category of Intrinsic Metric", "Intrinsic Metric", "Relation", "Importance"},
        rows);
    for (const auto& warning : report.warnings) out += "\n> warning: " + warning + "\n";
    return out;
}

}  // namespace miq
