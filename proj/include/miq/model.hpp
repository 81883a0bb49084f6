#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "miq/errors.hpp"
#include "miq/features.hpp"
#include "miq/parallel.hpp"

namespace miq {

struct ScalingParams {
    std::vector<double> mean;
    std::vector<double> std;  // floored at 1e-12 so constant columns map to 0
};

enum class LossKind { Logistic, Hinge };

inline const char* to_string(LossKind k) { return k == LossKind::Logistic ? "logistic" : "hinge"; }

struct ModelConfig {
    LossKind loss = LossKind::Logistic;
    double l2_strength = 0.01;  // penalty on weights only, never the intercept
    double tol = 1e-8;          // gradient infinity-norm convergence threshold
    int max_iters = 10000;

    bool operator==(const ModelConfig& other) const {
        return loss == other.loss && l2_strength == other.l2_strength && tol == other.tol &&
               max_iters == other.max_iters;
    }
};

struct TrainedModel {
    std::vector<double> weights;
    double intercept = 0.0;
    LossKind loss = LossKind::Logistic;
    double l2_strength = 0.0;
    ScalingParams scaling;
    std::vector<std::string> feature_names;
    ModelConfig config;
    std::uint64_t seed = 0;
    std::string corpus_hash;

    double margin_standardized(const std::vector<double>& z) const {
        double s = intercept;
        for (std::size_t j = 0; j < weights.size(); ++j) s += weights[j] * z[j];
        return s;
    }

    std::vector<double> standardize_row(const std::vector<double>& raw) const {
        std::vector<double> z(raw.size());
        for (std::size_t j = 0; j < raw.size(); ++j) {
            z[j] = (raw[j] - scaling.mean[j]) / scaling.std[j];
        }
        return z;
    }
};

// Column-wise z-scoring with population statistics; returns the transformed
// matrix and the parameters needed to apply the same transform to held-out
// rows.
inline std::pair<FeatureMatrix, ScalingParams> standardize(const FeatureMatrix& m) {
    if (m.rows.empty()) throw EmptyMatrix();
    const std::size_t d = m.n_cols();
    ScalingParams params;
    params.mean.resize(d);
    params.std.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
        double sum = 0.0;
        for (const auto& row : m.rows) sum += row[j];
        const double mu = sum / static_cast<double>(m.rows.size());
        double sq = 0.0;
        for (const auto& row : m.rows) {
            const double diff = row[j] - mu;
            sq += diff * diff;
        }
        params.mean[j] = mu;
        params.std[j] = std::max(std::sqrt(sq / static_cast<double>(m.rows.size())), 1e-12);
    }
    FeatureMatrix out = m;
    for (auto& row : out.rows) {
        for (std::size_t j = 0; j < d; ++j) row[j] = (row[j] - params.mean[j]) / params.std[j];
    }
    return {std::move(out), std::move(params)};
}

namespace detail {

struct LossGrad {
    double loss = 0.0;
    std::vector<double> grad_w;
    double grad_b = 0.0;
};

// Regularized empirical risk over standardized rows with labels in {-1, +1}.
// Logistic: mean log(1 + exp(-m)); hinge: mean max(0, 1 - m); both plus
// (l2/2) * |w|^2 with the intercept excluded.
inline double objective(const std::vector<std::vector<double>>& z, const std::vector<double>& y,
                        const std::vector<double>& w, double b, LossKind loss, double l2) {
    const std::size_t n = z.size();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double m = b;
        for (std::size_t j = 0; j < w.size(); ++j) m += w[j] * z[i][j];
        m *= y[i];
        if (loss == LossKind::Logistic) {
            total += m < -33.0 ? -m : std::log1p(std::exp(-m));
        } else {
            total += std::max(0.0, 1.0 - m);
        }
    }
    total /= static_cast<double>(n);
    double penalty = 0.0;
    for (const double wj : w) penalty += wj * wj;
    return total + 0.5 * l2 * penalty;
}

inline LossGrad objective_with_grad(const std::vector<std::vector<double>>& z,
                                    const std::vector<double>& y, const std::vector<double>& w,
                                    double b, LossKind loss, double l2) {
    const std::size_t n = z.size();
    const std::size_t d = w.size();
    LossGrad out;
    out.grad_w.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double m = b;
        for (std::size_t j = 0; j < d; ++j) m += w[j] * z[i][j];
        m *= y[i];
        double dldm = 0.0;  // derivative of the per-sample loss w.r.t. the signed margin
        if (loss == LossKind::Logistic) {
            out.loss += m < -33.0 ? -m : std::log1p(std::exp(-m));
            dldm = m > 33.0 ? 0.0 : -1.0 / (1.0 + std::exp(m));
        } else {
            out.loss += std::max(0.0, 1.0 - m);
            dldm = m < 1.0 ? -1.0 : 0.0;
        }
        const double scale = dldm * y[i];
        for (std::size_t j = 0; j < d; ++j) out.grad_w[j] += scale * z[i][j];
        out.grad_b += scale;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    out.loss *= inv_n;
    out.grad_b *= inv_n;
    double penalty = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        out.grad_w[j] = out.grad_w[j] * inv_n + l2 * w[j];
        penalty += w[j] * w[j];
    }
    out.loss += 0.5 * l2 * penalty;
    return out;
}

}  // namespace detail

// Diagnostics from the optimizer; mainly consumed by tests.
struct TrainingTrace {
    std::vector<double> losses;
    int iterations = 0;
    bool converged = false;
};

// Full-batch gradient descent from a zero start with backtracking line
// search (Armijo), so the objective never increases. Deterministic for a
// fixed matrix and config; `seed` is threaded through for provenance.
inline TrainedModel train(const FeatureMatrix& m, const ModelConfig& config, std::uint64_t seed,
                          TrainingTrace* trace = nullptr) {
    validate_matrix(m);
    const auto labeled = m.labeled_indices();
    if (labeled.empty()) throw SingleClass();
    FeatureMatrix training = m.select_rows(labeled);
    bool has_high = false, has_low = false;
    for (const auto l : training.labels) {
        has_high = has_high || l == UpqLabel::High;
        has_low = has_low || l == UpqLabel::Low;
    }
    if (!has_high || !has_low) throw SingleClass();

    auto [z_matrix, scaling] = standardize(training);
    std::vector<double> y;
    y.reserve(z_matrix.rows.size());
    for (const auto l : z_matrix.labels) y.push_back(l == UpqLabel::High ? 1.0 : -1.0);

    const std::size_t d = m.n_cols();
    std::vector<double> w(d, 0.0);
    double b = 0.0;

    double step = 1.0;
    auto state = detail::objective_with_grad(z_matrix.rows, y, w, b, config.loss, config.l2_strength);
    if (trace) trace->losses.push_back(state.loss);

    int iter = 0;
    bool converged = false;
    for (; iter < config.max_iters; ++iter) {
        double grad_inf = std::fabs(state.grad_b);
        double grad_sq = state.grad_b * state.grad_b;
        for (const double g : state.grad_w) {
            grad_inf = std::max(grad_inf, std::fabs(g));
            grad_sq += g * g;
        }
        if (grad_inf < config.tol) {
            converged = true;
            break;
        }

        // Backtracking: halve until the Armijo condition holds.
        constexpr double kArmijo = 1e-4;
        double t = step;
        std::vector<double> w_next(d);
        double b_next = 0.0;
        double f_next = 0.0;
        bool accepted = false;
        while (t > 1e-20) {
            for (std::size_t j = 0; j < d; ++j) w_next[j] = w[j] - t * state.grad_w[j];
            b_next = b - t * state.grad_b;
            f_next = detail::objective(z_matrix.rows, y, w_next, b_next, config.loss,
                                       config.l2_strength);
            if (f_next <= state.loss - kArmijo * t * grad_sq) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) break;  // no descent step found; subgradient kink or numerical floor

        w = std::move(w_next);
        b = b_next;
        step = std::min(t * 2.0, 1e6);  // allow the step to grow back
        state = detail::objective_with_grad(z_matrix.rows, y, w, b, config.loss, config.l2_strength);
        if (trace) trace->losses.push_back(state.loss);
    }

    for (const double wj : w) {
        if (!std::isfinite(wj)) throw NonFinite("trained weights");
    }
    if (!std::isfinite(b)) throw NonFinite("trained intercept");

    TrainedModel model;
    model.weights = std::move(w);
    model.intercept = b;
    model.loss = config.loss;
    model.l2_strength = config.l2_strength;
    model.scaling = std::move(scaling);
    model.feature_names = m.names;
    model.config = config;
    model.seed = seed;
    if (trace) {
        trace->iterations = iter;
        trace->converged = converged;
    }
    return model;
}

struct Prediction {
    UpqLabel label = UpqLabel::Low;
    double score = 0.0;  // margin scale: w . z + b
};

namespace detail {

// Alignment of an input vector onto the model's feature order, by name.
inline std::vector<double> align_features(const TrainedModel& model, const FeatureVector& x) {
    if (x.names.size() != x.values.size()) throw FeatureMismatch("names/values length mismatch");
    std::vector<double> raw(model.feature_names.size());
    std::vector<bool> filled(model.feature_names.size(), false);
    for (std::size_t i = 0; i < x.names.size(); ++i) {
        const auto it =
            std::find(model.feature_names.begin(), model.feature_names.end(), x.names[i]);
        if (it == model.feature_names.end()) {
            throw FeatureMismatch("unexpected feature '" + x.names[i] + "'");
        }
        const auto j = static_cast<std::size_t>(it - model.feature_names.begin());
        raw[j] = x.values[i];
        filled[j] = true;
    }
    for (std::size_t j = 0; j < filled.size(); ++j) {
        if (!filled[j]) throw FeatureMismatch("missing feature '" + model.feature_names[j] + "'");
    }
    return raw;
}

}  // namespace detail

// Margin-scale score; High strictly above 0, the boundary itself is Low.
inline Prediction predict(const TrainedModel& model, const FeatureVector& x) {
    const auto raw = detail::align_features(model, x);
    const auto z = model.standardize_row(raw);
    Prediction p;
    p.score = model.margin_standardized(z);
    p.label = p.score > 0.0 ? UpqLabel::High : UpqLabel::Low;
    return p;
}

// Scores for every row of a matrix whose columns match the model's features
// (any column order, aligned by name).
inline std::vector<double> predict_scores(const TrainedModel& model, const FeatureMatrix& m) {
    std::vector<std::size_t> cols;
    cols.reserve(model.feature_names.size());
    for (const auto& name : model.feature_names) {
        const auto it = std::find(m.names.begin(), m.names.end(), name);
        if (it == m.names.end()) throw FeatureMismatch("matrix lacks feature '" + name + "'");
        cols.push_back(static_cast<std::size_t>(it - m.names.begin()));
    }
    std::vector<double> scores(m.rows.size());
    for (std::size_t i = 0; i < m.rows.size(); ++i) {
        double s = model.intercept;
        for (std::size_t j = 0; j < cols.size(); ++j) {
            const double z = (m.rows[i][cols[j]] - model.scaling.mean[j]) / model.scaling.std[j];
            s += model.weights[j] * z;
        }
        scores[i] = s;
    }
    return scores;
}

struct ConfusionCounts {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    std::size_t total() const { return tp + fp + tn + fn; }
};

struct EvaluationMetrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::optional<double> roc_auc;  // absent when only one class is present
    ConfusionCounts confusion;
    std::vector<std::string> flags;
};

// Rank-based ROC-AUC with midranks for ties; equals exhaustive pair counting
// (ties contribute one half).
inline std::optional<double> roc_auc_from_scores(const std::vector<double>& scores,
                                                 const std::vector<bool>& is_positive) {
    const std::size_t n = scores.size();
    std::size_t n_pos = 0;
    for (const bool p : is_positive) n_pos += p ? 1 : 0;
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) return std::nullopt;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        // midrank of the tie block [i, j), 1-based ranks
        const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) {
            if (is_positive[order[k]]) rank_sum_pos += midrank;
        }
        i = j;
    }
    const double p = static_cast<double>(n_pos);
    const double q = static_cast<double>(n_neg);
    return (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * q);
}

// Confusion-based metrics at threshold 0 plus rank-based ROC-AUC. High is
// the positive class; zero-denominator precision/recall/F1 come back as 0
// with a flag rather than an error.
inline EvaluationMetrics evaluate(const TrainedModel& model, const FeatureMatrix& m) {
    const auto labeled = m.labeled_indices();
    if (labeled.empty()) throw SingleClass();
    const FeatureMatrix eval = m.select_rows(labeled);
    const auto scores = predict_scores(model, eval);

    EvaluationMetrics out;
    std::vector<bool> is_positive(eval.rows.size());
    for (std::size_t i = 0; i < eval.rows.size(); ++i) {
        const bool actual_high = eval.labels[i] == UpqLabel::High;
        const bool predicted_high = scores[i] > 0.0;
        is_positive[i] = actual_high;
        if (actual_high && predicted_high) ++out.confusion.tp;
        if (!actual_high && predicted_high) ++out.confusion.fp;
        if (!actual_high && !predicted_high) ++out.confusion.tn;
        if (actual_high && !predicted_high) ++out.confusion.fn;
    }
    const auto& c = out.confusion;
    out.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
    if (c.tp + c.fp > 0) {
        out.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    } else {
        out.flags.push_back("precision_zero_denominator");
    }
    if (c.tp + c.fn > 0) {
        out.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    } else {
        out.flags.push_back("recall_zero_denominator");
    }
    if (out.precision + out.recall > 0.0) {
        out.f1 = 2.0 * out.precision * out.recall / (out.precision + out.recall);
    } else {
        out.flags.push_back("f1_zero");
    }
    out.roc_auc = roc_auc_from_scores(scores, is_positive);
    if (!out.roc_auc) out.flags.push_back("auc_single_class");
    return out;
}

// Mean CV ROC-AUC for one config: each fold is refit with fold-local
// standardization (train() standardizes its own input). Per-fold results
// are collected into slots and combined in fold order, so thread count
// cannot change the sum.
inline double cv_mean_auc(const FeatureMatrix& m, const ModelConfig& config,
                          const FoldAssignment& folds, std::uint64_t seed) {
    std::map<std::string, std::size_t> row_of_id;
    for (std::size_t i = 0; i < m.row_ids.size(); ++i) row_of_id[m.row_ids[i]] = i;

    std::vector<double> fold_auc(static_cast<std::size_t>(folds.k), 0.0);
    std::vector<bool> fold_defined(static_cast<std::size_t>(folds.k), false);
    parallel_for(static_cast<std::size_t>(folds.k), [&](std::size_t f) {
        std::vector<std::size_t> train_rows, val_rows;
        for (const auto& [id, fold] : folds.assignment) {
            const auto it = row_of_id.find(id);
            if (it == row_of_id.end()) throw FeatureMismatch("fold id '" + id + "' not in matrix");
            (static_cast<std::size_t>(fold) == f ? val_rows : train_rows).push_back(it->second);
        }
        const TrainedModel model = train(m.select_rows(train_rows), config, seed);
        const FeatureMatrix val = m.select_rows(val_rows);
        const auto metrics = evaluate(model, val);
        if (metrics.roc_auc) {
            fold_auc[f] = *metrics.roc_auc;
            fold_defined[f] = true;
        }
    });
    double sum = 0.0;
    std::size_t defined = 0;
    for (std::size_t f = 0; f < fold_auc.size(); ++f) {
        if (fold_defined[f]) {
            sum += fold_auc[f];
            ++defined;
        }
    }
    if (defined == 0) throw SingleClass();
    return sum / static_cast<double>(defined);
}

// Grand-average CV metrics (all five, averaged over folds).
inline EvaluationMetrics cv_mean_metrics(const FeatureMatrix& m, const ModelConfig& config,
                                         const FoldAssignment& folds, std::uint64_t seed) {
    std::map<std::string, std::size_t> row_of_id;
    for (std::size_t i = 0; i < m.row_ids.size(); ++i) row_of_id[m.row_ids[i]] = i;
    std::vector<EvaluationMetrics> per_fold(static_cast<std::size_t>(folds.k));
    parallel_for(static_cast<std::size_t>(folds.k), [&](std::size_t f) {
        std::vector<std::size_t> train_rows, val_rows;
        for (const auto& [id, fold] : folds.assignment) {
            const auto it = row_of_id.find(id);
            if (it == row_of_id.end()) throw FeatureMismatch("fold id '" + id + "' not in matrix");
            (static_cast<std::size_t>(fold) == f ? val_rows : train_rows).push_back(it->second);
        }
        const TrainedModel model = train(m.select_rows(train_rows), config, seed);
        per_fold[f] = evaluate(model, m.select_rows(val_rows));
    });
    EvaluationMetrics mean;
    double auc_sum = 0.0;
    std::size_t auc_defined = 0;
    for (const auto& fm : per_fold) {
        mean.accuracy += fm.accuracy;
        mean.precision += fm.precision;
        mean.recall += fm.recall;
        mean.f1 += fm.f1;
        mean.confusion.tp += fm.confusion.tp;
        mean.confusion.fp += fm.confusion.fp;
        mean.confusion.tn += fm.confusion.tn;
        mean.confusion.fn += fm.confusion.fn;
        if (fm.roc_auc) {
            auc_sum += *fm.roc_auc;
            ++auc_defined;
        }
        for (const auto& flag : fm.flags) mean.flags.push_back(flag);
    }
    const double k = static_cast<double>(per_fold.size());
    mean.accuracy /= k;
    mean.precision /= k;
    mean.recall /= k;
    mean.f1 /= k;
    if (auc_defined > 0) mean.roc_auc = auc_sum / static_cast<double>(auc_defined);
    return mean;
}

struct GridResult {
    ModelConfig best_config;
    double best_score = 0.0;
    std::vector<std::pair<ModelConfig, double>> table;  // declared grid order
};

// Scores every config by mean CV ROC-AUC; ties resolve to the earliest
// config in the declared grid order.
inline GridResult grid_search_cv(const FeatureMatrix& m, const std::vector<ModelConfig>& grid,
                                 const FoldAssignment& folds, std::uint64_t seed) {
    if (grid.empty()) throw Error("empty hyperparameter grid");
    GridResult out;
    for (const auto& config : grid) {
        const double score = cv_mean_auc(m, config, folds, seed);
        out.table.emplace_back(config, score);
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < out.table.size(); ++i) {
        if (out.table[i].second > out.table[best].second) best = i;
    }
    out.best_config = out.table[best].first;
    out.best_score = out.table[best].second;
    return out;
}

inline nlohmann::json model_to_json(const TrainedModel& model) {
    return nlohmann::json{{"loss", to_string(model.loss)},
                          {"weights", model.weights},
                          {"intercept", model.intercept},
                          {"regularization", {{"kind", "l2"}, {"strength", model.l2_strength}}},
                          {"scaling", {{"mean", model.scaling.mean}, {"std", model.scaling.std}}},
                          {"feature_names", model.feature_names},
                          {"config",
                           {{"loss", to_string(model.config.loss)},
                            {"l2_strength", model.config.l2_strength},
                            {"tol", model.config.tol},
                            {"max_iters", model.config.max_iters}}},
                          {"seed", model.seed},
                          {"corpus_hash", model.corpus_hash}};
}

inline TrainedModel model_from_json(const nlohmann::json& doc) {
    TrainedModel model;
    const std::string loss = doc.at("loss").get<std::string>();
    model.loss = loss == "hinge" ? LossKind::Hinge : LossKind::Logistic;
    model.weights = doc.at("weights").get<std::vector<double>>();
    model.intercept = doc.at("intercept").get<double>();
    model.l2_strength = doc.at("regularization").at("strength").get<double>();
    model.scaling.mean = doc.at("scaling").at("mean").get<std::vector<double>>();
    model.scaling.std = doc.at("scaling").at("std").get<std::vector<double>>();
    model.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
    const auto& config = doc.at("config");
    model.config.loss = config.at("loss").get<std::string>() == "hinge" ? LossKind::Hinge
                                                                        : LossKind::Logistic;
    model.config.l2_strength = config.at("l2_strength").get<double>();
    model.config.tol = config.at("tol").get<double>();
    model.config.max_iters = config.at("max_iters").get<int>();
    model.seed = doc.at("seed").get<std::uint64_t>();
    model.corpus_hash = doc.value("corpus_hash", std::string());
    if (model.weights.size() != model.feature_names.size()) {
        throw FeatureMismatch("weights/feature_names length mismatch in model file");
    }
    return model;
}

inline void save_model(const TrainedModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write model file '" + path + "'");
    out << model_to_json(model).dump(2) << "\n";
}

inline TrainedModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model file '" + path + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(0, "<model>", e.what());
    }
    return model_from_json(doc);
}

}  // namespace miq
