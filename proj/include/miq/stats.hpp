#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "miq/corpus.hpp"
#include "miq/errors.hpp"
#include "miq/explain.hpp"
#include "miq/features.hpp"
#include "miq/format.hpp"
#include "miq/mathx.hpp"

namespace miq {

// Paired binary outcomes. a/d are the concordant cells, b/c the discordant
// ones that drive the McNemar statistic.
struct PairedBinaryTable {
    std::size_t a = 0;  // both high
    std::size_t b = 0;  // group A high, group B low
    std::size_t c = 0;  // group A low, group B high
    std::size_t d = 0;  // both low
    std::size_t n() const { return a + b + c + d; }
};

enum class TestMethod { McNemarCorrected, McNemarExact, PairedT };

inline const char* to_string(TestMethod m) {
    switch (m) {
        case TestMethod::McNemarCorrected: return "mcnemar_corrected";
        case TestMethod::McNemarExact: return "mcnemar_exact";
        case TestMethod::PairedT: return "paired_t";
    }
    return "?";
}

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    TestMethod method = TestMethod::PairedT;
    double df = 0.0;       // paired t only
    bool degenerate = false;
};

// Exact two-sided binomial McNemar p: X ~ Bin(b+c, 1/2), doubled lower tail
// of min(b, c), capped at 1.
inline double mcnemar_exact_p(std::size_t b, std::size_t c) {
    const std::size_t n = b + c;
    if (n == 0) return 1.0;
    const std::size_t k = std::min(b, c);
    return std::min(1.0, 2.0 * mathx::binomial_half_cdf(k, n));
}

// Continuity-corrected chi-squared for large discordant counts (b+c >= 25),
// exact binomial below, degenerate p = 1 when no discordant pairs exist.
inline TestResult mcnemar(const PairedBinaryTable& t) {
    TestResult out;
    const std::size_t discordant = t.b + t.c;
    if (discordant == 0) {
        out.method = TestMethod::McNemarExact;
        out.statistic = 0.0;
        out.p_value = 1.0;
        out.degenerate = true;
        return out;
    }
    if (discordant >= 25) {
        const double diff = t.b > t.c ? static_cast<double>(t.b - t.c) : static_cast<double>(t.c - t.b);
        const double corrected = std::max(diff - 1.0, 0.0);
        out.method = TestMethod::McNemarCorrected;
        out.statistic = corrected * corrected / static_cast<double>(discordant);
        out.p_value = mathx::chi2_survival_1df(out.statistic);
        return out;
    }
    out.method = TestMethod::McNemarExact;
    out.statistic = static_cast<double>(std::min(t.b, t.c));
    out.p_value = mcnemar_exact_p(t.b, t.c);
    return out;
}

struct RatioResult {
    double risk_ratio = 0.0;   // (high_A/n) / (high_B/n)
    double odds_ratio = 0.0;   // (high_A/(n-high_A)) / (high_B/(n-high_B))
};

// Both ratio conventions, always together: reports label each explicitly
// instead of printing a single ambiguous "OR".
inline RatioResult rate_ratios(std::size_t high_a, std::size_t high_b, std::size_t n) {
    if (high_a == 0 || high_a >= n) throw DegenerateMargin(high_a, n);
    if (high_b == 0 || high_b >= n) throw DegenerateMargin(high_b, n);
    RatioResult out;
    const double na = static_cast<double>(high_a);
    const double nb = static_cast<double>(high_b);
    const double nn = static_cast<double>(n);
    out.risk_ratio = (na / nn) / (nb / nn);
    out.odds_ratio = (na / (nn - na)) / (nb / (nn - nb));
    return out;
}

// Two-sided paired t-test on the per-pair differences. The statistic is
// computed as d * sqrt(n) so it agrees bit-for-bit with cohens_d_paired.
inline TestResult paired_t(const std::vector<double>& diffs) {
    if (diffs.size() < 2) throw InsufficientData("paired differences", 2, diffs.size());
    TestResult out;
    out.method = TestMethod::PairedT;
    const std::size_t n = diffs.size();
    const double mean = mathx::mean(diffs.data(), n);
    const double sd = mathx::sample_std(diffs.data(), n, mean);
    out.df = static_cast<double>(n - 1);
    if (sd == 0.0) {
        out.statistic = 0.0;
        out.p_value = 1.0;
        out.degenerate = true;
        return out;
    }
    out.statistic = (mean / sd) * std::sqrt(static_cast<double>(n));
    out.p_value = mathx::student_t_two_sided_p(out.statistic, out.df);
    return out;
}

struct EffectSize {
    double cohens_d = 0.0;
    std::size_t n = 0;
    bool zero_variance = false;
};

// Paired Cohen's d: mean difference over the sample standard deviation of
// the differences.
inline EffectSize cohens_d_paired(const std::vector<double>& diffs) {
    if (diffs.size() < 2) throw InsufficientData("paired differences", 2, diffs.size());
    EffectSize out;
    out.n = diffs.size();
    const double mean = mathx::mean(diffs.data(), diffs.size());
    const double sd = mathx::sample_std(diffs.data(), diffs.size(), mean);
    if (sd == 0.0) {
        out.zero_variance = true;
        return out;
    }
    out.cohens_d = mean / sd;
    return out;
}

inline std::string significance_stars(double p) {
    if (p < 0.001) return "***";
    if (p < 0.01) return "**";
    if (p < 0.05) return "*";
    return "";
}

struct FeatureComparison {
    std::string feature;
    double mean_a = 0.0;
    double mean_b = 0.0;
    double mean_diff = 0.0;  // A - B
    TestResult t_test;
    EffectSize effect;
    std::string stars;
};

struct UpqComparison {
    PairedBinaryTable table;
    TestResult test;
    std::optional<RatioResult> ratios;
    double high_rate_a = 0.0;
    double high_rate_b = 0.0;
};

struct ComparisonReport {
    std::string group_a;
    std::string group_b;
    std::size_t n_pairs = 0;
    std::vector<FeatureComparison> features;
    std::optional<UpqComparison> upq;
    std::vector<std::string> notes;
};

// Paired comparison of two responder groups whose transcripts share ids
// across the two corpora. Per feature: paired t and Cohen's d on the A-B
// differences. When both sides are fully labeled, the binary outcome gets a
// McNemar test plus both rate ratios.
inline ComparisonReport compare_groups(const Corpus& corpus_a, const Corpus& corpus_b,
                                       const FeatureMatrix& features_a,
                                       const FeatureMatrix& features_b) {
    if (features_a.names != features_b.names) {
        throw FeatureMismatch("feature matrices disagree on columns");
    }
    std::map<std::string, std::size_t> rows_a, rows_b;
    for (std::size_t i = 0; i < features_a.row_ids.size(); ++i) rows_a[features_a.row_ids[i]] = i;
    for (std::size_t i = 0; i < features_b.row_ids.size(); ++i) rows_b[features_b.row_ids[i]] = i;

    std::vector<std::string> pair_ids;
    for (const auto& t : corpus_a.transcripts()) {
        if (!corpus_b.find(t.id)) throw UnpairedTranscript(t.id);
        if (!rows_a.count(t.id) || !rows_b.count(t.id)) throw UnpairedTranscript(t.id);
        pair_ids.push_back(t.id);
    }
    for (const auto& t : corpus_b.transcripts()) {
        if (!corpus_a.find(t.id)) throw UnpairedTranscript(t.id);
    }
    if (pair_ids.size() < 2) throw InsufficientData("paired transcripts", 2, pair_ids.size());
    std::sort(pair_ids.begin(), pair_ids.end());

    ComparisonReport report;
    report.group_a = corpus_a.transcripts().empty() ? "A" : to_string(corpus_a.transcripts()[0].responder);
    report.group_b = corpus_b.transcripts().empty() ? "B" : to_string(corpus_b.transcripts()[0].responder);
    report.n_pairs = pair_ids.size();

    for (std::size_t col = 0; col < features_a.names.size(); ++col) {
        FeatureComparison fc;
        fc.feature = features_a.names[col];
        std::vector<double> diffs;
        diffs.reserve(pair_ids.size());
        for (const auto& id : pair_ids) {
            const double va = features_a.rows[rows_a[id]][col];
            const double vb = features_b.rows[rows_b[id]][col];
            fc.mean_a += va;
            fc.mean_b += vb;
            diffs.push_back(va - vb);
        }
        fc.mean_a /= static_cast<double>(pair_ids.size());
        fc.mean_b /= static_cast<double>(pair_ids.size());
        fc.mean_diff = fc.mean_a - fc.mean_b;
        fc.t_test = paired_t(diffs);
        fc.effect = cohens_d_paired(diffs);
        fc.stars = fc.t_test.degenerate ? "" : significance_stars(fc.t_test.p_value);
        report.features.push_back(std::move(fc));
    }

    bool all_labeled = true;
    for (const auto& id : pair_ids) {
        const Transcript* ta = corpus_a.find(id);
        const Transcript* tb = corpus_b.find(id);
        if (ta->upq == UpqLabel::Unlabeled || tb->upq == UpqLabel::Unlabeled) {
            all_labeled = false;
            break;
        }
    }
    if (all_labeled) {
        UpqComparison upq;
        for (const auto& id : pair_ids) {
            const bool a_high = corpus_a.find(id)->upq == UpqLabel::High;
            const bool b_high = corpus_b.find(id)->upq == UpqLabel::High;
            if (a_high && b_high) ++upq.table.a;
            if (a_high && !b_high) ++upq.table.b;
            if (!a_high && b_high) ++upq.table.c;
            if (!a_high && !b_high) ++upq.table.d;
        }
        upq.test = mcnemar(upq.table);
        const std::size_t high_a = upq.table.a + upq.table.b;
        const std::size_t high_b = upq.table.a + upq.table.c;
        upq.high_rate_a = static_cast<double>(high_a) / static_cast<double>(upq.table.n());
        upq.high_rate_b = static_cast<double>(high_b) / static_cast<double>(upq.table.n());
        try {
            upq.ratios = rate_ratios(high_a, high_b, upq.table.n());
            report.notes.push_back(
                "risk ratio and odds ratio are distinct quantities and are reported "
                "separately; no single 'OR' figure is printed");
        } catch (const DegenerateMargin&) {
            report.notes.push_back("rate ratios undefined: a group has all-high or all-low outcomes");
        }
        report.upq = std::move(upq);
    } else {
        report.notes.push_back("binary outcome comparison skipped: unlabeled transcripts in a group");
    }
    return report;
}

// Optional join against a metric report: dimension/category/relation and
// importance columns are filled for features the report covers.
inline nlohmann::json comparison_to_json(const ComparisonReport& report,
                                         const IntrinsicMetricReport* metric_report = nullptr) {
    std::map<std::string, const MetricReportRow*> info;
    if (metric_report) {
        for (const auto& row : metric_report->rows) info[row.feature] = &row;
    }
    nlohmann::json features = nlohmann::json::array();
    for (const auto& fc : report.features) {
        nlohmann::json row = {{"feature", fc.feature},
                              {"mean_a", round6(fc.mean_a)},
                              {"mean_b", round6(fc.mean_b)},
                              {"mean_diff", round6(fc.mean_diff)},
                              {"t", round6(fc.t_test.statistic)},
                              {"df", fc.t_test.df},
                              {"p", fc.t_test.degenerate ? nlohmann::json(nullptr)
                                                         : nlohmann::json(round_sig6(fc.t_test.p_value))},
                              {"cohens_d", fc.effect.zero_variance
                                               ? nlohmann::json(nullptr)
                                               : nlohmann::json(round6(fc.effect.cohens_d))},
                              {"stars", fc.stars},
                              {"zero_variance", fc.effect.zero_variance}};
        const auto it = info.find(fc.feature);
        if (it != info.end()) {
            row["dimension"] = to_string(it->second->dimension);
            row["category"] = it->second->category;
            row["relation"] = to_string(it->second->relation);
            row["importance"] = round6(it->second->importance);
        }
        features.push_back(std::move(row));
    }
    nlohmann::json doc = {{"group_a", report.group_a},
                          {"group_b", report.group_b},
                          {"n_pairs", report.n_pairs},
                          {"features", features},
                          {"notes", report.notes}};
    if (report.upq) {
        const auto& u = *report.upq;
        doc["upq"] = {{"table", {{"a", u.table.a}, {"b", u.table.b}, {"c", u.table.c}, {"d", u.table.d}}},
                      {"method", to_string(u.test.method)},
                      {"statistic", round6(u.test.statistic)},
                      {"p", round_sig6(u.test.p_value)},
                      {"degenerate", u.test.degenerate},
                      {"high_rate_a", round6(u.high_rate_a)},
                      {"high_rate_b", round6(u.high_rate_b)}};
        if (u.ratios) {
            doc["upq"]["risk_ratio"] = round6(u.ratios->risk_ratio);
            doc["upq"]["odds_ratio"] = round6(u.ratios->odds_ratio);
        }
    }
    return doc;
}

// Markdown mirroring the comparative-analysis table layout: dimension,
// category, intrinsic metric, relation, Cohen's d with stars, importance.
inline std::string comparison_to_markdown(const ComparisonReport& report,
                                          const IntrinsicMetricReport* metric_report = nullptr) {
    std::map<std::string, const MetricReportRow*> info;
    if (metric_report) {
        for (const auto& row : metric_report->rows) info[row.feature] = &row;
    }
    std::vector<std::vector<std::string>> rows;
    for (const auto& fc : report.features) {
        std::string dimension = "-", category = "-", relation = "-", importance = "-";
        const auto it = info.find(fc.feature);
        if (it != info.end()) {
            dimension = to_string(it->second->dimension);
            category = it->second->category;
            relation = to_string(it->second->relation);
            importance = fixed6(it->second->importance);
        }
        const std::string d_cell =
            fc.effect.zero_variance ? "0 (zero variance)" : fixed6(fc.effect.cohens_d) + fc.stars;
        rows.push_back({dimension, category, fc.feature, relation, d_cell, importance});
    }
    std::string out = "### Intrinsic metrics: " + report.group_a + " - " + report.group_b + " (n=" +
                      std::to_string(report.n_pairs) + " pairs)\n\n";
    out += markdown_table({"Categories", "Category of Intrinsic Metric", "Intrinsic Metric",
                           "Relation", "Cohen's d (" + report.group_a + "-" + report.group_b + ")",
                           "Importance"},
                          rows);
    if (report.upq) {
        const auto& u = *report.upq;
        out += "\n### Binary outcome (" + report.group_a + " vs " + report.group_b + ")\n\n";
        std::vector<std::vector<std::string>> upq_rows;
        std::string ratio_cells_rr = "-", ratio_cells_or = "-";
        if (u.ratios) {
            ratio_cells_rr = fixed6(u.ratios->risk_ratio);
            ratio_cells_or = fixed6(u.ratios->odds_ratio);
        }
        upq_rows.push_back({std::to_string(u.table.n()), fixed6(100.0 * u.high_rate_a) + "%",
                            fixed6(100.0 * u.high_rate_b) + "%", fixed6(u.test.statistic),
                            sig6(u.test.p_value), ratio_cells_rr, ratio_cells_or});
        out += markdown_table({"N", "High A", "High B", "Statistic", "P", "Risk Ratio", "Odds Ratio"},
                              upq_rows);
    }
    for (const auto& note : report.notes) out += "\n> note: " + note + "\n";
    return out;
}

}  // namespace miq
