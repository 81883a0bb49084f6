#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "miq/corpus.hpp"
#include "miq/errors.hpp"
#include "miq/format.hpp"
#include "miq/lexicon.hpp"

namespace miq {

struct FeatureVector {
    std::vector<std::string> names;
    std::vector<double> values;
};

// Row-per-transcript numeric features. `labels` is either empty (unlabeled
// matrix) or aligned 1:1 with rows, with Unlabeled marking rows excluded
// from training.
struct FeatureMatrix {
    std::vector<std::string> names;
    std::vector<std::string> row_ids;
    std::vector<std::vector<double>> rows;
    std::vector<UpqLabel> labels;

    std::size_t n_rows() const { return rows.size(); }
    std::size_t n_cols() const { return names.size(); }

    bool has_labels() const {
        return !labels.empty() &&
               std::any_of(labels.begin(), labels.end(),
                           [](UpqLabel l) { return l != UpqLabel::Unlabeled; });
    }

    std::vector<std::size_t> labeled_indices() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] != UpqLabel::Unlabeled) out.push_back(i);
        }
        return out;
    }

    // Sub-matrix restricted to the given rows.
    FeatureMatrix select_rows(const std::vector<std::size_t>& indices) const {
        FeatureMatrix out;
        out.names = names;
        for (const auto i : indices) {
            out.row_ids.push_back(row_ids[i]);
            out.rows.push_back(rows[i]);
            if (!labels.empty()) out.labels.push_back(labels[i]);
        }
        return out;
    }

    // Sub-matrix restricted to the named columns, in the given order.
    FeatureMatrix select_columns(const std::vector<std::string>& keep) const {
        std::vector<std::size_t> cols;
        cols.reserve(keep.size());
        for (const auto& name : keep) {
            const auto it = std::find(names.begin(), names.end(), name);
            if (it == names.end()) throw FeatureMismatch("unknown column '" + name + "'");
            cols.push_back(static_cast<std::size_t>(it - names.begin()));
        }
        FeatureMatrix out;
        out.names = keep;
        out.row_ids = row_ids;
        out.labels = labels;
        out.rows.reserve(rows.size());
        for (const auto& row : rows) {
            std::vector<double> r;
            r.reserve(cols.size());
            for (const auto c : cols) r.push_back(row[c]);
            out.rows.push_back(std::move(r));
        }
        return out;
    }

    FeatureVector row_vector(std::size_t i) const { return FeatureVector{names, rows[i]}; }
};

inline void validate_matrix(const FeatureMatrix& m) {
    std::set<std::string> seen;
    for (const auto& name : m.names) {
        if (!seen.insert(name).second) throw FeatureMismatch("duplicate feature name '" + name + "'");
    }
    if (!m.labels.empty() && m.labels.size() != m.rows.size()) {
        throw FeatureMismatch("labels length does not match row count");
    }
    if (m.row_ids.size() != m.rows.size()) {
        throw FeatureMismatch("row_ids length does not match row count");
    }
    for (std::size_t i = 0; i < m.rows.size(); ++i) {
        if (m.rows[i].size() != m.names.size()) {
            throw RaggedRows(i + 1, m.names.size(), m.rows[i].size());
        }
        for (const double v : m.rows[i]) {
            if (!std::isfinite(v)) throw NonFinite("feature matrix row " + std::to_string(i));
        }
    }
}

struct StrategyFrequencies {
    struct Entry {
        std::size_t count = 0;
        double rate = 0.0;  // count / therapist utterance count
    };
    std::map<StrategyKind, Entry> per_kind;
    std::size_t therapist_utterances = 0;
};

// Counts strategy annotations across therapist utterances; multi-label
// utterances contribute once to each tagged kind.
inline StrategyFrequencies strategy_frequencies(const Transcript& t) {
    StrategyFrequencies out;
    out.therapist_utterances = t.therapist_utterance_count();
    if (out.therapist_utterances == 0) throw NoTherapistUtterances(t.id);
    for (const auto kind : kAllStrategies) out.per_kind[kind] = {};
    for (const auto& u : t.utterances) {
        if (u.speaker != Speaker::Therapist) continue;
        for (const auto kind : u.strategies) ++out.per_kind[kind].count;
    }
    for (auto& [kind, entry] : out.per_kind) {
        entry.rate = static_cast<double>(entry.count) / static_cast<double>(out.therapist_utterances);
    }
    return out;
}

namespace detail {

inline std::string join_side(const Transcript& t, Speaker side) {
    std::string text;
    for (const auto& u : t.utterances) {
        if (u.speaker != side) continue;
        if (!text.empty()) text += "\n";
        text += u.text;
    }
    return text;
}

}  // namespace detail

// Per-transcript feature vector, concatenated in a fixed order:
// therapist category rates (sorted category names), therapist punctuation
// rates, overall style matching, strategy rates. Client text enters only
// through the style-matching feature.
inline FeatureVector assemble_features(const Transcript& t, const Lexicon& lex,
                                       const std::vector<std::string>& lsm_categories) {
    const std::string therapist_text = detail::join_side(t, Speaker::Therapist);
    const std::string client_text = detail::join_side(t, Speaker::Client);
    const auto therapist_tokens = tokenize(therapist_text);
    const auto client_tokens = tokenize(client_text);

    const CategoryRates therapist_rates = category_rates(therapist_tokens, lex);
    const CategoryRates client_rates = category_rates(client_tokens, lex);
    const PunctuationRates punct = punctuation_rates(therapist_text);
    const LsmScore lsm = lsm_overall(therapist_rates, client_rates, lsm_categories);
    const StrategyFrequencies strategies = strategy_frequencies(t);

    FeatureVector v;
    for (const auto& [name, rate] : therapist_rates.rates) {
        v.names.push_back(name);
        v.values.push_back(rate);
    }
    v.names.push_back("apostrophes");
    v.values.push_back(punct.apostrophes_per_100_tokens);
    v.names.push_back("commas");
    v.values.push_back(punct.commas_per_100_tokens);
    v.names.push_back("lsm");
    v.values.push_back(lsm.overall);
    for (const auto kind : kAllStrategies) {
        v.names.push_back(to_string(kind));
        v.values.push_back(strategies.per_kind.at(kind).rate);
    }

    std::set<std::string> seen;
    for (const auto& name : v.names) {
        if (!seen.insert(name).second) {
            throw FeatureMismatch("lexicon category '" + name +
                                  "' collides with a built-in feature name");
        }
    }
    return v;
}

// Feature matrix over a whole corpus; row order follows corpus order.
inline FeatureMatrix assemble_matrix(const Corpus& corpus, const Lexicon& lex,
                                     const std::vector<std::string>& lsm_categories) {
    if (corpus.empty()) throw EmptyCorpus();
    FeatureMatrix m;
    for (const auto& t : corpus.transcripts()) {
        FeatureVector v = assemble_features(t, lex, lsm_categories);
        if (m.names.empty()) m.names = v.names;
        if (v.names != m.names) throw FeatureMismatch("inconsistent feature names across transcripts");
        m.row_ids.push_back(t.id);
        m.rows.push_back(std::move(v.values));
        m.labels.push_back(t.upq);
    }
    validate_matrix(m);
    return m;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    for (const char c : line) {
        if (c == ',') {
            fields.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    fields.push_back(field);
    return fields;
}

inline double parse_number(const std::string& s, std::size_t line) {
    if (s.empty()) throw NonNumeric(line, s);
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) throw NonNumeric(line, s);
    return v;
}

}  // namespace detail

// CSV with row id in the first column and a fixed number of numeric columns;
// columns are named emb_0..emb_{d-1}. A leading "id,..." header is accepted.
inline FeatureMatrix load_embedding_features(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open embedding file '" + path + "'");
    FeatureMatrix m;
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (line_no == 1 && !fields.empty() && (fields[0] == "id" || fields[0] == "ID")) {
            continue;  // header
        }
        if (fields.size() < 2) throw RaggedRows(line_no, 2, fields.size());
        if (width == 0) {
            width = fields.size() - 1;
            for (std::size_t j = 0; j < width; ++j) m.names.push_back("emb_" + std::to_string(j));
        } else if (fields.size() - 1 != width) {
            throw RaggedRows(line_no, width + 1, fields.size());
        }
        std::vector<double> row;
        row.reserve(width);
        for (std::size_t j = 1; j < fields.size(); ++j) {
            row.push_back(detail::parse_number(fields[j], line_no));
        }
        m.row_ids.push_back(fields[0]);
        m.rows.push_back(std::move(row));
    }
    if (m.rows.empty()) throw EmptyMatrix();
    validate_matrix(m);
    return m;
}

// Matrix CSV: header `id,<names...>[,upq]`, values at full precision so a
// round trip is bit-exact.
inline void save_matrix_csv(const FeatureMatrix& m, const std::string& path) {
    for (const auto& name : m.names) {
        if (name.find(',') != std::string::npos || name == "id" || name == "upq") {
            throw FeatureMismatch("feature name '" + name + "' cannot be written to CSV");
        }
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write feature file '" + path + "'");
    out << "id";
    for (const auto& name : m.names) out << "," << name;
    const bool with_labels = !m.labels.empty();
    if (with_labels) out << ",upq";
    out << "\n";
    for (std::size_t i = 0; i < m.rows.size(); ++i) {
        out << m.row_ids[i];
        for (const double v : m.rows[i]) out << "," << full17(v);
        if (with_labels) {
            out << ",";
            if (m.labels[i] == UpqLabel::High) out << "high";
            if (m.labels[i] == UpqLabel::Low) out << "low";
        }
        out << "\n";
    }
}

inline FeatureMatrix load_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open feature file '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw EmptyMatrix();
    auto header = detail::split_csv_line(line);
    if (header.empty() || header[0] != "id") {
        throw SchemaError(1, "id", "feature CSV must start with an 'id' column");
    }
    bool with_labels = !header.empty() && header.back() == "upq";
    FeatureMatrix m;
    const std::size_t first = 1;
    const std::size_t last = header.size() - (with_labels ? 1 : 0);
    for (std::size_t j = first; j < last; ++j) m.names.push_back(header[j]);

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != header.size()) throw RaggedRows(line_no, header.size(), fields.size());
        m.row_ids.push_back(fields[0]);
        std::vector<double> row;
        row.reserve(m.names.size());
        for (std::size_t j = first; j < last; ++j) {
            row.push_back(detail::parse_number(fields[j], line_no));
        }
        m.rows.push_back(std::move(row));
        if (with_labels) {
            const std::string& label = fields.back();
            if (label == "high") {
                m.labels.push_back(UpqLabel::High);
            } else if (label == "low") {
                m.labels.push_back(UpqLabel::Low);
            } else if (label.empty()) {
                m.labels.push_back(UpqLabel::Unlabeled);
            } else {
                throw SchemaError(line_no, "upq", "unknown label '" + label + "'");
            }
        }
    }
    if (m.rows.empty()) throw EmptyMatrix();
    validate_matrix(m);
    return m;
}

// Appends embedding columns to a matrix, joined by row id. Every row of the
// base matrix must have a matching embedding row.
inline FeatureMatrix join_by_id(const FeatureMatrix& base, const FeatureMatrix& extra) {
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < extra.row_ids.size(); ++i) index[extra.row_ids[i]] = i;
    FeatureMatrix out = base;
    for (const auto& name : extra.names) out.names.push_back(name);
    for (std::size_t i = 0; i < out.rows.size(); ++i) {
        const auto it = index.find(out.row_ids[i]);
        if (it == index.end()) {
            throw FeatureMismatch("no embedding row for id '" + out.row_ids[i] + "'");
        }
        const auto& row = extra.rows[it->second];
        out.rows[i].insert(out.rows[i].end(), row.begin(), row.end());
    }
    validate_matrix(out);
    return out;
}

struct SelectedFeatures {
    std::vector<std::string> kept;                 // subset of the original names, original order
    std::map<std::size_t, double> cv_score_by_size;  // feature count -> mean CV ROC-AUC
};

}  // namespace miq
