#pragma once

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "miq/errors.hpp"
#include "miq/lexicon.hpp"
#include "miq/mathx.hpp"
#include "miq/rng.hpp"

namespace miq {

enum class Speaker { Therapist, Client };

enum class StrategyKind {
    Information,
    Advice,
    Negotiation,
    Options,
    SimpleReflection,
    ComplexReflection,
    OpenQuestion,
    ClosedQuestion,
};

inline constexpr std::array<StrategyKind, 8> kAllStrategies = {
    StrategyKind::Information,      StrategyKind::Advice,
    StrategyKind::Negotiation,      StrategyKind::Options,
    StrategyKind::SimpleReflection, StrategyKind::ComplexReflection,
    StrategyKind::OpenQuestion,     StrategyKind::ClosedQuestion,
};

inline const char* to_string(StrategyKind k) {
    switch (k) {
        case StrategyKind::Information: return "information";
        case StrategyKind::Advice: return "advice";
        case StrategyKind::Negotiation: return "negotiation";
        case StrategyKind::Options: return "options";
        case StrategyKind::SimpleReflection: return "simple_reflection";
        case StrategyKind::ComplexReflection: return "complex_reflection";
        case StrategyKind::OpenQuestion: return "open_question";
        case StrategyKind::ClosedQuestion: return "closed_question";
    }
    return "?";
}

inline std::optional<StrategyKind> strategy_from_string(const std::string& s) {
    for (const auto k : kAllStrategies) {
        if (s == to_string(k)) return k;
    }
    return std::nullopt;
}

enum class UpqLabel { High, Low, Unlabeled };

enum class Responder { Human, Model, ModelPrompted };

inline const char* to_string(Responder r) {
    switch (r) {
        case Responder::Human: return "human";
        case Responder::Model: return "model";
        case Responder::ModelPrompted: return "model_prompted";
    }
    return "?";
}

struct Utterance {
    Speaker speaker = Speaker::Therapist;
    std::string text;
    std::set<StrategyKind> strategies;  // therapist-only; empty for clients
};

struct Transcript {
    std::string id;
    Responder responder = Responder::Human;
    UpqLabel upq = UpqLabel::Unlabeled;
    std::vector<Utterance> utterances;

    std::size_t therapist_utterance_count() const {
        return static_cast<std::size_t>(std::count_if(
            utterances.begin(), utterances.end(),
            [](const Utterance& u) { return u.speaker == Speaker::Therapist; }));
    }
};

namespace detail {

inline bool all_whitespace(const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) {
        return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
    });
}

}  // namespace detail

// Throws SchemaError if the transcript violates a structural invariant.
// `line` is forwarded into error messages (0 for programmatic construction).
inline void validate_transcript(const Transcript& t, std::size_t line = 0) {
    if (t.id.empty()) throw SchemaError(line, "id", "transcript id must be non-empty");
    bool has_therapist = false;
    bool has_client = false;
    for (const auto& u : t.utterances) {
        if (u.text.empty() || detail::all_whitespace(u.text)) {
            throw SchemaError(line, "text", "utterance text must contain a non-whitespace character");
        }
        if (u.speaker == Speaker::Client && !u.strategies.empty()) {
            throw SchemaError(line, "strategies", "client utterances cannot carry strategy labels");
        }
        has_therapist = has_therapist || u.speaker == Speaker::Therapist;
        has_client = has_client || u.speaker == Speaker::Client;
    }
    if (t.utterances.size() < 2 || !has_therapist || !has_client) {
        throw SchemaError(line, "utterances",
                          "transcript needs at least one therapist and one client utterance");
    }
}

class Corpus {
public:
    Corpus() = default;

    explicit Corpus(std::vector<Transcript> transcripts) {
        for (auto& t : transcripts) add(std::move(t));
    }

    void add(Transcript t) {
        validate_transcript(t);
        if (!ids_.insert(t.id).second) throw DuplicateId(t.id);
        transcripts_.push_back(std::move(t));
    }

    const std::vector<Transcript>& transcripts() const { return transcripts_; }
    std::size_t size() const { return transcripts_.size(); }
    bool empty() const { return transcripts_.empty(); }

    const Transcript* find(const std::string& id) const {
        for (const auto& t : transcripts_) {
            if (t.id == id) return &t;
        }
        return nullptr;
    }

private:
    std::vector<Transcript> transcripts_;
    std::set<std::string> ids_;
};

namespace detail {

inline nlohmann::json transcript_to_json(const Transcript& t) {
    nlohmann::json utterances = nlohmann::json::array();
    for (const auto& u : t.utterances) {
        nlohmann::json strategies = nlohmann::json::array();
        for (const auto s : u.strategies) strategies.push_back(to_string(s));
        utterances.push_back({{"speaker", u.speaker == Speaker::Therapist ? "therapist" : "client"},
                              {"text", u.text},
                              {"strategies", strategies}});
    }
    nlohmann::json doc = {{"id", t.id},
                          {"responder", to_string(t.responder)},
                          {"utterances", utterances}};
    if (t.upq == UpqLabel::Unlabeled) {
        doc["upq"] = nullptr;
    } else {
        doc["upq"] = t.upq == UpqLabel::High ? "high" : "low";
    }
    return doc;
}

inline Transcript transcript_from_json(const nlohmann::json& doc, std::size_t line,
                                       bool schema_strict) {
    if (!doc.is_object()) throw SchemaError(line, "<root>", "each line must be a JSON object");
    Transcript t;
    if (!doc.contains("id") || !doc["id"].is_string()) {
        throw SchemaError(line, "id", "missing or non-string id");
    }
    t.id = doc["id"].get<std::string>();

    const std::string responder = doc.value("responder", std::string("human"));
    if (responder == "human") {
        t.responder = Responder::Human;
    } else if (responder == "model") {
        t.responder = Responder::Model;
    } else if (responder == "model_prompted") {
        t.responder = Responder::ModelPrompted;
    } else {
        throw SchemaError(line, "responder", "unknown responder '" + responder + "'");
    }

    if (doc.contains("upq") && !doc["upq"].is_null()) {
        if (!doc["upq"].is_string()) throw SchemaError(line, "upq", "upq must be \"high\", \"low\" or null");
        const std::string upq = doc["upq"].get<std::string>();
        if (upq == "high") {
            t.upq = UpqLabel::High;
        } else if (upq == "low") {
            t.upq = UpqLabel::Low;
        } else {
            throw SchemaError(line, "upq", "unknown upq label '" + upq + "'");
        }
    }

    if (!doc.contains("utterances") || !doc["utterances"].is_array()) {
        throw SchemaError(line, "utterances", "missing utterances array");
    }
    if (schema_strict) {
        static const std::set<std::string> known = {"id", "responder", "upq", "utterances"};
        for (const auto& [key, _] : doc.items()) {
            if (!known.count(key)) throw SchemaError(line, key, "unknown field");
        }
    }
    for (const auto& u_doc : doc["utterances"]) {
        Utterance u;
        const std::string speaker = u_doc.value("speaker", std::string());
        if (speaker == "therapist") {
            u.speaker = Speaker::Therapist;
        } else if (speaker == "client") {
            u.speaker = Speaker::Client;
        } else {
            throw SchemaError(line, "speaker", "speaker must be \"therapist\" or \"client\"");
        }
        if (!u_doc.contains("text") || !u_doc["text"].is_string()) {
            throw SchemaError(line, "text", "missing utterance text");
        }
        u.text = u_doc["text"].get<std::string>();
        if (u_doc.contains("strategies")) {
            if (!u_doc["strategies"].is_array()) {
                throw SchemaError(line, "strategies", "strategies must be an array");
            }
            for (const auto& s : u_doc["strategies"]) {
                if (!s.is_string()) throw SchemaError(line, "strategies", "strategy must be a string");
                const auto kind = strategy_from_string(s.get<std::string>());
                if (!kind) {
                    throw SchemaError(line, "strategies",
                                      "unknown strategy label '" + s.get<std::string>() + "'");
                }
                u.strategies.insert(*kind);
            }
        }
        t.utterances.push_back(std::move(u));
    }
    validate_transcript(t, line);
    return t;
}

}  // namespace detail

// Reads a UTF-8 JSONL corpus, one transcript object per line. Every
// structural invariant is checked; failures carry the 1-based line number.
inline Corpus load_corpus(const std::string& path, bool schema_strict = false) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus file '" + path + "'");
    Corpus corpus;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || detail::all_whitespace(line)) continue;
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError(line_no, "<json>", e.what());
        }
        corpus.add(detail::transcript_from_json(doc, line_no, schema_strict));
    }
    return corpus;
}

inline void save_corpus(const Corpus& corpus, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write corpus file '" + path + "'");
    for (const auto& t : corpus.transcripts()) {
        out << detail::transcript_to_json(t).dump() << "\n";
    }
}

inline std::string corpus_to_jsonl(const Corpus& corpus) {
    std::string out;
    for (const auto& t : corpus.transcripts()) {
        out += detail::transcript_to_json(t).dump();
        out += "\n";
    }
    return out;
}

struct MetricSummary {
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
    double std = 0.0;  // population convention
};

struct CorpusStats {
    std::size_t transcript_count = 0;
    MetricSummary rounds;               // utterances per transcript
    MetricSummary length_overall;       // tokens per utterance
    MetricSummary length_therapist;
    MetricSummary length_client;
};

namespace detail {

inline MetricSummary summarize(const std::vector<double>& values) {
    MetricSummary s;
    if (values.empty()) return s;
    s.min = *std::min_element(values.begin(), values.end());
    s.max = *std::max_element(values.begin(), values.end());
    s.mean = mathx::mean(values.data(), values.size());
    s.std = mathx::population_std(values.data(), values.size(), s.mean);
    return s;
}

}  // namespace detail

// Descriptive statistics over the whole corpus. Utterance length is counted
// in tokenizer tokens so it stays consistent with feature rates.
inline CorpusStats corpus_stats(const Corpus& corpus) {
    if (corpus.empty()) throw EmptyCorpus();
    std::vector<double> rounds;
    std::vector<double> len_overall, len_therapist, len_client;
    for (const auto& t : corpus.transcripts()) {
        rounds.push_back(static_cast<double>(t.utterances.size()));
        for (const auto& u : t.utterances) {
            const double n = static_cast<double>(tokenize(u.text).size());
            len_overall.push_back(n);
            (u.speaker == Speaker::Therapist ? len_therapist : len_client).push_back(n);
        }
    }
    CorpusStats stats;
    stats.transcript_count = corpus.size();
    stats.rounds = detail::summarize(rounds);
    stats.length_overall = detail::summarize(len_overall);
    stats.length_therapist = detail::summarize(len_therapist);
    stats.length_client = detail::summarize(len_client);
    return stats;
}

struct FoldAssignment {
    int k = 0;
    std::map<std::string, int> assignment;  // transcript id -> fold in [0, k)

    std::vector<std::string> ids_in_fold(int fold) const {
        std::vector<std::string> out;
        for (const auto& [id, f] : assignment) {
            if (f == fold) out.push_back(id);
        }
        return out;
    }
};

// Deterministic stratified k-fold split over the labeled transcripts.
// Each class is shuffled with its own derived stream and dealt round-robin,
// so per-fold class counts differ by at most one.
inline FoldAssignment stratified_folds(const Corpus& corpus, int k, std::uint64_t seed) {
    if (k < 2) throw InsufficientData("folds", 2, static_cast<std::size_t>(k));
    std::vector<std::string> high_ids, low_ids;
    for (const auto& t : corpus.transcripts()) {
        if (t.upq == UpqLabel::High) high_ids.push_back(t.id);
        if (t.upq == UpqLabel::Low) low_ids.push_back(t.id);
    }
    if (high_ids.size() < static_cast<std::size_t>(k)) {
        throw InsufficientData("High", static_cast<std::size_t>(k), high_ids.size());
    }
    if (low_ids.size() < static_cast<std::size_t>(k)) {
        throw InsufficientData("Low", static_cast<std::size_t>(k), low_ids.size());
    }

    FoldAssignment folds;
    folds.k = k;
    std::uint64_t stream = 0;
    for (auto* ids : {&high_ids, &low_ids}) {
        std::sort(ids->begin(), ids->end());  // independent of corpus file order
        Rng rng = Rng::derive(seed, stream++);
        rng.shuffle(*ids);
        for (std::size_t i = 0; i < ids->size(); ++i) {
            folds.assignment[(*ids)[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
        }
    }
    return folds;
}

}  // namespace miq
