#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "miq/errors.hpp"
#include "miq/explain.hpp"

namespace miq {

enum class DirectiveAction { IncreaseUsage, DecreaseUsage };

inline const char* to_string(DirectiveAction a) {
    return a == DirectiveAction::IncreaseUsage ? "increase" : "decrease";
}

struct Directive {
    MiDimension dimension = MiDimension::Other;
    std::string category;
    DirectiveAction action = DirectiveAction::DecreaseUsage;
    std::vector<std::string> target_features;
    std::string text;
};

struct DirectiveMapEntry {
    std::string text;
    std::string action;  // "increase", "decrease" or empty (derive from relation)
};

// Keyed "<dimension>/<category>".
using DirectiveMap = std::map<std::string, DirectiveMapEntry>;

inline DirectiveMap load_directive_map(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open directive map '" + path + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(0, "<directive_map>", e.what());
    }
    DirectiveMap map;
    for (const auto& [key, entry] : doc.items()) {
        DirectiveMapEntry e;
        e.text = entry.value("text", std::string());
        e.action = entry.value("action", std::string());
        map[key] = e;
    }
    return map;
}

// One directive per report category; features sharing a category merge into
// a single directive carrying all of them. Ordering follows the strongest
// feature in each category, descending; ties fall back to category name.
// When the mapping does not pin an action, the relation of the category's
// most important feature decides (Negative -> decrease, otherwise increase).
inline std::vector<Directive> directives_from_report(const IntrinsicMetricReport& report,
                                                     const DirectiveMap& mapping) {
    struct Group {
        MiDimension dimension;
        std::string category;
        double max_importance = -1.0;
        FeatureSign lead_relation = FeatureSign::Mixed;
        std::vector<std::string> features;
    };
    std::map<std::string, Group> groups;
    std::vector<std::string> order;  // first-seen order of keys, for stability
    for (const auto& row : report.rows) {
        const std::string key = std::string(to_string(row.dimension)) + "/" + row.category;
        auto it = groups.find(key);
        if (it == groups.end()) {
            it = groups.emplace(key, Group{row.dimension, row.category, -1.0, FeatureSign::Mixed, {}})
                     .first;
            order.push_back(key);
        }
        it->second.features.push_back(row.feature);
        if (row.importance > it->second.max_importance) {
            it->second.max_importance = row.importance;
            it->second.lead_relation = row.relation;
        }
    }

    std::sort(order.begin(), order.end(), [&](const std::string& ka, const std::string& kb) {
        const Group& a = groups.at(ka);
        const Group& b = groups.at(kb);
        if (a.max_importance != b.max_importance) return a.max_importance > b.max_importance;
        return a.category < b.category;
    });

    std::vector<Directive> directives;
    for (const auto& key : order) {
        const Group& g = groups.at(key);
        const auto it = mapping.find(key);
        if (it == mapping.end()) throw UnmappedCategory(key);
        Directive d;
        d.dimension = g.dimension;
        d.category = g.category;
        d.target_features = g.features;
        d.text = it->second.text;
        if (it->second.action == "increase") {
            d.action = DirectiveAction::IncreaseUsage;
        } else if (it->second.action == "decrease") {
            d.action = DirectiveAction::DecreaseUsage;
        } else {
            d.action = g.lead_relation == FeatureSign::Negative ? DirectiveAction::DecreaseUsage
                                                                : DirectiveAction::IncreaseUsage;
        }
        directives.push_back(std::move(d));
    }
    return directives;
}

struct PromptTemplate {
    std::string base;
    std::string directive_section_marker;
    std::string composed;
};

inline constexpr const char* kDirectiveSectionMarker = "## Response protocol";

// Base prompt plus a fixed step-by-step scaffold and the numbered directive
// lines. Composing an already-composed prompt strips everything from the
// section marker onward first, so the operation is idempotent byte-for-byte.
inline PromptTemplate compose_prompt(const std::string& base,
                                     const std::vector<Directive>& directives) {
    std::string trimmed = base;
    const std::string marker_block = std::string("\n\n") + kDirectiveSectionMarker + "\n";
    const auto pos = trimmed.find(marker_block);
    if (pos != std::string::npos) trimmed.erase(pos);
    if (trimmed.empty() ||
        std::all_of(trimmed.begin(), trimmed.end(), [](unsigned char ch) { return ch <= ' '; })) {
        throw EmptyBase();
    }

    std::string composed = trimmed;
    composed += marker_block;
    composed +=
        "Before every reply, reason step by step:\n"
        "1. Assess the client's current state, concerns, and readiness for change.\n"
        "2. Choose the motivational-interviewing strategy that fits this moment.\n"
        "3. Apply the directives below when wording the reply.\n"
        "4. Respond with one short, natural therapist turn.\n";
    if (!directives.empty()) {
        composed += "\nDirectives:\n";
        std::size_t i = 1;
        for (const auto& d : directives) {
            composed += std::to_string(i++) + ". [" +
                        (d.action == DirectiveAction::IncreaseUsage ? "Increase" : "Decrease") +
                        " | " + d.category + "] " + d.text + "\n";
        }
    }

    PromptTemplate out;
    out.base = trimmed;
    out.directive_section_marker = kDirectiveSectionMarker;
    out.composed = std::move(composed);
    return out;
}

inline nlohmann::json directives_to_json(const std::vector<Directive>& directives) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& d : directives) {
        arr.push_back({{"dimension", to_string(d.dimension)},
                       {"category", d.category},
                       {"action", to_string(d.action)},
                       {"target_features", d.target_features},
                       {"text", d.text}});
    }
    return arr;
}

}  // namespace miq
