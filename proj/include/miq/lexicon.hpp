#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "miq/errors.hpp"

namespace miq {

// The eight function-word categories the style-matching mean is taken over
// by default; "quant" is an accepted ninth when a lexicon provides it.
inline const std::vector<std::string>& default_lsm_categories() {
    static const std::vector<std::string> cats = {"prep",  "article", "auxverb", "adverb",
                                                  "conj",  "ppron",   "ipron",   "negate"};
    return cats;
}

namespace detail {

// Decodes one UTF-8 code point starting at i; advances i. Malformed bytes
// decode as U+FFFD and consume one byte.
inline char32_t decode_utf8(std::string_view s, std::size_t& i) {
    const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(s[k]); };
    const unsigned char b0 = byte(i);
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    int len = 0;
    char32_t cp = 0;
    if ((b0 & 0xe0) == 0xc0) {
        len = 2;
        cp = b0 & 0x1f;
    } else if ((b0 & 0xf0) == 0xe0) {
        len = 3;
        cp = b0 & 0x0f;
    } else if ((b0 & 0xf8) == 0xf0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        ++i;
        return 0xfffd;
    }
    if (i + static_cast<std::size_t>(len) > s.size()) {
        ++i;
        return 0xfffd;
    }
    for (int k = 1; k < len; ++k) {
        const unsigned char bk = byte(i + static_cast<std::size_t>(k));
        if ((bk & 0xc0) != 0x80) {
            ++i;
            return 0xfffd;
        }
        cp = (cp << 6) | (bk & 0x3f);
    }
    i += static_cast<std::size_t>(len);
    return cp;
}

inline void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xc0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xe0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    } else {
        out.push_back(static_cast<char>(0xf0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    }
}

inline bool is_apostrophe(char32_t cp) { return cp == U'\'' || cp == 0x2019; }

// Word characters: ASCII letters/digits plus non-ASCII code points outside
// the common punctuation blocks (general punctuation, latin-1 punctuation,
// CJK punctuation, fullwidth forms).
inline bool is_word_char(char32_t cp) {
    if (cp < 0x80) {
        return (cp >= U'a' && cp <= U'z') || (cp >= U'A' && cp <= U'Z') ||
               (cp >= U'0' && cp <= U'9');
    }
    if (cp >= 0xa0 && cp <= 0xbf) return false;   // latin-1 punctuation/symbols
    if (cp == 0xd7 || cp == 0xf7) return false;   // multiplication/division signs
    if (cp >= 0x2000 && cp <= 0x206f) return false;  // general punctuation (dashes, quotes)
    if (cp >= 0x3000 && cp <= 0x303f) return false;  // CJK punctuation
    if (cp >= 0xff00 && cp <= 0xff64) return false;  // fullwidth punctuation
    if (cp == 0xfffd) return false;
    return true;
}

inline char32_t to_lower(char32_t cp) {
    if (cp >= U'A' && cp <= U'Z') return cp + 32;
    if (cp >= 0xc0 && cp <= 0xde && cp != 0xd7) return cp + 32;  // latin-1 uppercase
    return cp;
}

}  // namespace detail

// Lowercased word tokens: letters/digits plus apostrophes that sit between
// word characters ("don't"). Curly apostrophes normalize to ASCII so lexicon
// patterns match either form. Everything else separates tokens.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    bool prev_was_word = false;

    std::size_t i = 0;
    while (i < text.size()) {
        const std::size_t at = i;
        const char32_t cp = detail::decode_utf8(text, i);
        if (detail::is_word_char(cp)) {
            detail::append_utf8(current, detail::to_lower(cp));
            prev_was_word = true;
            continue;
        }
        if (detail::is_apostrophe(cp) && prev_was_word) {
            // keep only if the next code point continues the word
            std::size_t peek = i;
            if (peek < text.size()) {
                const char32_t next = detail::decode_utf8(text, peek);
                if (detail::is_word_char(next)) {
                    current.push_back('\'');
                    continue;
                }
            }
        }
        if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
        prev_was_word = false;
        (void)at;
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

// A word-to-category dictionary. Patterns are exact words or prefixes
// (trailing '*'); matching is case-insensitive against tokenizer output,
// which is already lowercased.
class Lexicon {
public:
    struct CategoryPatterns {
        std::set<std::string> exact;
        std::vector<std::string> prefixes;  // stored without the '*'
    };

    Lexicon() = default;

    void add_pattern(const std::string& category, const std::string& pattern) {
        if (category.empty()) throw SchemaError(0, "category", "category name must be non-empty");
        if (pattern.empty()) throw SchemaError(0, category, "empty pattern");
        auto& entry = categories_[category];
        if (!pattern.empty() && pattern.back() == '*') {
            const std::string prefix = lower(pattern.substr(0, pattern.size() - 1));
            if (prefix.empty()) throw SchemaError(0, category, "bare '*' pattern");
            for (const auto& p : entry.prefixes) {
                if (p == prefix) throw SchemaError(0, category, "duplicate pattern '" + pattern + "'");
            }
            entry.prefixes.push_back(prefix);
        } else {
            if (!entry.exact.insert(lower(pattern)).second) {
                throw SchemaError(0, category, "duplicate pattern '" + pattern + "'");
            }
        }
    }

    static Lexicon from_json(const nlohmann::json& doc) {
        if (!doc.is_object()) throw SchemaError(0, "<root>", "lexicon file must be a JSON object");
        Lexicon lex;
        for (const auto& [name, patterns] : doc.items()) {
            if (!patterns.is_array()) throw SchemaError(0, name, "patterns must be an array");
            if (patterns.empty()) throw SchemaError(0, name, "category has no patterns");
            for (const auto& p : patterns) {
                if (!p.is_string()) throw SchemaError(0, name, "pattern must be a string");
                lex.add_pattern(name, p.get<std::string>());
            }
        }
        return lex;
    }

    static Lexicon from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open lexicon file '" + path + "'");
        nlohmann::json doc;
        try {
            in >> doc;
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError(0, "<lexicon>", e.what());
        }
        return from_json(doc);
    }

    bool has_category(const std::string& name) const { return categories_.count(name) != 0; }

    // Category names in deterministic (sorted) order.
    std::vector<std::string> category_names() const {
        std::vector<std::string> names;
        names.reserve(categories_.size());
        for (const auto& [name, _] : categories_) names.push_back(name);
        return names;
    }

    bool matches(const std::string& category, const std::string& token) const {
        const auto it = categories_.find(category);
        if (it == categories_.end()) return false;
        if (it->second.exact.count(token)) return true;
        for (const auto& prefix : it->second.prefixes) {
            if (token.size() >= prefix.size() && token.compare(0, prefix.size(), prefix) == 0) {
                return true;
            }
        }
        return false;
    }

    const std::map<std::string, CategoryPatterns>& categories() const { return categories_; }

private:
    static std::string lower(std::string s) {
        for (auto& c : s) {
            if (c >= 'A' && c <= 'Z') c = static_cast<char>(c + 32);
        }
        return s;
    }

    std::map<std::string, CategoryPatterns> categories_;
};

struct CategoryRates {
    std::map<std::string, double> rates;  // percent of tokens, [0, 100]
    std::size_t token_count = 0;
};

// Percent of tokens matching each category. A token may count toward several
// categories but at most once per category.
inline CategoryRates category_rates(const std::vector<std::string>& tokens, const Lexicon& lex) {
    CategoryRates out;
    out.token_count = tokens.size();
    for (const auto& name : lex.category_names()) {
        std::size_t matched = 0;
        for (const auto& token : tokens) {
            if (lex.matches(name, token)) ++matched;
        }
        out.rates[name] = tokens.empty()
                              ? 0.0
                              : 100.0 * static_cast<double>(matched) /
                                    static_cast<double>(tokens.size());
    }
    return out;
}

struct PunctuationRates {
    double apostrophes_per_100_tokens = 0.0;
    double commas_per_100_tokens = 0.0;
};

inline PunctuationRates punctuation_rates(std::string_view text) {
    std::size_t apostrophes = 0;
    std::size_t commas = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        const char32_t cp = detail::decode_utf8(text, i);
        if (detail::is_apostrophe(cp)) ++apostrophes;
        if (cp == U',') ++commas;
    }
    const std::size_t n_tokens = tokenize(text).size();
    PunctuationRates out;
    if (n_tokens > 0) {
        out.apostrophes_per_100_tokens =
            100.0 * static_cast<double>(apostrophes) / static_cast<double>(n_tokens);
        out.commas_per_100_tokens =
            100.0 * static_cast<double>(commas) / static_cast<double>(n_tokens);
    }
    return out;
}

// Per-category style matching: 1 - |r1 - r2| / (r1 + r2 + 0.0001).
// The smoothing constant keeps the (0, 0) case defined; the result is 1
// exactly when the rates agree.
inline double lsm_category(double r1, double r2) {
    if (r1 < 0.0) throw NegativeRate(r1);
    if (r2 < 0.0) throw NegativeRate(r2);
    const double diff = r1 >= r2 ? r1 - r2 : r2 - r1;
    return 1.0 - diff / (r1 + r2 + 0.0001);
}

struct LsmScore {
    std::map<std::string, double> per_category;
    double overall = 0.0;
};

// Mean per-category matching over the requested categories; both rate maps
// must cover all of them.
inline LsmScore lsm_overall(const CategoryRates& rates_therapist, const CategoryRates& rates_client,
                            const std::vector<std::string>& categories) {
    LsmScore score;
    double sum = 0.0;
    for (const auto& cat : categories) {
        const auto t = rates_therapist.rates.find(cat);
        if (t == rates_therapist.rates.end()) throw MissingCategory(cat);
        const auto c = rates_client.rates.find(cat);
        if (c == rates_client.rates.end()) throw MissingCategory(cat);
        const double s = lsm_category(t->second, c->second);
        score.per_category[cat] = s;
        sum += s;
    }
    score.overall = categories.empty() ? 0.0 : sum / static_cast<double>(categories.size());
    return score;
}

}  // namespace miq
