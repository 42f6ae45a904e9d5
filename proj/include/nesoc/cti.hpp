#pragma once

#include <cctype>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "nesoc/error.hpp"
#include "nesoc/kv.hpp"
#include "nesoc/ltlf.hpp"

namespace nesoc::cti {

// CTI report text -> technique chain -> eventually-chain pattern. Two
// interchangeable backends: a deterministic keyword table for offline and
// test use, and a remote completion endpoint speaking the PATTERN/SYMBOLS
// protocol.

/// A sentence no backend could map. Distinct from transport trouble.
class MappingError : public Error {
public:
    using Error::Error;
};

/// Remote endpoint unreachable or speaking garbage at the HTTP/JSON level.
class TransportError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Technique atoms
// ---------------------------------------------------------------------------

/// ATT&CK id to atom syntax: T1566 -> t1566, T1566.001 -> t1566_001.
inline std::string normalize_technique(std::string_view id) {
    std::string out;
    for (char c : id) {
        if (c == '.') out += '_';
        else out += char(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

inline bool is_technique_atom(std::string_view s) {
    if (s.size() < 2 || s[0] != 't') return false;
    std::size_t i = 1;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
    if (i == 1) return false;
    if (i == s.size()) return true;
    if (s[i] != '_' || i + 1 == s.size()) return false;
    for (++i; i < s.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Keyword backend
// ---------------------------------------------------------------------------

struct KeywordEntry {
    std::string phrase;     // lowercase
    std::string technique;  // atom syntax
};

/// Ordered table; the first phrase found in a sentence wins.
struct KeywordTable {
    std::vector<KeywordEntry> entries;
};

/// Table file: `phrase => technique` per line, '#' comments.
inline KeywordTable parse_keyword_table(std::istream& in) {
    KeywordTable table;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::string t = kv::trim(line);
        if (t.empty()) continue;
        auto arrow = t.find("=>");
        if (arrow == std::string::npos)
            throw ParseError("line " + std::to_string(lineno) + ": expected 'phrase => technique'",
                             lineno);
        KeywordEntry e;
        e.phrase = kv::to_lower(kv::trim(t.substr(0, arrow)));
        e.technique = normalize_technique(kv::trim(t.substr(arrow + 2)));
        if (e.phrase.empty())
            throw ParseError("line " + std::to_string(lineno) + ": empty phrase", lineno);
        if (!is_technique_atom(e.technique))
            throw ParseError("line " + std::to_string(lineno) + ": invalid technique atom '" +
                                 e.technique + "'",
                             lineno);
        table.entries.push_back(std::move(e));
    }
    return table;
}

inline KeywordTable load_keyword_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open keyword table: " + path);
    return parse_keyword_table(in);
}

// ---------------------------------------------------------------------------
// Sentence handling
// ---------------------------------------------------------------------------

/// Splits on sentence-final punctuation ('.', '!', '?', runs allowed)
/// followed by whitespace or end of text. Sentence order is temporal order.
/// Internal whitespace collapses to single spaces.
inline std::vector<std::string> split_sentences(const std::string& report) {
    std::vector<std::string> sentences;
    std::string current;
    auto emit = [&]() {
        std::string t = kv::trim(current);
        if (!t.empty()) sentences.push_back(std::move(t));
        current.clear();
    };
    for (std::size_t i = 0; i < report.size(); ++i) {
        char c = report[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!current.empty() && current.back() != ' ') current += ' ';
            continue;
        }
        current += c;
        if (c == '.' || c == '!' || c == '?') {
            std::size_t j = i;
            while (j + 1 < report.size() &&
                   (report[j + 1] == '.' || report[j + 1] == '!' || report[j + 1] == '?')) {
                ++j;
                current += report[j];
            }
            bool boundary = j + 1 >= report.size() ||
                            std::isspace(static_cast<unsigned char>(report[j + 1]));
            i = j;
            if (boundary) emit();
        }
    }
    emit();
    if (sentences.empty()) throw Error("empty report");
    return sentences;
}

/// First table entry whose phrase occurs in the lowercased sentence.
inline std::string map_sentence(const std::string& sentence, const KeywordTable& table) {
    if (table.entries.empty()) throw Error("empty keyword table");
    std::string lower = kv::to_lower(sentence);
    for (const auto& e : table.entries)
        if (lower.find(e.phrase) != std::string::npos) return e.technique;
    std::string tried;
    for (const auto& e : table.entries) {
        if (!tried.empty()) tried += ", ";
        tried += "'" + e.phrase + "'";
    }
    throw MappingError("unmapped sentence: \"" + sentence + "\" (tried phrases: " + tried + ")");
}

/// Deterministic offline extraction: one technique per sentence, then the
/// eventually-chain over the list.
inline ltlf::PlanPattern extract_plan(const std::string& report, const KeywordTable& table,
                                      const std::string& plan_id = "extracted") {
    std::vector<std::string> sentences = split_sentences(report);
    std::vector<std::string> techniques;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        try {
            techniques.push_back(map_sentence(sentences[i], table));
        } catch (const MappingError& e) {
            std::string partial;
            for (const auto& t : techniques) {
                if (!partial.empty()) partial += ", ";
                partial += t;
            }
            throw MappingError("sentence " + std::to_string(i + 1) + " of " +
                               std::to_string(sentences.size()) + " (mapped so far: [" + partial +
                               "]): " + e.what());
        }
    }
    return {plan_id, ltlf::chain_pattern(techniques)};
}

// ---------------------------------------------------------------------------
// Remote completion protocol
// ---------------------------------------------------------------------------

struct ExtractionRequest {
    std::string prompt;
};

struct ExtractionResponse {
    std::string pattern;
    std::vector<std::string> symbols;  // atom syntax, sentence order
};

/// Transport abstraction: send a prompt, receive completion text.
class CompletionBackend {
public:
    virtual ~CompletionBackend() = default;
    virtual std::string complete(const std::string& prompt) = 0;
};

inline const char* allowed_pattern_name() { return "ExistenceEventuallyOther"; }

/// Technique ids and display names offered to the completion model.
inline std::vector<std::pair<std::string, std::string>> default_allowed_symbols() {
    return {
        {"T1548", "Abuse Elevation Control Mechanism"},
        {"T1530", "Data from Cloud Storage"},
        {"T1566", "Phishing"},
        {"T1048", "Exfiltration Over Alternative Protocol"},
        {"T1059", "Command and Scripting Interpreter"},
        {"T1556", "Modify Authentication Process"},
        {"T1133", "External Remote Services"},
        {"T1552", "Unsecured Credentials"},
    };
}

/// Prompt layout: task line, allowed pattern, allowed symbols, a worked
/// example pair joined by the "This leads to:" connector, then the query.
/// Consecutive report sentences go out pairwise in this shape.
inline ExtractionRequest build_prompt(
    const std::string& first, const std::optional<std::string>& second,
    const std::vector<std::pair<std::string, std::string>>& allowed = default_allowed_symbols()) {
    std::ostringstream out;
    out << "Translate natural language sentences into patterns:\n";
    out << "ALLOWED_PATTERNS: " << allowed_pattern_name() << "\n";
    out << "ALLOWED_SYMBOLS:";
    for (std::size_t i = 0; i < allowed.size(); ++i)
        out << (i ? "," : "") << " " << allowed[i].first << " (" << allowed[i].second << ")";
    out << "\n\n";
    out << "NL: The operator signs in to the cluster dashboard through an exposed remote "
           "endpoint.\n";
    out << "This leads to: The operator reads stored access keys from the dashboard "
           "configuration.\n";
    out << "PATTERN: " << allowed_pattern_name() << "\n";
    out << "SYMBOLS: T1133, T1552\n\n";
    out << "NL: The staff member opens a link from a crafted email.\n";
    out << "PATTERN: " << allowed_pattern_name() << "\n";
    out << "SYMBOLS: T1566\n\n";
    out << "NL: " << first << "\n";
    if (second) out << "This leads to: " << *second << "\n";
    out << "PATTERN:";
    return {out.str()};
}

/// Parses PATTERN/SYMBOLS lines out of a completion. Invalid replies are
/// rejected, never repaired.
inline ExtractionResponse parse_extraction_reply(const std::string& text) {
    std::optional<std::string> pattern;
    std::optional<std::string> symbols_raw;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::string t = kv::trim(line);
        if (!pattern && t.rfind("PATTERN:", 0) == 0) pattern = kv::trim(t.substr(8));
        else if (!symbols_raw && t.rfind("SYMBOLS:", 0) == 0) symbols_raw = kv::trim(t.substr(8));
    }
    if (!pattern) throw Error("malformed reply: missing PATTERN line");
    if (!symbols_raw) throw Error("malformed reply: missing SYMBOLS line");
    if (*pattern != allowed_pattern_name())
        throw Error("disallowed pattern '" + *pattern + "'");
    ExtractionResponse resp;
    resp.pattern = *pattern;
    for (const std::string& s : kv::split_list(*symbols_raw)) {
        std::string atom = normalize_technique(s);
        if (!is_technique_atom(atom)) throw Error("non-technique symbol '" + s + "'");
        resp.symbols.push_back(atom);
    }
    if (resp.symbols.empty()) throw Error("malformed reply: empty SYMBOLS list");
    return resp;
}

inline ExtractionResponse remote_extract(const ExtractionRequest& request,
                                         CompletionBackend& backend) {
    return parse_extraction_reply(backend.complete(request.prompt));
}

/// Remote extraction over sentence pairs (s1,s2), (s2,s3), ... merged on
/// the shared sentence; pairwise disagreement is an error, not a guess.
inline ltlf::PlanPattern extract_plan_remote(
    const std::string& report, CompletionBackend& backend,
    const std::string& plan_id = "extracted",
    const std::vector<std::pair<std::string, std::string>>& allowed = default_allowed_symbols()) {
    std::vector<std::string> sentences = split_sentences(report);
    std::vector<std::string> techniques;
    if (sentences.size() == 1) {
        ExtractionResponse r = remote_extract(build_prompt(sentences[0], std::nullopt, allowed),
                                              backend);
        if (r.symbols.size() != 1)
            throw Error("expected 1 symbol for a single sentence, got " +
                        std::to_string(r.symbols.size()));
        techniques.push_back(r.symbols[0]);
    } else {
        std::vector<ExtractionResponse> pairs;
        for (std::size_t i = 0; i + 1 < sentences.size(); ++i) {
            ExtractionResponse r =
                remote_extract(build_prompt(sentences[i], sentences[i + 1], allowed), backend);
            if (r.symbols.size() != 2)
                throw Error("expected 2 symbols for a sentence pair, got " +
                            std::to_string(r.symbols.size()));
            pairs.push_back(std::move(r));
        }
        techniques.push_back(pairs[0].symbols[0]);
        for (std::size_t i = 1; i < pairs.size(); ++i) {
            if (pairs[i].symbols[0] != pairs[i - 1].symbols[1])
                throw Error("pairwise extraction conflict on sentence " + std::to_string(i + 1) +
                            ": '" + pairs[i - 1].symbols[1] + "' vs '" + pairs[i].symbols[0] +
                            "'");
            techniques.push_back(pairs[i].symbols[0]);
        }
        techniques.push_back(pairs.back().symbols[1]);
    }
    return {plan_id, ltlf::chain_pattern(techniques)};
}

} // namespace nesoc::cti
