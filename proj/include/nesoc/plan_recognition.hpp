#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "nesoc/error.hpp"
#include "nesoc/kv.hpp"
#include "nesoc/ltlf.hpp"

namespace nesoc::plan {

// Postdiction over an observed alert trace: each alert position picks exactly
// one technique from its rule's candidate set (positions without a rule carry
// no technique), and a plan is plausible iff some assignment's induced
// technique trace satisfies the plan formula at position 0.

/// Exactly-one choice rule: an occurrence of `alert` is explained by exactly
/// one technique from `candidates` (kept sorted, duplicates removed).
struct TechniqueRule {
    std::string alert;
    std::vector<std::string> candidates;
};

using AlertTrace = std::vector<std::string>;

struct WitnessStep {
    std::size_t position;
    std::string alert;
    std::optional<std::string> technique;

    bool operator==(const WitnessStep& o) const {
        return position == o.position && alert == o.alert && technique == o.technique;
    }
};

/// One full assignment, one step per trace position.
using Witness = std::vector<WitnessStep>;

struct RecognitionResult {
    std::string plan_id;
    bool plausible = false;
    std::vector<Witness> witnesses;
    std::vector<std::string> warnings;
};

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

/// Rule file: `alert_name : tech1, tech2, ...` per line, '#' comments.
inline std::vector<TechniqueRule> parse_rule_file(std::istream& in) {
    std::vector<TechniqueRule> rules;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::string t = kv::trim(line);
        if (t.empty()) continue;
        auto colon = t.find(':');
        if (colon == std::string::npos)
            throw ParseError("line " + std::to_string(lineno) +
                                 ": expected 'alert : tech1, tech2, ...'",
                             lineno);
        TechniqueRule rule;
        rule.alert = kv::trim(t.substr(0, colon));
        if (!ltlf::is_atom_name(rule.alert))
            throw ParseError("line " + std::to_string(lineno) + ": invalid alert name '" +
                                 rule.alert + "'",
                             lineno);
        for (const auto& r : rules)
            if (r.alert == rule.alert)
                throw ParseError("line " + std::to_string(lineno) + ": duplicate rule for alert '" +
                                     rule.alert + "'",
                                 lineno);
        for (const std::string& c : kv::split_list(t.substr(colon + 1))) {
            if (!ltlf::is_atom_name(c))
                throw ParseError("line " + std::to_string(lineno) + ": invalid technique atom '" +
                                     c + "'",
                                 lineno);
            rule.candidates.push_back(c);
        }
        if (rule.candidates.empty())
            throw ParseError("line " + std::to_string(lineno) + ": rule for '" + rule.alert +
                                 "' has no candidates",
                             lineno);
        std::sort(rule.candidates.begin(), rule.candidates.end());
        rule.candidates.erase(std::unique(rule.candidates.begin(), rule.candidates.end()),
                              rule.candidates.end());
        rules.push_back(std::move(rule));
    }
    return rules;
}

inline std::vector<TechniqueRule> load_rule_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open rule file: " + path);
    return parse_rule_file(in);
}

/// Alert-trace file: one alert atom per line in temporal order, '#' comments.
inline AlertTrace parse_alert_trace(std::istream& in) {
    AlertTrace trace;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::string t = kv::trim(line);
        if (t.empty()) continue;
        if (!ltlf::is_atom_name(t))
            throw ParseError("line " + std::to_string(lineno) + ": invalid alert atom '" + t + "'",
                             lineno);
        trace.push_back(std::move(t));
    }
    return trace;
}

inline AlertTrace load_alert_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open alert trace: " + path);
    return parse_alert_trace(in);
}

// ---------------------------------------------------------------------------
// Candidate sets
// ---------------------------------------------------------------------------

/// Per-position technique options in lexicographic order. A rule-covered
/// position lists the rule's candidates; an uncovered position has the single
/// option "no technique" (nullopt).
inline std::vector<std::vector<std::optional<std::string>>> candidate_sets(
    const AlertTrace& trace, const std::vector<TechniqueRule>& rules) {
    std::map<std::string, const TechniqueRule*> by_alert;
    for (const auto& r : rules) {
        auto [it, inserted] = by_alert.emplace(r.alert, &r);
        if (!inserted) throw Error("two rules for the same alert '" + r.alert + "'");
    }
    std::vector<std::vector<std::optional<std::string>>> options;
    options.reserve(trace.size());
    for (const std::string& alert : trace) {
        std::vector<std::optional<std::string>> opts;
        auto it = by_alert.find(alert);
        if (it == by_alert.end()) {
            opts.push_back(std::nullopt);
        } else {
            for (const std::string& c : it->second->candidates) opts.emplace_back(c);
        }
        options.push_back(std::move(opts));
    }
    return options;
}

// ---------------------------------------------------------------------------
// Formula progression (search tactic; result semantics stay existential)
// ---------------------------------------------------------------------------

namespace detail {

using ltlf::Formula;
using ltlf::FormulaPtr;
using ltlf::Kind;

inline bool is_const(const FormulaPtr& f, Kind k) { return f->kind == k; }

inline FormulaPtr mk_not(FormulaPtr f) {
    if (f->kind == Kind::True) return ltlf::f_false();
    if (f->kind == Kind::False) return ltlf::f_true();
    if (f->kind == Kind::Not) return f->lhs;
    return ltlf::f_not(std::move(f));
}

inline FormulaPtr mk_and(FormulaPtr a, FormulaPtr b) {
    if (a->kind == Kind::False || b->kind == Kind::True) return a;
    if (b->kind == Kind::False || a->kind == Kind::True) return b;
    return ltlf::f_and(std::move(a), std::move(b));
}

inline FormulaPtr mk_or(FormulaPtr a, FormulaPtr b) {
    if (a->kind == Kind::True || b->kind == Kind::False) return a;
    if (b->kind == Kind::True || a->kind == Kind::False) return b;
    return ltlf::f_or(std::move(a), std::move(b));
}

inline FormulaPtr mk_implies(FormulaPtr a, FormulaPtr b) {
    if (a->kind == Kind::False || b->kind == Kind::True) return ltlf::f_true();
    if (a->kind == Kind::True) return b;
    if (b->kind == Kind::False) return mk_not(std::move(a));
    return ltlf::f_implies(std::move(a), std::move(b));
}

/// Residual obligation for the suffix after a non-final state s.
inline FormulaPtr progress(const FormulaPtr& f, const ltlf::State& s) {
    switch (f->kind) {
        case Kind::True:
        case Kind::False: return f;
        case Kind::Atom: return s.count(f->name) ? ltlf::f_true() : ltlf::f_false();
        case Kind::Not: return mk_not(progress(f->lhs, s));
        case Kind::And: return mk_and(progress(f->lhs, s), progress(f->rhs, s));
        case Kind::Or: return mk_or(progress(f->lhs, s), progress(f->rhs, s));
        case Kind::Implies: return mk_implies(progress(f->lhs, s), progress(f->rhs, s));
        case Kind::Next: return f->lhs;
        case Kind::Eventually: return mk_or(progress(f->lhs, s), f);
        case Kind::Always: return mk_and(progress(f->lhs, s), f);
    }
    throw Error("progress: unreachable");
}

/// Truth at the final state: X has no successor, F/G collapse to "now".
inline bool eval_final(const FormulaPtr& f, const ltlf::State& s) {
    switch (f->kind) {
        case Kind::True: return true;
        case Kind::False: return false;
        case Kind::Atom: return s.count(f->name) > 0;
        case Kind::Not: return !eval_final(f->lhs, s);
        case Kind::And: return eval_final(f->lhs, s) && eval_final(f->rhs, s);
        case Kind::Or: return eval_final(f->lhs, s) || eval_final(f->rhs, s);
        case Kind::Implies: return !eval_final(f->lhs, s) || eval_final(f->rhs, s);
        case Kind::Next: return false;
        case Kind::Eventually:
        case Kind::Always: return eval_final(f->lhs, s);
    }
    throw Error("eval_final: unreachable");
}

inline ltlf::State option_state(const std::optional<std::string>& technique) {
    ltlf::State s;
    if (technique) s.insert(*technique);
    return s;
}

inline void collect_atoms(const FormulaPtr& f, std::set<std::string>& out) {
    if (f->kind == Kind::Atom) {
        out.insert(f->name);
        return;
    }
    if (f->lhs) collect_atoms(f->lhs, out);
    if (f->rhs) collect_atoms(f->rhs, out);
}

struct Search {
    const AlertTrace& trace;
    const std::vector<std::vector<std::optional<std::string>>>& options;
    std::size_t max_witnesses;
    std::vector<std::optional<std::string>> chosen;
    std::vector<Witness>& out;

    bool full() const { return out.size() >= max_witnesses; }

    void emit() {
        Witness w;
        w.reserve(trace.size());
        for (std::size_t i = 0; i < trace.size(); ++i) w.push_back({i, trace[i], chosen[i]});
        out.push_back(std::move(w));
    }

    void run(std::size_t pos, const FormulaPtr& residual) {
        if (full() || residual->kind == Kind::False) return;
        bool last = pos + 1 == trace.size();
        for (const auto& opt : options[pos]) {
            if (full()) return;
            chosen[pos] = opt;
            ltlf::State s = option_state(opt);
            if (last) {
                if (eval_final(residual, s)) emit();
            } else {
                run(pos + 1, progress(residual, s));
            }
        }
    }
};

} // namespace detail

// ---------------------------------------------------------------------------
// Recognition
// ---------------------------------------------------------------------------

/// Backtracking search with progression pruning. Witnesses come out in
/// lexicographic (position, technique) order, capped at max_witnesses.
inline std::vector<RecognitionResult> recognize(const AlertTrace& trace,
                                                const std::vector<TechniqueRule>& rules,
                                                const std::vector<ltlf::PlanPattern>& plans,
                                                std::size_t max_witnesses) {
    if (trace.empty()) throw Error("recognize: empty trace");
    if (max_witnesses < 1) throw Error("recognize: max_witnesses must be >= 1");
    auto options = candidate_sets(trace, rules);
    std::set<std::string> known;
    for (const auto& r : rules) known.insert(r.candidates.begin(), r.candidates.end());

    std::vector<RecognitionResult> results;
    results.reserve(plans.size());
    for (const auto& plan : plans) {
        RecognitionResult res;
        res.plan_id = plan.id;
        std::set<std::string> atoms;
        detail::collect_atoms(plan.formula, atoms);
        for (const auto& a : atoms)
            if (!known.count(a))
                res.warnings.push_back("plan '" + plan.id + "': atom '" + a +
                                       "' is not a candidate of any rule");
        detail::Search search{trace, options, max_witnesses, {}, res.witnesses};
        search.chosen.resize(trace.size());
        search.run(0, plan.formula);
        res.plausible = !res.witnesses.empty();
        results.push_back(std::move(res));
    }
    return results;
}

struct BruteForceResult {
    bool plausible = false;
    std::vector<Witness> witnesses;
};

/// Independent oracle: full Cartesian enumeration of assignments, each
/// checked with the trace evaluator. Refuses products above 10^6.
inline BruteForceResult brute_force_recognize(const AlertTrace& trace,
                                              const std::vector<TechniqueRule>& rules,
                                              const ltlf::PlanPattern& plan) {
    if (trace.empty()) throw Error("brute_force_recognize: empty trace");
    auto options = candidate_sets(trace, rules);
    std::uint64_t product = 1;
    for (const auto& opts : options) {
        product *= opts.size();
        if (product > 1000000)
            throw Error("brute_force_recognize: enumeration bound exceeded (> 10^6 assignments)");
    }

    BruteForceResult res;
    std::vector<std::size_t> idx(trace.size(), 0);
    for (std::uint64_t step = 0; step < product; ++step) {
        ltlf::Trace induced;
        induced.states.reserve(trace.size());
        for (std::size_t i = 0; i < trace.size(); ++i)
            induced.states.push_back(detail::option_state(options[i][idx[i]]));
        if (ltlf::eval(plan.formula, induced, 0)) {
            Witness w;
            w.reserve(trace.size());
            for (std::size_t i = 0; i < trace.size(); ++i)
                w.push_back({i, trace[i], options[i][idx[i]]});
            res.witnesses.push_back(std::move(w));
        }
        // odometer: last position varies fastest, so assignments are visited
        // in lexicographic order
        for (std::size_t i = trace.size(); i-- > 0;) {
            if (++idx[i] < options[i].size()) break;
            idx[i] = 0;
        }
    }
    res.plausible = !res.witnesses.empty();
    return res;
}

} // namespace nesoc::plan
