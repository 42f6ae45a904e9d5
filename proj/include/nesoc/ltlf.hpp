#pragma once

#include <cctype>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "nesoc/error.hpp"
#include "nesoc/kv.hpp"

namespace nesoc::ltlf {

// Linear temporal logic over finite traces. Next is strong: X f is false
// at the last position. Eventually/Always quantify over the remaining
// suffix including the current position.

enum class Kind {
    True,
    False,
    Atom,
    Not,
    And,
    Or,
    Implies,
    Next,
    Eventually,
    Always,
};

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct Formula {
    Kind kind;
    std::string name;   // Atom only
    FormulaPtr lhs;     // unary operand or left operand
    FormulaPtr rhs;     // right operand of binary connectives
};

inline bool is_atom_name(std::string_view s) {
    if (s.empty() || !std::isalpha(static_cast<unsigned char>(s[0]))) return false;
    for (char c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
    return true;
}

inline FormulaPtr f_true() { return std::make_shared<Formula>(Formula{Kind::True, {}, {}, {}}); }
inline FormulaPtr f_false() { return std::make_shared<Formula>(Formula{Kind::False, {}, {}, {}}); }

inline FormulaPtr atom(std::string name) {
    if (!is_atom_name(name)) throw Error("invalid atom name: '" + name + "'");
    return std::make_shared<Formula>(Formula{Kind::Atom, std::move(name), {}, {}});
}

inline FormulaPtr f_not(FormulaPtr f) {
    return std::make_shared<Formula>(Formula{Kind::Not, {}, std::move(f), {}});
}
inline FormulaPtr f_and(FormulaPtr a, FormulaPtr b) {
    return std::make_shared<Formula>(Formula{Kind::And, {}, std::move(a), std::move(b)});
}
inline FormulaPtr f_or(FormulaPtr a, FormulaPtr b) {
    return std::make_shared<Formula>(Formula{Kind::Or, {}, std::move(a), std::move(b)});
}
inline FormulaPtr f_implies(FormulaPtr a, FormulaPtr b) {
    return std::make_shared<Formula>(Formula{Kind::Implies, {}, std::move(a), std::move(b)});
}
inline FormulaPtr next(FormulaPtr f) {
    return std::make_shared<Formula>(Formula{Kind::Next, {}, std::move(f), {}});
}
inline FormulaPtr eventually(FormulaPtr f) {
    return std::make_shared<Formula>(Formula{Kind::Eventually, {}, std::move(f), {}});
}
inline FormulaPtr always(FormulaPtr f) {
    return std::make_shared<Formula>(Formula{Kind::Always, {}, std::move(f), {}});
}

inline bool equal(const FormulaPtr& a, const FormulaPtr& b) {
    if (a == b) return true;
    if (!a || !b || a->kind != b->kind) return false;
    if (a->kind == Kind::Atom) return a->name == b->name;
    return equal(a->lhs, b->lhs) && equal(a->rhs, b->rhs);
}

// ---------------------------------------------------------------------------
// Traces
// ---------------------------------------------------------------------------

using State = std::set<std::string>;

/// Non-empty ordered sequence of states, each a finite set of atoms.
struct Trace {
    std::vector<State> states;
    std::size_t size() const { return states.size(); }
};

// ---------------------------------------------------------------------------
// Surface syntax
//
//   formula := or ('->' formula)?         right-associative
//   or      := and ('|' and)*
//   and     := unary ('&' unary)*
//   unary   := ('!' | 'X' | 'F' | 'G') unary | primary
//   primary := 'true' | 'false' | atom | '(' formula ')'
// ---------------------------------------------------------------------------

namespace detail {

struct Token {
    enum Type { Ident, KwTrue, KwFalse, Next, Eventually, Always, Bang, Amp, Pipe, Arrow, LParen, RParen, End };
    Type type;
    std::string text;
    std::size_t offset;
};

inline const char* token_desc(Token::Type t) {
    switch (t) {
        case Token::Ident: return "atom";
        case Token::KwTrue: return "'true'";
        case Token::KwFalse: return "'false'";
        case Token::Next: return "'X'";
        case Token::Eventually: return "'F'";
        case Token::Always: return "'G'";
        case Token::Bang: return "'!'";
        case Token::Amp: return "'&'";
        case Token::Pipe: return "'|'";
        case Token::Arrow: return "'->'";
        case Token::LParen: return "'('";
        case Token::RParen: return "')'";
        case Token::End: return "end of input";
    }
    return "?";
}

inline std::vector<Token> lex(std::string_view text) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < text.size()) {
        char c = text[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        std::size_t start = i;
        if (std::isalpha(static_cast<unsigned char>(c))) {
            std::size_t j = i;
            while (j < text.size() &&
                   (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_'))
                ++j;
            std::string word(text.substr(i, j - i));
            Token::Type type = Token::Ident;
            if (word == "true") type = Token::KwTrue;
            else if (word == "false") type = Token::KwFalse;
            else if (word == "X") type = Token::Next;
            else if (word == "F") type = Token::Eventually;
            else if (word == "G") type = Token::Always;
            out.push_back({type, std::move(word), start});
            i = j;
            continue;
        }
        switch (c) {
            case '!': out.push_back({Token::Bang, "!", start}); ++i; break;
            case '&': out.push_back({Token::Amp, "&", start}); ++i; break;
            case '|': out.push_back({Token::Pipe, "|", start}); ++i; break;
            case '(': out.push_back({Token::LParen, "(", start}); ++i; break;
            case ')': out.push_back({Token::RParen, ")", start}); ++i; break;
            case '-':
                if (i + 1 < text.size() && text[i + 1] == '>') {
                    out.push_back({Token::Arrow, "->", start});
                    i += 2;
                    break;
                }
                [[fallthrough]];
            default:
                throw ParseError("unexpected character '" + std::string(1, c) +
                                     "' at offset " + std::to_string(start),
                                 start);
        }
    }
    out.push_back({Token::End, "", text.size()});
    return out;
}

class Parser {
public:
    explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

    FormulaPtr run() {
        FormulaPtr f = implies();
        expect(Token::End);
        return f;
    }

private:
    const Token& peek() const { return tokens_[pos_]; }
    Token take() { return tokens_[pos_++]; }

    [[noreturn]] void fail(std::initializer_list<Token::Type> expected) {
        std::string msg = "syntax error at offset " + std::to_string(peek().offset) + ": expected ";
        bool first = true;
        for (auto t : expected) {
            if (!first) msg += " or ";
            msg += token_desc(t);
            first = false;
        }
        msg += ", got ";
        msg += peek().type == Token::End ? "end of input" : "'" + peek().text + "'";
        throw ParseError(msg, peek().offset);
    }

    void expect(Token::Type t) {
        if (peek().type != t) fail({t});
        take();
    }

    FormulaPtr implies() {
        FormulaPtr left = disjunction();
        if (peek().type == Token::Arrow) {
            take();
            return f_implies(std::move(left), implies());
        }
        return left;
    }

    FormulaPtr disjunction() {
        FormulaPtr f = conjunction();
        while (peek().type == Token::Pipe) {
            take();
            f = f_or(std::move(f), conjunction());
        }
        return f;
    }

    FormulaPtr conjunction() {
        FormulaPtr f = unary();
        while (peek().type == Token::Amp) {
            take();
            f = f_and(std::move(f), unary());
        }
        return f;
    }

    FormulaPtr unary() {
        switch (peek().type) {
            case Token::Bang: take(); return f_not(unary());
            case Token::Next: take(); return next(unary());
            case Token::Eventually: take(); return eventually(unary());
            case Token::Always: take(); return always(unary());
            default: return primary();
        }
    }

    FormulaPtr primary() {
        switch (peek().type) {
            case Token::KwTrue: take(); return f_true();
            case Token::KwFalse: take(); return f_false();
            case Token::Ident: return atom(take().text);
            case Token::LParen: {
                take();
                FormulaPtr f = implies();
                expect(Token::RParen);
                return f;
            }
            default:
                fail({Token::Ident, Token::KwTrue, Token::KwFalse, Token::LParen, Token::Bang,
                      Token::Next, Token::Eventually, Token::Always});
        }
    }

    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
};

// Precedence for the printer. Parenthesize a child whenever its level is
// below what the context requires; parse(format(f)) is then structural
// identity.
inline int precedence(Kind k) {
    switch (k) {
        case Kind::Implies: return 1;
        case Kind::Or: return 2;
        case Kind::And: return 3;
        case Kind::Not:
        case Kind::Next:
        case Kind::Eventually:
        case Kind::Always: return 4;
        default: return 5;
    }
}

inline void print(const FormulaPtr& f, int min_level, std::string& out) {
    bool parens = precedence(f->kind) < min_level;
    if (parens) out += '(';
    switch (f->kind) {
        case Kind::True: out += "true"; break;
        case Kind::False: out += "false"; break;
        case Kind::Atom: out += f->name; break;
        case Kind::Not:
            out += '!';
            print(f->lhs, 4, out);
            break;
        case Kind::Next:
            out += "X ";
            print(f->lhs, 4, out);
            break;
        case Kind::Eventually:
            out += "F ";
            print(f->lhs, 4, out);
            break;
        case Kind::Always:
            out += "G ";
            print(f->lhs, 4, out);
            break;
        case Kind::And:
            print(f->lhs, 3, out);
            out += " & ";
            print(f->rhs, 4, out);
            break;
        case Kind::Or:
            print(f->lhs, 2, out);
            out += " | ";
            print(f->rhs, 3, out);
            break;
        case Kind::Implies:
            print(f->lhs, 2, out);
            out += " -> ";
            print(f->rhs, 1, out);
            break;
    }
    if (parens) out += ')';
}

} // namespace detail

inline FormulaPtr parse(std::string_view text) {
    return detail::Parser(detail::lex(text)).run();
}

inline std::string format(const FormulaPtr& f) {
    std::string out;
    detail::print(f, 0, out);
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace detail {

inline bool eval_rec(const Formula* f, const Trace& trace, std::size_t i,
                     std::map<std::pair<const Formula*, std::size_t>, bool>& memo) {
    auto key = std::make_pair(f, i);
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    bool r = false;
    switch (f->kind) {
        case Kind::True: r = true; break;
        case Kind::False: r = false; break;
        case Kind::Atom: r = trace.states[i].count(f->name) > 0; break;
        case Kind::Not: r = !eval_rec(f->lhs.get(), trace, i, memo); break;
        case Kind::And:
            r = eval_rec(f->lhs.get(), trace, i, memo) && eval_rec(f->rhs.get(), trace, i, memo);
            break;
        case Kind::Or:
            r = eval_rec(f->lhs.get(), trace, i, memo) || eval_rec(f->rhs.get(), trace, i, memo);
            break;
        case Kind::Implies:
            r = !eval_rec(f->lhs.get(), trace, i, memo) || eval_rec(f->rhs.get(), trace, i, memo);
            break;
        case Kind::Next:
            r = i + 1 < trace.size() && eval_rec(f->lhs.get(), trace, i + 1, memo);
            break;
        case Kind::Eventually:
            for (std::size_t j = i; j < trace.size() && !r; ++j)
                r = eval_rec(f->lhs.get(), trace, j, memo);
            break;
        case Kind::Always:
            r = true;
            for (std::size_t j = i; j < trace.size() && r; ++j)
                r = eval_rec(f->lhs.get(), trace, j, memo);
            break;
    }
    memo.emplace(key, r);
    return r;
}

} // namespace detail

/// Finite-trace satisfaction of f at position i. Shared subformulas are
/// memoized per (node, position) so deep G/F nestings stay linear.
inline bool eval(const FormulaPtr& f, const Trace& trace, std::size_t i) {
    if (i >= trace.size())
        throw Error("eval: position " + std::to_string(i) + " out of range for trace of length " +
                    std::to_string(trace.size()));
    std::map<std::pair<const Formula*, std::size_t>, bool> memo;
    return detail::eval_rec(f.get(), trace, i, memo);
}

/// Eventually-chain over an ordered technique list:
///   [a]        ->  F a
///   [a, rest]  ->  F (a & X chain(rest))
/// True on a trace exactly when the techniques occur at strictly
/// increasing positions.
inline FormulaPtr chain_pattern(std::span<const std::string> techniques) {
    if (techniques.empty()) throw Error("chain_pattern: empty technique list");
    FormulaPtr f = atom(techniques.back());
    f = eventually(std::move(f));
    for (std::size_t i = techniques.size() - 1; i-- > 0;)
        f = eventually(f_and(atom(techniques[i]), next(std::move(f))));
    return f;
}

inline FormulaPtr chain_pattern(const std::vector<std::string>& techniques) {
    return chain_pattern(std::span<const std::string>(techniques));
}

// ---------------------------------------------------------------------------
// Pattern library: one `plan_id: <formula>` per line, '#' comments.
// ---------------------------------------------------------------------------

struct PlanPattern {
    std::string id;
    FormulaPtr formula;
};

inline std::vector<PlanPattern> parse_plan_library(std::istream& in) {
    std::vector<PlanPattern> plans;
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
            throw ParseError("line " + std::to_string(lineno) + ": expected 'plan_id: formula'",
                             lineno);
        std::string id = kv::trim(t.substr(0, colon));
        if (!is_atom_name(id))
            throw ParseError("line " + std::to_string(lineno) + ": invalid plan id '" + id + "'",
                             lineno);
        for (const auto& p : plans)
            if (p.id == id)
                throw ParseError("line " + std::to_string(lineno) + ": duplicate plan id '" + id + "'",
                                 lineno);
        try {
            plans.push_back({std::move(id), parse(t.substr(colon + 1))});
        } catch (const ParseError& e) {
            throw ParseError("line " + std::to_string(lineno) + ": " + e.what(), lineno);
        }
    }
    return plans;
}

inline std::vector<PlanPattern> load_plan_library(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open plan library: " + path);
    return parse_plan_library(in);
}

inline std::string format_plan(const PlanPattern& p) {
    return p.id + ": " + format(p.formula);
}

} // namespace nesoc::ltlf
