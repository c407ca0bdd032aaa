#include "minie/grammar.hpp"

#include <cctype>
#include <map>
#include <set>
#include <sstream>

namespace minie {

namespace {

bool is_all_caps(const std::string& s) {
    bool has_alpha = false;
    for (char c : s) {
        if (std::islower(static_cast<unsigned char>(c))) return false;
        if (std::isupper(static_cast<unsigned char>(c))) has_alpha = true;
    }
    return has_alpha;
}

// Lexical terminals are ALL_CAPS names (IDENTIFIER, INTEGER_LITERAL, ...);
// CamelCase names are constructs and need a defining production.
bool is_construct_name(const std::string& s) { return !is_all_caps(s); }

std::vector<GrammarSymbol> split_rhs(const std::string& rhs, bool& bad, std::string& bad_text) {
    std::vector<GrammarSymbol> out;
    size_t i = 0;
    bad = false;
    while (i < rhs.size()) {
        char c = rhs[i];
        if (c == ' ' || c == '\t') {
            ++i;
            continue;
        }
        if (c == '"') {
            size_t e = rhs.find('"', i + 1);
            if (e == std::string::npos) {
                bad = true;
                bad_text = "unterminated terminal string";
                return out;
            }
            out.push_back({GrammarSymbol::Terminal, rhs.substr(i + 1, e - i - 1)});
            i = e + 1;
            continue;
        }
        if (rhs.compare(i, 3, "...") == 0) {
            out.push_back({GrammarSymbol::Ellipsis, "..."});
            i += 3;
            continue;
        }
        if (c == '(') { out.push_back({GrammarSymbol::GroupOpen, "("}); ++i; continue; }
        if (c == ')') { out.push_back({GrammarSymbol::GroupClose, ")"}); ++i; continue; }
        if (c == '[') { out.push_back({GrammarSymbol::OptOpen, "["}); ++i; continue; }
        if (c == ']') { out.push_back({GrammarSymbol::OptClose, "]"}); ++i; continue; }
        if (c == '|') { out.push_back({GrammarSymbol::Alt, "|"}); ++i; continue; }
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') {
            size_t s = i;
            while (i < rhs.size() &&
                   (std::isalnum(static_cast<unsigned char>(rhs[i])) || rhs[i] == '_'))
                ++i;
            std::string name = rhs.substr(s, i - s);
            out.push_back({is_construct_name(name) ? GrammarSymbol::Construct
                                                   : GrammarSymbol::Terminal,
                           name});
            continue;
        }
        bad = true;
        bad_text = std::string("unexpected character '") + c + "' in right-hand side";
        return out;
    }
    return out;
}

}  // namespace

GrammarDoc parse_grammar(const std::string& text, const std::string& filename) {
    GrammarDoc doc;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        if (line.compare(first, 2, "--") == 0) continue;
        size_t sep = line.find("::=");
        if (sep == std::string::npos) {
            doc.diagnostics.push_back({"GRAM", "missing '::=' in production",
                                       {filename, lineno, 1}, Severity::Error});
            continue;
        }
        Production p;
        p.line = lineno;
        {
            std::string name = line.substr(first, sep - first);
            size_t e = name.find_last_not_of(" \t");
            p.construct = name.substr(0, e == std::string::npos ? 0 : e + 1);
        }
        std::string rest = line.substr(sep + 3);
        size_t colon = rest.find(':');
        if (colon == std::string::npos) {
            doc.diagnostics.push_back({"GRAM", "missing production kind before ':'",
                                       {filename, lineno, 1}, Severity::Error});
            continue;
        }
        std::string kind = rest.substr(0, colon);
        {
            size_t b = kind.find_first_not_of(" \t");
            size_t e = kind.find_last_not_of(" \t");
            kind = b == std::string::npos ? "" : kind.substr(b, e - b + 1);
        }
        if (kind == "choice") p.kind = ProductionKind::Choice;
        else if (kind == "concatenation") p.kind = ProductionKind::Concatenation;
        else if (kind == "iteration") p.kind = ProductionKind::Iteration;
        else p.kind = ProductionKind::Unknown;
        bool bad = false;
        std::string why;
        p.rhs = split_rhs(rest.substr(colon + 1), bad, why);
        if (bad) {
            doc.diagnostics.push_back({"GRAM", why, {filename, lineno, 1}, Severity::Error});
            continue;
        }
        doc.productions.push_back(std::move(p));
    }
    return doc;
}

namespace {

// A choice alternative must be a single symbol; any parenthesized group or
// multi-symbol alternative smuggles a concatenation into the choice.
void lint_choice(const Production& p, std::vector<GrammarViolation>& out) {
    int symbols_in_alt = 0;
    int depth = 0;
    bool grouped = false;
    auto flush = [&](bool at_end) {
        if (symbols_in_alt == 0 && !grouped) {
            out.push_back({p.line, "empty alternative in choice production '" + p.construct + "'"});
        } else if (symbols_in_alt > 1 || grouped) {
            out.push_back({p.line, "mixed choice/concatenation in production '" + p.construct +
                                       "': each alternative must be a single construct"});
        }
        (void)at_end;
        symbols_in_alt = 0;
        grouped = false;
    };
    for (const auto& s : p.rhs) {
        switch (s.kind) {
            case GrammarSymbol::Alt:
                if (depth == 0) flush(false);
                break;
            case GrammarSymbol::GroupOpen:
            case GrammarSymbol::OptOpen:
                grouped = true;
                ++depth;
                break;
            case GrammarSymbol::GroupClose:
            case GrammarSymbol::OptClose:
                --depth;
                break;
            case GrammarSymbol::Ellipsis:
                out.push_back({p.line, "iteration marker inside choice production '" +
                                           p.construct + "'"});
                break;
            default:
                if (depth == 0) ++symbols_in_alt;
                break;
        }
    }
    flush(true);
}

void lint_concatenation(const Production& p, std::vector<GrammarViolation>& out) {
    int depth = 0;
    for (const auto& s : p.rhs) {
        switch (s.kind) {
            case GrammarSymbol::Alt:
                out.push_back({p.line, "mixed choice/concatenation in production '" + p.construct +
                                           "': alternatives belong in a choice production"});
                return;
            case GrammarSymbol::Ellipsis:
                out.push_back({p.line, "iteration marker inside concatenation production '" +
                                           p.construct + "'"});
                return;
            case GrammarSymbol::OptOpen: ++depth; break;
            case GrammarSymbol::OptClose: --depth; break;
            case GrammarSymbol::GroupOpen:
            case GrammarSymbol::GroupClose:
                out.push_back({p.line, "parenthesized group in concatenation production '" +
                                           p.construct + "' (flatten it)"});
                return;
            default: break;
        }
    }
    if (depth != 0)
        out.push_back({p.line, "unbalanced optional brackets in production '" + p.construct + "'"});
    if (p.rhs.empty())
        out.push_back({p.line, "empty concatenation production '" + p.construct + "'"});
}

// Iteration: one repeated construct, an optional terminal separator, "...".
void lint_iteration(const Production& p, std::vector<GrammarViolation>& out) {
    size_t n = p.rhs.size();
    bool ok = (n == 2 && p.rhs[0].kind != GrammarSymbol::Alt &&
               p.rhs[1].kind == GrammarSymbol::Ellipsis) ||
              (n == 3 && p.rhs[1].kind == GrammarSymbol::Terminal &&
               p.rhs[2].kind == GrammarSymbol::Ellipsis);
    if (ok && (p.rhs[0].kind == GrammarSymbol::Construct || p.rhs[0].kind == GrammarSymbol::Terminal))
        return;
    out.push_back({p.line, "iteration production '" + p.construct +
                               "' must be: Item [separator] ..."});
}

}  // namespace

std::vector<GrammarViolation> lint_grammar(const GrammarDoc& doc) {
    std::vector<GrammarViolation> out;
    std::map<std::string, int> defs;
    for (const auto& p : doc.productions) ++defs[p.construct];
    std::set<std::string> reported_dup;
    for (const auto& p : doc.productions) {
        if (defs[p.construct] > 1 && reported_dup.insert(p.construct).second)
            out.push_back({p.line, "construct '" + p.construct + "' has " +
                                       std::to_string(defs[p.construct]) +
                                       " productions; BNF-E allows exactly one"});
        switch (p.kind) {
            case ProductionKind::Choice: lint_choice(p, out); break;
            case ProductionKind::Concatenation: lint_concatenation(p, out); break;
            case ProductionKind::Iteration: lint_iteration(p, out); break;
            case ProductionKind::Unknown:
                out.push_back({p.line, "production '" + p.construct +
                                           "' has an unknown kind (choice, concatenation or "
                                           "iteration)"});
                break;
        }
    }
    // every referenced construct must itself be defined
    for (const auto& p : doc.productions) {
        for (const auto& s : p.rhs) {
            if (s.kind == GrammarSymbol::Construct && !defs.count(s.text))
                out.push_back({p.line, "construct '" + s.text + "' referenced in '" + p.construct +
                                           "' has no production"});
        }
    }
    return out;
}

}  // namespace minie
