#ifndef MINIE_GRAMMAR_HPP
#define MINIE_GRAMMAR_HPP

#include <string>
#include <vector>

#include "minie/common.hpp"

namespace minie {

// One BNF-E production: Name ::= kind: rhs
// Kinds are exactly choice, concatenation, iteration — never mixed.
enum class ProductionKind { Choice, Concatenation, Iteration, Unknown };

struct GrammarSymbol {
    enum Kind { Construct, Terminal, Ellipsis, GroupOpen, GroupClose, Alt, OptOpen, OptClose };
    Kind kind;
    std::string text;
};

struct Production {
    std::string construct;
    ProductionKind kind = ProductionKind::Unknown;
    std::vector<GrammarSymbol> rhs;
    int line = 0;
};

struct GrammarDoc {
    std::vector<Production> productions;
    Diagnostics diagnostics;  // malformed lines
};

struct GrammarViolation {
    int line;
    std::string message;
};

GrammarDoc parse_grammar(const std::string& text, const std::string& filename = "");

// Empty iff every construct has exactly one production of a single,
// unmixed kind and every referenced construct is defined.
std::vector<GrammarViolation> lint_grammar(const GrammarDoc& doc);

}  // namespace minie

#endif
