#ifndef MINIE_PARSER_HPP
#define MINIE_PARSER_HPP

#include <memory>

#include "minie/ast.hpp"
#include "minie/token.hpp"

namespace minie {

struct ParseResult {
    std::unique_ptr<ClassAst> ast;
    Diagnostics diagnostics;
    bool ok() const { return ast != nullptr && !has_errors(diagnostics); }
};

// Parses one class text. The token stream must come from tokenize().
ParseResult parse_class(const LexResult& lex, const std::string& filename = "");

// Convenience: tokenize + parse.
ParseResult parse_source(const std::string& source, const std::string& filename = "");

}  // namespace minie

#endif
