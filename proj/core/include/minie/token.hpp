#ifndef MINIE_TOKEN_HPP
#define MINIE_TOKEN_HPP

#include <string>
#include <vector>

#include "minie/common.hpp"

namespace minie {

enum class TokenKind {
    Keyword,
    Identifier,
    IntegerLit,
    RealLit,
    StringLit,
    CharLit,
    Operator,
    Punctuation,
    EndOfInput,
};

struct Token {
    TokenKind kind = TokenKind::EndOfInput;
    std::string text;  // for string literals: the decoded contents
    SourcePos pos;

    bool is(TokenKind k) const { return kind == k; }
    bool is_keyword(const char* kw) const { return kind == TokenKind::Keyword && text == kw; }
    bool is_op(const char* op) const { return kind == TokenKind::Operator && text == op; }
    bool is_punct(const char* p) const { return kind == TokenKind::Punctuation && text == p; }
};

struct CommentLine {
    int line = 0;
    std::string text;  // trimmed, without the leading dashes
};

struct LexResult {
    std::vector<Token> tokens;
    std::vector<CommentLine> comments;  // kept aside for header-comment extraction
    Diagnostics diagnostics;
    bool ok() const { return diagnostics.empty(); }
};

// Tokenizes UTF-8 source text. Unicode operator aliases (for-all, exists,
// and/or signs, divide, comparisons) come out as Operator tokens with their
// ASCII/keyword spelling preserved in `text` as the original glyph.
LexResult tokenize(const std::string& source, const std::string& filename = "");

bool is_minie_keyword(const std::string& word);

}  // namespace minie

#endif
