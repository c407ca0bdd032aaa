#include "minie/token.hpp"

#include <array>
#include <cctype>
#include <set>

namespace minie {

namespace {

const std::set<std::string> kKeywords = {
    "class",     "inherit",  "feature",  "create",   "convert",  "invariant", "end",
    "deferred",  "frozen",   "expanded", "once",     "do",       "require",   "ensure",
    "else",      "then",     "elseif",   "rescue",   "local",    "if",        "inspect",
    "when",      "from",     "until",    "loop",     "variant",  "across",    "as",
    "all",       "some",     "and",      "or",       "not",      "xor",       "implies",
    "attached",  "detachable", "separate", "agent",  "old",      "check",     "external",
    "alias",     "assign",   "rename",   "redefine", "True",     "False",     "Void",
    "Current",   "Result",   "Retry",    "like",     "debug",
};

struct Utf8Char {
    uint32_t cp = 0;
    int len = 1;  // bytes consumed
};

Utf8Char decode_utf8(const std::string& s, size_t i) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    Utf8Char r;
    if (c < 0x80) {
        r.cp = c;
        r.len = 1;
    } else if ((c >> 5) == 0x6 && i + 1 < s.size()) {
        r.cp = ((c & 0x1F) << 6) | (static_cast<unsigned char>(s[i + 1]) & 0x3F);
        r.len = 2;
    } else if ((c >> 4) == 0xE && i + 2 < s.size()) {
        r.cp = ((c & 0x0F) << 12) | ((static_cast<unsigned char>(s[i + 1]) & 0x3F) << 6) |
               (static_cast<unsigned char>(s[i + 2]) & 0x3F);
        r.len = 3;
    } else {
        r.cp = 0xFFFD;
        r.len = 1;
    }
    return r;
}

// Unicode operator aliases accepted at the lexical level.
bool is_alias_codepoint(uint32_t cp) {
    switch (cp) {
        case 0x2200:  // for all
        case 0x2203:  // exists
        case 0x2227:  // logical and
        case 0x2228:  // logical or
        case 0x00F7:  // division sign
        case 0x2264:  // <=
        case 0x2265:  // >=
        case 0x2260:  // /=
        case 0x00A6:  // broken bar, quantifier body separator
            return true;
        default:
            return false;
    }
}

struct Lexer {
    const std::string& src;
    std::string file;
    size_t i = 0;
    int line = 1, col = 1;
    LexResult out;

    explicit Lexer(const std::string& s, std::string f) : src(s), file(std::move(f)) {}

    SourcePos here() const { return SourcePos{file, line, col}; }

    char peek(size_t off = 0) const { return i + off < src.size() ? src[i + off] : '\0'; }

    void advance(int n = 1) {
        for (int k = 0; k < n && i < src.size(); ++k) {
            if (src[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
            ++i;
        }
    }

    void error(const std::string& msg, SourcePos pos) {
        out.diagnostics.push_back({"LEXI", msg, pos, Severity::Error});
    }

    void push(TokenKind k, std::string text, SourcePos pos) {
        out.tokens.push_back(Token{k, std::move(text), pos});
    }

    void run() {
        while (i < src.size()) {
            char c = peek();
            if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                advance();
                continue;
            }
            if (c == '-' && peek(1) == '-') {  // comment to end of line
                int cl = line;
                advance(2);
                std::string text;
                while (i < src.size() && peek() != '\n') {
                    text += peek();
                    advance();
                }
                size_t b = text.find_first_not_of(" \t");
                size_t e = text.find_last_not_of(" \t\r");
                out.comments.push_back(
                    {cl, b == std::string::npos ? "" : text.substr(b, e - b + 1)});
                continue;
            }
            SourcePos pos = here();
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                std::string word;
                while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_') {
                    word += peek();
                    advance();
                }
                push(kKeywords.count(word) ? TokenKind::Keyword : TokenKind::Identifier, word, pos);
                continue;
            }
            if (std::isdigit(static_cast<unsigned char>(c))) {
                lex_number(pos);
                continue;
            }
            if (c == '"') {
                lex_string(pos);
                continue;
            }
            if (c == '\'') {
                lex_char(pos);
                continue;
            }
            if (static_cast<unsigned char>(c) >= 0x80) {
                Utf8Char u = decode_utf8(src, i);
                std::string glyph = src.substr(i, u.len);
                if (is_alias_codepoint(u.cp)) {
                    push(TokenKind::Operator, glyph, pos);
                } else {
                    error("illegal character '" + glyph + "'", pos);
                }
                // advance over the raw bytes; column counts one per code point
                for (int k = 0; k < u.len; ++k) ++i;
                ++col;
                continue;
            }
            lex_symbol(pos);
        }
        push(TokenKind::EndOfInput, "", here());
    }

    void lex_number(SourcePos pos) {
        std::string text;
        while (std::isdigit(static_cast<unsigned char>(peek())) || peek() == '_') {
            if (peek() != '_') text += peek();
            advance();
        }
        if (peek() == '.' && std::isdigit(static_cast<unsigned char>(peek(1)))) {
            text += '.';
            advance();
            while (std::isdigit(static_cast<unsigned char>(peek()))) {
                text += peek();
                advance();
            }
            if (peek() == 'e' || peek() == 'E') {
                text += 'e';
                advance();
                if (peek() == '+' || peek() == '-') {
                    text += peek();
                    advance();
                }
                while (std::isdigit(static_cast<unsigned char>(peek()))) {
                    text += peek();
                    advance();
                }
            }
            push(TokenKind::RealLit, text, pos);
        } else {
            push(TokenKind::IntegerLit, text, pos);
        }
    }

    // Eiffel-style % escapes inside manifest strings.
    bool decode_escape(char e, char& outc, SourcePos pos) {
        switch (e) {
            case 'N': outc = '\n'; return true;
            case 'T': outc = '\t'; return true;
            case 'R': outc = '\r'; return true;
            case '%': outc = '%'; return true;
            case '"': outc = '"'; return true;
            case '\'': outc = '\''; return true;
            default:
                error(std::string("unknown escape '%") + e + "'", pos);
                return false;
        }
    }

    void lex_string(SourcePos pos) {
        advance();  // opening quote
        std::string text;
        while (true) {
            if (i >= src.size() || peek() == '\n') {
                error("unterminated string literal", pos);
                break;
            }
            char c = peek();
            if (c == '"') {
                advance();
                break;
            }
            if (c == '%') {
                advance();
                char dec;
                if (decode_escape(peek(), dec, here())) text += dec;
                advance();
                continue;
            }
            text += c;
            advance();
        }
        push(TokenKind::StringLit, text, pos);
    }

    void lex_char(SourcePos pos) {
        advance();  // opening quote
        std::string text;
        if (peek() == '%') {
            advance();
            char dec = '?';
            decode_escape(peek(), dec, here());
            text += dec;
            advance();
        } else if (i < src.size() && peek() != '\'') {
            text += peek();
            advance();
        } else {
            error("empty character literal", pos);
        }
        if (peek() == '\'')
            advance();
        else
            error("unterminated character literal", pos);
        push(TokenKind::CharLit, text, pos);
    }

    void lex_symbol(SourcePos pos) {
        static const std::array<const char*, 11> two = {":=", "/=", "<=", ">=", "//", "\\\\",
                                                        "/~", "..", "->", "[]", "@?"};
        char c = peek();
        std::string pair;
        pair += c;
        pair += peek(1);
        for (const char* t : two) {
            if (pair == t) {
                advance(2);
                if (pair == ":=")
                    push(TokenKind::Punctuation, pair, pos);
                else
                    push(TokenKind::Operator, pair, pos);
                return;
            }
        }
        switch (c) {
            case '.': case ',': case ';': case '(': case ')':
            case '[': case ']': case '{': case '}': case ':':
                push(TokenKind::Punctuation, std::string(1, c), pos);
                advance();
                return;
            case '+': case '-': case '*': case '/': case '=':
            case '<': case '>': case '~': case '@': case '|': case '^':
                push(TokenKind::Operator, std::string(1, c), pos);
                advance();
                return;
            default:
                error(std::string("illegal character '") + c + "'", pos);
                advance();
                return;
        }
    }
};

}  // namespace

bool is_minie_keyword(const std::string& word) { return kKeywords.count(word) > 0; }

LexResult tokenize(const std::string& source, const std::string& filename) {
    Lexer lx(source, filename);
    lx.run();
    return lx.out;
}

}  // namespace minie
