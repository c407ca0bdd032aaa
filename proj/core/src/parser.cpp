#include "minie/parser.hpp"

#include <set>

namespace minie {

namespace {

struct ParseFail {};  // unwinds to parse_class after the diagnostic is recorded

// Unicode operator glyphs map to their ASCII spelling at parse time.
std::string normalize_op(const std::string& t) {
    if (t == "∧") return "and";
    if (t == "∨") return "or";
    if (t == "÷") return "/";
    if (t == "≤") return "<=";
    if (t == "≥") return ">=";
    if (t == "≠") return "/=";
    return t;
}

struct Parser {
    const LexResult& lex;
    std::string file;
    size_t p = 0;
    Diagnostics diags;

    Parser(const LexResult& l, std::string f) : lex(l), file(std::move(f)) {}

    const Token& cur() const { return lex.tokens[p]; }
    const Token& peek(size_t off = 1) const {
        size_t k = p + off;
        return k < lex.tokens.size() ? lex.tokens[k] : lex.tokens.back();
    }
    void advance() {
        if (p + 1 < lex.tokens.size()) ++p;
    }

    [[noreturn]] void fail(const std::string& msg) { fail_at(msg, cur().pos); }
    [[noreturn]] void fail_at(const std::string& msg, const SourcePos& pos) {
        diags.push_back({"SYNT", msg, pos, Severity::Error});
        throw ParseFail{};
    }

    void expect_kw(const char* kw) {
        if (!cur().is_keyword(kw)) fail(std::string("expected '") + kw + "'");
        advance();
    }
    void expect_punct(const char* t) {
        if (!cur().is_punct(t)) fail(std::string("expected '") + t + "'");
        advance();
    }
    bool accept_kw(const char* kw) {
        if (cur().is_keyword(kw)) {
            advance();
            return true;
        }
        return false;
    }
    bool accept_punct(const char* t) {
        if (cur().is_punct(t)) {
            advance();
            return true;
        }
        return false;
    }
    bool accept_op(const char* t) {
        if (cur().is_op(t)) {
            advance();
            return true;
        }
        return false;
    }
    std::string expect_ident(const char* what) {
        if (!cur().is(TokenKind::Identifier)) fail(std::string("expected ") + what);
        std::string n = cur().text;
        advance();
        return n;
    }

    bool at_op_norm(const char* t) const {
        return cur().is(TokenKind::Operator) && normalize_op(cur().text) == t;
    }

    // Comment lines with line numbers in [from_line, to_line), joined with newlines.
    std::string comments_between(int from_line, int to_line) const {
        std::string out;
        for (const auto& c : lex.comments) {
            if (c.line >= from_line && c.line < to_line) {
                if (!out.empty()) out += '\n';
                out += c.text;
            }
        }
        return out;
    }

    // ---- types --------------------------------------------------------

    bool at_type_start() const {
        return cur().is(TokenKind::Identifier) || cur().is_keyword("detachable") ||
               cur().is_keyword("attached") || cur().is_keyword("separate");
    }

    TypeRef parse_type() {
        TypeRef t;
        while (true) {
            if (accept_kw("detachable")) {
                t.detachable = true;
            } else if (accept_kw("attached")) {
                t.detachable = false;
            } else if (accept_kw("separate")) {
                t.separate = true;
            } else {
                break;
            }
        }
        if (cur().is_keyword("like")) fail("anchored types are not supported");
        t.base = expect_ident("a class name");
        if (accept_punct("[")) {
            t.args.push_back(parse_type());
            while (accept_punct(",")) t.args.push_back(parse_type());
            expect_punct("]");
        }
        return t;
    }

    // ---- expressions --------------------------------------------------

    ExprPtr parse_expr() { return parse_implies(); }

    ExprPtr parse_implies() {
        ExprPtr l = parse_or();
        if (cur().is_keyword("implies")) {
            SourcePos pos = cur().pos;
            advance();
            auto e = make_expr(ExprKind::Implies, pos);
            e->args.push_back(std::move(l));
            e->args.push_back(parse_implies());  // right-associative
            return e;
        }
        return l;
    }

    ExprPtr parse_or() {
        ExprPtr l = parse_and();
        while (true) {
            SourcePos pos = cur().pos;
            if (cur().is_keyword("or") || at_op_norm("or")) {
                bool glyph = cur().is(TokenKind::Operator);
                advance();
                if (!glyph && accept_kw("else")) {
                    auto e = make_expr(ExprKind::OrElse, pos);
                    e->args.push_back(std::move(l));
                    e->args.push_back(parse_and());
                    l = std::move(e);
                } else {
                    auto e = make_expr(ExprKind::Binary, pos);
                    e->name = "or";
                    e->args.push_back(std::move(l));
                    e->args.push_back(parse_and());
                    l = std::move(e);
                }
            } else if (cur().is_keyword("xor")) {
                advance();
                auto e = make_expr(ExprKind::Binary, pos);
                e->name = "xor";
                e->args.push_back(std::move(l));
                e->args.push_back(parse_and());
                l = std::move(e);
            } else {
                return l;
            }
        }
    }

    ExprPtr parse_and() {
        ExprPtr l = parse_comparison();
        while (cur().is_keyword("and") || at_op_norm("and")) {
            SourcePos pos = cur().pos;
            bool glyph = cur().is(TokenKind::Operator);
            advance();
            if (!glyph && accept_kw("then")) {
                auto e = make_expr(ExprKind::AndThen, pos);
                e->args.push_back(std::move(l));
                e->args.push_back(parse_comparison());
                l = std::move(e);
            } else {
                auto e = make_expr(ExprKind::Binary, pos);
                e->name = "and";
                e->args.push_back(std::move(l));
                e->args.push_back(parse_comparison());
                l = std::move(e);
            }
        }
        return l;
    }

    static bool is_comparison_op(const std::string& t) {
        return t == "=" || t == "/=" || t == "~" || t == "/~" || t == "<" || t == ">" ||
               t == "<=" || t == ">=";
    }

    ExprPtr parse_comparison() {
        ExprPtr l = parse_additive();
        while (cur().is(TokenKind::Operator) && is_comparison_op(normalize_op(cur().text))) {
            SourcePos pos = cur().pos;
            std::string op = normalize_op(cur().text);
            advance();
            ExprKind k = op == "=" ? ExprKind::Equal
                       : op == "/=" ? ExprKind::NotEqual
                       : op == "~" ? ExprKind::TildeEq
                       : op == "/~" ? ExprKind::TildeNeq
                                    : ExprKind::Binary;
            auto e = make_expr(k, pos);
            if (k == ExprKind::Binary) e->name = op;
            e->args.push_back(std::move(l));
            e->args.push_back(parse_additive());
            l = std::move(e);
        }
        return l;
    }

    ExprPtr parse_additive() {
        ExprPtr l = parse_multiplicative();
        while (cur().is_op("+") || cur().is_op("-")) {
            SourcePos pos = cur().pos;
            std::string op = cur().text;
            advance();
            auto e = make_expr(ExprKind::Binary, pos);
            e->name = op;
            e->args.push_back(std::move(l));
            e->args.push_back(parse_multiplicative());
            l = std::move(e);
        }
        return l;
    }

    ExprPtr parse_multiplicative() {
        ExprPtr l = parse_power();
        while (cur().is(TokenKind::Operator)) {
            std::string op = normalize_op(cur().text);
            if (op != "*" && op != "/" && op != "//" && op != "\\\\") break;
            SourcePos pos = cur().pos;
            advance();
            auto e = make_expr(ExprKind::Binary, pos);
            e->name = op;
            e->args.push_back(std::move(l));
            e->args.push_back(parse_power());
            l = std::move(e);
        }
        return l;
    }

    ExprPtr parse_power() {
        ExprPtr l = parse_unary();
        if (cur().is_op("^")) {
            SourcePos pos = cur().pos;
            advance();
            auto e = make_expr(ExprKind::Binary, pos);
            e->name = "^";
            e->args.push_back(std::move(l));
            e->args.push_back(parse_power());  // right-associative
            return e;
        }
        return l;
    }

    ExprPtr parse_unary() {
        SourcePos pos = cur().pos;
        if (accept_kw("not")) {
            auto e = make_expr(ExprKind::Unary, pos);
            e->name = "not";
            e->args.push_back(parse_unary());
            return e;
        }
        if (cur().is_op("-") || cur().is_op("+")) {
            std::string op = cur().text;
            advance();
            auto e = make_expr(ExprKind::Unary, pos);
            e->name = op;
            e->args.push_back(parse_unary());
            return e;
        }
        if (accept_kw("old")) {
            auto e = make_expr(ExprKind::Old, pos);
            e->args.push_back(parse_unary());
            return e;
        }
        return parse_postfix();
    }

    std::vector<ExprPtr> parse_actuals() {
        std::vector<ExprPtr> args;
        expect_punct("(");
        if (!cur().is_punct(")")) {
            args.push_back(parse_expr());
            while (accept_punct(",")) args.push_back(parse_expr());
        }
        expect_punct(")");
        return args;
    }

    ExprPtr parse_postfix() {
        ExprPtr e = parse_primary();
        while (true) {
            if (cur().is_punct(".")) {
                SourcePos pos = cur().pos;
                advance();
                auto c = make_expr(ExprKind::Call, pos);
                c->name = expect_ident("a feature name after '.'");
                c->target = std::move(e);
                if (cur().is_punct("(")) c->args = parse_actuals();
                e = std::move(c);
            } else if (cur().is_punct("[")) {
                SourcePos pos = cur().pos;
                advance();
                auto b = make_expr(ExprKind::Bracket, pos);
                b->target = std::move(e);
                b->args.push_back(parse_expr());
                while (accept_punct(",")) b->args.push_back(parse_expr());
                expect_punct("]");
                e = std::move(b);
            } else {
                return e;
            }
        }
    }

    ExprPtr parse_agent() {
        // agent f  |  agent t.f  |  agent a.b.f  |  agent Current.f
        SourcePos pos = cur().pos;
        expect_kw("agent");
        std::vector<std::pair<std::string, SourcePos>> parts;
        ExprPtr target;
        if (cur().is_keyword("Current")) {
            target = make_expr(ExprKind::Current, cur().pos);
            advance();
            expect_punct(".");
        }
        parts.emplace_back(expect_ident("a feature name"), pos);
        while (accept_punct(".")) parts.emplace_back(expect_ident("a feature name"), cur().pos);
        if (cur().is_punct("("))
            fail("agent arguments are not supported; agents capture the bare feature");
        // all but the last part form the target chain
        for (size_t i = 0; i + 1 < parts.size(); ++i) {
            if (!target) {
                auto n = make_expr(ExprKind::Name, parts[i].second);
                n->name = parts[i].first;
                target = std::move(n);
            } else {
                auto c = make_expr(ExprKind::Call, parts[i].second);
                c->name = parts[i].first;
                c->target = std::move(target);
                target = std::move(c);
            }
        }
        auto a = make_expr(ExprKind::Agent, pos);
        a->name = parts.back().first;
        a->target = std::move(target);
        return a;
    }

    ExprPtr parse_quantifier(bool universal, SourcePos pos) {
        // symbolic form: ∀ x: s ¦ P
        auto q = make_expr(universal ? ExprKind::QuantAll : ExprKind::QuantSome, pos);
        q->name = expect_ident("a quantified variable");
        expect_punct(":");
        q->args.push_back(parse_postfix());
        if (!cur().is_op("¦") && !cur().is_op("|")) fail("expected '¦' in quantifier");
        advance();
        q->args.push_back(parse_expr());
        return q;
    }

    ExprPtr parse_primary() {
        SourcePos pos = cur().pos;
        const Token& t = cur();
        switch (t.kind) {
            case TokenKind::IntegerLit: {
                auto e = make_expr(ExprKind::IntLit, pos);
                e->int_val = std::stoll(t.text);
                advance();
                return e;
            }
            case TokenKind::RealLit: {
                auto e = make_expr(ExprKind::RealLit, pos);
                e->real_val = std::stod(t.text);
                e->text = t.text;  // keep the spelling for faithful printing
                advance();
                return e;
            }
            case TokenKind::StringLit: {
                auto e = make_expr(ExprKind::StringLit, pos);
                e->text = t.text;
                advance();
                return e;
            }
            case TokenKind::CharLit: {
                auto e = make_expr(ExprKind::CharLit, pos);
                e->char_val = t.text.empty() ? '\0' : t.text[0];
                advance();
                return e;
            }
            default:
                break;
        }
        if (t.is_keyword("True") || t.is_keyword("False")) {
            auto e = make_expr(ExprKind::BoolLit, pos);
            e->int_val = t.is_keyword("True") ? 1 : 0;
            advance();
            return e;
        }
        if (accept_kw("Void")) return make_expr(ExprKind::VoidLit, pos);
        if (accept_kw("Current")) return make_expr(ExprKind::Current, pos);
        if (accept_kw("Result")) return make_expr(ExprKind::ResultVar, pos);
        if (accept_kw("Retry")) return make_expr(ExprKind::RetryVar, pos);
        if (t.is_keyword("agent")) return parse_agent();
        if (accept_kw("attached")) {
            auto e = make_expr(ExprKind::AttachedTest, pos);
            if (accept_punct("{")) {
                e->type = parse_type();
                expect_punct("}");
            }
            e->args.push_back(parse_unary());
            if (accept_kw("as")) e->name = expect_ident("an object-test local name");
            return e;
        }
        if (accept_kw("across")) {
            // quantifier expression: across s as x all|some P end
            ExprPtr seq = parse_expr();
            expect_kw("as");
            std::string var = expect_ident("a cursor name");
            bool universal;
            if (accept_kw("all"))
                universal = true;
            else if (accept_kw("some"))
                universal = false;
            else
                fail("expected 'all' or 'some' in across expression");
            auto q = make_expr(universal ? ExprKind::QuantAll : ExprKind::QuantSome, pos);
            q->name = var;
            q->args.push_back(std::move(seq));
            q->args.push_back(parse_expr());
            expect_kw("end");
            return q;
        }
        if (t.is_op("∀") || t.is_op("∃")) {
            bool universal = t.is_op("∀");
            advance();
            return parse_quantifier(universal, pos);
        }
        if (t.is_op("@")) {
            advance();
            auto e = make_expr(ExprKind::CursorIndex, pos);
            e->name = expect_ident("a cursor name after '@'");
            return e;
        }
        if (accept_kw("create")) {
            expect_punct("{");
            auto e = make_expr(ExprKind::CreateExpr, pos);
            e->type = parse_type();
            expect_punct("}");
            if (accept_punct(".")) {
                e->name = expect_ident("a creation procedure name");
                if (cur().is_punct("(")) e->args = parse_actuals();
            }
            return e;
        }
        if (accept_punct("(")) {
            ExprPtr e = parse_expr();
            expect_punct(")");
            return e;
        }
        if (accept_punct("[")) {
            auto e = make_expr(ExprKind::TupleLit, pos);
            if (!cur().is_punct("]")) {
                e->args.push_back(parse_expr());
                while (accept_punct(",")) e->args.push_back(parse_expr());
            }
            expect_punct("]");
            return e;
        }
        if (t.is_op("[]")) {  // empty tuple
            advance();
            return make_expr(ExprKind::TupleLit, pos);
        }
        if (accept_punct("{")) {
            // non-object call {C}.f (args)
            auto e = make_expr(ExprKind::NonObject, pos);
            e->type = parse_type();
            expect_punct("}");
            expect_punct(".");
            e->name = expect_ident("a feature name");
            if (cur().is_punct("(")) e->args = parse_actuals();
            return e;
        }
        if (t.is(TokenKind::Identifier)) {
            std::string n = t.text;
            advance();
            if (cur().is_punct("(")) {
                auto c = make_expr(ExprKind::Call, pos);
                c->name = n;
                c->args = parse_actuals();
                return c;
            }
            auto e = make_expr(ExprKind::Name, pos);
            e->name = n;
            return e;
        }
        fail("expected an expression");
    }

    // ---- assertion clauses ---------------------------------------------

    std::vector<Clause> parse_clauses(const std::set<std::string>& stop_kws) {
        std::vector<Clause> out;
        while (true) {
            if (cur().is(TokenKind::EndOfInput)) break;
            if (cur().is(TokenKind::Keyword) && stop_kws.count(cur().text)) break;
            accept_punct(";");
            if (cur().is(TokenKind::Keyword) && stop_kws.count(cur().text)) break;
            Clause c;
            c.pos = cur().pos;
            if (cur().is(TokenKind::Identifier) && peek().is_punct(":")) {
                c.tag = cur().text;
                advance();
                advance();
            }
            if (accept_kw("class")) {
                c.class_marker = true;
            } else {
                c.expr = parse_expr();
            }
            out.push_back(std::move(c));
        }
        return out;
    }

    // ---- instructions ---------------------------------------------------

    static bool stops_instructions(const Token& t) {
        if (t.is(TokenKind::EndOfInput)) return true;
        if (!t.is(TokenKind::Keyword)) return false;
        static const std::set<std::string> kStops = {"end",     "else",   "elseif", "when",
                                                     "until",   "invariant", "variant", "loop",
                                                     "ensure",  "rescue", "then"};
        return kStops.count(t.text) > 0;
    }

    InstrList parse_instrs() {
        InstrList out;
        while (!stops_instructions(cur())) {
            accept_punct(";");
            if (stops_instructions(cur())) break;
            out.push_back(parse_instruction());
        }
        return out;
    }

    InstrPtr parse_instruction() {
        SourcePos pos = cur().pos;
        const Token& t = cur();
        if (t.is(TokenKind::Identifier) &&
            (t.text == "return" || t.text == "break" || t.text == "continue" || t.text == "goto")) {
            fail("'" + t.text + "' is not an instruction: a routine has a single entry and a "
                 "single exit, and loops end only when their exit condition holds");
        }
        if (t.is_keyword("create")) return parse_create(pos);
        if (t.is_keyword("if")) return parse_if(pos);
        if (t.is_keyword("inspect")) return parse_inspect(pos);
        if (t.is_keyword("from")) return parse_loop(pos);
        if (t.is_keyword("across")) return parse_across(pos);
        if (t.is_keyword("separate")) return parse_separate(pos);
        if (t.is_keyword("check")) return parse_check(pos);
        if (t.is_keyword("debug")) fail("'debug' instructions are not supported");

        // call, assignment, or assigner call
        ExprPtr e = parse_postfix();
        if (accept_punct(":=")) {
            auto in = make_instr(InstrKind::Assign, pos);
            in->lhs = std::move(e);
            in->rhs = parse_expr();
            return in;
        }
        switch (e->kind) {
            case ExprKind::Call:
            case ExprKind::Name:
            case ExprKind::NonObject: {
                auto in = make_instr(InstrKind::CallInstr, pos);
                in->call = std::move(e);
                return in;
            }
            default:
                fail_at("this expression is not an instruction", pos);
        }
    }

    InstrPtr parse_create(SourcePos pos) {
        expect_kw("create");
        auto in = make_instr(InstrKind::Create, pos);
        if (accept_punct("{")) {
            in->has_type = true;
            in->type = parse_type();
            expect_punct("}");
        }
        if (cur().is_keyword("Result")) {
            in->target = make_expr(ExprKind::ResultVar, cur().pos);
            advance();
        } else {
            auto n = make_expr(ExprKind::Name, cur().pos);
            n->name = expect_ident("a creation target");
            in->target = std::move(n);
        }
        if (accept_punct(".")) {
            in->name = expect_ident("a creation procedure name");
            if (cur().is_punct("(")) in->args = parse_actuals();
        }
        return in;
    }

    InstrPtr parse_if(SourcePos pos) {
        expect_kw("if");
        auto in = make_instr(InstrKind::If, pos);
        while (true) {
            Instr::Branch b;
            b.cond = parse_expr();
            if (b.cond->kind == ExprKind::AttachedTest) b.objtest_local = b.cond->name;
            expect_kw("then");
            b.body = parse_instrs();
            in->branches.push_back(std::move(b));
            if (accept_kw("elseif")) continue;
            break;
        }
        if (accept_kw("else")) in->else_body = parse_instrs();
        expect_kw("end");
        return in;
    }

    InstrPtr parse_inspect(SourcePos pos) {
        expect_kw("inspect");
        auto in = make_instr(InstrKind::Inspect, pos);
        in->lhs = parse_expr();
        while (accept_kw("when")) {
            Instr::When w;
            w.values.push_back(parse_expr());
            while (accept_punct(",")) w.values.push_back(parse_expr());
            expect_kw("then");
            w.body = parse_instrs();
            in->whens.push_back(std::move(w));
        }
        if (accept_kw("else")) in->else_body = parse_instrs();
        expect_kw("end");
        return in;
    }

    InstrPtr parse_loop(SourcePos pos) {
        expect_kw("from");
        auto in = make_instr(InstrKind::Loop, pos);
        in->init = parse_instrs();
        if (accept_kw("invariant"))
            in->invariant_c = parse_clauses({"until", "variant", "loop"});
        expect_kw("until");
        in->until = parse_expr();
        expect_kw("loop");
        in->body = parse_instrs();
        if (accept_kw("variant")) in->variant = parse_expr();
        expect_kw("end");
        return in;
    }

    InstrPtr parse_across(SourcePos pos) {
        expect_kw("across");
        auto in = make_instr(InstrKind::Across, pos);
        in->lhs = parse_expr();
        expect_kw("as");
        in->name = expect_ident("a cursor name");
        expect_kw("loop");
        in->body = parse_instrs();
        expect_kw("end");
        return in;
    }

    InstrPtr parse_separate(SourcePos pos) {
        // separate a, b as l, r do B end
        expect_kw("separate");
        auto in = make_instr(InstrKind::SeparateBlock, pos);
        in->args.push_back(parse_expr());
        while (accept_punct(",")) in->args.push_back(parse_expr());
        expect_kw("as");
        in->names.push_back(expect_ident("a separate-block local name"));
        while (accept_punct(",")) in->names.push_back(expect_ident("a separate-block local name"));
        if (in->names.size() != in->args.size())
            fail_at("a separate block needs one local per controlled expression", pos);
        expect_kw("do");
        in->body = parse_instrs();
        expect_kw("end");
        return in;
    }

    InstrPtr parse_check(SourcePos pos) {
        expect_kw("check");
        auto in = make_instr(InstrKind::Check, pos);
        in->clauses = parse_clauses({"end"});
        expect_kw("end");
        return in;
    }

    // ---- features -------------------------------------------------------

    void parse_entity_group(std::vector<std::pair<std::string, TypeRef>>& into) {
        std::vector<std::string> names;
        names.push_back(expect_ident("an entity name"));
        while (accept_punct(",")) names.push_back(expect_ident("an entity name"));
        expect_punct(":");
        TypeRef ty = parse_type();
        for (auto& n : names) into.emplace_back(n, ty);
    }

    ExprPtr parse_manifest_constant() {
        SourcePos pos = cur().pos;
        bool neg = false;
        if (cur().is_op("-")) {
            neg = true;
            advance();
        }
        const Token& t = cur();
        ExprPtr e;
        if (t.is(TokenKind::IntegerLit)) {
            e = make_expr(ExprKind::IntLit, pos);
            e->int_val = std::stoll(t.text);
            if (neg) e->int_val = -e->int_val;
            advance();
        } else if (t.is(TokenKind::RealLit)) {
            e = make_expr(ExprKind::RealLit, pos);
            e->real_val = std::stod(t.text);
            e->text = (neg ? "-" : "") + t.text;
            if (neg) e->real_val = -e->real_val;
            advance();
        } else if (t.is(TokenKind::StringLit)) {
            e = make_expr(ExprKind::StringLit, pos);
            e->text = t.text;
            advance();
        } else if (t.is(TokenKind::CharLit)) {
            e = make_expr(ExprKind::CharLit, pos);
            e->char_val = t.text.empty() ? '\0' : t.text[0];
            advance();
        } else if (t.is_keyword("True") || t.is_keyword("False")) {
            e = make_expr(ExprKind::BoolLit, pos);
            e->int_val = t.is_keyword("True") ? 1 : 0;
            advance();
        } else {
            fail("a constant attribute needs a manifest value");
        }
        return e;
    }

    static bool starts_routine_body(const Token& t) {
        if (!t.is(TokenKind::Keyword)) return false;
        return t.text == "require" || t.text == "local" || t.text == "do" || t.text == "once" ||
               t.text == "deferred" || t.text == "external" || t.text == "attribute";
    }

    void parse_feature_into(FeatureClause& fc) {
        auto f = std::make_shared<FeatureDecl>();
        f->pos = cur().pos;
        f->name = expect_ident("a feature name");

        // grouped attribute declarations: a, b: T
        std::vector<std::string> group;
        while (accept_punct(",")) group.push_back(expect_ident("a feature name"));

        while (accept_kw("alias")) {
            if (!cur().is(TokenKind::StringLit)) fail("expected an alias string");
            f->aliases.push_back(cur().text);
            advance();
        }
        if (!group.empty() && !f->aliases.empty())
            fail_at("grouped declarations may not carry aliases", f->pos);
        if (cur().is_punct("(")) {
            if (!group.empty()) fail_at("grouped declarations may not take arguments", f->pos);
            advance();
            if (!cur().is_punct(")")) {
                parse_entity_group(f->formals);
                while (accept_punct(";")) parse_entity_group(f->formals);
            }
            expect_punct(")");
        }
        if (accept_punct(":")) f->result = parse_type();
        if (accept_kw("assign")) f->assigner = expect_ident("a setter name");

        int sig_line = lex.tokens[p > 0 ? p - 1 : 0].pos.line;
        f->header_comment = comments_between(sig_line, cur().pos.line);

        if (cur().is_op("=")) {
            advance();
            if (!f->result) fail_at("a constant attribute needs a type", f->pos);
            f->body_kind = BodyKind::Constant;
            f->const_value = parse_manifest_constant();
        } else if (starts_routine_body(cur())) {
            if (!group.empty())
                fail_at("grouped declarations may not have a body", f->pos);
            parse_routine_body(*f);
        } else {
            // plain attribute
            if (!f->result) fail_at("expected a body or a type for this feature", f->pos);
            f->body_kind = BodyKind::Attribute;
        }
        fc.features.push_back(f);
        for (auto& n : group) {
            auto g = f->clone();
            g->name = n;
            fc.features.push_back(std::move(g));
        }
    }

    void parse_routine_body(FeatureDecl& f) {
        if (accept_kw("require")) {
            f.require_else = accept_kw("else");
            f.require_c = parse_clauses(
                {"local", "do", "once", "deferred", "external", "attribute", "ensure", "end"});
        }
        if (accept_kw("local")) {
            while (cur().is(TokenKind::Identifier)) parse_entity_group(f.locals);
        }
        if (accept_kw("do")) {
            f.body_kind = BodyKind::Do;
            f.instructions = parse_instrs();
        } else if (accept_kw("once")) {
            f.body_kind = BodyKind::Once;
            f.once_key = "PROCESS";
            if (accept_punct("(")) {
                if (!cur().is(TokenKind::StringLit)) fail("expected a once key string");
                f.once_key = cur().text;
                advance();
                expect_punct(")");
                if (f.once_key != "PROCESS" && f.once_key != "THREAD" && f.once_key != "OBJECT")
                    fail_at("once key must be PROCESS, THREAD or OBJECT", f.pos);
            }
            f.instructions = parse_instrs();
        } else if (accept_kw("deferred")) {
            f.body_kind = BodyKind::Deferred;
        } else if (accept_kw("external")) {
            f.body_kind = BodyKind::External;
            if (!cur().is(TokenKind::StringLit)) fail("expected an external name string");
            f.external_name = cur().text;
            advance();
        } else if (accept_kw("attribute")) {
            f.body_kind = BodyKind::Attribute;
            if (!f.result) fail_at("an attribute needs a type", f.pos);
        } else {
            fail("expected a feature body");
        }
        if (accept_kw("ensure")) {
            f.ensure_then = accept_kw("then");
            f.ensure_c = parse_clauses({"end", "rescue"});
        }
        if (accept_kw("rescue")) {
            if (f.body_kind != BodyKind::Do && f.body_kind != BodyKind::Once)
                fail_at("only effective routines may have a rescue clause", f.pos);
            f.has_rescue = true;
            f.rescue_c = parse_instrs();
        }
        expect_kw("end");
    }

    // ---- class level ------------------------------------------------------

    ParentSpec parse_parent() {
        ParentSpec ps;
        ps.pos = cur().pos;
        ps.type = parse_type();
        if (ps.type.detachable || ps.type.separate)
            fail_at("a parent type carries no attachment or separateness marks", ps.pos);
        while (cur().is_keyword("rename") || cur().is_keyword("redefine")) {
            if (accept_kw("rename")) {
                do {
                    std::string from = expect_ident("a feature name");
                    expect_kw("as");
                    std::string to = expect_ident("a feature name");
                    ps.renames.emplace_back(from, to);
                } while (accept_punct(","));
            } else {
                expect_kw("redefine");
                do {
                    ps.redefines.push_back(expect_ident("a feature name"));
                } while (accept_punct(","));
            }
        }
        if (!ps.renames.empty() || !ps.redefines.empty()) expect_kw("end");
        return ps;
    }

    ConvertSpec parse_convert_item() {
        ConvertSpec cs;
        cs.pos = cur().pos;
        cs.name = expect_ident("a conversion feature name");
        if (accept_punct("(")) {
            // conversion-from procedure: make_from_x ({X, Y})
            cs.from = true;
            expect_punct("{");
            cs.types.push_back(parse_type());
            while (accept_punct(",")) cs.types.push_back(parse_type());
            expect_punct("}");
            expect_punct(")");
        } else {
            // conversion-to function: to_y: {Y}
            expect_punct(":");
            expect_punct("{");
            cs.types.push_back(parse_type());
            while (accept_punct(",")) cs.types.push_back(parse_type());
            expect_punct("}");
        }
        return cs;
    }

    std::unique_ptr<ClassAst> parse() {
        auto ast = std::make_unique<ClassAst>();
        ast->file = file;
        ast->begin_pos = cur().pos;
        while (true) {
            if (accept_kw("deferred")) ast->deferred_mark = true;
            else if (accept_kw("frozen")) ast->frozen_mark = true;
            else if (accept_kw("expanded")) ast->expanded_mark = true;
            else if (cur().is_keyword("once") && peek().is_keyword("class")) {
                advance();
                ast->once_mark = true;
            } else break;
        }
        expect_kw("class");
        ast->name = expect_ident("a class name");
        if (accept_punct("[")) {
            ast->formals.push_back(expect_ident("a generic parameter name"));
            while (accept_punct(",")) ast->formals.push_back(expect_ident("a generic parameter name"));
            expect_punct("]");
        }
        int head_line = lex.tokens[p > 0 ? p - 1 : 0].pos.line;
        ast->header_comment = comments_between(head_line, cur().pos.line);

        if (accept_kw("inherit")) {
            ast->parents.push_back(parse_parent());
            while (cur().is(TokenKind::Identifier)) ast->parents.push_back(parse_parent());
        }
        if (accept_kw("create")) {
            std::vector<std::string> procs;
            procs.push_back(expect_ident("a creation procedure name"));
            while (accept_punct(",")) procs.push_back(expect_ident("a creation procedure name"));
            ast->create_clause = std::move(procs);
        }
        if (accept_kw("convert")) {
            ast->converts.push_back(parse_convert_item());
            while (accept_punct(",")) ast->converts.push_back(parse_convert_item());
        }
        while (accept_kw("feature")) {
            FeatureClause fc;
            if (accept_punct("{")) {
                fc.export_all = false;
                fc.export_to.push_back(expect_ident("a class name"));
                while (accept_punct(",")) fc.export_to.push_back(expect_ident("a class name"));
                expect_punct("}");
            }
            while (cur().is(TokenKind::Identifier)) parse_feature_into(fc);
            ast->feature_clauses.push_back(std::move(fc));
        }
        if (accept_kw("invariant")) ast->invariant_c = parse_clauses({"end"});
        ast->end_pos = cur().pos;
        expect_kw("end");
        if (!cur().is(TokenKind::EndOfInput)) fail("text after the final 'end'");

        check_duplicate_features(*ast);
        return ast;
    }

    // One declaration per feature name within a class text.
    void check_duplicate_features(const ClassAst& ast) {
        std::set<std::string> seen, reported;
        for (const auto& fc : ast.feature_clauses) {
            for (const auto& f : fc.features) {
                if (!seen.insert(f->name).second && reported.insert(f->name).second) {
                    diags.push_back({"VMFN",
                                     "feature '" + f->name + "' is declared twice in class " +
                                         ast.name,
                                     f->pos, Severity::Error});
                }
            }
        }
    }
};

}  // namespace

ParseResult parse_class(const LexResult& lex, const std::string& filename) {
    ParseResult r;
    r.diagnostics = lex.diagnostics;
    if (has_errors(r.diagnostics)) return r;
    Parser ps(lex, filename);
    try {
        r.ast = ps.parse();
    } catch (ParseFail&) {
        r.ast.reset();
    }
    for (auto& d : ps.diags) r.diagnostics.push_back(d);
    if (has_errors(r.diagnostics)) r.ast.reset();
    return r;
}

ParseResult parse_source(const std::string& source, const std::string& filename) {
    return parse_class(tokenize(source, filename), filename);
}

}  // namespace minie
