#include "minie/ast.hpp"

namespace minie {

ExprPtr make_expr(ExprKind k, SourcePos p) { return std::make_unique<Expr>(k, std::move(p)); }
InstrPtr make_instr(InstrKind k, SourcePos p) { return std::make_unique<Instr>(k, std::move(p)); }

static ExprPtr clone_opt(const ExprPtr& e) { return e ? e->clone() : nullptr; }

ExprPtr Expr::clone() const {
    auto c = make_expr(kind, pos);
    c->name = name;
    c->int_val = int_val;
    c->real_val = real_val;
    c->text = text;
    c->char_val = char_val;
    c->target = clone_opt(target);
    for (auto& a : args) c->args.push_back(a->clone());
    c->type = type;
    c->res = res;
    c->old_id = old_id;
    c->loop_locals = loop_locals;
    c->loop_init = clone_instrs(loop_init);
    c->loop_until = clone_opt(loop_until);
    c->loop_body = clone_instrs(loop_body);
    c->loop_result = clone_opt(loop_result);
    c->static_type = static_type;
    c->conversion_is_builtin = conversion_is_builtin;
    return c;
}

Clause Clause::clone() const {
    Clause c;
    c.tag = tag;
    c.expr = expr ? expr->clone() : nullptr;
    c.class_marker = class_marker;
    c.separate_clause = separate_clause;
    c.pos = pos;
    return c;
}

std::vector<Clause> clone_clauses(const std::vector<Clause>& cs) {
    std::vector<Clause> out;
    out.reserve(cs.size());
    for (auto& c : cs) out.push_back(c.clone());
    return out;
}

InstrList clone_instrs(const InstrList& l) {
    InstrList out;
    out.reserve(l.size());
    for (auto& i : l) out.push_back(i->clone());
    return out;
}

InstrPtr Instr::clone() const {
    auto c = make_instr(kind, pos);
    c->lhs = clone_opt(lhs);
    c->rhs = clone_opt(rhs);
    c->call = clone_opt(call);
    c->has_type = has_type;
    c->type = type;
    c->target = clone_opt(target);
    c->name = name;
    for (auto& a : args) c->args.push_back(a->clone());
    for (auto& b : branches) {
        Branch nb;
        nb.cond = clone_opt(b.cond);
        nb.objtest_local = b.objtest_local;
        nb.body = clone_instrs(b.body);
        c->branches.push_back(std::move(nb));
    }
    c->else_body = clone_instrs(else_body);
    for (auto& w : whens) {
        When nw;
        for (auto& v : w.values) nw.values.push_back(v->clone());
        nw.body = clone_instrs(w.body);
        c->whens.push_back(std::move(nw));
    }
    c->init = clone_instrs(init);
    c->invariant_c = clone_clauses(invariant_c);
    c->until = clone_opt(until);
    c->body = clone_instrs(body);
    c->variant = clone_opt(variant);
    c->names = names;
    c->clauses = clone_clauses(clauses);
    return c;
}

std::shared_ptr<FeatureDecl> FeatureDecl::clone() const {
    auto c = std::make_shared<FeatureDecl>();
    c->name = name;
    c->aliases = aliases;
    c->formals = formals;
    c->result = result;
    c->assigner = assigner;
    c->header_comment = header_comment;
    c->body_kind = body_kind;
    c->once_key = once_key;
    c->external_name = external_name;
    c->const_value = const_value ? const_value->clone() : nullptr;
    c->require_c = clone_clauses(require_c);
    c->require_else = require_else;
    c->ensure_c = clone_clauses(ensure_c);
    c->ensure_then = ensure_then;
    c->locals = locals;
    c->instructions = clone_instrs(instructions);
    c->rescue_c = clone_instrs(rescue_c);
    c->has_rescue = has_rescue;
    c->pos = pos;
    return c;
}

bool is_basic_type(const std::string& base) {
    return base == "INTEGER" || base == "REAL" || base == "BOOLEAN" || base == "CHARACTER";
}

}  // namespace minie
