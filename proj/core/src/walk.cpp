#include "minie/walk.hpp"

namespace minie {

void walk_exprs(Expr& e, const std::function<void(Expr&)>& f) {
    f(e);
    if (e.target) walk_exprs(*e.target, f);
    for (auto& a : e.args) walk_exprs(*a, f);
    walk_exprs(e.loop_init, f);
    if (e.loop_until) walk_exprs(*e.loop_until, f);
    walk_exprs(e.loop_body, f);
    if (e.loop_result) walk_exprs(*e.loop_result, f);
}

void walk_exprs(Instr& in, const std::function<void(Expr&)>& f) {
    if (in.lhs) walk_exprs(*in.lhs, f);
    if (in.rhs) walk_exprs(*in.rhs, f);
    if (in.call) walk_exprs(*in.call, f);
    if (in.target) walk_exprs(*in.target, f);
    for (auto& a : in.args) walk_exprs(*a, f);
    for (auto& b : in.branches) {
        if (b.cond) walk_exprs(*b.cond, f);
        walk_exprs(b.body, f);
    }
    walk_exprs(in.else_body, f);
    for (auto& w : in.whens) {
        for (auto& v : w.values) walk_exprs(*v, f);
        walk_exprs(w.body, f);
    }
    walk_exprs(in.init, f);
    walk_exprs(in.invariant_c, f);
    if (in.until) walk_exprs(*in.until, f);
    walk_exprs(in.body, f);
    if (in.variant) walk_exprs(*in.variant, f);
    walk_exprs(in.clauses, f);
}

void walk_exprs(InstrList& l, const std::function<void(Expr&)>& f) {
    for (auto& in : l) walk_exprs(*in, f);
}

void walk_exprs(std::vector<Clause>& cs, const std::function<void(Expr&)>& f) {
    for (auto& c : cs)
        if (c.expr) walk_exprs(*c.expr, f);
}

void walk_exprs(FeatureDecl& d, const std::function<void(Expr&)>& f) {
    walk_exprs(d.require_c, f);
    walk_exprs(d.ensure_c, f);
    if (d.const_value) walk_exprs(*d.const_value, f);
    walk_exprs(d.instructions, f);
    walk_exprs(d.rescue_c, f);
}

namespace {

void type_and_args(TypeRef& t, const std::function<void(TypeRef&)>& f) { f(t); }

}  // namespace

void walk_types(Expr& e, const std::function<void(TypeRef&)>& f) {
    walk_exprs(e, [&](Expr& x) {
        if (x.type.valid()) type_and_args(x.type, f);
    });
}

void walk_types(Instr& in, const std::function<void(TypeRef&)>& f) {
    if (in.has_type) f(in.type);
    walk_exprs(in, [&](Expr& x) {
        if (x.type.valid()) f(x.type);
    });
}

void walk_types(FeatureDecl& d, const std::function<void(TypeRef&)>& f) {
    for (auto& [n, t] : d.formals) f(t);
    if (d.result) f(*d.result);
    for (auto& [n, t] : d.locals) f(t);
    walk_exprs(d, [&](Expr& x) {
        if (x.type.valid()) f(x.type);
    });
    // Create instructions carry explicit types outside expression positions.
    std::function<void(InstrList&)> walk_i = [&](InstrList& l) {
        for (auto& in : l) {
            if (in->has_type) f(in->type);
            for (auto& b : in->branches) walk_i(b.body);
            walk_i(in->else_body);
            for (auto& w : in->whens) walk_i(w.body);
            walk_i(in->init);
            walk_i(in->body);
        }
    };
    walk_i(d.instructions);
    walk_i(d.rescue_c);
}

}  // namespace minie
