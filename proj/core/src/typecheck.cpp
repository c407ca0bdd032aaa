#include "minie/typecheck.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "minie/walk.hpp"

namespace minie {

// ---------------------------------------------------------------------------
// Validity-code catalogue. Each rule is stated in the "if and only if" style:
// meeting every condition is a guarantee of acceptance, not just a list of
// prohibitions.
// ---------------------------------------------------------------------------

const std::vector<std::pair<std::string, std::string>>& validity_catalogue() {
    static const std::vector<std::pair<std::string, std::string>> cat = {
        {"LEXI",
         "A source text is lexically valid if and only if every character belongs to a "
         "recognized token: identifier, keyword, literal, operator, bracket, or comment."},
        {"SYNT",
         "A class text is syntactically valid if and only if it derives from the Class "
         "production of the published grammar. The grammar contains no return, break, "
         "continue or goto constructs: every routine body has one entry and one exit."},
        {"GRAM",
         "A grammar file is well-formed if and only if every line is a comment, blank, or a "
         "production of the form `Construct ::= kind: right-hand-side` with kind one of "
         "choice, concatenation, iteration."},
        {"FILE",
         "A source path is usable if and only if it names a readable file or directory."},
        {"VSCN",
         "A universe of classes is valid if and only if no two class texts declare the "
         "same class name."},
        {"VTCT",
         "A type is valid if and only if its base name is a class of the universe or a "
         "formal generic parameter of the enclosing class, and no basic type "
         "(INTEGER, REAL, BOOLEAN, CHARACTER) carries the detachable mark."},
        {"VTUG",
         "A generically derived type is valid if and only if the number of actual generic "
         "parameters equals the number of formal generic parameters of the base class; "
         "TUPLE types take any number, and PROCEDURE [X, ...] / FUNCTION [X, ..., R] "
         "abbreviate the tuple-argument forms."},
        {"VHPR",
         "A class's inheritance part is valid if and only if no class is its own proper "
         "ancestor (the inheritance relation is acyclic)."},
        {"VCFG",
         "A parent part is valid if and only if the parent class is not frozen."},
        {"VHRC",
         "A rename clause is valid if and only if every old name is the final name of a "
         "feature inherited from that parent, no old name is listed twice, and the new "
         "names are distinct from each other and from the remaining final names."},
        {"VMFN",
         "A class is valid if and only if no two features of the class (declared or "
         "inherited, after renaming) share a final name, unless they are the same feature "
         "inherited repeatedly, or the declaration is a redeclaration of the inherited "
         "feature."},
        {"VMRC",
         "Repeated inheritance of a feature is valid if and only if all inheritance paths "
         "supply the same version; two conflicting redeclarations reaching a class along "
         "different paths are an error."},
        {"VDRS",
         "A redefine clause is valid if and only if every listed name is the final name of "
         "an effective feature inherited from that parent and a redeclaration of it "
         "appears in the class."},
        {"VDRD",
         "A redeclaration is valid if and only if it keeps the argument count, stays a "
         "query or a command as introduced, and each redeclared signature type conforms "
         "to the inherited one."},
        {"VDRC",
         "A feature declaration may carry `require else` and `ensure then` if and only if "
         "it is a redeclaration of an inherited feature; a feature introduced by the class "
         "itself uses plain `require` and `ensure`."},
        {"VCCH",
         "A class with at least one deferred feature (declared or inherited and not "
         "effected) is valid if and only if it is marked deferred."},
        {"VGCP",
         "A create clause is valid if and only if every listed name denotes a procedure of "
         "the class."},
        {"VOCC",
         "A once class is valid if and only if every creation procedure is a once "
         "routine."},
        {"VFAV",
         "An alias is valid if and only if an operator alias names a unary feature (no "
         "arguments) or a binary feature (one argument), and a bracket alias \"[]\" names "
         "a query with at least one argument."},
        {"VBAC",
         "An assignment whose target is a query is valid if and only if the query has an "
         "`assign` mark; the assigner must name a command of the same class taking the "
         "query's value as its first argument followed by the query's own arguments. "
         "Assignment to a plain query or a constant is invalid."},
        {"VGCC",
         "A creation instruction or expression is valid if and only if the creation type "
         "is an effective class (not deferred, not a formal generic), it conforms to the "
         "target's type, the creation procedure (default_create when unnamed) belongs to "
         "the class's creation set, and the target is a writable entity (local, Result, "
         "or an attribute of the enclosing class)."},
        {"VUEX",
         "A call is valid if and only if the feature exists in the target type's class "
         "under its final name and, for qualified calls, is exported to the client: "
         "exported to all, or to a listed class of which the client is a descendant. "
         "Operator and bracket expressions resolve through the alias of such a feature."},
        {"VUAR",
         "A call's argument list is valid if and only if its length equals the feature's "
         "formal count and every actual conforms or converts to the corresponding formal "
         "type."},
        {"VKCN",
         "A call instruction is valid if and only if its feature is a command "
         "(procedure); a call used as an expression is valid if and only if its feature "
         "is a query."},
        {"VUTA",
         "A qualified call is valid if and only if the type of its target is attached. "
         "Certify a detachable expression with an object test: "
         "`if attached x as y then ... end`."},
        {"VUSC",
         "A call on a target of separate type is valid if and only if the target is a "
         "formal argument of the enclosing routine or a separate-block local; a "
         "separate-block expression must itself be of separate type."},
        {"VJAR",
         "An assignment is valid if and only if its target is a local variable, Result, "
         "or an attribute of the enclosing class (never a formal argument), and the "
         "source conforms or converts to the target's type; in particular a detachable "
         "source never conforms to an attached target."},
        {"VWBE",
         "A boolean position (if/elseif/until condition and every assertion clause) is "
         "valid if and only if its expression is of type BOOLEAN."},
        {"VAVE",
         "A loop variant is valid if and only if its expression is of type INTEGER."},
        {"VOMB",
         "An inspect instruction is valid if and only if its subject is of type INTEGER, "
         "CHARACTER or STRING and every when value is a manifest constant or constant "
         "attribute of the same type."},
        {"VEVI",
         "A class with attached reference attributes is valid if and only if every "
         "creation procedure assigns every such attribute on all control paths before "
         "the procedure ends and before the current object can escape (no use of Current "
         "while an attached attribute is still unset)."},
        {"VEEN",
         "An entity use is valid if and only if: Result appears only in the body, "
         "postcondition or rescue clause of a function; Retry appears only in a routine "
         "that has a rescue clause; and every identifier resolves to a local, formal, "
         "object-test local, iteration variable or feature visible in that position "
         "(locals are not visible in pre- and postconditions)."},
        {"VRLE",
         "A local variable, formal argument, object-test local, iteration variable or "
         "separate-block name is valid if and only if it differs from every feature name "
         "of the enclosing class and from every other entity name in scope."},
        {"VAOX",
         "An Old expression oe of the form `old e` is valid if and only if it satisfies "
         "the following conditions: 1. It appears in a Postcondition part post of a "
         "feature. 2. It does not involve Result. 3. Replacing oe by e in post yields a "
         "valid Postcondition. (Condition 3 holds structurally here: locals are not in "
         "scope in postconditions, so e may only use features and formal arguments; "
         "iteration variables of an enclosing quantifier are rejected because the "
         "operand is evaluated on entry, before any iteration exists.)"},
        {"VIFC",
         "A feature with the postcondition clause `instance_free: class` is valid if and "
         "only if its body and contracts reference no attributes other than constant "
         "attributes, no non-instance-free features of the class, and not Current. A "
         "non-object call {C}.f is valid if and only if f is instance-free or a constant "
         "attribute. The marker itself may appear only in a postcondition."},
        {"VNCA",
         "A convert clause is valid if and only if each conversion procedure is a "
         "creation procedure of one argument, each conversion function is a query "
         "without arguments whose result conforms to the stated target, no source (or "
         "target) type also conforms to (from) the class — a pair of types may not both "
         "conform and convert — and no two clauses yield a route for the same pair of "
         "types. At a use site, a conversion applies if and only if exactly one route "
         "exists."},
        {"VAGC",
         "An agent-call abbreviation is valid if and only if the intended argument "
         "interpretation is unambiguous: for `doer.call (x)` with x itself of tuple "
         "type, x may be viable both as the argument tuple and as its single element; "
         "such a call must be written with an explicit tuple."},
        {"EXTB",
         "An external body is valid if and only if its binding id is registered in the "
         "runtime's built-in table (see kernel/BUILTINS.md)."},
    };
    return cat;
}

const std::string* explain_code(const std::string& code) {
    for (const auto& [c, text] : validity_catalogue())
        if (c == code) return &text;
    return nullptr;
}

// ---------------------------------------------------------------------------
// Generic substitution at use sites.
// ---------------------------------------------------------------------------

namespace {

using Subst = std::map<std::string, TypeRef>;

TypeRef substituted(const TypeRef& t, const Subst& s) {
    if (auto it = s.find(t.base); it != s.end() && t.args.empty()) {
        TypeRef r = it->second;
        r.detachable = r.detachable || t.detachable;
        r.separate = r.separate || t.separate;
        return r;
    }
    TypeRef r = t;
    for (auto& a : r.args) a = substituted(a, s);
    return r;
}

Subst formal_map(const FlatClass& fc, const TypeRef& use) {
    Subst s;
    for (size_t i = 0; i < fc.formals.size() && i < use.args.size(); ++i)
        s[fc.formals[i]] = use.args[i];
    return s;
}

TypeRef boolean_type() { return TypeRef("BOOLEAN"); }
TypeRef integer_type() { return TypeRef("INTEGER"); }

bool is_boolean(const TypeRef& t) { return t.base == "BOOLEAN"; }

}  // namespace

// ---------------------------------------------------------------------------
// Checker basics.
// ---------------------------------------------------------------------------

void Checker::report(const std::string& code, const std::string& msg, const SourcePos& pos) {
    std::string key = code + "|" + pos.to_string() + "|" + msg;
    if (std::find(seen_.begin(), seen_.end(), key) != seen_.end()) return;
    seen_.push_back(key);
    u_.diagnostics.push_back({code, msg, pos});
}

bool Checker::resolve_type(TypeRef& t, const FlatClass& cls, const SourcePos& pos) {
    if (!t.valid()) return false;
    if (std::find(cls.formals.begin(), cls.formals.end(), t.base) != cls.formals.end()) {
        if (!t.args.empty()) {
            report("VTUG", "formal generic " + t.base + " takes no generic arguments", pos);
            return false;
        }
        return true;
    }
    // Agent-type abbreviations unfold to the tuple-argument forms.
    if (t.base == "PROCEDURE") {
        if (!(t.args.size() == 1 && t.args[0].base == "TUPLE")) {
            TypeRef tup("TUPLE");
            tup.args = std::move(t.args);
            t.args.clear();
            t.args.push_back(std::move(tup));
        }
    } else if (t.base == "FUNCTION") {
        if (t.args.empty()) {
            report("VTUG", "FUNCTION needs at least a result type", pos);
            return false;
        }
        if (!(t.args.size() == 2 && t.args[0].base == "TUPLE")) {
            TypeRef res = std::move(t.args.back());
            t.args.pop_back();
            TypeRef tup("TUPLE");
            tup.args = std::move(t.args);
            t.args.clear();
            t.args.push_back(std::move(tup));
            t.args.push_back(std::move(res));
        }
    }
    const FlatClass* fc = u_.flat_of(t.base);
    if (!fc) {
        report("VTCT", "unknown class " + t.base, pos);
        return false;
    }
    if (t.base != "TUPLE" && t.args.size() != fc->formals.size()) {
        std::ostringstream os;
        os << t.base << " takes " << fc->formals.size() << " generic argument"
           << (fc->formals.size() == 1 ? "" : "s") << ", got " << t.args.size();
        report("VTUG", os.str(), pos);
        return false;
    }
    if (is_basic_type(t.base) && t.detachable) {
        report("VTCT", "basic type " + t.base + " is always attached", pos);
        t.detachable = false;
    }
    bool ok = true;
    for (auto& a : t.args) ok = resolve_type(a, cls, pos) && ok;
    return ok;
}

bool Checker::conforms(const TypeRef& t, const TypeRef& u) const {
    if (!t.valid() || !u.valid()) return false;
    if (t.base == "NONE") return u.detachable || u.base == "NONE";
    if (t.detachable && !u.detachable) return false;
    if (t.separate && !u.separate) return false;
    return conforms_base(t, u);
}

bool Checker::conforms_base(const TypeRef& t, const TypeRef& u) const {
    if (u.base == "ANY") return true;
    if (t.base == u.base) {
        if (t.base == "TUPLE") {
            // Width-prefix rule: a longer tuple conforms to a shorter one.
            if (u.args.size() > t.args.size()) return false;
            for (size_t i = 0; i < u.args.size(); ++i)
                if (!conforms(t.args[i], u.args[i])) return false;
            return true;
        }
        if (t.base == "PROCEDURE")
            return t.args.size() == 1 && u.args.size() == 1 && conforms(u.args[0], t.args[0]);
        if (t.base == "FUNCTION")
            return t.args.size() == 2 && u.args.size() == 2 &&
                   conforms(u.args[0], t.args[0]) && conforms(t.args[1], u.args[1]);
        return t.args == u.args;  // invariant generics
    }
    const FlatClass* fc = u_.flat_of(t.base);
    if (!fc) return false;
    Subst s = formal_map(*fc, t);
    for (const auto& p : fc->parents)
        if (conforms_base(substituted(p, s), u)) return true;
    return false;
}

std::optional<ConversionRoute> Checker::converts_to(const TypeRef& t, const TypeRef& u,
                                                    const SourcePos& pos, bool do_report) {
    if (!t.valid() || !u.valid() || t.base == "NONE") return std::nullopt;
    std::vector<ConversionRoute> routes;
    if (const FlatClass* fu = u_.flat_of(u.base)) {
        Subst s = formal_map(*fu, u);
        for (const auto& cs : fu->converts) {
            if (!cs.from) continue;
            for (const auto& src : cs.types)
                if (conforms(t, substituted(src, s))) {
                    routes.push_back({fu->name, cs.name, true, u.as_attached()});
                    break;
                }
        }
    }
    if (const FlatClass* ft = u_.flat_of(t.base)) {
        Subst s = formal_map(*ft, t);
        for (const auto& cs : ft->converts) {
            if (cs.from || cs.types.empty()) continue;
            TypeRef tgt = substituted(cs.types[0], s);
            if (conforms(tgt, u)) routes.push_back({ft->name, cs.name, false, tgt});
        }
    }
    if (routes.empty()) return std::nullopt;
    if (routes.size() > 1) {
        if (do_report)
            report("VNCA",
                   "two conversion routes from " + t.to_string() + " to " + u.to_string() +
                       " (via " + routes[0].class_name + "." + routes[0].feature + " and " +
                       routes[1].class_name + "." + routes[1].feature + ")",
                   pos);
        return std::nullopt;
    }
    return routes[0];
}

// ---------------------------------------------------------------------------
// The expression/instruction typer. One instance per checked class.
// ---------------------------------------------------------------------------

struct ScopeVar {
    TypeRef type;
    std::string cursor;       // iteration variables: name of the cursor local
    TypeRef cursor_type;
};

struct Typer {
    Checker& ck;
    Universe& u;
    FlatClass& cls;
    FeatureEntry* entry = nullptr;  // null when typing the invariant
    FeatureDecl* decl = nullptr;

    enum class Where { Body, Rescue, Pre, Post, Inv };
    Where where = Where::Body;
    bool register_olds = false;
    bool in_old = false;
    int fresh_counter = 0;
    std::vector<std::map<std::string, ScopeVar>> scopes;

    Typer(Checker& c, Universe& un, FlatClass& fc) : ck(c), u(un), cls(fc) {}

    void report(const std::string& code, const std::string& msg, const SourcePos& pos) {
        ck.report(code, msg, pos);
    }

    TypeRef self_type() const {
        TypeRef t(cls.name);
        for (const auto& f : cls.formals) t.args.emplace_back(f);
        return t;
    }

    bool in_contract() const {
        return where == Where::Pre || where == Where::Post || where == Where::Inv;
    }

    const FlatClass* flat_for(const TypeRef& t) const {
        if (const FlatClass* fc = u.flat_of(t.base)) return fc;
        // formal generic: unconstrained, so its interface is ANY's
        if (std::find(cls.formals.begin(), cls.formals.end(), t.base) != cls.formals.end())
            return u.flat_of("ANY");
        return nullptr;
    }

    bool exported_to_us(const FeatureEntry& fe) const {
        if (fe.export_all) return true;
        for (const auto& x : fe.export_to)
            if (x == cls.name || cls.ancestors.count(x)) return true;
        return false;
    }

    // --- scopes -----------------------------------------------------------

    ScopeVar* find_scope(const std::string& n) {
        for (auto it = scopes.rbegin(); it != scopes.rend(); ++it)
            if (auto f = it->find(n); f != it->end()) return &f->second;
        return nullptr;
    }

    bool name_taken(const std::string& n) const {
        if (cls.find(n)) return true;
        if (decl) {
            for (const auto& [fn, ft] : decl->formals)
                if (fn == n) return true;
            for (const auto& [ln, lt] : decl->locals)
                if (ln == n) return true;
        }
        for (const auto& fr : scopes)
            if (fr.count(n)) return true;
        return false;
    }

    void declare(const std::string& n, ScopeVar v, const SourcePos& pos) {
        if (name_taken(n))
            report("VRLE", n + " is already the name of a feature or entity in scope", pos);
        scopes.back()[n] = std::move(v);
    }

    std::string fresh_name(const std::string& base) {
        std::string n = base;
        while (name_taken(n)) n = base + "_" + std::to_string(++fresh_counter);
        return n;
    }

    // --- small node builders (produce already-typed core forms) ------------

    ExprPtr mk_name(const std::string& n, const TypeRef& t, const SourcePos& pos) {
        auto e = make_expr(ExprKind::Name, pos);
        e->name = n;
        e->res = NameRes::Local;
        e->static_type = t;
        return e;
    }

    ExprPtr mk_call(ExprPtr target, const std::string& n, std::vector<ExprPtr> args,
                    const TypeRef& t, const SourcePos& pos) {
        auto e = make_expr(ExprKind::Call, pos);
        e->target = std::move(target);
        e->name = n;
        e->args = std::move(args);
        e->res = NameRes::Feature;
        e->static_type = t;
        return e;
    }

    InstrPtr mk_assign(ExprPtr lhs, ExprPtr rhs, const SourcePos& pos) {
        auto in = make_instr(InstrKind::Assign, pos);
        in->lhs = std::move(lhs);
        in->rhs = std::move(rhs);
        return in;
    }

    InstrPtr mk_call_instr(ExprPtr call, const SourcePos& pos) {
        auto in = make_instr(InstrKind::CallInstr, pos);
        in->call = std::move(call);
        return in;
    }

    // --- conversions --------------------------------------------------------

    // Makes x acceptable where `want` is expected: true when it conforms, or a
    // unique conversion route exists (x is then wrapped in a ConvertApply).
    bool fit(ExprPtr& x, const TypeRef& want) {
        const TypeRef& got = x->static_type;
        if (!got.valid() || !want.valid()) return true;  // error already reported
        if (ck.conforms(got, want)) return true;
        auto route = ck.converts_to(got, want, x->pos, true);
        if (!route) return false;
        auto conv = make_expr(ExprKind::ConvertApply, x->pos);
        conv->name = route->feature;
        conv->type = route->target;
        conv->text = route->from ? "from" : "to";
        conv->conversion_is_builtin =
            is_basic_type(got.base) && is_basic_type(route->target.base);
        conv->static_type = route->target;
        conv->args.push_back(std::move(x));
        x = std::move(conv);
        return true;
    }

    // --- feature application helpers ---------------------------------------

    void ifree_guard(const FeatureEntry& fe, const SourcePos& pos) {
        if (!entry || !entry->instance_free) return;
        if (fe.decl->body_kind == BodyKind::Constant) return;
        if (fe.decl->body_kind == BodyKind::Attribute)
            report("VIFC",
                   "instance-free feature " + entry->final_name + " may not reference attribute " +
                       fe.final_name,
                   pos);
        else if (!fe.instance_free)
            report("VIFC",
                   "instance-free feature " + entry->final_name +
                       " may only call instance-free features, not " + fe.final_name,
                   pos);
    }

    // Argument checking with the agent-call abbreviation: a single-formal
    // feature of PROCEDURE/FUNCTION expecting a tuple accepts unwrapped
    // arguments, which get wrapped into a manifest tuple.
    void check_args(Expr& e, const FeatureDecl& fd, const Subst& s, bool agent_class) {
        for (auto& a : e.args) type_expr(a, false);
        if (agent_class && fd.formals.size() == 1) {
            TypeRef want = substituted(fd.formals[0].second, s);
            if (want.base == "TUPLE") {
                bool direct = e.args.size() == 1 && ck.conforms(e.args[0]->static_type, want);
                TypeRef wrapped("TUPLE");
                for (const auto& a : e.args) wrapped.args.push_back(a->static_type);
                bool viable_wrapped = ck.conforms(wrapped, want);
                if (direct && viable_wrapped && e.args[0]->static_type.base == "TUPLE") {
                    report("VAGC",
                           "ambiguous agent call: the argument is viable both as the "
                           "argument tuple and as its single element; write an explicit "
                           "tuple",
                           e.pos);
                    return;
                }
                if (!direct) {
                    auto tup = make_expr(ExprKind::TupleLit, e.pos);
                    tup->args = std::move(e.args);
                    tup->static_type = wrapped;
                    e.args.clear();
                    e.args.push_back(std::move(tup));
                    if (!viable_wrapped)
                        report("VUAR", "agent call arguments do not fit " + want.to_string(),
                               e.pos);
                }
                return;
            }
        }
        if (e.args.size() != fd.formals.size()) {
            std::ostringstream os;
            os << fd.name << " takes " << fd.formals.size() << " argument"
               << (fd.formals.size() == 1 ? "" : "s") << ", got " << e.args.size();
            report("VUAR", os.str(), e.pos);
            return;
        }
        for (size_t i = 0; i < e.args.size(); ++i) {
            TypeRef want = substituted(fd.formals[i].second, s);
            if (!fit(e.args[i], want))
                report("VUAR",
                       "argument " + std::to_string(i + 1) + " of " + fd.name + ": " +
                           e.args[i]->static_type.to_string() +
                           " neither conforms nor converts to " + want.to_string(),
                       e.args[i]->pos);
        }
    }

    // Looks up an operator alias in the flat table of `t`.
    const FeatureEntry* find_alias(const TypeRef& t, const std::string& op, size_t arity) {
        const FlatClass* fc = flat_for(t);
        if (!fc) return nullptr;
        for (const auto& [n, fe] : fc->table) {
            if (fe.decl->formals.size() != arity) continue;
            for (const auto& a : fe.decl->aliases)
                if (a == op) return &fe;
        }
        return nullptr;
    }

    // Element type of an iterable: the generic argument of its cursor.
    TypeRef element_type(const TypeRef& seq, const SourcePos& pos) {
        const FlatClass* fc = flat_for(seq);
        const FeatureEntry* nc = fc ? fc->find("new_cursor") : nullptr;
        if (!nc || !nc->decl->result) {
            if (seq.valid())
                report("VUEX", seq.to_string() + " is not iterable (no new_cursor feature)",
                       pos);
            return {};
        }
        TypeRef ct = substituted(*nc->decl->result, formal_map(*fc, seq));
        if (ct.base == "ITERATION_CURSOR" && ct.args.size() == 1) return ct.args[0];
        return {};
    }

    // ------------------------------------------------------------------
    // Expressions. Returns the static type; rewrites sugar in place.
    // `stmt` is true only for the top node of a call instruction.
    // ------------------------------------------------------------------
    TypeRef type_expr(ExprPtr& e, bool stmt) {
        TypeRef t = type_expr_inner(e, stmt);
        e->static_type = t;
        return t;
    }

    TypeRef type_expr_inner(ExprPtr& e, bool stmt) {
        switch (e->kind) {
            case ExprKind::IntLit: return integer_type();
            case ExprKind::RealLit: return TypeRef("REAL");
            case ExprKind::StringLit: return TypeRef("STRING");
            case ExprKind::CharLit: return TypeRef("CHARACTER");
            case ExprKind::BoolLit: return boolean_type();
            case ExprKind::VoidLit: {
                TypeRef t("NONE");
                t.detachable = true;
                return t;
            }
            case ExprKind::Current:
                if (entry && entry->instance_free)
                    report("VIFC",
                           "instance-free feature " + entry->final_name +
                               " may not reference Current",
                           e->pos);
                return self_type();
            case ExprKind::ResultVar: {
                if (in_old) {
                    report("VAOX", "old expression may not involve Result", e->pos);
                    return {};
                }
                bool ok = decl && decl->result &&
                          (where == Where::Body || where == Where::Post ||
                           where == Where::Rescue);
                if (!ok) {
                    report("VEEN", "Result is only available in a function's body, "
                                   "postcondition or rescue clause",
                           e->pos);
                    return {};
                }
                return *decl->result;
            }
            case ExprKind::RetryVar:
                if (!decl || !decl->has_rescue) {
                    report("VEEN", "Retry is only available in a routine with a rescue clause",
                           e->pos);
                    return {};
                }
                return integer_type();
            case ExprKind::Name: return type_name(e, stmt);
            case ExprKind::Call: return type_call(e, stmt);
            case ExprKind::NonObject: return type_non_object(*e, stmt);
            case ExprKind::Binary: return type_binary(e);
            case ExprKind::Unary: return type_unary(e);
            case ExprKind::Bracket: return type_bracket(e);
            case ExprKind::TupleLit: {
                TypeRef t("TUPLE");
                for (auto& a : e->args) t.args.push_back(type_expr(a, false));
                return t;
            }
            case ExprKind::Agent: return type_agent(*e);
            case ExprKind::Old: {
                if (where != Where::Post || in_old) {
                    report("VAOX", "old expression appears only in a postcondition", e->pos);
                }
                in_old = true;
                TypeRef t = type_expr(e->args[0], false);
                in_old = false;
                if (register_olds && entry && where == Where::Post) {
                    e->old_id = static_cast<int>(entry->old_nodes.size());
                    entry->old_nodes.push_back(e.get());
                }
                return t;
            }
            case ExprKind::AttachedTest: {
                TypeRef t = type_expr(e->args[0], false);
                TypeRef bt;
                if (e->type.valid()) {
                    ck.resolve_type(e->type, cls, e->pos);
                    bt = e->type.as_attached();
                } else {
                    bt = t.as_attached();
                    if (bt.base == "NONE") bt = {};
                }
                if (!e->name.empty() && !scopes.empty())
                    declare(e->name, {bt, "", {}}, e->pos);
                return boolean_type();
            }
            case ExprKind::QuantAll:
            case ExprKind::QuantSome: return type_quantifier(e);
            case ExprKind::CursorIndex: {
                ScopeVar* sv = find_scope(e->name);
                if (!sv || sv->cursor.empty()) {
                    report("VEEN", "@" + e->name + " is only valid inside the across scope "
                                                   "introducing " + e->name,
                           e->pos);
                    return integer_type();
                }
                ExprPtr cur = mk_name(sv->cursor, sv->cursor_type, e->pos);
                e = mk_call(std::move(cur), "index", {}, integer_type(), e->pos);
                return integer_type();
            }
            case ExprKind::CreateExpr: return type_creation_expr(*e);
            case ExprKind::Equal:
            case ExprKind::NotEqual:
            case ExprKind::TildeEq:
            case ExprKind::TildeNeq:
                type_expr(e->args[0], false);
                type_expr(e->args[1], false);
                return boolean_type();
            case ExprKind::AndThen:
            case ExprKind::Implies: {
                // object tests certified on the left stay visible on the right
                size_t mark = scopes.empty() ? 0 : scopes.back().size();
                bool priv = e->kind == ExprKind::Implies;
                if (priv) scopes.emplace_back();
                require_boolean(e->args[0], "left operand");
                require_boolean(e->args[1], "right operand");
                if (priv) scopes.pop_back();
                (void)mark;
                return boolean_type();
            }
            case ExprKind::OrElse: {
                scopes.emplace_back();
                require_boolean(e->args[0], "left operand");
                scopes.pop_back();
                scopes.emplace_back();
                require_boolean(e->args[1], "right operand");
                scopes.pop_back();
                return boolean_type();
            }
            case ExprKind::ClassMarker:
                report("VIFC", "`class` marker is only valid as a whole postcondition clause",
                       e->pos);
                return boolean_type();
            case ExprKind::ConvertApply:
                // already core (idempotent re-run)
                return e->static_type.valid() ? e->static_type : e->type;
            case ExprKind::LoopExpr:
                // built fully typed by the unfolder
                return e->static_type.valid() ? e->static_type : boolean_type();
        }
        return {};
    }

    void require_boolean(ExprPtr& e, const std::string& what) {
        TypeRef t = type_expr(e, false);
        if (t.valid() && !is_boolean(t))
            report("VWBE", what + " must be BOOLEAN, not " + t.to_string(), e->pos);
    }

    TypeRef type_name(ExprPtr& e, bool stmt) {
        if (!in_old) {
            if (ScopeVar* sv = find_scope(e->name)) {
                if (!sv->cursor.empty()) {
                    // iteration variable: denotes the element under the cursor
                    ExprPtr cur = mk_name(sv->cursor, sv->cursor_type, e->pos);
                    TypeRef t = sv->type;
                    e = mk_call(std::move(cur), "item", {}, t, e->pos);
                    return t;
                }
                e->res = NameRes::ObjectTestLocal;
                return sv->type;
            }
            if (decl && (where == Where::Body || where == Where::Rescue)) {
                for (const auto& [n, t] : decl->locals)
                    if (n == e->name) {
                        e->res = NameRes::Local;
                        return t;
                    }
            }
        }
        if (decl)
            for (const auto& [n, t] : decl->formals)
                if (n == e->name) {
                    e->res = NameRes::Arg;
                    return t;
                }
        if (const FeatureEntry* fe = cls.find(e->name)) {
            e->res = NameRes::Feature;
            ifree_guard(*fe, e->pos);
            if (!fe->decl->formals.empty()) {
                report("VUAR",
                       fe->final_name + " takes " + std::to_string(fe->decl->formals.size()) +
                           " arguments",
                       e->pos);
                return {};
            }
            if (!fe->decl->result) {
                if (!stmt)
                    report("VKCN", fe->final_name + " is a command and has no value", e->pos);
                return {};
            }
            if (stmt) report("VKCN", fe->final_name + " is a query, not a command", e->pos);
            return *fe->decl->result;
        }
        report("VEEN", "unknown entity " + e->name +
                           (in_contract() ? " (locals are not visible in contracts)" : ""),
               e->pos);
        return {};
    }

    // Shared validity work for a resolved qualified target. Returns the
    // feature and fills the substitution.
    const FeatureEntry* qualified_lookup(const TypeRef& tt, const std::string& name,
                                         const SourcePos& pos, Subst& s) {
        const FlatClass* fc = flat_for(tt);
        if (!fc) return nullptr;
        const FeatureEntry* fe = fc->find(name);
        if (!fe) {
            report("VUEX", fc->name + " has no feature " + name, pos);
            return nullptr;
        }
        if (!exported_to_us(*fe)) {
            report("VUEX", fc->name + "." + name + " is not exported to " + cls.name, pos);
            return nullptr;
        }
        s = formal_map(*fc, tt);
        return fe;
    }

    // Void-safety and separateness rules for a call target.
    TypeRef check_target(ExprPtr& target) {
        TypeRef tt = type_expr(target, false);
        if (!tt.valid()) return tt;
        if (tt.base == "NONE") {
            report("VUTA", "call on Void", target->pos);
            return {};
        }
        if (tt.detachable) {
            report("VUTA",
                   "call target has detachable type " + tt.to_string() +
                       "; certify it with an object test first",
                   target->pos);
            tt = tt.as_attached();
        }
        if (tt.separate) {
            bool controlled = target->kind == ExprKind::Name && target->res == NameRes::Arg;
            if (!controlled)
                report("VUSC",
                       "separate target must be a formal argument of the enclosing routine "
                       "or a separate-block local",
                       target->pos);
        }
        return tt;
    }

    TypeRef type_call(ExprPtr& e, bool stmt) {
        if (!e->target) return type_unqualified_call(e, stmt);
        TypeRef tt = check_target(e->target);
        if (!tt.valid()) {
            for (auto& a : e->args) type_expr(a, false);
            return {};
        }
        Subst s;
        const FeatureEntry* fe = qualified_lookup(tt, e->name, e->pos, s);
        if (!fe) {
            for (auto& a : e->args) type_expr(a, false);
            return {};
        }
        e->res = NameRes::Feature;
        bool agent_cls = tt.base == "PROCEDURE" || tt.base == "FUNCTION";
        check_args(*e, *fe->decl, s, agent_cls);
        if (!fe->decl->result) {
            if (!stmt)
                report("VKCN", fe->final_name + " is a command and has no value", e->pos);
            return {};
        }
        if (stmt) {
            report("VKCN", fe->final_name + " is a query, not a command", e->pos);
            return {};
        }
        TypeRef rt = substituted(*fe->decl->result, s);
        if (tt.separate && !is_basic_type(rt.base) && rt.base != "NONE") rt.separate = true;
        return rt;
    }

    TypeRef type_unqualified_call(ExprPtr& e, bool stmt) {
        // entity of agent type applied to arguments: doer (x) ≡ doer.call ([x])
        TypeRef et;
        bool is_entity = false;
        if (ScopeVar* sv = find_scope(e->name)) {
            is_entity = true;
            et = sv->type;
        } else if (decl && (where == Where::Body || where == Where::Rescue)) {
            for (const auto& [n, t] : decl->locals)
                if (n == e->name) {
                    is_entity = true;
                    et = t;
                }
        }
        if (!is_entity && decl)
            for (const auto& [n, t] : decl->formals)
                if (n == e->name) {
                    is_entity = true;
                    et = t;
                }
        if (is_entity && (et.base == "PROCEDURE" || et.base == "FUNCTION")) {
            auto tgt = make_expr(ExprKind::Name, e->pos);
            tgt->name = e->name;
            e->target = std::move(tgt);
            e->name = et.base == "PROCEDURE" ? "call" : "item";
            return type_call(e, stmt);
        }
        if (is_entity) {
            report("VUAR", e->name + " is not callable with arguments", e->pos);
            for (auto& a : e->args) type_expr(a, false);
            return {};
        }
        const FeatureEntry* fe = cls.find(e->name);
        if (!fe) {
            report("VUEX", cls.name + " has no feature " + e->name, e->pos);
            for (auto& a : e->args) type_expr(a, false);
            return {};
        }
        e->res = NameRes::Feature;
        ifree_guard(*fe, e->pos);
        check_args(*e, *fe->decl, Subst{}, false);
        if (!fe->decl->result) {
            if (!stmt)
                report("VKCN", fe->final_name + " is a command and has no value", e->pos);
            return {};
        }
        if (stmt) {
            report("VKCN", fe->final_name + " is a query, not a command", e->pos);
            return {};
        }
        return *fe->decl->result;
    }

    TypeRef type_non_object(Expr& e, bool stmt) {
        ck.resolve_type(e.type, cls, e.pos);
        const FlatClass* fc = e.type.valid() ? u.flat_of(e.type.base) : nullptr;
        if (!fc) {
            for (auto& a : e.args) type_expr(a, false);
            return {};
        }
        const FeatureEntry* fe = fc->find(e.name);
        if (!fe) {
            report("VUEX", fc->name + " has no feature " + e.name, e.pos);
            return {};
        }
        if (!exported_to_us(*fe)) {
            report("VUEX", fc->name + "." + e.name + " is not exported to " + cls.name, e.pos);
            return {};
        }
        if (!fe->instance_free && fe->decl->body_kind != BodyKind::Constant) {
            report("VIFC",
                   "non-object call: " + fc->name + "." + e.name +
                       " is neither instance-free (postcondition `instance_free: class`) "
                       "nor a constant attribute",
                   e.pos);
        }
        Subst s = formal_map(*fc, e.type);
        check_args(e, *fe->decl, s, false);
        if (!fe->decl->result) {
            if (!stmt) report("VKCN", fe->final_name + " is a command and has no value", e.pos);
            return {};
        }
        if (stmt) {
            report("VKCN", fe->final_name + " is a query, not a command", e.pos);
            return {};
        }
        return substituted(*fe->decl->result, s);
    }

    TypeRef type_binary(ExprPtr& e) {
        TypeRef lt = type_expr(e->args[0], false);
        const FeatureEntry* fe = find_alias(lt, e->name, 1);
        if (!fe) {
            type_expr(e->args[1], false);
            if (lt.valid())
                report("VUEX", "no feature of " + lt.to_string() + " has alias \"" + e->name +
                                   "\" taking one argument",
                       e->pos);
            return {};
        }
        const FlatClass* fc = flat_for(lt);
        Subst s = formal_map(*fc, lt);
        ExprPtr left = std::move(e->args[0]);
        ExprPtr right = std::move(e->args[1]);
        ExprPtr call = mk_call(std::move(left), fe->final_name, {}, {}, e->pos);
        call->args.push_back(std::move(right));
        e = std::move(call);
        check_args(*e, *fe->decl, s, false);
        return fe->decl->result ? substituted(*fe->decl->result, s) : TypeRef{};
    }

    TypeRef type_unary(ExprPtr& e) {
        TypeRef t = type_expr(e->args[0], false);
        const FeatureEntry* fe = find_alias(t, e->name, 0);
        if (!fe) {
            if (t.valid())
                report("VUEX", "no feature of " + t.to_string() + " has alias \"" + e->name +
                                   "\" taking no argument",
                       e->pos);
            return {};
        }
        const FlatClass* fc = flat_for(t);
        Subst s = formal_map(*fc, t);
        ExprPtr operand = std::move(e->args[0]);
        e = mk_call(std::move(operand), fe->final_name, {}, {}, e->pos);
        return fe->decl->result ? substituted(*fe->decl->result, s) : TypeRef{};
    }

    TypeRef type_bracket(ExprPtr& e) {
        TypeRef tt = check_target(e->target);
        const FeatureEntry* fe = tt.valid() ? find_bracket(tt) : nullptr;
        if (!fe) {
            for (auto& a : e->args) type_expr(a, false);
            if (tt.valid())
                report("VUEX", "no feature of " + tt.to_string() + " has a bracket alias",
                       e->pos);
            return {};
        }
        const FlatClass* fc = flat_for(tt);
        Subst s = formal_map(*fc, tt);
        ExprPtr target = std::move(e->target);
        std::vector<ExprPtr> args = std::move(e->args);
        e = mk_call(std::move(target), fe->final_name, std::move(args), {}, e->pos);
        check_args(*e, *fe->decl, s, false);
        return fe->decl->result ? substituted(*fe->decl->result, s) : TypeRef{};
    }

    const FeatureEntry* find_bracket(const TypeRef& t) {
        const FlatClass* fc = flat_for(t);
        if (!fc) return nullptr;
        for (const auto& [n, fe] : fc->table)
            if (fe.decl->has_bracket_alias()) return &fe;
        return nullptr;
    }

    TypeRef type_agent(Expr& e) {
        TypeRef tt;
        if (e.target) {
            tt = check_target(e.target);
        } else {
            tt = self_type();
        }
        if (!tt.valid()) return {};
        Subst s;
        const FeatureEntry* fe = e.target ? qualified_lookup(tt, e.name, e.pos, s)
                                          : cls.find(e.name);
        if (!fe) {
            if (!e.target) report("VUEX", cls.name + " has no feature " + e.name, e.pos);
            return {};
        }
        if (!fe->decl->is_routine()) {
            report("VUEX", "agent wraps a routine; " + fe->final_name + " is not one", e.pos);
            return {};
        }
        if (!e.target) ifree_guard(*fe, e.pos);
        TypeRef tup("TUPLE");
        for (const auto& [n, ft] : fe->decl->formals) tup.args.push_back(substituted(ft, s));
        if (fe->decl->result) {
            TypeRef t("FUNCTION");
            t.args.push_back(std::move(tup));
            t.args.push_back(substituted(*fe->decl->result, s));
            return t;
        }
        TypeRef t("PROCEDURE");
        t.args.push_back(std::move(tup));
        return t;
    }

    TypeRef type_creation_expr(Expr& e) {
        ck.resolve_type(e.type, cls, e.pos);
        check_creation(e.type, e.name, e.args, e.pos);
        return e.type;
    }

    // Shared by creation instructions and expressions.
    void check_creation(const TypeRef& ct, const std::string& proc_name,
                        std::vector<ExprPtr>& args, const SourcePos& pos) {
        if (!ct.valid()) return;
        if (std::find(cls.formals.begin(), cls.formals.end(), ct.base) != cls.formals.end()) {
            report("VGCC", "cannot create an instance of formal generic " + ct.base, pos);
            for (auto& a : args) type_expr(a, false);
            return;
        }
        const FlatClass* fc = u.flat_of(ct.base);
        if (!fc) {
            for (auto& a : args) type_expr(a, false);
            return;
        }
        if (fc->is_deferred()) {
            report("VGCC", fc->name + " is deferred and cannot be a creation type", pos);
            for (auto& a : args) type_expr(a, false);
            return;
        }
        std::string proc = proc_name.empty() ? "default_create" : proc_name;
        const FeatureEntry* fe = fc->find(proc);
        if (!fe) {
            report("VGCC", fc->name + " has no creation procedure " + proc, pos);
            for (auto& a : args) type_expr(a, false);
            return;
        }
        if (std::find(fc->creation.begin(), fc->creation.end(), proc) == fc->creation.end()) {
            report("VGCC", proc + " is not in the creation set of " + fc->name, pos);
        }
        Expr shim(ExprKind::Call, pos);  // reuse argument checking
        shim.name = proc;
        shim.args = std::move(args);
        check_args(shim, *fe->decl, formal_map(*fc, ct), false);
        args = std::move(shim.args);
    }

    TypeRef type_quantifier(ExprPtr& e) {
        bool all = e->kind == ExprKind::QuantAll;
        TypeRef st = type_expr(e->args[0], false);
        TypeRef elem = element_type(st, e->pos);
        std::string cur = fresh_name(e->name + "_cursor");
        TypeRef cur_t("ITERATION_CURSOR", {elem.valid() ? elem : TypeRef("ANY")});
        std::string res = fresh_name(e->name + "_holds");
        scopes.emplace_back();
        declare(e->name, {elem, cur, cur_t}, e->pos);
        require_boolean(e->args[1], "quantifier property");
        scopes.pop_back();

        ExprPtr seq = std::move(e->args[0]);
        ExprPtr pred = std::move(e->args[1]);
        SourcePos pos = e->pos;

        auto le = make_expr(ExprKind::LoopExpr, pos);
        le->loop_locals = {{cur, cur_t}, {res, boolean_type()}};
        le->loop_init.push_back(mk_assign(
            mk_name(cur, cur_t, pos),
            mk_call(std::move(seq), "new_cursor", {}, cur_t, pos), pos));
        auto init_val = make_expr(ExprKind::BoolLit, pos);
        init_val->int_val = all ? 1 : 0;
        init_val->static_type = boolean_type();
        le->loop_init.push_back(
            mk_assign(mk_name(res, boolean_type(), pos), std::move(init_val), pos));
        // all:  until (not result) or else cursor.after
        // some: until result or else cursor.after
        ExprPtr stop;
        if (all)
            stop = mk_call(mk_name(res, boolean_type(), pos), "negated", {}, boolean_type(),
                           pos);
        else
            stop = mk_name(res, boolean_type(), pos);
        auto until = make_expr(ExprKind::OrElse, pos);
        until->args.push_back(std::move(stop));
        until->args.push_back(
            mk_call(mk_name(cur, cur_t, pos), "after", {}, boolean_type(), pos));
        until->static_type = boolean_type();
        le->loop_until = std::move(until);
        le->loop_body.push_back(
            mk_assign(mk_name(res, boolean_type(), pos), std::move(pred), pos));
        le->loop_body.push_back(
            mk_call_instr(mk_call(mk_name(cur, cur_t, pos), "forth", {}, {}, pos), pos));
        le->loop_result = mk_name(res, boolean_type(), pos);
        le->static_type = boolean_type();
        e = std::move(le);
        return boolean_type();
    }

    // ------------------------------------------------------------------
    // Instructions.
    // ------------------------------------------------------------------

    void type_instrs(InstrList& l) {
        for (auto& in : l) type_instr(in);
    }

    void type_instr(InstrPtr& in) {
        scopes.emplace_back();  // object-test certifications live to instruction end
        switch (in->kind) {
            case InstrKind::Assign: type_assign(*in); break;
            case InstrKind::CallInstr: {
                TypeRef t = type_expr(in->call, true);
                (void)t;
                break;
            }
            case InstrKind::Create: type_create(*in); break;
            case InstrKind::If:
                for (auto& b : in->branches) {
                    scopes.emplace_back();
                    require_boolean(b.cond, "if condition");
                    type_instrs(b.body);
                    scopes.pop_back();
                }
                type_instrs(in->else_body);
                break;
            case InstrKind::Inspect: type_inspect(*in); break;
            case InstrKind::Loop:
                type_instrs(in->init);
                for (auto& c : in->invariant_c)
                    if (c.expr) require_boolean(c.expr, "loop invariant clause " + c.tag);
                require_boolean(in->until, "until condition");
                type_instrs(in->body);
                if (in->variant) {
                    TypeRef vt = type_expr(in->variant, false);
                    if (vt.valid() && vt.base != "INTEGER")
                        report("VAVE", "variant must be INTEGER, not " + vt.to_string(),
                               in->variant->pos);
                }
                break;
            case InstrKind::Across: type_across(*in); break;
            case InstrKind::SeparateBlock: type_separate_block(in); break;
            case InstrKind::Check:
                for (auto& c : in->clauses)
                    if (c.expr) require_boolean(c.expr, "check clause " + c.tag);
                break;
        }
        scopes.pop_back();
    }

    void type_assign(Instr& in) {
        // Result / Retry / local / attribute targets keep the Assign form;
        // query targets unfold to assigner calls.
        Expr& lhs = *in.lhs;
        if (lhs.kind == ExprKind::ResultVar || lhs.kind == ExprKind::RetryVar) {
            TypeRef lt = type_expr(in.lhs, false);
            type_expr(in.rhs, false);
            if (!fit(in.rhs, lt))
                report("VJAR",
                       in.rhs->static_type.to_string() + " neither conforms nor converts to " +
                           lt.to_string(),
                       in.rhs->pos);
            return;
        }
        if (lhs.kind == ExprKind::Name) {
            // locals and own attributes are plain assignment targets
            if (ScopeVar* sv = find_scope(lhs.name)) {
                (void)sv;
                report("VJAR", lhs.name + " is a read-only entity here", lhs.pos);
                type_expr(in.rhs, false);
                return;
            }
            bool is_local = false;
            TypeRef lt;
            if (decl)
                for (const auto& [n, t] : decl->locals)
                    if (n == lhs.name) {
                        is_local = true;
                        lt = t;
                    }
            if (is_local) {
                lhs.res = NameRes::Local;
                lhs.static_type = lt;
                type_expr(in.rhs, false);
                if (!fit(in.rhs, lt))
                    report("VJAR",
                           in.rhs->static_type.to_string() +
                               " neither conforms nor converts to " + lt.to_string(),
                           in.rhs->pos);
                return;
            }
            if (decl)
                for (const auto& [n, t] : decl->formals)
                    if (n == lhs.name) {
                        report("VJAR", "cannot assign to formal argument " + lhs.name, lhs.pos);
                        type_expr(in.rhs, false);
                        return;
                    }
            const FeatureEntry* fe = cls.find(lhs.name);
            if (!fe) {
                report("VEEN", "unknown entity " + lhs.name, lhs.pos);
                type_expr(in.rhs, false);
                return;
            }
            if (fe->decl->body_kind == BodyKind::Attribute) {
                lhs.res = NameRes::Feature;
                lt = *fe->decl->result;
                lhs.static_type = lt;
                type_expr(in.rhs, false);
                if (!fit(in.rhs, lt))
                    report("VJAR",
                           in.rhs->static_type.to_string() +
                               " neither conforms nor converts to " + lt.to_string(),
                           in.rhs->pos);
                return;
            }
            if (fe->decl->body_kind == BodyKind::Constant) {
                report("VBAC", "cannot assign to constant attribute " + lhs.name, lhs.pos);
                type_expr(in.rhs, false);
                return;
            }
            // query target: unqualified assigner call  q := e  ≡  setter (e)
            rewrite_assigner_call(in, nullptr, *fe, {}, lhs.pos);
            return;
        }
        if (lhs.kind == ExprKind::Bracket) {
            TypeRef tt = check_target(lhs.target);
            const FeatureEntry* fe = tt.valid() ? find_bracket(tt) : nullptr;
            if (!fe) {
                if (tt.valid())
                    report("VUEX", "no feature of " + tt.to_string() + " has a bracket alias",
                           lhs.pos);
                type_expr(in.rhs, false);
                return;
            }
            rewrite_assigner_call(in, &tt, *fe, formal_map(*flat_for(tt), tt), lhs.pos);
            return;
        }
        if (lhs.kind == ExprKind::Call) {
            if (!lhs.target) {
                const FeatureEntry* fe = cls.find(lhs.name);
                if (!fe) {
                    report("VUEX", cls.name + " has no feature " + lhs.name, lhs.pos);
                    type_expr(in.rhs, false);
                    return;
                }
                rewrite_assigner_call(in, nullptr, *fe, {}, lhs.pos);
                return;
            }
            TypeRef tt = check_target(lhs.target);
            Subst s;
            const FeatureEntry* fe =
                tt.valid() ? qualified_lookup(tt, lhs.name, lhs.pos, s) : nullptr;
            if (!fe) {
                type_expr(in.rhs, false);
                return;
            }
            rewrite_assigner_call(in, &tt, *fe, s, lhs.pos);
            return;
        }
        report("VJAR", "not a writable target", lhs.pos);
        type_expr(in.rhs, false);
    }

    // x.q (i, …) := e  →  x.setter (e, i, …); also the unqualified and
    // bracket forms. `tt` null means unqualified (current object).
    void rewrite_assigner_call(Instr& in, const TypeRef* tt, const FeatureEntry& q,
                               const Subst& s, const SourcePos& pos) {
        if (!q.decl->result) {
            report("VBAC", q.final_name + " is a command, not a query", pos);
            type_expr(in.rhs, false);
            return;
        }
        if (q.decl->assigner.empty()) {
            report("VBAC",
                   "assignment to plain query " + q.final_name + " (no `assign` mark)", pos);
            type_expr(in.rhs, false);
            return;
        }
        const FlatClass* fc = tt ? flat_for(*tt) : &cls;
        const FeatureEntry* setter = fc->find(q.decl->assigner);
        if (!setter) {
            report("VBAC", fc->name + " has no assigner " + q.decl->assigner, pos);
            type_expr(in.rhs, false);
            return;
        }
        auto call = make_expr(ExprKind::Call, pos);
        call->name = setter->final_name;
        call->res = NameRes::Feature;
        if (in.lhs->target) call->target = std::move(in.lhs->target);
        call->args.push_back(std::move(in.rhs));
        for (auto& a : in.lhs->args) call->args.push_back(std::move(a));
        for (auto& a : call->args) type_expr(a, false);
        check_args_typed(*call, *setter->decl, s, pos);
        in.kind = InstrKind::CallInstr;
        in.call = std::move(call);
        in.lhs.reset();
        in.rhs.reset();
    }

    // check_args for already-typed arguments (used by the assigner rewrite).
    void check_args_typed(Expr& e, const FeatureDecl& fd, const Subst& s,
                          const SourcePos& pos) {
        if (e.args.size() != fd.formals.size()) {
            report("VBAC",
                   "assigner " + fd.name + " takes " + std::to_string(fd.formals.size()) +
                       " arguments, need " + std::to_string(e.args.size()),
                   pos);
            return;
        }
        for (size_t i = 0; i < e.args.size(); ++i) {
            TypeRef want = substituted(fd.formals[i].second, s);
            if (!fit(e.args[i], want))
                report("VUAR",
                       "argument " + std::to_string(i + 1) + " of " + fd.name + ": " +
                           e.args[i]->static_type.to_string() +
                           " neither conforms nor converts to " + want.to_string(),
                       e.args[i]->pos);
        }
    }

    void type_create(Instr& in) {
        // target entity
        TypeRef tt;
        Expr& tgt = *in.target;
        if (tgt.kind == ExprKind::ResultVar) {
            tt = type_expr(in.target, false);
        } else if (tgt.kind == ExprKind::Name) {
            bool found = false;
            if (decl)
                for (const auto& [n, t] : decl->locals)
                    if (n == tgt.name) {
                        tgt.res = NameRes::Local;
                        tt = t;
                        found = true;
                    }
            if (!found && decl)
                for (const auto& [n, t] : decl->formals)
                    if (n == tgt.name) {
                        report("VGCC", "creation target may not be a formal argument",
                               tgt.pos);
                        return;
                    }
            if (!found) {
                if (const FeatureEntry* fe = cls.find(tgt.name);
                    fe && fe->decl->body_kind == BodyKind::Attribute) {
                    tgt.res = NameRes::Feature;
                    tt = *fe->decl->result;
                    found = true;
                }
            }
            if (!found) {
                report("VGCC", "creation target must be a local, Result or an attribute",
                       tgt.pos);
                return;
            }
            tgt.static_type = tt;
        } else {
            report("VGCC", "creation target must be a local, Result or an attribute",
                   tgt.pos);
            return;
        }
        TypeRef ct = tt;
        if (in.has_type) {
            ck.resolve_type(in.type, cls, in.pos);
            ct = in.type;
            if (ct.valid() && tt.valid() && !ck.conforms(ct.as_attached(), tt.as_detachable()))
                report("VGCC",
                       "creation type " + ct.to_string() + " does not conform to the "
                       "target's type " + tt.to_string(),
                       in.pos);
        }
        check_creation(ct.as_attached(), in.name, in.args, in.pos);
    }

    void type_inspect(Instr& in) {
        TypeRef st = type_expr(in.lhs, false);
        bool ok_subject = st.valid() && (st.base == "INTEGER" || st.base == "CHARACTER" ||
                                         st.base == "STRING");
        if (st.valid() && !ok_subject)
            report("VOMB", "inspect subject must be INTEGER, CHARACTER or STRING, not " +
                               st.to_string(),
                   in.lhs->pos);
        for (auto& w : in.whens) {
            for (auto& v : w.values) {
                bool constant = v->kind == ExprKind::IntLit || v->kind == ExprKind::CharLit ||
                                v->kind == ExprKind::StringLit;
                if (v->kind == ExprKind::Name) {
                    const FeatureEntry* fe = cls.find(v->name);
                    constant = fe && fe->decl->body_kind == BodyKind::Constant;
                }
                if (!constant)
                    report("VOMB", "when value must be a manifest constant or a constant "
                                   "attribute",
                           v->pos);
                TypeRef vt = type_expr(v, false);
                if (ok_subject && vt.valid() && vt.base != st.base)
                    report("VOMB", "when value type " + vt.to_string() +
                                       " differs from the subject's " + st.to_string(),
                           v->pos);
            }
            type_instrs(w.body);
        }
        type_instrs(in.else_body);
    }

    void type_across(Instr& in) {
        TypeRef st = type_expr(in.lhs, false);
        TypeRef elem = element_type(st, in.pos);
        std::string cur = fresh_name(in.name + "_cursor");
        TypeRef cur_t("ITERATION_CURSOR", {elem.valid() ? elem : TypeRef("ANY")});
        if (decl) decl->locals.emplace_back(cur, cur_t);
        scopes.emplace_back();
        declare(in.name, {elem, cur, cur_t}, in.pos);
        type_instrs(in.body);
        scopes.pop_back();

        SourcePos pos = in.pos;
        ExprPtr seq = std::move(in.lhs);
        in.kind = InstrKind::Loop;
        in.init.push_back(mk_assign(mk_name(cur, cur_t, pos),
                                    mk_call(std::move(seq), "new_cursor", {}, cur_t, pos),
                                    pos));
        in.until = mk_call(mk_name(cur, cur_t, pos), "after", {}, boolean_type(), pos);
        in.body.push_back(
            mk_call_instr(mk_call(mk_name(cur, cur_t, pos), "forth", {}, {}, pos), pos));
        in.name.clear();
        in.lhs.reset();
    }

    // separate a, b as l, r do B end unfolds to a fresh wrapper routine with
    // separate formals plus a call. Names from the enclosing routine used
    // inside the block are captured as extra formals.
    void type_separate_block(InstrPtr& inp) {
        Instr& in = *inp;
        std::vector<TypeRef> ets;
        for (auto& e : in.args) {
            TypeRef t = type_expr(e, false);
            if (t.valid() && !t.separate)
                report("VUSC", "separate-block expression must be of separate type, not " +
                                   t.to_string(),
                       e->pos);
            ets.push_back(t.valid() ? t : TypeRef("ANY"));
        }
        // syntactic capture of enclosing locals/formals referenced in the body
        std::set<std::string> used;
        walk_exprs(in.body, [&](Expr& e) {
            if (e.kind == ExprKind::Name || (e.kind == ExprKind::Call && !e.target))
                used.insert(e.name);
        });
        std::vector<std::pair<std::string, TypeRef>> captured;
        auto is_block_name = [&](const std::string& n) {
            return std::find(in.names.begin(), in.names.end(), n) != in.names.end();
        };
        if (decl) {
            for (const auto& [n, t] : decl->formals)
                if (used.count(n) && !is_block_name(n)) captured.emplace_back(n, t);
            for (const auto& [n, t] : decl->locals)
                if (used.count(n) && !is_block_name(n)) captured.emplace_back(n, t);
        }

        auto wd = std::make_shared<FeatureDecl>();
        wd->name = fresh_name("separate_block_" + std::to_string(++fresh_counter));
        wd->body_kind = BodyKind::Do;
        wd->pos = in.pos;
        for (size_t i = 0; i < in.names.size(); ++i)
            wd->formals.emplace_back(in.names[i], ets[i]);
        for (const auto& [n, t] : captured) wd->formals.emplace_back(n, t);
        wd->instructions = std::move(in.body);

        FeatureEntry we;
        we.final_name = wd->name;
        we.seed_class = cls.name;
        we.seed_name = wd->name;
        we.origin_class = cls.name;
        we.decl = wd;
        we.export_all = false;
        we.export_to = {"NONE"};
        std::string wrapper_name = wd->name;
        cls.table.emplace(wrapper_name, std::move(we));

        auto call = make_expr(ExprKind::Call, in.pos);
        call->name = wd->name;
        call->res = NameRes::Feature;
        call->args = std::move(in.args);
        for (const auto& [n, t] : captured) {
            auto a = make_expr(ExprKind::Name, in.pos);
            a->name = n;
            call->args.push_back(std::move(a));
        }
        SourcePos pos = in.pos;
        inp = mk_call_instr(std::move(call), pos);
        type_expr(inp->call, true);
        // the wrapper's own body is typed by the caller's worklist
    }

    // ------------------------------------------------------------------
    // Clauses.
    // ------------------------------------------------------------------

    void type_clause(Clause& c, Where w) {
        if (c.class_marker) {
            if (w != Where::Post)
                report("VIFC", "`instance_free: class` is only valid as a postcondition "
                               "clause",
                       c.pos);
            return;
        }
        if (!c.expr) return;
        Where saved = where;
        where = w;
        scopes.emplace_back();
        TypeRef t = type_expr(c.expr, false);
        scopes.pop_back();
        where = saved;
        if (t.valid() && !is_boolean(t))
            report("VWBE", "assertion clause " + (c.tag.empty() ? "" : c.tag + " ") +
                               "must be BOOLEAN, not " + t.to_string(),
                   c.pos);
    }
};

namespace {

// Does the clause syntactically contain a qualified call on a separate formal?
bool clause_is_separate(const Clause& c) {
    bool found = false;
    if (!c.expr) return false;
    walk_exprs(*c.expr, [&](Expr& e) {
        if ((e.kind == ExprKind::Call || e.kind == ExprKind::Bracket) && e.target &&
            e.target->kind == ExprKind::Name && e.target->res == NameRes::Arg &&
            e.target->static_type.separate)
            found = true;
    });
    return found;
}

}  // namespace

// ---------------------------------------------------------------------------
// Class-level checks.
// ---------------------------------------------------------------------------

void Checker::check_convert_clauses(FlatClass& cls) {
    TypeRef self(cls.name);
    for (const auto& f : cls.formals) self.args.emplace_back(f);
    for (auto& cs : cls.converts) {
        const FeatureEntry* fe = cls.find(cs.name);
        if (!fe) {
            report("VNCA", cls.name + " has no feature " + cs.name + " for its convert clause",
                   cs.pos);
            continue;
        }
        for (auto& t : cs.types) resolve_type(t, cls, cs.pos);
        if (cs.from) {
            if (fe->decl->result || fe->decl->formals.size() != 1) {
                report("VNCA", "conversion procedure " + cs.name +
                                   " must be a procedure of exactly one argument",
                       cs.pos);
                continue;
            }
            if (std::find(cls.creation.begin(), cls.creation.end(), cs.name) ==
                cls.creation.end())
                report("VNCA", "conversion procedure " + cs.name +
                                   " must be a creation procedure of " + cls.name,
                       cs.pos);
            for (const auto& src : cs.types) {
                if (!conforms(src, fe->decl->formals[0].second))
                    report("VNCA", "conversion source " + src.to_string() +
                                       " does not fit the argument of " + cs.name,
                           cs.pos);
                if (conforms(src, self))
                    report("VNCA", src.to_string() + " both conforms and converts to " +
                                       cls.name + "; a pair of types may not do both",
                           cs.pos);
            }
        } else {
            if (!fe->decl->result || !fe->decl->formals.empty()) {
                report("VNCA", "conversion function " + cs.name +
                                   " must be a query without arguments",
                       cs.pos);
                continue;
            }
            if (cs.types.empty()) continue;
            const TypeRef& tgt = cs.types[0];
            if (!conforms(*fe->decl->result, tgt))
                report("VNCA", "result of " + cs.name + " does not conform to " +
                                   tgt.to_string(),
                       cs.pos);
            if (conforms(self, tgt))
                report("VNCA", cls.name + " both conforms and converts to " + tgt.to_string() +
                                   "; a pair of types may not do both",
                       cs.pos);
        }
    }
    // duplicate routes for the same source type
    std::set<std::string> sources;
    for (const auto& cs : cls.converts) {
        if (!cs.from) continue;
        for (const auto& t : cs.types)
            if (!sources.insert(t.to_string()).second)
                report("VNCA", "two conversion routes from " + t.to_string() + " to " +
                                   cls.name,
                       cs.pos);
    }
}

void Checker::check_assigners(FlatClass& cls) {
    for (auto& [name, fe] : cls.table) {
        const FeatureDecl& d = *fe.decl;
        if (d.assigner.empty()) continue;
        const SourcePos& pos = d.pos;
        if (!d.result) {
            report("VBAC", name + " has an assigner but is not a query", pos);
            continue;
        }
        const FeatureEntry* setter = cls.find(d.assigner);
        if (!setter) {
            report("VBAC", "assigner " + d.assigner + " of " + name + " is not a feature of " +
                               cls.name,
                   pos);
            continue;
        }
        const FeatureDecl& sd = *setter->decl;
        if (sd.result || !sd.is_routine()) {
            report("VBAC", "assigner " + d.assigner + " must be a command", pos);
            continue;
        }
        if (sd.formals.size() != d.formals.size() + 1) {
            report("VBAC", "assigner " + d.assigner + " must take the new value followed by " +
                               name + "'s own arguments",
                   pos);
            continue;
        }
        if (!conforms(*d.result, sd.formals[0].second))
            report("VBAC", "assigner " + d.assigner + "'s first argument does not accept " +
                               name + "'s value type",
                   pos);
    }
}

void Checker::check_redeclaration_marks(FlatClass& cls) {
    for (auto& [name, fe] : cls.table) {
        if (fe.origin_class != cls.name) continue;  // checked at its origin
        bool redecl = fe.seed_class != cls.name;
        const FeatureDecl& d = *fe.decl;
        if (redecl) {
            if (!d.require_c.empty() && !d.require_else)
                report("VDRC", name + " redeclares an inherited feature; use `require else`",
                       d.pos);
            if (!d.ensure_c.empty() && !d.ensure_then)
                report("VDRC", name + " redeclares an inherited feature; use `ensure then`",
                       d.pos);
        } else {
            if (d.require_else)
                report("VDRC", name + " is introduced here; `require else` needs an "
                               "inherited precondition to weaken",
                       d.pos);
            if (d.ensure_then)
                report("VDRC", name + " is introduced here; `ensure then` needs an "
                               "inherited postcondition to strengthen",
                       d.pos);
        }
    }
}

// ---------------------------------------------------------------------------
// Feature-level check + unfold.
// ---------------------------------------------------------------------------

void Checker::check_entry(FlatClass& cls, FeatureEntry& entry) {
    FeatureDecl& d = *entry.decl;
    Typer ty(*this, u_, cls);
    ty.entry = &entry;
    ty.decl = &d;

    for (auto& [n, t] : d.formals) resolve_type(t, cls, d.pos);
    if (d.result) resolve_type(*d.result, cls, d.pos);
    for (auto& [n, t] : d.locals) resolve_type(t, cls, d.pos);

    // entity names may not reuse feature names
    std::set<std::string> seen_names;
    auto check_entity_name = [&](const std::string& n) {
        if (cls.find(n))
            report("VRLE", n + " is already a feature name of " + cls.name, d.pos);
        if (!seen_names.insert(n).second)
            report("VRLE", n + " is declared twice in " + entry.final_name, d.pos);
    };
    for (const auto& [n, t] : d.formals) check_entity_name(n);
    for (const auto& [n, t] : d.locals) check_entity_name(n);

    if (d.body_kind == BodyKind::Constant && d.const_value) {
        TypeRef vt = ty.type_expr(d.const_value, false);
        if (d.result && vt.valid() && !conforms(vt, *d.result))
            report("VJAR", "constant value does not conform to " + d.result->to_string(),
                   d.pos);
    }

    if (d.body_kind == BodyKind::Do || d.body_kind == BodyKind::Once) {
        ty.where = Typer::Where::Body;
        ty.type_instrs(d.instructions);
        if (d.has_rescue) {
            ty.where = Typer::Where::Rescue;
            ty.type_instrs(d.rescue_c);
        }
    }

    // The contract chain holds the operative clauses: the declaration's own
    // require/ensure were cloned into its last segment at flattening.
    entry.old_nodes.clear();
    ty.register_olds = true;
    for (auto& seg : entry.chain) {
        for (auto& c : seg->pre) ty.type_clause(c, Typer::Where::Pre);
        for (auto& c : seg->post) ty.type_clause(c, Typer::Where::Post);
        seg->pre_separate_any = false;
        for (auto& c : seg->pre) {
            c.separate_clause = clause_is_separate(c);
            if (c.separate_clause) seg->pre_separate_any = true;
        }
    }
    ty.register_olds = false;

    // Drop the (now redundant) declaration copies so the unfolded program
    // carries exactly one version of every contract.
    d.require_c.clear();
    d.ensure_c.clear();
}

// ---------------------------------------------------------------------------
// Initialization analysis for creation procedures.
// ---------------------------------------------------------------------------

namespace {

struct InitAnalysis {
    Checker& ck;
    const FlatClass& cls;
    std::set<std::string> needed;
    std::map<std::string, std::set<std::string>> memo;
    std::set<std::string> in_progress;

    std::set<std::string> assigns_of(const std::string& proc) {
        if (auto it = memo.find(proc); it != memo.end()) return it->second;
        if (!in_progress.insert(proc).second) return {};
        std::set<std::string> r;
        if (const FeatureEntry* fe = cls.find(proc))
            if (fe->decl->body_kind == BodyKind::Do || fe->decl->body_kind == BodyKind::Once)
                analyze(fe->decl->instructions, r, nullptr);
        in_progress.erase(proc);
        memo[proc] = r;
        return r;
    }

    void analyze(const InstrList& l, std::set<std::string>& assigned,
                 const SourcePos** escape) {
        for (const auto& in : l) analyze(*in, assigned, escape);
    }

    bool uses_current(const Instr& in) const {
        bool found = false;
        walk_exprs(const_cast<Instr&>(in), [&](Expr& e) {
            if (e.kind == ExprKind::Current) found = true;
            if (e.kind == ExprKind::Agent && !e.target) found = true;
        });
        return found;
    }

    void analyze(const Instr& in, std::set<std::string>& assigned,
                 const SourcePos** escape) {
        if (escape && !*escape && uses_current(in)) {
            for (const auto& n : needed)
                if (!assigned.count(n)) {
                    *escape = &in.pos;
                    break;
                }
        }
        switch (in.kind) {
            case InstrKind::Assign:
                if (in.lhs && in.lhs->kind == ExprKind::Name &&
                    in.lhs->res == NameRes::Feature)
                    assigned.insert(in.lhs->name);
                break;
            case InstrKind::Create:
                if (in.target && in.target->kind == ExprKind::Name &&
                    in.target->res == NameRes::Feature)
                    assigned.insert(in.target->name);
                break;
            case InstrKind::CallInstr:
                if (in.call && in.call->kind == ExprKind::Call && !in.call->target) {
                    auto sub = assigns_of(in.call->name);
                    assigned.insert(sub.begin(), sub.end());
                }
                break;
            case InstrKind::If: {
                std::set<std::string> common;
                bool first = true;
                for (const auto& b : in.branches) {
                    std::set<std::string> s = assigned;
                    analyze(b.body, s, escape);
                    if (first) {
                        common = s;
                        first = false;
                    } else {
                        std::set<std::string> inter;
                        std::set_intersection(common.begin(), common.end(), s.begin(), s.end(),
                                              std::inserter(inter, inter.begin()));
                        common = inter;
                    }
                }
                std::set<std::string> s = assigned;
                analyze(in.else_body, s, escape);
                if (first)
                    common = s;
                else {
                    std::set<std::string> inter;
                    std::set_intersection(common.begin(), common.end(), s.begin(), s.end(),
                                          std::inserter(inter, inter.begin()));
                    common = inter;
                }
                assigned = common;
                break;
            }
            case InstrKind::Inspect: {
                std::set<std::string> common;
                bool first = true;
                for (const auto& w : in.whens) {
                    std::set<std::string> s = assigned;
                    analyze(w.body, s, escape);
                    if (first) {
                        common = s;
                        first = false;
                    } else {
                        std::set<std::string> inter;
                        std::set_intersection(common.begin(), common.end(), s.begin(), s.end(),
                                              std::inserter(inter, inter.begin()));
                        common = inter;
                    }
                }
                std::set<std::string> s = assigned;
                analyze(in.else_body, s, escape);
                if (first)
                    common = s;
                else {
                    std::set<std::string> inter;
                    std::set_intersection(common.begin(), common.end(), s.begin(), s.end(),
                                          std::inserter(inter, inter.begin()));
                    common = inter;
                }
                assigned = common;
                break;
            }
            case InstrKind::Loop:
                analyze(in.init, assigned, escape);
                // the loop body may run zero times: no contribution
                break;
            default: break;
        }
    }
};

}  // namespace

void Checker::check_initialization(FlatClass& cls) {
    if (cls.is_deferred()) return;
    InitAnalysis ia{*this, cls, {}, {}, {}};
    for (const auto& [name, fe] : cls.table) {
        const FeatureDecl& d = *fe.decl;
        if (d.body_kind != BodyKind::Attribute || !d.result) continue;
        const TypeRef& t = *d.result;
        if (t.detachable || is_basic_type(t.base)) continue;
        ia.needed.insert(name);
    }
    if (ia.needed.empty()) return;
    for (const auto& proc : cls.creation) {
        const FeatureEntry* fe = cls.find(proc);
        if (!fe || !(fe->decl->body_kind == BodyKind::Do ||
                     fe->decl->body_kind == BodyKind::Once))
            continue;
        std::set<std::string> assigned;
        const SourcePos* escape = nullptr;
        ia.analyze(fe->decl->instructions, assigned, &escape);
        std::string missing;
        for (const auto& n : ia.needed)
            if (!assigned.count(n)) missing += (missing.empty() ? "" : ", ") + n;
        if (!missing.empty())
            report("VEVI",
                   "creation procedure " + proc + " of " + cls.name +
                       " leaves attached attribute(s) unset on some path: " + missing,
                   fe->decl->pos);
        else if (escape)
            report("VEVI",
                   "creation procedure " + proc + " of " + cls.name +
                       " uses Current before every attached attribute is set",
                   *escape);
    }
}

// ---------------------------------------------------------------------------
// Driver.
// ---------------------------------------------------------------------------

void Checker::check_class(FlatClass& cls) {
    check_convert_clauses(cls);
    check_assigners(cls);
    check_redeclaration_marks(cls);

    // worklist: separate-block unfolding may add wrapper features
    std::set<std::string> done;
    bool progress = true;
    while (progress) {
        progress = false;
        std::vector<std::string> pending;
        for (const auto& [n, fe] : cls.table)
            if (!done.count(n)) pending.push_back(n);
        for (const auto& n : pending) {
            done.insert(n);
            progress = true;
            check_entry(cls, cls.table.at(n));
        }
    }

    Typer ty(*this, u_, cls);
    for (auto& ie : cls.invariant) ty.type_clause(*ie.clause, Typer::Where::Inv);

    check_initialization(cls);
}

bool Checker::run() {
    // pass 0: instance-free marking must be global before any body is typed
    for (auto& [cn, fcp] : u_.flats) {
        if (!fcp) continue;
        for (auto& [fn, fe] : fcp->table) {
            fe.instance_free = false;
            for (const auto& c : fe.decl->ensure_c)
                if (c.class_marker) fe.instance_free = true;
            for (const auto& seg : fe.chain)
                for (const auto& c : seg->post)
                    if (c.class_marker) fe.instance_free = true;
        }
    }
    for (auto& [cn, fcp] : u_.flats)
        if (fcp) check_class(*fcp);
    return !has_errors(u_.diagnostics);
}

bool check_universe(Universe& u) {
    if (has_errors(u.diagnostics)) return false;
    if (u.flats.empty() && !flatten_universe(u)) return false;
    Checker c(u);
    return c.run();
}

}  // namespace minie
