#include "minie/runtime.hpp"

#include <algorithm>
#include <cassert>
#include <charconv>
#include <sstream>

namespace minie {

// ---------------------------------------------------------------------------
// Small helpers.
// ---------------------------------------------------------------------------

namespace {

std::string pos_text(const SourcePos& p) { return p.to_string(); }

// RAII depth guard for assertion evaluation (suppresses nested monitoring).
struct DepthGuard {
    int& d;
    explicit DepthGuard(int& depth) : d(depth) { ++d; }
    ~DepthGuard() { --d; }
};

struct ProcSwitch {
    int& slot;
    int saved;
    ProcSwitch(int& s, int to) : slot(s), saved(s) { slot = to; }
    ~ProcSwitch() { slot = saved; }
};

using Subst = std::map<std::string, TypeRef>;

TypeRef substituted_rt(const TypeRef& t, const Subst& s) {
    if (auto it = s.find(t.base); it != s.end() && t.args.empty()) {
        TypeRef r = it->second;
        r.detachable = r.detachable || t.detachable;
        return r;
    }
    TypeRef r = t;
    for (auto& a : r.args) a = substituted_rt(a, s);
    return r;
}

}  // namespace

Machine::Machine(Universe& u, RunConfig cfg) : u_(u), cfg_(std::move(cfg)) {
    if (!cfg_.trace_out) cfg_.trace_out = cfg_.err;
    rng_.seed(cfg_.seed);
    procs_.emplace_back();  // root region / processor 0
}

void Machine::raise(const std::string& type, const std::string& detail,
                    const std::string& where) {
    ExceptionRecord rec;
    rec.type = type;
    rec.detail = detail;
    rec.where = where;
    throw MinieError{std::move(rec)};
}

void Machine::trace(const std::string& line) {
    if (cfg_.trace) *cfg_.trace_out << line << "\n";
}

void Machine::scoop_trace(const std::string& what) {
    bump_step();
    if (cfg_.trace) *cfg_.trace_out << "t=" << step_ << " " << what << "\n";
}

void Machine::bump_step() {
    if (++step_ > cfg_.max_steps)
        raise("timeout", "scheduler exceeded " + std::to_string(cfg_.max_steps) + " steps");
}

const FlatClass* Machine::dynamic_class(const Value& v) const {
    switch (v.k) {
        case Value::K::Int: return u_.flat_of("INTEGER");
        case Value::K::Real: return u_.flat_of("REAL");
        case Value::K::Bool: return u_.flat_of("BOOLEAN");
        case Value::K::Char: return u_.flat_of("CHARACTER");
        case Value::K::Str: return u_.flat_of("STRING");
        case Value::K::Tuple: return u_.flat_of("TUPLE");
        case Value::K::Agent:
            return u_.flat_of(v.ag && v.ag->is_function ? "FUNCTION" : "PROCEDURE");
        case Value::K::Ref: return u_.flat_of(objects_[v.o].type.base);
        case Value::K::Void: return nullptr;
    }
    return nullptr;
}

Value Machine::default_value(const TypeRef& t) const {
    if (t.base == "INTEGER") return Value::make_int(0);
    if (t.base == "REAL") return Value::make_real(0.0);
    if (t.base == "BOOLEAN") return Value::make_bool(false);
    if (t.base == "CHARACTER") return Value::make_char('\0');
    // reference types (and formal generics) start Void; attached ones must be
    // assigned before use — the checker proves it for attributes, the runtime
    // keeps a void-call defense for the rest
    return Value::make_void();
}

int Machine::region_of(const Value& v) const {
    return v.k == Value::K::Ref ? objects_[v.o].region : -1;
}

// ---------------------------------------------------------------------------
// Equality.
// ---------------------------------------------------------------------------

namespace {
bool identity_equal(const Value& a, const Value& b) {
    using K = Value::K;
    if (a.k == K::Void || b.k == K::Void) return a.k == b.k;
    if ((a.k == K::Int || a.k == K::Real) && (b.k == K::Int || b.k == K::Real)) {
        if (a.k == K::Int && b.k == K::Int) return a.i == b.i;
        double av = a.k == K::Int ? static_cast<double>(a.i) : a.r;
        double bv = b.k == K::Int ? static_cast<double>(b.i) : b.r;
        return av == bv;
    }
    if (a.k != b.k) return false;
    switch (a.k) {
        case K::Bool: return a.b == b.b;
        case K::Char: return a.c == b.c;
        case K::Str: return a.s.get() == b.s.get();  // reference identity
        case K::Ref: return a.o == b.o;
        case K::Tuple: return a.tup.get() == b.tup.get();
        case K::Agent: return a.ag.get() == b.ag.get();
        default: return false;
    }
}
}  // namespace

bool Machine::structurally_equal(const Value& a, const Value& b) {
    using K = Value::K;
    if (a.k == K::Void || b.k == K::Void) return a.k == b.k;
    const FlatClass* ca = dynamic_class(a);
    const FlatClass* cb = dynamic_class(b);
    if (!ca || !cb || ca != cb) return false;
    switch (a.k) {
        case K::Int: return a.i == b.i;
        case K::Real: return a.r == b.r;
        case K::Bool: return a.b == b.b;
        case K::Char: return a.c == b.c;
        case K::Str: return *a.s == *b.s;
        case K::Tuple: {
            if (a.tup->size() != b.tup->size()) return false;
            for (size_t i = 0; i < a.tup->size(); ++i)
                if (!structurally_equal((*a.tup)[i], (*b.tup)[i])) return false;
            return true;
        }
        case K::Agent:
            return identity_equal(a.ag->target, b.ag->target) &&
                   a.ag->feature == b.ag->feature;
        case K::Ref: {
            const Obj& oa = objects_[a.o];
            const Obj& ob = objects_[b.o];
            if (oa.type.base != ob.type.base) return false;
            if (oa.fields.size() != ob.fields.size() || oa.seq.size() != ob.seq.size())
                return false;
            for (const auto& [n, v] : oa.fields) {
                auto it = ob.fields.find(n);
                if (it == ob.fields.end() || !structurally_equal(v, it->second)) return false;
            }
            for (size_t i = 0; i < oa.seq.size(); ++i)
                if (!structurally_equal(oa.seq[i], ob.seq[i])) return false;
            return true;
        }
        default: return false;
    }
}

std::string Machine::out_text(const Value& v) {
    using K = Value::K;
    switch (v.k) {
        case K::Void: return "Void";
        case K::Int: return std::to_string(v.i);
        case K::Real: {
            char buf[64];
            auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v.r);
            std::string s(buf, p);
            if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
                s.find("inf") == std::string::npos && s.find("nan") == std::string::npos)
                s += ".0";
            return s;
        }
        case K::Bool: return v.b ? "True" : "False";
        case K::Char: return std::string(1, v.c);
        case K::Str: return *v.s;
        case K::Tuple: {
            std::string s = "[";
            for (size_t i = 0; i < v.tup->size(); ++i) {
                if (i) s += ", ";
                s += out_text((*v.tup)[i]);
            }
            return s + "]";
        }
        case K::Agent:
            return "agent " + (v.ag ? v.ag->feature : std::string("?"));
        case K::Ref: {
            const Obj& o = objects_[v.o];
            return o.type.base + "#" + std::to_string(o.region) + "." +
                   std::to_string(o.serial);
        }
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Dynamic binding.
// ---------------------------------------------------------------------------

const FeatureEntry* Machine::dispatch(const FlatClass& dyn, const FlatClass& stat,
                                      const std::string& name) const {
    const FeatureEntry* fs = stat.find(name);
    const FeatureEntry* fd = dyn.find(name);
    if (fd && (!fs || (fd->seed_class == fs->seed_class && fd->seed_name == fs->seed_name)))
        return fd;
    if (fs) {
        // the descendant may have renamed the feature: match by seed identity
        for (const auto& [n, fe] : dyn.table)
            if (fe.seed_class == fs->seed_class && fe.seed_name == fs->seed_name) return &fe;
        return fs;
    }
    return fd;
}

// ---------------------------------------------------------------------------
// Call entry points.
// ---------------------------------------------------------------------------

Value Machine::call(const Value& target, const FlatClass& stat, const std::string& name,
                    std::vector<Value> args) {
    if (target.is_void())
        raise("void_call", "call of " + name + " on a void target", stat.name + "." + name);
    const FlatClass* dyn = dynamic_class(target);
    const FeatureEntry* fe = dispatch(*dyn, stat, name);
    if (!fe) raise("routine_failure", "no feature " + name + " in " + dyn->name);
    int reg = region_of(target);
    if (reg >= 0 && reg != cur_proc_)
        return submit(target, stat, name, std::move(args), fe->decl->result.has_value());
    return apply_feature(target, *dyn, *fe, std::move(args), true);
}

Value Machine::create_object(const TypeRef& type, const std::string& proc,
                             std::vector<Value> args, bool separate_target) {
    std::string pname = proc.empty() ? "default_create" : proc;
    // expanded basics: the creation procedure's builtin yields the value
    if (is_basic_type(type.base)) {
        const FlatClass* fc = u_.flat_of(type.base);
        const FeatureEntry* fe = fc ? fc->find(pname) : nullptr;
        if (fe && fe->decl->body_kind == BodyKind::External) {
            Frame f;
            f.current = default_value(type);
            f.cls = fc;
            f.fe = fe;
            f.argv = args;
            for (size_t i = 0; i < fe->decl->formals.size() && i < args.size(); ++i)
                f.vars[fe->decl->formals[i].first] = args[i];
            return run_builtin(fe->decl->external_name, f);
        }
        return default_value(type);
    }
    const FlatClass* fc = u_.flat_of(type.base);
    if (!fc) raise("routine_failure", "creation of unknown class " + type.base);
    int region = cur_proc_;
    if (separate_target) {
        region = static_cast<int>(procs_.size());
        procs_.emplace_back();
        procs_.back().id = region;
        scoop_trace("P" + std::to_string(cur_proc_) + " SPAWN P" + std::to_string(region) +
                    " " + type.base);
    }
    ObjId id = static_cast<ObjId>(objects_.size());
    Obj obj;
    obj.type = type.as_attached();
    obj.type.separate = false;
    obj.region = region;
    obj.serial = ++serials_[type.base];
    Subst s;
    for (size_t i = 0; i < fc->formals.size() && i < type.args.size(); ++i)
        s[fc->formals[i]] = type.args[i];
    for (const auto& [n, fe] : fc->table)
        if (fe.decl->body_kind == BodyKind::Attribute && fe.decl->result)
            obj.fields[n] = default_value(substituted_rt(*fe.decl->result, s));
    objects_.push_back(std::move(obj));
    Value ref = Value::make_ref(id);

    const FeatureEntry* fe = fc->find(pname);
    if (!fe) raise("routine_failure", type.base + " has no creation procedure " + pname);
    {
        // the owning processor runs the creation, synchronously
        ProcSwitch sw(cur_proc_, region);
        apply_feature(ref, *fc, *fe, std::move(args), /*qualified=*/true, /*creation=*/true);
    }
    return ref;
}

// ---------------------------------------------------------------------------
// Contracts.
// ---------------------------------------------------------------------------

bool Machine::eval_clause_bool(const Clause& c, Frame& f) {
    if (c.class_marker || !c.expr) return true;  // static claim: vacuously true
    Value v = eval(*c.expr, f);
    return v.truth();
}

namespace {
std::string violation_line(const char* kind, const std::string& where, const Clause& c,
                           const std::string& origin, const char* blamed) {
    std::string tag = c.tag.empty() ? "-" : c.tag;
    return std::string("VIOLATION ") + kind + " " + where + " tag=" + tag +
           " origin=" + origin + " blamed=" + blamed + " at " + pos_text(c.pos);
}
}  // namespace

bool Machine::has_separate_clauses(const FeatureEntry& fe) const {
    for (const auto& seg : fe.chain)
        if (seg->pre_separate_any) return true;
    return false;
}

std::set<int> Machine::reservation_set(const Frame& f) const {
    std::set<int> r;
    const auto& formals = f.fe->decl->formals;
    for (size_t i = 0; i < formals.size() && i < f.argv.size(); ++i) {
        if (!formals[i].second.separate) continue;
        int reg = region_of(f.argv[i]);
        if (reg >= 0 && reg != cur_proc_) r.insert(reg);
    }
    return r;
}

bool Machine::separate_preconditions_hold(Frame& f) {
    DepthGuard g(assertion_depth_);
    for (const auto& seg : f.fe->chain)
        for (const auto& c : seg->pre)
            if (c.separate_clause) {
                try {
                    if (!eval_clause_bool(const_cast<Clause&>(c), f)) return false;
                } catch (MinieError&) {
                    return false;
                }
            }
    return true;
}

void Machine::check_precondition(Frame& f, const std::string& where) {
    const auto& chain = f.fe->chain;
    bool any_clause = false;
    const Clause* first_false = nullptr;
    std::string first_origin;
    DepthGuard g(assertion_depth_);
    for (const auto& seg : chain) {
        bool seg_true = true;
        bool seg_has = false;
        for (const auto& c : seg->pre) {
            if (c.separate_clause) continue;  // wait condition, owned by scoop
            seg_has = true;
            any_clause = true;
            bool ok;
            try {
                ok = eval_clause_bool(const_cast<Clause&>(c), f);
            } catch (MinieError&) {
                ok = false;  // an exception inside an assertion is a violation
            }
            if (!ok) {
                seg_true = false;
                if (!first_false) {
                    first_false = &c;
                    first_origin = seg->origin;
                }
                break;  // first failure in the segment decides it
            }
        }
        if (seg_has && seg_true) return;  // OR composition: one segment suffices
    }
    if (!any_clause) return;
    const Clause& c = first_false ? *first_false : chain.front()->pre.front();
    std::string line = violation_line("precondition", where, c, first_origin, "caller");
    *cfg_.err << line << "\n";
    raise("precondition_violation", line, where);
}

void Machine::check_postcondition(Frame& f, const std::string& where) {
    DepthGuard g(assertion_depth_);
    for (const auto& seg : f.fe->chain) {
        for (const auto& c : seg->post) {
            bool ok;
            try {
                ok = eval_clause_bool(const_cast<Clause&>(c), f);
            } catch (MinieError& e) {
                if (e.rec.from_old) throw;  // App. A1 step 4: surface the marker
                ok = false;
            }
            if (!ok) {
                std::string line =
                    violation_line("postcondition", where, c, seg->origin, "supplier");
                *cfg_.err << line << "\n";
                raise("postcondition_violation", line, where);
            }
        }
    }
}

void Machine::check_invariant(const Value& target, const FlatClass& dyn, const char* phase) {
    if (cfg_.assertions != AssertLevel::All || assertion_depth_ > 0) return;
    if (dyn.invariant.empty() || target.k != Value::K::Ref) return;
    DepthGuard g(assertion_depth_);
    Frame f;
    f.current = target;
    f.cls = &dyn;
    for (const auto& ie : dyn.invariant) {
        bool ok;
        try {
            ok = eval_clause_bool(*ie.clause, f);
        } catch (MinieError&) {
            ok = false;
        }
        if (!ok) {
            std::string where = dyn.name + " (" + phase + ")";
            std::string line =
                violation_line("invariant", where, *ie.clause, ie.origin, "supplier");
            *cfg_.err << line << "\n";
            raise("invariant_violation", line, where);
        }
    }
}

void Machine::capture_old(Frame& f) {
    const auto& nodes = f.fe->old_nodes;
    f.olds.resize(nodes.size());
    DepthGuard g(assertion_depth_);
    for (size_t i = 0; i < nodes.size(); ++i) {
        try {
            f.olds[i].v = eval(*nodes[i]->args[0], f);
            f.olds[i].ok = true;
        } catch (MinieError& e) {
            // step 2: record the event in the associated exception marker
            f.olds[i].marker = std::make_shared<ExceptionRecord>(e.rec);
        }
    }
}

// ---------------------------------------------------------------------------
// Application protocol: contracts + once + rescue/retry around a body.
// ---------------------------------------------------------------------------

Value Machine::apply_feature(const Value& target, const FlatClass& dyn,
                             const FeatureEntry& fe, std::vector<Value> args,
                             bool qualified, bool creation) {
    FeatureDecl& d = *fe.decl;
    std::string where = dyn.name + "." + fe.final_name;

    Frame f;
    f.current = target;
    f.cls = &dyn;
    f.fe = &fe;
    f.argv = std::move(args);
    for (size_t i = 0; i < d.formals.size() && i < f.argv.size(); ++i)
        f.vars[d.formals[i].first] = f.argv[i];

    if (d.body_kind == BodyKind::Constant)
        return d.const_value ? eval(*d.const_value, f) : Value::make_void();

    bool monitoring = assertion_depth_ == 0;
    bool check_pre = monitoring && cfg_.assertions != AssertLevel::None;
    bool check_post = monitoring && cfg_.assertions == AssertLevel::All;

    // SCOOP reservation: hold the processors of separate actuals (S1) and
    // wait until the separate precondition clauses hold under them (S2).
    // These are semantics, not monitoring: they apply at every level.
    std::set<int> rset = reservation_set(f);
    bool reserved = false;
    if (!rset.empty() || (has_separate_clauses(fe) && monitoring)) {
        wait_until(
            [&] {
                if (!try_reserve(cur_proc_, rset)) return false;
                if (!separate_preconditions_hold(f)) {
                    release(cur_proc_, rset);
                    return false;
                }
                return true;
            },
            cur_proc_, rset.empty() ? "S2" : "S1");
        reserved = true;
    }
    struct ReleaseGuard {
        Machine& m;
        int holder;
        const std::set<int>& rs;
        bool active;
        ~ReleaseGuard() {
            if (active) m.release(holder, rs);
        }
    } rel{*this, cur_proc_, rset, reserved};

    // entry invariant for qualified calls on existing objects (a creation
    // checks only at the end: the new object starts outside its invariant)
    if (qualified && !creation && target.k == Value::K::Ref)
        check_invariant(target, dyn, "entry");

    if (check_pre) check_precondition(f, where);

    if (d.body_kind == BodyKind::Attribute) {
        if (target.k != Value::K::Ref)
            raise("routine_failure", "attribute read on a basic value", where);
        Obj& obj = objects_[target.o];
        auto it = obj.fields.find(fe.final_name);
        f.result = it != obj.fields.end() ? it->second : Value::make_void();
        if (check_post && !fe.chain.empty()) {
            capture_old(f);
            check_postcondition(f, where);
        }
        return f.result;
    }

    if (check_post && !fe.old_nodes.empty()) capture_old(f);

    // once gating; per-object stores are reached by id each time, since the
    // body may allocate and move the object table
    std::string once_key;
    bool once_per_object = false;
    if (d.body_kind == BodyKind::Once) {
        once_key = fe.seed_class + "." + fe.seed_name;
        if (d.once_key == "THREAD") once_key += "@P" + std::to_string(cur_proc_);
        once_per_object = d.once_key == "OBJECT" && target.k == Value::K::Ref;
        bool done = once_per_object ? objects_[target.o].once_done.count(once_key) > 0
                                    : once_done_.count(once_key) > 0;
        if (done) {
            trace("ONCE-HIT " + where);
            if (d.result) {
                auto& store =
                    once_per_object ? objects_[target.o].once_values : once_values_;
                return store[once_key];
            }
            return Value::make_void();
        }
    }

    bool routine = d.body_kind == BodyKind::Do || d.body_kind == BodyKind::Once ||
                   d.body_kind == BodyKind::External;
    if (!routine) raise("routine_failure", "deferred feature reached at run time", where);

    for (const auto& [n, t] : d.locals) f.vars[n] = default_value(t);
    if (d.result) f.result = default_value(*d.result);
    f.retry = 0;

    bool user_body = d.body_kind != BodyKind::External;
    if (user_body) trace("ENTER " + where);

    for (;;) {
        try {
            if (d.body_kind == BodyKind::External) {
                Value r = run_builtin(d.external_name, f);
                if (d.result) f.result = r;
            } else {
                exec(d.instructions, f);
            }
            if (check_post) check_postcondition(f, where);
            if (qualified && target.k == Value::K::Ref)
                check_invariant(target, dyn, "exit");
            break;
        } catch (MinieError& e) {
            if (e.rec.type == "deadlock" || e.rec.type == "timeout") throw;
            // externals are leaf primitives: their faults belong to the caller
            if (d.body_kind == BodyKind::External) throw;
            last_exception_ = e.rec.type;
            auto fail = [&](const ExceptionRecord& cause) -> MinieError {
                ExceptionRecord rec;
                rec.type = "routine_failure";
                rec.detail = "failure of " + where;
                rec.where = where;
                rec.original = std::make_shared<ExceptionRecord>(cause);
                return MinieError{std::move(rec)};
            };
            if (!d.has_rescue) {
                if (user_body) trace("FAIL " + e.rec.type);
                throw fail(e.rec);
            }
            try {
                exec(d.rescue_c, f);
            } catch (MinieError& e2) {
                if (e2.rec.type == "deadlock" || e2.rec.type == "timeout") throw;
                if (user_body) trace("FAIL " + e2.rec.type);
                throw fail(e2.rec);
            }
            if (f.retry == 0) {
                if (user_body) trace("FAIL " + e.rec.type);
                throw fail(e.rec);
            }
            // Retry /= 0: re-execute the body; locals, Result and Retry keep
            // their values
        }
    }

    if (d.body_kind == BodyKind::Once) {
        auto& done_set = once_per_object ? objects_[target.o].once_done : once_done_;
        done_set.insert(once_key);
        if (d.result) {
            auto& store = once_per_object ? objects_[target.o].once_values : once_values_;
            store[once_key] = f.result;
        }
    }

    if (user_body) trace("EXIT " + where);
    return f.result;
}

// ---------------------------------------------------------------------------
// Expression evaluation (core forms only; sugar was unfolded by the checker).
// ---------------------------------------------------------------------------

namespace {
Value* find_in_scopes(Frame& f, const std::string& n) {
    for (auto it = f.scopes.rbegin(); it != f.scopes.rend(); ++it)
        if (auto hit = it->find(n); hit != it->end()) return &hit->second;
    return nullptr;
}
}  // namespace

Value Machine::eval(Expr& e, Frame& f) {
    switch (e.kind) {
        case ExprKind::IntLit: return Value::make_int(e.int_val);
        case ExprKind::RealLit: return Value::make_real(e.real_val);
        case ExprKind::StringLit: return Value::make_str(e.text);
        case ExprKind::CharLit: return Value::make_char(e.char_val);
        case ExprKind::BoolLit: return Value::make_bool(e.int_val != 0);
        case ExprKind::VoidLit: return Value::make_void();
        case ExprKind::Current: return f.current;
        case ExprKind::ResultVar: return f.result;
        case ExprKind::RetryVar: return Value::make_int(f.retry);
        case ExprKind::ClassMarker: return Value::make_bool(true);
        case ExprKind::Name: {
            if (Value* sv = find_in_scopes(f, e.name)) return *sv;
            if (auto it = f.vars.find(e.name); it != f.vars.end()) return it->second;
            // feature of the current object
            const FeatureEntry* fe = f.cls ? f.cls->find(e.name) : nullptr;
            if (!fe) raise("routine_failure", "unknown entity " + e.name + " at run time");
            if (fe->decl->body_kind == BodyKind::Attribute) {
                if (f.current.k != Value::K::Ref)
                    raise("routine_failure", "attribute read without an object");
                Obj& obj = objects_[f.current.o];
                auto hit = obj.fields.find(e.name);
                return hit != obj.fields.end() ? hit->second : Value::make_void();
            }
            if (fe->decl->body_kind == BodyKind::Constant)
                return fe->decl->const_value ? eval(*fe->decl->const_value, f)
                                             : Value::make_void();
            return apply_feature(f.current, *f.cls, *fe, {}, false);
        }
        case ExprKind::Call: {
            std::vector<Value> args;
            args.reserve(e.args.size());
            if (!e.target) {
                for (auto& a : e.args) args.push_back(eval(*a, f));
                const FeatureEntry* fe = f.cls ? f.cls->find(e.name) : nullptr;
                if (!fe) raise("routine_failure", "unknown feature " + e.name + " at run time");
                return apply_feature(f.current, *f.cls, *fe, std::move(args), false);
            }
            Value tv = eval(*e.target, f);
            for (auto& a : e.args) args.push_back(eval(*a, f));
            const FlatClass* stat = u_.flat_of(e.target->static_type.base);
            if (!stat) stat = dynamic_class(tv);
            if (!stat)
                raise("void_call", "call of " + e.name + " on a void target");
            return call(tv, *stat, e.name, std::move(args));
        }
        case ExprKind::NonObject: {
            const FlatClass* fc = u_.flat_of(e.type.base);
            if (!fc) raise("routine_failure", "unknown class " + e.type.base);
            const FeatureEntry* fe = fc->find(e.name);
            if (!fe) raise("routine_failure", "unknown feature " + e.name);
            std::vector<Value> args;
            for (auto& a : e.args) args.push_back(eval(*a, f));
            return apply_feature(Value::make_void(), *fc, *fe, std::move(args), false);
        }
        case ExprKind::Equal:
            return Value::make_bool(identity_equal(eval(*e.args[0], f), eval(*e.args[1], f)));
        case ExprKind::NotEqual:
            return Value::make_bool(!identity_equal(eval(*e.args[0], f), eval(*e.args[1], f)));
        case ExprKind::TildeEq:
            return Value::make_bool(
                structurally_equal(eval(*e.args[0], f), eval(*e.args[1], f)));
        case ExprKind::TildeNeq:
            return Value::make_bool(
                !structurally_equal(eval(*e.args[0], f), eval(*e.args[1], f)));
        case ExprKind::AndThen: {
            Value a = eval(*e.args[0], f);
            if (!a.truth()) return Value::make_bool(false);
            return Value::make_bool(eval(*e.args[1], f).truth());
        }
        case ExprKind::OrElse: {
            Value a = eval(*e.args[0], f);
            if (a.truth()) return Value::make_bool(true);
            return Value::make_bool(eval(*e.args[1], f).truth());
        }
        case ExprKind::Implies: {
            Value a = eval(*e.args[0], f);
            if (!a.truth()) return Value::make_bool(true);
            return Value::make_bool(eval(*e.args[1], f).truth());
        }
        case ExprKind::Old: {
            if (e.old_id < 0 || e.old_id >= static_cast<int>(f.olds.size()))
                raise("routine_failure", "old expression without a captured value");
            Frame::OldSlot& slot = f.olds[e.old_id];
            if (slot.marker) {
                ExceptionRecord rec = *slot.marker;  // App. A1 step 4
                rec.from_old = true;
                throw MinieError{std::move(rec)};
            }
            return slot.v;
        }
        case ExprKind::AttachedTest: {
            Value v = eval(*e.args[0], f);
            if (v.is_void()) return Value::make_bool(false);
            if (!e.name.empty()) {
                if (f.scopes.empty()) f.scopes.emplace_back();
                f.scopes.back()[e.name] = v;
            }
            return Value::make_bool(true);
        }
        case ExprKind::TupleLit: {
            auto vals = std::make_shared<std::vector<Value>>();
            for (auto& a : e.args) vals->push_back(eval(*a, f));
            Value v;
            v.k = Value::K::Tuple;
            v.tup = std::move(vals);
            return v;
        }
        case ExprKind::Agent: {
            auto ag = std::make_shared<AgentVal>();
            if (e.target) {
                ag->target = eval(*e.target, f);
                ag->stat_class = e.target->static_type.base;
            } else {
                ag->target = f.current;
                ag->stat_class = f.cls ? f.cls->name : "ANY";
            }
            ag->feature = e.name;
            ag->is_function = e.static_type.base == "FUNCTION";
            Value v;
            v.k = Value::K::Agent;
            v.ag = std::move(ag);
            return v;
        }
        case ExprKind::CreateExpr: {
            std::vector<Value> args;
            for (auto& a : e.args) args.push_back(eval(*a, f));
            TypeRef t = runtime_type(e.type, f);
            return create_object(t, e.name, std::move(args), t.separate);
        }
        case ExprKind::ConvertApply: {
            Value v = eval(*e.args[0], f);
            if (e.conversion_is_builtin) {
                if (v.k == Value::K::Int) return Value::make_real(static_cast<double>(v.i));
                return v;
            }
            if (e.text == "from") {
                TypeRef t = runtime_type(e.type, f);
                return create_object(t, e.name, {v}, false);
            }
            const FlatClass* dc = dynamic_class(v);
            if (!dc) raise("void_call", "conversion of Void");
            return call(v, *dc, e.name, {});
        }
        case ExprKind::LoopExpr: {
            f.scopes.emplace_back();
            for (const auto& [n, t] : e.loop_locals) f.scopes.back()[n] = default_value(t);
            exec(e.loop_init, f);
            while (!eval(*e.loop_until, f).truth()) exec(e.loop_body, f);
            Value r = eval(*e.loop_result, f);
            f.scopes.pop_back();
            return r;
        }
        default: break;
    }
    raise("routine_failure", "sugared expression reached the evaluator (unfolding bug)");
}

// Resolves formal generics in a statically written type against the current
// object's actual generic parameters.
TypeRef Machine::runtime_type(const TypeRef& t, Frame& f) {
    const Obj* obj = f.current.k == Value::K::Ref ? &objects_[f.current.o] : nullptr;
    if (!obj || !f.cls || f.cls->formals.empty()) return t;
    Subst s;
    for (size_t i = 0; i < f.cls->formals.size() && i < obj->type.args.size(); ++i)
        s[f.cls->formals[i]] = obj->type.args[i];
    return substituted_rt(t, s);
}

// ---------------------------------------------------------------------------
// Instructions.
// ---------------------------------------------------------------------------

void Machine::exec(InstrList& l, Frame& f) {
    for (auto& in : l) {
        f.scopes.emplace_back();
        exec_instr(*in, f);
        f.scopes.pop_back();
    }
}

void Machine::exec_instr(Instr& in, Frame& f) {
    switch (in.kind) {
        case InstrKind::Assign: {
            Value v = eval(*in.rhs, f);
            Expr& lhs = *in.lhs;
            if (lhs.kind == ExprKind::ResultVar) {
                f.result = v;
            } else if (lhs.kind == ExprKind::RetryVar) {
                f.retry = v.i;
            } else if (lhs.kind == ExprKind::Name) {
                if (Value* sv = find_in_scopes(f, lhs.name))
                    *sv = v;
                else if (lhs.res == NameRes::Feature)
                    objects_[f.current.o].fields[lhs.name] = v;
                else
                    f.vars[lhs.name] = v;
            } else {
                raise("routine_failure", "bad assignment target at run time");
            }
            return;
        }
        case InstrKind::CallInstr:
            eval(*in.call, f);
            return;
        case InstrKind::Create: {
            std::vector<Value> args;
            for (auto& a : in.args) args.push_back(eval(*a, f));
            TypeRef t = in.has_type ? in.type : in.target->static_type;
            t = runtime_type(t, f);
            bool sep = t.separate || in.target->static_type.separate;
            Value v = create_object(t, in.name, std::move(args), sep);
            Expr& tgt = *in.target;
            if (tgt.kind == ExprKind::ResultVar)
                f.result = v;
            else if (tgt.res == NameRes::Feature)
                objects_[f.current.o].fields[tgt.name] = v;
            else
                f.vars[tgt.name] = v;
            return;
        }
        case InstrKind::If: {
            for (auto& b : in.branches) {
                f.scopes.emplace_back();
                if (eval(*b.cond, f).truth()) {
                    exec(b.body, f);
                    f.scopes.pop_back();
                    return;
                }
                f.scopes.pop_back();
            }
            exec(in.else_body, f);
            return;
        }
        case InstrKind::Inspect: {
            Value subject = eval(*in.lhs, f);
            for (auto& w : in.whens) {
                for (auto& vx : w.values) {
                    Value v = eval(*vx, f);
                    bool match = subject.k == Value::K::Str && v.k == Value::K::Str
                                     ? *subject.s == *v.s
                                     : identity_equal(subject, v);
                    if (match) {
                        exec(w.body, f);
                        return;
                    }
                }
            }
            if (!in.else_body.empty()) {
                exec(in.else_body, f);
                return;
            }
            raise("no_inspect_branch",
                  "inspect value " + out_text(subject) + " matched no branch",
                  f.cls ? f.cls->name : "");
            return;
        }
        case InstrKind::Loop: {
            exec(in.init, f);
            bool monitor = cfg_.assertions == AssertLevel::All && assertion_depth_ == 0;
            auto check_loop_inv = [&] {
                if (!monitor || in.invariant_c.empty()) return;
                DepthGuard g(assertion_depth_);
                for (const auto& c : in.invariant_c) {
                    bool ok;
                    try {
                        ok = eval_clause_bool(const_cast<Clause&>(c), f);
                    } catch (MinieError&) {
                        ok = false;
                    }
                    if (!ok) {
                        std::string line = violation_line(
                            "loop_invariant", f.cls ? f.cls->name : "?", c,
                            f.cls ? f.cls->name : "?", "supplier");
                        *cfg_.err << line << "\n";
                        raise("invariant_violation", line);
                    }
                }
            };
            long long prev_variant = 0;
            bool have_variant = monitor && in.variant != nullptr;
            check_loop_inv();
            if (have_variant) {
                DepthGuard g(assertion_depth_);
                prev_variant = eval(*in.variant, f).i;
                if (prev_variant < 0)
                    raise("loop_variant_violation",
                          "variant is negative on loop entry: " +
                              std::to_string(prev_variant));
            }
            while (!eval(*in.until, f).truth()) {
                exec(in.body, f);
                check_loop_inv();
                if (have_variant) {
                    DepthGuard g(assertion_depth_);
                    long long nv = eval(*in.variant, f).i;
                    if (!(nv < prev_variant && nv >= 0))
                        raise("loop_variant_violation",
                              "variant did not decrease within bounds: " +
                                  std::to_string(prev_variant) + " -> " +
                                  std::to_string(nv));
                    prev_variant = nv;
                }
            }
            return;
        }
        case InstrKind::Check: {
            if (cfg_.assertions != AssertLevel::All || assertion_depth_ > 0) return;
            DepthGuard g(assertion_depth_);
            for (const auto& c : in.clauses) {
                bool ok;
                try {
                    ok = eval_clause_bool(const_cast<Clause&>(c), f);
                } catch (MinieError&) {
                    ok = false;
                }
                if (!ok) {
                    std::string line = violation_line("check", f.cls ? f.cls->name : "?", c,
                                                      f.cls ? f.cls->name : "?", "supplier");
                    *cfg_.err << line << "\n";
                    raise("check_violation", line);
                }
            }
            return;
        }
        default:
            raise("routine_failure", "sugared instruction reached the evaluator");
    }
}

// ---------------------------------------------------------------------------
// Entry point.
// ---------------------------------------------------------------------------

int Machine::run_entry(const std::string& cls, const std::string& proc) {
    auto report = [&](const ExceptionRecord& rec) -> int {
        if (rec.type == "deadlock") {
            *cfg_.err << "DEADLOCK: " << rec.detail << "\n";
            return 3;
        }
        if (rec.type == "timeout") {
            *cfg_.err << "TIMEOUT: " << rec.detail << "\n";
            return 5;
        }
        *cfg_.err << "uncaught exception: " << rec.type;
        if (!rec.where.empty()) *cfg_.err << " in " << rec.where;
        *cfg_.err << "\n";
        const ExceptionRecord* r = rec.original.get();
        while (r) {
            *cfg_.err << "  caused by: " << r->type;
            if (!r->where.empty()) *cfg_.err << " in " << r->where;
            if (!r->detail.empty()) *cfg_.err << " (" << r->detail << ")";
            *cfg_.err << "\n";
            r = r->original.get();
        }
        return 2;
    };
    int code = 0;
    try {
        TypeRef t(cls);
        procs_[0].busy = true;
        create_object(t, proc, {}, false);
        procs_[0].busy = false;
        // drain the asynchronous backlog, acting as processor 0's worker
        for (;;) {
            if (!procs_[0].queue.empty()) {
                Request r = std::move(procs_[0].queue.front());
                procs_[0].queue.pop_front();
                apply_request(std::move(r), 0);
                continue;
            }
            if (quiescent()) break;
            wait_until([&] { return !procs_[0].queue.empty() || quiescent(); }, 0, "");
        }
    } catch (MinieError& e) {
        code = report(e.rec);
    } catch (ScoopShutdown&) {
        code = report(fatal_rec_);
    }
    shutdown_workers();
    return code;
}

}  // namespace minie
