#include <cmath>

#include "minie/runtime.hpp"

// Implementations of the `external` ids listed in kernel/BUILTINS.md.

namespace minie {

namespace {

long long as_int(const Value& v) {
    return v.k == Value::K::Real ? static_cast<long long>(v.r) : v.i;
}

double as_real(const Value& v) {
    return v.k == Value::K::Int ? static_cast<double>(v.i) : v.r;
}

[[noreturn]] void arith(Machine& m, const char* kind) {
    m.raise("arithmetic", kind);
}

Value checked(Machine& m, bool overflow, long long r) {
    if (overflow) arith(m, "overflow");
    return Value::make_int(r);
}

long long index_arg(Machine& m, const Value& v, long long count) {
    long long i = as_int(v);
    if (i < 1 || i > count) arith(m, "index_out_of_range");
    return i;
}

Obj& self_obj(Machine& m, Frame& f) { return m.object(f.current.o); }

Value agent_apply(Machine& m, Frame& f) {
    const auto& ag = f.current.ag;
    if (!ag) m.raise("void_call", "call through a void agent");
    if (ag->target.is_void())
        m.raise("void_call", "agent target is void", ag->stat_class + "." + ag->feature);
    std::vector<Value> args;
    if (!f.argv.empty()) {
        const Value& tup = f.argv[0];
        if (tup.k == Value::K::Tuple)
            args = *tup.tup;
        else if (!tup.is_void())
            args.push_back(tup);
    }
    const FlatClass* stat = m.universe().flat_of(ag->stat_class);
    if (!stat) stat = m.dynamic_class(ag->target);
    return m.call(ag->target, *stat, ag->feature, std::move(args));
}

std::map<std::string, Builtin> make_table() {
    std::map<std::string, Builtin> t;

    t["any_same_type"] = [](Machine& m, Frame& f) {
        const FlatClass* a = m.dynamic_class(f.current);
        const FlatClass* b = m.dynamic_class(f.argv.at(0));
        return Value::make_bool(a && b && a == b);
    };
    t["any_out"] = [](Machine& m, Frame& f) { return Value::make_str(m.out_text(f.current)); };
    t["any_copy"] = [](Machine& m, Frame& f) {
        // only reference targets have mutable state to overwrite; basic values
        // and strings are expanded or immutable, so there is nothing to do
        const Value& other = f.argv.at(0);
        if (f.current.k == Value::K::Ref && other.k == Value::K::Ref) {
            Obj& src = m.object(other.o);
            Obj& dst = m.object(f.current.o);
            dst.fields = src.fields;
            dst.seq = src.seq;
        }
        return Value::make_void();
    };

    // INTEGER
    t["integer_plus"] = [](Machine& m, Frame& f) {
        long long r;
        bool o = __builtin_add_overflow(f.current.i, as_int(f.argv[0]), &r);
        return checked(m, o, r);
    };
    t["integer_minus"] = [](Machine& m, Frame& f) {
        long long r;
        bool o = __builtin_sub_overflow(f.current.i, as_int(f.argv[0]), &r);
        return checked(m, o, r);
    };
    t["integer_product"] = [](Machine& m, Frame& f) {
        long long r;
        bool o = __builtin_mul_overflow(f.current.i, as_int(f.argv[0]), &r);
        return checked(m, o, r);
    };
    t["integer_quotient"] = [](Machine& m, Frame& f) {
        double d = as_real(f.argv[0]);
        if (d == 0.0) arith(m, "division_by_zero");
        return Value::make_real(static_cast<double>(f.current.i) / d);
    };
    t["integer_div"] = [](Machine& m, Frame& f) {
        long long d = as_int(f.argv[0]);
        if (d == 0) arith(m, "division_by_zero");
        if (f.current.i == INT64_MIN && d == -1) arith(m, "overflow");
        return Value::make_int(f.current.i / d);
    };
    t["integer_mod"] = [](Machine& m, Frame& f) {
        long long d = as_int(f.argv[0]);
        if (d == 0) arith(m, "division_by_zero");
        if (f.current.i == INT64_MIN && d == -1) return Value::make_int(0);
        return Value::make_int(f.current.i % d);
    };
    t["integer_power"] = [](Machine& m, Frame& f) {
        long long e = as_int(f.argv[0]);
        if (e < 0) arith(m, "negative_exponent");
        long long base = f.current.i, acc = 1;
        while (e > 0) {
            if (e & 1) {
                if (__builtin_mul_overflow(acc, base, &acc)) arith(m, "overflow");
            }
            e >>= 1;
            if (e && __builtin_mul_overflow(base, base, &base)) arith(m, "overflow");
        }
        return Value::make_int(acc);
    };
    t["integer_opposite"] = [](Machine& m, Frame& f) {
        long long r;
        bool o = __builtin_sub_overflow(0LL, f.current.i, &r);
        return checked(m, o, r);
    };
    t["integer_lesser"] = [](Machine&, Frame& f) {
        return Value::make_bool(static_cast<double>(f.current.i) < as_real(f.argv[0]));
    };
    t["integer_to_real"] = [](Machine&, Frame& f) {
        return Value::make_real(static_cast<double>(f.current.i));
    };
    t["integer_out"] = [](Machine&, Frame& f) {
        return Value::make_str(std::to_string(f.current.i));
    };

    // REAL
    t["real_from_integer"] = [](Machine&, Frame& f) {
        return Value::make_real(as_real(f.argv.at(0)));
    };
    t["real_plus"] = [](Machine&, Frame& f) {
        return Value::make_real(f.current.r + as_real(f.argv[0]));
    };
    t["real_minus"] = [](Machine&, Frame& f) {
        return Value::make_real(f.current.r - as_real(f.argv[0]));
    };
    t["real_product"] = [](Machine&, Frame& f) {
        return Value::make_real(f.current.r * as_real(f.argv[0]));
    };
    t["real_quotient"] = [](Machine&, Frame& f) {
        return Value::make_real(f.current.r / as_real(f.argv[0]));
    };
    t["real_opposite"] = [](Machine&, Frame& f) { return Value::make_real(-f.current.r); };
    t["real_lesser"] = [](Machine&, Frame& f) {
        return Value::make_bool(f.current.r < as_real(f.argv[0]));
    };
    t["real_sqrt"] = [](Machine& m, Frame& f) {
        if (f.current.r < 0.0) arith(m, "negative_sqrt");
        return Value::make_real(std::sqrt(f.current.r));
    };
    t["real_truncate"] = [](Machine& m, Frame& f) {
        double d = std::trunc(f.current.r);
        if (!(d >= -9.3e18 && d <= 9.3e18)) arith(m, "overflow");
        return Value::make_int(static_cast<long long>(d));
    };
    t["real_out"] = [](Machine& m, Frame& f) { return Value::make_str(m.out_text(f.current)); };

    // BOOLEAN
    t["boolean_and"] = [](Machine&, Frame& f) {
        return Value::make_bool(f.current.b && f.argv[0].b);
    };
    t["boolean_or"] = [](Machine&, Frame& f) {
        return Value::make_bool(f.current.b || f.argv[0].b);
    };
    t["boolean_xor"] = [](Machine&, Frame& f) {
        return Value::make_bool(f.current.b != f.argv[0].b);
    };
    t["boolean_not"] = [](Machine&, Frame& f) { return Value::make_bool(!f.current.b); };
    t["boolean_out"] = [](Machine&, Frame& f) {
        return Value::make_str(f.current.b ? "True" : "False");
    };

    // CHARACTER
    t["character_lesser"] = [](Machine&, Frame& f) {
        return Value::make_bool(static_cast<unsigned char>(f.current.c) <
                                static_cast<unsigned char>(f.argv[0].c));
    };
    t["character_code"] = [](Machine&, Frame& f) {
        return Value::make_int(static_cast<unsigned char>(f.current.c));
    };
    t["character_out"] = [](Machine&, Frame& f) {
        return Value::make_str(std::string(1, f.current.c));
    };

    // STRING
    t["string_lesser"] = [](Machine&, Frame& f) {
        return Value::make_bool(*f.current.s < *f.argv[0].s);
    };
    t["string_count"] = [](Machine&, Frame& f) {
        return Value::make_int(static_cast<long long>(f.current.s->size()));
    };
    t["string_item"] = [](Machine& m, Frame& f) {
        long long i = index_arg(m, f.argv[0], static_cast<long long>(f.current.s->size()));
        return Value::make_char((*f.current.s)[static_cast<size_t>(i - 1)]);
    };
    t["string_concat"] = [](Machine&, Frame& f) {
        return Value::make_str(*f.current.s + *f.argv[0].s);
    };

    // LIST
    t["list_make"] = [](Machine& m, Frame& f) {
        self_obj(m, f).seq.clear();
        return Value::make_void();
    };
    t["list_count"] = [](Machine& m, Frame& f) {
        return Value::make_int(static_cast<long long>(self_obj(m, f).seq.size()));
    };
    t["list_item"] = [](Machine& m, Frame& f) {
        Obj& o = self_obj(m, f);
        long long i = index_arg(m, f.argv[0], static_cast<long long>(o.seq.size()));
        return o.seq[static_cast<size_t>(i - 1)];
    };
    t["list_put"] = [](Machine& m, Frame& f) {
        Obj& o = self_obj(m, f);
        long long i = index_arg(m, f.argv[1], static_cast<long long>(o.seq.size()));
        o.seq[static_cast<size_t>(i - 1)] = f.argv[0];
        return Value::make_void();
    };
    t["list_extend"] = [](Machine& m, Frame& f) {
        self_obj(m, f).seq.push_back(f.argv[0]);
        return Value::make_void();
    };

    // ARRAY
    t["array_make"] = [](Machine& m, Frame& f) {
        Obj& o = self_obj(m, f);
        long long n = as_int(f.argv[0]);
        if (n < 0) arith(m, "negative_size");
        TypeRef elem = o.type.args.empty() ? TypeRef("ANY") : o.type.args[0];
        o.seq.assign(static_cast<size_t>(n), m.default_value(elem));
        return Value::make_void();
    };
    t["array_count"] = [](Machine& m, Frame& f) {
        return Value::make_int(static_cast<long long>(self_obj(m, f).seq.size()));
    };
    t["array_item"] = [](Machine& m, Frame& f) {
        Obj& o = self_obj(m, f);
        long long i = index_arg(m, f.argv[0], static_cast<long long>(o.seq.size()));
        return o.seq[static_cast<size_t>(i - 1)];
    };
    t["array_put"] = [](Machine& m, Frame& f) {
        Obj& o = self_obj(m, f);
        long long i = index_arg(m, f.argv[1], static_cast<long long>(o.seq.size()));
        o.seq[static_cast<size_t>(i - 1)] = f.argv[0];
        return Value::make_void();
    };

    // TUPLE
    t["tuple_count"] = [](Machine&, Frame& f) {
        return Value::make_int(
            f.current.tup ? static_cast<long long>(f.current.tup->size()) : 0);
    };

    // agents
    t["agent_call"] = [](Machine& m, Frame& f) {
        agent_apply(m, f);
        return Value::make_void();
    };
    t["agent_item"] = [](Machine& m, Frame& f) { return agent_apply(m, f); };

    // IO
    t["io_write"] = [](Machine& m, Frame& f) {
        *m.config().out << *f.argv[0].s;
        return Value::make_void();
    };
    t["io_write_integer"] = [](Machine& m, Frame& f) {
        *m.config().out << f.argv[0].i;
        return Value::make_void();
    };
    t["io_write_real"] = [](Machine& m, Frame& f) {
        *m.config().out << m.out_text(f.argv[0]);
        return Value::make_void();
    };
    t["io_write_boolean"] = [](Machine& m, Frame& f) {
        *m.config().out << (f.argv[0].b ? "True" : "False");
        return Value::make_void();
    };

    // EXCEPTIONS
    t["exceptions_raise"] = [](Machine& m, Frame& f) -> Value {
        std::string msg = f.argv[0].s ? *f.argv[0].s : "";
        m.raise("programmer_raised", msg);
    };
    t["exceptions_last_type"] = [](Machine& m, Frame&) {
        return Value::make_str(m.last_exception_type());
    };

    return t;
}

const std::map<std::string, Builtin>& table() {
    static const std::map<std::string, Builtin> t = make_table();
    return t;
}

}  // namespace

Value Machine::run_builtin(const std::string& id, Frame& f) {
    const auto& t = table();
    auto it = t.find(id);
    if (it == t.end())
        raise("routine_failure", "external \"" + id + "\" has no implementation");
    return it->second(*this, f);
}

bool verify_builtin_bindings(const Universe& u, Diagnostics& diags) {
    const auto& t = table();
    bool ok = true;
    std::set<std::string> seen;
    for (const auto& [cname, fc] : u.flats) {
        for (const auto& [n, fe] : fc->table) {
            if (fe.decl->body_kind != BodyKind::External) continue;
            const std::string& id = fe.decl->external_name;
            if (t.count(id) || !seen.insert(id).second) continue;
            ok = false;
            diags.push_back({"EXTB",
                             "external \"" + id + "\" (" + cname + "." + n +
                                 ") has no registered built-in implementation",
                             fe.decl->pos, Severity::Error});
        }
    }
    return ok;
}

}  // namespace minie
