#ifndef MINIE_VALUE_HPP
#define MINIE_VALUE_HPP

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "minie/types.hpp"

namespace minie {

using ObjId = int;

struct AgentVal;

// A runtime value. Basic values are expanded (copied); references, strings,
// tuples and agents carry shared identity.
struct Value {
    enum class K { Void, Int, Real, Bool, Char, Str, Ref, Tuple, Agent };
    K k = K::Void;

    long long i = 0;
    double r = 0.0;
    bool b = false;
    char c = '\0';
    std::shared_ptr<const std::string> s;     // immutable string payload
    ObjId o = -1;
    std::shared_ptr<std::vector<Value>> tup;
    std::shared_ptr<AgentVal> ag;

    static Value make_void() { return {}; }
    static Value make_int(long long v) {
        Value x;
        x.k = K::Int;
        x.i = v;
        return x;
    }
    static Value make_real(double v) {
        Value x;
        x.k = K::Real;
        x.r = v;
        return x;
    }
    static Value make_bool(bool v) {
        Value x;
        x.k = K::Bool;
        x.b = v;
        return x;
    }
    static Value make_char(char v) {
        Value x;
        x.k = K::Char;
        x.c = v;
        return x;
    }
    static Value make_str(std::string v) {
        Value x;
        x.k = K::Str;
        x.s = std::make_shared<const std::string>(std::move(v));
        return x;
    }
    static Value make_ref(ObjId id) {
        Value x;
        x.k = K::Ref;
        x.o = id;
        return x;
    }

    bool is_void() const { return k == K::Void; }
    bool truth() const { return k == K::Bool && b; }
};

// Snapshot taken by an `agent [target.]f` expression.
struct AgentVal {
    Value target;           // snapshot of the target at agent construction
    std::string feature;    // final name in the target's static class
    std::string stat_class; // static class the name was checked against
    bool is_function = false;
};

// One heap object. `type` is the full creation type (generic arguments kept
// so ARRAY [INTEGER] can default-initialize its entries).
struct Obj {
    TypeRef type;
    int region = 0;
    int serial = 0;                          // per-class allocation counter
    std::map<std::string, Value> fields;
    std::vector<Value> seq;                  // LIST/ARRAY backing store
    std::map<std::string, Value> once_values;  // once ("OBJECT") results
    std::set<std::string> once_done;
};

// What went wrong. `type` is one of: precondition_violation,
// postcondition_violation, invariant_violation, check_violation,
// loop_variant_violation, void_call, no_inspect_branch, routine_failure,
// programmer_raised(NAME), arithmetic(KIND), deadlock, timeout.
struct ExceptionRecord {
    std::string type;
    std::string detail;   // human-readable line (violation report, message)
    std::string where;    // class.feature
    std::shared_ptr<ExceptionRecord> original;  // routine_failure chain
    bool ignorable = false;
    bool from_old = false;  // re-raised from an old-expression marker
};

// The carrier used for propagation inside the evaluator.
struct MinieError {
    ExceptionRecord rec;
};

}  // namespace minie

#endif
