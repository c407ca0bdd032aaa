#ifndef MINIE_AST_HPP
#define MINIE_AST_HPP

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "minie/common.hpp"
#include "minie/types.hpp"

namespace minie {

struct Expr;
struct Instr;
using ExprPtr = std::unique_ptr<Expr>;
using InstrPtr = std::unique_ptr<Instr>;
using InstrList = std::vector<InstrPtr>;

enum class ExprKind {
    IntLit,
    RealLit,
    StringLit,
    CharLit,
    BoolLit,
    VoidLit,
    Current,
    ResultVar,
    RetryVar,
    Name,          // unresolved identifier (no argument list)
    Call,          // [target.]name (args); target null for unqualified
    NonObject,     // {C}.name (args)
    Binary,        // name = operator text; args[0]=left, args[1]=right (sugar)
    Unary,         // name = operator text; args[0]=operand (sugar)
    Bracket,       // target [args...] (sugar)
    TupleLit,      // [a, b, ...]
    Agent,         // agent [target.]name
    Old,           // old args[0]
    AttachedTest,  // attached args[0] [as name]
    QuantAll,      // across args[0] as name all args[1] end  (sugar)
    QuantSome,     // across args[0] as name some args[1] end (sugar)
    CursorIndex,   // @name (sugar; rewritten to cursor.index)
    CreateExpr,    // create {T}.name (args)
    Equal,         // core: =
    NotEqual,      // core: /=
    TildeEq,       // core: ~
    TildeNeq,      // core: /~
    AndThen,       // core short-circuit boolean forms
    OrElse,
    Implies,
    ClassMarker,   // postcondition marker `class`
    ConvertApply,  // unfold-introduced conversion: args[0] via proc/func `name` to `type`
    LoopExpr,      // unfold-introduced quantifier core form
};

// Resolution of a Name / unqualified Call, set by the checker.
enum class NameRes { Unresolved, Local, Arg, Feature, ObjectTestLocal };

struct Expr {
    ExprKind kind;
    SourcePos pos;

    std::string name;       // identifier / operator text / agent feature / object-test local
    long long int_val = 0;
    double real_val = 0.0;
    std::string text;       // string literal contents
    char char_val = '\0';

    ExprPtr target;          // Call/Bracket/Agent qualified target
    std::vector<ExprPtr> args;
    TypeRef type;            // NonObject / CreateExpr / ConvertApply target type

    NameRes res = NameRes::Unresolved;
    int old_id = -1;         // Old: slot in the frame's old store

    // LoopExpr payload (core form of quantifiers). loop_locals are the
    // synthetic cursor/result variables, scoped to this expression.
    std::vector<std::pair<std::string, TypeRef>> loop_locals;
    InstrList loop_init;
    ExprPtr loop_until;
    InstrList loop_body;
    ExprPtr loop_result;

    // Static type annotation, filled in by the checker.
    TypeRef static_type;
    bool conversion_is_builtin = false;  // ConvertApply between basic types

    explicit Expr(ExprKind k, SourcePos p = {}) : kind(k), pos(std::move(p)) {}
    ExprPtr clone() const;
};

// One assertion clause: optional tag + expression, or the `class` marker.
struct Clause {
    std::string tag;
    ExprPtr expr;            // null iff class marker
    bool class_marker = false;
    bool separate_clause = false;  // classified by the checker (SCOOP wait condition)
    SourcePos pos;

    Clause clone() const;
};

enum class InstrKind {
    Assign,         // lhs := rhs
    CallInstr,      // expression statement (a call)
    Create,         // create [{T}] target[.name (args)]
    If,
    Inspect,
    Loop,           // from ... until ... loop ... end
    Across,         // across lhs as name loop body end (sugar)
    SeparateBlock,  // separate e1, e2 as n1, n2 do body end (sugar)
    Check,
};

struct Instr {
    InstrKind kind;
    SourcePos pos;

    ExprPtr lhs, rhs;        // Assign; Inspect subject in lhs; Across sequence in lhs
    ExprPtr call;            // CallInstr

    // Create:
    bool has_type = false;
    TypeRef type;
    ExprPtr target;          // Name / ResultVar
    std::string name;        // creation procedure (empty: default_create); Across cursor var
    std::vector<ExprPtr> args;

    struct Branch {
        ExprPtr cond;
        std::string objtest_local;  // non-empty for `attached e as n` conditions
        InstrList body;
    };
    std::vector<Branch> branches;   // If (+elseif)
    InstrList else_body;            // If / Inspect else

    struct When {
        std::vector<ExprPtr> values;
        InstrList body;
    };
    std::vector<When> whens;        // Inspect

    InstrList init;                 // Loop from-part
    std::vector<Clause> invariant_c;
    ExprPtr until;
    InstrList body;                 // Loop / Across / SeparateBlock
    ExprPtr variant;

    std::vector<std::string> names; // SeparateBlock local names
    std::vector<Clause> clauses;    // Check

    explicit Instr(InstrKind k, SourcePos p = {}) : kind(k), pos(std::move(p)) {}
    InstrPtr clone() const;
};

enum class BodyKind { Do, Once, Deferred, External, Attribute, Constant };

struct FeatureDecl {
    std::string name;
    std::vector<std::string> aliases;    // operator aliases; "[]" for bracket alias
    std::vector<std::pair<std::string, TypeRef>> formals;
    std::optional<TypeRef> result;
    std::string assigner;                // `assign` mark, empty if none
    std::string header_comment;

    BodyKind body_kind = BodyKind::Attribute;
    std::string once_key;                // PROCESS (default) | THREAD | OBJECT
    std::string external_name;           // external "built_in" id
    ExprPtr const_value;                 // Constant

    std::vector<Clause> require_c;
    bool require_else = false;
    std::vector<Clause> ensure_c;
    bool ensure_then = false;
    std::vector<std::pair<std::string, TypeRef>> locals;
    InstrList instructions;
    InstrList rescue_c;
    bool has_rescue = false;

    SourcePos pos;

    bool is_routine() const {
        return body_kind == BodyKind::Do || body_kind == BodyKind::Once ||
               body_kind == BodyKind::Deferred || body_kind == BodyKind::External;
    }
    bool is_query() const { return result.has_value(); }
    bool has_bracket_alias() const {
        for (auto& a : aliases)
            if (a == "[]") return true;
        return false;
    }
    std::shared_ptr<FeatureDecl> clone() const;
};

struct FeatureClause {
    bool export_all = true;
    std::vector<std::string> export_to;  // when !export_all; may be {"NONE"}
    std::vector<std::shared_ptr<FeatureDecl>> features;
};

struct ParentSpec {
    TypeRef type;
    std::vector<std::pair<std::string, std::string>> renames;  // old -> new
    std::vector<std::string> redefines;
    SourcePos pos;
};

struct ConvertSpec {
    std::string name;
    bool from = false;            // true: creation procedure taking the listed source types
    std::vector<TypeRef> types;   // sources (from) or single target (to)
    SourcePos pos;
};

// Parse tree of one class text.
struct ClassAst {
    bool deferred_mark = false;
    bool frozen_mark = false;
    bool expanded_mark = false;
    bool once_mark = false;
    std::string name;
    std::vector<std::string> formals;  // generic parameter names
    std::vector<ParentSpec> parents;
    std::optional<std::vector<std::string>> create_clause;
    std::vector<ConvertSpec> converts;
    std::vector<FeatureClause> feature_clauses;
    std::vector<Clause> invariant_c;
    std::string header_comment;
    std::string file;
    SourcePos begin_pos, end_pos;
};

ExprPtr make_expr(ExprKind k, SourcePos p = {});
InstrPtr make_instr(InstrKind k, SourcePos p = {});
InstrList clone_instrs(const InstrList& l);
std::vector<Clause> clone_clauses(const std::vector<Clause>& cs);

}  // namespace minie

#endif
