#ifndef MINIE_MODEL_HPP
#define MINIE_MODEL_HPP

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "minie/ast.hpp"

namespace minie {

// One segment of a feature's contract chain: the clauses contributed by
// one class along the redeclaration history, oldest first.
struct ContractSeg {
    std::string origin;
    std::vector<Clause> pre, post;
    bool pre_separate_any = false;  // set by the checker: some pre clause is a wait condition

    std::shared_ptr<ContractSeg> clone() const;
};

struct FeatureEntry {
    std::string final_name;
    std::string seed_class, seed_name;        // identity of introduction
    std::shared_ptr<FeatureDecl> decl;        // private clone (rename/generics applied)
    std::string origin_class;                 // class supplying the current body
    bool deferred = false;
    bool was_redefined = false;
    std::vector<std::shared_ptr<ContractSeg>> chain;  // oldest first
    bool export_all = true;
    std::vector<std::string> export_to;
    bool instance_free = false;               // set by the checker
    std::vector<Expr*> old_nodes;             // checker-filled: old expressions across the
                                              // chain and own postcondition, capture order

    FeatureEntry clone_deep() const;
};

using FeatureTable = std::map<std::string, FeatureEntry>;

struct InvariantEntry {
    std::string origin;
    std::shared_ptr<Clause> clause;
};

struct FlatClass {
    std::string name;
    bool deferred_mark = false, frozen_mark = false, expanded_mark = false, once_mark = false;
    std::vector<std::string> formals;
    std::vector<TypeRef> parents;             // direct, as declared (plus implicit ANY)
    std::set<std::string> ancestors;          // proper ancestor class names
    FeatureTable table;
    std::vector<InvariantEntry> invariant;    // ancestors' clauses first, each origin once
    std::vector<std::string> creation;        // creation set (default_create when absent)
    bool has_create_clause = false;
    std::vector<ConvertSpec> converts;
    const ClassAst* ast = nullptr;

    bool is_deferred() const;
    const FeatureEntry* find(const std::string& name) const;
};

struct Universe {
    std::map<std::string, const ClassAst*> classes;
    std::map<std::string, std::unique_ptr<FlatClass>> flats;
    Diagnostics diagnostics;

    const FlatClass* flat_of(const std::string& name) const;
};

// σ⁻¹;m — keys renamed, feature identities preserved. Errors (absent name,
// non-injective map) are reported against `pos`.
FeatureTable apply_rename(const FeatureTable& table,
                          const std::vector<std::pair<std::string, std::string>>& renames,
                          const std::string& class_name, const SourcePos& pos,
                          Diagnostics& diags);

// Ψ — right operand wins on clashes.
template <class K, class V>
std::map<K, V> overriding_union(const std::map<K, V>& m, const std::map<K, V>& m2) {
    std::map<K, V> r = m;
    for (const auto& [k, v] : m2) r[k] = v;
    return r;
}

// Flattens one class (and, recursively, its ancestors). Returns nullptr and
// reports diagnostics on model errors.
const FlatClass* flatten_class(Universe& u, const std::string& name);

// Flattens every class in the universe; false iff any model error.
bool flatten_universe(Universe& u);

// Deterministic dump, features sorted by final name. with_origins adds the
// seed/origin annotations (excluded when comparing a class with its flat view).
std::string serialize_flat(const FlatClass& c, bool with_origins);

// Composed contract rendering used by serialization and the views:
// a single-segment chain keeps its clauses; longer chains compose to one
// expression — preconditions OR the segments (or else), postconditions AND
// them. Returns printed clause lines without indentation.
std::vector<std::string> composed_precondition(const FeatureEntry& e);
std::vector<std::string> composed_postcondition(const FeatureEntry& e);

}  // namespace minie

#endif
