#ifndef MINIE_WALK_HPP
#define MINIE_WALK_HPP

#include <functional>

#include "minie/ast.hpp"

namespace minie {

// Pre-order traversal over every expression reachable from the node,
// including contract clauses, loop payloads and nested instructions.
void walk_exprs(Expr& e, const std::function<void(Expr&)>& f);
void walk_exprs(Instr& in, const std::function<void(Expr&)>& f);
void walk_exprs(InstrList& l, const std::function<void(Expr&)>& f);
void walk_exprs(std::vector<Clause>& cs, const std::function<void(Expr&)>& f);
void walk_exprs(FeatureDecl& d, const std::function<void(Expr&)>& f);

// Every TypeRef written in the node (declarations and expressions).
void walk_types(Expr& e, const std::function<void(TypeRef&)>& f);
void walk_types(Instr& in, const std::function<void(TypeRef&)>& f);
void walk_types(FeatureDecl& d, const std::function<void(TypeRef&)>& f);

}  // namespace minie

#endif
