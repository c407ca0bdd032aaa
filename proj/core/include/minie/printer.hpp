#ifndef MINIE_PRINTER_HPP
#define MINIE_PRINTER_HPP

#include <string>

#include "minie/ast.hpp"

namespace minie {

// Renders parse trees back to class text. Printing a parsed class and
// reparsing the result yields the same tree (core forms introduced by
// unfolding — LoopExpr, ConvertApply — print in a debug notation only).
std::string print_expr(const Expr& e);
std::string print_instrs(const InstrList& l, int indent);
std::string print_clauses(const std::vector<Clause>& cs, int indent);
std::string print_feature(const FeatureDecl& f, int indent = 1);
std::string print_class(const ClassAst& c);

std::string escape_string_lit(const std::string& s);

}  // namespace minie

#endif
