#include "minie/printer.hpp"

#include <sstream>

namespace minie {

namespace {

std::string ind(int n) { return std::string(static_cast<size_t>(n) * 3, ' '); }

// Precedence levels mirror the expression grammar; used to insert the
// minimal parentheses that preserve the tree.
constexpr int kImplies = 1, kOr = 2, kAnd = 3, kComp = 4, kAdd = 5, kMul = 6, kPow = 7,
              kUnary = 8, kPostfix = 9;

int binary_prec(const std::string& op) {
    if (op == "or" || op == "xor") return kOr;
    if (op == "and") return kAnd;
    if (op == "<" || op == ">" || op == "<=" || op == ">=") return kComp;
    if (op == "+" || op == "-") return kAdd;
    if (op == "*" || op == "/" || op == "//" || op == "\\\\") return kMul;
    if (op == "^") return kPow;
    return kComp;  // free operator aliases print at comparison level, parenthesized children
}

int prec(const Expr& e) {
    switch (e.kind) {
        case ExprKind::Implies: return kImplies;
        case ExprKind::OrElse: return kOr;
        case ExprKind::AndThen: return kAnd;
        case ExprKind::Equal:
        case ExprKind::NotEqual:
        case ExprKind::TildeEq:
        case ExprKind::TildeNeq: return kComp;
        case ExprKind::Binary: return binary_prec(e.name);
        case ExprKind::Unary:
        case ExprKind::Old: return kUnary;
        default: return kPostfix;
    }
}

std::string expr_at(const Expr& e, int min_prec) {
    std::string s = print_expr(e);
    if (prec(e) < min_prec) return "(" + s + ")";
    return s;
}

std::string print_real(const Expr& e) {
    if (!e.text.empty()) return e.text;
    std::ostringstream os;
    os << e.real_val;
    std::string s = os.str();
    if (s.find('.') == std::string::npos && s.find('e') == std::string::npos) s += ".0";
    return s;
}

std::string actuals(const std::vector<ExprPtr>& args) {
    if (args.empty()) return "";
    std::string s = " (";
    for (size_t i = 0; i < args.size(); ++i) {
        if (i) s += ", ";
        s += print_expr(*args[i]);
    }
    return s + ")";
}

std::string print_instr(const Instr& in, int indent);

std::string clause_text(const Clause& c) {
    std::string s;
    if (!c.tag.empty()) s += c.tag + ": ";
    if (c.class_marker)
        s += "class";
    else
        s += print_expr(*c.expr);
    return s;
}

}  // namespace

std::string escape_string_lit(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '\n': out += "%N"; break;
            case '\t': out += "%T"; break;
            case '\r': out += "%R"; break;
            case '%': out += "%%"; break;
            case '"': out += "%\""; break;
            default: out += c;
        }
    }
    return out;
}

std::string print_expr(const Expr& e) {
    switch (e.kind) {
        case ExprKind::IntLit: return std::to_string(e.int_val);
        case ExprKind::RealLit: return print_real(e);
        case ExprKind::StringLit: return "\"" + escape_string_lit(e.text) + "\"";
        case ExprKind::CharLit: {
            std::string inner(1, e.char_val);
            if (e.char_val == '\n') inner = "%N";
            else if (e.char_val == '\t') inner = "%T";
            else if (e.char_val == '%') inner = "%%";
            else if (e.char_val == '\'') inner = "%'";
            return "'" + inner + "'";
        }
        case ExprKind::BoolLit: return e.int_val ? "True" : "False";
        case ExprKind::VoidLit: return "Void";
        case ExprKind::Current: return "Current";
        case ExprKind::ResultVar: return "Result";
        case ExprKind::RetryVar: return "Retry";
        case ExprKind::Name: return e.name;
        case ExprKind::Call: {
            std::string s;
            if (e.target) s += expr_at(*e.target, kPostfix) + ".";
            return s + e.name + actuals(e.args);
        }
        case ExprKind::NonObject:
            return "{" + e.type.to_string() + "}." + e.name + actuals(e.args);
        case ExprKind::Binary: {
            int p = binary_prec(e.name);
            bool right_assoc = (e.name == "^");
            std::string l = expr_at(*e.args[0], right_assoc ? p + 1 : p);
            std::string r = expr_at(*e.args[1], right_assoc ? p : p + 1);
            return l + " " + e.name + " " + r;
        }
        case ExprKind::Unary: {
            const std::string& op = e.name;
            std::string sep = (op == "not") ? " " : "";
            return op + sep + expr_at(*e.args[0], kUnary);
        }
        case ExprKind::Bracket: {
            std::string s = expr_at(*e.target, kPostfix) + " [";
            for (size_t i = 0; i < e.args.size(); ++i) {
                if (i) s += ", ";
                s += print_expr(*e.args[i]);
            }
            return s + "]";
        }
        case ExprKind::TupleLit: {
            std::string s = "[";
            for (size_t i = 0; i < e.args.size(); ++i) {
                if (i) s += ", ";
                s += print_expr(*e.args[i]);
            }
            return s + "]";
        }
        case ExprKind::Agent: {
            std::string s = "agent ";
            if (e.target) s += print_expr(*e.target) + ".";
            return s + e.name;
        }
        case ExprKind::Old: return "old " + expr_at(*e.args[0], kUnary);
        case ExprKind::AttachedTest: {
            std::string s = "attached ";
            if (e.type.valid()) s += "{" + e.type.to_string() + "} ";
            s += expr_at(*e.args[0], kUnary);
            if (!e.name.empty()) s += " as " + e.name;
            return s;
        }
        case ExprKind::QuantAll:
        case ExprKind::QuantSome: {
            std::string q = e.kind == ExprKind::QuantAll ? "all" : "some";
            return "across " + print_expr(*e.args[0]) + " as " + e.name + " " + q + " " +
                   print_expr(*e.args[1]) + " end";
        }
        case ExprKind::CursorIndex: return "@" + e.name;
        case ExprKind::CreateExpr: {
            std::string s = "create {" + e.type.to_string() + "}";
            if (!e.name.empty()) s += "." + e.name + actuals(e.args);
            return s;
        }
        case ExprKind::Equal:
            return expr_at(*e.args[0], kComp) + " = " + expr_at(*e.args[1], kComp + 1);
        case ExprKind::NotEqual:
            return expr_at(*e.args[0], kComp) + " /= " + expr_at(*e.args[1], kComp + 1);
        case ExprKind::TildeEq:
            return expr_at(*e.args[0], kComp) + " ~ " + expr_at(*e.args[1], kComp + 1);
        case ExprKind::TildeNeq:
            return expr_at(*e.args[0], kComp) + " /~ " + expr_at(*e.args[1], kComp + 1);
        case ExprKind::AndThen:
            return expr_at(*e.args[0], kAnd) + " and then " + expr_at(*e.args[1], kAnd + 1);
        case ExprKind::OrElse:
            return expr_at(*e.args[0], kOr) + " or else " + expr_at(*e.args[1], kOr + 1);
        case ExprKind::Implies:
            return expr_at(*e.args[0], kImplies + 1) + " implies " + expr_at(*e.args[1], kImplies);
        case ExprKind::ClassMarker: return "class";
        case ExprKind::ConvertApply:  // debug notation: core form, not source syntax
            return "«convert " + e.type.to_string() + "»(" + print_expr(*e.args[0]) + ")";
        case ExprKind::LoopExpr:  // debug notation
            return "«loop-expr»";
    }
    return "«?»";
}

namespace {

std::string print_instr(const Instr& in, int indent) {
    std::string pre = ind(indent);
    switch (in.kind) {
        case InstrKind::Assign:
            return pre + print_expr(*in.lhs) + " := " + print_expr(*in.rhs) + "\n";
        case InstrKind::CallInstr:
            return pre + print_expr(*in.call) + "\n";
        case InstrKind::Create: {
            std::string s = pre + "create ";
            if (in.has_type) s += "{" + in.type.to_string() + "} ";
            s += print_expr(*in.target);
            if (!in.name.empty()) s += "." + in.name + actuals(in.args);
            return s + "\n";
        }
        case InstrKind::If: {
            std::string s;
            for (size_t i = 0; i < in.branches.size(); ++i) {
                s += pre + (i == 0 ? "if " : "elseif ") + print_expr(*in.branches[i].cond) +
                     " then\n";
                s += print_instrs(in.branches[i].body, indent + 1);
            }
            if (!in.else_body.empty()) {
                s += pre + "else\n";
                s += print_instrs(in.else_body, indent + 1);
            }
            return s + pre + "end\n";
        }
        case InstrKind::Inspect: {
            std::string s = pre + "inspect " + print_expr(*in.lhs) + "\n";
            for (const auto& w : in.whens) {
                s += pre + "when ";
                for (size_t i = 0; i < w.values.size(); ++i) {
                    if (i) s += ", ";
                    s += print_expr(*w.values[i]);
                }
                s += " then\n" + print_instrs(w.body, indent + 1);
            }
            if (!in.else_body.empty()) {
                s += pre + "else\n" + print_instrs(in.else_body, indent + 1);
            }
            return s + pre + "end\n";
        }
        case InstrKind::Loop: {
            std::string s = pre + "from\n" + print_instrs(in.init, indent + 1);
            if (!in.invariant_c.empty())
                s += pre + "invariant\n" + print_clauses(in.invariant_c, indent + 1);
            s += pre + "until\n" + ind(indent + 1) + print_expr(*in.until) + "\n";
            s += pre + "loop\n" + print_instrs(in.body, indent + 1);
            if (in.variant) s += pre + "variant\n" + ind(indent + 1) + print_expr(*in.variant) + "\n";
            return s + pre + "end\n";
        }
        case InstrKind::Across: {
            std::string s = pre + "across " + print_expr(*in.lhs) + " as " + in.name + " loop\n";
            s += print_instrs(in.body, indent + 1);
            return s + pre + "end\n";
        }
        case InstrKind::SeparateBlock: {
            std::string s = pre + "separate ";
            for (size_t i = 0; i < in.args.size(); ++i) {
                if (i) s += ", ";
                s += print_expr(*in.args[i]);
            }
            s += " as ";
            for (size_t i = 0; i < in.names.size(); ++i) {
                if (i) s += ", ";
                s += in.names[i];
            }
            s += " do\n" + print_instrs(in.body, indent + 1);
            return s + pre + "end\n";
        }
        case InstrKind::Check: {
            std::string s = pre + "check\n" + print_clauses(in.clauses, indent + 1);
            return s + pre + "end\n";
        }
    }
    return pre + "«?»\n";
}

std::string print_comment_lines(const std::string& comment, int indent) {
    if (comment.empty()) return "";
    std::string out;
    size_t start = 0;
    while (start <= comment.size()) {
        size_t nl = comment.find('\n', start);
        std::string line = comment.substr(start, nl == std::string::npos ? nl : nl - start);
        out += ind(indent) + "-- " + line + "\n";
        if (nl == std::string::npos) break;
        start = nl + 1;
    }
    return out;
}

std::string print_entities(const std::vector<std::pair<std::string, TypeRef>>& ents,
                           const char* sep) {
    std::string s;
    for (size_t i = 0; i < ents.size(); ++i) {
        if (i) s += sep;
        s += ents[i].first + ": " + ents[i].second.to_string();
    }
    return s;
}

}  // namespace

std::string print_instrs(const InstrList& l, int indent) {
    std::string s;
    for (const auto& in : l) s += print_instr(*in, indent);
    return s;
}

std::string print_clauses(const std::vector<Clause>& cs, int indent) {
    std::string s;
    for (const auto& c : cs) s += ind(indent) + clause_text(c) + "\n";
    return s;
}

std::string print_feature(const FeatureDecl& f, int indent) {
    std::string head = ind(indent) + f.name;
    for (const auto& a : f.aliases) head += " alias \"" + a + "\"";
    if (!f.formals.empty()) head += " (" + print_entities(f.formals, "; ") + ")";
    if (f.result) head += ": " + f.result->to_string();
    if (!f.assigner.empty()) head += " assign " + f.assigner;

    bool needs_body_form = f.is_routine() || !f.require_c.empty() || !f.ensure_c.empty();
    if (f.body_kind == BodyKind::Constant)
        return head + " = " + print_expr(*f.const_value) + "\n" +
               print_comment_lines(f.header_comment, indent + 3);
    if (f.body_kind == BodyKind::Attribute && !needs_body_form)
        return head + "\n" + print_comment_lines(f.header_comment, indent + 3);

    std::string s = head + "\n" + print_comment_lines(f.header_comment, indent + 3);
    int bi = indent + 1;
    if (!f.require_c.empty()) {
        s += ind(bi) + (f.require_else ? "require else\n" : "require\n");
        s += print_clauses(f.require_c, bi + 1);
    }
    if (!f.locals.empty()) {
        s += ind(bi) + "local\n";
        for (const auto& l : f.locals) s += ind(bi + 1) + l.first + ": " + l.second.to_string() + "\n";
    }
    switch (f.body_kind) {
        case BodyKind::Do:
            s += ind(bi) + "do\n" + print_instrs(f.instructions, bi + 1);
            break;
        case BodyKind::Once:
            s += ind(bi) + "once";
            if (f.once_key != "PROCESS") s += " (\"" + f.once_key + "\")";
            s += "\n" + print_instrs(f.instructions, bi + 1);
            break;
        case BodyKind::Deferred:
            s += ind(bi) + "deferred\n";
            break;
        case BodyKind::External:
            s += ind(bi) + "external \"" + f.external_name + "\"\n";
            break;
        case BodyKind::Attribute:
            s += ind(bi) + "attribute\n";
            break;
        case BodyKind::Constant:
            break;  // handled above
    }
    if (!f.ensure_c.empty()) {
        s += ind(bi) + (f.ensure_then ? "ensure then\n" : "ensure\n");
        s += print_clauses(f.ensure_c, bi + 1);
    }
    if (f.has_rescue) {
        s += ind(bi) + "rescue\n" + print_instrs(f.rescue_c, bi + 1);
    }
    s += ind(bi) + "end\n";
    return s;
}

std::string print_class(const ClassAst& c) {
    std::string s;
    if (c.deferred_mark) s += "deferred ";
    if (c.frozen_mark) s += "frozen ";
    if (c.expanded_mark) s += "expanded ";
    if (c.once_mark) s += "once ";
    s += "class " + c.name;
    if (!c.formals.empty()) {
        s += " [";
        for (size_t i = 0; i < c.formals.size(); ++i) {
            if (i) s += ", ";
            s += c.formals[i];
        }
        s += "]";
    }
    s += "\n";
    s += print_comment_lines(c.header_comment, 1);
    if (!c.parents.empty()) {
        s += "\ninherit\n";
        for (const auto& p : c.parents) {
            s += ind(1) + p.type.to_string();
            bool adapted = !p.renames.empty() || !p.redefines.empty();
            if (!p.renames.empty()) {
                s += "\n" + ind(2) + "rename\n";
                for (size_t i = 0; i < p.renames.size(); ++i) {
                    s += ind(3) + p.renames[i].first + " as " + p.renames[i].second;
                    s += (i + 1 < p.renames.size()) ? ",\n" : "\n";
                }
            }
            if (!p.redefines.empty()) {
                s += "\n" + ind(2) + "redefine\n" + ind(3);
                for (size_t i = 0; i < p.redefines.size(); ++i) {
                    if (i) s += ", ";
                    s += p.redefines[i];
                }
                s += "\n";
            }
            if (adapted) s += ind(2) + "end\n";
            else s += "\n";
        }
    }
    if (c.create_clause) {
        s += "\ncreate\n" + ind(1);
        for (size_t i = 0; i < c.create_clause->size(); ++i) {
            if (i) s += ", ";
            s += (*c.create_clause)[i];
        }
        s += "\n";
    }
    if (!c.converts.empty()) {
        s += "\nconvert\n";
        for (size_t i = 0; i < c.converts.size(); ++i) {
            const auto& cv = c.converts[i];
            s += ind(1) + cv.name;
            if (cv.from) s += " ({";
            else s += ": {";
            for (size_t k = 0; k < cv.types.size(); ++k) {
                if (k) s += ", ";
                s += cv.types[k].to_string();
            }
            s += cv.from ? "})" : "}";
            s += (i + 1 < c.converts.size()) ? ",\n" : "\n";
        }
    }
    for (const auto& fc : c.feature_clauses) {
        s += "\nfeature";
        if (!fc.export_all) {
            s += " {";
            for (size_t i = 0; i < fc.export_to.size(); ++i) {
                if (i) s += ", ";
                s += fc.export_to[i];
            }
            s += "}";
        }
        s += "\n\n";
        for (const auto& f : fc.features) s += print_feature(*f, 1) + "\n";
    }
    if (!c.invariant_c.empty()) {
        s += "invariant\n" + print_clauses(c.invariant_c, 1) + "\n";
    }
    s += "end\n";
    return s;
}

}  // namespace minie
