#include "minie/views.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <vector>

#include "minie/printer.hpp"

namespace minie {

namespace {

std::string ind(int n) { return std::string(static_cast<size_t>(n) * 3, ' '); }

std::string clause_text(const Clause& c) {
    std::string s;
    if (!c.tag.empty()) s += c.tag + ": ";
    s += c.class_marker ? "class" : print_expr(*c.expr);
    return s;
}

std::string comment_lines(const std::string& comment, int indent) {
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

std::string class_header(const FlatClass& cls) {
    std::string s;
    if (cls.deferred_mark) s += "deferred ";
    if (cls.frozen_mark) s += "frozen ";
    if (cls.expanded_mark) s += "expanded ";
    if (cls.once_mark) s += "once ";
    s += "class " + cls.name;
    if (!cls.formals.empty()) {
        s += " [";
        for (size_t i = 0; i < cls.formals.size(); ++i) {
            if (i) s += ", ";
            s += cls.formals[i];
        }
        s += "]";
    }
    s += "\n";
    if (cls.ast) s += comment_lines(cls.ast->header_comment, 1);
    return s;
}

std::string feature_group_header(const std::vector<std::string>& export_to, bool export_all) {
    std::string s = "\nfeature";
    if (!export_all) {
        s += " {";
        for (size_t i = 0; i < export_to.size(); ++i) {
            if (i) s += ", ";
            s += export_to[i];
        }
        s += "}";
    }
    return s + "\n\n";
}

bool secret(bool export_all, const std::vector<std::string>& export_to) {
    if (export_all) return false;
    for (const auto& c : export_to)
        if (c != "NONE") return false;
    return true;
}

// Signature line shared by every view: never betrays attribute vs function
// vs constant, per uniform access.
std::string signature(const std::string& name, const FeatureDecl& d, int indent) {
    std::string s = ind(indent) + name;
    for (const auto& a : d.aliases) s += " alias \"" + a + "\"";
    if (!d.formals.empty()) {
        s += " (";
        for (size_t i = 0; i < d.formals.size(); ++i) {
            if (i) s += "; ";
            s += d.formals[i].first + ": " + d.formals[i].second.to_string();
        }
        s += ")";
    }
    if (d.result) s += ": " + d.result->to_string();
    if (!d.assigner.empty()) s += " assign " + d.assigner;
    return s + "\n";
}

// One feature of the immediate contract view: signature, header comment and
// the class's own contract clauses, nothing else.
std::string contract_feature(const FeatureDecl& d) {
    std::string s = signature(d.name, d, 1) + comment_lines(d.header_comment, 4);
    if (!d.require_c.empty()) {
        s += ind(2) + (d.require_else ? "require else\n" : "require\n");
        s += print_clauses(d.require_c, 3);
    }
    if (!d.ensure_c.empty()) {
        s += ind(2) + (d.ensure_then ? "ensure then\n" : "ensure\n");
        s += print_clauses(d.ensure_c, 3);
    }
    return s;
}

// One feature of the interface view: the whole contract chain, each
// inherited segment annotated with its origin.
std::string interface_feature(const FlatClass& cls, const FeatureEntry& e) {
    std::string s =
        signature(e.final_name, *e.decl, 1) + comment_lines(e.decl->header_comment, 4);
    auto origin_note = [&](const std::string& origin) {
        return origin == cls.name ? std::string() : " -- from " + origin;
    };
    bool first = true;
    for (const auto& seg : e.chain) {
        if (seg->pre.empty()) continue;
        s += ind(2) + (first ? "require" : "require else") + origin_note(seg->origin) + "\n";
        s += print_clauses(seg->pre, 3);
        first = false;
    }
    first = true;
    for (const auto& seg : e.chain) {
        if (seg->post.empty()) continue;
        s += ind(2) + (first ? "ensure" : "ensure then") + origin_note(seg->origin) + "\n";
        s += print_clauses(seg->post, 3);
        first = false;
    }
    return s;
}

// One feature of the flat view: the full declaration with the composed
// contract chain in place of the declared clauses. Contract segments coming
// from ANY are left out (except in ANY itself): the flat text carries no
// inherit clause, so reparsing it re-merges the implicit ANY parent, which
// supplies those same segments again.
std::string flat_feature(const FlatClass& cls, const FeatureEntry& e) {
    const FeatureDecl& d = *e.decl;
    FeatureEntry trimmed = e;
    if (e.seed_class == "ANY" && cls.name != "ANY")
        std::erase_if(trimmed.chain,
                      [](const std::shared_ptr<ContractSeg>& s) { return s->origin == "ANY"; });
    std::vector<std::string> pre = composed_precondition(trimmed);
    std::vector<std::string> post = composed_postcondition(trimmed);

    std::string head = signature(e.final_name, d, 1);
    head.pop_back();  // re-open the line for the constant value
    if (d.body_kind == BodyKind::Constant)
        return head + " = " + print_expr(*d.const_value) + "\n" +
               comment_lines(d.header_comment, 4);
    if (d.body_kind == BodyKind::Attribute && pre.empty() && post.empty())
        return head + "\n" + comment_lines(d.header_comment, 4);

    std::string s = head + "\n" + comment_lines(d.header_comment, 4);
    if (!pre.empty()) {
        s += ind(2) + "require\n";
        for (const auto& line : pre) s += ind(3) + line + "\n";
    }
    if (!d.locals.empty()) {
        s += ind(2) + "local\n";
        for (const auto& [n, t] : d.locals) s += ind(3) + n + ": " + t.to_string() + "\n";
    }
    switch (d.body_kind) {
        case BodyKind::Do:
            s += ind(2) + "do\n" + print_instrs(d.instructions, 3);
            break;
        case BodyKind::Once:
            s += ind(2) + "once";
            if (d.once_key != "PROCESS") s += " (\"" + d.once_key + "\")";
            s += "\n" + print_instrs(d.instructions, 3);
            break;
        case BodyKind::Deferred:
            s += ind(2) + "deferred\n";
            break;
        case BodyKind::External:
            s += ind(2) + "external \"" + d.external_name + "\"\n";
            break;
        case BodyKind::Attribute:
            s += ind(2) + "attribute\n";
            break;
        case BodyKind::Constant:
            break;  // handled above
    }
    if (!post.empty()) {
        s += ind(2) + "ensure\n";
        for (const auto& line : post) s += ind(3) + line + "\n";
    }
    if (d.has_rescue) s += ind(2) + "rescue\n" + print_instrs(d.rescue_c, 3);
    s += ind(2) + "end\n";
    return s;
}

std::string render_create(const std::vector<std::string>& creation) {
    std::string s = "\ncreate\n" + ind(1);
    for (size_t i = 0; i < creation.size(); ++i) {
        if (i) s += ", ";
        s += creation[i];
    }
    return s + "\n";
}

std::string render_converts(const std::vector<ConvertSpec>& converts) {
    if (converts.empty()) return "";
    std::string s = "\nconvert\n";
    for (size_t i = 0; i < converts.size(); ++i) {
        const auto& cv = converts[i];
        s += ind(1) + cv.name;
        s += cv.from ? " ({" : ": {";
        for (size_t k = 0; k < cv.types.size(); ++k) {
            if (k) s += ", ";
            s += cv.types[k].to_string();
        }
        s += cv.from ? "})" : "}";
        s += (i + 1 < converts.size()) ? ",\n" : "\n";
    }
    return s;
}

// The flat table regrouped by export status: the all-clients group first,
// then selective groups; alphabetical final names within each group.
using Groups = std::map<std::vector<std::string>, std::vector<const FeatureEntry*>>;

Groups group_by_export(const FlatClass& cls) {
    Groups g;
    for (const auto& [name, e] : cls.table) {
        std::vector<std::string> key;  // empty = exported to all
        if (!e.export_all) key = e.export_to.empty() ? std::vector<std::string>{"NONE"}
                                                     : e.export_to;
        g[key].push_back(&e);
    }
    return g;
}

std::string render_invariant(const FlatClass& cls, bool annotate) {
    if (cls.invariant.empty()) return "";
    std::string s = "invariant\n";
    std::string last_origin;
    for (const auto& ie : cls.invariant) {
        if (annotate && ie.origin != cls.name && ie.origin != last_origin)
            s += ind(2) + "-- from " + ie.origin + "\n";
        last_origin = ie.origin;
        s += ind(1) + clause_text(*ie.clause) + "\n";
    }
    return s + "\n";
}

}  // namespace

ViewDoc contract_view(const FlatClass& cls, bool include_inherited) {
    ViewDoc doc;
    doc.kind = include_inherited ? ViewKind::Interface : ViewKind::Contract;
    doc.class_name = cls.name;

    std::string s = class_header(cls);

    if (include_inherited) {
        s += render_create(cls.creation);
        s += render_converts(cls.converts);
        for (const auto& [key, entries] : group_by_export(cls)) {
            if (secret(key.empty(), key)) continue;
            s += feature_group_header(key, key.empty());
            for (const FeatureEntry* e : entries) s += interface_feature(cls, *e) + "\n";
        }
        s += render_invariant(cls, true);
        doc.text = s + "end\n";
        return doc;
    }

    const ClassAst& ast = *cls.ast;
    if (!ast.parents.empty()) {
        s += "\ninherit\n";
        for (const auto& p : ast.parents) s += ind(1) + p.type.to_string() + "\n";
    }
    if (ast.create_clause) s += render_create(*ast.create_clause);
    s += render_converts(ast.converts);
    for (const auto& fcl : ast.feature_clauses) {
        if (secret(fcl.export_all, fcl.export_to)) continue;
        std::vector<const FeatureDecl*> fs;
        for (const auto& f : fcl.features) fs.push_back(f.get());
        std::sort(fs.begin(), fs.end(),
                  [](const FeatureDecl* a, const FeatureDecl* b) { return a->name < b->name; });
        s += feature_group_header(fcl.export_to, fcl.export_all);
        for (const FeatureDecl* f : fs) s += contract_feature(*f) + "\n";
    }
    if (!ast.invariant_c.empty())
        s += "invariant\n" + print_clauses(ast.invariant_c, 1) + "\n";
    doc.text = s + "end\n";
    return doc;
}

ViewDoc flat_view(const FlatClass& cls) {
    ViewDoc doc;
    doc.kind = ViewKind::Flat;
    doc.class_name = cls.name;

    std::string s = class_header(cls);
    s += render_create(cls.creation);
    s += render_converts(cls.converts);
    for (const auto& [key, entries] : group_by_export(cls)) {
        s += feature_group_header(key, key.empty());
        for (const FeatureEntry* e : entries) s += flat_feature(cls, *e) + "\n";
    }
    s += render_invariant(cls, false);
    doc.text = s + "end\n";
    return doc;
}

std::string render_html(const ViewDoc& doc) {
    auto escape = [](const std::string& in) {
        std::string out;
        for (char c : in) {
            if (c == '&') out += "&amp;";
            else if (c == '<') out += "&lt;";
            else if (c == '>') out += "&gt;";
            else out += c;
        }
        return out;
    };
    const char* kind = doc.kind == ViewKind::Contract ? "contract view"
                       : doc.kind == ViewKind::Flat   ? "flat view"
                                                      : "interface view";
    std::string s = "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>";
    s += escape(doc.class_name) + " &mdash; " + kind;
    s += "</title>\n<style>\nbody { font-family: sans-serif; margin: 2em; }\n"
         "pre { background: #f6f6f6; padding: 1em; line-height: 1.35; }\n"
         "</style>\n</head>\n<body>\n<h1>";
    s += escape(doc.class_name);
    s += " <small>";
    s += kind;
    s += "</small></h1>\n<pre>";
    s += escape(doc.text);
    s += "</pre>\n</body>\n</html>\n";
    return s;
}

}  // namespace minie
