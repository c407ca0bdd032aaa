#include "minie/model.hpp"

#include <algorithm>
#include <functional>

#include "minie/printer.hpp"
#include "minie/walk.hpp"

namespace minie {

namespace {

std::vector<Clause> clone_vec(const std::vector<Clause>& cs) { return clone_clauses(cs); }

}  // namespace

std::shared_ptr<ContractSeg> ContractSeg::clone() const {
    auto s = std::make_shared<ContractSeg>();
    s->origin = origin;
    s->pre = clone_vec(pre);
    s->post = clone_vec(post);
    s->pre_separate_any = pre_separate_any;
    return s;
}

FeatureEntry FeatureEntry::clone_deep() const {
    FeatureEntry e = *this;
    e.decl = decl->clone();
    e.chain.clear();
    for (const auto& s : chain) e.chain.push_back(s->clone());
    return e;
}

bool FlatClass::is_deferred() const {
    for (const auto& [n, e] : table)
        if (e.deferred) return true;
    return false;
}

const FeatureEntry* FlatClass::find(const std::string& n) const {
    auto it = table.find(n);
    return it == table.end() ? nullptr : &it->second;
}

const FlatClass* Universe::flat_of(const std::string& name) const {
    auto it = flats.find(name);
    return it == flats.end() ? nullptr : it->second.get();
}

// ---------------------------------------------------------------------------
// Rename: σ⁻¹;m on the table keys plus rewriting of feature references in the
// carried bodies and clauses. Locals and formals may not share a feature's
// name (checked later), so an unqualified name outside that set is a feature
// reference.

namespace {

void rename_refs_in_expr_tree(Expr& root, const std::map<std::string, std::string>& m,
                              const std::set<std::string>& skip) {
    walk_exprs(root, [&](Expr& x) {
        switch (x.kind) {
            case ExprKind::Name:
                if (!skip.count(x.name)) {
                    auto it = m.find(x.name);
                    if (it != m.end()) x.name = it->second;
                }
                break;
            case ExprKind::Call:
            case ExprKind::Agent:
                if (!x.target || x.target->kind == ExprKind::Current) {
                    auto it = m.find(x.name);
                    if (it != m.end() && !skip.count(x.name)) x.name = it->second;
                }
                break;
            default:
                break;
        }
    });
}

void rename_refs_in_clauses(std::vector<Clause>& cs, const std::map<std::string, std::string>& m,
                            const std::set<std::string>& skip) {
    for (auto& c : cs)
        if (c.expr) rename_refs_in_expr_tree(*c.expr, m, skip);
}

void rename_refs_in_decl(FeatureDecl& d, const std::map<std::string, std::string>& m) {
    std::set<std::string> skip;
    for (auto& [n, t] : d.formals) skip.insert(n);
    for (auto& [n, t] : d.locals) skip.insert(n);
    auto fix = [&](Expr& x) { rename_refs_in_expr_tree(x, m, skip); };
    // walk_exprs(d, ...) would re-enter subtrees; apply per clause/instruction roots
    rename_refs_in_clauses(d.require_c, m, skip);
    rename_refs_in_clauses(d.ensure_c, m, skip);
    walk_exprs(d.instructions, fix);
    walk_exprs(d.rescue_c, fix);
    if (!d.assigner.empty()) {
        auto it = m.find(d.assigner);
        if (it != m.end()) d.assigner = it->second;
    }
}

}  // namespace

FeatureTable apply_rename(const FeatureTable& table,
                          const std::vector<std::pair<std::string, std::string>>& renames,
                          const std::string& class_name, const SourcePos& pos,
                          Diagnostics& diags) {
    auto err = [&](const std::string& msg) {
        diags.push_back({"VHRC", msg, pos, Severity::Error});
    };
    std::map<std::string, std::string> m;
    std::set<std::string> new_names;
    for (const auto& [from, to] : renames) {
        if (from == to) err("rename pair '" + from + "' maps a name to itself");
        if (!table.count(from))
            err("rename of '" + from + "': no such inherited feature in " + class_name);
        if (!m.emplace(from, to).second)
            err("feature '" + from + "' renamed twice");
        if (!new_names.insert(to).second)
            err("two features renamed to '" + to + "'");
    }
    FeatureTable out;
    for (const auto& [name, e] : table) {
        auto it = m.find(name);
        std::string final = it == m.end() ? name : it->second;
        FeatureEntry ne = e;  // shallow; caller owns deep clones
        ne.final_name = final;
        if (!out.emplace(final, std::move(ne)).second)
            err("rename makes '" + final + "' ambiguous in " + class_name);
    }
    if (!m.empty()) {
        for (auto& [name, e] : out) {
            rename_refs_in_decl(*e.decl, m);
            std::set<std::string> skip;
            for (auto& [n, t] : e.decl->formals) skip.insert(n);
            for (auto& s : e.chain) {
                rename_refs_in_clauses(s->pre, m, skip);
                rename_refs_in_clauses(s->post, m, skip);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Generic substitution: formal parameter names used as type bases become the
// actual types of the inheritance part.

namespace {

void subst_type(TypeRef& t, const std::map<std::string, TypeRef>& m) {
    auto it = m.find(t.base);
    if (it != m.end()) {
        bool det = t.detachable, sep = t.separate;
        TypeRef r = it->second;
        t = r;
        t.detachable = t.detachable || det;
        t.separate = t.separate || sep;
        return;  // actuals are already fully substituted
    }
    for (auto& a : t.args) subst_type(a, m);
}

void subst_decl(FeatureDecl& d, const std::map<std::string, TypeRef>& m) {
    walk_types(d, [&](TypeRef& t) { subst_type(t, m); });
}

void subst_clauses(std::vector<Clause>& cs, const std::map<std::string, TypeRef>& m) {
    for (auto& c : cs)
        if (c.expr)
            walk_exprs(*c.expr, [&](Expr& x) {
                if (x.type.valid()) subst_type(x.type, m);
            });
}

// ---------------------------------------------------------------------------

struct Flattener {
    Universe& u;
    std::set<std::string> in_progress;
    std::set<std::string> failed;

    void error(const std::string& code, const std::string& msg, const SourcePos& pos) {
        u.diagnostics.push_back({code, msg, pos, Severity::Error});
    }

    const FlatClass* flatten(const std::string& name, const SourcePos& ref_pos) {
        auto done = u.flats.find(name);
        if (done != u.flats.end()) return done->second.get();
        if (failed.count(name)) return nullptr;
        auto src = u.classes.find(name);
        if (src == u.classes.end()) {
            error("VTCT", "class " + name + " is unknown", ref_pos);
            failed.insert(name);
            return nullptr;
        }
        if (in_progress.count(name)) {
            error("VHPR", "inheritance cycle through class " + name, src->second->begin_pos);
            failed.insert(name);
            return nullptr;
        }
        in_progress.insert(name);
        auto result = build(*src->second);
        in_progress.erase(name);
        if (!result) {
            failed.insert(name);
            return nullptr;
        }
        auto* raw = result.get();
        u.flats.emplace(name, std::move(result));
        return raw;
    }

    std::unique_ptr<FlatClass> build(const ClassAst& ast) {
        auto fc = std::make_unique<FlatClass>();
        fc->name = ast.name;
        fc->deferred_mark = ast.deferred_mark;
        fc->frozen_mark = ast.frozen_mark;
        fc->expanded_mark = ast.expanded_mark;
        fc->once_mark = ast.once_mark;
        fc->formals = ast.formals;
        fc->converts = ast.converts;
        fc->ast = &ast;

        std::vector<ParentSpec> parents = clone_parent_specs(ast);
        bool ok = true;
        std::set<std::string> redefine_allowed;
        std::set<std::string> invariant_origins;

        FeatureTable merged;
        for (const auto& ps : parents) {
            const FlatClass* p = flatten(ps.type.base, ps.pos);
            if (!p) {
                ok = false;
                continue;
            }
            fc->parents.push_back(ps.type);
            fc->ancestors.insert(p->name);
            fc->ancestors.insert(p->ancestors.begin(), p->ancestors.end());
            if (p->frozen_mark) {
                error("VCFG", "class " + p->name + " is frozen and may not be inherited",
                      ps.pos);
                ok = false;
                continue;
            }
            if (ps.type.args.size() != p->formals.size()) {
                error("VTUG", "parent " + p->name + " takes " +
                                  std::to_string(p->formals.size()) + " generic parameters, " +
                                  std::to_string(ps.type.args.size()) + " given",
                      ps.pos);
                ok = false;
                continue;
            }
            // deep clone + generic substitution + rename
            std::map<std::string, TypeRef> subst;
            for (size_t i = 0; i < p->formals.size(); ++i) subst[p->formals[i]] = ps.type.args[i];
            FeatureTable inherited;
            for (const auto& [n, e] : p->table) {
                FeatureEntry ne = e.clone_deep();
                if (!subst.empty()) {
                    subst_decl(*ne.decl, subst);
                    for (auto& s : ne.chain) {
                        subst_clauses(s->pre, subst);
                        subst_clauses(s->post, subst);
                    }
                }
                inherited.emplace(n, std::move(ne));
            }
            inherited = apply_rename(inherited, ps.renames, ast.name, ps.pos, u.diagnostics);
            std::map<std::string, std::string> rmap(ps.renames.begin(), ps.renames.end());
            for (const auto& rd : ps.redefines) {
                if (!inherited.count(rd)) {
                    error("VDRS", "redefine lists '" + rd + "', which " + ps.type.base +
                                      " does not provide under that name",
                          ps.pos);
                    ok = false;
                } else {
                    redefine_allowed.insert(rd);
                }
            }
            // inherited invariants, renamed/substituted, one copy per origin
            for (const auto& ie : p->invariant) {
                if (invariant_origins.count(ie.origin)) continue;
                auto cl = std::make_shared<Clause>(ie.clause->clone());
                if (cl->expr) {
                    if (!rmap.empty()) rename_refs_in_expr_tree(*cl->expr, rmap, {});
                    if (!subst.empty())
                        walk_exprs(*cl->expr, [&](Expr& x) {
                            if (x.type.valid()) subst_type(x.type, subst);
                        });
                }
                fc->invariant.push_back({ie.origin, std::move(cl)});
            }
            for (const auto& ie : p->invariant) invariant_origins.insert(ie.origin);

            // diamond-aware merge
            for (auto& [n, e] : inherited) {
                auto hit = merged.find(n);
                if (hit == merged.end()) {
                    merged.emplace(n, std::move(e));
                    continue;
                }
                FeatureEntry& a = hit->second;
                if (a.seed_class == e.seed_class && a.seed_name == e.seed_name) {
                    if (a.origin_class != e.origin_class) {
                        error("VMRC", "feature '" + n + "' reaches " + ast.name +
                                          " along two paths with different redefinitions (" +
                                          a.origin_class + " and " + e.origin_class + ")",
                              ps.pos);
                        ok = false;
                    }
                    // same seed, same body: sharing — keep the existing entry
                } else {
                    error("VMFN", "name clash on '" + n + "' inherited from both " +
                                      a.seed_class + " and " + e.seed_class +
                                      " (rename one of them)",
                          ps.pos);
                    ok = false;
                }
            }
        }

        // own declarations (Ψ with validation)
        for (const auto& fcl : ast.feature_clauses) {
            for (const auto& f : fcl.features) {
                if (!check_alias_arity(*f)) ok = false;
                auto hit = merged.find(f->name);
                if (hit == merged.end()) {
                    FeatureEntry e;
                    e.final_name = f->name;
                    e.seed_class = ast.name;
                    e.seed_name = f->name;
                    e.decl = f->clone();
                    e.origin_class = ast.name;
                    e.deferred = f->body_kind == BodyKind::Deferred;
                    if (!f->require_c.empty() || !f->ensure_c.empty()) {
                        auto seg = std::make_shared<ContractSeg>();
                        seg->origin = ast.name;
                        seg->pre = clone_vec(f->require_c);
                        seg->post = clone_vec(f->ensure_c);
                        e.chain.push_back(std::move(seg));
                    }
                    e.export_all = fcl.export_all;
                    e.export_to = fcl.export_to;
                    merged.emplace(f->name, std::move(e));
                    continue;
                }
                FeatureEntry& inh = hit->second;
                bool effecting = inh.deferred && f->body_kind != BodyKind::Deferred;
                bool implicit_any = inh.seed_class == "ANY";
                if (!redefine_allowed.count(f->name) && !effecting && !implicit_any) {
                    error("VDRS",
                          "declaration of '" + f->name + "' in " + ast.name +
                              " clashes with the feature inherited from " + inh.origin_class +
                              "; list it under redefine",
                          f->pos);
                    ok = false;
                    continue;
                }
                if (f->formals.size() != inh.decl->formals.size()) {
                    error("VDRD",
                          "redeclaration of '" + f->name + "' changes the argument count",
                          f->pos);
                    ok = false;
                    continue;
                }
                if (f->result.has_value() != inh.decl->result.has_value()) {
                    error("VDRD", "redeclaration of '" + f->name +
                                      "' may not switch between query and command",
                          f->pos);
                    ok = false;
                    continue;
                }
                inh.decl = f->clone();
                inh.origin_class = ast.name;
                inh.was_redefined = true;
                inh.deferred = f->body_kind == BodyKind::Deferred;
                if (!f->require_c.empty() || !f->ensure_c.empty()) {
                    auto seg = std::make_shared<ContractSeg>();
                    seg->origin = ast.name;
                    seg->pre = clone_vec(f->require_c);
                    seg->post = clone_vec(f->ensure_c);
                    inh.chain.push_back(std::move(seg));
                }
                inh.export_all = fcl.export_all;
                inh.export_to = fcl.export_to;
            }
        }

        fc->table = std::move(merged);

        if (!fc->deferred_mark && fc->is_deferred()) {
            for (const auto& [n, e] : fc->table) {
                if (e.deferred) {
                    error("VCCH", "class " + ast.name + " has deferred feature '" + n +
                                      "' but is not declared deferred",
                          ast.begin_pos);
                    ok = false;
                    break;
                }
            }
        }

        // own invariant clauses come after every ancestor's
        for (const auto& c : ast.invariant_c)
            fc->invariant.push_back({ast.name, std::make_shared<Clause>(c.clone())});

        // creation set
        fc->has_create_clause = ast.create_clause.has_value();
        if (ast.create_clause) {
            for (const auto& n : *ast.create_clause) {
                const FeatureEntry* e = fc->find(n);
                if (!e || !e->decl->is_routine() || e->decl->result.has_value()) {
                    error("VGCP", "creation clause of " + ast.name + " lists '" + n +
                                      "', which is not a procedure of the class",
                          ast.begin_pos);
                    ok = false;
                    continue;
                }
                if (fc->once_mark && e->decl->body_kind != BodyKind::Once) {
                    error("VOCC", "creation procedure '" + n + "' of once class " + ast.name +
                                      " must be a once routine",
                          ast.begin_pos);
                    ok = false;
                    continue;
                }
                fc->creation.push_back(n);
            }
        } else {
            fc->creation.push_back("default_create");
        }

        if (!ok) return nullptr;
        return fc;
    }

    bool check_alias_arity(const FeatureDecl& f) {
        for (const auto& a : f.aliases) {
            if (a == "[]") {
                if (f.formals.empty()) {
                    error("VFAV", "bracket alias on '" + f.name + "' needs at least one argument",
                          f.pos);
                    return false;
                }
            } else if (f.formals.size() > 1) {
                error("VFAV", "operator alias \"" + a + "\" on '" + f.name +
                                  "' allows at most one argument",
                      f.pos);
                return false;
            }
        }
        return true;
    }

    // parents plus the implicit ANY for parentless classes
    std::vector<ParentSpec> clone_parent_specs(const ClassAst& ast) {
        std::vector<ParentSpec> out;
        for (const auto& p : ast.parents) {
            ParentSpec ps;
            ps.type = p.type;
            ps.renames = p.renames;
            ps.redefines = p.redefines;
            ps.pos = p.pos;
            out.push_back(std::move(ps));
        }
        if (out.empty() && ast.name != "ANY") {
            ParentSpec any;
            any.type = TypeRef("ANY");
            any.pos = ast.begin_pos;
            out.push_back(std::move(any));
        }
        return out;
    }
};

}  // namespace

const FlatClass* flatten_class(Universe& u, const std::string& name) {
    Flattener fl{u};
    return fl.flatten(name, SourcePos{});
}

bool flatten_universe(Universe& u) {
    Flattener fl{u};
    bool ok = true;
    for (const auto& [name, ast] : u.classes) {
        if (!fl.flatten(name, ast->begin_pos)) ok = false;
    }
    return ok && !has_errors(u.diagnostics);
}

// ---------------------------------------------------------------------------
// Composed contracts and serialization.

namespace {

ExprPtr conjoin(const std::vector<Clause>& cs) {
    ExprPtr acc;
    for (const auto& c : cs) {
        if (!c.expr) continue;  // `class` markers do not compose
        if (!acc) {
            acc = c.expr->clone();
        } else {
            auto e = make_expr(ExprKind::AndThen);
            e->args.push_back(std::move(acc));
            e->args.push_back(c.expr->clone());
            acc = std::move(e);
        }
    }
    return acc;
}

std::vector<std::string> clause_lines(const std::vector<Clause>& cs) {
    std::vector<std::string> out;
    for (const auto& c : cs) {
        std::string s;
        if (!c.tag.empty()) s += c.tag + ": ";
        s += c.class_marker ? "class" : print_expr(*c.expr);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace

std::vector<std::string> composed_precondition(const FeatureEntry& e) {
    std::vector<const ContractSeg*> segs;
    for (const auto& s : e.chain)
        if (!s->pre.empty()) segs.push_back(s.get());
    if (segs.empty()) return {};
    if (segs.size() == 1) return clause_lines(segs[0]->pre);
    ExprPtr acc;
    for (const auto* s : segs) {
        ExprPtr g = conjoin(s->pre);
        if (!g) continue;
        if (!acc) {
            acc = std::move(g);
        } else {
            auto o = make_expr(ExprKind::OrElse);
            o->args.push_back(std::move(acc));
            o->args.push_back(std::move(g));
            acc = std::move(o);
        }
    }
    if (!acc) return {};
    return {print_expr(*acc)};
}

std::vector<std::string> composed_postcondition(const FeatureEntry& e) {
    std::vector<const ContractSeg*> segs;
    for (const auto& s : e.chain)
        if (!s->post.empty()) segs.push_back(s.get());
    if (segs.empty()) return {};
    if (segs.size() == 1) return clause_lines(segs[0]->post);
    bool any_marker = false;
    ExprPtr acc;
    for (const auto* s : segs) {
        for (const auto& c : s->post) any_marker = any_marker || c.class_marker;
        ExprPtr g = conjoin(s->post);
        if (!g) continue;
        if (!acc) {
            acc = std::move(g);
        } else {
            auto a = make_expr(ExprKind::AndThen);
            a->args.push_back(std::move(acc));
            a->args.push_back(std::move(g));
            acc = std::move(a);
        }
    }
    std::vector<std::string> out;
    if (acc) out.push_back(print_expr(*acc));
    if (any_marker) out.insert(out.begin(), "instance_free: class");
    return out;
}

std::string serialize_flat(const FlatClass& c, bool with_origins) {
    std::string s;
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
    std::string marks;
    if (c.deferred_mark) marks += " deferred";
    if (c.frozen_mark) marks += " frozen";
    if (c.expanded_mark) marks += " expanded";
    if (c.once_mark) marks += " once";
    if (!marks.empty()) s += "marks:" + marks + "\n";
    if (with_origins) {
        s += "parents:";
        for (const auto& p : c.parents) s += " " + p.to_string();
        s += "\nancestors:";
        for (const auto& a : c.ancestors) s += " " + a;
        s += "\n";
    }
    s += "create:";
    for (const auto& n : c.creation) s += " " + n;
    s += "\n";
    for (const auto& cv : c.converts) {
        s += cv.from ? "convert from " : "convert to ";
        s += cv.name + ":";
        for (const auto& t : cv.types) s += " " + t.to_string();
        s += "\n";
    }
    for (const auto& [name, e] : c.table) {
        s += "feature " + name;
        for (const auto& a : e.decl->aliases) s += " alias \"" + a + "\"";
        s += "\n";
        if (with_origins) {
            s += "  seed: " + e.seed_class + "." + e.seed_name + "\n";
            s += "  origin: " + e.origin_class + (e.was_redefined ? " (redefined)" : "") + "\n";
        }
        if (!e.export_all) {
            s += "  export: {";
            for (size_t i = 0; i < e.export_to.size(); ++i) {
                if (i) s += ", ";
                s += e.export_to[i];
            }
            s += "}\n";
        }
        const FeatureDecl& d = *e.decl;
        if (!d.formals.empty()) {
            s += "  args:";
            for (const auto& [n, t] : d.formals) s += " " + n + ": " + t.to_string() + ";";
            s += "\n";
        }
        if (d.result) s += "  result: " + d.result->to_string() + "\n";
        if (!d.assigner.empty()) s += "  assign: " + d.assigner + "\n";
        if (!d.header_comment.empty()) s += "  note: " + d.header_comment + "\n";
        switch (d.body_kind) {
            case BodyKind::Do: s += "  body: do\n"; break;
            case BodyKind::Once: s += "  body: once(" + d.once_key + ")\n"; break;
            case BodyKind::Deferred: s += "  body: deferred\n"; break;
            case BodyKind::External: s += "  body: external " + d.external_name + "\n"; break;
            case BodyKind::Attribute: s += "  body: attribute\n"; break;
            case BodyKind::Constant:
                s += "  body: constant = " + print_expr(*d.const_value) + "\n";
                break;
        }
        for (const auto& line : composed_precondition(e)) s += "  require: " + line + "\n";
        for (const auto& line : composed_postcondition(e)) s += "  ensure: " + line + "\n";
        if (!d.locals.empty()) {
            s += "  locals:";
            for (const auto& [n, t] : d.locals) s += " " + n + ": " + t.to_string() + ";";
            s += "\n";
        }
        if (!d.instructions.empty()) {
            s += "  text:\n";
            for (auto& line_src : {print_instrs(d.instructions, 2)}) s += line_src;
        }
        if (d.has_rescue) {
            s += "  rescue:\n" + print_instrs(d.rescue_c, 2);
        }
    }
    s += "invariant:\n";
    for (const auto& ie : c.invariant) {
        s += "  ";
        if (with_origins) s += "[" + ie.origin + "] ";
        if (!ie.clause->tag.empty()) s += ie.clause->tag + ": ";
        s += ie.clause->class_marker ? "class" : print_expr(*ie.clause->expr);
        s += "\n";
    }
    return s;
}

}  // namespace minie
