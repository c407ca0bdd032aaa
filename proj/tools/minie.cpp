#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "minie/driver.hpp"
#include "minie/grammar.hpp"
#include "minie/printer.hpp"
#include "minie/runtime.hpp"
#include "minie/typecheck.hpp"
#include "minie/views.hpp"

using namespace minie;

namespace {

// Exit codes: 0 ok, 1 diagnostics, 2 uncaught exception, 3 deadlock,
// 4 I/O failure, 5 timeout. 2/3/5 come straight from the runtime.
constexpr int kOk = 0, kDiagnostics = 1, kIoFailure = 4;

int report(const Universe& u) {
    bool io = false;
    for (const auto& d : u.diagnostics) {
        std::cerr << d.format() << "\n";
        io = io || d.code == "FILE";
    }
    if (io) return kIoFailure;
    return has_errors(u.diagnostics) ? kDiagnostics : kOk;
}

// Loads kernel + user paths (files or directories). Returns an exit code,
// kOk when everything parsed.
int load(Program& p, const std::vector<std::string>& paths) {
    add_source_dir(p, kernel_dir(MINIE_KERNEL_DIR));
    for (const auto& path : paths) {
        std::error_code ec;
        if (std::filesystem::is_directory(path, ec))
            add_source_dir(p, path);
        else
            add_source_file(p, path);
    }
    return report(p.universe);
}

// Informational only: a one-line function that merely returns an attribute
// adds nothing under uniform access.
void lint_getters(const Program& p) {
    for (const auto& ast : p.asts) {
        std::set<std::string> attrs;
        for (const auto& fcl : ast->feature_clauses)
            for (const auto& f : fcl.features)
                if (f->body_kind == BodyKind::Attribute && f->result) attrs.insert(f->name);
        for (const auto& fcl : ast->feature_clauses)
            for (const auto& f : fcl.features) {
                if (f->body_kind != BodyKind::Do || !f->result || !f->formals.empty() ||
                    f->instructions.size() != 1 || !f->require_c.empty() ||
                    !f->ensure_c.empty())
                    continue;
                const Instr& in = *f->instructions.front();
                if (in.kind != InstrKind::Assign || in.lhs->kind != ExprKind::ResultVar)
                    continue;
                const Expr& rhs = *in.rhs;
                bool plain_name = rhs.kind == ExprKind::Name ||
                                  (rhs.kind == ExprKind::Call && !rhs.target && rhs.args.empty());
                if (plain_name && attrs.count(rhs.name))
                    std::cerr << f->pos.to_string() << ": note: '" << f->name
                              << "' is a redundant getter; clients can use '" << rhs.name
                              << "' directly (queries are uniform-access)\n";
            }
    }
}

int cmd_check(const std::vector<std::string>& paths) {
    Program p;
    int rc = load(p, paths);
    if (rc != kOk) return rc;
    if (!check_universe(p.universe)) return report(p.universe);
    lint_getters(p);
    return kOk;
}

struct RunOpts {
    std::vector<std::string> paths;
    std::string entry;
    std::string assertions = "all";
    unsigned long long seed = 0;
    long long max_steps = 1000000;
    bool trace = false;
};

int cmd_run(const RunOpts& o) {
    Program p;
    int rc = load(p, o.paths);
    if (rc != kOk) return rc;
    if (!check_universe(p.universe)) return report(p.universe);
    if (!verify_builtin_bindings(p.universe, p.universe.diagnostics))
        return report(p.universe);

    std::string cls, proc;
    if (o.entry.empty()) {
        if (!p.universe.classes.count("APPLICATION")) {
            std::cerr << "no --entry given and no APPLICATION class found\n";
            return kDiagnostics;
        }
        cls = "APPLICATION";
        proc = "make";
    } else {
        auto dot = o.entry.find('.');
        if (dot == std::string::npos) {
            std::cerr << "--entry must be CLASS.procedure\n";
            return kDiagnostics;
        }
        cls = o.entry.substr(0, dot);
        proc = o.entry.substr(dot + 1);
    }

    RunConfig cfg;
    cfg.assertions = o.assertions == "none"  ? AssertLevel::None
                     : o.assertions == "pre" ? AssertLevel::Pre
                                             : AssertLevel::All;
    cfg.trace = o.trace;
    cfg.seed = o.seed;
    cfg.max_steps = o.max_steps;
    Machine m(p.universe, cfg);
    return m.run_entry(cls, proc);
}

struct ViewOpts {
    std::vector<std::string> paths;
    std::string cls;
    bool contract = false, flat = false, interface_ = false;
    bool html = false;
};

int cmd_view(const ViewOpts& o) {
    Program p;
    int rc = load(p, o.paths);
    if (rc != kOk) return rc;
    if (!flatten_universe(p.universe)) return report(p.universe);
    auto it = p.universe.flats.find(o.cls);
    if (it == p.universe.flats.end()) {
        std::cerr << "class " << o.cls << " is unknown\n";
        return kDiagnostics;
    }
    ViewDoc doc = o.flat         ? flat_view(*it->second)
                  : o.interface_ ? interface_view(*it->second)
                                 : contract_view(*it->second, false);
    std::cout << (o.html ? render_html(doc) : doc.text);
    return kOk;
}

int cmd_explain(const std::string& code) {
    if (const std::string* text = explain_code(code)) {
        std::cout << code << ": " << *text << "\n";
        return kOk;
    }
    std::cerr << "unknown diagnostic code " << code << "\n";
    return kDiagnostics;
}

int cmd_lint_grammar(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        std::cerr << "cannot read " << path << "\n";
        return kIoFailure;
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    GrammarDoc doc = parse_grammar(ss.str(), path);
    for (const auto& d : doc.diagnostics) std::cerr << d.format() << "\n";
    if (has_errors(doc.diagnostics)) return kDiagnostics;
    auto violations = lint_grammar(doc);
    for (const auto& v : violations)
        std::cerr << path << ":" << v.line << ": " << v.message << "\n";
    return violations.empty() ? kOk : kDiagnostics;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mini-E toolchain"};
    app.require_subcommand(1);

    std::vector<std::string> check_paths;
    auto* check = app.add_subcommand("check", "parse, flatten and check classes");
    check->add_option("paths", check_paths, "source files or directories")->required();

    RunOpts run_o;
    auto* run = app.add_subcommand("run", "check, then execute an entry procedure");
    run->add_option("paths", run_o.paths, "source files or directories")->required();
    run->add_option("--entry", run_o.entry, "entry point CLASS.procedure");
    run->add_option("--assertions", run_o.assertions, "assertion monitoring level")
        ->check(CLI::IsMember({"none", "pre", "all"}));
    run->add_option("--scoop-seed", run_o.seed, "scheduler seed");
    run->add_option("--max-steps", run_o.max_steps, "step budget before timeout");
    run->add_flag("--trace", run_o.trace, "emit the scheduler event trace");

    ViewOpts view_o;
    auto* view = app.add_subcommand("view", "render a documentation view");
    view->add_option("class", view_o.cls, "class name")->required();
    view->add_option("paths", view_o.paths, "source files or directories");
    auto* vc = view->add_flag("--contract", view_o.contract, "contract view (default)");
    auto* vf = view->add_flag("--flat", view_o.flat, "flat view");
    auto* vi = view->add_flag("--interface", view_o.interface_, "interface view");
    vc->excludes(vf)->excludes(vi);
    vf->excludes(vi);
    view->add_flag("--html", view_o.html, "wrap the view in an HTML page");

    std::string code;
    auto* explain = app.add_subcommand("explain", "describe a diagnostic code");
    explain->add_option("code", code, "validity/diagnostic code")->required();

    std::string grammar_file;
    auto* lint = app.add_subcommand("lint-grammar", "check a grammar file's discipline");
    lint->add_option("file", grammar_file, "grammar file")->required();

    CLI11_PARSE(app, argc, argv);

    if (*check) return cmd_check(check_paths);
    if (*run) return cmd_run(run_o);
    if (*view) return cmd_view(view_o);
    if (*explain) return cmd_explain(code);
    if (*lint) return cmd_lint_grammar(grammar_file);
    return kOk;
}
