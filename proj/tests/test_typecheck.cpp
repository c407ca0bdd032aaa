#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "minie/driver.hpp"
#include "minie/printer.hpp"
#include "minie/typecheck.hpp"

using namespace minie;

namespace {

// Every diagnostic any test provokes must have a catalogue entry: the
// explain command can never come up empty.
void require_catalogued(const Diagnostics& ds) {
    for (const auto& d : ds) {
        INFO(d.format());
        CHECK(explain_code(d.code) != nullptr);
    }
}

struct TWorld {
    Program p;

    void add(const std::string& src, const std::string& file = "mem.me") {
        add_source_text(p, src, file);
        for (const auto& d : p.universe.diagnostics) MESSAGE(d.format());
        REQUIRE(!has_errors(p.universe.diagnostics));
    }

    bool check() {
        bool ok = check_universe(p.universe);
        require_catalogued(p.universe.diagnostics);
        return ok;
    }

    bool has_code(const std::string& code) const {
        for (const auto& d : p.universe.diagnostics)
            if (d.code == code) return true;
        return false;
    }

    void dump() const {
        for (const auto& d : p.universe.diagnostics) MESSAGE(d.format());
    }

    const FeatureEntry* feature(const std::string& cls, const std::string& f) const {
        const FlatClass* fc = p.universe.flat_of(cls);
        REQUIRE(fc);
        const FeatureEntry* fe = fc->find(f);
        REQUIRE(fe);
        return fe;
    }
};

TWorld kernel_world() {
    TWorld w;
    REQUIRE(add_source_dir(w.p, MINIE_KERNEL_DIR));
    return w;
}

TypeRef T(const std::string& s) {
    // tiny type literal: "d " prefix = detachable, "s " = separate, [..] generics
    TypeRef t;
    std::string rest = s;
    for (;;) {
        if (rest.rfind("d ", 0) == 0) {
            t.detachable = true;
            rest = rest.substr(2);
        } else if (rest.rfind("s ", 0) == 0) {
            t.separate = true;
            rest = rest.substr(2);
        } else
            break;
    }
    auto lb = rest.find('[');
    if (lb == std::string::npos) {
        t.base = rest;
        return t;
    }
    t.base = rest.substr(0, lb);
    while (!t.base.empty() && t.base.back() == ' ') t.base.pop_back();
    std::string inner = rest.substr(lb + 1, rest.rfind(']') - lb - 1);
    int depth = 0;
    std::string cur;
    for (char c : inner) {
        if (c == '[') depth++;
        if (c == ']') depth--;
        if (c == ',' && depth == 0) {
            while (!cur.empty() && cur.front() == ' ') cur.erase(0, 1);
            t.args.push_back(T(cur));
            cur.clear();
        } else
            cur += c;
    }
    while (!cur.empty() && cur.front() == ' ') cur.erase(0, 1);
    if (!cur.empty()) t.args.push_back(T(cur));
    return t;
}

}  // namespace

TEST_CASE("the kernel library checks with zero diagnostics") {
    auto w = kernel_world();
    bool ok = w.check();
    w.dump();
    CHECK(ok);
    CHECK(w.p.universe.diagnostics.empty());
}

TEST_CASE("checking is idempotent") {
    auto w = kernel_world();
    w.add(
        "class C\n\ncreate\n   make\n\nfeature\n\n   xs: LIST [INTEGER]\n\n   make\n      do\n"
        "         create xs.make\n      end\n\n"
        "   sum: INTEGER\n      do\n         across xs as x loop\n"
        "            Result := Result + x\n         end\n      end\n\n"
        "   all_small: BOOLEAN\n      do\n"
        "         Result := across xs as x all x < 100 end\n      end\n\nend\n");
    bool ok = w.check();
    w.dump();
    REQUIRE(ok);
    std::string first = serialize_flat(*w.p.universe.flat_of("C"), true);
    size_t n = w.p.universe.diagnostics.size();
    Checker again(w.p.universe);
    CHECK(again.run());
    CHECK(w.p.universe.diagnostics.size() == n);
    CHECK(serialize_flat(*w.p.universe.flat_of("C"), true) == first);
}

// ---------------------------------------------------------------------------
// Conformance.
// ---------------------------------------------------------------------------

TEST_CASE("conformance follows inheritance, attachment and separateness") {
    auto w = kernel_world();
    REQUIRE(w.check());
    Checker ck(w.p.universe);

    // oracle table: (t, u, expected)
    struct Row {
        const char *t, *u;
        bool want;
    };
    const Row rows[] = {
        {"INTEGER", "INTEGER", true},
        {"INTEGER", "NUMERIC", true},
        {"INTEGER", "COMPARABLE", true},
        {"INTEGER", "ANY", true},
        {"INTEGER", "REAL", false},       // converts, never conforms
        {"REAL", "INTEGER", false},
        {"NUMERIC", "INTEGER", false},    // no down-conformance
        {"STRING", "COMPARABLE", true},
        {"LIST [INTEGER]", "LINEAR [INTEGER]", true},
        {"LIST [INTEGER]", "LIST [ANY]", false},   // generics are invariant
        {"LIST [INTEGER]", "ANY", true},
        {"d STRING", "STRING", false},    // detachable never conforms to attached
        {"STRING", "d STRING", true},
        {"NONE", "d STRING", true},       // Void fits detachable targets only
        {"NONE", "STRING", false},
        {"s STRING", "STRING", false},    // separate stays separate
        {"STRING", "s STRING", true},
        {"TUPLE [INTEGER, STRING]", "TUPLE [INTEGER]", true},  // width prefix
        {"TUPLE [INTEGER]", "TUPLE [INTEGER, STRING]", false},
        {"TUPLE [INTEGER, STRING]", "TUPLE", true},
        {"TUPLE [INTEGER]", "TUPLE [NUMERIC]", true},          // covariant items
        // agents: contravariant arguments, covariant results
        {"PROCEDURE [TUPLE [NUMERIC]]", "PROCEDURE [TUPLE [INTEGER]]", true},
        {"PROCEDURE [TUPLE [INTEGER]]", "PROCEDURE [TUPLE [NUMERIC]]", false},
        {"FUNCTION [TUPLE [NUMERIC], INTEGER]", "FUNCTION [TUPLE [INTEGER], NUMERIC]", true},
        {"FUNCTION [TUPLE [INTEGER], NUMERIC]", "FUNCTION [TUPLE [NUMERIC], INTEGER]", false},
    };
    for (const auto& r : rows) {
        INFO(r.t << " conforms to " << r.u);
        CHECK(ck.conforms(T(r.t), T(r.u)) == r.want);
    }
}

TEST_CASE("INTEGER converts to REAL and mixed arithmetic type-checks") {
    auto w = kernel_world();
    w.add(
        "class C\n\nfeature\n\n   f: REAL\n      do\n         Result := 1\n"
        "         Result := Result + 2\n      end\n\nend\n");
    bool ok = w.check();
    w.dump();
    CHECK(ok);
    // the manifest 1 got wrapped in a conversion node
    const FeatureEntry* f = w.feature("C", "f");
    REQUIRE(!f->decl->instructions.empty());
    CHECK(f->decl->instructions[0]->rhs->kind == ExprKind::ConvertApply);
    CHECK(f->decl->instructions[0]->rhs->conversion_is_builtin);
}

// ---------------------------------------------------------------------------
// Validity codes, one by one. Each program is minimal and names the rule it
// breaks; `check` must reject it with exactly that code.
// ---------------------------------------------------------------------------

namespace {

void expect_code(std::initializer_list<std::string> srcs, const std::string& code) {
    auto w = kernel_world();
    int i = 0;
    for (const auto& src : srcs) w.add(src, "case" + std::to_string(i++) + ".me");
    CHECK(!w.check());
    INFO("expected " << code);
    for (const auto& d : w.p.universe.diagnostics) INFO(d.format());
    CHECK(w.has_code(code));
}

void expect_code(const std::string& src, const std::string& code) {
    expect_code({src}, code);
}

}  // namespace

TEST_CASE("VTCT: unknown class in a type") {
    expect_code("class C\n\nfeature\n\n   x: NO_SUCH_CLASS\n\nend\n", "VTCT");
}

TEST_CASE("VTCT: detachable basic type") {
    expect_code("class C\n\nfeature\n\n   x: detachable INTEGER\n\nend\n", "VTCT");
}

TEST_CASE("VTUG: wrong generic arity") {
    expect_code(
        "class C\n\nfeature\n\n   x: detachable LIST\n\nend\n", "VTUG");
}

TEST_CASE("VDRC: plain require on a redeclaration") {
    expect_code(
        {"class A\n\nfeature\n\n   f (x: INTEGER)\n      do\n      end\n\nend\n",
         "class D\n\ninherit\n   A\n      redefine\n         f\n      end\n\nfeature\n\n"
         "   f (x: INTEGER)\n      require\n         pos: x > 0\n      do\n      end\n\nend\n"},
        "VDRC");
}

TEST_CASE("VDRC: require else on an introduced feature") {
    expect_code(
        "class C\n\nfeature\n\n   f (x: INTEGER)\n      require else\n         pos: x > 0\n"
        "      do\n      end\n\nend\n",
        "VDRC");
}

TEST_CASE("VBAC: assignment to a plain query") {
    expect_code(
        "class C\n\nfeature\n\n   q: INTEGER\n      do\n         Result := 1\n      end\n\n"
        "   f\n      do\n         q := 3\n      end\n\nend\n",
        "VBAC");
}

TEST_CASE("assignment to a query with an assigner unfolds to the setter call") {
    auto w = kernel_world();
    w.add(
        "class C\n\nfeature\n\n   balance: INTEGER assign set_balance\n\n"
        "   set_balance (b: INTEGER)\n      do\n         balance := b\n      end\n\n"
        "   f (other: C)\n      do\n         other.balance := 3\n      end\n\nend\n");
    bool ok = w.check();
    w.dump();
    REQUIRE(ok);
    const FeatureEntry* f = w.feature("C", "f");
    REQUIRE(f->decl->instructions.size() == 1);
    const Instr& in = *f->decl->instructions[0];
    CHECK(in.kind == InstrKind::CallInstr);
    CHECK(in.call->name == "set_balance");
}

TEST_CASE("bracket assignment unfolds to the bracket feature's assigner") {
    auto w = kernel_world();
    w.add(
        "class C\n\nfeature\n\n   f (xs: LIST [INTEGER])\n      do\n"
        "         xs [1] := 42\n      end\n\nend\n");
    bool ok = w.check();
    w.dump();
    REQUIRE(ok);
    const Instr& in = *w.feature("C", "f")->decl->instructions[0];
    CHECK(in.kind == InstrKind::CallInstr);
    CHECK(in.call->name == "put");
    REQUIRE(in.call->args.size() == 2);  // new value first, then the index
    CHECK(in.call->args[0]->kind == ExprKind::IntLit);
}

TEST_CASE("VGCC: creating a deferred class") {
    expect_code(
        "class C\n\nfeature\n\n   f\n      local\n         x: NUMERIC\n      do\n"
        "         create x\n      end\n\nend\n",
        "VGCC");
}

TEST_CASE("VGCC: creation procedure not in the creation set") {
    expect_code(
        {"class P\n\ncreate\n   make\n\nfeature\n\n   make\n      do\n      end\n\n"
         "   other\n      do\n      end\n\nend\n",
         "class C\n\nfeature\n\n   f\n      local\n         x: P\n      do\n"
         "         create x.other\n      end\n\nend\n"},
        "VGCC");
}

TEST_CASE("VUEX: unknown feature and unexported feature") {
    expect_code(
        "class C\n\nfeature\n\n   f (s: STRING)\n      do\n         s.no_such\n      end\n\n"
        "end\n",
        "VUEX");
    expect_code(
        {"class P\n\nfeature {NONE}\n\n   secret\n      do\n      end\n\nend\n",
         "class C\n\nfeature\n\n   f (p: P)\n      do\n         p.secret\n      end\n\nend\n"},
        "VUEX");
}

TEST_CASE("VUAR: wrong argument count and non-conforming argument") {
    expect_code(
        "class C\n\nfeature\n\n   f (xs: LIST [INTEGER])\n      do\n"
        "         xs.put (1)\n      end\n\nend\n",
        "VUAR");
    expect_code(
        "class C\n\nfeature\n\n   f (xs: LIST [INTEGER]; s: STRING)\n      do\n"
        "         xs.extend (s)\n      end\n\nend\n",
        "VUAR");
}

TEST_CASE("VKCN: query as instruction, command as expression") {
    expect_code(
        "class C\n\nfeature\n\n   f (s: STRING)\n      do\n         s.count\n      end\n\n"
        "end\n",
        "VKCN");
    expect_code(
        "class C\n\nfeature\n\n   cmd\n      do\n      end\n\n   f: INTEGER\n      do\n"
        "         Result := cmd\n      end\n\nend\n",
        "VKCN");
}

TEST_CASE("VUTA: call on a detachable target, fixed by an object test") {
    expect_code(
        "class C\n\nfeature\n\n   f (s: detachable STRING): INTEGER\n      do\n"
        "         Result := s.count\n      end\n\nend\n",
        "VUTA");
    auto w = kernel_world();
    w.add(
        "class C\n\nfeature\n\n   f (s: detachable STRING): INTEGER\n      do\n"
        "         if attached s as t then\n            Result := t.count\n         end\n"
        "      end\n\nend\n");
    bool ok = w.check();
    w.dump();
    CHECK(ok);
}

TEST_CASE("VUSC: separate target must be controlled") {
    expect_code(
        {"class P\n\nfeature\n\n   go\n      do\n      end\n\nend\n",
         "class C\n\ncreate\n   make\n\nfeature\n\n   p: separate P\n\n"
         "   make\n      do\n         create p\n"
         "      end\n\n   f\n      do\n         p.go\n      end\n\nend\n"},
        "VUSC");
    // through a formal it is controlled
    auto w = kernel_world();
    w.add("class P\n\nfeature\n\n   go\n      do\n      end\n\nend\n", "p.me");
    w.add(
        "class C\n\nfeature\n\n   f (p: separate P)\n      do\n         p.go\n      end\n\n"
        "end\n");
    bool ok = w.check();
    w.dump();
    CHECK(ok);
}

TEST_CASE("separate blocks unfold to a secret wrapper routine") {
    auto w = kernel_world();
    w.add("class P\n\nfeature\n\n   go (n: INTEGER)\n      do\n      end\n\nend\n", "p.me");
    w.add(
        "class C\n\ncreate\n   make\n\nfeature\n\n   p: separate P\n\n"
        "   make\n      do\n         create p\n"
        "      end\n\n   f\n      local\n         n: INTEGER\n      do\n         n := 3\n"
        "         separate p as q do\n            q.go (n)\n         end\n      end\n\nend\n");
    bool ok = w.check();
    w.dump();
    REQUIRE(ok);
    const FlatClass* c = w.p.universe.flat_of("C");
    bool wrapper_found = false;
    for (const auto& [name, fe] : c->table)
        if (name.rfind("separate_block_", 0) == 0) {
            wrapper_found = true;
            REQUIRE(fe.decl->formals.size() == 2);  // the block local + captured n
            CHECK(fe.decl->formals[0].first == "q");
            CHECK(fe.decl->formals[0].second.separate);
            CHECK(fe.decl->formals[1].first == "n");
        }
    CHECK(wrapper_found);
    const FeatureEntry* f = c->find("f");
    CHECK(f->decl->instructions.back()->kind == InstrKind::CallInstr);
}

TEST_CASE("VJAR: detachable source, attached target; assigning to a formal") {
    expect_code(
        "class C\n\nfeature\n\n   f (s: detachable STRING)\n      local\n"
        "         t: STRING\n      do\n         t := s\n      end\n\nend\n",
        "VJAR");
    expect_code(
        "class C\n\nfeature\n\n   f (n: INTEGER)\n      do\n         n := 3\n      end\n\n"
        "end\n",
        "VJAR");
}

TEST_CASE("VWBE: non-boolean condition") {
    expect_code(
        "class C\n\nfeature\n\n   f\n      do\n         if 1 then\n         end\n      end\n\n"
        "end\n",
        "VWBE");
}

TEST_CASE("VAVE: non-INTEGER loop variant") {
    expect_code(
        "class C\n\nfeature\n\n   f (s: STRING)\n      do\n"
        "         from\n         until True\n         loop\n         variant\n            s\n"
        "         end\n      end\n\nend\n",
        "VAVE");
}

TEST_CASE("VOMB: bad inspect subject and non-constant when value") {
    expect_code(
        "class C\n\nfeature\n\n   f (r: REAL)\n      do\n         inspect r\n"
        "         when 1 then\n         end\n      end\n\nend\n",
        "VOMB");
    expect_code(
        "class C\n\nfeature\n\n   g: INTEGER\n      do\n         Result := 1\n      end\n\n"
        "   f (n: INTEGER)\n      do\n         inspect n\n         when g then\n"
        "         end\n      end\n\nend\n",
        "VOMB");
}

TEST_CASE("VEVI: creation procedure leaving an attached attribute unset") {
    expect_code(
        "class C\n\ncreate\n   make\n\nfeature\n\n   name: STRING\n\n   make\n      do\n"
        "      end\n\nend\n",
        "VEVI");
    // branch coverage: set on one path only is still an error
    expect_code(
        "class C\n\ncreate\n   make\n\nfeature\n\n   name: STRING\n\n"
        "   make (b: BOOLEAN)\n      do\n         if b then\n            name := \"x\"\n"
        "         end\n      end\n\nend\n",
        "VEVI");
    // both paths set: fine
    auto w = kernel_world();
    w.add(
        "class C\n\ncreate\n   make\n\nfeature\n\n   name: STRING\n\n"
        "   make (b: BOOLEAN)\n      do\n         if b then\n            name := \"x\"\n"
        "         else\n            name := \"y\"\n         end\n      end\n\nend\n");
    bool ok = w.check();
    w.dump();
    CHECK(ok);
}

TEST_CASE("VEEN: Result in a procedure; Retry without rescue; local in contract") {
    expect_code(
        "class C\n\nfeature\n\n   f\n      do\n         Result := 1\n      end\n\nend\n",
        "VEEN");
    expect_code(
        "class C\n\nfeature\n\n   f\n      do\n         Retry := 1\n      end\n\nend\n",
        "VEEN");
    expect_code(
        "class C\n\nfeature\n\n   f: INTEGER\n      local\n         x: INTEGER\n      do\n"
        "         x := 1\n         Result := x\n      ensure\n         big: x > 0\n"
        "      end\n\nend\n",
        "VEEN");
}

TEST_CASE("VRLE: a local may not reuse a feature name") {
    expect_code(
        "class C\n\nfeature\n\n   g: INTEGER\n      do\n      end\n\n"
        "   f\n      local\n         g: INTEGER\n      do\n         g := 1\n      end\n\n"
        "end\n",
        "VRLE");
}

TEST_CASE("VAOX: old outside a postcondition; old involving Result") {
    expect_code(
        "class C\n\nfeature\n\n   x: INTEGER\n\n   f\n      require\n"
        "         was: old x > 0\n      do\n      end\n\nend\n",
        "VAOX");
    expect_code(
        "class C\n\nfeature\n\n   f: INTEGER\n      do\n         Result := 1\n"
        "      ensure\n         odd: old Result = 0\n      end\n\nend\n",
        "VAOX");
}

TEST_CASE("VIFC: non-object calls need instance-free features") {
    expect_code(
        {"class P\n\nfeature\n\n   x: INTEGER\n\n   q: INTEGER\n      do\n"
         "         Result := x\n      end\n\nend\n",
         "class C\n\nfeature\n\n   f: INTEGER\n      do\n         Result := {P}.q\n"
         "      end\n\nend\n"},
        "VIFC");
    expect_code(
        "class C\n\nfeature\n\n   x: INTEGER\n\n   q: INTEGER\n      do\n"
        "         Result := x\n      ensure\n         instance_free: class\n      end\n\n"
        "end\n",
        "VIFC");
    // a genuine instance-free query may be called without a target object
    auto w = kernel_world();
    w.add(
        "class P\n\nfeature\n\n   answer: INTEGER\n      do\n         Result := 42\n"
        "      ensure\n         instance_free: class\n      end\n\nend\n",
        "p.me");
    w.add(
        "class C\n\nfeature\n\n   f: INTEGER\n      do\n         Result := {P}.answer\n"
        "      end\n\nend\n");
    bool ok = w.check();
    w.dump();
    CHECK(ok);
}

TEST_CASE("VNCA: malformed and overlapping convert clauses") {
    expect_code(
        "class C\n\ncreate\n   make\n\nconvert\n   make ({STRING})\n\nfeature\n\n"
        "   make (a: STRING; b: STRING)\n      do\n      end\n\nend\n",
        "VNCA");
    // a pair of types may not both conform and convert: C conforms to A,
    // so A may not also declare a conversion from C
    expect_code(
        {"class A\n\ncreate\n   make, default_create\n\nconvert\n   make ({C})\n\n"
         "feature\n\n   make (c: C)\n      do\n      end\n\nend\n",
         "class C\n\ninherit\n   A\n\nend\n"},
        "VNCA");
}

TEST_CASE("agents get PROCEDURE/FUNCTION types and sugar calls unfold") {
    auto w = kernel_world();
    w.add(
        "class C\n\nfeature\n\n   step (n: INTEGER)\n      do\n      end\n\n"
        "   twice (n: INTEGER): INTEGER\n      do\n         Result := n * 2\n      end\n\n"
        "   f\n      local\n         p: PROCEDURE [INTEGER]\n"
        "         g: FUNCTION [INTEGER, INTEGER]\n         r: INTEGER\n      do\n"
        "         p := agent step\n         p.call (3)\n         p (4)\n"
        "         g := agent twice\n         r := g.item (5)\n      end\n\nend\n");
    bool ok = w.check();
    w.dump();
    CHECK(ok);
    // the entity-call abbreviation p (4) became p.call with a wrapped tuple
    const FeatureEntry* f = w.feature("C", "f");
    const Instr& third = *f->decl->instructions[2];
    REQUIRE(third.kind == InstrKind::CallInstr);
    CHECK(third.call->name == "call");
    REQUIRE(third.call->args.size() == 1);
    CHECK(third.call->args[0]->kind == ExprKind::TupleLit);
}

TEST_CASE("VAGC: ambiguous agent call on a tuple-of-tuple") {
    // t fits PROCEDURE [ANY]'s argument tuple both as the tuple itself and
    // as its single element
    expect_code(
        "class C\n\nfeature\n\n   f (p: PROCEDURE [ANY];"
        " t: TUPLE [INTEGER])\n      do\n         p.call (t)\n      end\n\nend\n",
        "VAGC");
}

TEST_CASE("operators unfold to alias feature calls") {
    auto w = kernel_world();
    w.add(
        "class C\n\nfeature\n\n   f (a, b: INTEGER): INTEGER\n      do\n"
        "         Result := a + b * b\n      end\n\nend\n");
    REQUIRE(w.check());
    const FeatureEntry* f = w.feature("C", "f");
    const Expr& rhs = *f->decl->instructions[0]->rhs;
    REQUIRE(rhs.kind == ExprKind::Call);
    CHECK(rhs.name == "plus");
    REQUIRE(rhs.args.size() == 1);
    CHECK(rhs.args[0]->name == "product");
}

TEST_CASE("across unfolds to a cursor loop; quantifiers to loop expressions") {
    auto w = kernel_world();
    w.add(
        "class C\n\nfeature\n\n   sum (xs: LIST [INTEGER]): INTEGER\n      do\n"
        "         across xs as x loop\n            Result := Result + x\n         end\n"
        "      ensure\n         all_pos: across xs as x all x >= 0 end\n      end\n\nend\n");
    bool ok = w.check();
    w.dump();
    REQUIRE(ok);
    const FeatureEntry* f = w.feature("C", "sum");
    const Instr& loop = *f->decl->instructions[0];
    CHECK(loop.kind == InstrKind::Loop);
    REQUIRE(loop.init.size() == 1);
    CHECK(loop.init[0]->rhs->name == "new_cursor");
    CHECK(loop.until->name == "after");
    // body: the element access became cursor.item, and cursor.forth was appended
    std::string body = print_instrs(loop.body, 0);
    CHECK(body.find(".item") != std::string::npos);
    CHECK(body.find(".forth") != std::string::npos);
    // quantifier in the chain's own segment
    REQUIRE(!f->chain.empty());
    const auto& post = f->chain.back()->post;
    REQUIRE(post.size() == 1);
    CHECK(post[0].expr->kind == ExprKind::LoopExpr);
    CHECK(post[0].expr->static_type.base == "BOOLEAN");
}

TEST_CASE("old expressions are numbered in capture order on the entry") {
    auto w = kernel_world();
    w.add(
        "class C\n\nfeature\n\n   x: INTEGER\n\n   y: INTEGER\n\n   bump\n      do\n"
        "         x := x + 1\n         y := y + 2\n      ensure\n"
        "         xs: x = old x + 1\n         ys: y = old y + 2\n      end\n\nend\n");
    REQUIRE(w.check());
    const FeatureEntry* f = w.feature("C", "bump");
    REQUIRE(f->old_nodes.size() == 2);
    CHECK(f->old_nodes[0]->old_id == 0);
    CHECK(f->old_nodes[1]->old_id == 1);
    // the declaration's contract copies were cleared: the chain is the one copy
    CHECK(f->decl->ensure_c.empty());
    CHECK(!f->chain.empty());
}

TEST_CASE("separate preconditions are classified as wait conditions") {
    auto w = kernel_world();
    w.add("class FORK\n\nfeature\n\n   in_use: BOOLEAN\n\nend\n", "fork.me");
    w.add(
        "class C\n\nfeature\n\n   pick (f: separate FORK)\n      require\n"
        "         free: not f.in_use\n         sane: True\n      do\n      end\n\nend\n");
    bool ok = w.check();
    w.dump();
    REQUIRE(ok);
    const FeatureEntry* pick = w.feature("C", "pick");
    REQUIRE(!pick->chain.empty());
    const auto& pre = pick->chain.back()->pre;
    REQUIRE(pre.size() == 2);
    CHECK(pre[0].separate_clause);
    CHECK(!pre[1].separate_clause);
    CHECK(pick->chain.back()->pre_separate_any);
}

TEST_CASE("every catalogue code has an explanation and explain finds it") {
    std::set<std::string> seen;
    for (const auto& [code, text] : validity_catalogue()) {
        CHECK(code.size() == 4);
        CHECK(!text.empty());
        CHECK(seen.insert(code).second);  // no duplicates
        CHECK(explain_code(code) == &text);
    }
    CHECK(explain_code("ZZZZ") == nullptr);
}
