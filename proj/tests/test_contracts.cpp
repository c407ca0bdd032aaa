#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <sstream>

#include "minie/driver.hpp"
#include "minie/runtime.hpp"
#include "minie/typecheck.hpp"

using namespace minie;

namespace {

struct RunResult {
    int code = -1;
    std::string out, err, trc;
};

struct Runner {
    std::vector<std::string> sources;
    std::string source_dir;  // loaded in addition to `sources` when non-empty
    AssertLevel assertions = AssertLevel::All;
    bool trace = false;
    std::string entry_class = "APP";
    std::string entry_proc = "make";

    RunResult go() {
        Program p;
        REQUIRE(add_source_dir(p, MINIE_KERNEL_DIR));
        if (!source_dir.empty()) REQUIRE(add_source_dir(p, source_dir));
        int n = 0;
        for (const auto& s : sources)
            add_source_text(p, s, "mem" + std::to_string(++n) + ".me");
        bool checked = check_universe(p.universe);
        if (!checked)
            for (const auto& d : p.universe.diagnostics) MESSAGE(d.format());
        REQUIRE(checked);

        RunResult r;
        std::ostringstream out, err, trc;
        RunConfig cfg;
        cfg.assertions = assertions;
        cfg.trace = trace;
        cfg.out = &out;
        cfg.err = &err;
        cfg.trace_out = &trc;
        Machine m(p.universe, cfg);
        r.code = m.run_entry(entry_class, entry_proc);
        r.out = out.str();
        r.err = err.str();
        r.trc = trc.str();
        return r;
    }
};

RunResult run_srcs(std::vector<std::string> srcs, AssertLevel lvl = AssertLevel::All) {
    Runner r;
    r.sources = std::move(srcs);
    r.assertions = lvl;
    return r.go();
}

std::string app(const std::string& features) {
    return "class APP\ncreate\n   make\nfeature\n" + features + "\nend\n";
}

}  // namespace

// ---------------------------------------------------------------------------
// Violation reports.
// ---------------------------------------------------------------------------

TEST_CASE("precondition violation: report names tag, origin and blames the caller") {
    RunResult r = run_srcs({app(
        "   make\n"
        "      do\n"
        "         pay (-5)\n"
        "      end\n"
        "   pay (amount: INTEGER)\n"
        "      require\n"
        "         positive: amount > 0\n"
        "      do\n"
        "      end\n")});
    CHECK(r.code == 2);
    CHECK(r.err.find("VIOLATION precondition APP.pay") != std::string::npos);
    CHECK(r.err.find("tag=positive") != std::string::npos);
    CHECK(r.err.find("origin=APP") != std::string::npos);
    CHECK(r.err.find("blamed=caller") != std::string::npos);
    CHECK(r.err.find("mem1.me:") != std::string::npos);
}

TEST_CASE("postcondition violation blames the supplier") {
    RunResult r = run_srcs({app(
        "   make\n"
        "      do\n"
        "         {IO}.console.write_integer (broken)\n"
        "      end\n"
        "   broken: INTEGER\n"
        "      do\n"
        "         Result := 1\n"
        "      ensure\n"
        "         huge: Result > 100\n"
        "      end\n")});
    CHECK(r.code == 2);
    CHECK(r.err.find("VIOLATION postcondition APP.broken") != std::string::npos);
    CHECK(r.err.find("tag=huge") != std::string::npos);
    CHECK(r.err.find("blamed=supplier") != std::string::npos);
}

TEST_CASE("invariant checked on exit of a qualified call, not around unqualified ones") {
    // `jiggle' puts the object into a bad state and repairs it through
    // unqualified calls; no violation may fire in between
    RunResult ok = run_srcs(
        {app("   make\n"
             "      local\n"
             "         c: COUNTER\n"
             "      do\n"
             "         create c.make\n"
             "         c.jiggle\n"
             "         {IO}.console.write_integer (c.value)\n"
             "      end\n"),
         "class COUNTER\ncreate\n   make\nfeature\n"
         "   value: INTEGER\n"
         "   make\n      do\n         value := 1\n      end\n"
         "   jiggle\n      do\n         wreck\n         repair\n      end\n"
         "   wreck\n      do\n         value := -7\n      end\n"
         "   repair\n      do\n         value := 7\n      end\n"
         "invariant\n"
         "   positive: value > 0\n"
         "end\n"});
    CHECK(ok.code == 0);
    CHECK(ok.out == "7");

    RunResult bad = run_srcs(
        {app("   make\n"
             "      local\n"
             "         c: COUNTER\n"
             "      do\n"
             "         create c.make\n"
             "         c.wreck\n"
             "      end\n"),
         "class COUNTER\ncreate\n   make\nfeature\n"
         "   value: INTEGER\n"
         "   make\n      do\n         value := 1\n      end\n"
         "   wreck\n      do\n         value := -7\n      end\n"
         "invariant\n"
         "   positive: value > 0\n"
         "end\n"});
    CHECK(bad.code == 2);
    CHECK(bad.err.find("VIOLATION invariant COUNTER") != std::string::npos);
    CHECK(bad.err.find("tag=positive") != std::string::npos);
}

TEST_CASE("a creation procedure establishes the invariant; it is checked at the end only") {
    RunResult r = run_srcs(
        {app("   make\n"
             "      local\n"
             "         c: COUNTER\n"
             "      do\n"
             "         create c.make_broken\n"
             "      end\n"),
         "class COUNTER\ncreate\n   make_broken\nfeature\n"
         "   value: INTEGER\n"
         "   make_broken\n      do\n      end\n"
         "invariant\n"
         "   positive: value > 0\n"
         "end\n"});
    CHECK(r.code == 2);
    CHECK(r.err.find("VIOLATION invariant") != std::string::npos);
}

TEST_CASE("check instruction fires at level all and is skipped at level pre") {
    std::string src = app(
        "   make\n"
        "      do\n"
        "         check\n"
        "            small: 10 > 20\n"
        "         end\n"
        "         {IO}.console.write (\"past\")\n"
        "      end\n");
    RunResult all = run_srcs({src}, AssertLevel::All);
    CHECK(all.code == 2);
    CHECK(all.err.find("VIOLATION check") != std::string::npos);
    CHECK(all.err.find("tag=small") != std::string::npos);

    RunResult pre = run_srcs({src}, AssertLevel::Pre);
    CHECK(pre.code == 0);
    CHECK(pre.out == "past");
}

TEST_CASE("loop variant must be non-negative and strictly decreasing") {
    RunResult r = run_srcs({app(
        "   make\n"
        "      local\n"
        "         i: INTEGER\n"
        "      do\n"
        "         from\n"
        "            i := 0\n"
        "         until\n"
        "            i > 3\n"
        "         loop\n"
        "            i := i + 1\n"
        "         variant\n"
        "            i\n"
        "         end\n"
        "      end\n")});
    CHECK(r.code == 2);
    CHECK(r.err.find("loop_variant") != std::string::npos);

    RunResult ok = run_srcs({app(
        "   make\n"
        "      local\n"
        "         i: INTEGER\n"
        "      do\n"
        "         from\n"
        "            i := 0\n"
        "         until\n"
        "            i = 4\n"
        "         loop\n"
        "            i := i + 1\n"
        "         variant\n"
        "            4 - i\n"
        "         end\n"
        "         {IO}.console.write_integer (i)\n"
        "      end\n")});
    CHECK(ok.code == 0);
    CHECK(ok.out == "4");
}

TEST_CASE("loop invariant is checked before and after every iteration") {
    RunResult r = run_srcs({app(
        "   make\n"
        "      local\n"
        "         i: INTEGER\n"
        "      do\n"
        "         from\n"
        "            i := 0\n"
        "         invariant\n"
        "            bounded: i <= 2\n"
        "         until\n"
        "            i > 5\n"
        "         loop\n"
        "            i := i + 1\n"
        "         end\n"
        "      end\n")});
    CHECK(r.code == 2);
    CHECK(r.err.find("loop_invariant") != std::string::npos);
    CHECK(r.err.find("tag=bounded") != std::string::npos);
}

// ---------------------------------------------------------------------------
// Assertion levels.
// ---------------------------------------------------------------------------

TEST_CASE("level none disables every check; level pre keeps preconditions only") {
    std::string src = app(
        "   make\n"
        "      do\n"
        "         lie (-1)\n"
        "      end\n"
        "   lie (n: INTEGER)\n"
        "      require\n"
        "         positive: n > 0\n"
        "      do\n"
        "         {IO}.console.write (\"ran \")\n"
        "      ensure\n"
        "         impossible: n > 1000\n"
        "      end\n");
    RunResult none = run_srcs({src}, AssertLevel::None);
    CHECK(none.code == 0);
    CHECK(none.out == "ran ");

    RunResult pre = run_srcs({src}, AssertLevel::Pre);
    CHECK(pre.code == 2);
    CHECK(pre.err.find("VIOLATION precondition") != std::string::npos);

    // at level pre the postcondition never fires even when the body runs
    std::string src2 = app(
        "   make\n"
        "      do\n"
        "         lie (5)\n"
        "      end\n"
        "   lie (n: INTEGER)\n"
        "      require\n"
        "         positive: n > 0\n"
        "      do\n"
        "      ensure\n"
        "         impossible: n > 1000\n"
        "      end\n");
    RunResult pre2 = run_srcs({src2}, AssertLevel::Pre);
    CHECK(pre2.code == 0);
}

TEST_CASE("assertion evaluation does not recursively monitor the features it calls") {
    // the invariant calls `sane', whose own postcondition is false; if
    // monitoring applied inside assertions this would fail (or recurse)
    RunResult r = run_srcs(
        {app("   make\n"
             "      local\n"
             "         g: GADGET\n"
             "      do\n"
             "         create g\n"
             "         g.nudge\n"
             "         {IO}.console.write (\"fine\")\n"
             "      end\n"),
         "class GADGET\nfeature\n"
         "   nudge\n      do\n      end\n"
         "   sane: BOOLEAN\n"
         "      do\n"
         "         Result := True\n"
         "      ensure\n"
         "         wrong: False\n"
         "      end\n"
         "invariant\n"
         "   holds: sane\n"
         "end\n"});
    CHECK(r.code == 0);
    CHECK(r.out == "fine");
}

// ---------------------------------------------------------------------------
// Inherited contracts: or-else / and-then composition.
// ---------------------------------------------------------------------------

namespace {

// parent accepts small values, heir additionally accepts multiples of ten
std::vector<std::string> composed_world(int arg) {
    return {
        "class APP\ncreate\n   make\nfeature\n"
        "   make\n"
        "      local\n"
        "         t: TEN\n"
        "      do\n"
        "         create t\n"
        "         t.accept (" + std::to_string(arg) + ")\n"
        "         {IO}.console.write (\"accepted\")\n"
        "      end\n"
        "end\n",
        "class SMALL\nfeature\n"
        "   accept (n: INTEGER)\n"
        "      require\n"
        "         small: n < 10\n"
        "      do\n"
        "      end\n"
        "end\n",
        "class TEN\ninherit\n   SMALL\n      redefine accept end\nfeature\n"
        "   accept (n: INTEGER)\n"
        "      require else\n"
        "         round: n \\\\ 10 = 0\n"
        "      do\n"
        "      ensure then\n"
        "         class\n"
        "      end\n"
        "end\n"};
}

}  // namespace

TEST_CASE("require else composes preconditions with or-else over the chain") {
    // parent clause alone
    CHECK(run_srcs(composed_world(3)).code == 0);
    // heir clause alone
    CHECK(run_srcs(composed_world(40)).code == 0);
    // both
    CHECK(run_srcs(composed_world(0)).code == 0);
    // neither: violation, reported against the textually first failing clause
    RunResult r = run_srcs(composed_world(17));
    CHECK(r.code == 2);
    CHECK(r.err.find("VIOLATION precondition") != std::string::npos);
    CHECK(r.err.find("tag=small") != std::string::npos);
    CHECK(r.err.find("origin=SMALL") != std::string::npos);
}

TEST_CASE("ensure then composes postconditions with and-then over the chain") {
    RunResult r = run_srcs(
        {app("   make\n"
             "      local\n"
             "         d: DOUBLER\n"
             "      do\n"
             "         create d\n"
             "         {IO}.console.write_integer (d.twice (4))\n"
             "      end\n"),
         "class BASE\nfeature\n"
         "   twice (n: INTEGER): INTEGER\n"
         "      do\n"
         "         Result := n + n\n"
         "      ensure\n"
         "         doubled: Result = n * 2\n"
         "      end\n"
         "end\n",
         "class DOUBLER\ninherit\n   BASE\n      redefine twice end\nfeature\n"
         "   twice (n: INTEGER): INTEGER\n"
         "      do\n"
         "         Result := n + n + 1\n"
         "      ensure then\n"
         "         bigger: Result >= n\n"
         "      end\n"
         "end\n"});
    // the heir's body breaks the parent's inherited clause: still binding
    CHECK(r.code == 2);
    CHECK(r.err.find("VIOLATION postcondition") != std::string::npos);
    CHECK(r.err.find("tag=doubled") != std::string::npos);
    CHECK(r.err.find("origin=BASE") != std::string::npos);
}

// ---------------------------------------------------------------------------
// Old expressions.
// ---------------------------------------------------------------------------

TEST_CASE("old captures entry values; a correct body passes, a wrong one is caught") {
    std::string account =
        "class BOXED\ncreate\n   make\nfeature\n"
        "   total: INTEGER\n"
        "   make\n      do\n      end\n"
        "   add (n: INTEGER)\n"
        "      do\n"
        "         total := total + n\n"
        "      ensure\n"
        "         grew: total = old total + n\n"
        "      end\n"
        "   add_badly (n: INTEGER)\n"
        "      do\n"
        "         total := total + n + 1\n"
        "      ensure\n"
        "         grew: total = old total + n\n"
        "      end\n"
        "end\n";
    RunResult good = run_srcs(
        {app("   make\n"
             "      local\n"
             "         b: BOXED\n"
             "      do\n"
             "         create b.make\n"
             "         b.add (3)\n"
             "         b.add (4)\n"
             "         {IO}.console.write_integer (b.total)\n"
             "      end\n"),
         account});
    CHECK(good.code == 0);
    CHECK(good.out == "7");

    RunResult bad = run_srcs(
        {app("   make\n"
             "      local\n"
             "         b: BOXED\n"
             "      do\n"
             "         create b.make\n"
             "         b.add_badly (3)\n"
             "      end\n"),
         account});
    CHECK(bad.code == 2);
    CHECK(bad.err.find("VIOLATION postcondition BOXED.add_badly") != std::string::npos);
    CHECK(bad.err.find("tag=grew") != std::string::npos);
}

TEST_CASE("an exception while capturing old is deferred until the clause needs it") {
    std::string cls =
        "class RATIO\nfeature\n"
        "   guarded (a: INTEGER): INTEGER\n"
        "      do\n"
        "         Result := 1\n"
        "      ensure\n"
        "         safe: a > 0 implies old (100 // a) >= 0\n"
        "      end\n"
        "   unguarded (a: INTEGER): INTEGER\n"
        "      do\n"
        "         Result := 1\n"
        "      ensure\n"
        "         eager: old (100 // a) >= -1\n"
        "      end\n"
        "end\n";
    // the guard shields the old marker: capture failed, but the clause never
    // looks at the slot
    RunResult guarded = run_srcs(
        {app("   make\n"
             "      local\n"
             "         r: RATIO\n"
             "      do\n"
             "         create r\n"
             "         {IO}.console.write_integer (r.guarded (0))\n"
             "      end\n"),
         cls});
    CHECK(guarded.code == 0);
    CHECK(guarded.out == "1");

    // the clause reads the slot: the captured division fault surfaces
    RunResult eager = run_srcs(
        {app("   make\n"
             "      local\n"
             "         r: RATIO\n"
             "      do\n"
             "         create r\n"
             "         {IO}.console.write_integer (r.unguarded (0))\n"
             "      end\n"),
         cls});
    CHECK(eager.code == 2);
    CHECK(eager.err.find("arithmetic") != std::string::npos);
}

// ---------------------------------------------------------------------------
// Rescue / retry.
// ---------------------------------------------------------------------------

TEST_CASE("retry re-runs the body with state intact until it succeeds") {
    RunResult r = run_srcs({app(
        "   attempts: INTEGER\n"
        "   make\n"
        "      do\n"
        "         transmit\n"
        "         {IO}.console.write_integer (attempts)\n"
        "      end\n"
        "   transmit\n"
        "      do\n"
        "         attempts := attempts + 1\n"
        "         if attempts < 4 then\n"
        "            {EXCEPTIONS}.raise (\"link_down\")\n"
        "         end\n"
        "      rescue\n"
        "         if Retry < 5 then\n"
        "            Retry := Retry + 1\n"
        "         end\n"
        "      end\n")});
    CHECK(r.code == 0);
    CHECK(r.out == "4");  // three failures, fourth attempt succeeds
}

TEST_CASE("a rescue that does not retry fails the routine, wrapping the original") {
    RunResult r = run_srcs({app(
        "   cleaned: BOOLEAN\n"
        "   make\n"
        "      do\n"
        "         risky\n"
        "      rescue\n"
        "         {IO}.console.write_boolean (cleaned)\n"
        "         {IO}.console.write (\" \")\n"
        "         {IO}.console.write ({EXCEPTIONS}.last_exception_type)\n"
        "      end\n"
        "   risky\n"
        "      do\n"
        "         {EXCEPTIONS}.raise (\"boom\")\n"
        "      rescue\n"
        "         cleaned := True\n"
        "      end\n")});
    // make's rescue observes the cleanup and the failure type, then fails too
    CHECK(r.code == 2);
    CHECK(r.out == "True routine_failure");
    CHECK(r.err.find("routine_failure") != std::string::npos);
    CHECK(r.err.find("boom") != std::string::npos);
}

TEST_CASE("a routine without rescue fails immediately and the chain keeps the cause") {
    Runner runner;
    runner.trace = true;
    runner.sources = {app(
        "   make\n"
        "      do\n"
        "         middle\n"
        "      end\n"
        "   middle\n"
        "      do\n"
        "         inner\n"
        "      end\n"
        "   inner\n"
        "      do\n"
        "         {EXCEPTIONS}.raise (\"root\")\n"
        "      end\n")};
    RunResult r = runner.go();
    CHECK(r.code == 2);
    CHECK(r.trc.find("FAIL programmer_raised") != std::string::npos);
    CHECK(r.trc.find("FAIL routine_failure") != std::string::npos);
    CHECK(r.err.find("root") != std::string::npos);
}

TEST_CASE("a caught precondition violation is visible to the rescuing caller") {
    RunResult r = run_srcs({app(
        "   make\n"
        "      do\n"
        "         attempt\n"
        "         {IO}.console.write (\"recovered\")\n"
        "      end\n"
        "   attempt\n"
        "      local\n"
        "         tried: BOOLEAN\n"
        "      do\n"
        "         if not tried then\n"
        "            fussy (-1)\n"
        "         end\n"
        "      rescue\n"
        "         if not tried then\n"
        "            tried := True\n"
        "            Retry := 1\n"
        "         end\n"
        "      end\n"
        "   fussy (n: INTEGER)\n"
        "      require\n"
        "         positive: n > 0\n"
        "      do\n"
        "      end\n")});
    CHECK(r.code == 0);
    CHECK(r.out == "recovered");
    CHECK(r.err.find("VIOLATION precondition") != std::string::npos);
}

// ---------------------------------------------------------------------------
// Quantifiers against a brute-force oracle.
// ---------------------------------------------------------------------------

TEST_CASE("quantifier folds agree with a brute-force oracle on random arrays") {
    std::mt19937 gen(20260823);
    std::uniform_int_distribution<int> len(0, 12);
    std::uniform_int_distribution<int> val(-20, 20);

    std::string body;
    std::string expected;
    for (int c = 0; c < 12; ++c) {
        std::vector<int> xs(static_cast<size_t>(len(gen)));
        for (auto& x : xs) x = val(gen);
        bool all_pos = true, some_big = false;
        for (int x : xs) {
            if (x <= 0) all_pos = false;
            if (x > 10) some_big = true;
        }
        body += "         create l.make\n";
        for (int x : xs)
            body += "         l.extend (" + std::to_string(x) + ")\n";
        body += "         {IO}.console.write_boolean (across l as x all x > 0 end)\n";
        body += "         {IO}.console.write_boolean (across l as x some x > 10 end)\n";
        body += "         {IO}.console.write (\"%N\")\n";
        expected += std::string(all_pos ? "True" : "False") +
                    (some_big ? "True" : "False") + "\n";
    }
    RunResult r = run_srcs({app(
        "   make\n"
        "      local\n"
        "         l: LIST [INTEGER]\n"
        "      do\n" +
        body + "      end\n")});
    CHECK(r.code == 0);
    CHECK(r.out == expected);
}

// ---------------------------------------------------------------------------
// Uniform access: two representations, one contract, same behavior.
// ---------------------------------------------------------------------------

TEST_CASE("the two ACCOUNT representations produce identical output") {
    Runner a;
    a.source_dir = std::string(MINIE_CORPUS_DIR) + "/account_a";
    a.entry_proc = "run";
    RunResult ra = a.go();

    Runner b;
    b.source_dir = std::string(MINIE_CORPUS_DIR) + "/account_b";
    b.entry_proc = "run";
    RunResult rb = b.go();

    CHECK(ra.code == 0);
    CHECK(rb.code == 0);
    CHECK(ra.err.empty());
    CHECK(ra.out == rb.out);
    CHECK(ra.out.find("balance") != std::string::npos);
}
