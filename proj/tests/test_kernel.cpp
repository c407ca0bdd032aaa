#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <sstream>
#include <string>

#include "minie/driver.hpp"
#include "minie/runtime.hpp"
#include "minie/typecheck.hpp"
#include "minie/views.hpp"

using namespace minie;

namespace {

struct RunResult {
    int code = -1;
    std::string out, err;
};

RunResult run_program(const std::string& src, AssertLevel lvl = AssertLevel::All) {
    Program p;
    REQUIRE(add_source_dir(p, MINIE_KERNEL_DIR));
    add_source_text(p, src, "mem.me");
    for (const auto& d : p.universe.diagnostics) MESSAGE(d.format());
    REQUIRE(check_universe(p.universe));
    REQUIRE(verify_builtin_bindings(p.universe, p.universe.diagnostics));
    RunResult r;
    std::ostringstream out, err;
    RunConfig cfg;
    cfg.assertions = lvl;
    cfg.out = &out;
    cfg.err = &err;
    Machine m(p.universe, cfg);
    r.code = m.run_entry("APP", "make");
    r.out = out.str();
    r.err = err.str();
    return r;
}

}  // namespace

TEST_CASE("trichotomy holds for 10000 pseudo-random integer pairs") {
    // the program draws its own pairs from a small LCG; the C++ twin below
    // recomputes the expected tallies independently
    const char* src = R"(class APP

create
   make

feature

   make
      local
         x, a, b, n, lt, eq, gt: INTEGER
      do
         x := 12345
         from
            n := 0
         until
            n = 10000
         loop
            x := (x * 1103 + 12345) \\ 65536
            a := x - 32768
            x := (x * 1103 + 12345) \\ 65536
            b := x - 32768
            if a < b then
               lt := lt + 1
            end
            if a = b then
               eq := eq + 1
            end
            if b < a then
               gt := gt + 1
            end
            check
               one_of_three: lt + eq + gt = n + 1
               mirror: (a > b) = (b < a)
               le: (a <= b) = (not (b < a))
               ge: (a >= b) = (not (a < b))
            end
            n := n + 1
         end
         {IO}.console.write_integer (lt)
         {IO}.console.write (" ")
         {IO}.console.write_integer (eq)
         {IO}.console.write (" ")
         {IO}.console.write_integer (gt)
         {IO}.console.write ("%N")
      end

end
)";
    RunResult r = run_program(src);
    CHECK(r.code == 0);
    CHECK(r.err == "");

    long long x = 12345, lt = 0, eq = 0, gt = 0;
    for (int n = 0; n < 10000; ++n) {
        x = (x * 1103 + 12345) % 65536;
        long long a = x - 32768;
        x = (x * 1103 + 12345) % 65536;
        long long b = x - 32768;
        if (a < b) ++lt;
        if (a == b) ++eq;
        if (b < a) ++gt;
    }
    std::ostringstream want;
    want << lt << " " << eq << " " << gt << "\n";
    CHECK(r.out == want.str());
    CHECK(lt + eq + gt == 10000);
}

TEST_CASE("string comparisons agree with the lexicographic oracle") {
    // decimal renderings of LCG draws give a mix of lengths and signs
    const char* src = R"(class APP

create
   make

feature

   make
      local
         x, n: INTEGER
         s, t: STRING
         bad: INTEGER
      do
         x := 99
         from
            n := 0
         until
            n = 10000
         loop
            x := (x * 1103 + 12345) \\ 65536
            s := (x - 32768).out
            x := (x * 1103 + 12345) \\ 65536
            t := (x - 32768).out
            check
               mirror: (s > t) = (t < s)
               le: (s <= t) = (not (t < s))
               ge: (s >= t) = (not (s < t))
            end
            if s < t then
               if t < s then
                  bad := bad + 1
               end
            end
            n := n + 1
         end
         {IO}.console.write_integer (bad)
         {IO}.console.write ("%N")
      end

end
)";
    RunResult r = run_program(src);
    CHECK(r.code == 0);
    CHECK(r.err == "");
    CHECK(r.out == "0\n");
}

TEST_CASE("NUMERIC supplies squared in terms of *") {
    const char* src = R"(class APP

create
   make

feature

   make
      local
         k: INTEGER
      do
         from
            k := -100
         until
            k > 100
         loop
            check
               squared_oracle: k.squared = k * k
            end
            k := k + 1
         end
         {IO}.console.write_integer ((-4).squared)
         {IO}.console.write ("%N")
      end

end
)";
    RunResult r = run_program(src);
    CHECK(r.code == 0);
    CHECK(r.err == "");
    CHECK(r.out == "16\n");
}

TEST_CASE("comparisons route through COMPARABLE's effective features") {
    const char* src = R"(class APP

create
   make

feature

   make
      do
         {IO}.console.write_boolean (3 < 5)
         {IO}.console.write (" ")
         {IO}.console.write_boolean (3 > 5)
         {IO}.console.write (" ")
         {IO}.console.write_boolean ("abc" < "abd")
         {IO}.console.write ("%N")
      end

end
)";
    RunResult r = run_program(src);
    CHECK(r.code == 0);
    CHECK(r.out == "True False True\n");
}

TEST_CASE("every kernel class has a contract view; INTEGER shows plus alias with no body") {
    Program p;
    REQUIRE(add_source_dir(p, MINIE_KERNEL_DIR));
    REQUIRE(flatten_universe(p.universe));
    for (const auto& [name, fc] : p.universe.flats) {
        CAPTURE(name);
        CHECK(!contract_view(*fc, false).text.empty());
        CHECK(!interface_view(*fc).text.empty());
    }
    std::string t = contract_view(*p.universe.flats.at("INTEGER"), false).text;
    CHECK(t.find("plus alias \"+\" (other: NUMERIC): INTEGER") != std::string::npos);
    CHECK(t.find("external") == std::string::npos);
    CHECK(t.find("do") == std::string::npos);
}
