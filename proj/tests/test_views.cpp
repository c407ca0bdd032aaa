#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>
#include <vector>

#include "minie/driver.hpp"
#include "minie/model.hpp"
#include "minie/printer.hpp"
#include "minie/views.hpp"

using namespace minie;

namespace {

Program kernel_plus(const std::vector<std::string>& texts) {
    Program p;
    REQUIRE(add_source_dir(p, MINIE_KERNEL_DIR));
    int n = 0;
    for (const auto& t : texts) add_source_text(p, t, "mem" + std::to_string(++n) + ".me");
    for (const auto& d : p.universe.diagnostics) MESSAGE(d.format());
    REQUIRE(p.universe.diagnostics.empty());
    REQUIRE(flatten_universe(p.universe));
    return p;
}

const FlatClass& flat(const Program& p, const std::string& name) {
    auto it = p.universe.flats.find(name);
    REQUIRE(it != p.universe.flats.end());
    return *it->second;
}

bool contains(const std::string& hay, const std::string& needle) {
    return hay.find(needle) != std::string::npos;
}

// Reparse the flat view of `cls` in isolation, reflatten, and return the
// model serialization. The flat text carries no inherit clause, so its only
// dependency is the implicit ANY parent.
std::string reflattened(const Program& p, const std::string& cls) {
    Program q;
    for (const auto& ast : p.asts) {
        if (ast->name != cls && ast->name != "ANY") continue;
        std::string text =
            ast->name == cls ? flat_view(flat(p, cls)).text : print_class(*ast);
        if (!add_source_text(q, text, ast->name + ".me"))
            for (const auto& d : q.universe.diagnostics) MESSAGE(d.format());
    }
    REQUIRE(q.universe.diagnostics.empty());
    if (!flatten_universe(q.universe))
        for (const auto& d : q.universe.diagnostics) MESSAGE(d.format());
    REQUIRE(q.universe.diagnostics.empty());
    return serialize_flat(flat(q, cls), false);
}

const char* kBase = R"(class BASE

feature

   base_ready: BOOLEAN
         -- Is the base initialized?
      do
         Result := True
      end

end
)";

const char* kGadget = R"(class GADGET
      -- A gadget with a weight budget.

inherit
   BASE

create
   make

feature

   weight: INTEGER assign set_weight
         -- Mass in grams.

   limit: INTEGER = 400

   plus alias "+" (other: GADGET): INTEGER
         -- Combined weight.
      local
         w: INTEGER
      do
         w := other.weight
         Result := weight + w
      end

   set_weight (w: INTEGER)
      require
         small: w <= limit
      do
         weight := w
      ensure
         set: weight = w
      end

   make
      do
      end

feature {NONE}

   secret_helper
      do
      end

invariant
   sane: weight <= limit

end
)";

const char* kPerson = R"(class PERSON

feature

   age: INTEGER

   set_age (a: INTEGER)
      require
         valid: a >= 0
      do
         age := a
      ensure
         set: age = a
      end

invariant
   non_negative: age >= 0

end
)";

const char* kStudent = R"(class STUDENT

inherit
   PERSON
      redefine
         set_age
      end

feature

   set_age (a: INTEGER)
      require else
         young: a <= 200
      do
         if a <= 200 then
            age := a
         end
      ensure then
         capped: age <= 200
      end

invariant
   reasonable: age <= 200

end
)";

}  // namespace

TEST_CASE("uniform access: attribute and function variants render one view") {
    Program a;
    REQUIRE(add_source_dir(a, MINIE_KERNEL_DIR));
    REQUIRE(add_source_dir(a, MINIE_CORPUS_DIR "/account_a"));
    REQUIRE(flatten_universe(a.universe));
    Program b;
    REQUIRE(add_source_dir(b, MINIE_KERNEL_DIR));
    REQUIRE(add_source_dir(b, MINIE_CORPUS_DIR "/account_b"));
    REQUIRE(flatten_universe(b.universe));

    ViewDoc va = contract_view(flat(a, "ACCOUNT"), false);
    ViewDoc vb = contract_view(flat(b, "ACCOUNT"), false);
    CHECK(va.text == vb.text);
    CHECK(contains(va.text, "balance: INTEGER"));
    CHECK(contains(va.text, "Current balance of this account."));
    // the interface views agree too: the flat models differ only in bodies
    CHECK(interface_view(flat(a, "ACCOUNT")).text ==
          interface_view(flat(b, "ACCOUNT")).text);
}

TEST_CASE("contract view: no bodies, no secrets, no implementation markers") {
    Program p = kernel_plus({kBase, kGadget});
    std::string t = contract_view(flat(p, "GADGET"), false).text;

    CHECK(contains(t, "class GADGET"));
    CHECK(contains(t, "-- A gadget with a weight budget."));
    CHECK(contains(t, "inherit"));
    CHECK(contains(t, "   BASE"));
    CHECK(contains(t, "create"));

    // attribute, constant and function all read as plain queries
    CHECK(contains(t, "weight: INTEGER assign set_weight"));
    CHECK(contains(t, "limit: INTEGER\n"));
    CHECK(!contains(t, "= 400"));
    CHECK(contains(t, "plus alias \"+\" (other: GADGET): INTEGER"));
    CHECK(!contains(t, "do"));
    CHECK(!contains(t, "attribute"));
    CHECK(!contains(t, "local"));
    CHECK(!contains(t, "Result"));

    CHECK(contains(t, "require\n"));
    CHECK(contains(t, "small: w <= limit"));
    CHECK(contains(t, "set: weight = w"));
    CHECK(!contains(t, "secret_helper"));
    CHECK(contains(t, "invariant\n   sane: weight <= limit"));

    // determinism: rendering twice gives the same bytes
    CHECK(t == contract_view(flat(p, "GADGET"), false).text);
}

TEST_CASE("interface view annotates inherited clauses with their origin") {
    Program p = kernel_plus({kPerson, kStudent});
    std::string t = interface_view(flat(p, "STUDENT")).text;

    CHECK(contains(t, "require -- from PERSON\n         valid: a >= 0"));
    CHECK(contains(t, "require else\n         young: a <= 200"));
    CHECK(contains(t, "ensure -- from PERSON\n         set: age = a"));
    CHECK(contains(t, "ensure then\n         capped: age <= 200"));
    // own clauses carry no annotation
    CHECK(!contains(t, "require else -- from"));
    CHECK(!contains(t, "ensure then -- from"));

    // inherited invariant clauses are annotated, own ones are not
    CHECK(contains(t, "-- from PERSON\n   non_negative: age >= 0"));
    CHECK(contains(t, "\n   reasonable: age <= 200"));

    // the interface view is the contract view over the flattened class
    ViewDoc direct = contract_view(flat(p, "STUDENT"), true);
    CHECK(t == direct.text);
    CHECK(interface_view(flat(p, "STUDENT")).kind == ViewKind::Interface);
}

TEST_CASE("interface view shows universal features with -- from ANY") {
    Program p = kernel_plus({kPerson});
    std::string t = interface_view(flat(p, "PERSON")).text;

    CHECK(contains(t, "copy (other: ANY)"));
    CHECK(contains(t, "require -- from ANY\n         type_identity: same_type (other)"));
    CHECK(contains(t, "ensure -- from ANY\n         is_equal: Current ~ other"));
}

TEST_CASE("flat view includes inherited features and composes contracts") {
    Program p = kernel_plus({kPerson, kStudent});
    std::string t = flat_view(flat(p, "STUDENT")).text;

    // inherited attribute and body, redefined body, composed contract chain
    CHECK(contains(t, "age: INTEGER"));
    CHECK(contains(t, "set_age (a: INTEGER)"));
    CHECK(contains(t, "a >= 0 or else a <= 200"));
    CHECK(contains(t, "age = a and then age <= 200"));
    CHECK(!contains(t, "inherit"));

    // universal features appear with their bodies, but their contracts stay
    // with the implicit ANY parent (reparsing restores them)
    CHECK(contains(t, "copy (other: ANY)"));
    CHECK(contains(t, "external \"any_copy\""));
    CHECK(!contains(t, "type_identity"));

    // both invariants, unannotated
    CHECK(contains(t, "invariant\n   non_negative: age >= 0\n   reasonable: age <= 200"));
}

TEST_CASE("flat view is a fixed point of flattening") {
    const char* queue_base = R"(class QUEUE_BASE

feature

   put (x: INTEGER)
      do
         last := x
      end

   last: INTEGER

end
)";
    const char* outbox = R"(class OUTBOX

inherit
   QUEUE_BASE
      rename
         put as enqueue
      end

feature

   flush
      do
         enqueue (0)
      end

end
)";
    Program p = kernel_plus({kBase, kGadget, kPerson, kStudent, queue_base, outbox});
    for (const auto& [name, fc] : p.universe.flats) {
        CAPTURE(name);
        CHECK(reflattened(p, name) == serialize_flat(*fc, false));
    }
}

TEST_CASE("flat view of the account corpus is a fixed point too") {
    Program p;
    REQUIRE(add_source_dir(p, MINIE_KERNEL_DIR));
    REQUIRE(add_source_dir(p, MINIE_CORPUS_DIR "/account_a"));
    REQUIRE(flatten_universe(p.universe));
    for (const auto& [name, fc] : p.universe.flats) {
        CAPTURE(name);
        CHECK(reflattened(p, name) == serialize_flat(*fc, false));
    }
}

TEST_CASE("html rendering escapes the text") {
    ViewDoc d;
    d.kind = ViewKind::Flat;
    d.class_name = "GADGET";
    d.text = "a < b & c > d";
    std::string h = render_html(d);
    CHECK(contains(h, "a &lt; b &amp; c &gt; d"));
    CHECK(contains(h, "<title>GADGET"));
    CHECK(contains(h, "flat view"));
    CHECK(!contains(h, "a < b"));
}
