#ifndef MINIE_TYPECHECK_HPP
#define MINIE_TYPECHECK_HPP

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "minie/model.hpp"

namespace minie {

// Validity-code catalogue: code -> full if-and-only-if rule, in declaration
// order. Every diagnostic the toolchain can emit uses one of these codes.
const std::vector<std::pair<std::string, std::string>>& validity_catalogue();
const std::string* explain_code(const std::string& code);

// One applicable conversion route between two types.
struct ConversionRoute {
    std::string class_name;  // class declaring the convert clause
    std::string feature;     // conversion procedure (from) or function (to)
    bool from = false;       // true: creation procedure in the target's class
    TypeRef target;          // the type converted to
};

class Checker {
public:
    explicit Checker(Universe& u) : u_(u) {}

    // Checks and unfolds every flattened class. Appends diagnostics to the
    // universe; returns false iff any error. Idempotent: running twice over
    // the same universe leaves it unchanged and reports nothing new.
    bool run();

    // t conforms to u: inheritance + generic variance + attachment +
    // separateness. Public for tests and the runtime's defensive checks.
    bool conforms(const TypeRef& t, const TypeRef& u) const;

    // The unique conversion route from t to u, if any. Ambiguity between
    // routes is reported at `pos` (when report is set) and yields none.
    std::optional<ConversionRoute> converts_to(const TypeRef& t, const TypeRef& u,
                                               const SourcePos& pos, bool report);

private:
    friend struct Typer;
    Universe& u_;
    std::vector<std::string> seen_;  // dedupe key per reported diagnostic

    void report(const std::string& code, const std::string& msg, const SourcePos& pos);
    bool resolve_type(TypeRef& t, const FlatClass& cls, const SourcePos& pos);
    bool conforms_base(const TypeRef& t, const TypeRef& u) const;
    void check_class(FlatClass& cls);
    void check_convert_clauses(FlatClass& cls);
    void check_assigners(FlatClass& cls);
    void check_redeclaration_marks(FlatClass& cls);
    void check_entry(FlatClass& cls, FeatureEntry& entry);
    void check_initialization(FlatClass& cls);
};

// Flatten + check + unfold in one step (parse diagnostics must be clean).
bool check_universe(Universe& u);

}  // namespace minie

#endif
