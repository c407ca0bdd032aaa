#ifndef MINIE_TYPES_HPP
#define MINIE_TYPES_HPP

#include <string>
#include <vector>

namespace minie {

// A type: base class + generic arguments + attachment mark + separateness mark.
// Basic types (INTEGER, REAL, BOOLEAN, CHARACTER) are always attached.
struct TypeRef {
    std::string base;
    std::vector<TypeRef> args;
    bool detachable = false;
    bool separate = false;

    TypeRef() = default;
    explicit TypeRef(std::string b) : base(std::move(b)) {}
    TypeRef(std::string b, std::vector<TypeRef> a) : base(std::move(b)), args(std::move(a)) {}

    bool valid() const { return !base.empty(); }

    bool operator==(const TypeRef& o) const {
        return base == o.base && detachable == o.detachable && separate == o.separate &&
               args == o.args;
    }
    bool operator!=(const TypeRef& o) const { return !(*this == o); }

    TypeRef as_attached() const {
        TypeRef t = *this;
        t.detachable = false;
        return t;
    }
    TypeRef as_detachable() const {
        TypeRef t = *this;
        t.detachable = true;
        return t;
    }

    std::string to_string() const {
        std::string s;
        if (detachable) s += "detachable ";
        if (separate) s += "separate ";
        s += base;
        if (!args.empty()) {
            s += " [";
            for (size_t i = 0; i < args.size(); ++i) {
                if (i) s += ", ";
                s += args[i].to_string();
            }
            s += "]";
        }
        return s;
    }
};

bool is_basic_type(const std::string& base);

}  // namespace minie

#endif
