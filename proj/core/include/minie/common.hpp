#ifndef MINIE_COMMON_HPP
#define MINIE_COMMON_HPP

#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace minie {

struct SourcePos {
    std::string file;
    int line = 0;    // 1-based
    int column = 0;  // 1-based

    bool valid() const { return line >= 1 && column >= 1; }
    std::string to_string() const {
        std::ostringstream os;
        os << (file.empty() ? "<input>" : file) << ':' << line << ':' << column;
        return os.str();
    }
};

enum class Severity { Error, Warning, Note };

// One diagnostic line: `file:line:col: [CODE] message`.
struct Diagnostic {
    std::string code;  // 4-letter validity code, or "PARS"/"LEXI" for front-end errors
    std::string message;
    SourcePos pos;
    Severity severity = Severity::Error;

    std::string format() const {
        std::ostringstream os;
        os << pos.to_string() << ": [" << code << "] " << message;
        return os.str();
    }
};

using Diagnostics = std::vector<Diagnostic>;

inline bool has_errors(const Diagnostics& ds) {
    for (const auto& d : ds)
        if (d.severity == Severity::Error) return true;
    return false;
}

}  // namespace minie

#endif
