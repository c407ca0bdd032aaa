#ifndef MINIE_DRIVER_HPP
#define MINIE_DRIVER_HPP

#include <memory>
#include <string>
#include <vector>

#include "minie/ast.hpp"
#include "minie/model.hpp"

namespace minie {

// A set of parsed class texts plus the universe built over them.
// Owns the ASTs the universe points into.
struct Program {
    std::vector<std::unique_ptr<ClassAst>> asts;
    Universe universe;

    // Registers one parsed class; duplicate class names are a diagnostic.
    void add_class(std::unique_ptr<ClassAst> ast);
};

// Parse and register sources. Return false iff any diagnostic was added.
bool add_source_text(Program& p, const std::string& text, const std::string& filename);
bool add_source_file(Program& p, const std::string& path);
bool add_source_dir(Program& p, const std::string& dir);  // every *.me, recursively, sorted

// Kernel location: MINIE_KERNEL env var when set, else `fallback`.
std::string kernel_dir(const std::string& fallback);

}  // namespace minie

#endif
