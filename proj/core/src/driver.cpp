#include "minie/driver.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "minie/parser.hpp"

namespace minie {

namespace fs = std::filesystem;

void Program::add_class(std::unique_ptr<ClassAst> ast) {
    auto [it, fresh] = universe.classes.emplace(ast->name, ast.get());
    if (!fresh) {
        universe.diagnostics.push_back(
            {"VSCN",
             "class " + ast->name + " is declared more than once (also in " +
                 it->second->file + "); class names are unique in a universe",
             ast->begin_pos});
        return;
    }
    asts.push_back(std::move(ast));
}

bool add_source_text(Program& p, const std::string& text, const std::string& filename) {
    ParseResult r = parse_source(text, filename);
    for (auto& d : r.diagnostics) p.universe.diagnostics.push_back(d);
    if (!r.ok()) return false;
    p.add_class(std::move(r.ast));
    return !has_errors(p.universe.diagnostics);
}

bool add_source_file(Program& p, const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        p.universe.diagnostics.push_back({"FILE", "cannot read " + path, {path, 1, 1}});
        return false;
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return add_source_text(p, ss.str(), path);
}

bool add_source_dir(Program& p, const std::string& dir) {
    std::error_code ec;
    std::vector<std::string> files;
    for (auto it = fs::recursive_directory_iterator(dir, ec);
         !ec && it != fs::recursive_directory_iterator(); ++it)
        if (it->is_regular_file() && it->path().extension() == ".me")
            files.push_back(it->path().string());
    if (ec) {
        p.universe.diagnostics.push_back({"FILE", "cannot read directory " + dir, {dir, 1, 1}});
        return false;
    }
    std::sort(files.begin(), files.end());
    bool ok = true;
    for (const auto& f : files) ok = add_source_file(p, f) && ok;
    return ok;
}

std::string kernel_dir(const std::string& fallback) {
    if (const char* env = std::getenv("MINIE_KERNEL"); env && *env) return env;
    return fallback;
}

}  // namespace minie
