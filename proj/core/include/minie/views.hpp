#ifndef MINIE_VIEWS_HPP
#define MINIE_VIEWS_HPP

#include <string>

#include "minie/model.hpp"

namespace minie {

enum class ViewKind { Contract, Flat, Interface };

struct ViewDoc {
    ViewKind kind = ViewKind::Contract;
    std::string class_name;
    std::string text;
};

// The class text minus routine bodies and minus non-exported features.
// Attributes, constants and functions all render as plain queries, so the
// view never betrays how a query is implemented. With include_inherited the
// view is computed over the flattened class instead of the class text, and
// every inherited contract clause carries a `-- from ORIGIN` annotation.
ViewDoc contract_view(const FlatClass& cls, bool include_inherited);

// The reconstructed full text of the flattened class: every feature,
// inherited ones included, with renamings and redefinitions applied and
// contract chains composed. Reparsing and reflattening the result yields a
// model equal to the original.
ViewDoc flat_view(const FlatClass& cls);

// The contract view of the flat view.
inline ViewDoc interface_view(const FlatClass& cls) {
    ViewDoc d = contract_view(cls, true);
    d.kind = ViewKind::Interface;
    return d;
}

// Stand-alone HTML page wrapping a rendered view.
std::string render_html(const ViewDoc& doc);

}  // namespace minie

#endif
