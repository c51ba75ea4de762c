#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace reponav {

// Syntax facts a grammar extracts alongside units. Unit references are
// indices into the owning file's unit list (0 is always the File unit).

enum class SegmentKind { Name, Attr, Call, Subscript };

struct ChainSegment {
    SegmentKind kind = SegmentKind::Name;
    std::string name;  ///< empty for Call/Subscript

    bool operator==(const ChainSegment&) const = default;
};

/// Postfix expression chain such as `self.loader.load` or `Loader().load`.
using Chain = std::vector<ChainSegment>;

std::string render_chain(const Chain& chain);

struct ImportName {
    std::string name;   ///< dotted for plain imports, a single identifier for from-imports
    std::string alias;  ///< empty when not aliased
};

struct ImportStmt {
    int line = 0;
    int scope = 0;
    bool is_from = false;
    int level = 0;       ///< leading dots of a relative from-import
    std::string module;  ///< from-import source module (may be empty for `from . import x`)
    bool star = false;
    std::vector<ImportName> names;
};

struct CallSite {
    int line = 0;
    int scope = 0;            ///< innermost analysed function, or 0 for module level
    int class_body = -1;      ///< class whose body holds the call directly, if any
    Chain callee;
    std::vector<int> blocks;  ///< enclosing block ids, outermost first
    bool comprehension_bound = false;  ///< primary name is a comprehension variable
};

struct Assignment {
    int line = 0;
    int scope = 0;
    int class_body = -1;
    std::string target;                ///< `name` or `self.name`
    std::optional<Chain> constructor;  ///< set when the value is exactly `Dotted.Name(...)`
    std::vector<int> blocks;
};

struct ScopeInfo {
    std::vector<std::string> params;
    std::set<std::string> locals;   ///< every name bound in the scope, params included
    std::set<std::string> globals;  ///< `global`/`nonlocal` declarations
    int enclosing_class = -1;       ///< set for methods
    bool is_classmethod = false;
    bool is_staticmethod = false;
};

struct FileSyntax {
    std::vector<ImportStmt> imports;
    std::vector<CallSite> calls;
    std::vector<Assignment> assignments;
    std::map<int, ScopeInfo> scopes;  ///< keyed by unit index; 0 = module scope
};

}  // namespace reponav
