#pragma once

#include "reponav/repo_model.hpp"

namespace reponav {

/// Reference corpus grammar for Python 3 sources.
///
/// A tokenizer plus an indentation-structured statement walker: enough to
/// recover classes, functions, docstrings, imports, call chains and simple
/// assignments without a full expression grammar. Function nesting deeper
/// than `kMaxFunctionDepth` yields metadata-only stub units whose bodies are
/// not analysed.
class PythonGrammar final : public Grammar {
public:
    static constexpr int kMaxFunctionDepth = 3;

    std::string_view id() const override { return "python3"; }
    bool handles(std::string_view path) const override;
    std::string module_path(std::string_view path) const override;
    ParsedFile parse(const SourceFile& file, std::string_view text) const override;
};

}  // namespace reponav
