#include "reponav/python_grammar.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <string>
#include <unordered_set>

namespace reponav {
namespace {

enum class Tok { Name, Number, String, Op };

struct Token {
    Tok type = Tok::Op;
    std::string_view text;
    int line = 0;
    int end_line = 0;
    std::size_t begin = 0;
    std::size_t end = 0;
};

struct LogicalLine {
    std::vector<Token> toks;
    std::vector<int> match;  ///< index of the matching bracket, -1 otherwise
    int indent = 0;
    int start_line = 0;
    int end_line = 0;
};

struct SyntaxFailure {
    int line;
    std::string message;
};

bool is_name_start(char c) {
    auto u = static_cast<unsigned char>(c);
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || u >= 0x80;
}

bool is_name_char(char c) { return is_name_start(c) || (c >= '0' && c <= '9'); }

bool is_string_prefix(std::string_view p) {
    if (p.size() > 2) return false;
    for (char c : p) {
        switch (c) {
            case 'r': case 'R': case 'b': case 'B': case 'u': case 'U': case 'f': case 'F': break;
            default: return false;
        }
    }
    return true;
}

const std::unordered_set<std::string_view>& keywords() {
    static const std::unordered_set<std::string_view> kw = {
        "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue",
        "def", "del", "elif", "else", "except", "finally", "for", "from", "global", "if", "import",
        "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try", "while",
        "with", "yield"};
    return kw;
}

bool is_keyword(std::string_view s) { return keywords().count(s) != 0; }

constexpr std::array<std::string_view, 5> kOps3 = {"**=", "//=", ">>=", "<<=", "..."};
constexpr std::array<std::string_view, 19> kOps2 = {"**", "//", ">>", "<<", "<=", ">=", "==", "!=", "->", "+=",
                                                    "-=", "*=", "/=", "%=", "&=", "|=", "^=", "@=", ":="};
constexpr std::string_view kOps1 = "+-*/%@&|^~<>()[]{},:.;=";

class Lexer {
public:
    explicit Lexer(std::string_view src) : s_(src) {}

    std::vector<LogicalLine> run() {
        while (i_ < s_.size()) {
            if (line_start_) {
                start_line();
                continue;
            }
            char c = s_[i_];
            if (c == ' ' || c == '\t' || c == '\f' || c == '\r') {
                ++i_;
            } else if (c == '#') {
                while (i_ < s_.size() && s_[i_] != '\n') ++i_;
            } else if (c == '\\') {
                continuation();
            } else if (c == '\n') {
                ++i_;
                ++line_;
                if (brackets_.empty()) {
                    finish();
                    line_start_ = true;
                }
            } else if (is_name_start(c) || c == '\'' || c == '"') {
                name_or_string();
            } else if ((c >= '0' && c <= '9') || (c == '.' && i_ + 1 < s_.size() && s_[i_ + 1] >= '0' && s_[i_ + 1] <= '9')) {
                number();
            } else {
                op();
            }
        }
        if (!brackets_.empty()) fail("unexpected EOF: unclosed bracket");
        finish();
        return std::move(out_);
    }

private:
    [[noreturn]] void fail(const std::string& msg) { throw SyntaxFailure{line_, msg}; }

    void start_line() {
        int col = 0;
        std::size_t j = i_;
        while (j < s_.size() && (s_[j] == ' ' || s_[j] == '\t' || s_[j] == '\f')) {
            col = s_[j] == '\t' ? (col / 8 + 1) * 8 : (s_[j] == '\f' ? 0 : col + 1);
            ++j;
        }
        if (j >= s_.size()) {
            i_ = j;
            return;
        }
        if (s_[j] == '\n' || s_[j] == '\r' || s_[j] == '#') {
            while (j < s_.size() && s_[j] != '\n') ++j;
            if (j < s_.size()) {
                ++j;
                ++line_;
            }
            i_ = j;
            return;
        }
        cur_.indent = col;
        cur_.start_line = line_;
        line_start_ = false;
        i_ = j;
    }

    void continuation() {
        std::size_t j = i_ + 1;
        if (j < s_.size() && s_[j] == '\r') ++j;
        if (j >= s_.size()) {
            i_ = j;
            return;
        }
        if (s_[j] != '\n') fail("unexpected character after line continuation character");
        i_ = j + 1;
        ++line_;
    }

    void push(Tok type, std::size_t begin, std::size_t end, int start_line) {
        cur_.toks.push_back(Token{type, s_.substr(begin, end - begin), start_line, line_, begin, end});
    }

    void name_or_string() {
        std::size_t j = i_;
        while (j < s_.size() && is_name_char(s_[j])) ++j;
        if (j < s_.size() && (s_[j] == '\'' || s_[j] == '"') && is_string_prefix(s_.substr(i_, j - i_))) {
            string_literal(i_, j);
            return;
        }
        push(Tok::Name, i_, j, line_);
        i_ = j;
    }

    void string_literal(std::size_t begin, std::size_t q) {
        int start = line_;
        char quote = s_[q];
        bool triple = q + 2 < s_.size() && s_[q + 1] == quote && s_[q + 2] == quote;
        std::size_t j = q + (triple ? 3 : 1);
        while (true) {
            if (j >= s_.size()) fail(triple ? "unterminated triple-quoted string literal" : "unterminated string literal");
            char d = s_[j];
            if (d == '\\') {
                if (j + 1 < s_.size() && s_[j + 1] == '\n') ++line_;
                j += 2;
                continue;
            }
            if (d == '\n') {
                if (!triple) fail("unterminated string literal");
                ++line_;
                ++j;
                continue;
            }
            if (d == quote) {
                if (!triple) {
                    ++j;
                    break;
                }
                if (j + 2 < s_.size() && s_[j + 1] == quote && s_[j + 2] == quote) {
                    j += 3;
                    break;
                }
            }
            ++j;
        }
        push(Tok::String, begin, j, start);
        i_ = j;
    }

    void number() {
        std::size_t j = i_;
        bool hex = s_[j] == '0' && j + 1 < s_.size() && (s_[j + 1] == 'x' || s_[j + 1] == 'X');
        while (j < s_.size()) {
            char c = s_[j];
            if (is_name_char(c) || c == '.') {
                ++j;
            } else if ((c == '+' || c == '-') && !hex && (s_[j - 1] == 'e' || s_[j - 1] == 'E')) {
                ++j;
            } else {
                break;
            }
        }
        push(Tok::Number, i_, j, line_);
        i_ = j;
    }

    void op() {
        auto rest = s_.substr(i_);
        for (auto o : kOps3) {
            if (rest.substr(0, 3) == o) return emit_op(3);
        }
        for (auto o : kOps2) {
            if (rest.substr(0, 2) == o) return emit_op(2);
        }
        char c = s_[i_];
        if (kOps1.find(c) == std::string_view::npos) fail(std::string("invalid character '") + c + "'");
        if (c == '(' || c == '[' || c == '{') {
            brackets_.push_back(c);
        } else if (c == ')' || c == ']' || c == '}') {
            char open = c == ')' ? '(' : (c == ']' ? '[' : '{');
            if (brackets_.empty() || brackets_.back() != open) fail(std::string("unmatched '") + c + "'");
            brackets_.pop_back();
        }
        emit_op(1);
    }

    void emit_op(std::size_t n) {
        push(Tok::Op, i_, i_ + n, line_);
        i_ += n;
    }

    void finish() {
        if (!cur_.toks.empty()) {
            cur_.end_line = cur_.toks.back().end_line;
            cur_.match.assign(cur_.toks.size(), -1);
            std::vector<int> stack;
            for (int k = 0; k < static_cast<int>(cur_.toks.size()); ++k) {
                const auto& t = cur_.toks[k];
                if (t.type != Tok::Op) continue;
                if (t.text == "(" || t.text == "[" || t.text == "{") {
                    stack.push_back(k);
                } else if (t.text == ")" || t.text == "]" || t.text == "}") {
                    cur_.match[k] = stack.back();
                    cur_.match[stack.back()] = k;
                    stack.pop_back();
                }
            }
            out_.push_back(std::move(cur_));
        }
        cur_ = LogicalLine{};
    }

    std::string_view s_;
    std::size_t i_ = 0;
    int line_ = 1;
    bool line_start_ = true;
    std::vector<char> brackets_;
    LogicalLine cur_;
    std::vector<LogicalLine> out_;
};

bool is_op(const Token& t, std::string_view text) { return t.type == Tok::Op && t.text == text; }
bool is_name(const Token& t, std::string_view text) { return t.type == Tok::Name && t.text == text; }

/// Strips prefix and quotes and dedents like inspect.cleandoc.
std::string clean_docstring(const std::vector<Token>& toks, std::size_t b, std::size_t e) {
    std::string raw;
    for (std::size_t k = b; k < e; ++k) {
        auto t = toks[k].text;
        std::size_t p = 0;
        while (p < t.size() && t[p] != '\'' && t[p] != '"') ++p;
        char q = t[p];
        std::size_t qn = (p + 2 < t.size() && t[p + 1] == q && t[p + 2] == q && t.size() - p >= 6) ? 3 : 1;
        raw.append(t.substr(p + qn, t.size() - p - 2 * qn));
    }
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (true) {
        auto nl = raw.find('\n', start);
        lines.push_back(raw.substr(start, nl == std::string::npos ? std::string::npos : nl - start));
        if (nl == std::string::npos) break;
        start = nl + 1;
    }
    std::size_t margin = std::string::npos;
    for (std::size_t k = 1; k < lines.size(); ++k) {
        auto pos = lines[k].find_first_not_of(" \t");
        if (pos != std::string::npos) margin = std::min(margin, pos);
    }
    auto trim_left = [](std::string& s) { s.erase(0, std::min(s.size(), s.find_first_not_of(" \t"))); };
    trim_left(lines[0]);
    for (std::size_t k = 1; k < lines.size(); ++k) {
        if (margin != std::string::npos && lines[k].size() >= margin) {
            lines[k].erase(0, margin);
        } else {
            trim_left(lines[k]);
        }
    }
    for (auto& l : lines) {
        while (!l.empty() && (l.back() == ' ' || l.back() == '\t' || l.back() == '\r')) l.pop_back();
    }
    while (!lines.empty() && lines.front().empty()) lines.erase(lines.begin());
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    std::string out;
    for (std::size_t k = 0; k < lines.size(); ++k) {
        if (k) out.push_back('\n');
        out += lines[k];
    }
    return out;
}

class Walker {
public:
    Walker(const SourceFile& file, std::string module, std::vector<LogicalLine> lines)
        : file_(file), module_(std::move(module)), lines_(std::move(lines)) {}

    ParsedFile run() {
        build_structure();

        PendingUnit file_unit;
        file_unit.kind = UnitKind::File;
        file_unit.span = LineSpan{1, file_.line_count};
        file_unit.header_end = 0;
        units_.push_back(std::move(file_unit));
        qual_.push_back("");
        syntax_.scopes[0] = ScopeInfo{};

        if (!top_.empty() && all_strings(lines_[top_[0]].toks, 0, lines_[top_[0]].toks.size())) {
            const auto& l = lines_[top_[0]];
            PendingUnit doc;
            doc.kind = UnitKind::Documentation;
            doc.span = LineSpan{l.start_line, l.end_line};
            doc.doc_span = doc.span;
            doc.header_end = l.start_line - 1;
            doc.docstring = clean_docstring(l.toks, 0, l.toks.size());
            doc.parent_index_ = 0;
            units_[0].docstring = doc.docstring;
            units_.push_back(std::move(doc));
            qual_.push_back("__doc__");
        }

        Ctx ctx;
        ctx.blocks = {0};
        process_block(top_, ctx);
        return finalize();
    }

private:
    struct Ctx {
        int parent = 0;
        int scope = 0;
        int class_body = -1;
        int func_depth = 0;
        bool in_stub = false;
        std::vector<int> blocks;
    };

    // Units carry a string parent id; indices are tracked until ids are final.
    struct PendingUnit : CodeUnit {
        int parent_index_ = -1;
    };

    [[noreturn]] void fail(int line, const std::string& msg) { throw SyntaxFailure{line, msg}; }

    static bool all_strings(const std::vector<Token>& toks, std::size_t b, std::size_t e) {
        if (b >= e) return false;
        for (std::size_t k = b; k < e; ++k) {
            if (toks[k].type != Tok::String) return false;
        }
        return true;
    }

    void build_structure() {
        std::vector<int> indents{0};
        bool expect_block = false;
        int prev_line = 0;
        for (const auto& l : lines_) {
            if (expect_block) {
                if (l.indent <= indents.back()) fail(l.start_line, "expected an indented block");
                indents.push_back(l.indent);
            } else if (l.indent > indents.back()) {
                fail(l.start_line, "unexpected indent");
            } else {
                while (l.indent < indents.back()) indents.pop_back();
                if (l.indent != indents.back()) fail(l.start_line, "unindent does not match any outer indentation level");
            }
            expect_block = is_op(l.toks.back(), ":");
            prev_line = l.end_line;
        }
        if (expect_block) fail(prev_line, "expected an indented block at end of file");

        children_.assign(lines_.size(), {});
        std::vector<std::pair<int, int>> openers;  // (indent, line index)
        for (int k = 0; k < static_cast<int>(lines_.size()); ++k) {
            const auto& l = lines_[k];
            while (!openers.empty() && openers.back().first >= l.indent) openers.pop_back();
            if (openers.empty()) {
                top_.push_back(k);
            } else {
                children_[openers.back().second].push_back(k);
            }
            if (is_op(l.toks.back(), ":")) openers.emplace_back(l.indent, k);
        }
    }

    int first_line(const LogicalLine& l, const std::vector<int>& decorators) const {
        return decorators.empty() ? l.start_line : lines_[decorators.front()].start_line;
    }

    int subtree_end(int idx) const {
        int k = idx + 1;
        while (k < static_cast<int>(lines_.size()) && lines_[k].indent > lines_[idx].indent) ++k;
        return lines_[k - 1].end_line;
    }

    /// First depth-0 occurrence of `op` in [b, e), or e.
    std::size_t find_top(const LogicalLine& l, std::size_t b, std::size_t e, std::string_view op) const {
        for (std::size_t k = b; k < e; ++k) {
            const auto& t = l.toks[k];
            if (is_op(t, op)) return k;
            if (l.match[k] > static_cast<int>(k)) k = static_cast<std::size_t>(l.match[k]);
        }
        return e;
    }

    std::vector<std::pair<std::size_t, std::size_t>> split_top(const LogicalLine& l, std::size_t b, std::size_t e,
                                                               std::string_view sep) const {
        std::vector<std::pair<std::size_t, std::size_t>> parts;
        std::size_t start = b;
        while (true) {
            auto k = find_top(l, start, e, sep);
            if (k > start) parts.emplace_back(start, k);
            if (k == e) break;
            start = k + 1;
        }
        return parts;
    }

    std::string render(const LogicalLine& l, std::size_t b, std::size_t e) const {
        std::string out;
        for (std::size_t k = b; k < e; ++k) {
            const auto& t = l.toks[k];
            if (k > b && t.begin > l.toks[k - 1].end) {
                auto prev = l.toks[k - 1].text;
                bool tight = prev == "(" || prev == "[" || prev == "{" || t.text == ")" || t.text == "]" || t.text == "}";
                if (!tight) out.push_back(' ');
            }
            out.append(t.text);
        }
        return out;
    }

    void process_block(const std::vector<int>& block, const Ctx& ctx) {
        std::vector<int> decorators;
        for (int idx : block) {
            const auto& l = lines_[idx];
            const auto& toks = l.toks;
            if (is_op(toks[0], "@")) {
                if (!ctx.in_stub) scan_calls(l, 1, toks.size(), ctx);
                decorators.push_back(idx);
                continue;
            }
            std::size_t k0 = is_name(toks[0], "async") && toks.size() > 1 ? 1 : 0;
            if (is_name(toks[k0], "def")) {
                handle_def(idx, k0, ctx, decorators);
                decorators.clear();
                continue;
            }
            if (is_name(toks[0], "class")) {
                handle_class(idx, ctx, decorators);
                decorators.clear();
                continue;
            }
            if (!decorators.empty()) fail(l.start_line, "decorator must precede a def or class");
            if (ctx.in_stub) {
                if (is_op(toks.back(), ":")) process_block(children_[idx], ctx);
                continue;
            }
            if (is_compound(l, k0)) {
                handle_compound(idx, k0, ctx);
            } else {
                handle_simple(l, 0, toks.size(), ctx);
            }
        }
        if (!decorators.empty()) fail(lines_[decorators.back()].end_line, "decorator must precede a def or class");
    }

    bool is_compound(const LogicalLine& l, std::size_t k0) const {
        static const std::unordered_set<std::string_view> hard = {"if", "elif", "else", "while", "for", "try",
                                                                  "except", "finally", "with"};
        const auto& t = l.toks[k0];
        if (t.type != Tok::Name) return false;
        if (hard.count(t.text)) return true;
        return (t.text == "match" || t.text == "case") && is_op(l.toks.back(), ":") && l.toks.size() > 2;
    }

    int new_block() { return ++block_counter_; }

    int add_unit(PendingUnit u, const std::string& qual) {
        units_.push_back(std::move(u));
        qual_.push_back(qual);
        return static_cast<int>(units_.size()) - 1;
    }

    std::string child_qual(int parent, std::string_view name) const {
        return qual_[parent].empty() || parent == 0 ? std::string(name) : qual_[parent] + "." + std::string(name);
    }

    void bind_local(const Ctx& ctx, const std::string& name) {
        if (ctx.class_body != -1 || ctx.scope == 0) return;
        auto& scope = syntax_.scopes[ctx.scope];
        if (!scope.globals.count(name)) scope.locals.insert(name);
    }

    void attach_docstring(PendingUnit& u, int idx, std::size_t inline_begin) {
        const auto& l = lines_[idx];
        if (inline_begin < l.toks.size()) {
            if (all_strings(l.toks, inline_begin, l.toks.size())) {
                u.docstring = clean_docstring(l.toks, inline_begin, l.toks.size());
                u.doc_span = LineSpan{l.toks[inline_begin].line, l.end_line};
            }
            return;
        }
        const auto& kids = children_[idx];
        if (kids.empty()) return;
        const auto& first = lines_[kids[0]];
        if (all_strings(first.toks, 0, first.toks.size())) {
            u.docstring = clean_docstring(first.toks, 0, first.toks.size());
            u.doc_span = LineSpan{first.start_line, first.end_line};
        }
    }

    void handle_def(int idx, std::size_t k0, const Ctx& ctx, const std::vector<int>& decorators) {
        const auto& l = lines_[idx];
        const auto& toks = l.toks;
        std::size_t k = k0 + 1;
        if (k + 1 >= toks.size() || toks[k].type != Tok::Name || !is_op(toks[k + 1], "("))
            fail(l.start_line, "invalid function definition");
        std::string name(toks[k].text);
        std::size_t open = k + 1;
        auto close = static_cast<std::size_t>(l.match[open]);
        std::size_t colon = find_top(l, close + 1, toks.size(), ":");
        if (colon == toks.size()) fail(l.start_line, "expected ':'");

        int depth = ctx.func_depth + 1;
        bool stub = ctx.in_stub || depth > PythonGrammar::kMaxFunctionDepth;

        PendingUnit u;
        u.kind = UnitKind::Function;
        u.signature = render(l, k0, colon + 1);
        u.header_end = toks[colon].end_line;
        bool inline_body = colon + 1 < toks.size();
        u.span = LineSpan{first_line(l, decorators), inline_body ? l.end_line : subtree_end(idx)};
        u.parent_index_ = ctx.parent;
        u.stub = stub;
        attach_docstring(u, idx, inline_body ? colon + 1 : toks.size());
        int unit = add_unit(std::move(u), child_qual(ctx.parent, name));

        bind_local(ctx, name);
        if (!ctx.in_stub) scan_calls(l, open + 1, close, ctx);  // defaults and annotations

        Ctx inner;
        inner.parent = unit;
        inner.func_depth = depth;
        inner.in_stub = stub;
        inner.blocks = ctx.blocks;
        inner.blocks.push_back(new_block());
        inner.scope = stub ? ctx.scope : unit;
        if (!stub) {
            ScopeInfo info;
            for (auto [b, e] : split_top(l, open + 1, close, ",")) {
                std::size_t p = b;
                while (p < e && (is_op(toks[p], "*") || is_op(toks[p], "**"))) ++p;
                if (p < e && toks[p].type == Tok::Name) {
                    info.params.emplace_back(toks[p].text);
                    info.locals.emplace(toks[p].text);
                }
            }
            const auto& parent = units_[ctx.parent];
            if (parent.kind == UnitKind::Class && ctx.class_body == ctx.parent) info.enclosing_class = ctx.parent;
            for (int d : decorators) {
                const auto& dl = lines_[d];
                if (dl.toks.size() >= 2 && is_name(dl.toks[1], "classmethod")) info.is_classmethod = true;
                if (dl.toks.size() >= 2 && is_name(dl.toks[1], "staticmethod")) info.is_staticmethod = true;
            }
            syntax_.scopes[unit] = std::move(info);
        }
        if (inline_body) {
            if (!stub && !all_strings(toks, colon + 1, toks.size())) handle_simple(l, colon + 1, toks.size(), inner);
        } else {
            process_block(children_[idx], inner);
        }
    }

    void handle_class(int idx, const Ctx& ctx, const std::vector<int>& decorators) {
        const auto& l = lines_[idx];
        const auto& toks = l.toks;
        if (toks.size() < 3 || toks[1].type != Tok::Name) fail(l.start_line, "invalid class definition");
        std::string name(toks[1].text);
        std::size_t after = 2;
        std::vector<std::string> bases;
        if (is_op(toks[2], "(")) {
            auto close = static_cast<std::size_t>(l.match[2]);
            for (auto [b, e] : split_top(l, 3, close, ",")) {
                if (is_op(toks[b], "*") || is_op(toks[b], "**")) continue;
                if (find_top(l, b, e, "=") != e) continue;  // metaclass=..., keywords
                std::string text;
                for (std::size_t p = b; p < e; ++p) text.append(toks[p].text);
                bases.push_back(std::move(text));
            }
            after = close + 1;
        }
        std::size_t colon = find_top(l, after, toks.size(), ":");
        if (colon != after) fail(l.start_line, "expected ':'");

        PendingUnit u;
        u.kind = UnitKind::Class;
        u.signature = render(l, 0, colon + 1);
        u.header_end = toks[colon].end_line;
        bool inline_body = colon + 1 < toks.size();
        u.span = LineSpan{first_line(l, decorators), inline_body ? l.end_line : subtree_end(idx)};
        u.parent_index_ = ctx.parent;
        u.base_names = std::move(bases);
        u.stub = ctx.in_stub;
        attach_docstring(u, idx, inline_body ? colon + 1 : toks.size());
        int unit = add_unit(std::move(u), child_qual(ctx.parent, name));
        bind_local(ctx, name);

        Ctx inner = ctx;
        inner.parent = unit;
        inner.class_body = unit;
        inner.blocks.push_back(new_block());
        if (inline_body) {
            if (!ctx.in_stub && !all_strings(toks, colon + 1, toks.size())) handle_simple(l, colon + 1, toks.size(), inner);
        } else {
            process_block(children_[idx], inner);
        }
    }

    void handle_compound(int idx, std::size_t k0, const Ctx& ctx) {
        const auto& l = lines_[idx];
        const auto& toks = l.toks;
        std::size_t colon = is_op(toks.back(), ":") ? toks.size() - 1 : find_top(l, k0 + 1, toks.size(), ":");
        if (colon == toks.size()) fail(l.start_line, "expected ':'");
        std::string_view kw = toks[k0].text;

        Ctx inner = ctx;
        inner.blocks.push_back(new_block());

        scan_calls(l, k0 + 1, colon, ctx);
        if (kw == "for") {
            std::size_t in = k0 + 1;
            while (in < colon && !is_name(toks[in], "in")) ++in;
            record_targets(l, k0 + 1, in, std::nullopt, inner);
        } else if (kw == "with" || kw == "except") {
            for (std::size_t p = k0 + 1; p + 1 < colon; ++p) {
                if (is_name(toks[p], "as") && toks[p + 1].type == Tok::Name) record_targets(l, p + 1, p + 2, std::nullopt, inner);
            }
        }
        if (colon + 1 < toks.size()) {
            handle_simple(l, colon + 1, toks.size(), inner);
        } else {
            process_block(children_[idx], inner);
        }
    }

    void handle_simple(const LogicalLine& l, std::size_t b, std::size_t e, const Ctx& ctx) {
        for (auto [sb, se] : split_top(l, b, e, ";")) simple_statement(l, sb, se, ctx);
    }

    void simple_statement(const LogicalLine& l, std::size_t b, std::size_t e, const Ctx& ctx) {
        const auto& toks = l.toks;
        const auto& first = toks[b];
        if (is_name(first, "global") || is_name(first, "nonlocal")) {
            for (std::size_t p = b + 1; p < e; ++p) {
                if (toks[p].type == Tok::Name && ctx.scope != 0) {
                    auto& scope = syntax_.scopes[ctx.scope];
                    scope.globals.emplace(toks[p].text);
                    scope.locals.erase(std::string(toks[p].text));
                }
            }
            return;
        }
        if (is_name(first, "import") || is_name(first, "from")) {
            handle_import(l, b, e, ctx);
            return;
        }
        scan_calls(l, b, e, ctx);

        static constexpr std::array<std::string_view, 13> kAug = {"+=", "-=", "*=", "/=", "//=", "%=", "**=",
                                                                  ">>=", "<<=", "&=", "|=", "^=", "@="};
        for (auto op : kAug) {
            auto p = find_top(l, b, e, op);
            if (p != e) {
                record_targets(l, b, p, std::nullopt, ctx);
                return;
            }
        }
        if (is_name(first, "lambda")) return;
        std::vector<std::size_t> eqs;
        for (std::size_t p = b; p < e; ++p) {
            if (is_op(toks[p], "=")) eqs.push_back(p);
            if (l.match[p] > static_cast<int>(p)) p = static_cast<std::size_t>(l.match[p]);
        }
        std::size_t annot = find_top(l, b, eqs.empty() ? e : eqs.front(), ":");
        if (eqs.empty()) {
            if (annot != e) record_targets(l, b, annot, std::nullopt, ctx);
            return;
        }
        auto ctor = constructor_chain(l, eqs.back() + 1, e);
        std::size_t start = b;
        for (std::size_t q = 0; q < eqs.size(); ++q) {
            std::size_t stop = eqs[q];
            if (q == 0 && annot < stop) stop = annot;
            record_targets(l, start, stop, ctor, ctx);
            start = eqs[q] + 1;
        }
    }

    std::optional<Chain> constructor_chain(const LogicalLine& l, std::size_t b, std::size_t e) const {
        const auto& toks = l.toks;
        if (b >= e || toks[b].type != Tok::Name || is_keyword(toks[b].text)) return std::nullopt;
        Chain chain{{SegmentKind::Name, std::string(toks[b].text)}};
        std::size_t p = b + 1;
        while (p + 1 < e && is_op(toks[p], ".") && toks[p + 1].type == Tok::Name) {
            chain.push_back({SegmentKind::Attr, std::string(toks[p + 1].text)});
            p += 2;
        }
        if (p < e && is_op(toks[p], "(") && l.match[p] == static_cast<int>(e) - 1) return chain;
        return std::nullopt;
    }

    void record_targets(const LogicalLine& l, std::size_t b, std::size_t e, const std::optional<Chain>& ctor,
                        const Ctx& ctx) {
        const auto& toks = l.toks;
        if (b >= e) return;
        auto parts = split_top(l, b, e, ",");
        if (parts.size() == 1 && l.match[b] == static_cast<int>(e) - 1 &&
            (is_op(toks[b], "(") || is_op(toks[b], "["))) {
            record_targets(l, b + 1, e - 1, std::nullopt, ctx);
            return;
        }
        if (parts.size() > 1) {
            for (auto [pb, pe] : parts) record_targets(l, pb, pe, std::nullopt, ctx);
            return;
        }
        std::size_t p = b;
        if (is_op(toks[p], "*")) ++p;
        if (p >= e || toks[p].type != Tok::Name) return;
        Assignment a;
        a.line = toks[p].line;
        a.scope = ctx.scope;
        a.class_body = ctx.class_body;
        a.blocks = ctx.blocks;
        if (e - p == 1) {
            a.target = std::string(toks[p].text);
            bind_local(ctx, a.target);
        } else if (e - p == 3 && is_op(toks[p + 1], ".") && toks[p + 2].type == Tok::Name) {
            a.target = std::string(toks[p].text) + "." + std::string(toks[p + 2].text);
        } else {
            return;
        }
        a.constructor = ctor;
        syntax_.assignments.push_back(std::move(a));
    }

    void handle_import(const LogicalLine& l, std::size_t b, std::size_t e, const Ctx& ctx) {
        const auto& toks = l.toks;
        ImportStmt stmt;
        stmt.line = toks[b].line;
        stmt.scope = ctx.scope;
        auto dotted = [&](std::size_t& p, std::size_t stop) {
            std::string name;
            while (p < stop && toks[p].type == Tok::Name) {
                name.append(toks[p].text);
                ++p;
                if (p < stop && is_op(toks[p], ".")) {
                    name.push_back('.');
                    ++p;
                } else {
                    break;
                }
            }
            return name;
        };
        auto alias_of = [&](std::size_t p, std::size_t stop) -> std::string {
            if (p + 1 < stop && is_name(toks[p], "as") && toks[p + 1].type == Tok::Name) return std::string(toks[p + 1].text);
            if (p != stop) fail(l.start_line, "invalid import syntax");
            return "";
        };
        if (is_name(toks[b], "import")) {
            for (auto [pb, pe] : split_top(l, b + 1, e, ",")) {
                std::size_t p = pb;
                auto name = dotted(p, pe);
                if (name.empty() || name.back() == '.') fail(l.start_line, "invalid import syntax");
                stmt.names.push_back({name, alias_of(p, pe)});
            }
            if (stmt.names.empty()) fail(l.start_line, "invalid import syntax");
        } else {
            stmt.is_from = true;
            std::size_t p = b + 1;
            while (p < e && (is_op(toks[p], ".") || is_op(toks[p], "..."))) {
                stmt.level += static_cast<int>(toks[p].text.size());
                ++p;
            }
            if (p < e && !is_name(toks[p], "import")) stmt.module = dotted(p, e);
            if (p >= e || !is_name(toks[p], "import")) fail(l.start_line, "invalid import syntax");
            if (stmt.module.empty() && stmt.level == 0) fail(l.start_line, "invalid import syntax");
            ++p;
            if (p < e && is_op(toks[p], "*")) {
                stmt.star = true;
            } else {
                std::size_t stop = e;
                if (p < e && is_op(toks[p], "(")) {
                    stop = static_cast<std::size_t>(l.match[p]);
                    ++p;
                }
                for (auto [pb, pe] : split_top(l, p, stop, ",")) {
                    if (toks[pb].type != Tok::Name) fail(l.start_line, "invalid import syntax");
                    stmt.names.push_back({std::string(toks[pb].text), alias_of(pb + 1, pe)});
                }
                if (stmt.names.empty()) fail(l.start_line, "invalid import syntax");
            }
        }
        for (const auto& n : stmt.names) {
            if (!n.alias.empty()) {
                bind_local(ctx, n.alias);
            } else {
                bind_local(ctx, n.name.substr(0, n.name.find('.')));
            }
        }
        syntax_.imports.push_back(std::move(stmt));
    }

    void scan_calls(const LogicalLine& l, std::size_t b, std::size_t e, const Ctx& ctx) {
        const auto& toks = l.toks;
        std::vector<std::string> comp_vars;
        for (std::size_t p = b; p < e; ++p) {
            // Comprehension targets are bound inside the expression.
            if (is_name(toks[p], "for") && p > b) {
                for (std::size_t q = p + 1; q < e && !is_name(toks[q], "in"); ++q) {
                    if (toks[q].type == Tok::Name) comp_vars.emplace_back(toks[q].text);
                }
            }
        }
        for (std::size_t i = b; i < e; ++i) {
            const auto& t = toks[i];
            if (t.type != Tok::Name || is_keyword(t.text)) continue;
            if (i > b && is_op(toks[i - 1], ".")) continue;
            Chain chain{{SegmentKind::Name, std::string(t.text)}};
            bool shadowed = std::find(comp_vars.begin(), comp_vars.end(), t.text) != comp_vars.end();
            std::size_t j = i + 1;
            while (j < e) {
                if (is_op(toks[j], ".") && j + 1 < e && toks[j + 1].type == Tok::Name) {
                    chain.push_back({SegmentKind::Attr, std::string(toks[j + 1].text)});
                    j += 2;
                } else if (is_op(toks[j], "(")) {
                    CallSite site;
                    site.line = t.line;
                    site.scope = ctx.scope;
                    site.class_body = ctx.class_body;
                    site.callee = chain;
                    site.comprehension_bound = shadowed;
                    site.blocks = ctx.blocks;
                    syntax_.calls.push_back(std::move(site));
                    j = static_cast<std::size_t>(l.match[j]) + 1;
                    chain.push_back({SegmentKind::Call, ""});
                } else if (is_op(toks[j], "[")) {
                    j = static_cast<std::size_t>(l.match[j]) + 1;
                    chain.push_back({SegmentKind::Subscript, ""});
                } else {
                    break;
                }
            }
        }
    }

    ParsedFile finalize() {
        ParsedFile out;
        std::map<std::string, int> seen;
        std::vector<std::string> ids(units_.size());
        for (std::size_t k = 0; k < units_.size(); ++k) {
            auto& u = units_[k];
            u.path = file_.path;
            if (k == 0) {
                ids[k] = file_.path;
                u.qualified_name = module_.empty() ? file_.path : module_;
            } else {
                std::string local = qual_[k];
                if (seen[local]++ > 0) local += "@" + std::to_string(u.span.start);
                ids[k] = file_.path + "::" + local;
                u.qualified_name = module_.empty() ? qual_[k] : module_ + "." + qual_[k];
            }
            u.id = UnitId(ids[k]);
            u.line_count = u.span.length();
        }
        for (std::size_t k = 1; k < units_.size(); ++k) {
            auto& u = units_[k];
            u.parent = UnitId(ids[u.parent_index_]);
            units_[u.parent_index_].child_count++;
        }
        out.units.reserve(units_.size());
        for (auto& u : units_) out.units.push_back(static_cast<CodeUnit&&>(u));
        out.syntax = std::move(syntax_);
        return out;
    }

    const SourceFile& file_;
    std::string module_;
    std::vector<LogicalLine> lines_;
    std::vector<std::vector<int>> children_;
    std::vector<int> top_;
    std::vector<PendingUnit> units_;
    std::vector<std::string> qual_;
    FileSyntax syntax_;
    int block_counter_ = 0;
};

}  // namespace

bool PythonGrammar::handles(std::string_view path) const {
    return path.size() > 3 && path.substr(path.size() - 3) == ".py";
}

std::string PythonGrammar::module_path(std::string_view path) const {
    std::string m(path);
    if (m.size() > 3 && m.substr(m.size() - 3) == ".py") m.resize(m.size() - 3);
    std::replace(m.begin(), m.end(), '/', '.');
    if (m == "__init__") return "";
    constexpr std::string_view kInit = ".__init__";
    if (m.size() > kInit.size() && m.substr(m.size() - kInit.size()) == kInit) m.resize(m.size() - kInit.size());
    return m;
}

ParsedFile PythonGrammar::parse(const SourceFile& file, std::string_view text) const {
    try {
        Lexer lexer(text);
        Walker walker(file, module_path(file.path), lexer.run());
        return walker.run();
    } catch (const SyntaxFailure& err) {
        ParsedFile out;
        CodeUnit u;
        u.id = UnitId(file.path);
        u.kind = UnitKind::File;
        u.path = file.path;
        auto module = module_path(file.path);
        u.qualified_name = module.empty() ? file.path : module;
        u.span = LineSpan{1, file.line_count};
        u.line_count = u.span.length();
        u.parse_degraded = true;
        out.units.push_back(std::move(u));
        out.degraded = true;
        out.error = "line " + std::to_string(err.line) + ": " + err.message;
        return out;
    }
}

}  // namespace reponav
