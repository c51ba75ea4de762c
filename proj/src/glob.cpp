#include "reponav/glob.hpp"

namespace reponav {
namespace {

// Returns the index one past the closing ']' and whether `c` is in the class,
// or npos when the class is unterminated (then '[' is a literal).
std::size_t match_class(std::string_view p, std::size_t open, char c, bool& hit) {
    std::size_t i = open + 1;
    bool negate = false;
    if (i < p.size() && (p[i] == '!' || p[i] == '^')) {
        negate = true;
        ++i;
    }
    bool found = false;
    bool first = true;
    while (i < p.size() && (first || p[i] != ']')) {
        first = false;
        char lo = p[i];
        char hi = lo;
        if (i + 2 < p.size() && p[i + 1] == '-' && p[i + 2] != ']') {
            hi = p[i + 2];
            i += 3;
        } else {
            ++i;
        }
        if (lo <= c && c <= hi) found = true;
    }
    if (i >= p.size()) return std::string_view::npos;
    hit = (found != negate) && c != '/';
    return i + 1;
}

bool match_from(std::string_view p, std::string_view s) {
    while (!p.empty()) {
        if (p.size() >= 2 && p[0] == '*' && p[1] == '*') {
            if (p.size() >= 3 && p[2] == '/') {
                auto rest = p.substr(3);
                if (match_from(rest, s)) return true;
                for (std::size_t i = 0; i < s.size(); ++i) {
                    if (s[i] == '/' && match_from(rest, s.substr(i + 1))) return true;
                }
                return false;
            }
            auto rest = p.substr(2);
            for (std::size_t i = 0; i <= s.size(); ++i) {
                if (match_from(rest, s.substr(i))) return true;
            }
            return false;
        }
        switch (p[0]) {
            case '*': {
                auto rest = p.substr(1);
                for (std::size_t i = 0; i <= s.size(); ++i) {
                    if (match_from(rest, s.substr(i))) return true;
                    if (i < s.size() && s[i] == '/') break;
                }
                return false;
            }
            case '?':
                if (s.empty() || s[0] == '/') return false;
                p.remove_prefix(1);
                s.remove_prefix(1);
                continue;
            case '[': {
                if (s.empty()) return false;
                bool hit = false;
                auto next = match_class(p, 0, s[0], hit);
                if (next != std::string_view::npos) {
                    if (!hit) return false;
                    p.remove_prefix(next);
                    s.remove_prefix(1);
                    continue;
                }
                [[fallthrough]];
            }
            default:
                if (s.empty() || s[0] != p[0]) return false;
                p.remove_prefix(1);
                s.remove_prefix(1);
        }
    }
    return s.empty();
}

}  // namespace

bool glob_match(std::string_view pattern, std::string_view path) { return match_from(pattern, path); }

bool glob_match_any(const std::vector<std::string>& patterns, std::string_view path) {
    for (const auto& p : patterns) {
        if (glob_match(p, path)) return true;
    }
    return false;
}

}  // namespace reponav
