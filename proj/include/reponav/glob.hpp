#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace reponav {

/// Matches a '/'-separated relative path against a glob.
/// `*` and `?` stay within one path component, `**` spans any number of
/// components (including zero when written as `**/`), `[...]` is a class.
bool glob_match(std::string_view pattern, std::string_view path);

bool glob_match_any(const std::vector<std::string>& patterns, std::string_view path);

}  // namespace reponav
