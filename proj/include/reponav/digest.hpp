#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace reponav {

using Sha256 = std::array<std::uint8_t, 32>;

Sha256 sha256(std::string_view bytes);
std::string to_hex(const Sha256& digest);

/// Incremental hasher for digests over several byte ranges.
class Sha256Builder {
public:
    Sha256Builder();
    ~Sha256Builder();
    Sha256Builder(const Sha256Builder&) = delete;
    Sha256Builder& operator=(const Sha256Builder&) = delete;

    Sha256Builder& update(std::string_view bytes);
    /// Appends a length prefix before the bytes so field boundaries are unambiguous.
    Sha256Builder& update_field(std::string_view bytes);
    Sha256 finish();

private:
    void* ctx_;
};

}  // namespace reponav
