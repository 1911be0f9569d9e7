#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace foldkit {

// FNV-1a 64-bit. Used for dataset content hashes; collision resistance
// beyond accidental corruption is not required.
class Fnv1a64 {
  public:
    void update(const void* data, size_t len) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (size_t i = 0; i < len; ++i) {
            hash_ ^= p[i];
            hash_ *= 0x100000001b3ull;
        }
    }

    void update(const std::string& s) { update(s.data(), s.size()); }
    void update(const std::vector<unsigned char>& v) { update(v.data(), v.size()); }
    void update_u64(uint64_t v) {
        unsigned char bytes[8];
        for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
        update(bytes, 8);
    }

    uint64_t value() const { return hash_; }

    std::string hex() const {
        static const char* digits = "0123456789abcdef";
        std::string out(16, '0');
        uint64_t v = hash_;
        for (int i = 15; i >= 0; --i) {
            out[static_cast<size_t>(i)] = digits[v & 0xf];
            v >>= 4;
        }
        return out;
    }

  private:
    uint64_t hash_ = 0xcbf29ce484222325ull;
};

inline uint64_t fnv1a64(const void* data, size_t len) {
    Fnv1a64 h;
    h.update(data, len);
    return h.value();
}

}  // namespace foldkit
