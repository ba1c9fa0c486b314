#pragma once

#include "recusal/dataset.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

namespace recusal {

struct Digest {
    std::array<std::uint8_t, 20> bytes{};
    auto operator<=>(const Digest&) const = default;
    std::string hex() const;
};

struct DigestHasher {
    std::size_t operator()(const Digest& d) const {
        std::size_t h;
        std::memcpy(&h, d.bytes.data(), sizeof(h));
        return h;
    }
};

Digest sha1(const std::uint8_t* data, std::size_t len);

// Digest over the canonical pixel serialization (row-major, channel
// interleaved); the label never participates.
Digest exact_digest(const Image& img);

// 64-bit perceptual hash: luma grayscale, bilinear resize to 32x32 with
// half-pixel centers, orthonormal 2-D type-II DCT, top-left 8x8 block,
// strict comparison against the median of all 64 coefficients. Bit 0 is the
// DC term and sits at the most significant position.
std::uint64_t perceptual_hash(const Image& img);

// Fraction of differing bits, in [0,1].
double hamming_norm(std::uint64_t a, std::uint64_t b);

enum class LookupMode { hash_table, sorted_scan, constant_time_scan };

// Per-subset signature tables over a disjoint partition. `exact` is kept
// sorted; `table` is materialized only for hash_table mode. All three modes
// return identical answers; they differ in lookup strategy and latency shape.
struct SignatureIndex {
    LookupMode mode = LookupMode::hash_table;
    std::vector<std::vector<Digest>> exact;
    std::vector<std::vector<std::uint64_t>> approx;
    std::vector<std::unordered_set<Digest, DigestHasher>> table;

    int subsets() const { return static_cast<int>(exact.size()); }
};

SignatureIndex build_signature_index(const Partition& p, LookupMode mode);

// Subset holding an exact match, or none. Ties across subsets (duplicate
// pixel content) resolve to the lowest subset index in every mode.
std::optional<int> lookup_exact(const SignatureIndex& idx, const Digest& d);

// Subset of the globally nearest entry if its normalized Hamming distance is
// at most tau; ties break to the lowest subset index, then insertion order.
std::optional<int> lookup_approx(const SignatureIndex& idx, std::uint64_t phash, double tau);

void save_index(const SignatureIndex& idx, const std::string& path);
SignatureIndex load_index(const std::string& path);

}  // namespace recusal
