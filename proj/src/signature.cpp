#include "recusal/signature.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

namespace recusal {

std::string Digest::hex() const {
    static const char* k = "0123456789abcdef";
    std::string s;
    s.reserve(40);
    for (std::uint8_t b : bytes) {
        s.push_back(k[b >> 4]);
        s.push_back(k[b & 0xf]);
    }
    return s;
}

namespace {

inline std::uint32_t rol(std::uint32_t v, int s) { return (v << s) | (v >> (32 - s)); }

}  // namespace

Digest sha1(const std::uint8_t* data, std::size_t len) {
    std::uint32_t h[5] = {0x67452301u, 0xEFCDAB89u, 0x98BADCFEu, 0x10325476u, 0xC3D2E1F0u};

    std::vector<std::uint8_t> msg(data, data + len);
    msg.push_back(0x80);
    while (msg.size() % 64 != 56) msg.push_back(0);
    const std::uint64_t bits = static_cast<std::uint64_t>(len) * 8;
    for (int i = 7; i >= 0; --i) msg.push_back(static_cast<std::uint8_t>(bits >> (i * 8)));

    std::uint32_t w[80];
    for (std::size_t chunk = 0; chunk < msg.size(); chunk += 64) {
        const std::uint8_t* p = msg.data() + chunk;
        for (int i = 0; i < 16; ++i)
            w[i] = (static_cast<std::uint32_t>(p[4 * i]) << 24) |
                   (static_cast<std::uint32_t>(p[4 * i + 1]) << 16) |
                   (static_cast<std::uint32_t>(p[4 * i + 2]) << 8) |
                   static_cast<std::uint32_t>(p[4 * i + 3]);
        for (int i = 16; i < 80; ++i) w[i] = rol(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);

        std::uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4];
        for (int i = 0; i < 80; ++i) {
            std::uint32_t f, k;
            if (i < 20) {
                f = (b & c) | (~b & d);
                k = 0x5A827999u;
            } else if (i < 40) {
                f = b ^ c ^ d;
                k = 0x6ED9EBA1u;
            } else if (i < 60) {
                f = (b & c) | (b & d) | (c & d);
                k = 0x8F1BBCDCu;
            } else {
                f = b ^ c ^ d;
                k = 0xCA62C1D6u;
            }
            const std::uint32_t t = rol(a, 5) + f + e + k + w[i];
            e = d;
            d = c;
            c = rol(b, 30);
            b = a;
            a = t;
        }
        h[0] += a;
        h[1] += b;
        h[2] += c;
        h[3] += d;
        h[4] += e;
    }

    Digest out;
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 4; ++j)
            out.bytes[static_cast<std::size_t>(4 * i + j)] =
                static_cast<std::uint8_t>(h[i] >> (24 - 8 * j));
    return out;
}

Digest exact_digest(const Image& img) { return sha1(img.pixels.data(), img.pixels.size()); }

namespace {

constexpr int kResize = 32;
constexpr int kBlock = 8;

Mat to_grayscale(const Image& img) {
    Mat g(img.shape.height, img.shape.width);
    for (int h = 0; h < img.shape.height; ++h)
        for (int w = 0; w < img.shape.width; ++w) {
            double v;
            if (img.shape.channels == 1) {
                v = img.at(h, w, 0);
            } else if (img.shape.channels == 3) {
                v = 0.299 * img.at(h, w, 0) + 0.587 * img.at(h, w, 1) + 0.114 * img.at(h, w, 2);
            } else {
                v = 0;
                for (int c = 0; c < img.shape.channels; ++c) v += img.at(h, w, c);
                v /= img.shape.channels;
            }
            g(h, w) = v;
        }
    return g;
}

// Lerp-form interpolation so constant inputs stay exactly constant.
Mat resize_bilinear(const Mat& g) {
    const auto hh = g.rows(), ww = g.cols();
    Mat out(kResize, kResize);
    for (int r = 0; r < kResize; ++r) {
        for (int c = 0; c < kResize; ++c) {
            double sy = (r + 0.5) * static_cast<double>(hh) / kResize - 0.5;
            double sx = (c + 0.5) * static_cast<double>(ww) / kResize - 0.5;
            sy = std::clamp(sy, 0.0, static_cast<double>(hh - 1));
            sx = std::clamp(sx, 0.0, static_cast<double>(ww - 1));
            const auto y0 = static_cast<Eigen::Index>(std::floor(sy));
            const auto x0 = static_cast<Eigen::Index>(std::floor(sx));
            const auto y1 = std::min<Eigen::Index>(y0 + 1, hh - 1);
            const auto x1 = std::min<Eigen::Index>(x0 + 1, ww - 1);
            const double fy = sy - static_cast<double>(y0), fx = sx - static_cast<double>(x0);
            const double top = g(y0, x0) + fx * (g(y0, x1) - g(y0, x0));
            const double bot = g(y1, x0) + fx * (g(y1, x1) - g(y1, x0));
            out(r, c) = top + fy * (bot - top);
        }
    }
    return out;
}

const Mat& dct_matrix() {
    static const Mat m = [] {
        Mat c(kResize, kResize);
        for (int k = 0; k < kResize; ++k) {
            const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / kResize);
            for (int i = 0; i < kResize; ++i)
                c(k, i) = scale * std::cos(std::numbers::pi * (2 * i + 1) * k / (2.0 * kResize));
        }
        return c;
    }();
    return m;
}

}  // namespace

std::uint64_t perceptual_hash(const Image& img) {
    img.shape.validate();
    if (img.pixels.size() != static_cast<std::size_t>(img.shape.pixel_count()))
        throw ValidationError("perceptual_hash: pixel buffer does not match shape");

    const Mat resized = resize_bilinear(to_grayscale(img));
    // Split off the constant component before transforming: the residual of a
    // constant image is exactly zero, so its AC coefficients come out as exact
    // zeros instead of float residue that would scramble the median bits.
    const double base = resized(0, 0);
    const Mat& c = dct_matrix();
    Mat coeffs = c * (resized.array() - base).matrix() * c.transpose();
    coeffs(0, 0) += base * kResize;

    std::array<double, kBlock * kBlock> block;
    for (int r = 0; r < kBlock; ++r)
        for (int col = 0; col < kBlock; ++col)
            block[static_cast<std::size_t>(r * kBlock + col)] = coeffs(r, col);

    auto sorted = block;
    std::sort(sorted.begin(), sorted.end());
    const double median = (sorted[31] + sorted[32]) / 2.0;

    std::uint64_t hash = 0;
    for (int i = 0; i < kBlock * kBlock; ++i)
        if (block[static_cast<std::size_t>(i)] > median) hash |= std::uint64_t{1} << (63 - i);
    return hash;
}

double hamming_norm(std::uint64_t a, std::uint64_t b) {
    return static_cast<double>(std::popcount(a ^ b)) / 64.0;
}

SignatureIndex build_signature_index(const Partition& p, LookupMode mode) {
    if (p.subsets.empty()) throw ValidationError("signature index needs a non-empty partition");
    SignatureIndex idx;
    idx.mode = mode;
    idx.exact.resize(p.subsets.size());
    idx.approx.resize(p.subsets.size());
    for (std::size_t s = 0; s < p.subsets.size(); ++s) {
        idx.exact[s].reserve(p.subsets[s].size());
        idx.approx[s].reserve(p.subsets[s].size());
        for (const Sample& sample : p.subsets[s].samples) {
            idx.exact[s].push_back(exact_digest(sample.image));
            idx.approx[s].push_back(perceptual_hash(sample.image));
        }
        std::sort(idx.exact[s].begin(), idx.exact[s].end());
    }
    if (mode == LookupMode::hash_table) {
        idx.table.resize(idx.exact.size());
        for (std::size_t s = 0; s < idx.exact.size(); ++s)
            idx.table[s] = {idx.exact[s].begin(), idx.exact[s].end()};
    }
    return idx;
}

namespace {

// Branch-free 20-byte comparison; returns all-ones when equal, zero otherwise.
inline std::uint64_t ct_match(const Digest& a, const Digest& b) {
    std::uint64_t diff = 0;
    for (std::size_t i = 0; i < a.bytes.size(); ++i)
        diff |= static_cast<std::uint64_t>(a.bytes[i] ^ b.bytes[i]);
    const std::uint64_t nonzero = (diff | (~diff + 1)) >> 63;
    return nonzero - 1;
}

std::optional<int> lookup_exact_ct(const SignatureIndex& idx, const Digest& d) {
    // Inspect every entry of every subset; no data-dependent early exit.
    std::uint64_t found = 0;      // all-ones once matched
    std::uint64_t subset_acc = 0; // first matching subset index
    for (std::size_t s = 0; s < idx.exact.size(); ++s) {
        for (const Digest& e : idx.exact[s]) {
            const std::uint64_t m = ct_match(e, d) & ~found;
            subset_acc |= m & static_cast<std::uint64_t>(s);
            found |= m;
        }
    }
    if (found) return static_cast<int>(subset_acc);
    return std::nullopt;
}

}  // namespace

std::optional<int> lookup_exact(const SignatureIndex& idx, const Digest& d) {
    switch (idx.mode) {
        case LookupMode::hash_table:
            for (std::size_t s = 0; s < idx.table.size(); ++s)
                if (idx.table[s].contains(d)) return static_cast<int>(s);
            return std::nullopt;
        case LookupMode::sorted_scan:
            for (std::size_t s = 0; s < idx.exact.size(); ++s)
                if (std::binary_search(idx.exact[s].begin(), idx.exact[s].end(), d))
                    return static_cast<int>(s);
            return std::nullopt;
        case LookupMode::constant_time_scan:
            return lookup_exact_ct(idx, d);
    }
    return std::nullopt;
}

std::optional<int> lookup_approx(const SignatureIndex& idx, std::uint64_t phash, double tau) {
    if (std::isnan(tau) || tau < 0.0 || tau > 1.0)
        throw ValidationError("lookup_approx: tau must lie in [0,1]");
    double best = 2.0;
    int best_subset = -1;
    for (std::size_t s = 0; s < idx.approx.size(); ++s)
        for (std::uint64_t e : idx.approx[s]) {
            const double d = hamming_norm(e, phash);
            if (d < best) {
                best = d;
                best_subset = static_cast<int>(s);
            }
        }
    if (best_subset >= 0 && best <= tau) return best_subset;
    return std::nullopt;
}

namespace {

constexpr char kMagic[4] = {'R', 'S', 'I', 'X'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, T v) {
    std::uint8_t buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<std::uint8_t>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::string& path) {
    std::uint8_t buf[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(buf), sizeof(T)))
        throw ParseError(path + ": truncated index file");
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
    return v;
}

}  // namespace

void save_index(const SignatureIndex& idx, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write(kMagic, 4);
    put(out, kVersion);
    put(out, static_cast<std::uint8_t>(idx.mode));
    put(out, static_cast<std::uint32_t>(idx.exact.size()));
    for (std::size_t s = 0; s < idx.exact.size(); ++s) {
        put(out, static_cast<std::uint64_t>(idx.exact[s].size()));
        for (const Digest& d : idx.exact[s])
            out.write(reinterpret_cast<const char*>(d.bytes.data()),
                      static_cast<std::streamsize>(d.bytes.size()));
        put(out, static_cast<std::uint64_t>(idx.approx[s].size()));
        for (std::uint64_t h : idx.approx[s]) put(out, h);
    }
    if (!out) throw IoError("write failed: " + path);
}

SignatureIndex load_index(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw ParseError(path + ": bad magic bytes");
    if (get<std::uint32_t>(in, path) != kVersion)
        throw ParseError(path + ": unsupported index version");
    const auto mode = get<std::uint8_t>(in, path);
    if (mode > static_cast<std::uint8_t>(LookupMode::constant_time_scan))
        throw ParseError(path + ": unknown lookup mode " + std::to_string(mode));

    SignatureIndex idx;
    idx.mode = static_cast<LookupMode>(mode);
    const auto n = get<std::uint32_t>(in, path);
    idx.exact.resize(n);
    idx.approx.resize(n);
    for (std::uint32_t s = 0; s < n; ++s) {
        const auto ce = get<std::uint64_t>(in, path);
        idx.exact[s].resize(ce);
        for (auto& d : idx.exact[s])
            if (!in.read(reinterpret_cast<char*>(d.bytes.data()),
                         static_cast<std::streamsize>(d.bytes.size())))
                throw ParseError(path + ": truncated index file");
        const auto ca = get<std::uint64_t>(in, path);
        idx.approx[s].resize(ca);
        for (auto& h : idx.approx[s]) h = get<std::uint64_t>(in, path);
    }
    if (in.peek() != std::ifstream::traits_type::eof())
        throw ParseError(path + ": trailing bytes after index payload");
    if (idx.mode == LookupMode::hash_table) {
        idx.table.resize(idx.exact.size());
        for (std::size_t s = 0; s < idx.exact.size(); ++s)
            idx.table[s] = {idx.exact[s].begin(), idx.exact[s].end()};
    }
    return idx;
}

}  // namespace recusal
