#include "umr/featurizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

namespace umr {

double SparseVec::dot(const SparseVec& other) const {
    double acc = 0.0;
    auto a = entries.begin();
    auto b = other.entries.begin();
    while (a != entries.end() && b != other.entries.end()) {
        if (a->first < b->first) {
            ++a;
        } else if (b->first < a->first) {
            ++b;
        } else {
            acc += a->second * b->second;
            ++a;
            ++b;
        }
    }
    return acc;
}

double SparseVec::norm() const {
    double acc = 0.0;
    for (const auto& [idx, v] : entries) acc += v * v;
    return std::sqrt(acc);
}

std::vector<double> SparseVec::to_dense(std::size_t dim) const {
    std::vector<double> out(dim, 0.0);
    for (const auto& [idx, v] : entries) out.at(idx) = v;
    return out;
}

std::uint64_t fnv1a64(const void* data, std::size_t len) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

// +1 when bit 32 of the hash is clear, -1 otherwise.
inline double hash_sign(std::uint64_t h) {
    return ((h >> 32) & 1ULL) ? -1.0 : 1.0;
}

// Token characters are ASCII alphanumerics plus any non-ASCII byte; non-ASCII
// passes through without case folding.
inline bool is_token_byte(unsigned char c) {
    if (c >= 0x80) return true;
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

inline unsigned char ascii_lower(unsigned char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<unsigned char>(c - 'A' + 'a') : c;
}

SparseVec accumulate_to_sparse(const std::map<std::uint32_t, double>& acc) {
    SparseVec out;
    out.entries.reserve(acc.size());
    double sq = 0.0;
    for (const auto& [bucket, value] : acc) {
        if (value != 0.0) {
            out.entries.emplace_back(bucket, value);
            sq += value * value;
        }
    }
    if (out.entries.empty()) {
        throw Error(ErrorCode::ZeroVector, "feature signs cancelled to the zero vector");
    }
    const double inv = 1.0 / std::sqrt(sq);
    for (auto& [bucket, value] : out.entries) value *= inv;
    return out;
}

}  // namespace

SparseVec featurize_text_sparse(const std::string& text, const FeaturizerConfig& cfg) {
    cfg.validate();
    std::map<std::uint32_t, double> acc;
    std::string token;
    bool saw_token = false;
    auto flush = [&]() {
        if (token.empty()) return;
        saw_token = true;
        const std::uint64_t h = fnv1a64(token.data(), token.size());
        acc[static_cast<std::uint32_t>(h % cfg.text_dim)] += hash_sign(h);
        token.clear();
    };
    for (unsigned char c : text) {
        if (is_token_byte(c)) {
            token.push_back(static_cast<char>(ascii_lower(c)));
        } else {
            flush();
        }
    }
    flush();
    if (!saw_token) {
        throw Error(ErrorCode::EmptyText, "no tokens survive splitting");
    }
    return accumulate_to_sparse(acc);
}

std::vector<double> featurize_text(const std::string& text, const FeaturizerConfig& cfg) {
    return featurize_text_sparse(text, cfg).to_dense(cfg.text_dim);
}

SparseVec featurize_image_bytes_sparse(std::span<const std::uint8_t> bytes,
                                       const FeaturizerConfig& cfg) {
    cfg.validate();
    if (bytes.empty()) {
        throw Error(ErrorCode::EmptyInput, "empty image byte string");
    }
    constexpr std::size_t kWindow = 8;
    constexpr std::size_t kStride = 4;
    std::map<std::uint32_t, double> acc;
    for (std::size_t pos = 0; pos + kWindow <= bytes.size(); pos += kStride) {
        const std::uint64_t h = fnv1a64(bytes.data() + pos, kWindow);
        acc[static_cast<std::uint32_t>(h % cfg.image_dim)] += hash_sign(h);
    }
    if (acc.empty()) {
        // input shorter than one window
        throw Error(ErrorCode::ZeroVector, "input too short for an 8-byte window");
    }
    return accumulate_to_sparse(acc);
}

std::vector<double> featurize_image_bytes(std::span<const std::uint8_t> bytes,
                                          const FeaturizerConfig& cfg) {
    return featurize_image_bytes_sparse(bytes, cfg).to_dense(cfg.image_dim);
}

Item load_or_featurize(Item item, const FeaturizerConfig& cfg) {
    cfg.validate();
    if (item.image_feat) {
        if (item.image_feat->size() != cfg.image_dim) {
            throw Error(ErrorCode::DimMismatch,
                        "item '" + item.id + "' image_feat has length " +
                            std::to_string(item.image_feat->size()) + ", expected " +
                            std::to_string(cfg.image_dim));
        }
        return item;
    }
    if (item.image_ref) {
        std::ifstream in(*item.image_ref, std::ios::binary);
        if (!in) {
            throw Error(ErrorCode::FileNotFound,
                        "item '" + item.id + "' image_ref '" + *item.image_ref + "'");
        }
        std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
        item.image_feat = featurize_image_bytes(bytes, cfg);
        item.image_ref.reset();
    }
    return item;
}

}  // namespace umr
