#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "umr/core.hpp"

namespace umr {

/// Dimensions of the hashing featurizer. The seed feeds downstream parameter
/// initialization; hashing itself is seedless and fully deterministic.
struct FeaturizerConfig {
    std::uint32_t text_dim = 4096;
    std::uint32_t image_dim = 1024;
    std::uint64_t seed = 0;

    void validate() const {
        if (text_dim < 8 || image_dim < 8) {
            throw Error(ErrorCode::ConfigError, "featurizer dims must be >= 8");
        }
    }
};

/// Sparse accumulator output: (bucket, value) pairs sorted by bucket.
struct SparseVec {
    std::vector<std::pair<std::uint32_t, double>> entries;

    double dot(const SparseVec& other) const;
    double norm() const;
    std::vector<double> to_dense(std::size_t dim) const;

    bool operator==(const SparseVec&) const = default;
};

std::uint64_t fnv1a64(const void* data, std::size_t len);

/// Signed feature hashing of whitespace/punctuation-split, ASCII-lowercased
/// tokens. Returns a unit vector; throws EmptyText when no token survives
/// splitting and ZeroVector when signs cancel exactly.
std::vector<double> featurize_text(const std::string& text, const FeaturizerConfig& cfg);

/// Sparse form of featurize_text; the dense op is a scatter of this one.
SparseVec featurize_text_sparse(const std::string& text, const FeaturizerConfig& cfg);

/// Signed hashing of 8-byte windows at stride 4. Unit vector out; EmptyInput
/// on an empty buffer; inputs shorter than one window produce no features and
/// throw ZeroVector.
std::vector<double> featurize_image_bytes(std::span<const std::uint8_t> bytes,
                                          const FeaturizerConfig& cfg);

SparseVec featurize_image_bytes_sparse(std::span<const std::uint8_t> bytes,
                                       const FeaturizerConfig& cfg);

/// Ensures item.image_feat is populated: passes precomputed features through
/// (checking the dimension), or reads image_ref and featurizes its bytes.
/// After this call the image side is exactly image_feat.
Item load_or_featurize(Item item, const FeaturizerConfig& cfg);

}  // namespace umr
