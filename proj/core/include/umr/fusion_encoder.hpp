#pragma once

#include <string>
#include <vector>

#include "umr/core.hpp"
#include "umr/featurizer.hpp"

namespace umr {

/// Trainable projections of the score-fusion encoder: text and image features
/// are projected separately into R^dim and summed before normalization.
struct FusionParams {
    std::uint32_t dim = 64;
    std::uint32_t text_dim = 4096;
    std::uint32_t image_dim = 1024;
    std::vector<double> w_text;   // dim x text_dim, row-major
    std::vector<double> w_image;  // dim x image_dim, row-major

    std::size_t text_size() const { return std::size_t(dim) * text_dim; }
    std::size_t image_size() const { return std::size_t(dim) * image_dim; }

    /// Throws NonFinite on any NaN/Inf entry, DimMismatch on wrong sizes.
    void validate() const;

    bool operator==(const FusionParams&) const = default;
};

struct EncodeOptions {
    bool include_instruction = true;
};

/// Fan-based uniform init of both projections from the featurizer seed.
FusionParams init_params(std::uint32_t dim, const FeaturizerConfig& cfg);

/// Text string the encoder hashes for a query: instruction-joined query text,
/// the instruction alone for image-only queries, or the bare query text when
/// instructions are disabled. Empty optional means no text part.
std::optional<std::string> query_text_part(const std::string& instruction, const Item& query,
                                           const EncodeOptions& opts);

/// raw = W_t f_t + W_i f_i over whichever parts are present. No normalization.
std::vector<double> project_features(const FusionParams& params, const SparseVec* text_feat,
                                     const std::vector<double>* image_feat);

/// raw / ||raw||; throws ZeroVector below 1e-12.
std::vector<double> normalize_or_throw(std::vector<double> raw);

/// eta(inst, q): unit vector in R^dim.
std::vector<double> encode_query(const std::string& instruction, const Item& query,
                                 const FusionParams& params, const EncodeOptions& opts);

/// eta(c): candidates never see an instruction.
std::vector<double> encode_candidate(const Item& candidate, const FusionParams& params);

/// Order-preserving corpus encoding; f64 internally, cast to f32 after
/// normalization. Encode errors are rethrown with the offending id.
std::vector<EmbeddingRecord> encode_corpus(const std::vector<Item>& items,
                                           const FusionParams& params);

/// Binary checkpoint: magic "UMRP", version, dims, then W_t and W_i row-major
/// f64 little-endian.
void save_params(const std::string& path, const FusionParams& params);
FusionParams load_params(const std::string& path);

}  // namespace umr
