#pragma once

#include <span>
#include <string>
#include <vector>

#include "umr/core.hpp"

namespace umr {

struct SearchHit {
    std::string doc_id;
    float score = 0.0f;
    std::uint32_t rank = 0;  // 1-based
    Modality modality = Modality::Text;

    bool operator==(const SearchHit&) const = default;
};

/// Exact inner-product kNN over a flat pool of unit vectors. Immutable after
/// build; any number of concurrent readers.
class VectorIndex {
  public:
    static VectorIndex build(const std::vector<EmbeddingRecord>& records, std::string pool_tag);

    /// Union of pools; an id occurring in more than one pool is an error.
    /// Tags are joined with '+'.
    static VectorIndex merge(std::span<const VectorIndex> indexes);

    /// Exact top-k by inner product, f64 accumulation, scores reported as f32.
    /// Ties break by ascending doc id. Returns min(k, size()) hits.
    std::vector<SearchHit> search(std::span<const float> query, std::size_t k) const;

    std::vector<std::vector<SearchHit>> search_batch(
        const std::vector<std::vector<float>>& queries, std::size_t k) const;

    std::size_t size() const { return ids_.size(); }
    std::size_t dim() const { return dim_; }
    const std::string& pool_tag() const { return pool_tag_; }
    const std::vector<std::string>& ids() const { return ids_; }
    const std::vector<Modality>& modalities() const { return modalities_; }
    std::span<const float> vector_at(std::size_t i) const {
        return {vectors_.data() + i * dim_, dim_};
    }
    std::vector<EmbeddingRecord> records() const;

  private:
    VectorIndex() = default;

    std::size_t dim_ = 0;
    std::vector<float> vectors_;  // row-major, size() * dim_
    std::vector<std::string> ids_;
    std::vector<Modality> modalities_;
    std::string pool_tag_;
};

/// Embedding store: magic "UMRE", version, dim, count, then per record the
/// length-prefixed id, a modality byte and dim f32 little-endian values.
void write_embeddings(const std::string& path, const std::vector<EmbeddingRecord>& records,
                      std::uint32_t dim);
std::vector<EmbeddingRecord> read_embeddings(const std::string& path);
VectorIndex load_index(const std::string& path, std::string pool_tag);

}  // namespace umr
