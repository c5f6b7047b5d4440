#include "umr/index.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <unordered_set>

namespace umr {

namespace {

constexpr char kMagic[4] = {'U', 'M', 'R', 'E'};
constexpr std::uint32_t kVersion = 1;

void write_u16(std::ostream& out, std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
    out.write(reinterpret_cast<const char*>(b), 2);
}

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint16_t read_u16(std::istream& in) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    return static_cast<std::uint16_t>(std::uint16_t(b[0]) | (std::uint16_t(b[1]) << 8));
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

std::uint64_t read_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
    return v;
}

void check_unit_norm(const EmbeddingRecord& rec) {
    double sq = 0.0;
    for (float v : rec.vector) sq += double(v) * double(v);
    if (std::abs(std::sqrt(sq) - 1.0) > 1e-5) {
        throw Error(ErrorCode::DataError, "record '" + rec.id + "' is not unit-norm");
    }
}

}  // namespace

VectorIndex VectorIndex::build(const std::vector<EmbeddingRecord>& records,
                               std::string pool_tag) {
    VectorIndex idx;
    idx.pool_tag_ = std::move(pool_tag);
    if (records.empty()) return idx;
    idx.dim_ = records.front().vector.size();
    idx.vectors_.reserve(records.size() * idx.dim_);
    idx.ids_.reserve(records.size());
    idx.modalities_.reserve(records.size());
    std::unordered_set<std::string> seen;
    seen.reserve(records.size());
    for (const EmbeddingRecord& rec : records) {
        if (rec.vector.size() != idx.dim_) {
            throw Error(ErrorCode::DimMismatch, "record '" + rec.id + "' has dim " +
                                                    std::to_string(rec.vector.size()) +
                                                    ", expected " + std::to_string(idx.dim_));
        }
        if (!seen.insert(rec.id).second) {
            throw Error(ErrorCode::DuplicateId, "duplicate id '" + rec.id + "' in pool");
        }
        check_unit_norm(rec);
        idx.vectors_.insert(idx.vectors_.end(), rec.vector.begin(), rec.vector.end());
        idx.ids_.push_back(rec.id);
        idx.modalities_.push_back(rec.modality);
    }
    return idx;
}

VectorIndex VectorIndex::merge(std::span<const VectorIndex> indexes) {
    std::vector<EmbeddingRecord> all;
    std::string tag;
    for (const VectorIndex& idx : indexes) {
        auto recs = idx.records();
        all.insert(all.end(), std::make_move_iterator(recs.begin()),
                   std::make_move_iterator(recs.end()));
        if (!tag.empty()) tag += "+";
        tag += idx.pool_tag();
    }
    return build(all, std::move(tag));
}

std::vector<SearchHit> VectorIndex::search(std::span<const float> query, std::size_t k) const {
    if (k < 1) throw Error(ErrorCode::DataError, "k must be >= 1");
    if (size() == 0) return {};
    if (query.size() != dim_) {
        throw Error(ErrorCode::DimMismatch, "query dim " + std::to_string(query.size()) +
                                                ", index dim " + std::to_string(dim_));
    }
    const std::size_t n = size();
    std::vector<float> scores(n);
    for (std::size_t i = 0; i < n; ++i) {
        const float* row = vectors_.data() + i * dim_;
        double acc = 0.0;
        for (std::size_t j = 0; j < dim_; ++j) acc += double(row[j]) * double(query[j]);
        scores[i] = static_cast<float>(acc);
    }
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    const std::size_t take = std::min(k, n);
    auto better = [&](std::uint32_t a, std::uint32_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return ids_[a] < ids_[b];
    };
    std::partial_sort(order.begin(), order.begin() + take, order.end(), better);
    std::vector<SearchHit> hits;
    hits.reserve(take);
    for (std::size_t r = 0; r < take; ++r) {
        const std::uint32_t i = order[r];
        hits.push_back(SearchHit{ids_[i], scores[i], static_cast<std::uint32_t>(r + 1),
                                 modalities_[i]});
    }
    return hits;
}

std::vector<std::vector<SearchHit>> VectorIndex::search_batch(
    const std::vector<std::vector<float>>& queries, std::size_t k) const {
    std::vector<std::vector<SearchHit>> out;
    out.reserve(queries.size());
    for (const auto& q : queries) out.push_back(search(q, k));
    return out;
}

std::vector<EmbeddingRecord> VectorIndex::records() const {
    std::vector<EmbeddingRecord> out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) {
        EmbeddingRecord rec;
        rec.id = ids_[i];
        rec.modality = modalities_[i];
        auto row = vector_at(i);
        rec.vector.assign(row.begin(), row.end());
        out.push_back(std::move(rec));
    }
    return out;
}

void write_embeddings(const std::string& path, const std::vector<EmbeddingRecord>& records,
                      std::uint32_t dim) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::DataError, "cannot open '" + path + "' for writing");
    out.write(kMagic, 4);
    write_u32(out, kVersion);
    write_u32(out, dim);
    write_u64(out, records.size());
    static_assert(sizeof(float) == 4);
    for (const EmbeddingRecord& rec : records) {
        if (rec.vector.size() != dim) {
            throw Error(ErrorCode::DimMismatch, "record '" + rec.id + "' dim mismatch on write");
        }
        if (rec.id.size() > 0xffff) {
            throw Error(ErrorCode::DataError, "id too long for store format");
        }
        write_u16(out, static_cast<std::uint16_t>(rec.id.size()));
        out.write(rec.id.data(), static_cast<std::streamsize>(rec.id.size()));
        const unsigned char mod = static_cast<unsigned char>(rec.modality);
        out.write(reinterpret_cast<const char*>(&mod), 1);
        out.write(reinterpret_cast<const char*>(rec.vector.data()),
                  static_cast<std::streamsize>(dim * sizeof(float)));
    }
    if (!out) throw Error(ErrorCode::DataError, "write failed for '" + path + "'");
}

std::vector<EmbeddingRecord> read_embeddings(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::FileNotFound, "embedding store '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw Error(ErrorCode::DataError, "'" + path + "' is not an embedding store");
    }
    const std::uint32_t version = read_u32(in);
    if (version != kVersion) {
        throw Error(ErrorCode::DataError, "unsupported store version " + std::to_string(version));
    }
    const std::uint32_t dim = read_u32(in);
    const std::uint64_t count = read_u64(in);
    std::vector<EmbeddingRecord> records;
    records.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint16_t id_len = read_u16(in);
        EmbeddingRecord rec;
        rec.id.resize(id_len);
        in.read(rec.id.data(), id_len);
        unsigned char mod = 0;
        in.read(reinterpret_cast<char*>(&mod), 1);
        if (mod > 2) throw Error(ErrorCode::DataError, "bad modality byte in '" + path + "'");
        rec.modality = static_cast<Modality>(mod);
        rec.vector.resize(dim);
        in.read(reinterpret_cast<char*>(rec.vector.data()),
                static_cast<std::streamsize>(dim * sizeof(float)));
        if (!in) throw Error(ErrorCode::DataError, "truncated embedding store '" + path + "'");
        records.push_back(std::move(rec));
    }
    return records;
}

VectorIndex load_index(const std::string& path, std::string pool_tag) {
    return VectorIndex::build(read_embeddings(path), std::move(pool_tag));
}

}  // namespace umr
