#include "umr/fusion_encoder.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "umr/rng.hpp"

namespace umr {

namespace {

constexpr char kMagic[4] = {'U', 'M', 'R', 'P'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

void write_f64_block(std::ostream& out, const std::vector<double>& v) {
    // little-endian host assumed; asserted at build time below
    static_assert(sizeof(double) == 8);
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void read_f64_block(std::istream& in, std::vector<double>& v) {
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

}  // namespace

void FusionParams::validate() const {
    if (w_text.size() != text_size() || w_image.size() != image_size()) {
        throw Error(ErrorCode::DimMismatch, "params matrix sizes inconsistent with dims");
    }
    for (double v : w_text) {
        if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "non-finite entry in W_t");
    }
    for (double v : w_image) {
        if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "non-finite entry in W_i");
    }
}

FusionParams init_params(std::uint32_t dim, const FeaturizerConfig& cfg) {
    cfg.validate();
    FusionParams p;
    p.dim = dim;
    p.text_dim = cfg.text_dim;
    p.image_dim = cfg.image_dim;
    p.w_text.resize(p.text_size());
    p.w_image.resize(p.image_size());
    Rng rng(cfg.seed);
    const double a_text = std::sqrt(6.0 / (double(dim) + double(cfg.text_dim)));
    const double a_image = std::sqrt(6.0 / (double(dim) + double(cfg.image_dim)));
    for (auto& v : p.w_text) v = rng.next_range(-a_text, a_text);
    for (auto& v : p.w_image) v = rng.next_range(-a_image, a_image);
    return p;
}

std::optional<std::string> query_text_part(const std::string& instruction, const Item& query,
                                           const EncodeOptions& opts) {
    if (opts.include_instruction) {
        if (query.has_text()) return instruction + " " + *query.text;
        return instruction;
    }
    if (query.has_text()) return *query.text;
    return std::nullopt;
}

std::vector<double> project_features(const FusionParams& params, const SparseVec* text_feat,
                                     const std::vector<double>* image_feat) {
    std::vector<double> raw(params.dim, 0.0);
    if (text_feat) {
        for (const auto& [bucket, value] : text_feat->entries) {
            const double* col = params.w_text.data() + bucket;
            for (std::uint32_t r = 0; r < params.dim; ++r) {
                raw[r] += col[std::size_t(r) * params.text_dim] * value;
            }
        }
    }
    if (image_feat) {
        if (image_feat->size() != params.image_dim) {
            throw Error(ErrorCode::DimMismatch, "image feature length mismatch");
        }
        for (std::uint32_t r = 0; r < params.dim; ++r) {
            const double* row = params.w_image.data() + std::size_t(r) * params.image_dim;
            double acc = 0.0;
            for (std::uint32_t c = 0; c < params.image_dim; ++c) {
                acc += row[c] * (*image_feat)[c];
            }
            raw[r] += acc;
        }
    }
    return raw;
}

std::vector<double> normalize_or_throw(std::vector<double> raw) {
    double sq = 0.0;
    for (double v : raw) sq += v * v;
    const double norm = std::sqrt(sq);
    if (!(norm >= 1e-12)) {
        throw Error(ErrorCode::ZeroVector, "encoded vector norm below 1e-12");
    }
    for (double& v : raw) v /= norm;
    return raw;
}

std::vector<double> encode_query(const std::string& instruction, const Item& query,
                                 const FusionParams& params, const EncodeOptions& opts) {
    FeaturizerConfig fcfg{params.text_dim, params.image_dim, 0};
    std::optional<std::string> text_part = query_text_part(instruction, query, opts);
    SparseVec text_feat;
    const SparseVec* tf = nullptr;
    if (text_part) {
        text_feat = featurize_text_sparse(*text_part, fcfg);
        tf = &text_feat;
    }
    const std::vector<double>* imf = query.image_feat ? &*query.image_feat : nullptr;
    if (!tf && !imf) {
        throw Error(ErrorCode::EmptyInput, "query '" + query.id + "' has no encodable part");
    }
    return normalize_or_throw(project_features(params, tf, imf));
}

std::vector<double> encode_candidate(const Item& candidate, const FusionParams& params) {
    FeaturizerConfig fcfg{params.text_dim, params.image_dim, 0};
    SparseVec text_feat;
    const SparseVec* tf = nullptr;
    if (candidate.has_text()) {
        text_feat = featurize_text_sparse(*candidate.text, fcfg);
        tf = &text_feat;
    }
    const std::vector<double>* imf = candidate.image_feat ? &*candidate.image_feat : nullptr;
    if (!tf && !imf) {
        throw Error(ErrorCode::EmptyInput, "candidate '" + candidate.id + "' has no encodable part");
    }
    return normalize_or_throw(project_features(params, tf, imf));
}

std::vector<EmbeddingRecord> encode_corpus(const std::vector<Item>& items,
                                           const FusionParams& params) {
    std::vector<EmbeddingRecord> out;
    out.reserve(items.size());
    for (const Item& item : items) {
        try {
            std::vector<double> v = encode_candidate(item, params);
            EmbeddingRecord rec;
            rec.id = item.id;
            rec.modality = item.modality;
            rec.vector.assign(v.begin(), v.end());
            out.push_back(std::move(rec));
        } catch (const Error& e) {
            throw Error(e.code(), "encoding item '" + item.id + "': " + e.what());
        }
    }
    return out;
}

void save_params(const std::string& path, const FusionParams& params) {
    params.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::DataError, "cannot open '" + path + "' for writing");
    out.write(kMagic, 4);
    write_u32(out, kVersion);
    write_u32(out, params.dim);
    write_u32(out, params.text_dim);
    write_u32(out, params.image_dim);
    write_f64_block(out, params.w_text);
    write_f64_block(out, params.w_image);
    if (!out) throw Error(ErrorCode::DataError, "write failed for '" + path + "'");
}

FusionParams load_params(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::FileNotFound, "params file '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw Error(ErrorCode::DataError, "'" + path + "' is not a params checkpoint");
    }
    const std::uint32_t version = read_u32(in);
    if (version != kVersion) {
        throw Error(ErrorCode::DataError,
                    "unsupported checkpoint version " + std::to_string(version));
    }
    FusionParams p;
    p.dim = read_u32(in);
    p.text_dim = read_u32(in);
    p.image_dim = read_u32(in);
    p.w_text.resize(p.text_size());
    p.w_image.resize(p.image_size());
    read_f64_block(in, p.w_text);
    read_f64_block(in, p.w_image);
    if (!in) throw Error(ErrorCode::DataError, "truncated checkpoint '" + path + "'");
    p.validate();
    return p;
}

}  // namespace umr
