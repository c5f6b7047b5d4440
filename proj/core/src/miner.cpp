#include "umr/miner.hpp"

#include <algorithm>

namespace umr {

MinedNegatives mine(const std::string& qid, std::span<const float> query_vec,
                    Modality desired_modality, const std::string& positive_id,
                    const VectorIndex& index, const MinerConfig& cfg) {
    cfg.validate();
    if (index.size() == 0) {
        throw Error(ErrorCode::IndexEmpty, "mining against an empty index (qid '" + qid + "')");
    }
    const std::vector<SearchHit> hits = index.search(query_vec, cfg.top_n);

    MinedNegatives out;
    out.qid = qid;
    for (const SearchHit& hit : hits) {
        if (hit.doc_id == positive_id) {
            out.positive_rank = hit.rank;
            break;
        }
    }
    const std::uint32_t positive_cutoff =
        out.positive_rank ? *out.positive_rank : static_cast<std::uint32_t>(cfg.top_n + 1);

    for (const SearchHit& hit : hits) {
        if (hit.rank < positive_cutoff && hit.modality != desired_modality) {
            out.c1.push_back(hit.doc_id);
            out.c1_ranks.push_back(hit.rank);
        }
        if (hit.rank > cfg.k_prime && hit.modality == desired_modality &&
            hit.doc_id != positive_id) {
            out.c2.push_back(hit.doc_id);
            out.c2_ranks.push_back(hit.rank);
        }
    }
    return out;
}

std::optional<SampledNegative> sample_negative(const MinedNegatives& mined, Rng& rng) {
    const bool have_c1 = !mined.c1.empty();
    const bool have_c2 = !mined.c2.empty();
    if (!have_c1 && !have_c2) return std::nullopt;

    NegativeClass cls;
    if (have_c1 && have_c2) {
        cls = rng.next_double() < 0.5 ? NegativeClass::C1 : NegativeClass::C2;
    } else {
        cls = have_c1 ? NegativeClass::C1 : NegativeClass::C2;
    }
    const auto& pool = cls == NegativeClass::C1 ? mined.c1 : mined.c2;
    return SampledNegative{pool[rng.next_index(pool.size())], cls};
}

MinedNegatives remine_continual(const MinedNegatives& mined_rand, const std::string& qid,
                                std::span<const float> query_vec_hard,
                                Modality desired_modality, const std::string& positive_id,
                                const VectorIndex& index_hard, const MinerConfig& cfg) {
    if (mined_rand.qid != qid) {
        throw Error(ErrorCode::QidMismatch, "rand-stage mining is for qid '" + mined_rand.qid +
                                                "', remining qid '" + qid + "'");
    }
    MinedNegatives fresh =
        mine(qid, query_vec_hard, desired_modality, positive_id, index_hard, cfg);
    // retained from M^rand regardless of the new ranking
    fresh.c1 = mined_rand.c1;
    fresh.c1_ranks = mined_rand.c1_ranks;
    return fresh;
}

std::map<std::string, MinedNegatives> mine_all(const std::vector<MiningQuery>& queries,
                                               const VectorIndex& index, const MinerConfig& cfg,
                                               MiningStats* stats) {
    std::map<std::string, MinedNegatives> out;
    for (const MiningQuery& q : queries) {
        if (out.count(q.qid)) {
            throw Error(ErrorCode::DuplicateId, "duplicate qid '" + q.qid + "' in mining input");
        }
        try {
            out[q.qid] = mine(q.qid, q.vector, q.desired_modality, q.positive_id, index, cfg);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::IndexEmpty) throw;
            throw Error(e.code(), "mining qid '" + q.qid + "': " + e.what());
        }
    }
    if (stats) {
        *stats = MiningStats{};
        stats->query_count = out.size();
        if (!out.empty()) {
            double c1_sum = 0.0, c2_sum = 0.0, missing = 0.0;
            for (const auto& [qid, mined] : out) {
                c1_sum += double(mined.c1.size());
                c2_sum += double(mined.c2.size());
                if (!mined.positive_rank) missing += 1.0;
            }
            stats->mean_c1 = c1_sum / double(out.size());
            stats->mean_c2 = c2_sum / double(out.size());
            stats->frac_positive_outside = missing / double(out.size());
        }
    }
    return out;
}

}  // namespace umr
