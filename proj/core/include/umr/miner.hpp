#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "umr/core.hpp"
#include "umr/index.hpp"
#include "umr/rng.hpp"

namespace umr {

struct MinerConfig {
    std::size_t top_n = 50;
    std::size_t k_prime = 45;

    void validate() const {
        if (k_prime < 1 || k_prime > top_n) {
            throw Error(ErrorCode::ConfigError, "require 1 <= k_prime <= top_n");
        }
    }
};

/// Hard negatives mined for one query: C1 holds wrong-modality candidates
/// ranked above the labeled positive, C2 holds desired-modality candidates
/// ranked strictly below k'. Both preserve retrieval rank order; the parallel
/// rank vectors carry each negative's retrieval rank at mining time.
struct MinedNegatives {
    std::string qid;
    std::vector<std::string> c1;
    std::vector<std::string> c2;
    std::vector<std::uint32_t> c1_ranks;
    std::vector<std::uint32_t> c2_ranks;
    std::optional<std::uint32_t> positive_rank;  // 1-based within top_n, absent if outside

    bool operator==(const MinedNegatives&) const = default;
};

struct SampledNegative {
    std::string doc_id;
    NegativeClass cls;
};

struct MiningQuery {
    std::string qid;
    std::vector<float> vector;
    Modality desired_modality = Modality::Text;
    std::string positive_id;
};

struct MiningStats {
    double mean_c1 = 0.0;
    double mean_c2 = 0.0;
    double frac_positive_outside = 0.0;
    std::size_t query_count = 0;
};

/// Applies the two mining rules to the top_n retrieval head. A positive
/// absent from the head is treated as ranked top_n + 1, so the entire
/// wrong-modality head becomes C1.
MinedNegatives mine(const std::string& qid, std::span<const float> query_vec,
                    Modality desired_modality, const std::string& positive_id,
                    const VectorIndex& index, const MinerConfig& cfg);

/// Equal-probability choice between the non-empty classes, then uniform
/// within the class. Empty C1 and C2 yields no negative (not an error).
std::optional<SampledNegative> sample_negative(const MinedNegatives& mined, Rng& rng);

/// Continual-stage rule: C2 is mined afresh against the hard-stage index,
/// C1 is retained verbatim from the rand-stage mining, unconditionally.
MinedNegatives remine_continual(const MinedNegatives& mined_rand, const std::string& qid,
                                std::span<const float> query_vec_hard,
                                Modality desired_modality, const std::string& positive_id,
                                const VectorIndex& index_hard, const MinerConfig& cfg);

/// Mines every query, deterministic qid order.
std::map<std::string, MinedNegatives> mine_all(const std::vector<MiningQuery>& queries,
                                               const VectorIndex& index, const MinerConfig& cfg,
                                               MiningStats* stats = nullptr);

}  // namespace umr
