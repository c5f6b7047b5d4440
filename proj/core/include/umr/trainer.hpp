#pragma once

#include <optional>
#include <string>
#include <vector>

#include "umr/core.hpp"
#include "umr/featurizer.hpp"
#include "umr/fusion_encoder.hpp"
#include "umr/rng.hpp"

namespace umr {

/// One training record: instruction-guided query, its labeled positive and,
/// for the hard/continual stages, a mined negative with provenance.
struct TrainExample {
    std::string task_id;
    std::string instruction;
    Item query;
    Item positive;
    std::optional<Item> negative;
    std::optional<NegativeClass> negative_class;

    void validate() const;
};

struct TrainConfig {
    double tau = 0.05;
    std::size_t batch_size = 32;
    double lr = 1e-3;
    std::size_t epochs = 1;
    std::uint64_t seed = 0;
    bool include_instruction = true;

    void validate() const {
        if (!(tau > 0.0)) throw Error(ErrorCode::ConfigError, "tau must be > 0");
        if (batch_size < 1) throw Error(ErrorCode::ConfigError, "batch_size must be >= 1");
    }
};

enum class TrainStage {
    Rand,
    Hard,
    Continual,
};

const char* to_string(TrainStage s);

/// The per-batch candidate set D_B: positives (and negatives, when mined)
/// of every query in the batch, deduplicated by id.
struct BatchPoolEntry {
    std::string id;
    std::vector<double> vector;
    Modality modality = Modality::Text;
};

struct BatchPool {
    std::vector<BatchPoolEntry> entries;
};

/// -(1/|B|) sum_i log softmax(q_i . pool / tau)[pos_index_i], max-shifted.
double infonce_loss(const std::vector<std::vector<double>>& query_vecs, const BatchPool& pool,
                    const std::vector<std::size_t>& pos_index, double tau);

/// Inputs to the item-level loss/gradient: instruction-paired query items,
/// the deduplicated pool items, and each query's positive position.
struct QueryInput {
    std::string instruction;
    Item item;
};

struct GradBatch {
    std::vector<QueryInput> queries;
    std::vector<Item> pool;
    std::vector<std::size_t> pos_index;
};

struct Gradients {
    std::vector<double> w_text;
    std::vector<double> w_image;
    double loss = 0.0;
};

/// Analytic gradient of the full composed map (featurize, project, normalize,
/// similarity, loss) with respect to both projection matrices. Encoding flows
/// through the queries and through every pool document.
Gradients infonce_grad(const GradBatch& batch, const FusionParams& params,
                       const TrainConfig& cfg);

struct GradCheckReport {
    std::size_t coords_checked = 0;
    double max_rel_error = 0.0;
};

/// Central finite differences on a random coordinate subset of the two
/// matrices; relative error |g_a - g_n| / max(1e-8, |g_a| + |g_n|).
GradCheckReport grad_check(const FusionParams& params, const GradBatch& batch,
                           const TrainConfig& cfg, std::size_t min_coords = 200,
                           double step = 1e-5, std::uint64_t seed = 0);

/// Indices into the examples vector; one inner vector per batch.
using Batch = std::vector<std::size_t>;

/// Seeded shuffle into batches of exactly batch_size (the final partial batch
/// is dropped). Positive ids are distinct within a batch; a collision is
/// resampled at most 100 times before BatchInfeasible.
std::vector<Batch> make_batches_rand(const std::vector<TrainExample>& examples,
                                     const TrainConfig& cfg, Rng& rng);

/// As make_batches_rand; each example additionally contributes its sampled
/// negative to the batch pool (duplicates deduplicated, first kept).
std::vector<Batch> make_batches_hard(const std::vector<TrainExample>& examples,
                                     const TrainConfig& cfg, Rng& rng);

/// Materializes one batch into item-level gradient inputs, applying the pool
/// ordering (positive, negative per example) and id deduplication.
GradBatch assemble_batch(const std::vector<TrainExample>& examples, const Batch& batch,
                         bool with_negatives, const TrainConfig& cfg);

/// Uniform coin between the two sources, then uniform within the winner.
const TrainExample& sample_mixed(const std::vector<TrainExample>& source_a,
                                 const std::vector<TrainExample>& source_b, Rng& rng);

struct TraceEntry {
    std::size_t step = 0;
    double loss = 0.0;
    TrainStage stage = TrainStage::Rand;
};

struct TrainResult {
    FusionParams params;
    std::vector<TraceEntry> trace;
};

/// Adam updates from the given starting parameters; fully deterministic for a
/// fixed seed. The hard stage is conventionally started from the initial
/// (pretrained) parameters rather than the rand-stage result; that choice
/// belongs to the caller, which passes the start explicitly.
TrainResult train(const std::vector<TrainExample>& examples, const FusionParams& start,
                  const TrainConfig& cfg, TrainStage stage);

/// Continual stage: each step draws batch_size examples by uniform mixed
/// sampling from the two sources, trains with hard-style pools, and starts
/// from the passed-in params with fresh optimizer state.
TrainResult train_continual(const std::vector<TrainExample>& multimodal,
                            const std::vector<TrainExample>& text_to_text,
                            const FusionParams& start, const TrainConfig& cfg);

}  // namespace umr
