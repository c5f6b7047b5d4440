#include "umr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

namespace umr {

void TrainExample::validate() const {
    if (negative.has_value() != negative_class.has_value()) {
        throw Error(ErrorCode::DataError,
                    "example '" + query.id + "': negative and negative_class must come together");
    }
    if (negative && negative->id == positive.id) {
        throw Error(ErrorCode::DataError,
                    "example '" + query.id + "': negative id equals positive id");
    }
}

const char* to_string(TrainStage s) {
    switch (s) {
        case TrainStage::Rand: return "rand";
        case TrainStage::Hard: return "hard";
        case TrainStage::Continual: return "continual";
    }
    return "?";
}

namespace {

void require_finite(const std::vector<double>& v, const char* what) {
    for (double x : v) {
        if (!std::isfinite(x)) throw Error(ErrorCode::NonFinite, std::string(what));
    }
}

// One featurized encodable entity: a query (instruction folded into its text
// part) or a pool document. Features are fixed w.r.t. the parameters.
struct PreparedEntity {
    SparseVec text_feat;
    bool has_text = false;
    std::vector<double> image_feat;
    bool has_image = false;
};

PreparedEntity prepare_query_entity(const QueryInput& q, const TrainConfig& cfg,
                                    const FusionParams& params) {
    FeaturizerConfig fcfg{params.text_dim, params.image_dim, 0};
    EncodeOptions opts{cfg.include_instruction};
    PreparedEntity e;
    if (auto text_part = query_text_part(q.instruction, q.item, opts)) {
        e.text_feat = featurize_text_sparse(*text_part, fcfg);
        e.has_text = true;
    }
    if (q.item.image_feat) {
        e.image_feat = *q.item.image_feat;
        e.has_image = true;
    }
    if (!e.has_text && !e.has_image) {
        throw Error(ErrorCode::EmptyInput, "query '" + q.item.id + "' has no encodable part");
    }
    return e;
}

PreparedEntity prepare_candidate_entity(const Item& item, const FusionParams& params) {
    FeaturizerConfig fcfg{params.text_dim, params.image_dim, 0};
    PreparedEntity e;
    if (item.has_text()) {
        e.text_feat = featurize_text_sparse(*item.text, fcfg);
        e.has_text = true;
    }
    if (item.image_feat) {
        e.image_feat = *item.image_feat;
        e.has_image = true;
    }
    if (!e.has_text && !e.has_image) {
        throw Error(ErrorCode::EmptyInput, "candidate '" + item.id + "' has no encodable part");
    }
    return e;
}

struct ForwardEntity {
    std::vector<double> unit;
    double raw_norm = 0.0;
};

ForwardEntity forward_entity(const PreparedEntity& e, const FusionParams& params) {
    std::vector<double> raw = project_features(params, e.has_text ? &e.text_feat : nullptr,
                                               e.has_image ? &e.image_feat : nullptr);
    double sq = 0.0;
    for (double v : raw) sq += v * v;
    const double norm = std::sqrt(sq);
    if (!(norm >= 1e-12)) {
        throw Error(ErrorCode::ZeroVector, "encoded vector norm below 1e-12");
    }
    for (double& v : raw) v /= norm;
    return {std::move(raw), norm};
}

// loss_i = LSE_j(s_ij) - s_{i,pos_i} with s_ij = u_i . p_j / tau, max-shifted.
double loss_rows(const std::vector<ForwardEntity>& queries,
                 const std::vector<ForwardEntity>& pool,
                 const std::vector<std::size_t>& pos_index, double tau,
                 std::vector<std::vector<double>>* softmax_out) {
    const std::size_t nq = queries.size();
    const std::size_t np = pool.size();
    double total = 0.0;
    if (softmax_out) softmax_out->assign(nq, {});
    std::vector<double> scores(np);
    for (std::size_t i = 0; i < nq; ++i) {
        const auto& u = queries[i].unit;
        double max_score = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < np; ++j) {
            const auto& p = pool[j].unit;
            double acc = 0.0;
            for (std::size_t d = 0; d < u.size(); ++d) acc += u[d] * p[d];
            scores[j] = acc / tau;
            max_score = std::max(max_score, scores[j]);
        }
        double sum_exp = 0.0;
        for (std::size_t j = 0; j < np; ++j) sum_exp += std::exp(scores[j] - max_score);
        const double lse = max_score + std::log(sum_exp);
        total += lse - scores[pos_index[i]];
        if (softmax_out) {
            auto& row = (*softmax_out)[i];
            row.resize(np);
            for (std::size_t j = 0; j < np; ++j) row[j] = std::exp(scores[j] - lse);
        }
    }
    const double loss = total / double(nq);
    if (!std::isfinite(loss)) throw Error(ErrorCode::NonFinite, "loss is not finite");
    return loss;
}

// (I - v v^T)/r pullback of an embedding cotangent into the raw fused vector,
// then outer products against the fixed features.
void backprop_entity(const PreparedEntity& e, const ForwardEntity& fwd,
                     const std::vector<double>& g_unit, const FusionParams& params,
                     Gradients& grads) {
    const std::size_t dim = fwd.unit.size();
    double vg = 0.0;
    for (std::size_t d = 0; d < dim; ++d) vg += fwd.unit[d] * g_unit[d];
    std::vector<double> g_raw(dim);
    for (std::size_t d = 0; d < dim; ++d) {
        g_raw[d] = (g_unit[d] - vg * fwd.unit[d]) / fwd.raw_norm;
    }
    if (e.has_text) {
        for (const auto& [bucket, value] : e.text_feat.entries) {
            double* col = grads.w_text.data() + bucket;
            for (std::size_t d = 0; d < dim; ++d) {
                col[d * params.text_dim] += g_raw[d] * value;
            }
        }
    }
    if (e.has_image) {
        for (std::size_t d = 0; d < dim; ++d) {
            double* row = grads.w_image.data() + d * params.image_dim;
            const double g = g_raw[d];
            for (std::size_t c = 0; c < params.image_dim; ++c) {
                row[c] += g * e.image_feat[c];
            }
        }
    }
}

double loss_prepared(const std::vector<const PreparedEntity*>& queries,
                     const std::vector<const PreparedEntity*>& pool,
                     const std::vector<std::size_t>& pos_index, const FusionParams& params,
                     double tau) {
    std::vector<ForwardEntity> fq(queries.size()), fp(pool.size());
    for (std::size_t i = 0; i < queries.size(); ++i) fq[i] = forward_entity(*queries[i], params);
    for (std::size_t j = 0; j < pool.size(); ++j) fp[j] = forward_entity(*pool[j], params);
    return loss_rows(fq, fp, pos_index, tau, nullptr);
}

Gradients grad_prepared(const std::vector<const PreparedEntity*>& queries,
                        const std::vector<const PreparedEntity*>& pool,
                        const std::vector<std::size_t>& pos_index, const FusionParams& params,
                        double tau) {
    const std::size_t nq = queries.size();
    const std::size_t np = pool.size();
    std::vector<ForwardEntity> fq(nq), fp(np);
    for (std::size_t i = 0; i < nq; ++i) fq[i] = forward_entity(*queries[i], params);
    for (std::size_t j = 0; j < np; ++j) fp[j] = forward_entity(*pool[j], params);

    std::vector<std::vector<double>> softmax;
    Gradients grads;
    grads.w_text.assign(params.text_size(), 0.0);
    grads.w_image.assign(params.image_size(), 0.0);
    grads.loss = loss_rows(fq, fp, pos_index, tau, &softmax);

    const double inv_b = 1.0 / double(nq);
    const std::size_t dim = params.dim;
    std::vector<double> g_unit(dim);
    std::vector<std::vector<double>> g_pool(np, std::vector<double>(dim, 0.0));
    for (std::size_t i = 0; i < nq; ++i) {
        std::fill(g_unit.begin(), g_unit.end(), 0.0);
        for (std::size_t j = 0; j < np; ++j) {
            const double coeff = (softmax[i][j] - (j == pos_index[i] ? 1.0 : 0.0)) * inv_b / tau;
            if (coeff == 0.0) continue;
            const auto& p = fp[j].unit;
            const auto& u = fq[i].unit;
            for (std::size_t d = 0; d < dim; ++d) {
                g_unit[d] += coeff * p[d];
                g_pool[j][d] += coeff * u[d];
            }
        }
        backprop_entity(*queries[i], fq[i], g_unit, params, grads);
    }
    for (std::size_t j = 0; j < np; ++j) {
        backprop_entity(*pool[j], fp[j], g_pool[j], params, grads);
    }
    return grads;
}

struct PreparedBatch {
    std::vector<PreparedEntity> queries;
    std::vector<PreparedEntity> pool;
    std::vector<std::size_t> pos_index;

    std::vector<const PreparedEntity*> query_ptrs() const {
        std::vector<const PreparedEntity*> out;
        out.reserve(queries.size());
        for (const auto& q : queries) out.push_back(&q);
        return out;
    }
    std::vector<const PreparedEntity*> pool_ptrs() const {
        std::vector<const PreparedEntity*> out;
        out.reserve(pool.size());
        for (const auto& p : pool) out.push_back(&p);
        return out;
    }
};

PreparedBatch prepare_batch(const GradBatch& batch, const FusionParams& params,
                            const TrainConfig& cfg) {
    if (batch.queries.empty()) throw Error(ErrorCode::EmptyInput, "empty gradient batch");
    if (batch.pos_index.size() != batch.queries.size()) {
        throw Error(ErrorCode::DataError, "pos_index size mismatch");
    }
    for (std::size_t idx : batch.pos_index) {
        if (idx >= batch.pool.size()) throw Error(ErrorCode::DataError, "pos_index out of range");
    }
    PreparedBatch out;
    out.queries.reserve(batch.queries.size());
    out.pool.reserve(batch.pool.size());
    for (const QueryInput& q : batch.queries) {
        out.queries.push_back(prepare_query_entity(q, cfg, params));
    }
    for (const Item& item : batch.pool) {
        out.pool.push_back(prepare_candidate_entity(item, params));
    }
    out.pos_index = batch.pos_index;
    return out;
}

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

struct AdamState {
    std::vector<double> m_text, v_text, m_image, v_image;
    std::size_t t = 0;

    explicit AdamState(const FusionParams& p)
        : m_text(p.text_size(), 0.0),
          v_text(p.text_size(), 0.0),
          m_image(p.image_size(), 0.0),
          v_image(p.image_size(), 0.0) {}
};

void adam_step(FusionParams& params, const Gradients& grads, AdamState& state, double lr) {
    state.t += 1;
    const double bc1 = 1.0 - std::pow(kBeta1, double(state.t));
    const double bc2 = 1.0 - std::pow(kBeta2, double(state.t));
    auto update = [&](std::vector<double>& w, const std::vector<double>& g,
                      std::vector<double>& m, std::vector<double>& v) {
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g[i];
            v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g[i] * g[i];
            w[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + kAdamEps);
        }
    };
    update(params.w_text, grads.w_text, state.m_text, state.v_text);
    update(params.w_image, grads.w_image, state.m_image, state.v_image);
}

std::vector<Batch> make_batches(const std::vector<TrainExample>& examples,
                                const TrainConfig& cfg, Rng& rng) {
    cfg.validate();
    std::vector<std::size_t> remaining(examples.size());
    std::iota(remaining.begin(), remaining.end(), 0);
    rng.shuffle(remaining);
    std::vector<Batch> batches;
    while (remaining.size() >= cfg.batch_size) {
        Batch batch;
        std::unordered_set<std::string> used_positives;
        while (batch.size() < cfg.batch_size) {
            bool placed = false;
            for (std::size_t attempt = 0; attempt < 100; ++attempt) {
                const std::size_t pos = attempt == 0 ? 0 : rng.next_index(remaining.size());
                const std::size_t ex = remaining[pos];
                if (used_positives.insert(examples[ex].positive.id).second) {
                    batch.push_back(ex);
                    remaining[pos] = remaining.back();
                    remaining.pop_back();
                    placed = true;
                    break;
                }
            }
            if (!placed) {
                throw Error(ErrorCode::BatchInfeasible,
                            "cannot fill a batch with distinct positive ids");
            }
        }
        batches.push_back(std::move(batch));
    }
    return batches;
}

// Per-example featurization done once per train() call; the per-batch pools
// reference these entities by pointer.
struct PreparedPack {
    PreparedEntity query;
    PreparedEntity positive;
    PreparedEntity negative;
    bool has_negative = false;
    std::string positive_id;
    std::string negative_id;
};

PreparedPack prepare_pack(const TrainExample& e, const TrainConfig& cfg,
                          const FusionParams& params) {
    PreparedPack pack;
    pack.query = prepare_query_entity(QueryInput{e.instruction, e.query}, cfg, params);
    pack.positive = prepare_candidate_entity(e.positive, params);
    pack.positive_id = e.positive.id;
    if (e.negative) {
        pack.negative = prepare_candidate_entity(*e.negative, params);
        pack.negative_id = e.negative->id;
        pack.has_negative = true;
    }
    return pack;
}

// Runs one optimizer step over a batch of packs: interleaved pool layout
// (positive, negative per example), dedup by id, first occurrence kept.
double step_on_packs(const std::vector<const PreparedPack*>& batch, bool with_negatives,
                     FusionParams& params, AdamState& opt, const TrainConfig& cfg) {
    std::vector<const PreparedEntity*> queries;
    std::vector<const PreparedEntity*> pool;
    std::vector<std::size_t> pos_index;
    std::unordered_map<std::string, std::size_t> pool_pos;
    auto add = [&](const std::string& id, const PreparedEntity* ent) -> std::size_t {
        auto [it, inserted] = pool_pos.try_emplace(id, pool.size());
        if (inserted) pool.push_back(ent);
        return it->second;
    };
    for (const PreparedPack* pack : batch) {
        queries.push_back(&pack->query);
        pos_index.push_back(add(pack->positive_id, &pack->positive));
        if (with_negatives && pack->has_negative) add(pack->negative_id, &pack->negative);
    }
    Gradients grads = grad_prepared(queries, pool, pos_index, params, cfg.tau);
    adam_step(params, grads, opt, cfg.lr);
    return grads.loss;
}

}  // namespace

double infonce_loss(const std::vector<std::vector<double>>& query_vecs, const BatchPool& pool,
                    const std::vector<std::size_t>& pos_index, double tau) {
    if (!(tau > 0.0)) throw Error(ErrorCode::ConfigError, "tau must be > 0");
    if (query_vecs.empty()) throw Error(ErrorCode::EmptyInput, "no queries");
    if (pos_index.size() != query_vecs.size()) {
        throw Error(ErrorCode::DataError, "pos_index size mismatch");
    }
    for (const auto& q : query_vecs) require_finite(q, "non-finite query vector");
    std::vector<ForwardEntity> fq, fp;
    fq.reserve(query_vecs.size());
    fp.reserve(pool.entries.size());
    for (const auto& q : query_vecs) fq.push_back(ForwardEntity{q, 1.0});
    for (const auto& entry : pool.entries) {
        require_finite(entry.vector, "non-finite pool vector");
        fp.push_back(ForwardEntity{entry.vector, 1.0});
    }
    for (std::size_t idx : pos_index) {
        if (idx >= fp.size()) throw Error(ErrorCode::DataError, "pos_index out of range");
    }
    return loss_rows(fq, fp, pos_index, tau, nullptr);
}

Gradients infonce_grad(const GradBatch& batch, const FusionParams& params,
                       const TrainConfig& cfg) {
    cfg.validate();
    params.validate();
    PreparedBatch prepared = prepare_batch(batch, params, cfg);
    return grad_prepared(prepared.query_ptrs(), prepared.pool_ptrs(), prepared.pos_index, params,
                         cfg.tau);
}

GradCheckReport grad_check(const FusionParams& params, const GradBatch& batch,
                           const TrainConfig& cfg, std::size_t min_coords, double step,
                           std::uint64_t seed) {
    cfg.validate();
    params.validate();
    PreparedBatch prepared = prepare_batch(batch, params, cfg);
    const auto query_ptrs = prepared.query_ptrs();
    const auto pool_ptrs = prepared.pool_ptrs();
    const Gradients analytic =
        grad_prepared(query_ptrs, pool_ptrs, prepared.pos_index, params, cfg.tau);

    const std::size_t total = params.text_size() + params.image_size();
    std::vector<std::size_t> coords;
    if (total <= min_coords) {
        coords.resize(total);
        std::iota(coords.begin(), coords.end(), 0);
    } else {
        Rng rng(seed);
        std::unordered_set<std::size_t> chosen;
        while (chosen.size() < min_coords) chosen.insert(rng.next_index(total));
        coords.assign(chosen.begin(), chosen.end());
        std::sort(coords.begin(), coords.end());
    }

    FusionParams probe = params;
    GradCheckReport report;
    report.coords_checked = coords.size();
    auto coord_ref = [&](std::size_t c) -> double& {
        return c < probe.w_text.size() ? probe.w_text[c] : probe.w_image[c - probe.w_text.size()];
    };
    auto analytic_at = [&](std::size_t c) {
        return c < analytic.w_text.size() ? analytic.w_text[c]
                                          : analytic.w_image[c - analytic.w_text.size()];
    };
    for (std::size_t c : coords) {
        double& entry = coord_ref(c);
        const double saved = entry;
        entry = saved + step;
        const double up = loss_prepared(query_ptrs, pool_ptrs, prepared.pos_index, probe, cfg.tau);
        entry = saved - step;
        const double down =
            loss_prepared(query_ptrs, pool_ptrs, prepared.pos_index, probe, cfg.tau);
        entry = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double ga = analytic_at(c);
        const double rel =
            std::abs(ga - numeric) / std::max(1e-8, std::abs(ga) + std::abs(numeric));
        report.max_rel_error = std::max(report.max_rel_error, rel);
    }
    return report;
}

std::vector<Batch> make_batches_rand(const std::vector<TrainExample>& examples,
                                     const TrainConfig& cfg, Rng& rng) {
    return make_batches(examples, cfg, rng);
}

std::vector<Batch> make_batches_hard(const std::vector<TrainExample>& examples,
                                     const TrainConfig& cfg, Rng& rng) {
    return make_batches(examples, cfg, rng);
}

GradBatch assemble_batch(const std::vector<TrainExample>& examples, const Batch& batch,
                         bool with_negatives, const TrainConfig&) {
    GradBatch gb;
    std::unordered_map<std::string, std::size_t> pool_pos;
    auto add = [&](const Item& item) -> std::size_t {
        auto [it, inserted] = pool_pos.try_emplace(item.id, gb.pool.size());
        if (inserted) gb.pool.push_back(item);
        return it->second;
    };
    for (std::size_t ex : batch) {
        const TrainExample& e = examples.at(ex);
        gb.queries.push_back(QueryInput{e.instruction, e.query});
        gb.pos_index.push_back(add(e.positive));
        if (with_negatives && e.negative) add(*e.negative);
    }
    return gb;
}

const TrainExample& sample_mixed(const std::vector<TrainExample>& source_a,
                                 const std::vector<TrainExample>& source_b, Rng& rng) {
    if (source_a.empty() || source_b.empty()) {
        throw Error(ErrorCode::EmptySource,
                    source_a.empty() ? "source A is empty" : "source B is empty");
    }
    const bool pick_a = rng.next_double() < 0.5;
    const auto& src = pick_a ? source_a : source_b;
    return src[rng.next_index(src.size())];
}

TrainResult train(const std::vector<TrainExample>& examples, const FusionParams& start,
                  const TrainConfig& cfg, TrainStage stage) {
    if (stage == TrainStage::Continual) {
        throw Error(ErrorCode::ConfigError, "continual training takes two sources");
    }
    cfg.validate();
    start.validate();
    if (examples.empty()) throw Error(ErrorCode::EmptyInput, "no training examples");
    for (const TrainExample& e : examples) e.validate();

    std::vector<PreparedPack> packs;
    packs.reserve(examples.size());
    for (const TrainExample& e : examples) packs.push_back(prepare_pack(e, cfg, start));

    const bool with_negatives = stage == TrainStage::Hard;
    FusionParams params = start;
    AdamState opt(params);
    Rng rng(cfg.seed);
    TrainResult result;
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const std::vector<Batch> batches = make_batches(examples, cfg, rng);
        for (const Batch& batch : batches) {
            std::vector<const PreparedPack*> view;
            view.reserve(batch.size());
            for (std::size_t ex : batch) view.push_back(&packs[ex]);
            const double loss = step_on_packs(view, with_negatives, params, opt, cfg);
            result.trace.push_back(TraceEntry{++step, loss, stage});
        }
    }
    result.params = std::move(params);
    return result;
}

TrainResult train_continual(const std::vector<TrainExample>& multimodal,
                            const std::vector<TrainExample>& text_to_text,
                            const FusionParams& start, const TrainConfig& cfg) {
    cfg.validate();
    start.validate();
    if (multimodal.empty() || text_to_text.empty()) {
        throw Error(ErrorCode::EmptySource,
                    multimodal.empty() ? "source A is empty" : "source B is empty");
    }
    for (const TrainExample& e : multimodal) e.validate();
    for (const TrainExample& e : text_to_text) e.validate();

    std::vector<PreparedPack> packs_a, packs_b;
    packs_a.reserve(multimodal.size());
    packs_b.reserve(text_to_text.size());
    for (const TrainExample& e : multimodal) packs_a.push_back(prepare_pack(e, cfg, start));
    for (const TrainExample& e : text_to_text) packs_b.push_back(prepare_pack(e, cfg, start));
    auto pack_of = [&](const TrainExample& e) -> const PreparedPack* {
        if (&e >= multimodal.data() && &e < multimodal.data() + multimodal.size()) {
            return &packs_a[std::size_t(&e - multimodal.data())];
        }
        return &packs_b[std::size_t(&e - text_to_text.data())];
    };

    FusionParams params = start;
    AdamState opt(params);  // fresh optimizer state for the stage
    Rng rng(cfg.seed);
    TrainResult result;
    const std::size_t steps_per_epoch =
        std::max<std::size_t>(1, (multimodal.size() + text_to_text.size()) / cfg.batch_size);
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t s = 0; s < steps_per_epoch; ++s) {
            std::vector<const PreparedPack*> view;
            std::unordered_set<std::string> used_positives;
            while (view.size() < cfg.batch_size) {
                bool placed = false;
                for (std::size_t attempt = 0; attempt < 100; ++attempt) {
                    const TrainExample& e = sample_mixed(multimodal, text_to_text, rng);
                    if (used_positives.insert(e.positive.id).second) {
                        view.push_back(pack_of(e));
                        placed = true;
                        break;
                    }
                }
                if (!placed) {
                    throw Error(ErrorCode::BatchInfeasible,
                                "cannot fill a mixed batch with distinct positive ids");
                }
            }
            const double loss = step_on_packs(view, true, params, opt, cfg);
            result.trace.push_back(TraceEntry{++step, loss, TrainStage::Continual});
        }
    }
    result.params = std::move(params);
    return result;
}

}  // namespace umr
