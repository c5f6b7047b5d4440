#include "umr/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <set>
#include <sstream>

#include "umr/reranker.hpp"
#include "umr/rng.hpp"

namespace umr {

namespace fs = std::filesystem;

namespace {

std::string resolve_ref(const std::string& ref, const std::string& base_dir) {
    fs::path p(ref);
    if (p.is_absolute() || base_dir.empty()) return ref;
    return (fs::path(base_dir) / p).string();
}

Item featurize_item(Item item, const FeaturizerConfig& cfg, const std::string& base_dir) {
    if (item.image_ref) item.image_ref = resolve_ref(*item.image_ref, base_dir);
    return load_or_featurize(std::move(item), cfg);
}

std::map<std::string, TaskSpec> task_map(const std::vector<TaskSpec>& tasks) {
    std::map<std::string, TaskSpec> out;
    for (const TaskSpec& t : tasks) {
        if (!out.emplace(t.task_id, t).second) {
            throw Error(ErrorCode::DuplicateId, "duplicate task_id '" + t.task_id + "'");
        }
    }
    return out;
}

const TaskSpec& task_for(const std::map<std::string, TaskSpec>& tasks,
                         const std::string& task_id, const std::string& qid) {
    auto it = tasks.find(task_id);
    if (it == tasks.end()) {
        throw Error(ErrorCode::DataError,
                    "query '" + qid + "' references unknown task '" + task_id + "'");
    }
    return it->second;
}

const Item& corpus_item(const std::map<std::string, Item>& corpus_by_id, const std::string& id,
                        const std::string& qid) {
    auto it = corpus_by_id.find(id);
    if (it == corpus_by_id.end()) {
        throw Error(ErrorCode::DataError,
                    "query '" + qid + "' references missing corpus doc '" + id + "'");
    }
    return it->second;
}

std::vector<float> to_f32(const std::vector<double>& v) {
    std::vector<float> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
    return out;
}

}  // namespace

std::vector<CorpusRecord> featurize_corpus(std::vector<CorpusRecord> records,
                                           const FeaturizerConfig& cfg,
                                           const std::string& base_dir) {
    for (CorpusRecord& rec : records) {
        rec.item = featurize_item(std::move(rec.item), cfg, base_dir);
    }
    return records;
}

std::vector<QueryRecord> featurize_queries(std::vector<QueryRecord> records,
                                           const FeaturizerConfig& cfg,
                                           const std::string& base_dir) {
    for (QueryRecord& rec : records) {
        rec.item = featurize_item(std::move(rec.item), cfg, base_dir);
    }
    return records;
}

std::vector<TrainExample> build_rand_examples(const std::vector<QueryRecord>& queries,
                                              const std::vector<TaskSpec>& tasks,
                                              const std::map<std::string, Item>& corpus_by_id) {
    const auto tmap = task_map(tasks);
    std::vector<TrainExample> out;
    out.reserve(queries.size());
    for (const QueryRecord& q : queries) {
        if (q.pos_ids.empty()) {
            throw Error(ErrorCode::DataError, "query '" + q.item.id + "' has no labeled positive");
        }
        const TaskSpec& task = task_for(tmap, q.task_id, q.item.id);
        TrainExample ex;
        ex.task_id = q.task_id;
        ex.instruction = task.instruction;
        ex.query = q.item;
        ex.positive = corpus_item(corpus_by_id, q.pos_ids.front(), q.item.id);
        out.push_back(std::move(ex));
    }
    return out;
}

std::vector<TrainExample> build_hard_examples(const std::vector<QueryRecord>& queries,
                                              const std::vector<TaskSpec>& tasks,
                                              const std::map<std::string, Item>& corpus_by_id,
                                              const std::map<std::string, MinedNegatives>& mined,
                                              std::uint64_t seed) {
    std::vector<TrainExample> out = build_rand_examples(queries, tasks, corpus_by_id);
    // iterate in qid order so sampling is reproducible regardless of the
    // query file's ordering
    std::vector<std::size_t> order(out.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return out[a].query.id < out[b].query.id;
    });
    Rng rng(seed);
    for (std::size_t idx : order) {
        TrainExample& ex = out[idx];
        auto it = mined.find(ex.query.id);
        if (it == mined.end()) {
            throw Error(ErrorCode::DataError,
                        "no mined negatives for qid '" + ex.query.id + "'");
        }
        if (auto sampled = sample_negative(it->second, rng)) {
            ex.negative = corpus_item(corpus_by_id, sampled->doc_id, ex.query.id);
            ex.negative_class = sampled->cls;
        }
        // both classes empty: keep the example, it trains with in-batch
        // negatives only
    }
    return out;
}

std::pair<std::vector<TrainExample>, std::vector<TrainExample>> split_for_continual(
    const std::vector<TrainExample>& examples, const std::vector<TaskSpec>& tasks) {
    const auto tmap = task_map(tasks);
    std::vector<TrainExample> multimodal, text_to_text;
    for (const TrainExample& ex : examples) {
        const TaskSpec& task = task_for(tmap, ex.task_id, ex.query.id);
        const bool text_task = ex.query.modality == Modality::Text &&
                               task.desired_modality == Modality::Text;
        (text_task ? text_to_text : multimodal).push_back(ex);
    }
    return {std::move(multimodal), std::move(text_to_text)};
}

std::vector<RunLine> retrieve_run(const std::vector<QueryRecord>& queries,
                                  const std::vector<TaskSpec>& tasks,
                                  const FusionParams& params, const VectorIndex& index,
                                  std::size_t k, bool include_instruction,
                                  const std::string& tag) {
    const auto tmap = task_map(tasks);
    const EncodeOptions opts{include_instruction};
    std::vector<RunLine> run;
    // qid order for deterministic output
    std::vector<const QueryRecord*> sorted;
    sorted.reserve(queries.size());
    for (const QueryRecord& q : queries) sorted.push_back(&q);
    std::sort(sorted.begin(), sorted.end(),
              [](const QueryRecord* a, const QueryRecord* b) { return a->item.id < b->item.id; });
    for (const QueryRecord* q : sorted) {
        const TaskSpec& task = task_for(tmap, q->task_id, q->item.id);
        const std::vector<double> vec = encode_query(task.instruction, q->item, params, opts);
        const std::vector<SearchHit> hits = index.search(to_f32(vec), k);
        for (const SearchHit& hit : hits) {
            run.push_back(RunLine{q->item.id, hit.doc_id, hit.rank, double(hit.score), tag});
        }
    }
    return run;
}

RunReport evaluate_run(const std::vector<RunLine>& run, const std::vector<QueryRecord>& queries,
                       const std::vector<TaskSpec>& tasks, const Qrels& qrels,
                       const std::map<std::string, Modality>& doc_modalities) {
    const auto tmap = task_map(tasks);
    std::map<std::string, const QueryRecord*> query_by_id;
    for (const QueryRecord& q : queries) query_by_id[q.item.id] = &q;

    // rebuild rankings per qid, order by rank
    std::map<std::string, std::vector<std::pair<std::uint32_t, std::string>>> ranked_raw;
    for (const RunLine& line : run) ranked_raw[line.qid].emplace_back(line.rank, line.doc_id);

    struct Accum {
        std::map<std::string, double> sums;
        std::size_t count = 0;
        bool all_queries_imagetext = true;
    };
    std::map<std::pair<std::string, std::string>, Accum> by_row;  // (dataset, task)

    for (auto& [qid, pairs] : ranked_raw) {
        auto qit = query_by_id.find(qid);
        if (qit == query_by_id.end()) {
            throw Error(ErrorCode::DataError, "run references unknown qid '" + qid + "'");
        }
        const QueryRecord& query = *qit->second;
        const TaskSpec& task = task_for(tmap, query.task_id, qid);
        std::sort(pairs.begin(), pairs.end());
        std::vector<std::string> ranked;
        ranked.reserve(pairs.size());
        for (const auto& [rank, doc] : pairs) ranked.push_back(doc);

        const auto* grades = qrels.for_query(qid);
        if (!grades) {
            throw Error(ErrorCode::EmptyRelevant, "no qrels for qid '" + qid + "'");
        }
        std::set<std::string> relevant;
        for (const auto& [doc, grade] : *grades) {
            if (grade > 0) relevant.insert(doc);
        }
        if (relevant.empty()) {
            throw Error(ErrorCode::EmptyRelevant, "no positive grades for qid '" + qid + "'");
        }

        double primary = 0.0;
        switch (task.metric) {
            case MetricKind::RecallAt5: primary = recall_at_k(ranked, relevant, 5); break;
            case MetricKind::RecallAt10: primary = recall_at_k(ranked, relevant, 10); break;
            case MetricKind::NDCGAt10: primary = ndcg_at_k(ranked, *grades, 10); break;
            case MetricKind::MAPAt5: primary = average_precision_at_k(ranked, relevant, 5); break;
        }
        double ma1 = 0.0;
        if (!ranked.empty()) {
            auto mit = doc_modalities.find(ranked.front());
            if (mit == doc_modalities.end()) {
                throw Error(ErrorCode::DataError,
                            "no modality known for doc '" + ranked.front() + "'");
            }
            ma1 = modality_accuracy_at_1(mit->second, task.desired_modality);
        }

        Accum& acc = by_row[{task.dataset_id, task.task_id}];
        acc.sums[to_string(task.metric)] += primary;
        if (task.metric != MetricKind::RecallAt5) {
            acc.sums["recall@5"] += recall_at_k(ranked, relevant, 5);
        }
        acc.sums["ma@1"] += ma1;
        acc.count += 1;
        if (query.item.modality != Modality::ImageText) acc.all_queries_imagetext = false;
    }

    std::vector<ReportRow> rows;
    std::map<std::string, QueryGroup> groups;
    for (const auto& [key, acc] : by_row) {
        ReportRow row;
        row.dataset_id = key.first;
        row.task_id = key.second;
        row.query_count = acc.count;
        for (const auto& [metric, sum] : acc.sums) {
            row.values[metric] = sum / double(acc.count);
        }
        groups[key.second] =
            acc.all_queries_imagetext ? QueryGroup::MultiModal : QueryGroup::SingleModal;
        rows.push_back(std::move(row));
    }
    return macro_average(std::move(rows), groups);
}

namespace {

struct LoadedData {
    std::vector<CorpusRecord> corpus;
    std::vector<QueryRecord> train_queries;
    std::vector<QueryRecord> eval_queries;
    std::vector<TaskSpec> tasks;
    Qrels qrels;
    std::map<std::string, Item> corpus_by_id;
    std::map<std::string, Modality> doc_modalities;
};

std::vector<MiningQuery> mining_queries(const std::vector<QueryRecord>& queries,
                                        const std::map<std::string, TaskSpec>& tmap,
                                        const FusionParams& params, bool include_instruction) {
    const EncodeOptions opts{include_instruction};
    std::vector<MiningQuery> out;
    out.reserve(queries.size());
    for (const QueryRecord& q : queries) {
        if (q.pos_ids.empty()) {
            throw Error(ErrorCode::DataError, "query '" + q.item.id + "' has no labeled positive");
        }
        const TaskSpec& task = task_for(tmap, q.task_id, q.item.id);
        MiningQuery mq;
        mq.qid = q.item.id;
        mq.vector = to_f32(encode_query(task.instruction, q.item, params, opts));
        mq.desired_modality = task.desired_modality;
        mq.positive_id = q.pos_ids.front();
        out.push_back(std::move(mq));
    }
    return out;
}

MinedFile to_mined_file(const std::map<std::string, MinedNegatives>& mined,
                        const std::vector<QueryRecord>& queries) {
    MinedFile file;
    std::map<std::string, std::string> positives;
    for (const QueryRecord& q : queries) {
        if (!q.pos_ids.empty()) positives[q.item.id] = q.pos_ids.front();
    }
    for (const auto& [qid, entry] : mined) {
        MinedNegatives stored = entry;
        stored.positive_rank.reset();  // not part of the persisted format
        file.entries[qid] = std::move(stored);
        file.positives[qid] = positives.at(qid);
    }
    return file;
}

std::string mining_stats_text(const MiningStats& stats) {
    std::ostringstream out;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "queries %zu\nmean_c1 %.6f\nmean_c2 %.6f\n",
                  stats.query_count, stats.mean_c1, stats.mean_c2);
    out << buf;
    std::snprintf(buf, sizeof(buf), "frac_positive_outside_top_n %.6f\n",
                  stats.frac_positive_outside);
    out << buf;
    return out.str();
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& cfg) {
    cfg.validate();
    fs::create_directories(cfg.workdir);
    const auto wpath = [&](const std::string& name) {
        return (fs::path(cfg.workdir) / name).string();
    };
    PipelineResult result;
    auto note = [&](const std::string& name, const std::string& path) {
        result.artifacts[name] = path;
    };

    // ingest + featurize
    LoadedData data;
    data.corpus = load_corpus(cfg.corpus_path);
    data.train_queries = load_queries(cfg.train_queries_path);
    data.eval_queries = load_queries(cfg.eval_queries_path);
    data.tasks = load_tasks(cfg.tasks_path);
    data.qrels = load_qrels(cfg.qrels_path);

    const std::string corpus_dir = fs::path(cfg.corpus_path).parent_path().string();
    const std::string train_dir = fs::path(cfg.train_queries_path).parent_path().string();
    const std::string eval_dir = fs::path(cfg.eval_queries_path).parent_path().string();
    data.corpus = featurize_corpus(std::move(data.corpus), cfg.featurizer, corpus_dir);
    data.train_queries = featurize_queries(std::move(data.train_queries), cfg.featurizer,
                                           train_dir);
    data.eval_queries = featurize_queries(std::move(data.eval_queries), cfg.featurizer, eval_dir);
    write_corpus(wpath("corpus_feat.jsonl"), data.corpus);
    write_queries(wpath("train_queries_feat.jsonl"), data.train_queries);
    write_queries(wpath("eval_queries_feat.jsonl"), data.eval_queries);
    note("corpus_feat", wpath("corpus_feat.jsonl"));

    std::vector<Item> corpus_items;
    corpus_items.reserve(data.corpus.size());
    for (const CorpusRecord& rec : data.corpus) {
        data.corpus_by_id[rec.item.id] = rec.item;
        data.doc_modalities[rec.item.id] = rec.item.modality;
        corpus_items.push_back(rec.item);
    }
    {
        std::set<std::string> pool_ids;
        for (const auto& [id, item] : data.corpus_by_id) pool_ids.insert(id);
        data.qrels.validate(&pool_ids);
    }
    const auto tmap = task_map(data.tasks);

    // initial parameters
    FusionParams params0 = init_params(cfg.embed_dim, cfg.featurizer);
    save_params(wpath("params_init.umrp"), params0);
    note("params_init", wpath("params_init.umrp"));

    // stage 1: in-batch negatives
    const std::vector<TrainExample> rand_examples =
        build_rand_examples(data.train_queries, data.tasks, data.corpus_by_id);
    TrainResult stage_rand = train(rand_examples, params0, cfg.stage_rand, TrainStage::Rand);
    save_params(wpath("params_rand.umrp"), stage_rand.params);
    write_trace(wpath("loss_rand.csv"), stage_rand.trace);
    note("params_rand", wpath("params_rand.umrp"));

    // mine with M^rand over the merged pool
    const std::vector<EmbeddingRecord> emb_rand = encode_corpus(corpus_items, stage_rand.params);
    write_embeddings(wpath("emb_rand.umre"), emb_rand, cfg.embed_dim);
    const VectorIndex index_rand = VectorIndex::build(emb_rand, "global");
    const std::vector<MiningQuery> mqueries_rand = mining_queries(
        data.train_queries, tmap, stage_rand.params, cfg.include_instruction);
    const std::map<std::string, MinedNegatives> mined_rand =
        mine_all(mqueries_rand, index_rand, cfg.miner, &result.mining_stats_rand);
    write_mined(wpath("mined_rand.jsonl"), to_mined_file(mined_rand, data.train_queries));
    write_text_file(wpath("mining_stats_rand.txt"), mining_stats_text(result.mining_stats_rand));
    note("mined_rand", wpath("mined_rand.jsonl"));

    // stage 2: hard negatives, restarted from the initial parameters
    const std::vector<TrainExample> hard_examples =
        build_hard_examples(data.train_queries, data.tasks, data.corpus_by_id, mined_rand,
                            cfg.stage_hard.seed);
    TrainResult stage_hard = train(hard_examples, params0, cfg.stage_hard, TrainStage::Hard);
    save_params(wpath("params_hard.umrp"), stage_hard.params);
    write_trace(wpath("loss_hard.csv"), stage_hard.trace);
    note("params_hard", wpath("params_hard.umrp"));

    // remine C2 with M^hard, retain C1 from M^rand
    const std::vector<EmbeddingRecord> emb_hard = encode_corpus(corpus_items, stage_hard.params);
    write_embeddings(wpath("emb_hard.umre"), emb_hard, cfg.embed_dim);
    const VectorIndex index_hard = VectorIndex::build(emb_hard, "global");
    const std::vector<MiningQuery> mqueries_hard = mining_queries(
        data.train_queries, tmap, stage_hard.params, cfg.include_instruction);
    std::map<std::string, MinedNegatives> mined_continual;
    for (const MiningQuery& mq : mqueries_hard) {
        mined_continual[mq.qid] =
            remine_continual(mined_rand.at(mq.qid), mq.qid, mq.vector, mq.desired_modality,
                             mq.positive_id, index_hard, cfg.miner);
    }
    write_mined(wpath("mined_continual.jsonl"),
                to_mined_file(mined_continual, data.train_queries));
    note("mined_continual", wpath("mined_continual.jsonl"));

    // stage 3: continual mixed-task fine-tuning from M^hard
    const std::vector<TrainExample> continual_examples =
        build_hard_examples(data.train_queries, data.tasks, data.corpus_by_id, mined_continual,
                            cfg.stage_continual.seed);
    auto [multimodal, text_to_text] = split_for_continual(continual_examples, data.tasks);
    TrainResult stage_continual = [&]() {
        if (multimodal.empty() || text_to_text.empty()) {
            // degenerate mixture: fall back to single-source hard-style training
            TrainResult r = train(continual_examples, stage_hard.params, cfg.stage_continual,
                                  TrainStage::Hard);
            for (TraceEntry& entry : r.trace) entry.stage = TrainStage::Continual;
            return r;
        }
        return train_continual(multimodal, text_to_text, stage_hard.params, cfg.stage_continual);
    }();
    save_params(wpath("params_continual.umrp"), stage_continual.params);
    write_trace(wpath("loss_continual.csv"), stage_continual.trace);
    note("params_continual", wpath("params_continual.umrp"));

    // retrieval + evaluation per checkpoint on held-out queries
    struct Checkpoint {
        const char* name;
        const FusionParams* params;
        RunReport* report;
    };
    Checkpoint checkpoints[3] = {
        {"rand", &stage_rand.params, &result.report_rand},
        {"hard", &stage_hard.params, &result.report_hard},
        {"continual", &stage_continual.params, &result.report_continual},
    };
    std::vector<RunLine> run_continual;  // kept for the rerank stage
    for (Checkpoint& ck : checkpoints) {
        const std::vector<EmbeddingRecord> emb = encode_corpus(corpus_items, ck.params ? *ck.params
                                                                                       : params0);
        write_embeddings(wpath(std::string("emb_") + ck.name + ".umre"), emb, cfg.embed_dim);
        std::vector<RunLine> run;
        if (cfg.pool_mode == PoolMode::Global) {
            const VectorIndex index = VectorIndex::build(emb, "global");
            run = retrieve_run(data.eval_queries, data.tasks, *ck.params, index, cfg.retrieve_k,
                               cfg.include_instruction, cfg.run_tag + "_" + ck.name);
        } else {
            // per-dataset pools: restrict each query to its task's dataset
            std::map<std::string, std::vector<EmbeddingRecord>> by_dataset;
            std::map<std::string, std::string> doc_dataset;
            for (const CorpusRecord& rec : data.corpus) {
                if (rec.dataset_id.empty()) {
                    throw Error(ErrorCode::DataError,
                                "per_dataset pools need dataset_id on every corpus record");
                }
                doc_dataset[rec.item.id] = rec.dataset_id;
            }
            for (const EmbeddingRecord& rec : emb) {
                by_dataset[doc_dataset.at(rec.id)].push_back(rec);
            }
            std::map<std::string, VectorIndex> indexes;
            for (const auto& [dataset, recs] : by_dataset) {
                indexes.emplace(dataset, VectorIndex::build(recs, dataset));
            }
            std::map<std::string, std::vector<QueryRecord>> queries_by_dataset;
            for (const QueryRecord& q : data.eval_queries) {
                const TaskSpec& task = task_for(tmap, q.task_id, q.item.id);
                queries_by_dataset[task.dataset_id].push_back(q);
            }
            for (const auto& [dataset, queries] : queries_by_dataset) {
                auto it = indexes.find(dataset);
                if (it == indexes.end()) {
                    throw Error(ErrorCode::DataError,
                                "no corpus records for dataset '" + dataset + "'");
                }
                auto part = retrieve_run(queries, data.tasks, *ck.params, it->second,
                                         cfg.retrieve_k, cfg.include_instruction,
                                         cfg.run_tag + "_" + ck.name);
                run.insert(run.end(), part.begin(), part.end());
            }
            std::stable_sort(run.begin(), run.end(),
                             [](const RunLine& a, const RunLine& b) { return a.qid < b.qid; });
        }
        const std::string run_path = wpath(std::string("run_") + ck.name + ".trec");
        write_run(run_path, run);
        note(std::string("run_") + ck.name, run_path);
        *ck.report = evaluate_run(run, data.eval_queries, data.tasks, data.qrels,
                                  data.doc_modalities);
        write_text_file(wpath(std::string("report_") + ck.name + ".csv"),
                        report_to_csv(*ck.report));
        write_text_file(wpath(std::string("report_") + ck.name + ".txt"),
                        report_to_table(*ck.report));
        if (std::string(ck.name) == "continual") run_continual = std::move(run);
    }

    // rerank the final model's run
    if (cfg.rerank_enabled) {
        std::unique_ptr<Scorer> scorer;
        if (cfg.rerank.scorer == "mock") {
            scorer = std::make_unique<MockScorer>(data.qrels);
        } else {
            scorer = std::make_unique<HttpScorer>(cfg.rerank.scorer, cfg.rerank.cache_path,
                                                  cfg.rerank.retry_backoff_ms);
        }
        const TemplateRegistry registry = TemplateRegistry::with_builtins();
        std::map<std::string, const QueryRecord*> query_by_id;
        for (const QueryRecord& q : data.eval_queries) query_by_id[q.item.id] = &q;
        std::map<std::string, std::vector<RunLine>> by_qid;
        for (const RunLine& line : run_continual) by_qid[line.qid].push_back(line);

        std::vector<RunLine> reranked_run;
        for (auto& [qid, lines] : by_qid) {
            std::sort(lines.begin(), lines.end(),
                      [](const RunLine& a, const RunLine& b) { return a.rank < b.rank; });
            std::vector<SearchHit> hits;
            hits.reserve(lines.size());
            for (const RunLine& line : lines) {
                auto mit = data.doc_modalities.find(line.doc_id);
                if (mit == data.doc_modalities.end()) {
                    throw Error(ErrorCode::DataError, "run doc '" + line.doc_id +
                                                          "' missing from corpus");
                }
                hits.push_back(SearchHit{line.doc_id, float(line.score), line.rank, mit->second});
            }
            const QueryRecord& query = *query_by_id.at(qid);
            const TaskSpec& task = task_for(tmap, query.task_id, qid);
            std::vector<SearchHit> new_hits = rerank(query.item, hits, registry,
                                                     data.corpus_by_id, task.dataset_id, *scorer,
                                                     cfg.rerank);
            for (std::size_t i = 0; i < new_hits.size(); ++i) {
                reranked_run.push_back(RunLine{qid, new_hits[i].doc_id,
                                               static_cast<std::uint32_t>(i + 1),
                                               double(new_hits[i].score),
                                               cfg.run_tag + "_rerank"});
            }
        }
        const std::string rerank_path = wpath("run_continual_reranked.trec");
        write_run(rerank_path, reranked_run);
        note("run_reranked", rerank_path);
        result.report_reranked = evaluate_run(reranked_run, data.eval_queries, data.tasks,
                                              data.qrels, data.doc_modalities);
        write_text_file(wpath("report_reranked.csv"), report_to_csv(result.report_reranked));
        write_text_file(wpath("report_reranked.txt"), report_to_table(result.report_reranked));
    }

    // one combined human-readable summary
    std::ostringstream summary;
    summary << "== " << to_string(TrainStage::Rand) << " ==\n"
            << report_to_table(result.report_rand) << "\n== " << to_string(TrainStage::Hard)
            << " ==\n"
            << report_to_table(result.report_hard) << "\n== "
            << to_string(TrainStage::Continual) << " ==\n"
            << report_to_table(result.report_continual);
    if (cfg.rerank_enabled) {
        summary << "\n== reranked ==\n" << report_to_table(result.report_reranked);
    }
    write_text_file(wpath("report.txt"), summary.str());
    note("report", wpath("report.txt"));
    return result;
}

}  // namespace umr
