// umr: universal multimodal retrieval toolkit CLI.
//
// Subcommands cover the full workflow: synth -> featurize -> train -> embed
// -> index -> mine -> retrieve -> rerank -> eval, plus gradcheck and the
// one-shot pipeline driver.

#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "umr/config.hpp"
#include "umr/core.hpp"
#include "umr/featurizer.hpp"
#include "umr/fusion_encoder.hpp"
#include "umr/index.hpp"
#include "umr/io.hpp"
#include "umr/metrics.hpp"
#include "umr/miner.hpp"
#include "umr/pipeline.hpp"
#include "umr/reranker.hpp"
#include "umr/rng.hpp"
#include "umr/synth.hpp"
#include "umr/trainer.hpp"

namespace {

using namespace umr;

int exit_code_for(const Error& e) {
    switch (e.code()) {
        case ErrorCode::ConfigError: return 2;
        case ErrorCode::ScorerUnavailable: return 4;
        default: return 3;
    }
}

std::map<std::string, Item> corpus_map(const std::vector<CorpusRecord>& corpus) {
    std::map<std::string, Item> out;
    for (const CorpusRecord& rec : corpus) out[rec.item.id] = rec.item;
    return out;
}

std::map<std::string, Modality> modality_map(const std::vector<CorpusRecord>& corpus) {
    std::map<std::string, Modality> out;
    for (const CorpusRecord& rec : corpus) out[rec.item.id] = rec.item.modality;
    return out;
}

std::string parent_dir(const std::string& path) {
    return std::filesystem::path(path).parent_path().string();
}

// Random small training instance for gradient checking.
GradBatch random_instance(std::uint32_t dim, std::uint32_t feat_dim, std::size_t batch,
                          Rng& rng) {
    (void)dim;
    auto random_text = [&]() {
        std::string text;
        const std::size_t n = 2 + rng.next_index(4);
        for (std::size_t i = 0; i < n; ++i) {
            if (!text.empty()) text.push_back(' ');
            text += "w" + std::to_string(rng.next_index(50));
        }
        return text;
    };
    auto random_image = [&]() {
        std::vector<double> v(feat_dim);
        double sq = 0.0;
        for (auto& x : v) {
            x = rng.next_range(-1.0, 1.0);
            sq += x * x;
        }
        const double inv = 1.0 / std::sqrt(sq);
        for (auto& x : v) x *= inv;
        return v;
    };
    auto random_item = [&](const std::string& id) {
        Item item;
        item.id = id;
        switch (rng.next_index(3)) {
            case 0:
                item.modality = Modality::Text;
                item.text = random_text();
                break;
            case 1:
                item.modality = Modality::Image;
                item.image_feat = random_image();
                break;
            default:
                item.modality = Modality::ImageText;
                item.text = random_text();
                item.image_feat = random_image();
                break;
        }
        return item;
    };

    GradBatch gb;
    for (std::size_t i = 0; i < batch; ++i) {
        const std::string tag = std::to_string(i);
        gb.queries.push_back(QueryInput{"find item " + tag, random_item("q" + tag)});
        gb.pool.push_back(random_item("p" + tag));
        gb.pos_index.push_back(gb.pool.size() - 1);
        gb.pool.push_back(random_item("n" + tag));
    }
    return gb;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"universal multimodal retrieval toolkit"};
    app.require_subcommand(1);

    // ---- synth ----
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic benchmark");
    SynthSpec synth_spec;
    std::string synth_out = "synth_data";
    synth_cmd->add_option("--out", synth_out, "output directory");
    synth_cmd->add_option("--clusters", synth_spec.n_clusters);
    synth_cmd->add_option("--text-per-cluster", synth_spec.text_docs_per_cluster);
    synth_cmd->add_option("--image-per-cluster", synth_spec.image_docs_per_cluster);
    synth_cmd->add_option("--imagetext-per-cluster", synth_spec.imagetext_docs_per_cluster);
    synth_cmd->add_option("--queries", synth_spec.n_queries);
    synth_cmd->add_option("--eval-queries", synth_spec.n_eval_queries);
    synth_cmd->add_option("--confound", synth_spec.modality_confound_strength,
                          "wrong-modality twin strength in [0,1]");
    synth_cmd->add_option("--seed", synth_spec.seed);

    // shared featurizer / encoder options
    FeaturizerConfig fcfg;
    std::uint32_t encoder_dim = 64;
    auto add_feat_options = [&](CLI::App* cmd) {
        cmd->add_option("--text-dim", fcfg.text_dim);
        cmd->add_option("--image-dim", fcfg.image_dim);
        cmd->add_option("--feat-seed", fcfg.seed);
    };

    // ---- featurize ----
    auto* feat_cmd = app.add_subcommand("featurize", "populate image features");
    std::string feat_corpus, feat_corpus_out, feat_queries, feat_queries_out;
    feat_cmd->add_option("--corpus", feat_corpus);
    feat_cmd->add_option("--out-corpus", feat_corpus_out);
    feat_cmd->add_option("--queries", feat_queries);
    feat_cmd->add_option("--out-queries", feat_queries_out);
    add_feat_options(feat_cmd);

    // ---- train ----
    auto* train_cmd = app.add_subcommand("train", "train fusion parameters");
    std::string train_stage = "rand";
    std::string train_corpus, train_queries, train_tasks, train_mined, train_init;
    std::string train_out = "params.umrp", train_trace;
    TrainConfig tcfg;
    train_cmd->add_option("--stage", train_stage)->check(CLI::IsMember({"rand", "hard", "continual"}));
    train_cmd->add_option("--corpus", train_corpus)->required();
    train_cmd->add_option("--queries", train_queries)->required();
    train_cmd->add_option("--tasks", train_tasks)->required();
    train_cmd->add_option("--mined", train_mined, "mined negatives (hard/continual)");
    train_cmd->add_option("--init", train_init, "starting checkpoint (default fresh init)");
    train_cmd->add_option("--out", train_out);
    train_cmd->add_option("--trace", train_trace, "loss trace csv");
    train_cmd->add_option("--tau", tcfg.tau);
    train_cmd->add_option("--batch-size", tcfg.batch_size);
    train_cmd->add_option("--lr", tcfg.lr);
    train_cmd->add_option("--epochs", tcfg.epochs);
    train_cmd->add_option("--seed", tcfg.seed);
    train_cmd->add_flag("--no-instruction", [&](std::int64_t) { tcfg.include_instruction = false; },
                        "train without task instructions");
    train_cmd->add_option("--dim", encoder_dim, "embedding dimension");
    add_feat_options(train_cmd);

    // ---- embed ----
    auto* embed_cmd = app.add_subcommand("embed", "encode a corpus into an embedding store");
    std::string embed_corpus, embed_params, embed_out = "emb.umre";
    embed_cmd->add_option("--corpus", embed_corpus)->required();
    embed_cmd->add_option("--params", embed_params)->required();
    embed_cmd->add_option("--out", embed_out);

    // ---- index ----
    auto* index_cmd = app.add_subcommand("index", "merge embedding stores into one pool");
    std::vector<std::string> index_in;
    std::string index_out = "merged.umre";
    index_cmd->add_option("--in", index_in)->required()->expected(-1);
    index_cmd->add_option("--out", index_out);

    // ---- mine ----
    auto* mine_cmd = app.add_subcommand("mine", "mine modality-aware hard negatives");
    std::string mine_params, mine_emb, mine_queries, mine_tasks, mine_out = "mined.jsonl";
    std::string mine_retain_c1, mine_stats_out;
    MinerConfig mine_cfg;
    bool mine_no_instruction = false;
    mine_cmd->add_option("--params", mine_params)->required();
    mine_cmd->add_option("--emb", mine_emb)->required();
    mine_cmd->add_option("--queries", mine_queries)->required();
    mine_cmd->add_option("--tasks", mine_tasks)->required();
    mine_cmd->add_option("--out", mine_out);
    mine_cmd->add_option("--retain-c1-from", mine_retain_c1,
                         "continual remine: keep C1 from this earlier mining");
    mine_cmd->add_option("--stats-out", mine_stats_out);
    mine_cmd->add_option("--top-n", mine_cfg.top_n);
    mine_cmd->add_option("--k-prime", mine_cfg.k_prime);
    mine_cmd->add_flag("--no-instruction", mine_no_instruction);

    // ---- retrieve ----
    auto* retrieve_cmd = app.add_subcommand("retrieve", "kNN retrieval into a TREC run");
    std::string ret_params, ret_emb, ret_queries, ret_tasks, ret_out = "run.trec";
    std::string ret_tag = "umr";
    std::size_t ret_k = 50;
    bool ret_no_instruction = false;
    retrieve_cmd->add_option("--params", ret_params)->required();
    retrieve_cmd->add_option("--emb", ret_emb)->required();
    retrieve_cmd->add_option("--queries", ret_queries)->required();
    retrieve_cmd->add_option("--tasks", ret_tasks)->required();
    retrieve_cmd->add_option("--out", ret_out);
    retrieve_cmd->add_option("--k", ret_k);
    retrieve_cmd->add_option("--tag", ret_tag);
    retrieve_cmd->add_flag("--no-instruction", ret_no_instruction);

    // ---- rerank ----
    auto* rerank_cmd = app.add_subcommand("rerank", "true/false rerank of a run's head");
    std::string rr_run, rr_queries, rr_tasks, rr_corpus, rr_qrels, rr_templates;
    std::string rr_out = "run_reranked.trec";
    RerankConfig rr_cfg;
    rerank_cmd->add_option("--run", rr_run)->required();
    rerank_cmd->add_option("--queries", rr_queries)->required();
    rerank_cmd->add_option("--tasks", rr_tasks)->required();
    rerank_cmd->add_option("--corpus", rr_corpus)->required();
    rerank_cmd->add_option("--qrels", rr_qrels, "oracle qrels for the mock scorer");
    rerank_cmd->add_option("--templates", rr_templates, "extra prompt templates (jsonl)");
    rerank_cmd->add_option("--scorer", rr_cfg.scorer, "mock or http endpoint");
    rerank_cmd->add_option("--depth", rr_cfg.depth);
    rerank_cmd->add_option("--max-in-flight", rr_cfg.max_in_flight);
    rerank_cmd->add_option("--cache", rr_cfg.cache_path);
    rerank_cmd->add_option("--out", rr_out);

    // ---- eval ----
    auto* eval_cmd = app.add_subcommand("eval", "score a run against qrels");
    std::string ev_run, ev_queries, ev_tasks, ev_qrels, ev_corpus, ev_csv;
    eval_cmd->add_option("--run", ev_run)->required();
    eval_cmd->add_option("--queries", ev_queries)->required();
    eval_cmd->add_option("--tasks", ev_tasks)->required();
    eval_cmd->add_option("--qrels", ev_qrels)->required();
    eval_cmd->add_option("--corpus", ev_corpus)->required();
    eval_cmd->add_option("--out-csv", ev_csv);

    // ---- gradcheck ----
    auto* grad_cmd = app.add_subcommand("gradcheck", "verify the analytic gradient");
    std::size_t gc_trials = 3, gc_batch = 4, gc_coords = 200;
    std::uint32_t gc_dim = 8, gc_feat = 16;
    std::uint64_t gc_seed = 0;
    double gc_tolerance = 1e-4;
    grad_cmd->add_option("--trials", gc_trials);
    grad_cmd->add_option("--dim", gc_dim);
    grad_cmd->add_option("--feat-dim", gc_feat);
    grad_cmd->add_option("--batch", gc_batch);
    grad_cmd->add_option("--coords", gc_coords);
    grad_cmd->add_option("--seed", gc_seed);
    grad_cmd->add_option("--tolerance", gc_tolerance);

    // ---- pipeline ----
    auto* pipe_cmd = app.add_subcommand("pipeline", "full train/mine/retrain/eval pipeline");
    std::string pipe_config;
    pipe_cmd->add_option("--config", pipe_config, "flat key=value config file");
    std::map<std::string, std::string> pipe_overrides;
    std::vector<std::pair<CLI::Option*, std::string>> pipe_options;
    for (const std::string& key : config_key_names()) {
        auto* opt = pipe_cmd->add_option("--" + key, pipe_overrides[key]);
        pipe_options.emplace_back(opt, key);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*synth_cmd) {
            const SynthOutput out = generate_synth(synth_spec);
            write_synth(synth_out, out);
            std::cout << "wrote " << out.corpus.size() << " docs, " << out.train_queries.size()
                      << " train queries, " << out.eval_queries.size() << " eval queries to "
                      << synth_out << "\n";
        } else if (*feat_cmd) {
            if (!feat_corpus.empty()) {
                auto corpus = featurize_corpus(load_corpus(feat_corpus), fcfg,
                                               parent_dir(feat_corpus));
                write_corpus(feat_corpus_out.empty() ? feat_corpus + ".feat" : feat_corpus_out,
                             corpus);
            }
            if (!feat_queries.empty()) {
                auto queries = featurize_queries(load_queries(feat_queries), fcfg,
                                                 parent_dir(feat_queries));
                write_queries(feat_queries_out.empty() ? feat_queries + ".feat"
                                                       : feat_queries_out,
                              queries);
            }
        } else if (*train_cmd) {
            auto corpus = featurize_corpus(load_corpus(train_corpus), fcfg,
                                           parent_dir(train_corpus));
            auto queries = featurize_queries(load_queries(train_queries), fcfg,
                                             parent_dir(train_queries));
            auto tasks = load_tasks(train_tasks);
            const auto by_id = corpus_map(corpus);
            FusionParams start = train_init.empty() ? init_params(encoder_dim, fcfg)
                                                    : load_params(train_init);
            TrainResult result;
            if (train_stage == "rand") {
                result = train(build_rand_examples(queries, tasks, by_id), start, tcfg,
                               TrainStage::Rand);
            } else {
                if (train_mined.empty()) {
                    throw Error(ErrorCode::ConfigError, "--mined is required for this stage");
                }
                const MinedFile mined = load_mined(train_mined);
                auto examples = build_hard_examples(queries, tasks, by_id, mined.entries,
                                                    tcfg.seed);
                if (train_stage == "hard") {
                    result = train(examples, start, tcfg, TrainStage::Hard);
                } else {
                    auto [multimodal, text_to_text] = split_for_continual(examples, tasks);
                    result = train_continual(multimodal, text_to_text, start, tcfg);
                }
            }
            save_params(train_out, result.params);
            if (!train_trace.empty()) write_trace(train_trace, result.trace);
            std::cout << "trained " << result.trace.size() << " steps, final loss "
                      << (result.trace.empty() ? 0.0 : result.trace.back().loss) << "\n";
        } else if (*embed_cmd) {
            const FusionParams params = load_params(embed_params);
            const FeaturizerConfig embed_fcfg{params.text_dim, params.image_dim, 0};
            auto corpus = featurize_corpus(load_corpus(embed_corpus), embed_fcfg,
                                           parent_dir(embed_corpus));
            std::vector<Item> items;
            items.reserve(corpus.size());
            for (const auto& rec : corpus) items.push_back(rec.item);
            write_embeddings(embed_out, encode_corpus(items, params), params.dim);
        } else if (*index_cmd) {
            std::vector<EmbeddingRecord> all;
            std::uint32_t dim = 0;
            for (const std::string& path : index_in) {
                auto recs = read_embeddings(path);
                if (!recs.empty()) dim = static_cast<std::uint32_t>(recs.front().vector.size());
                all.insert(all.end(), std::make_move_iterator(recs.begin()),
                           std::make_move_iterator(recs.end()));
            }
            VectorIndex::build(all, "merged");  // duplicate/dim validation
            write_embeddings(index_out, all, dim);
            std::cout << "merged " << all.size() << " records\n";
        } else if (*mine_cmd) {
            const FusionParams params = load_params(mine_params);
            const FeaturizerConfig mine_fcfg{params.text_dim, params.image_dim, 0};
            auto queries = featurize_queries(load_queries(mine_queries), mine_fcfg,
                                             parent_dir(mine_queries));
            auto tasks = load_tasks(mine_tasks);
            const VectorIndex index = load_index(mine_emb, "global");
            std::map<std::string, TaskSpec> tmap;
            for (const auto& t : tasks) tmap[t.task_id] = t;
            const EncodeOptions opts{!mine_no_instruction};
            std::vector<MiningQuery> mqueries;
            MinedFile file;
            for (const QueryRecord& q : queries) {
                if (q.pos_ids.empty()) {
                    throw Error(ErrorCode::DataError,
                                "query '" + q.item.id + "' has no labeled positive");
                }
                const auto& task = tmap.at(q.task_id);
                MiningQuery mq;
                mq.qid = q.item.id;
                auto vec = encode_query(task.instruction, q.item, params, opts);
                mq.vector.assign(vec.begin(), vec.end());
                mq.desired_modality = task.desired_modality;
                mq.positive_id = q.pos_ids.front();
                mqueries.push_back(std::move(mq));
                file.positives[q.item.id] = q.pos_ids.front();
            }
            MiningStats stats;
            auto mined = mine_all(mqueries, index, mine_cfg, &stats);
            if (!mine_retain_c1.empty()) {
                const MinedFile prior = load_mined(mine_retain_c1);
                for (auto& [qid, entry] : mined) {
                    auto it = prior.entries.find(qid);
                    if (it == prior.entries.end()) {
                        throw Error(ErrorCode::QidMismatch,
                                    "qid '" + qid + "' missing from --retain-c1-from file");
                    }
                    entry.c1 = it->second.c1;
                    entry.c1_ranks = it->second.c1_ranks;
                }
            }
            for (auto& [qid, entry] : mined) {
                entry.positive_rank.reset();
                file.entries[qid] = entry;
            }
            write_mined(mine_out, file);
            char buf[160];
            std::snprintf(buf, sizeof(buf),
                          "mined %zu queries: mean|C1| %.3f mean|C2| %.3f positive-missing %.3f",
                          stats.query_count, stats.mean_c1, stats.mean_c2,
                          stats.frac_positive_outside);
            std::cout << buf << "\n";
            if (!mine_stats_out.empty()) {
                write_text_file(mine_stats_out, std::string(buf) + "\n");
            }
        } else if (*retrieve_cmd) {
            const FusionParams params = load_params(ret_params);
            const FeaturizerConfig ret_fcfg{params.text_dim, params.image_dim, 0};
            auto queries = featurize_queries(load_queries(ret_queries), ret_fcfg,
                                             parent_dir(ret_queries));
            auto tasks = load_tasks(ret_tasks);
            const VectorIndex index = load_index(ret_emb, "global");
            write_run(ret_out, retrieve_run(queries, tasks, params, index, ret_k,
                                            !ret_no_instruction, ret_tag));
        } else if (*rerank_cmd) {
            auto run = load_run(rr_run);
            auto corpus = load_corpus(rr_corpus);
            auto queries = load_queries(rr_queries);
            auto tasks = load_tasks(rr_tasks);
            const auto by_id = corpus_map(corpus);
            const auto modalities = modality_map(corpus);
            std::map<std::string, TaskSpec> tmap;
            for (const auto& t : tasks) tmap[t.task_id] = t;
            std::map<std::string, const QueryRecord*> query_by_id;
            for (const auto& q : queries) query_by_id[q.item.id] = &q;

            std::unique_ptr<Scorer> scorer;
            if (rr_cfg.scorer == "mock") {
                if (rr_qrels.empty()) {
                    throw Error(ErrorCode::ConfigError, "--qrels is required for the mock scorer");
                }
                scorer = std::make_unique<MockScorer>(load_qrels(rr_qrels));
            } else {
                scorer = std::make_unique<HttpScorer>(rr_cfg.scorer, rr_cfg.cache_path,
                                                      rr_cfg.retry_backoff_ms);
            }
            TemplateRegistry registry = TemplateRegistry::with_builtins();
            if (!rr_templates.empty()) {
                for (auto& tmpl : load_templates(rr_templates)) registry.add(std::move(tmpl));
            }
            std::map<std::string, std::vector<RunLine>> by_qid;
            for (const RunLine& line : run) by_qid[line.qid].push_back(line);
            std::vector<RunLine> out_lines;
            for (auto& [qid, lines] : by_qid) {
                std::sort(lines.begin(), lines.end(),
                          [](const RunLine& a, const RunLine& b) { return a.rank < b.rank; });
                std::vector<SearchHit> hits;
                for (const RunLine& line : lines) {
                    hits.push_back(SearchHit{line.doc_id, float(line.score), line.rank,
                                             modalities.at(line.doc_id)});
                }
                auto qit = query_by_id.find(qid);
                if (qit == query_by_id.end()) {
                    throw Error(ErrorCode::DataError, "run references unknown qid '" + qid + "'");
                }
                const TaskSpec& task = tmap.at(qit->second->task_id);
                auto reranked = rerank(qit->second->item, hits, registry, by_id, task.dataset_id,
                                       *scorer, rr_cfg);
                for (std::size_t i = 0; i < reranked.size(); ++i) {
                    out_lines.push_back(RunLine{qid, reranked[i].doc_id,
                                                static_cast<std::uint32_t>(i + 1),
                                                double(reranked[i].score), "rerank"});
                }
            }
            write_run(rr_out, out_lines);
        } else if (*eval_cmd) {
            auto run = load_run(ev_run);
            auto queries = load_queries(ev_queries);
            auto tasks = load_tasks(ev_tasks);
            auto qrels = load_qrels(ev_qrels);
            auto corpus = load_corpus(ev_corpus);
            const RunReport report =
                evaluate_run(run, queries, tasks, qrels, modality_map(corpus));
            if (!ev_csv.empty()) write_text_file(ev_csv, report_to_csv(report));
            std::cout << report_to_table(report);
        } else if (*grad_cmd) {
            bool ok = true;
            for (std::size_t trial = 0; trial < gc_trials; ++trial) {
                Rng rng(gc_seed + trial);
                const FeaturizerConfig gc_fcfg{gc_feat, gc_feat, gc_seed + trial};
                const FusionParams params = init_params(gc_dim, gc_fcfg);
                const GradBatch batch = random_instance(gc_dim, gc_feat, gc_batch, rng);
                TrainConfig gc_tcfg;
                gc_tcfg.tau = 0.1;
                const GradCheckReport report =
                    grad_check(params, batch, gc_tcfg, gc_coords, 1e-5, gc_seed + trial);
                const bool pass = report.max_rel_error < gc_tolerance;
                ok = ok && pass;
                std::cout << "trial " << trial << ": coords " << report.coords_checked
                          << " max_rel_error " << report.max_rel_error << " "
                          << (pass ? "ok" : "FAIL") << "\n";
            }
            return ok ? 0 : 3;
        } else if (*pipe_cmd) {
            PipelineConfig cfg;
            if (!pipe_config.empty()) apply_config(parse_config_file(pipe_config), cfg);
            for (const auto& [opt, key] : pipe_options) {
                if (opt->count() > 0) set_config_key(cfg, key, pipe_overrides[key]);
            }
            const PipelineResult result = run_pipeline(cfg);
            std::cout << read_text_file(result.artifacts.at("report"));
        }
        return 0;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
