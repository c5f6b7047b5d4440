#pragma once

#include <map>
#include <string>
#include <vector>

#include "umr/config.hpp"
#include "umr/core.hpp"
#include "umr/fusion_encoder.hpp"
#include "umr/index.hpp"
#include "umr/io.hpp"
#include "umr/metrics.hpp"
#include "umr/miner.hpp"
#include "umr/trainer.hpp"

namespace umr {

/// Populates image features for every record, resolving relative image_ref
/// paths against base_dir.
std::vector<CorpusRecord> featurize_corpus(std::vector<CorpusRecord> records,
                                           const FeaturizerConfig& cfg,
                                           const std::string& base_dir);
std::vector<QueryRecord> featurize_queries(std::vector<QueryRecord> records,
                                           const FeaturizerConfig& cfg,
                                           const std::string& base_dir);

/// In-batch-negative training records: one per query, positive = pos_ids[0].
std::vector<TrainExample> build_rand_examples(const std::vector<QueryRecord>& queries,
                                              const std::vector<TaskSpec>& tasks,
                                              const std::map<std::string, Item>& corpus_by_id);

/// Hard-negative records: negatives drawn from the mined C1/C2 sets with the
/// equal-probability rule; queries whose sets are both empty keep training
/// with in-batch negatives only.
std::vector<TrainExample> build_hard_examples(const std::vector<QueryRecord>& queries,
                                              const std::vector<TaskSpec>& tasks,
                                              const std::map<std::string, Item>& corpus_by_id,
                                              const std::map<std::string, MinedNegatives>& mined,
                                              std::uint64_t seed);

/// Splits examples into (multimodal, text-to-text) for mixed continual
/// sampling; text-to-text means a text query whose task wants text back.
std::pair<std::vector<TrainExample>, std::vector<TrainExample>> split_for_continual(
    const std::vector<TrainExample>& examples, const std::vector<TaskSpec>& tasks);

/// Encodes queries and searches the pool; one TREC run.
std::vector<RunLine> retrieve_run(const std::vector<QueryRecord>& queries,
                                  const std::vector<TaskSpec>& tasks,
                                  const FusionParams& params, const VectorIndex& index,
                                  std::size_t k, bool include_instruction,
                                  const std::string& tag);

/// Pure re-evaluation of a persisted ranking: per-task rows with the task's
/// chosen metric plus recall@5 and modality accuracy, macro rows per query
/// group.
RunReport evaluate_run(const std::vector<RunLine>& run, const std::vector<QueryRecord>& queries,
                       const std::vector<TaskSpec>& tasks, const Qrels& qrels,
                       const std::map<std::string, Modality>& doc_modalities);

struct PipelineResult {
    RunReport report_rand;
    RunReport report_hard;
    RunReport report_continual;
    RunReport report_reranked;  // empty rows when reranking disabled
    MiningStats mining_stats_rand;
    std::map<std::string, std::string> artifacts;  // name -> path under workdir
};

/// The full train / mine / retrain / continual / retrieve / rerank / eval
/// pipeline; every intermediate is persisted under cfg.workdir with
/// stage-tagged filenames, and the whole run is deterministic given the
/// config and seeds.
PipelineResult run_pipeline(const PipelineConfig& cfg);

}  // namespace umr
