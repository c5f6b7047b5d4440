#pragma once

#include <map>
#include <string>
#include <vector>

#include "umr/core.hpp"
#include "umr/featurizer.hpp"
#include "umr/miner.hpp"
#include "umr/reranker.hpp"
#include "umr/trainer.hpp"

namespace umr {

enum class PoolMode {
    Global,
    PerDataset,
};

/// Everything the pipeline needs, settable from a flat key-value config file
/// and overridable by CLI flags of the same dotted names.
struct PipelineConfig {
    std::string corpus_path;
    std::string train_queries_path;
    std::string eval_queries_path;
    std::string tasks_path;
    std::string qrels_path;
    std::string workdir;

    FeaturizerConfig featurizer;
    std::uint32_t embed_dim = 64;
    bool include_instruction = true;

    TrainConfig stage_rand{0.05, 32, 1e-3, 30, 1, true};
    TrainConfig stage_hard{0.05, 32, 1e-3, 30, 2, true};
    TrainConfig stage_continual{0.05, 32, 1e-3, 10, 3, true};

    MinerConfig miner;
    RerankConfig rerank;
    bool rerank_enabled = true;

    PoolMode pool_mode = PoolMode::Global;
    std::size_t retrieve_k = 50;
    std::string run_tag = "umr";

    void validate() const;
};

/// "key = value" lines, '#' comments, blank lines ignored.
std::map<std::string, std::string> parse_config_file(const std::string& path);

/// Applies key-value pairs onto the config; unknown keys are ConfigError.
void apply_config(const std::map<std::string, std::string>& kv, PipelineConfig& cfg);

/// Sets a single dotted key; shared by file application and CLI overrides.
void set_config_key(PipelineConfig& cfg, const std::string& key, const std::string& value);

/// Every recognized dotted key, for CLI flag registration.
std::vector<std::string> config_key_names();

}  // namespace umr
