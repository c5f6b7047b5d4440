#pragma once

#include <map>
#include <string>
#include <vector>

#include "umr/core.hpp"
#include "umr/io.hpp"

namespace umr {

/// Controls for the synthetic multimodal benchmark. Each cluster carries a
/// shared topic realized as a text document, an image document and an
/// image+text document with correlated features, plus queries of all eight
/// task shapes. modality_confound_strength sets how much query vocabulary the
/// wrong-modality twin shares, i.e. how strong the C1 bait is.
struct SynthSpec {
    std::size_t n_clusters = 40;
    std::size_t text_docs_per_cluster = 1;
    std::size_t image_docs_per_cluster = 1;
    std::size_t imagetext_docs_per_cluster = 1;
    std::size_t n_queries = 160;       // training queries
    std::size_t n_eval_queries = 80;   // held-out queries
    double modality_confound_strength = 0.9;
    std::uint64_t seed = 7;

    void validate() const {
        if (n_clusters < 1 || text_docs_per_cluster < 1 || image_docs_per_cluster < 1 ||
            imagetext_docs_per_cluster < 1 || n_queries < 1 || n_eval_queries < 1) {
            throw Error(ErrorCode::ConfigError, "synth counts must be >= 1");
        }
        if (modality_confound_strength < 0.0 || modality_confound_strength > 1.0) {
            throw Error(ErrorCode::ConfigError, "confound strength must be in [0,1]");
        }
    }
};

struct SynthOutput {
    std::vector<CorpusRecord> corpus;
    std::vector<QueryRecord> train_queries;
    std::vector<QueryRecord> eval_queries;
    std::vector<TaskSpec> tasks;
    Qrels train_qrels;
    Qrels eval_qrels;
    /// relative path -> raw bytes for every generated image
    std::map<std::string, std::vector<std::uint8_t>> image_files;
};

SynthOutput generate_synth(const SynthSpec& spec);

/// Writes corpus.jsonl, train_queries.jsonl, eval_queries.jsonl, tasks.jsonl,
/// train_qrels.trec, eval_qrels.trec and images/ under out_dir.
void write_synth(const std::string& out_dir, const SynthOutput& output);

}  // namespace umr
