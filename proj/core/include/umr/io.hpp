#pragma once

#include <map>
#include <string>
#include <vector>

#include "umr/core.hpp"
#include "umr/miner.hpp"
#include "umr/reranker.hpp"
#include "umr/trainer.hpp"

namespace umr {

/// Corpus records carry an optional dataset_id used by per-dataset pools.
struct CorpusRecord {
    Item item;
    std::string dataset_id;  // empty when untagged

    bool operator==(const CorpusRecord&) const = default;
};

/// One object per line, UTF-8. Ids must be unique within the file.
std::vector<CorpusRecord> load_corpus(const std::string& path);
void write_corpus(const std::string& path, const std::vector<CorpusRecord>& records);

/// Query modality is inferred from which of txt / img_feat / img_ref are set.
std::vector<QueryRecord> load_queries(const std::string& path);
void write_queries(const std::string& path, const std::vector<QueryRecord>& records);

std::vector<TaskSpec> load_tasks(const std::string& path);
void write_tasks(const std::string& path, const std::vector<TaskSpec>& tasks);

/// TREC qrels: "qid 0 doc_id grade", whitespace-separated.
Qrels load_qrels(const std::string& path);
void write_qrels(const std::string& path, const Qrels& qrels);

/// TREC run line: "qid Q0 doc_id rank score run_tag".
struct RunLine {
    std::string qid;
    std::string doc_id;
    std::uint32_t rank = 0;
    double score = 0.0;
    std::string tag;

    bool operator==(const RunLine&) const = default;
};

std::vector<RunLine> load_run(const std::string& path);
void write_run(const std::string& path, const std::vector<RunLine>& lines);

/// Mined negatives, one line per (qid, negative): qid, positive_id,
/// negative_id, negative_class, rank_of_negative. C1/C2 membership and order
/// round-trip exactly.
struct MinedFile {
    /// qid -> mined sets, plus the positive id used during mining.
    std::map<std::string, MinedNegatives> entries;
    std::map<std::string, std::string> positives;

    bool operator==(const MinedFile&) const = default;
};

void write_mined(const std::string& path, const MinedFile& mined);
MinedFile load_mined(const std::string& path);

/// Loss trace CSV: step,loss,stage.
void write_trace(const std::string& path, const std::vector<TraceEntry>& trace);
std::vector<TraceEntry> load_trace(const std::string& path);

/// Prompt templates, one object per line: template_id, query_modality,
/// candidate_modality, optional dataset_id, body.
std::vector<PromptTemplate> load_templates(const std::string& path);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace umr
