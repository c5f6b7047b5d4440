#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "umr/core.hpp"

namespace umr {

/// Tasks 1-5 of the benchmark carry single-modality queries, 6-8 carry
/// interleaved image-text queries; macro rows are reported per group.
enum class QueryGroup {
    SingleModal,
    MultiModal,
};

const char* to_string(QueryGroup g);

/// Per-(dataset, task) metric means over that task's evaluated queries.
struct ReportRow {
    std::string dataset_id;
    std::string task_id;
    std::map<std::string, double> values;
    std::size_t query_count = 0;

    bool operator==(const ReportRow&) const = default;
};

struct RunReport {
    std::vector<ReportRow> rows;
    /// group label ("All", "Single-modal Qry", "Multi-modal Qry") -> metric -> mean
    std::map<std::string, std::map<std::string, double>> macro;

    bool operator==(const RunReport&) const = default;
};

/// 1.0 when any relevant doc appears in the first k ranks, else 0.0.
/// Averaging over queries is the caller's job.
double recall_at_k(const std::vector<std::string>& ranked,
                   const std::set<std::string>& relevant, std::size_t k);

/// DCG with 2^grade - 1 gains over the first k ranks, normalized by the
/// ideal DCG of the sorted grades.
double ndcg_at_k(const std::vector<std::string>& ranked,
                 const std::map<std::string, int>& grades, std::size_t k = 10);

/// AP@k = (1/min(k,|relevant|)) * sum of precision@i over relevant hits i <= k.
double average_precision_at_k(const std::vector<std::string>& ranked,
                              const std::set<std::string>& relevant, std::size_t k = 5);

/// 1.0 iff the top-1 candidate has exactly the desired modality.
double modality_accuracy_at_1(Modality top1, Modality desired);

/// Dataset-level means first, then an unweighted mean across rows per group.
/// Every group named in the map must have at least one constituent row.
RunReport macro_average(std::vector<ReportRow> rows,
                        const std::map<std::string, QueryGroup>& task_groups);

/// CSV rows "dataset_id,task_id,metric,value" with macro rows appended.
std::string report_to_csv(const RunReport& report);

/// Fixed-width human-readable table.
std::string report_to_table(const RunReport& report);

}  // namespace umr
