#include "umr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

namespace umr {

const char* to_string(QueryGroup g) {
    return g == QueryGroup::SingleModal ? "Single-modal Qry" : "Multi-modal Qry";
}

double recall_at_k(const std::vector<std::string>& ranked,
                   const std::set<std::string>& relevant, std::size_t k) {
    if (k < 1) throw Error(ErrorCode::DataError, "k must be >= 1");
    if (relevant.empty()) throw Error(ErrorCode::EmptyRelevant, "recall with empty relevant set");
    const std::size_t upto = std::min(k, ranked.size());
    for (std::size_t i = 0; i < upto; ++i) {
        if (relevant.count(ranked[i])) return 1.0;
    }
    return 0.0;
}

double ndcg_at_k(const std::vector<std::string>& ranked,
                 const std::map<std::string, int>& grades, std::size_t k) {
    std::vector<int> positive_grades;
    for (const auto& [doc, g] : grades) {
        if (g > 0) positive_grades.push_back(g);
    }
    if (positive_grades.empty()) {
        throw Error(ErrorCode::EmptyRelevant, "ndcg with no positive grades");
    }
    double dcg = 0.0;
    const std::size_t upto = std::min(k, ranked.size());
    for (std::size_t i = 0; i < upto; ++i) {
        auto it = grades.find(ranked[i]);
        if (it != grades.end() && it->second > 0) {
            dcg += (std::pow(2.0, it->second) - 1.0) / std::log2(double(i) + 2.0);
        }
    }
    std::sort(positive_grades.begin(), positive_grades.end(), std::greater<int>());
    double idcg = 0.0;
    for (std::size_t i = 0; i < std::min(k, positive_grades.size()); ++i) {
        idcg += (std::pow(2.0, positive_grades[i]) - 1.0) / std::log2(double(i) + 2.0);
    }
    return dcg / idcg;
}

double average_precision_at_k(const std::vector<std::string>& ranked,
                              const std::set<std::string>& relevant, std::size_t k) {
    if (relevant.empty()) throw Error(ErrorCode::EmptyRelevant, "AP with empty relevant set");
    double sum = 0.0;
    std::size_t hits = 0;
    const std::size_t upto = std::min(k, ranked.size());
    for (std::size_t i = 0; i < upto; ++i) {
        if (relevant.count(ranked[i])) {
            ++hits;
            sum += double(hits) / double(i + 1);
        }
    }
    return sum / double(std::min(k, relevant.size()));
}

double modality_accuracy_at_1(Modality top1, Modality desired) {
    return top1 == desired ? 1.0 : 0.0;
}

RunReport macro_average(std::vector<ReportRow> rows,
                        const std::map<std::string, QueryGroup>& task_groups) {
    std::sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
        if (a.dataset_id != b.dataset_id) return a.dataset_id < b.dataset_id;
        return a.task_id < b.task_id;
    });
    if (rows.empty()) throw Error(ErrorCode::EmptyGroup, "no rows to average");

    auto mean_over = [](const std::vector<const ReportRow*>& group,
                        const std::string& label) -> std::map<std::string, double> {
        if (group.empty()) throw Error(ErrorCode::EmptyGroup, "group '" + label + "' is empty");
        // metric -> (sum, count); a metric averages over the rows that carry it
        std::map<std::string, std::pair<double, std::size_t>> acc;
        for (const ReportRow* row : group) {
            for (const auto& [metric, value] : row->values) {
                auto& [sum, count] = acc[metric];
                sum += value;
                ++count;
            }
        }
        std::map<std::string, double> out;
        for (const auto& [metric, sc] : acc) out[metric] = sc.first / double(sc.second);
        return out;
    };

    RunReport report;
    std::vector<const ReportRow*> all;
    std::map<QueryGroup, std::vector<const ReportRow*>> by_group;
    bool any_grouped = false;
    for (const ReportRow& row : rows) {
        all.push_back(&row);
        auto it = task_groups.find(row.task_id);
        if (it != task_groups.end()) {
            by_group[it->second].push_back(&row);
            any_grouped = true;
        }
    }
    report.macro["All"] = mean_over(all, "All");
    if (any_grouped) {
        for (QueryGroup g : {QueryGroup::SingleModal, QueryGroup::MultiModal}) {
            bool declared = std::any_of(task_groups.begin(), task_groups.end(),
                                        [g](const auto& kv) { return kv.second == g; });
            if (declared) {
                report.macro[to_string(g)] = mean_over(by_group[g], to_string(g));
            }
        }
    }
    report.rows = std::move(rows);
    for (const ReportRow& row : report.rows) {
        for (const auto& [metric, value] : row.values) {
            if (value < -1e-12 || value > 1.0 + 1e-12) {
                throw Error(ErrorCode::DataError,
                            "metric '" + metric + "' out of [0,1] in " + row.dataset_id);
            }
        }
    }
    return report;
}

namespace {

std::string format_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

std::string report_to_csv(const RunReport& report) {
    std::ostringstream out;
    out << "dataset_id,task_id,metric,value\n";
    for (const ReportRow& row : report.rows) {
        for (const auto& [metric, value] : row.values) {
            out << row.dataset_id << "," << row.task_id << "," << metric << ","
                << format_value(value) << "\n";
        }
    }
    for (const auto& [group, metrics] : report.macro) {
        for (const auto& [metric, value] : metrics) {
            out << group << ",," << metric << "," << format_value(value) << "\n";
        }
    }
    return out.str();
}

std::string report_to_table(const RunReport& report) {
    std::set<std::string> metric_names;
    for (const ReportRow& row : report.rows) {
        for (const auto& [metric, value] : row.values) metric_names.insert(metric);
    }
    std::ostringstream out;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-16s %-8s %8s", "dataset", "task", "queries");
    out << buf;
    for (const auto& m : metric_names) {
        std::snprintf(buf, sizeof(buf), " %12s", m.c_str());
        out << buf;
    }
    out << "\n";
    for (const ReportRow& row : report.rows) {
        std::snprintf(buf, sizeof(buf), "%-16s %-8s %8zu", row.dataset_id.c_str(),
                      row.task_id.c_str(), row.query_count);
        out << buf;
        for (const auto& m : metric_names) {
            auto it = row.values.find(m);
            if (it != row.values.end()) {
                std::snprintf(buf, sizeof(buf), " %12.4f", it->second);
            } else {
                std::snprintf(buf, sizeof(buf), " %12s", "-");
            }
            out << buf;
        }
        out << "\n";
    }
    for (const auto& [group, metrics] : report.macro) {
        std::snprintf(buf, sizeof(buf), "%-16s %-8s %8s", group.c_str(), "", "");
        out << buf;
        for (const auto& m : metric_names) {
            auto it = metrics.find(m);
            if (it != metrics.end()) {
                std::snprintf(buf, sizeof(buf), " %12.4f", it->second);
            } else {
                std::snprintf(buf, sizeof(buf), " %12s", "-");
            }
            out << buf;
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace umr
