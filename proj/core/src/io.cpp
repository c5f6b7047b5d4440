#include "umr/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace umr {

using nlohmann::json;

namespace {

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::FileNotFound, "'" + path + "'");
    return in;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::DataError, "cannot open '" + path + "' for writing");
    return out;
}

json parse_line(const std::string& line, const std::string& path, std::size_t line_no) {
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object()) {
        throw Error(ErrorCode::DataError,
                    path + ":" + std::to_string(line_no) + ": invalid record");
    }
    return rec;
}

std::string fmt_score(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::string fmt_loss(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

Item item_from_json(const json& rec, const std::string& id_field, const std::string& path,
                    std::size_t line_no) {
    Item item;
    if (!rec.contains(id_field) || !rec[id_field].is_string()) {
        throw Error(ErrorCode::DataError,
                    path + ":" + std::to_string(line_no) + ": missing " + id_field);
    }
    item.id = rec[id_field].get<std::string>();
    if (rec.contains("txt") && !rec["txt"].is_null()) {
        item.text = rec["txt"].get<std::string>();
    }
    if (rec.contains("img_feat") && !rec["img_feat"].is_null()) {
        item.image_feat = rec["img_feat"].get<std::vector<double>>();
    }
    if (rec.contains("img_ref") && !rec["img_ref"].is_null()) {
        item.image_ref = rec["img_ref"].get<std::string>();
    }
    return item;
}

void item_to_json(const Item& item, json& rec, const std::string& id_field) {
    rec[id_field] = item.id;
    if (item.text) rec["txt"] = *item.text;
    if (item.image_feat) rec["img_feat"] = *item.image_feat;
    if (item.image_ref) rec["img_ref"] = *item.image_ref;
}

Modality infer_modality(const Item& item) {
    const bool has_text = item.text.has_value();
    const bool has_image = item.image_feat.has_value() || item.image_ref.has_value();
    if (has_text && has_image) return Modality::ImageText;
    if (has_image) return Modality::Image;
    return Modality::Text;
}

}  // namespace

std::vector<CorpusRecord> load_corpus(const std::string& path) {
    auto in = open_in(path);
    std::vector<CorpusRecord> records;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json rec = parse_line(line, path, line_no);
        CorpusRecord out;
        Item item = item_from_json(rec, "id", path, line_no);
        if (!rec.contains("modality")) {
            throw Error(ErrorCode::DataError,
                        path + ":" + std::to_string(line_no) + ": missing modality");
        }
        item.modality = modality_from_string(rec["modality"].get<std::string>());
        out.item = validate_item(std::move(item));
        if (rec.contains("dataset_id")) out.dataset_id = rec["dataset_id"].get<std::string>();
        if (!seen.insert(out.item.id).second) {
            throw Error(ErrorCode::DuplicateId,
                        path + ":" + std::to_string(line_no) + ": duplicate id '" +
                            out.item.id + "'");
        }
        records.push_back(std::move(out));
    }
    return records;
}

void write_corpus(const std::string& path, const std::vector<CorpusRecord>& records) {
    auto out = open_out(path);
    for (const CorpusRecord& rec : records) {
        json j;
        item_to_json(rec.item, j, "id");
        j["modality"] = to_string(rec.item.modality);
        if (!rec.dataset_id.empty()) j["dataset_id"] = rec.dataset_id;
        out << j.dump() << "\n";
    }
}

std::vector<QueryRecord> load_queries(const std::string& path) {
    auto in = open_in(path);
    std::vector<QueryRecord> records;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json rec = parse_line(line, path, line_no);
        QueryRecord out;
        Item item = item_from_json(rec, "qid", path, line_no);
        item.modality = infer_modality(item);
        out.item = validate_item(std::move(item));
        if (!rec.contains("task_id")) {
            throw Error(ErrorCode::DataError,
                        path + ":" + std::to_string(line_no) + ": missing task_id");
        }
        out.task_id = rec["task_id"].get<std::string>();
        if (rec.contains("pos_ids")) {
            out.pos_ids = rec["pos_ids"].get<std::vector<std::string>>();
        }
        if (!seen.insert(out.item.id).second) {
            throw Error(ErrorCode::DuplicateId,
                        path + ":" + std::to_string(line_no) + ": duplicate qid '" +
                            out.item.id + "'");
        }
        records.push_back(std::move(out));
    }
    return records;
}

void write_queries(const std::string& path, const std::vector<QueryRecord>& records) {
    auto out = open_out(path);
    for (const QueryRecord& rec : records) {
        json j;
        item_to_json(rec.item, j, "qid");
        j["task_id"] = rec.task_id;
        if (!rec.pos_ids.empty()) j["pos_ids"] = rec.pos_ids;
        out << j.dump() << "\n";
    }
}

std::vector<TaskSpec> load_tasks(const std::string& path) {
    auto in = open_in(path);
    std::vector<TaskSpec> tasks;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json rec = parse_line(line, path, line_no);
        TaskSpec task;
        try {
            task.task_id = rec.at("task_id").get<std::string>();
            task.dataset_id = rec.at("dataset_id").get<std::string>();
            task.instruction = rec.at("instruction").get<std::string>();
            task.desired_modality = modality_from_string(rec.at("desired_modality"));
            task.metric = metric_from_string(rec.at("metric"));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::DataError,
                        path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        if (task.instruction.empty()) {
            throw Error(ErrorCode::DataError, path + ":" + std::to_string(line_no) +
                                                  ": empty instruction for task '" +
                                                  task.task_id + "'");
        }
        if (!seen.insert(task.task_id).second) {
            throw Error(ErrorCode::DuplicateId, path + ":" + std::to_string(line_no) +
                                                    ": duplicate task_id '" + task.task_id + "'");
        }
        tasks.push_back(std::move(task));
    }
    return tasks;
}

void write_tasks(const std::string& path, const std::vector<TaskSpec>& tasks) {
    auto out = open_out(path);
    for (const TaskSpec& task : tasks) {
        json j;
        j["task_id"] = task.task_id;
        j["dataset_id"] = task.dataset_id;
        j["instruction"] = task.instruction;
        j["desired_modality"] = to_string(task.desired_modality);
        j["metric"] = to_string(task.metric);
        out << j.dump() << "\n";
    }
}

Qrels load_qrels(const std::string& path) {
    auto in = open_in(path);
    Qrels qrels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string qid, zero, doc_id;
        long grade = 0;
        if (!(fields >> qid >> zero >> doc_id >> grade)) {
            throw Error(ErrorCode::DataError,
                        path + ":" + std::to_string(line_no) + ": bad qrels line");
        }
        qrels.grades[qid][doc_id] = static_cast<int>(grade);
    }
    qrels.validate();
    return qrels;
}

void write_qrels(const std::string& path, const Qrels& qrels) {
    auto out = open_out(path);
    for (const auto& [qid, docs] : qrels.grades) {
        for (const auto& [doc_id, grade] : docs) {
            out << qid << " 0 " << doc_id << " " << grade << "\n";
        }
    }
}

std::vector<RunLine> load_run(const std::string& path) {
    auto in = open_in(path);
    std::vector<RunLine> lines;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream fields(line);
        RunLine rl;
        std::string q0;
        if (!(fields >> rl.qid >> q0 >> rl.doc_id >> rl.rank >> rl.score >> rl.tag)) {
            throw Error(ErrorCode::DataError,
                        path + ":" + std::to_string(line_no) + ": bad run line");
        }
        lines.push_back(std::move(rl));
    }
    return lines;
}

void write_run(const std::string& path, const std::vector<RunLine>& lines) {
    auto out = open_out(path);
    for (const RunLine& rl : lines) {
        out << rl.qid << " Q0 " << rl.doc_id << " " << rl.rank << " " << fmt_score(rl.score)
            << " " << rl.tag << "\n";
    }
}

void write_mined(const std::string& path, const MinedFile& mined) {
    auto out = open_out(path);
    for (const auto& [qid, entry] : mined.entries) {
        auto pos_it = mined.positives.find(qid);
        if (pos_it == mined.positives.end()) {
            throw Error(ErrorCode::DataError, "no positive recorded for qid '" + qid + "'");
        }
        auto emit = [&](const std::vector<std::string>& ids,
                        const std::vector<std::uint32_t>& ranks, NegativeClass cls) {
            for (std::size_t i = 0; i < ids.size(); ++i) {
                json j;
                j["qid"] = qid;
                j["positive_id"] = pos_it->second;
                j["negative_id"] = ids[i];
                j["negative_class"] = to_string(cls);
                j["rank_of_negative"] = i < ranks.size() ? ranks[i] : 0;
                out << j.dump() << "\n";
            }
        };
        emit(entry.c1, entry.c1_ranks, NegativeClass::C1);
        emit(entry.c2, entry.c2_ranks, NegativeClass::C2);
    }
}

MinedFile load_mined(const std::string& path) {
    auto in = open_in(path);
    MinedFile mined;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json rec = parse_line(line, path, line_no);
        const std::string qid = rec.at("qid").get<std::string>();
        const std::string pos = rec.at("positive_id").get<std::string>();
        auto [pos_it, inserted] = mined.positives.try_emplace(qid, pos);
        if (!inserted && pos_it->second != pos) {
            throw Error(ErrorCode::DataError, path + ":" + std::to_string(line_no) +
                                                  ": conflicting positive for qid '" + qid + "'");
        }
        MinedNegatives& entry = mined.entries[qid];
        entry.qid = qid;
        const NegativeClass cls = negative_class_from_string(rec.at("negative_class"));
        const auto rank = rec.at("rank_of_negative").get<std::uint32_t>();
        if (cls == NegativeClass::C1) {
            entry.c1.push_back(rec.at("negative_id").get<std::string>());
            entry.c1_ranks.push_back(rank);
        } else {
            entry.c2.push_back(rec.at("negative_id").get<std::string>());
            entry.c2_ranks.push_back(rank);
        }
    }
    return mined;
}

void write_trace(const std::string& path, const std::vector<TraceEntry>& trace) {
    auto out = open_out(path);
    out << "step,loss,stage\n";
    for (const TraceEntry& entry : trace) {
        out << entry.step << "," << fmt_loss(entry.loss) << "," << to_string(entry.stage) << "\n";
    }
}

std::vector<TraceEntry> load_trace(const std::string& path) {
    auto in = open_in(path);
    std::vector<TraceEntry> trace;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (first) {
            first = false;  // header
            continue;
        }
        if (line.empty()) continue;
        TraceEntry entry;
        const std::size_t c1 = line.find(',');
        const std::size_t c2 = line.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos) {
            throw Error(ErrorCode::DataError, "bad trace line in '" + path + "'");
        }
        entry.step = std::stoull(line.substr(0, c1));
        entry.loss = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
        const std::string stage = line.substr(c2 + 1);
        if (stage == "rand") {
            entry.stage = TrainStage::Rand;
        } else if (stage == "hard") {
            entry.stage = TrainStage::Hard;
        } else if (stage == "continual") {
            entry.stage = TrainStage::Continual;
        } else {
            throw Error(ErrorCode::DataError, "unknown stage '" + stage + "' in '" + path + "'");
        }
        trace.push_back(entry);
    }
    return trace;
}

std::vector<PromptTemplate> load_templates(const std::string& path) {
    auto in = open_in(path);
    std::vector<PromptTemplate> templates;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json rec = parse_line(line, path, line_no);
        PromptTemplate tmpl;
        try {
            tmpl.template_id = rec.at("template_id").get<std::string>();
            tmpl.query_modality = modality_from_string(rec.at("query_modality"));
            tmpl.candidate_modality = modality_from_string(rec.at("candidate_modality"));
            if (rec.contains("dataset_id") && !rec["dataset_id"].is_null()) {
                tmpl.dataset_id = rec["dataset_id"].get<std::string>();
            }
            tmpl.body = rec.at("body").get<std::string>();
        } catch (const json::exception& e) {
            throw Error(ErrorCode::DataError,
                        path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        tmpl.validate();
        templates.push_back(std::move(tmpl));
    }
    return templates;
}

void write_text_file(const std::string& path, const std::string& content) {
    auto out = open_out(path);
    out << content;
    if (!out) throw Error(ErrorCode::DataError, "write failed for '" + path + "'");
}

std::string read_text_file(const std::string& path) {
    auto in = open_in(path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace umr
