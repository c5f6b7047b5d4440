#include "umr/core.hpp"

#include <algorithm>
#include <cctype>

namespace umr {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::ModalityMismatch: return "ModalityMismatch";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::EmptyText: return "EmptyText";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::DimMismatch: return "DimMismatch";
        case ErrorCode::FileNotFound: return "FileNotFound";
        case ErrorCode::ZeroVector: return "ZeroVector";
        case ErrorCode::NonFinite: return "NonFinite";
        case ErrorCode::BatchInfeasible: return "BatchInfeasible";
        case ErrorCode::EmptySource: return "EmptySource";
        case ErrorCode::IndexEmpty: return "IndexEmpty";
        case ErrorCode::QidMismatch: return "QidMismatch";
        case ErrorCode::TemplateMismatch: return "TemplateMismatch";
        case ErrorCode::MissingField: return "MissingField";
        case ErrorCode::ScorerUnavailable: return "ScorerUnavailable";
        case ErrorCode::EmptyRelevant: return "EmptyRelevant";
        case ErrorCode::EmptyGroup: return "EmptyGroup";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::DataError: return "DataError";
    }
    return "UnknownError";
}

const char* to_string(Modality m) {
    switch (m) {
        case Modality::Text: return "text";
        case Modality::Image: return "image";
        case Modality::ImageText: return "image,text";
    }
    throw Error(ErrorCode::DataError, "invalid modality value");
}

Modality modality_from_string(const std::string& s) {
    if (s == "text") return Modality::Text;
    if (s == "image") return Modality::Image;
    if (s == "image,text") return Modality::ImageText;
    throw Error(ErrorCode::DataError, "unknown modality string '" + s + "'");
}

const char* to_string(MetricKind m) {
    switch (m) {
        case MetricKind::RecallAt5: return "recall@5";
        case MetricKind::RecallAt10: return "recall@10";
        case MetricKind::NDCGAt10: return "ndcg@10";
        case MetricKind::MAPAt5: return "map@5";
    }
    throw Error(ErrorCode::DataError, "invalid metric value");
}

MetricKind metric_from_string(const std::string& s) {
    if (s == "recall@5") return MetricKind::RecallAt5;
    if (s == "recall@10") return MetricKind::RecallAt10;
    if (s == "ndcg@10") return MetricKind::NDCGAt10;
    if (s == "map@5") return MetricKind::MAPAt5;
    throw Error(ErrorCode::DataError, "unknown metric string '" + s + "'");
}

const char* to_string(NegativeClass c) {
    return c == NegativeClass::C1 ? "C1" : "C2";
}

NegativeClass negative_class_from_string(const std::string& s) {
    if (s == "C1") return NegativeClass::C1;
    if (s == "C2") return NegativeClass::C2;
    throw Error(ErrorCode::DataError, "unknown negative class '" + s + "'");
}

bool Qrels::relevant(const std::string& qid, const std::string& doc_id) const {
    auto it = grades.find(qid);
    if (it == grades.end()) return false;
    auto jt = it->second.find(doc_id);
    return jt != it->second.end() && jt->second > 0;
}

const std::map<std::string, int>* Qrels::for_query(const std::string& qid) const {
    auto it = grades.find(qid);
    return it == grades.end() ? nullptr : &it->second;
}

void Qrels::validate(const std::set<std::string>* candidate_pool) const {
    for (const auto& [qid, docs] : grades) {
        bool any_positive = false;
        for (const auto& [doc_id, grade] : docs) {
            if (grade < 0) {
                throw Error(ErrorCode::DataError,
                            "negative grade for qid '" + qid + "' doc '" + doc_id + "'");
            }
            if (grade > 0) any_positive = true;
            if (candidate_pool && !candidate_pool->count(doc_id)) {
                throw Error(ErrorCode::DataError,
                            "qrels doc '" + doc_id + "' not in candidate pool");
            }
        }
        if (!any_positive) {
            throw Error(ErrorCode::DataError, "qid '" + qid + "' has no positive grade");
        }
    }
}

std::string canonicalize_whitespace(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    bool in_ws = true;  // leading whitespace dropped
    for (unsigned char c : s) {
        if (std::isspace(c)) {
            in_ws = true;
        } else {
            if (in_ws && !out.empty()) out.push_back(' ');
            out.push_back(static_cast<char>(c));
            in_ws = false;
        }
    }
    return out;
}

Item validate_item(Item raw) {
    if (raw.id.empty()) {
        throw Error(ErrorCode::DataError, "item with empty id");
    }
    if (raw.text) {
        std::string canon = canonicalize_whitespace(*raw.text);
        if (canon.empty()) {
            raw.text.reset();  // whitespace-only text counts as absent
        } else {
            raw.text = std::move(canon);
        }
    }
    if (raw.image_feat && raw.image_ref) {
        throw Error(ErrorCode::ModalityMismatch,
                    "item '" + raw.id + "' has both img_feat and img_ref");
    }

    const bool has_text = raw.has_text();
    const bool has_image = raw.has_image();
    switch (raw.modality) {
        case Modality::Text:
            if (!has_text || has_image) {
                throw Error(ErrorCode::ModalityMismatch,
                            "item '" + raw.id + "' tagged text must have text and no image");
            }
            break;
        case Modality::Image:
            if (has_text || !has_image) {
                throw Error(ErrorCode::ModalityMismatch,
                            "item '" + raw.id + "' tagged image must have image and no text");
            }
            break;
        case Modality::ImageText:
            if (!has_text || !has_image) {
                throw Error(ErrorCode::ModalityMismatch,
                            "item '" + raw.id + "' tagged image,text must have both parts");
            }
            break;
    }
    return raw;
}

}  // namespace umr
