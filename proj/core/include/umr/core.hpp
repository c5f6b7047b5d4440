#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace umr {

/// Everything that can go wrong in the library, as a closed set so callers
/// (and the CLI exit-code mapping) can dispatch on it.
enum class ErrorCode {
    ModalityMismatch,
    DuplicateId,
    EmptyText,
    EmptyInput,
    DimMismatch,
    FileNotFound,
    ZeroVector,
    NonFinite,
    BatchInfeasible,
    EmptySource,
    IndexEmpty,
    QidMismatch,
    TemplateMismatch,
    MissingField,
    ScorerUnavailable,
    EmptyRelevant,
    EmptyGroup,
    ConfigError,
    DataError,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& msg)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + msg), code_(code) {}

    ErrorCode code() const { return code_; }

  private:
    ErrorCode code_;
};

/// Modality of a query or candidate. Total order Text < Image < ImageText
/// fixes serialization and tie-breaking.
enum class Modality : std::uint8_t {
    Text = 0,
    Image = 1,
    ImageText = 2,
};

const char* to_string(Modality m);
Modality modality_from_string(const std::string& s);

/// A query or candidate. Field presence is tied to the modality tag:
/// Text => text only, Image => image only, ImageText => both.
/// Before featurization the image side is at most one of image_feat /
/// image_ref; after featurization it is exactly image_feat.
struct Item {
    std::string id;
    Modality modality = Modality::Text;
    std::optional<std::string> text;
    std::optional<std::vector<double>> image_feat;
    std::optional<std::string> image_ref;

    bool has_text() const { return text.has_value(); }
    bool has_image() const { return image_feat.has_value() || image_ref.has_value(); }

    bool operator==(const Item& other) const = default;
};

enum class MetricKind {
    RecallAt5,
    RecallAt10,
    NDCGAt10,
    MAPAt5,
};

const char* to_string(MetricKind m);
MetricKind metric_from_string(const std::string& s);

/// One retrieval task: the instruction given to the encoder, the modality the
/// candidate side must have, and the metric the dataset is scored with.
struct TaskSpec {
    std::string task_id;
    std::string dataset_id;
    std::string instruction;
    Modality desired_modality = Modality::Text;
    MetricKind metric = MetricKind::RecallAt5;

    bool operator==(const TaskSpec&) const = default;
};

/// A query-side ingestion record: the query item plus its task binding and
/// labeled positives.
struct QueryRecord {
    Item item;  // item.id is the qid
    std::string task_id;
    std::vector<std::string> pos_ids;

    bool operator==(const QueryRecord&) const = default;
};

/// Graded relevance judgments, qid -> (doc_id -> grade).
struct Qrels {
    std::map<std::string, std::map<std::string, int>> grades;

    bool relevant(const std::string& qid, const std::string& doc_id) const;
    const std::map<std::string, int>* for_query(const std::string& qid) const;

    /// Checks grades >= 0, at least one positive grade per qid, and (when a
    /// pool is given) that every graded doc exists in the candidate pool.
    void validate(const std::set<std::string>* candidate_pool = nullptr) const;

    bool operator==(const Qrels&) const = default;
};

/// A unit-norm embedded item as stored in indexes and embedding files.
struct EmbeddingRecord {
    std::string id;
    Modality modality = Modality::Text;
    std::vector<float> vector;

    bool operator==(const EmbeddingRecord&) const = default;
};

/// Provenance class of a mined hard negative: wrong modality ranked above the
/// positive (C1) or desired modality ranked below the k' cutoff (C2).
enum class NegativeClass : std::uint8_t {
    C1 = 0,
    C2 = 1,
};

const char* to_string(NegativeClass c);
NegativeClass negative_class_from_string(const std::string& s);

/// Trim plus collapse of internal ASCII whitespace runs to single spaces.
std::string canonicalize_whitespace(const std::string& s);

/// Validates one ingested record and canonicalizes its text. Throws
/// ModalityMismatch when field presence contradicts the modality tag.
/// Duplicate-id detection is a caller-level (per collection) check.
Item validate_item(Item raw);

}  // namespace umr
