#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "umr/core.hpp"
#include "umr/index.hpp"

namespace umr {

/// A true/false reranking prompt. Placeholders {qry_img} {qry_txt} {doc_img}
/// {doc_txt} are substituted at render time; image placeholders become stable
/// <img:ID> markers with the actual references carried out-of-band.
struct PromptTemplate {
    std::string template_id;
    Modality query_modality = Modality::Text;
    Modality candidate_modality = Modality::Text;
    std::optional<std::string> dataset_id;
    std::string body;

    /// Body must end with the True/False question and every placeholder must
    /// be compatible with the modalities the template applies to.
    void validate() const;
};

struct ScorerResponse {
    double logit_true = 0.0;
    double logit_false = 0.0;
};

struct RerankConfig {
    std::size_t depth = 10;
    std::string scorer = "mock";  // "mock" or an http endpoint
    std::size_t max_in_flight = 4;
    std::string cache_path;       // empty disables the response cache
    int retry_backoff_ms = 100;

    void validate() const {
        if (depth < 1) throw Error(ErrorCode::ConfigError, "rerank depth must be >= 1");
        if (max_in_flight < 1) throw Error(ErrorCode::ConfigError, "max_in_flight must be >= 1");
    }
};

struct RenderedPrompt {
    std::string text;
    std::vector<std::string> image_refs;  // ids backing <img:ID>, in marker order
};

std::string render_prompt(const PromptTemplate& tmpl, const Item& query, const Item& candidate);
RenderedPrompt render_prompt_full(const PromptTemplate& tmpl, const Item& query,
                                  const Item& candidate);

/// softmax probability of "True" over the two logits, computed as
/// sigmoid(logit_true - logit_false) for shift-invariant stability.
double true_prob(const ScorerResponse& resp);

class Scorer {
  public:
    virtual ~Scorer() = default;
    /// May be called concurrently from rerank worker threads.
    virtual ScorerResponse score(const RenderedPrompt& prompt, const std::string& qid,
                                 const std::string& doc_id) = 0;
};

/// Oracle test double: +10 true-logit for pairs graded relevant, -10 else.
ScorerResponse mock_score(const Item& query, const Item& candidate, const Qrels& oracle);

class MockScorer : public Scorer {
  public:
    explicit MockScorer(Qrels oracle) : oracle_(std::move(oracle)) {}
    ScorerResponse score(const RenderedPrompt&, const std::string& qid,
                         const std::string& doc_id) override;

  private:
    Qrels oracle_;
};

/// Remote scorer speaking the line-delimited-record wire contract:
/// request {prompt, image_refs[]}, response {logit_true, logit_false}.
/// 3 retries with exponential backoff, then ScorerUnavailable. Responses are
/// cached by (prompt, image_refs) hash in an append-only file.
class HttpScorer : public Scorer {
  public:
    HttpScorer(const std::string& endpoint, std::string cache_path, int backoff_ms = 100);
    ScorerResponse score(const RenderedPrompt& prompt, const std::string& qid,
                         const std::string& doc_id) override;

  private:
    std::string host_;
    int port_ = 80;
    std::string path_;
    std::string cache_path_;
    int backoff_ms_;
    std::mutex cache_mutex_;
    std::map<std::string, ScorerResponse> cache_;
};

/// Holds user templates plus the built-in caption / vqa prompts and a generic
/// fallback for every modality pair. Selection prefers dataset-specific user
/// templates, then user templates, then builtins.
class TemplateRegistry {
  public:
    static TemplateRegistry with_builtins();

    void add(PromptTemplate tmpl);
    const PromptTemplate& select(Modality query_modality, Modality candidate_modality,
                                 const std::string& dataset_id) const;

  private:
    std::vector<PromptTemplate> user_;
    std::vector<PromptTemplate> builtin_;
};

/// Rescores the first min(depth, |hits|) hits by true-token probability and
/// re-sorts them (probability desc, original rank asc on ties); hits beyond
/// depth are returned unchanged. The result is a permutation of the input.
std::vector<SearchHit> rerank(const Item& query, const std::vector<SearchHit>& hits,
                              const TemplateRegistry& templates,
                              const std::map<std::string, Item>& candidates,
                              const std::string& dataset_id, Scorer& scorer,
                              const RerankConfig& cfg);

}  // namespace umr
