#include "umr/reranker.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "umr/featurizer.hpp"  // fnv1a64

namespace umr {

using nlohmann::json;

namespace {

constexpr const char* kPlaceholders[4] = {"{qry_img}", "{qry_txt}", "{doc_img}", "{doc_txt}"};

bool placeholder_compatible(int which, Modality qm, Modality cm) {
    switch (which) {
        case 0: return qm == Modality::Image || qm == Modality::ImageText;
        case 1: return qm == Modality::Text || qm == Modality::ImageText;
        case 2: return cm == Modality::Image || cm == Modality::ImageText;
        case 3: return cm == Modality::Text || cm == Modality::ImageText;
    }
    return false;
}

std::string img_marker(const Item& item) {
    return "<img:" + item.id + ">";
}

}  // namespace

void PromptTemplate::validate() const {
    std::string trimmed = body;
    while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.back()))) {
        trimmed.pop_back();
    }
    const std::string suffix = "True or False";
    if (trimmed.size() < suffix.size() ||
        trimmed.compare(trimmed.size() - suffix.size(), suffix.size(), suffix) != 0) {
        throw Error(ErrorCode::DataError,
                    "template '" + template_id + "' must end with a True/False question");
    }
    for (int which = 0; which < 4; ++which) {
        if (body.find(kPlaceholders[which]) != std::string::npos &&
            !placeholder_compatible(which, query_modality, candidate_modality)) {
            throw Error(ErrorCode::DataError, "template '" + template_id + "' uses " +
                                                  kPlaceholders[which] +
                                                  " incompatible with its modalities");
        }
    }
}

RenderedPrompt render_prompt_full(const PromptTemplate& tmpl, const Item& query,
                                  const Item& candidate) {
    if (tmpl.query_modality != query.modality || tmpl.candidate_modality != candidate.modality) {
        throw Error(ErrorCode::TemplateMismatch,
                    "template '" + tmpl.template_id + "' applies to (" +
                        to_string(tmpl.query_modality) + " -> " +
                        to_string(tmpl.candidate_modality) + "), got (" +
                        to_string(query.modality) + " -> " + to_string(candidate.modality) + ")");
    }
    RenderedPrompt out;
    const std::string& body = tmpl.body;
    std::size_t pos = 0;
    while (pos < body.size()) {
        std::size_t brace = body.find('{', pos);
        if (brace == std::string::npos) {
            out.text.append(body, pos, body.size() - pos);
            break;
        }
        out.text.append(body, pos, brace - pos);
        int which = -1;
        for (int w = 0; w < 4; ++w) {
            const std::size_t len = std::char_traits<char>::length(kPlaceholders[w]);
            if (body.compare(brace, len, kPlaceholders[w]) == 0) {
                which = w;
                pos = brace + len;
                break;
            }
        }
        if (which < 0) {  // literal brace, not a placeholder
            out.text.push_back('{');
            pos = brace + 1;
            continue;
        }
        switch (which) {
            case 0:
                out.text += img_marker(query);
                out.image_refs.push_back(query.id);
                break;
            case 1:
                if (!query.has_text()) {
                    throw Error(ErrorCode::MissingField, "query '" + query.id + "' has no text");
                }
                out.text += *query.text;
                break;
            case 2:
                out.text += img_marker(candidate);
                out.image_refs.push_back(candidate.id);
                break;
            case 3:
                if (!candidate.has_text()) {
                    throw Error(ErrorCode::MissingField,
                                "candidate '" + candidate.id + "' has no text");
                }
                out.text += *candidate.text;
                break;
        }
    }
    return out;
}

std::string render_prompt(const PromptTemplate& tmpl, const Item& query, const Item& candidate) {
    return render_prompt_full(tmpl, query, candidate).text;
}

double true_prob(const ScorerResponse& resp) {
    if (!std::isfinite(resp.logit_true) || !std::isfinite(resp.logit_false)) {
        throw Error(ErrorCode::NonFinite, "scorer returned non-finite logits");
    }
    const double diff = resp.logit_true - resp.logit_false;
    return 1.0 / (1.0 + std::exp(-diff));
}

ScorerResponse mock_score(const Item& query, const Item& candidate, const Qrels& oracle) {
    const double lt = oracle.relevant(query.id, candidate.id) ? 10.0 : -10.0;
    return ScorerResponse{lt, 0.0};
}

ScorerResponse MockScorer::score(const RenderedPrompt&, const std::string& qid,
                                 const std::string& doc_id) {
    const double lt = oracle_.relevant(qid, doc_id) ? 10.0 : -10.0;
    return ScorerResponse{lt, 0.0};
}

namespace {

std::string cache_key(const RenderedPrompt& prompt) {
    std::string blob = prompt.text;
    blob.push_back('\x1f');
    for (const auto& ref : prompt.image_refs) {
        blob += ref;
        blob.push_back('\x1e');
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(blob.data(), blob.size())));
    return buf;
}

}  // namespace

HttpScorer::HttpScorer(const std::string& endpoint, std::string cache_path, int backoff_ms)
    : cache_path_(std::move(cache_path)), backoff_ms_(backoff_ms) {
    // accept http://host:port/path
    const std::string prefix = "http://";
    if (endpoint.compare(0, prefix.size(), prefix) != 0) {
        throw Error(ErrorCode::ConfigError, "scorer endpoint must start with http://");
    }
    std::string rest = endpoint.substr(prefix.size());
    const std::size_t slash = rest.find('/');
    path_ = slash == std::string::npos ? "/" : rest.substr(slash);
    std::string hostport = rest.substr(0, slash);
    const std::size_t colon = hostport.find(':');
    if (colon == std::string::npos) {
        host_ = hostport;
        port_ = 80;
    } else {
        host_ = hostport.substr(0, colon);
        port_ = std::stoi(hostport.substr(colon + 1));
    }
    if (!cache_path_.empty()) {
        std::ifstream in(cache_path_);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            json rec = json::parse(line, nullptr, false);
            if (rec.is_discarded()) continue;
            cache_[rec.at("key").get<std::string>()] =
                ScorerResponse{rec.at("logit_true").get<double>(),
                               rec.at("logit_false").get<double>()};
        }
    }
}

ScorerResponse HttpScorer::score(const RenderedPrompt& prompt, const std::string& qid,
                                 const std::string&) {
    const std::string key = cache_key(prompt);
    {
        std::lock_guard<std::mutex> lock(cache_mutex_);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
    }

    json request;
    request["prompt"] = prompt.text;
    request["image_refs"] = prompt.image_refs;
    const std::string body = request.dump() + "\n";

    std::string last_error = "no attempt made";
    for (int attempt = 0; attempt <= 3; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(
                std::chrono::milliseconds(backoff_ms_ << (attempt - 1)));
        }
        httplib::Client client(host_, port_);
        client.set_connection_timeout(5, 0);
        client.set_read_timeout(30, 0);
        auto res = client.Post(path_, body, "application/json");
        if (!res) {
            last_error = "connection failed";
            continue;
        }
        if (res->status != 200) {
            last_error = "http status " + std::to_string(res->status);
            continue;
        }
        json response = json::parse(res->body, nullptr, false);
        if (response.is_discarded() || !response.contains("logit_true") ||
            !response.contains("logit_false")) {
            last_error = "malformed scorer response";
            continue;
        }
        ScorerResponse out{response["logit_true"].get<double>(),
                           response["logit_false"].get<double>()};
        if (!std::isfinite(out.logit_true) || !std::isfinite(out.logit_false)) {
            last_error = "non-finite logits";
            continue;
        }
        std::lock_guard<std::mutex> lock(cache_mutex_);
        if (cache_.emplace(key, out).second && !cache_path_.empty()) {
            std::ofstream app(cache_path_, std::ios::app);
            json rec;
            rec["key"] = key;
            rec["logit_true"] = out.logit_true;
            rec["logit_false"] = out.logit_false;
            app << rec.dump() << "\n";
        }
        return out;
    }
    throw Error(ErrorCode::ScorerUnavailable,
                "scorer at " + host_ + ":" + std::to_string(port_) + " for qid '" + qid +
                    "': " + last_error);
}

TemplateRegistry TemplateRegistry::with_builtins() {
    TemplateRegistry reg;
    PromptTemplate caption;
    caption.template_id = "caption_match";
    caption.query_modality = Modality::Image;
    caption.candidate_modality = Modality::Text;
    caption.body =
        "{qry_img}\nCaption:{doc_txt}\nDoes the above daily life image match the caption? "
        "True or False";
    caption.validate();
    reg.builtin_.push_back(std::move(caption));

    PromptTemplate vqa;
    vqa.template_id = "vqa_answer";
    vqa.query_modality = Modality::ImageText;
    vqa.candidate_modality = Modality::Text;
    vqa.body =
        "{qry_img}\nQuestion:{qry_txt}\nAnswer:{doc_txt}\nDoes the answer correctly answer the "
        "question? True or False";
    vqa.validate();
    reg.builtin_.push_back(std::move(vqa));

    auto part = [](Modality m, bool query_side) -> std::string {
        const char* img = query_side ? "{qry_img}" : "{doc_img}";
        const char* txt = query_side ? "{qry_txt}" : "{doc_txt}";
        switch (m) {
            case Modality::Text: return txt;
            case Modality::Image: return img;
            case Modality::ImageText: return std::string(img) + " " + txt;
        }
        return txt;
    };
    for (Modality qm : {Modality::Text, Modality::Image, Modality::ImageText}) {
        for (Modality cm : {Modality::Text, Modality::Image, Modality::ImageText}) {
            PromptTemplate generic;
            generic.template_id =
                std::string("generic_") + to_string(qm) + "_to_" + to_string(cm);
            generic.query_modality = qm;
            generic.candidate_modality = cm;
            generic.body = "Query:" + part(qm, true) + "\nCandidate:" + part(cm, false) +
                           "\nDoes the candidate satisfy the query? True or False";
            generic.validate();
            reg.builtin_.push_back(std::move(generic));
        }
    }
    return reg;
}

void TemplateRegistry::add(PromptTemplate tmpl) {
    tmpl.validate();
    user_.push_back(std::move(tmpl));
}

const PromptTemplate& TemplateRegistry::select(Modality query_modality,
                                               Modality candidate_modality,
                                               const std::string& dataset_id) const {
    auto matches = [&](const PromptTemplate& t, bool need_dataset) {
        if (t.query_modality != query_modality || t.candidate_modality != candidate_modality) {
            return false;
        }
        if (need_dataset) return t.dataset_id.has_value() && *t.dataset_id == dataset_id;
        return !t.dataset_id.has_value();
    };
    for (const auto& t : user_) {
        if (matches(t, true)) return t;
    }
    for (const auto& t : user_) {
        if (matches(t, false)) return t;
    }
    for (const auto& t : builtin_) {
        if (matches(t, false)) return t;
    }
    throw Error(ErrorCode::TemplateMismatch, "no template for this modality pair");
}

std::vector<SearchHit> rerank(const Item& query, const std::vector<SearchHit>& hits,
                              const TemplateRegistry& templates,
                              const std::map<std::string, Item>& candidates,
                              const std::string& dataset_id, Scorer& scorer,
                              const RerankConfig& cfg) {
    cfg.validate();
    const std::size_t head_len = std::min(cfg.depth, hits.size());
    if (head_len == 0) return hits;

    // render everything up front so template errors surface before any call
    std::vector<RenderedPrompt> prompts(head_len);
    std::vector<const Item*> cand_items(head_len);
    for (std::size_t i = 0; i < head_len; ++i) {
        auto it = candidates.find(hits[i].doc_id);
        if (it == candidates.end()) {
            throw Error(ErrorCode::DataError,
                        "candidate '" + hits[i].doc_id + "' missing from corpus for rerank");
        }
        cand_items[i] = &it->second;
        const PromptTemplate& tmpl =
            templates.select(query.modality, it->second.modality, dataset_id);
        prompts[i] = render_prompt_full(tmpl, query, it->second);
    }

    // score in deterministic slots, up to max_in_flight concurrent calls
    std::vector<double> probs(head_len, 0.0);
    std::exception_ptr failure;
    for (std::size_t base = 0; base < head_len; base += cfg.max_in_flight) {
        const std::size_t chunk = std::min(cfg.max_in_flight, head_len - base);
        std::vector<std::future<double>> futures;
        futures.reserve(chunk);
        for (std::size_t off = 0; off < chunk; ++off) {
            const std::size_t i = base + off;
            futures.push_back(std::async(std::launch::async, [&, i]() {
                return true_prob(scorer.score(prompts[i], query.id, hits[i].doc_id));
            }));
        }
        for (std::size_t off = 0; off < chunk; ++off) {
            try {
                probs[base + off] = futures[off].get();
            } catch (...) {
                if (!failure) failure = std::current_exception();
            }
        }
    }
    if (failure) std::rethrow_exception(failure);

    std::vector<std::size_t> order(head_len);
    for (std::size_t i = 0; i < head_len; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (probs[a] != probs[b]) return probs[a] > probs[b];
        return a < b;  // retrieval rank ascending
    });

    std::vector<SearchHit> out;
    out.reserve(hits.size());
    for (std::size_t r = 0; r < head_len; ++r) {
        const std::size_t i = order[r];
        SearchHit hit = hits[i];
        hit.score = static_cast<float>(probs[i]);
        hit.rank = static_cast<std::uint32_t>(r + 1);
        out.push_back(std::move(hit));
    }
    for (std::size_t i = head_len; i < hits.size(); ++i) out.push_back(hits[i]);
    return out;
}

}  // namespace umr
