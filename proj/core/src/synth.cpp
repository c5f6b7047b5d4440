#include "umr/synth.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "umr/rng.hpp"

namespace umr {

namespace {

constexpr std::size_t kCoreTokens = 4;
constexpr std::size_t kAuxTokens = 8;
constexpr std::size_t kDocTokens = 8;
constexpr std::size_t kImageBytes = 64;
constexpr std::size_t kPerturbations = 3;

struct Cluster {
    std::vector<std::string> core;
    std::vector<std::string> aux;
    std::vector<std::uint8_t> image_base;
};

std::vector<std::uint8_t> perturbed(const std::vector<std::uint8_t>& base, Rng& rng) {
    std::vector<std::uint8_t> bytes = base;
    for (std::size_t i = 0; i < kPerturbations; ++i) {
        bytes[rng.next_index(bytes.size())] = static_cast<std::uint8_t>(rng.next_u64() & 0xff);
    }
    return bytes;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string out;
    for (const auto& t : tokens) {
        if (!out.empty()) out.push_back(' ');
        out += t;
    }
    return out;
}

// The wrong-modality twin of a cluster: shares round(4 * strength) of the
// query vocabulary, padded with cluster-specific filler.
std::string twin_text(const Cluster& cluster, std::size_t variant, double strength) {
    const std::size_t n_core =
        std::min(kCoreTokens, static_cast<std::size_t>(std::llround(strength * kCoreTokens)));
    std::vector<std::string> tokens;
    for (std::size_t i = 0; i < n_core; ++i) tokens.push_back(cluster.core[i]);
    for (std::size_t i = 0; tokens.size() < kDocTokens; ++i) {
        tokens.push_back(cluster.aux[(variant + i) % kAuxTokens]);
    }
    return join_tokens(tokens);
}

std::string query_text(const Cluster& cluster, const std::string& qid) {
    std::vector<std::string> tokens = cluster.core;
    tokens.push_back("u" + qid);
    return join_tokens(tokens);
}

}  // namespace

SynthOutput generate_synth(const SynthSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    SynthOutput out;

    std::vector<Cluster> clusters(spec.n_clusters);
    for (std::size_t k = 0; k < spec.n_clusters; ++k) {
        Cluster& cl = clusters[k];
        const std::string prefix = "c" + std::to_string(k);
        for (std::size_t i = 0; i < kCoreTokens; ++i) {
            cl.core.push_back(prefix + "w" + std::to_string(i));
        }
        for (std::size_t i = 0; i < kAuxTokens; ++i) {
            cl.aux.push_back(prefix + "a" + std::to_string(i));
        }
        cl.image_base.resize(kImageBytes);
        for (auto& b : cl.image_base) b = static_cast<std::uint8_t>(rng.next_u64() & 0xff);
    }

    auto add_image_file = [&](const std::string& stem,
                              std::vector<std::uint8_t> bytes) -> std::string {
        std::string rel = "images/" + stem + ".bin";
        out.image_files.emplace(rel, std::move(bytes));
        return rel;
    };

    for (std::size_t k = 0; k < spec.n_clusters; ++k) {
        const Cluster& cl = clusters[k];
        const std::string kk = std::to_string(k);
        for (std::size_t j = 0; j < spec.text_docs_per_cluster; ++j) {
            CorpusRecord rec;
            rec.dataset_id = "synth";
            rec.item.id = "d" + kk + "t" + std::to_string(j);
            rec.item.modality = Modality::Text;
            rec.item.text = twin_text(cl, j, spec.modality_confound_strength);
            out.corpus.push_back(std::move(rec));
        }
        for (std::size_t j = 0; j < spec.image_docs_per_cluster; ++j) {
            CorpusRecord rec;
            rec.dataset_id = "synth";
            rec.item.id = "d" + kk + "i" + std::to_string(j);
            rec.item.modality = Modality::Image;
            rec.item.image_ref = add_image_file(rec.item.id, perturbed(cl.image_base, rng));
            out.corpus.push_back(std::move(rec));
        }
        for (std::size_t j = 0; j < spec.imagetext_docs_per_cluster; ++j) {
            CorpusRecord rec;
            rec.dataset_id = "synth";
            rec.item.id = "d" + kk + "b" + std::to_string(j);
            rec.item.modality = Modality::ImageText;
            std::vector<std::string> tokens;
            for (std::size_t i = 0; i < kCoreTokens; ++i) {
                tokens.push_back(cl.aux[(j + i) % kAuxTokens]);
            }
            rec.item.text = join_tokens(tokens);
            rec.item.image_ref = add_image_file(rec.item.id, perturbed(cl.image_base, rng));
            out.corpus.push_back(std::move(rec));
        }
    }

    struct TaskShape {
        const char* task_id;
        bool query_text;
        bool query_image;
        Modality desired;
        char positive_kind;  // 't', 'i' or 'b'
        const char* instruction;
    };
    const TaskShape shapes[8] = {
        {"t1", true, false, Modality::Image, 'i', "Retrieve an image that matches the description."},
        {"t2", true, false, Modality::Text, 't', "Retrieve a passage that matches the description."},
        {"t3", true, false, Modality::ImageText, 'b',
         "Retrieve an illustrated article that matches the description."},
        {"t4", false, true, Modality::Text, 't', "Retrieve a passage describing this image."},
        {"t5", false, true, Modality::Image, 'i', "Retrieve a similar image."},
        {"t6", true, true, Modality::Text, 't',
         "Retrieve a passage that answers this visual question."},
        {"t7", true, true, Modality::Image, 'i', "Retrieve an image modified as described."},
        {"t8", true, true, Modality::ImageText, 'b',
         "Retrieve an illustrated article about this entity."},
    };
    for (const TaskShape& shape : shapes) {
        TaskSpec task;
        task.task_id = shape.task_id;
        task.dataset_id = "synth";
        task.instruction = shape.instruction;
        task.desired_modality = shape.desired;
        task.metric = MetricKind::RecallAt5;
        out.tasks.push_back(std::move(task));
    }

    auto make_queries = [&](std::size_t count, const std::string& qid_prefix,
                            std::vector<QueryRecord>& dest, Qrels& qrels) {
        for (std::size_t n = 0; n < count; ++n) {
            const TaskShape& shape = shapes[n % 8];
            const std::size_t k = (n / 8) % spec.n_clusters;
            const Cluster& cl = clusters[k];
            QueryRecord q;
            q.item.id = qid_prefix + std::to_string(n);
            q.task_id = shape.task_id;
            if (shape.query_text) q.item.text = query_text(cl, q.item.id);
            if (shape.query_image) {
                q.item.image_ref = add_image_file(q.item.id, perturbed(cl.image_base, rng));
            }
            q.item.modality = shape.query_text && shape.query_image ? Modality::ImageText
                              : shape.query_image                   ? Modality::Image
                                                                    : Modality::Text;
            const std::string positive =
                "d" + std::to_string(k) + std::string(1, shape.positive_kind) + "0";
            q.pos_ids.push_back(positive);
            qrels.grades[q.item.id][positive] = 1;
            dest.push_back(std::move(q));
        }
    };
    make_queries(spec.n_queries, "q", out.train_queries, out.train_qrels);
    make_queries(spec.n_eval_queries, "e", out.eval_queries, out.eval_qrels);
    return out;
}

void write_synth(const std::string& out_dir, const SynthOutput& output) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(out_dir) / "images");
    for (const auto& [rel, bytes] : output.image_files) {
        std::ofstream f(fs::path(out_dir) / rel, std::ios::binary);
        if (!f) throw Error(ErrorCode::DataError, "cannot write image file '" + rel + "'");
        f.write(reinterpret_cast<const char*>(bytes.data()),
                static_cast<std::streamsize>(bytes.size()));
    }
    write_corpus((fs::path(out_dir) / "corpus.jsonl").string(), output.corpus);
    write_queries((fs::path(out_dir) / "train_queries.jsonl").string(), output.train_queries);
    write_queries((fs::path(out_dir) / "eval_queries.jsonl").string(), output.eval_queries);
    write_tasks((fs::path(out_dir) / "tasks.jsonl").string(), output.tasks);
    write_qrels((fs::path(out_dir) / "train_qrels.trec").string(), output.train_qrels);
    write_qrels((fs::path(out_dir) / "eval_qrels.trec").string(), output.eval_qrels);
}

}  // namespace umr
