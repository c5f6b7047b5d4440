#include "umr/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>

namespace umr {

void PipelineConfig::validate() const {
    featurizer.validate();
    stage_rand.validate();
    stage_hard.validate();
    stage_continual.validate();
    miner.validate();
    rerank.validate();
    if (embed_dim < 1) throw Error(ErrorCode::ConfigError, "encoder.dim must be >= 1");
    if (retrieve_k < 1) throw Error(ErrorCode::ConfigError, "retrieve.k must be >= 1");
    if (workdir.empty()) throw Error(ErrorCode::ConfigError, "data.workdir is required");
}

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

double to_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorCode::ConfigError, key + ": not a number: '" + value + "'");
    }
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorCode::ConfigError, key + ": not an unsigned integer: '" + value + "'");
    }
}

bool to_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
    if (value == "false" || value == "0" || value == "no" || value == "off") return false;
    throw Error(ErrorCode::ConfigError, key + ": not a boolean: '" + value + "'");
}

using Setter = std::function<void(PipelineConfig&, const std::string&, const std::string&)>;

const std::vector<std::pair<std::string, Setter>>& key_table() {
    auto stage_keys = [](const std::string& prefix,
                         TrainConfig PipelineConfig::*stage) -> std::vector<std::pair<std::string, Setter>> {
        return {
            {prefix + ".tau",
             [stage](PipelineConfig& c, const std::string& k, const std::string& v) {
                 (c.*stage).tau = to_double(k, v);
             }},
            {prefix + ".batch_size",
             [stage](PipelineConfig& c, const std::string& k, const std::string& v) {
                 (c.*stage).batch_size = static_cast<std::size_t>(to_u64(k, v));
             }},
            {prefix + ".lr",
             [stage](PipelineConfig& c, const std::string& k, const std::string& v) {
                 (c.*stage).lr = to_double(k, v);
             }},
            {prefix + ".epochs",
             [stage](PipelineConfig& c, const std::string& k, const std::string& v) {
                 (c.*stage).epochs = static_cast<std::size_t>(to_u64(k, v));
             }},
            {prefix + ".seed",
             [stage](PipelineConfig& c, const std::string& k, const std::string& v) {
                 (c.*stage).seed = to_u64(k, v);
             }},
        };
    };

    static const std::vector<std::pair<std::string, Setter>> table = [&]() {
        std::vector<std::pair<std::string, Setter>> t = {
            {"data.corpus",
             [](PipelineConfig& c, const std::string&, const std::string& v) {
                 c.corpus_path = v;
             }},
            {"data.train_queries",
             [](PipelineConfig& c, const std::string&, const std::string& v) {
                 c.train_queries_path = v;
             }},
            {"data.eval_queries",
             [](PipelineConfig& c, const std::string&, const std::string& v) {
                 c.eval_queries_path = v;
             }},
            {"data.tasks",
             [](PipelineConfig& c, const std::string&, const std::string& v) {
                 c.tasks_path = v;
             }},
            {"data.qrels",
             [](PipelineConfig& c, const std::string&, const std::string& v) {
                 c.qrels_path = v;
             }},
            {"data.workdir",
             [](PipelineConfig& c, const std::string&, const std::string& v) { c.workdir = v; }},
            {"featurizer.text_dim",
             [](PipelineConfig& c, const std::string& k, const std::string& v) {
                 c.featurizer.text_dim = static_cast<std::uint32_t>(to_u64(k, v));
             }},
            {"featurizer.image_dim",
             [](PipelineConfig& c, const std::string& k, const std::string& v) {
                 c.featurizer.image_dim = static_cast<std::uint32_t>(to_u64(k, v));
             }},
            {"featurizer.seed",
             [](PipelineConfig& c, const std::string& k, const std::string& v) {
                 c.featurizer.seed = to_u64(k, v);
             }},
            {"encoder.dim",
             [](PipelineConfig& c, const std::string& k, const std::string& v) {
                 c.embed_dim = static_cast<std::uint32_t>(to_u64(k, v));
             }},
            {"encode.include_instruction",
             [](PipelineConfig& c, const std::string& k, const std::string& v) {
                 c.include_instruction = to_bool(k, v);
                 c.stage_rand.include_instruction = c.include_instruction;
                 c.stage_hard.include_instruction = c.include_instruction;
                 c.stage_continual.include_instruction = c.include_instruction;
             }},
            {"miner.top_n",
             [](PipelineConfig& c, const std::string& k, const std::string& v) {
                 c.miner.top_n = static_cast<std::size_t>(to_u64(k, v));
             }},
            {"miner.k_prime",
             [](PipelineConfig& c, const std::string& k, const std::string& v) {
                 c.miner.k_prime = static_cast<std::size_t>(to_u64(k, v));
             }},
            {"rerank.enabled",
             [](PipelineConfig& c, const std::string& k, const std::string& v) {
                 c.rerank_enabled = to_bool(k, v);
             }},
            {"rerank.depth",
             [](PipelineConfig& c, const std::string& k, const std::string& v) {
                 c.rerank.depth = static_cast<std::size_t>(to_u64(k, v));
             }},
            {"rerank.scorer",
             [](PipelineConfig& c, const std::string&, const std::string& v) {
                 c.rerank.scorer = v;
             }},
            {"rerank.max_in_flight",
             [](PipelineConfig& c, const std::string& k, const std::string& v) {
                 c.rerank.max_in_flight = static_cast<std::size_t>(to_u64(k, v));
             }},
            {"rerank.cache",
             [](PipelineConfig& c, const std::string&, const std::string& v) {
                 c.rerank.cache_path = v;
             }},
            {"eval.pool_mode",
             [](PipelineConfig& c, const std::string& k, const std::string& v) {
                 if (v == "global") {
                     c.pool_mode = PoolMode::Global;
                 } else if (v == "per_dataset") {
                     c.pool_mode = PoolMode::PerDataset;
                 } else {
                     throw Error(ErrorCode::ConfigError,
                                 k + ": expected global or per_dataset, got '" + v + "'");
                 }
             }},
            {"retrieve.k",
             [](PipelineConfig& c, const std::string& k, const std::string& v) {
                 c.retrieve_k = static_cast<std::size_t>(to_u64(k, v));
             }},
            {"run.tag",
             [](PipelineConfig& c, const std::string&, const std::string& v) { c.run_tag = v; }},
        };
        for (auto& kv : stage_keys("train.rand", &PipelineConfig::stage_rand)) t.push_back(kv);
        for (auto& kv : stage_keys("train.hard", &PipelineConfig::stage_hard)) t.push_back(kv);
        for (auto& kv : stage_keys("train.continual", &PipelineConfig::stage_continual)) {
            t.push_back(kv);
        }
        return t;
    }();
    return table;
}

}  // namespace

std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ConfigError, "config file '" + path + "' not found");
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::ConfigError,
                        path + ":" + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty()) {
            throw Error(ErrorCode::ConfigError,
                        path + ":" + std::to_string(line_no) + ": empty key");
        }
        kv[key] = value;
    }
    return kv;
}

void set_config_key(PipelineConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& [name, setter] : key_table()) {
        if (name == key) {
            setter(cfg, key, value);
            return;
        }
    }
    throw Error(ErrorCode::ConfigError, "unknown config key '" + key + "'");
}

void apply_config(const std::map<std::string, std::string>& kv, PipelineConfig& cfg) {
    for (const auto& [key, value] : kv) set_config_key(cfg, key, value);
}

std::vector<std::string> config_key_names() {
    std::vector<std::string> names;
    names.reserve(key_table().size());
    for (const auto& [name, setter] : key_table()) names.push_back(name);
    return names;
}

}  // namespace umr
