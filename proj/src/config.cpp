#include "qwthn/config.hpp"

#include <fstream>
#include <initializer_list>
#include <set>

#include "qwthn/errors.hpp"

namespace qwthn {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& j, const std::string& where,
                         std::initializer_list<const char*> allowed) {
    if (!j.is_object()) {
        throw ConfigError("config: '" + where + "' must be an object");
    }
    const std::set<std::string> keys(allowed.begin(), allowed.end());
    for (const auto& [key, value] : j.items()) {
        if (keys.find(key) == keys.end()) {
            throw ConfigError("config: unknown key '" + where + "." + key + "'");
        }
    }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (const auto it = j.find(key); it != j.end()) {
        try {
            out = it->get<T>();
        } catch (const json::exception&) {
            throw ConfigError(std::string("config: bad value for '") + key + "'");
        }
    }
}

void read_factors(const json& j, const char* key,
                  std::optional<std::vector<std::size_t>>& out) {
    if (const auto it = j.find(key); it != j.end()) {
        try {
            out = it->get<std::vector<std::size_t>>();
        } catch (const json::exception&) {
            throw ConfigError(std::string("config: bad value for '") + key + "'");
        }
    }
}

void parse_adapter(const json& j, CliConfig& config) {
    reject_unknown_keys(j, "adapter",
                        {"kind", "qnn", "mpo", "hidden_a", "hidden_b",
                         "mpo_a_in_factors", "mpo_a_out_factors", "mpo_b_in_factors",
                         "mpo_b_out_factors", "lora_rank", "lora_scale"});
    if (const auto it = j.find("kind"); it != j.end()) {
        const std::string kind = it->get<std::string>();
        if (kind == "qwthn") {
            config.train.adapter = AdapterKind::Qwthn;
        } else if (kind == "lora") {
            config.train.adapter = AdapterKind::Lora;
        } else {
            throw ConfigError("config: adapter.kind must be 'qwthn' or 'lora'");
        }
    }
    if (const auto it = j.find("qnn"); it != j.end()) {
        reject_unknown_keys(*it, "adapter.qnn", {"qubits", "blocks"});
        read(*it, "qubits", config.train.qwthn.qubits);
        read(*it, "blocks", config.train.qwthn.blocks);
    }
    if (const auto it = j.find("mpo"); it != j.end()) {
        reject_unknown_keys(*it, "adapter.mpo", {"sites", "bond"});
        read(*it, "sites", config.train.qwthn.sites);
        read(*it, "bond", config.train.qwthn.bond);
    }
    read(j, "hidden_a", config.train.qwthn.hidden_a);
    read(j, "hidden_b", config.train.qwthn.hidden_b);
    read_factors(j, "mpo_a_in_factors", config.train.qwthn.mpo_a_in_factors);
    read_factors(j, "mpo_a_out_factors", config.train.qwthn.mpo_a_out_factors);
    read_factors(j, "mpo_b_in_factors", config.train.qwthn.mpo_b_in_factors);
    read_factors(j, "mpo_b_out_factors", config.train.qwthn.mpo_b_out_factors);
    read(j, "lora_rank", config.train.lora.rank);
    read(j, "lora_scale", config.train.lora.scale);
}

void parse_train(const json& j, TrainConfig& train) {
    reject_unknown_keys(j, "train",
                        {"steps", "batch_size", "learning_rate", "beta1", "beta2",
                         "epsilon", "validation_fraction", "eval_every"});
    read(j, "steps", train.steps);
    read(j, "batch_size", train.batch_size);
    read(j, "learning_rate", train.adam.learning_rate);
    read(j, "beta1", train.adam.beta1);
    read(j, "beta2", train.adam.beta2);
    read(j, "epsilon", train.adam.epsilon);
    read(j, "validation_fraction", train.validation_fraction);
    read(j, "eval_every", train.eval_every);
}

void parse_char_lm(const json& j, TrainConfig& train) {
    reject_unknown_keys(j, "char_lm",
                        {"vocab", "d_model", "context", "d_ff", "pretrain_steps",
                         "pretrain_batch", "pretrain_lr", "corpus_length", "host_seed",
                         "finetune_corpus_length", "finetune_variant"});
    read(j, "vocab", train.host.vocab);
    read(j, "d_model", train.host.d_model);
    read(j, "context", train.host.context);
    read(j, "d_ff", train.host.d_ff);
    read(j, "pretrain_steps", train.host.pretrain_steps);
    read(j, "pretrain_batch", train.host.pretrain_batch);
    read(j, "pretrain_lr", train.host.pretrain_lr);
    read(j, "corpus_length", train.host.corpus_length);
    read(j, "host_seed", train.host.seed);
    read(j, "finetune_corpus_length", train.finetune_corpus_length);
    read(j, "finetune_variant", train.finetune_variant);
}

void parse_backend(const json& j, BackendConfig& backend) {
    reject_unknown_keys(j, "backend",
                        {"kind", "shots", "group_limit", "latency_ms", "seed",
                         "poll_timeout_s"});
    if (const auto it = j.find("kind"); it != j.end()) {
        const std::string kind = it->get<std::string>();
        if (kind == "local_exact") {
            backend.kind = BackendKind::LocalExact;
        } else if (kind == "mock_cloud") {
            backend.kind = BackendKind::MockCloud;
        } else {
            throw ConfigError("config: backend.kind must be 'local_exact' or 'mock_cloud'");
        }
    }
    read(j, "shots", backend.shots);
    read(j, "group_limit", backend.group_limit);
    read(j, "latency_ms", backend.latency_ms);
    read(j, "seed", backend.seed);
    read(j, "poll_timeout_s", backend.poll_timeout_s);
}

} // namespace

CliConfig parse_config_json(const json& j) {
    CliConfig config;
    reject_unknown_keys(j, "",
                        {"seed", "task", "adapter", "layer", "train", "fourier",
                         "char_lm", "backend"});
    read(j, "seed", config.train.seed);
    if (const auto it = j.find("task"); it != j.end()) {
        const std::string task = it->get<std::string>();
        if (task == "fourier_regression") {
            config.train.task = TaskKind::FourierRegression;
        } else if (task == "char_lm") {
            config.train.task = TaskKind::CharLm;
        } else {
            throw ConfigError("config: task must be 'fourier_regression' or 'char_lm'");
        }
    }
    if (const auto it = j.find("layer"); it != j.end()) {
        reject_unknown_keys(*it, "layer", {"in", "out"});
        read(*it, "in", config.train.qwthn.input_dim);
        read(*it, "out", config.train.qwthn.output_dim);
        config.train.lora.input_dim = config.train.qwthn.input_dim;
        config.train.lora.output_dim = config.train.qwthn.output_dim;
    }
    if (const auto it = j.find("adapter"); it != j.end()) {
        parse_adapter(*it, config);
    }
    if (const auto it = j.find("train"); it != j.end()) {
        parse_train(*it, config.train);
    }
    if (const auto it = j.find("fourier"); it != j.end()) {
        reject_unknown_keys(*it, "fourier", {"harmonics", "samples"});
        read(*it, "harmonics", config.train.fourier.harmonics);
        read(*it, "samples", config.train.fourier.samples);
    }
    if (const auto it = j.find("char_lm"); it != j.end()) {
        parse_char_lm(*it, config.train);
    }
    if (const auto it = j.find("backend"); it != j.end()) {
        parse_backend(*it, config.backend);
    }

    // surface dimension-chain problems now, naming the stage
    config.train.validate();
    if (config.train.adapter == AdapterKind::Qwthn &&
        config.train.task == TaskKind::FourierRegression) {
        config.train.qwthn.validate();
    }
    return config;
}

CliConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("config: cannot open '" + path + "'");
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config: parse error in '" + path + "': " + e.what());
    }
    return parse_config_json(j);
}

nlohmann::json config_to_json(const CliConfig& config) {
    json j;
    j["seed"] = config.train.seed;
    j["task"] = config.train.task == TaskKind::FourierRegression ? "fourier_regression"
                                                                 : "char_lm";
    j["layer"] = {{"in", config.train.qwthn.input_dim},
                  {"out", config.train.qwthn.output_dim}};
    json adapter;
    adapter["kind"] = config.train.adapter == AdapterKind::Qwthn ? "qwthn" : "lora";
    adapter["qnn"] = {{"qubits", config.train.qwthn.qubits},
                      {"blocks", config.train.qwthn.blocks}};
    adapter["mpo"] = {{"sites", config.train.qwthn.sites},
                      {"bond", config.train.qwthn.bond}};
    adapter["hidden_a"] = config.train.qwthn.hidden_a;
    adapter["hidden_b"] = config.train.qwthn.hidden_b;
    adapter["lora_rank"] = config.train.lora.rank;
    adapter["lora_scale"] = config.train.lora.scale;
    j["adapter"] = adapter;
    j["train"] = {{"steps", config.train.steps},
                  {"batch_size", config.train.batch_size},
                  {"learning_rate", config.train.adam.learning_rate},
                  {"beta1", config.train.adam.beta1},
                  {"beta2", config.train.adam.beta2},
                  {"epsilon", config.train.adam.epsilon},
                  {"validation_fraction", config.train.validation_fraction},
                  {"eval_every", config.train.eval_every}};
    j["fourier"] = {{"harmonics", config.train.fourier.harmonics},
                    {"samples", config.train.fourier.samples}};
    j["char_lm"] = {{"vocab", config.train.host.vocab},
                    {"d_model", config.train.host.d_model},
                    {"context", config.train.host.context},
                    {"d_ff", config.train.host.d_ff},
                    {"pretrain_steps", config.train.host.pretrain_steps},
                    {"pretrain_batch", config.train.host.pretrain_batch},
                    {"pretrain_lr", config.train.host.pretrain_lr},
                    {"corpus_length", config.train.host.corpus_length},
                    {"host_seed", config.train.host.seed},
                    {"finetune_corpus_length", config.train.finetune_corpus_length},
                    {"finetune_variant", config.train.finetune_variant}};
    j["backend"] = {
        {"kind", config.backend.kind == BackendKind::LocalExact ? "local_exact"
                                                                : "mock_cloud"},
        {"shots", config.backend.shots},
        {"group_limit", config.backend.group_limit},
        {"latency_ms", config.backend.latency_ms},
        {"seed", config.backend.seed},
        {"poll_timeout_s", config.backend.poll_timeout_s}};
    return j;
}

} // namespace qwthn
