#pragma once

#include "propdet/inference.hpp"
#include "propdet/losses.hpp"
#include "propdet/synth.hpp"
#include "propdet/trainer.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace propdet {

using Json = nlohmann::json;

inline std::string to_string(LogicGrounding g) {
    return g == LogicGrounding::kMasked ? "masked" : "plain";
}

inline LogicGrounding logic_grounding_from_string(const std::string& s) {
    if (s == "masked") return LogicGrounding::kMasked;
    if (s == "plain") return LogicGrounding::kPlain;
    throw std::invalid_argument("unknown logic grounding mode: " + s);
}

inline std::string to_string(LrSchedule s) {
    return s == LrSchedule::kConstant ? "constant" : "linear_decay";
}

inline LrSchedule lr_schedule_from_string(const std::string& s) {
    if (s == "constant") return LrSchedule::kConstant;
    if (s == "linear_decay") return LrSchedule::kLinearDecay;
    throw std::invalid_argument("unknown lr schedule: " + s);
}

inline std::string to_string(DefinitionEncoding d) {
    return d == DefinitionEncoding::kPerEpoch ? "per_epoch" : "per_step";
}

inline DefinitionEncoding definition_encoding_from_string(const std::string& s) {
    if (s == "per_epoch") return DefinitionEncoding::kPerEpoch;
    if (s == "per_step") return DefinitionEncoding::kPerStep;
    throw std::invalid_argument("unknown definition encoding: " + s);
}

inline Json to_json(const TrainConfig& cfg) {
    return Json{
        {"model",
         {{"hidden_dim", cfg.hidden_dim},
          {"max_seq_len", cfg.max_seq_len},
          {"def_encoder", to_string(cfg.def_mode)}}},
        {"train",
         {{"learning_rate", cfg.optimizer.learning_rate},
          {"batch_size", cfg.batch_size},
          {"max_epochs", cfg.max_epochs},
          {"warmup_steps", cfg.optimizer.warmup_steps},
          {"early_stop_patience", cfg.early_stop_patience},
          {"seed", cfg.seed},
          {"beta1", cfg.optimizer.beta1},
          {"beta2", cfg.optimizer.beta2},
          {"eps_opt", cfg.optimizer.eps},
          {"weight_decay", cfg.optimizer.weight_decay},
          {"lr_schedule", to_string(cfg.optimizer.schedule)},
          {"definition_encoding", to_string(cfg.definition_encoding)}}},
        {"loss",
         {{"alpha", cfg.weights.alpha},
          {"beta", cfg.weights.beta},
          {"lambda", cfg.weights.lambda},
          {"gamma", cfg.weights.gamma},
          {"focal_gamma", cfg.weights.focal_gamma},
          {"eps", cfg.weights.eps},
          {"logic_grounding", to_string(cfg.weights.grounding)}}},
        {"decode",
         {{"slc_threshold", cfg.thresholds.slc_threshold},
          {"flc_threshold", cfg.thresholds.flc_threshold}}},
    };
}

// Applies the keys present in `j` over `cfg`; sparse config files are fine.
inline void apply_json(TrainConfig& cfg, const Json& j) {
    if (j.contains("model")) {
        const auto& m = j.at("model");
        if (m.contains("hidden_dim")) cfg.hidden_dim = m.at("hidden_dim").get<int>();
        if (m.contains("max_seq_len")) cfg.max_seq_len = m.at("max_seq_len").get<int>();
        if (m.contains("def_encoder"))
            cfg.def_mode = def_encoder_mode_from_string(m.at("def_encoder").get<std::string>());
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        if (t.contains("learning_rate")) cfg.optimizer.learning_rate = t.at("learning_rate").get<double>();
        if (t.contains("batch_size")) cfg.batch_size = t.at("batch_size").get<int>();
        if (t.contains("max_epochs")) cfg.max_epochs = t.at("max_epochs").get<int>();
        if (t.contains("warmup_steps")) cfg.optimizer.warmup_steps = t.at("warmup_steps").get<int>();
        if (t.contains("early_stop_patience"))
            cfg.early_stop_patience = t.at("early_stop_patience").get<int>();
        if (t.contains("seed")) cfg.seed = t.at("seed").get<std::uint64_t>();
        if (t.contains("beta1")) cfg.optimizer.beta1 = t.at("beta1").get<double>();
        if (t.contains("beta2")) cfg.optimizer.beta2 = t.at("beta2").get<double>();
        if (t.contains("eps_opt")) cfg.optimizer.eps = t.at("eps_opt").get<double>();
        if (t.contains("weight_decay")) cfg.optimizer.weight_decay = t.at("weight_decay").get<double>();
        if (t.contains("lr_schedule"))
            cfg.optimizer.schedule = lr_schedule_from_string(t.at("lr_schedule").get<std::string>());
        if (t.contains("definition_encoding"))
            cfg.definition_encoding =
                definition_encoding_from_string(t.at("definition_encoding").get<std::string>());
    }
    if (j.contains("loss")) {
        const auto& l = j.at("loss");
        if (l.contains("alpha")) cfg.weights.alpha = l.at("alpha").get<double>();
        if (l.contains("beta")) cfg.weights.beta = l.at("beta").get<double>();
        if (l.contains("lambda")) cfg.weights.lambda = l.at("lambda").get<double>();
        if (l.contains("gamma")) cfg.weights.gamma = l.at("gamma").get<double>();
        if (l.contains("focal_gamma")) cfg.weights.focal_gamma = l.at("focal_gamma").get<double>();
        if (l.contains("eps")) cfg.weights.eps = l.at("eps").get<double>();
        if (l.contains("logic_grounding"))
            cfg.weights.grounding =
                logic_grounding_from_string(l.at("logic_grounding").get<std::string>());
    }
    if (j.contains("decode")) {
        const auto& d = j.at("decode");
        if (d.contains("slc_threshold"))
            cfg.thresholds.slc_threshold = d.at("slc_threshold").get<double>();
        if (d.contains("flc_threshold"))
            cfg.thresholds.flc_threshold = d.at("flc_threshold").get<double>();
    }
}

inline Json to_json(const SynthConfig& cfg) {
    return Json{{"seed", cfg.seed},
                {"num_docs", cfg.num_docs},
                {"sentences_per_doc", cfg.sentences_per_doc},
                {"min_tokens", cfg.min_tokens},
                {"max_tokens", cfg.max_tokens},
                {"vocab_size", cfg.vocab_size},
                {"marker_len", cfg.marker_len},
                {"technique_rate", cfg.technique_rate},
                {"second_marker_rate", cfg.second_marker_rate},
                {"marker_noise", cfg.marker_noise},
                {"class_weights", cfg.class_weights}};
}

inline void apply_json(SynthConfig& cfg, const Json& j) {
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("num_docs")) cfg.num_docs = j.at("num_docs").get<int>();
    if (j.contains("sentences_per_doc")) cfg.sentences_per_doc = j.at("sentences_per_doc").get<int>();
    if (j.contains("min_tokens")) cfg.min_tokens = j.at("min_tokens").get<int>();
    if (j.contains("max_tokens")) cfg.max_tokens = j.at("max_tokens").get<int>();
    if (j.contains("vocab_size")) cfg.vocab_size = j.at("vocab_size").get<int>();
    if (j.contains("marker_len")) cfg.marker_len = j.at("marker_len").get<int>();
    if (j.contains("technique_rate")) cfg.technique_rate = j.at("technique_rate").get<double>();
    if (j.contains("second_marker_rate"))
        cfg.second_marker_rate = j.at("second_marker_rate").get<double>();
    if (j.contains("marker_noise")) cfg.marker_noise = j.at("marker_noise").get<double>();
    if (j.contains("class_weights"))
        cfg.class_weights = j.at("class_weights").get<std::vector<double>>();
}

inline Json load_json(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open config file: " + file.string());
    Json j;
    in >> j;
    return j;
}

inline void write_json(const Json& j, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot write file: " + file.string());
    out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// run manifests: resolved config + input checksums, no wall-clock anywhere

inline constexpr const char* kToolVersion = "propdet 0.1.0";

inline std::string checksum_file(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file for checksum: " + file.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    char hex[19];
    std::snprintf(hex, sizeof(hex), "0x%016llx",
                  static_cast<unsigned long long>(fnv1a64(buf.str())));
    return hex;
}

inline std::string checksum_articles_dir(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& path : files) {
        h = fnv1a64(path.filename().string(), h);
        std::ifstream in(path, std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        h = fnv1a64(buf.str(), h);
    }
    char hex[19];
    std::snprintf(hex, sizeof(hex), "0x%016llx", static_cast<unsigned long long>(h));
    return hex;
}

}  // namespace propdet
