#pragma once

#include "propdet/common.hpp"
#include "propdet/corpus.hpp"
#include "propdet/encoder.hpp"
#include "propdet/heads.hpp"
#include "propdet/losses.hpp"
#include "propdet/vocab.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace propdet {

enum class DefEncoderMode {
    kSeparate,  // own trainable parameters, gradients only from the definition loss
    kShared,    // definitions are encoded by the main encoder
    kFrozen,    // own parameters, fixed after initialization
};

inline std::string to_string(DefEncoderMode mode) {
    switch (mode) {
        case DefEncoderMode::kSeparate: return "separate";
        case DefEncoderMode::kShared: return "shared";
        case DefEncoderMode::kFrozen: return "frozen";
    }
    return "separate";
}

inline DefEncoderMode def_encoder_mode_from_string(const std::string& s) {
    if (s == "separate") return DefEncoderMode::kSeparate;
    if (s == "shared") return DefEncoderMode::kShared;
    if (s == "frozen") return DefEncoderMode::kFrozen;
    throw std::invalid_argument("unknown definition encoder mode: " + s);
}

// One training example as the model consumes it: token ids truncated to
// max_seq_len together with the matching label slice.
struct BatchItem {
    std::vector<int> token_ids;
    std::vector<int> token_labels;
    std::array<int, kNumClasses> sentence_labels{};
};

struct Model {
    int hidden_dim = 32;
    int max_seq_len = 256;
    DefEncoderMode def_mode = DefEncoderMode::kSeparate;

    Vocabulary vocab;
    EncoderParams encoder;
    EncoderParams def_encoder;
    HeadParams heads;

    static Model init(Vocabulary vocab, int hidden_dim, int max_seq_len, std::uint64_t seed,
                      DefEncoderMode def_mode = DefEncoderMode::kSeparate) {
        Model m;
        m.hidden_dim = hidden_dim;
        m.max_seq_len = max_seq_len;
        m.def_mode = def_mode;
        m.vocab = std::move(vocab);
        Rng rng(seed);
        m.encoder = EncoderParams::init(m.vocab.size(), max_seq_len, hidden_dim, rng);
        m.def_encoder = EncoderParams::init(m.vocab.size(), max_seq_len, hidden_dim, rng);
        m.heads = HeadParams::init(hidden_dim, rng);
        return m;
    }

    std::vector<TensorRef> tensors() {
        std::vector<TensorRef> all = encoder.tensors("encoder.");
        for (auto& t : def_encoder.tensors("def_encoder.")) all.push_back(t);
        for (auto& t : heads.tensors("heads.")) all.push_back(t);
        return all;
    }

    // Token-id sequences for the 18 definition texts under this vocabulary.
    std::vector<std::vector<int>> definition_ids(const TechniqueCatalog& catalog) const {
        std::vector<std::vector<int>> ids;
        ids.reserve(kNumTechniques);
        for (int i = 0; i < kNumTechniques; ++i) {
            auto seq = vocab.encode_text(catalog.definition(i));
            if (seq.empty()) seq.push_back(Vocabulary::kUnk);
            if (static_cast<int>(seq.size()) > max_seq_len) seq.resize(max_seq_len);
            ids.push_back(std::move(seq));
        }
        return ids;
    }
};

struct ModelGrads {
    EncoderParams encoder;
    EncoderParams def_encoder;
    HeadParams heads;

    static ModelGrads zeros(const Model& m) {
        ModelGrads g;
        g.encoder = EncoderParams::zeros(m.vocab.size(), m.max_seq_len, m.hidden_dim);
        g.def_encoder = EncoderParams::zeros(m.vocab.size(), m.max_seq_len, m.hidden_dim);
        g.heads = HeadParams::zeros(m.hidden_dim);
        return g;
    }

    std::vector<TensorRef> tensors() {
        std::vector<TensorRef> all = encoder.tensors("encoder.");
        for (auto& t : def_encoder.tensors("def_encoder.")) all.push_back(t);
        for (auto& t : heads.tensors("heads.")) all.push_back(t);
        return all;
    }
};

struct LossBreakdown {
    double l_tok = 0.0;
    double l_sen = 0.0;
    double l_def = 0.0;
    double l_logic = 0.0;
    double l_joint = 0.0;
};

// Encodes the 18 definitions with the encoder the configuration selects.
inline Mat encode_definitions(const Model& model, const std::vector<std::vector<int>>& def_ids) {
    const EncoderParams& params =
        model.def_mode == DefEncoderMode::kShared ? model.encoder : model.def_encoder;
    Mat d(kNumTechniques, model.hidden_dim);
    for (int i = 0; i < kNumTechniques; ++i)
        d.row(i) = encode_definition(params, def_ids[static_cast<std::size_t>(i)]).transpose();
    return d;
}

// Joint loss over one mini-batch; per-sentence components are averaged and
// the definition loss enters once. When `grads` is non-null, parameter
// gradients of the batch loss are accumulated into it (the caller supplies
// zeroed buffers). `cached_definitions`, when given, is treated as constant
// (no gradient reaches the definition encoder); otherwise the definitions
// are re-encoded here with full gradient flow.
inline LossBreakdown compute_batch(const Model& model, const std::vector<BatchItem>& batch,
                                   const std::vector<std::vector<int>>& def_ids,
                                   const LossWeights& weights, ModelGrads* grads = nullptr,
                                   const Mat* cached_definitions = nullptr) {
    LossBreakdown out;
    const double inv_b = batch.empty() ? 0.0 : 1.0 / static_cast<double>(batch.size());

    // definition distance term
    Mat def_repr;
    std::vector<EncoderCache> def_caches;
    const bool fresh_defs = cached_definitions == nullptr;
    if (fresh_defs) {
        const EncoderParams& def_params =
            model.def_mode == DefEncoderMode::kShared ? model.encoder : model.def_encoder;
        def_repr.resize(kNumTechniques, model.hidden_dim);
        def_caches.resize(kNumTechniques);
        for (int i = 0; i < kNumTechniques; ++i)
            def_repr.row(i) =
                encode_definition(def_params, def_ids[static_cast<std::size_t>(i)],
                                  grads ? &def_caches[static_cast<std::size_t>(i)] : nullptr)
                    .transpose();
    } else {
        def_repr = *cached_definitions;
    }
    Mat d_class, d_def;
    out.l_def = definition_loss(class_representations(model.heads), def_repr,
                                grads ? &d_class : nullptr, grads ? &d_def : nullptr);
    if (grads) {
        grads->heads.sentence_w.bottomRows(kNumTechniques) += weights.beta * weights.lambda * d_class;
        if (fresh_defs && model.def_mode != DefEncoderMode::kFrozen) {
            EncoderParams& target = model.def_mode == DefEncoderMode::kShared ? grads->encoder
                                                                              : grads->def_encoder;
            const EncoderParams& def_params =
                model.def_mode == DefEncoderMode::kShared ? model.encoder : model.def_encoder;
            for (int i = 0; i < kNumTechniques; ++i) {
                const auto& cache = def_caches[static_cast<std::size_t>(i)];
                Mat d_states = Mat::Zero(cache.states.rows(), model.hidden_dim);
                Vec d_summary = weights.beta * weights.lambda * d_def.row(i).transpose();
                encoder_backward(def_params, cache, d_states, d_summary, target);
            }
        }
    }

    for (const auto& item : batch) {
        EncoderCache cache;
        const EncodedSentence enc = encode(model.encoder, item.token_ids, grads ? &cache : nullptr);
        const ModelOutput output = heads_forward(model.heads, enc);

        Vec d_sen_bce, d_sen_logic;
        Mat d_tok_focal, d_tok_logic;
        const double l_sen = sentence_bce(output.sentence_probs, item.sentence_labels, weights.eps,
                                          grads ? &d_sen_bce : nullptr);
        const auto [l_tok, tok_valid] = token_focal(output.token_probs, item.token_labels,
                                                    weights.focal_gamma, weights.eps,
                                                    grads ? &d_tok_focal : nullptr);
        (void)tok_valid;
        const double l_logic =
            logic_loss(output.sentence_probs, output.token_probs, weights.eps, weights.grounding,
                       grads ? &d_sen_logic : nullptr, grads ? &d_tok_logic : nullptr);
        out.l_tok += l_tok * inv_b;
        out.l_sen += l_sen * inv_b;
        out.l_logic += l_logic * inv_b;

        if (grads) {
            Vec d_sentence_probs =
                inv_b * (weights.beta * d_sen_bce + weights.gamma * d_sen_logic);
            Mat d_token_probs =
                inv_b * (weights.alpha * d_tok_focal + weights.gamma * d_tok_logic);
            Vec d_summary = Vec::Zero(model.hidden_dim);
            Mat d_states = Mat::Zero(output.token_probs.rows(), model.hidden_dim);
            heads_backward(model.heads, enc, output, d_sentence_probs, d_token_probs, grads->heads,
                           d_summary, d_states);
            encoder_backward(model.encoder, cache, d_states, d_summary, grads->encoder);
        }
    }

    out.l_joint = joint_loss(out.l_tok, out.l_sen, out.l_def, out.l_logic, weights);
    return out;
}

// ---------------------------------------------------------------------------
// checkpoint serialization (versioned binary, bitwise round-trip)

namespace detail {

inline void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

inline void write_string(std::ostream& out, const std::string& s) {
    write_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in) {
    const auto n = read_u64(in);
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    return s;
}

}  // namespace detail

inline constexpr std::uint64_t kCheckpointMagic = 0x50445443'4b505431ull;  // "PDTCKPT1"

inline void save_checkpoint(Model& model, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + file.string());
    detail::write_u64(out, kCheckpointMagic);
    detail::write_u64(out, static_cast<std::uint64_t>(model.hidden_dim));
    detail::write_u64(out, static_cast<std::uint64_t>(model.max_seq_len));
    detail::write_string(out, to_string(model.def_mode));
    const auto& tokens = model.vocab.tokens();
    detail::write_u64(out, tokens.size());
    for (const auto& tok : tokens) detail::write_string(out, tok);
    auto tensors = model.tensors();
    detail::write_u64(out, tensors.size());
    for (const auto& t : tensors) {
        detail::write_string(out, t.name);
        detail::write_u64(out, t.size);
        out.write(reinterpret_cast<const char*>(t.data),
                  static_cast<std::streamsize>(t.size * sizeof(double)));
    }
    if (!out) throw std::runtime_error("checkpoint write failed: " + file.string());
}

inline Model load_checkpoint(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + file.string());
    if (detail::read_u64(in) != kCheckpointMagic)
        throw std::runtime_error("not a checkpoint file: " + file.string());
    Model m;
    m.hidden_dim = static_cast<int>(detail::read_u64(in));
    m.max_seq_len = static_cast<int>(detail::read_u64(in));
    m.def_mode = def_encoder_mode_from_string(detail::read_string(in));
    const auto vocab_count = detail::read_u64(in);
    std::vector<std::string> tokens;
    tokens.reserve(vocab_count);
    for (std::uint64_t i = 0; i < vocab_count; ++i) tokens.push_back(detail::read_string(in));
    m.vocab = Vocabulary::from_tokens(std::move(tokens));
    m.encoder = EncoderParams::zeros(m.vocab.size(), m.max_seq_len, m.hidden_dim);
    m.def_encoder = EncoderParams::zeros(m.vocab.size(), m.max_seq_len, m.hidden_dim);
    m.heads = HeadParams::zeros(m.hidden_dim);
    auto tensors = m.tensors();
    const auto tensor_count = detail::read_u64(in);
    if (tensor_count != tensors.size())
        throw std::runtime_error("checkpoint tensor count mismatch: " + file.string());
    for (auto& t : tensors) {
        const auto name = detail::read_string(in);
        const auto size = detail::read_u64(in);
        if (name != t.name || size != t.size)
            throw std::runtime_error("checkpoint tensor layout mismatch at '" + name + "'");
        in.read(reinterpret_cast<char*>(t.data),
                static_cast<std::streamsize>(t.size * sizeof(double)));
    }
    if (!in) throw std::runtime_error("checkpoint read failed: " + file.string());
    return m;
}

}  // namespace propdet
