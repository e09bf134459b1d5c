#pragma once

#include "propdet/corpus.hpp"
#include "propdet/heads.hpp"
#include "propdet/losses.hpp"
#include "propdet/model.hpp"

#include <set>
#include <vector>

namespace propdet {

struct DecodeThresholds {
    double slc_threshold = 0.7;
    double flc_threshold = 0.9;
};

// Decoded predictions for one sentence. `token_classes` covers every token
// of the example; tokens past the encoded window default to class 0.
struct SentencePrediction {
    bool slc = false;
    std::vector<Fragment> fragments;
    std::set<int> y_c;  // technique classes whose sentence gate is open
    std::set<int> y_t;  // technique classes emitted at token level
    std::vector<int> token_classes;
};

// Constrained decoding: the sentence-level binary output fires only above
// slc_threshold; technique probabilities above flc_threshold open a gate
// that the corresponding token probabilities are multiplied by (the "none"
// class is untouched). Maximal runs of one technique become fragments.
// Comparisons are strict so a probability exactly at a threshold stays off.
inline SentencePrediction decode(const ModelOutput& output, const SentenceExample& example,
                                 const DecodeThresholds& thresholds = {}) {
    SentencePrediction pred;
    pred.slc = output.sentence_probs(0) > thresholds.slc_threshold;

    std::array<double, kNumClasses> gate{};
    gate[0] = 1.0;
    for (int c = 1; c < kNumClasses; ++c) {
        gate[static_cast<std::size_t>(c)] =
            output.sentence_probs(c) > thresholds.flc_threshold ? 1.0 : 0.0;
        if (gate[static_cast<std::size_t>(c)] > 0.0) pred.y_c.insert(c);
    }

    const auto encoded = static_cast<std::size_t>(output.token_probs.rows());
    pred.token_classes.assign(example.tokens.size(), 0);
    for (std::size_t t = 0; t < example.tokens.size(); ++t) {
        if (t >= encoded) break;
        int best = 0;
        double best_p = output.token_probs(static_cast<Eigen::Index>(t), 0);
        for (int c = 1; c < kNumClasses; ++c) {
            const double p = output.token_probs(static_cast<Eigen::Index>(t), c) *
                             gate[static_cast<std::size_t>(c)];
            if (p > best_p) {
                best = c;
                best_p = p;
            }
        }
        pred.token_classes[t] = best;
        if (best > 0) pred.y_t.insert(best);
    }

    std::size_t t = 0;
    while (t < pred.token_classes.size()) {
        const int cls = pred.token_classes[t];
        if (cls == 0) {
            ++t;
            continue;
        }
        std::size_t run_end = t;
        while (run_end + 1 < pred.token_classes.size() &&
               pred.token_classes[run_end + 1] == cls)
            ++run_end;
        Fragment frag;
        frag.doc_id = example.doc_id;
        frag.begin = example.tokens[t].begin;
        frag.end = example.tokens[run_end].end;
        frag.technique = cls - 1;
        pred.fragments.push_back(std::move(frag));
        t = run_end + 1;
    }
    return pred;
}

// Prediction-consistency sets measured on the raw model outputs rather than
// the gated decoder: Y_c at a 0.5 sentence threshold, Y_t from plain token
// argmax. Used so the consistency metric reflects the model itself.
struct UngatedSets {
    std::set<int> y_c;
    std::set<int> y_t;
};

inline UngatedSets ungated_sets(const ModelOutput& output) {
    UngatedSets sets;
    for (int c = 1; c < kNumClasses; ++c)
        if (output.sentence_probs(c) > 0.5) sets.y_c.insert(c);
    for (Eigen::Index t = 0; t < output.token_probs.rows(); ++t) {
        const int cls = row_argmax(output.token_probs, t);
        if (cls > 0) sets.y_t.insert(cls);
    }
    return sets;
}

// Runs the model over one example (truncating to the encoder window).
inline ModelOutput run_model(const Model& model, const SentenceExample& example) {
    std::vector<int> ids = model.vocab.encode(example.tokens);
    if (static_cast<int>(ids.size()) > model.max_seq_len)
        ids.resize(static_cast<std::size_t>(model.max_seq_len));
    return heads_forward(model.heads, encode(model.encoder, ids));
}

}  // namespace propdet
