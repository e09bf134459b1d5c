#pragma once

#include "propdet/common.hpp"
#include "propdet/corpus.hpp"
#include "propdet/inference.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace propdet {

struct Prf {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool empty_predictions = false;
    bool empty_gold = false;
};

inline double harmonic_f1(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

// Micro-averaged sentence-level scores, positive class = propaganda.
inline Prf score_slc(const std::vector<bool>& predicted, const std::vector<bool>& gold) {
    std::int64_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i] && gold[i]) ++tp;
        else if (predicted[i] && !gold[i]) ++fp;
        else if (!predicted[i] && gold[i]) ++fn;
    }
    Prf prf;
    prf.empty_predictions = tp + fp == 0;
    prf.empty_gold = tp + fn == 0;
    prf.precision = prf.empty_predictions ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    prf.recall = prf.empty_gold ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    prf.f1 = harmonic_f1(prf.precision, prf.recall);
    return prf;
}

enum class FlcMode {
    kSpans,  // location only, labels ignored
    kFull,   // location and technique must both match
};

namespace detail {

// Fraction of `frag`'s characters covered by the union of `others` with a
// matching document and (in full mode) technique. Interval merging keeps the
// credit of one fragment capped at 1 even when the other side overlaps itself.
inline double coverage_fraction(const Fragment& frag, const std::vector<Fragment>& others,
                                FlcMode mode) {
    std::vector<std::pair<std::int64_t, std::int64_t>> spans;
    for (const auto& other : others) {
        if (other.doc_id != frag.doc_id) continue;
        if (mode == FlcMode::kFull && other.technique != frag.technique) continue;
        const std::int64_t lo = std::max(frag.begin, other.begin);
        const std::int64_t hi = std::min(frag.end, other.end);
        if (lo < hi) spans.emplace_back(lo, hi);
    }
    std::sort(spans.begin(), spans.end());
    std::int64_t covered = 0, cursor = frag.begin;
    for (const auto& [lo, hi] : spans) {
        const std::int64_t from = std::max(cursor, lo);
        if (hi > from) {
            covered += hi - from;
            cursor = hi;
        }
    }
    return static_cast<double>(covered) / static_cast<double>(frag.end - frag.begin);
}

}  // namespace detail

// Fragment-level scoring with partial credit at the character level:
// precision credits each predicted fragment by the fraction of its
// characters covered by matching gold spans, recall mirrors it over gold.
inline Prf score_flc(const std::vector<Fragment>& predicted, const std::vector<Fragment>& gold,
                     FlcMode mode) {
    Prf prf;
    prf.empty_predictions = predicted.empty();
    prf.empty_gold = gold.empty();
    if (!predicted.empty()) {
        double credit = 0.0;
        for (const auto& frag : predicted) credit += detail::coverage_fraction(frag, gold, mode);
        prf.precision = credit / static_cast<double>(predicted.size());
    }
    if (!gold.empty()) {
        double credit = 0.0;
        for (const auto& frag : gold) credit += detail::coverage_fraction(frag, predicted, mode);
        prf.recall = credit / static_cast<double>(gold.size());
    }
    prf.f1 = harmonic_f1(prf.precision, prf.recall);
    return prf;
}

// Per-technique scores on the full task (both sides restricted to one
// technique; the label constraint is then implicit).
inline std::array<Prf, kNumTechniques> score_flc_per_technique(
    const std::vector<Fragment>& predicted, const std::vector<Fragment>& gold) {
    std::array<Prf, kNumTechniques> out;
    for (int k = 0; k < kNumTechniques; ++k) {
        std::vector<Fragment> p, g;
        for (const auto& frag : predicted)
            if (frag.technique == k) p.push_back(frag);
        for (const auto& frag : gold)
            if (frag.technique == k) g.push_back(frag);
        out[static_cast<std::size_t>(k)] = score_flc(p, g, FlcMode::kFull);
    }
    return out;
}

// Per-sentence prediction consistency: the fraction of token-level predicted
// classes that the sentence level also predicts. Sentences with empty Y_t
// carry no signal and are skipped from the corpus mean.
struct ConsistencyResult {
    double m_c = 0.0;
    std::size_t counted_sentences = 0;
    bool defined = false;
};

inline double sentence_consistency(const std::set<int>& y_c, const std::set<int>& y_t) {
    if (y_t.empty()) return 1.0;  // callers skip this case; value is irrelevant
    std::size_t hits = 0;
    for (int cls : y_t) hits += y_c.count(cls);
    return static_cast<double>(hits) / static_cast<double>(y_t.size());
}

inline ConsistencyResult consistency_metric(const std::vector<std::set<int>>& y_c_per_sentence,
                                            const std::vector<std::set<int>>& y_t_per_sentence) {
    ConsistencyResult result;
    double total = 0.0;
    for (std::size_t i = 0; i < y_t_per_sentence.size(); ++i) {
        if (y_t_per_sentence[i].empty()) continue;
        total += sentence_consistency(y_c_per_sentence[i], y_t_per_sentence[i]);
        ++result.counted_sentences;
    }
    if (result.counted_sentences > 0) {
        result.m_c = total / static_cast<double>(result.counted_sentences);
        result.defined = true;
    }
    return result;
}

// 19x19 token confusion counts, rows = gold class, columns = predicted.
using ConfusionMatrix = std::array<std::array<std::int64_t, kNumClasses>, kNumClasses>;

inline ConfusionMatrix confusion_matrix(const std::vector<std::vector<int>>& predicted_tokens,
                                        const std::vector<std::vector<int>>& gold_tokens) {
    ConfusionMatrix m{};
    for (std::size_t s = 0; s < gold_tokens.size(); ++s)
        for (std::size_t t = 0; t < gold_tokens[s].size(); ++t) {
            const int g = gold_tokens[s][t];
            const int p = t < predicted_tokens[s].size() ? predicted_tokens[s][t] : 0;
            m[static_cast<std::size_t>(g)][static_cast<std::size_t>(p)] += 1;
        }
    return m;
}

struct ScoreReport {
    Prf slc;
    Prf spans;
    Prf full;
    std::array<Prf, kNumTechniques> per_technique;
    ConsistencyResult consistency_ungated;
    ConsistencyResult consistency_gated;
    ConfusionMatrix confusion{};
};

// Decodes and scores a full dataset against its gold annotations.
inline ScoreReport evaluate_model(const Model& model, const std::vector<SentenceExample>& sentences,
                                  const std::vector<Fragment>& gold_fragments,
                                  const DecodeThresholds& thresholds = {}) {
    std::vector<Fragment> predicted_fragments;
    std::vector<bool> slc_pred, slc_gold;
    std::vector<std::set<int>> yc_gated, yt_gated, yc_raw, yt_raw;
    std::vector<std::vector<int>> pred_tokens, gold_tokens;

    for (const auto& example : sentences) {
        const ModelOutput output = run_model(model, example);
        const SentencePrediction pred = decode(output, example, thresholds);
        slc_pred.push_back(pred.slc);
        slc_gold.push_back(example.sentence_labels[0] != 0);
        for (const auto& frag : pred.fragments) predicted_fragments.push_back(frag);
        yc_gated.push_back(pred.y_c);
        yt_gated.push_back(pred.y_t);
        const UngatedSets raw = ungated_sets(output);
        yc_raw.push_back(raw.y_c);
        yt_raw.push_back(raw.y_t);
        pred_tokens.push_back(pred.token_classes);
        gold_tokens.push_back(example.token_labels);
    }

    ScoreReport report;
    report.slc = score_slc(slc_pred, slc_gold);
    report.spans = score_flc(predicted_fragments, gold_fragments, FlcMode::kSpans);
    report.full = score_flc(predicted_fragments, gold_fragments, FlcMode::kFull);
    report.per_technique = score_flc_per_technique(predicted_fragments, gold_fragments);
    report.consistency_ungated = consistency_metric(yc_raw, yt_raw);
    report.consistency_gated = consistency_metric(yc_gated, yt_gated);
    report.confusion = confusion_matrix(pred_tokens, gold_tokens);
    return report;
}

}  // namespace propdet
